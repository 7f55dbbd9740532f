//! Wavelet-based edge multiscale method: energy error against the level.
//!
//! `cargo run --example wemsfem -- [haar|hierarchical]`

use edge_msfem::coefficient::preset_field;
use edge_msfem::fem;
use edge_msfem::mesh::build_grids;
use edge_msfem::metrics::error_report;
use edge_msfem::spaces::{coarse_solve, prepare, wemsfem_space};
use edge_msfem::wavelets::{WaveletKind, WaveletSpec};

fn main() -> edge_msfem::Result<()> {
    let kind: WaveletKind = std::env::args().nth(1).as_deref().unwrap_or("haar").parse()?;
    let grids = build_grids(8, 16)?;
    let field = preset_field(&grids.fine, "model1-analogue")?;
    let f = vec![1.0; grids.fine.num_nodes()];
    let u_h = fem::fine_reference(&grids.fine, &field, &f)?;
    let offline = prepare(&grids, &field)?;

    println!("{kind}, H = 1/8, fine 128");
    for level in 0..=3 {
        let space = wemsfem_space(&grids, &field, &offline, WaveletSpec { kind, level })?;
        let sol = coarse_solve(&grids, &space, &field, &f)?;
        let r = error_report(&grids, &sol, &u_h, &field, 0.0)?;
        println!("ℓ={level}: dim {:>5}  e_L2 {:.4e}  e_H1 {:.4e}", space.dim(), r.e_l2, r.e_h1);
    }
    Ok(())
}
