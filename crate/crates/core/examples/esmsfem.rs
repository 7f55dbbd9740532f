//! Spectral edge multiscale method: error and `Λ` against `N_b`.

use edge_msfem::coefficient::preset_field;
use edge_msfem::fem;
use edge_msfem::mesh::build_grids;
use edge_msfem::metrics::error_report;
use edge_msfem::spaces::{coarse_solve, esmsfem_space, prepare};

fn main() -> edge_msfem::Result<()> {
    let grids = build_grids(8, 16)?;
    let field = preset_field(&grids.fine, "model3-analogue")?;
    let f = vec![1.0; grids.fine.num_nodes()];
    let u_h = fem::fine_reference(&grids.fine, &field, &f)?;
    let offline = prepare(&grids, &field)?;

    for n_b in [2, 4, 6, 8, 10] {
        let space = esmsfem_space(&grids, &field, &offline, n_b)?;
        let sol = coarse_solve(&grids, &space, &field, &f)?;
        let r = error_report(&grids, &sol, &u_h, &field, 0.0)?;
        println!(
            "N_b={n_b}: Λ {:.3e}  dim {:>4}  e_L2 {:.4e}  e_H1 {:.4e}",
            space.lambda.unwrap(),
            space.dim(),
            r.e_l2,
            r.e_h1
        );
    }
    Ok(())
}
