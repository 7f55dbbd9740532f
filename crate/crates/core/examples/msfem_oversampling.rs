//! Classical MsFEM with and without oversampling. Oversampled bases are
//! nonconforming, so the errors are broken (cellwise) norms.

use edge_msfem::coefficient::preset_field;
use edge_msfem::fem;
use edge_msfem::local::build_pou;
use edge_msfem::mesh::build_grids;
use edge_msfem::metrics::error_report;
use edge_msfem::spaces::{coarse_solve, msfem_space, Oversampling};

fn main() -> edge_msfem::Result<()> {
    let grids = build_grids(16, 8)?;
    let field = preset_field(&grids.fine, "inclusions")?;
    let f = vec![1.0; grids.fine.num_nodes()];
    let u_h = fem::fine_reference(&grids.fine, &field, &f)?;
    let pou = build_pou(&grids, &field)?;

    for os in [Oversampling::None, Oversampling::Half, Oversampling::Full] {
        let space = msfem_space(&grids, &field, &pou, os)?;
        let sol = coarse_solve(&grids, &space, &field, &f)?;
        let r = error_report(&grids, &sol, &u_h, &field, 0.0)?;
        println!(
            "K⁺ {os:>4}: e_L2 {:.4e}  e_H1 {:.4e}  fallback cells {}",
            r.e_l2,
            r.e_h1,
            space.fallback_cells.len()
        );
    }
    Ok(())
}
