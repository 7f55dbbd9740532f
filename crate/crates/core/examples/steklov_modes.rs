//! Steklov spectra of a few coarse neighborhoods: interior, edge and corner.

use edge_msfem::coefficient::preset_field;
use edge_msfem::local::NeighborhoodSolver;
use edge_msfem::mesh::build_grids;

fn main() -> edge_msfem::Result<()> {
    let grids = build_grids(8, 16)?;
    let field = preset_field(&grids.fine, "model1-analogue")?;
    for (i, j) in [(4, 4), (3, 0), (0, 0)] {
        let node = grids.coarse.node(i, j);
        let solver = NeighborhoodSolver::new(&grids, &field, node)?;
        let s = solver.steklov(0)?;
        let shown: Vec<String> = s.eigenvalues.iter().take(8).map(|l| format!("{l:.3e}")).collect();
        println!(
            "O=({i},{j}) {:?}: {} boundary DOFs, lowest λ: {}",
            solver.dofs.kind,
            s.eigenvalues.len(),
            shown.join(" ")
        );
    }
    Ok(())
}
