//! Fine-scale P1 reference on a synthetic high-contrast field.
//!
//! `cargo run --example fine_solve -- [fine] [preset]`

use edge_msfem::coefficient::preset_field;
use edge_msfem::fem;
use edge_msfem::mesh::FineGrid;

fn main() -> edge_msfem::Result<()> {
    let mut args = std::env::args().skip(1);
    let nx: usize = args.next().map(|s| s.parse().expect("fine resolution")).unwrap_or(128);
    let name = args.next().unwrap_or_else(|| "model1-analogue".into());

    let grid = FineGrid::new(nx)?;
    let field = preset_field(&grid, &name)?;
    let f = vec![1.0; grid.num_nodes()];
    let u = fem::fine_reference(&grid, &field, &f)?;
    let a = fem::assemble_stiffness(&grid, &field)?;

    let max = u.values.iter().cloned().fold(f64::MIN, f64::max);
    println!("{name} on {nx}×{nx}: contrast {:.1e}", field.contrast());
    println!("max u_h = {max:.6e}, a(u_h,u_h) = {:.6e}", a.energy(&u.values));
    Ok(())
}
