//! Reads a permeability raster, resamples it onto a fine grid and solves.
//!
//! `cargo run --example raster_field -- path/to/field.txt [fine]`
//! Without a path a small layered raster is generated in a temp file.

use std::path::PathBuf;

use edge_msfem::coefficient::load_raster;
use edge_msfem::fem;
use edge_msfem::mesh::FineGrid;

fn main() -> edge_msfem::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = match args.next() {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("edge_msfem_layers.txt");
            let mut text = String::from("8 8\n");
            for row in 0..8 {
                let v = if row % 3 == 1 { "1e4" } else { "1" };
                text.push_str(&vec![v; 8].join(" "));
                text.push('\n');
            }
            std::fs::write(&p, text).expect("temp raster");
            p
        }
    };
    let nx: usize = args.next().map(|s| s.parse().expect("fine resolution")).unwrap_or(64);

    let grid = FineGrid::new(nx)?;
    let field = load_raster(&path, &grid)?;
    let u = fem::fine_reference(&grid, &field, &vec![1.0; grid.num_nodes()])?;
    println!(
        "{}: κ in [{:e}, {:e}], max u_h {:.4e}",
        path.display(),
        field.min(),
        field.max(),
        u.values.iter().cloned().fold(f64::MIN, f64::max)
    );
    Ok(())
}
