//! Haar projections of `sin(πx)` and the hierarchical surplus of the same
//! samples, level by level.

use std::f64::consts::PI;

use edge_msfem::wavelets::{hierarchical_surplus, project_l2, projection_error};

fn main() -> edge_msfem::Result<()> {
    let m = 1 << 10;
    let v: Vec<f64> = (0..=m).map(|k| (PI * k as f64 / m as f64).sin()).collect();

    println!("level  ‖v − P_ℓ v‖     ratio");
    let mut last = None;
    for level in 0..=7 {
        let e = projection_error(&v, level)?;
        let ratio = last.map(|p: f64| format!("{:.4}", e / p)).unwrap_or_default();
        println!("{level:>5}  {e:.6e}  {ratio}");
        last = Some(e);
    }

    let c = project_l2(&v, 3)?;
    println!("\nHaar coefficients at ℓ=3: {:.4?}", c.coefficients);
    let s = hierarchical_surplus(&v, 3)?;
    println!("hierarchical surpluses at ℓ=3: {:.4?}", s);
    Ok(())
}
