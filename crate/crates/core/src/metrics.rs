//! Relative errors of a multiscale solution against the fine reference.

use serde::Serialize;

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::fem::{cell_mass, unit_cell_stiffness, FineFunction};
use crate::mesh::{FineGrid, GridPair};
use crate::spaces::CoarseSolution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub e_l2: f64,
    pub e_h1: f64,
    /// `‖κ^½(u_ms − u_h)‖²` and `‖κ^½ u_h‖²`
    pub l2_numerator: f64,
    pub l2_denominator: f64,
    /// `a(u_ms − u_h, u_ms − u_h)` and `a(u_h, u_h)`
    pub h1_numerator: f64,
    pub h1_denominator: f64,
    /// `a(u_ms, u_ms)`
    pub ms_energy: f64,
    pub dim: usize,
    pub seconds: f64,
}

fn quad(m: &[[f64; 4]; 4], v: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += v[a] * m[a][b] * v[b];
        }
    }
    s
}

/// `(∫ κ v², ∫ κ |∇v|²)` summed over fine cells, `cell(cx, cy)` giving the
/// four nodal values `[p00, p10, p01, p11]`.
fn integrate(nx: usize, field: &CoefficientField, mut cell: impl FnMut(usize, usize) -> [f64; 4]) -> (f64, f64) {
    let me = cell_mass(1.0 / nx as f64);
    let ke = unit_cell_stiffness();
    let (mut l2, mut h1) = (0.0, 0.0);
    for cy in 0..nx {
        for cx in 0..nx {
            let v = cell(cx, cy);
            let k = field.at(cx, cy);
            l2 += k * quad(&me, &v);
            h1 += k * quad(&ke, &v);
        }
    }
    (l2, h1)
}

fn global_forms(grid: &FineGrid, field: &CoefficientField, u: &[f64]) -> (f64, f64) {
    integrate(grid.nx(), field, |cx, cy| grid.cell_nodes(cx, cy).map(|p| u[p]))
}

fn check(u_ms: &FineFunction, u_h: &FineFunction, field: &CoefficientField) -> Result<FineGrid> {
    let grid = FineGrid::new(field.nx())?;
    if u_ms.len() != grid.num_nodes() || u_h.len() != grid.num_nodes() {
        return Err(Error::Mismatch("functions and field live on different grids".into()));
    }
    Ok(grid)
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den > 0.0 {
        Ok((num.max(0.0) / den).sqrt())
    } else {
        Err(Error::Mismatch("trivial reference: the reference solution has zero norm".into()))
    }
}

/// `‖κ^½(u_ms − u_h)‖ / ‖κ^½ u_h‖` with exact P1 mass integrals.
pub fn weighted_l2_error(u_ms: &FineFunction, u_h: &FineFunction, field: &CoefficientField) -> Result<f64> {
    let grid = check(u_ms, u_h, field)?;
    let diff = u_ms.sub(u_h);
    ratio(global_forms(&grid, field, &diff.values).0, global_forms(&grid, field, &u_h.values).0)
}

/// `√(a(u_ms − u_h, u_ms − u_h) / a(u_h, u_h))`.
pub fn energy_error(u_ms: &FineFunction, u_h: &FineFunction, field: &CoefficientField) -> Result<f64> {
    let grid = check(u_ms, u_h, field)?;
    let diff = u_ms.sub(u_h);
    ratio(global_forms(&grid, field, &diff.values).1, global_forms(&grid, field, &u_h.values).1)
}

/// Both forms of `u_K − u_h` summed coarse cell by coarse cell, so that
/// functions discontinuous across coarse edges are measured piecewise.
fn broken_forms(grids: &GridPair, field: &CoefficientField, cells: &[Vec<f64>], u_h: Option<&FineFunction>) -> (f64, f64) {
    let fine = &grids.fine;
    let (mut l2, mut h1) = (0.0, 0.0);
    let me = cell_mass(fine.h());
    let ke = unit_cell_stiffness();
    for (k, u) in cells.iter().enumerate() {
        let cp = grids.coarse.cell_patch(k);
        for (cx, cy) in cp.cells() {
            let loc = cp.cell_local_nodes(cx, cy);
            let glob = fine.cell_nodes(cx, cy);
            let mut v = [0.0; 4];
            for a in 0..4 {
                v[a] = u[loc[a]] - u_h.map_or(0.0, |r| r.values[glob[a]]);
            }
            let kappa = field.at(cx, cy);
            l2 += kappa * quad(&me, &v);
            h1 += kappa * quad(&ke, &v);
        }
    }
    (l2, h1)
}

/// Broken weighted `L²` error of a cellwise solution.
pub fn broken_weighted_l2_error(grids: &GridPair, cells: &[Vec<f64>], u_h: &FineFunction, field: &CoefficientField) -> Result<f64> {
    let num = broken_forms(grids, field, cells, Some(u_h)).0;
    ratio(num, global_forms(&grids.fine, field, &u_h.values).0)
}

/// Broken energy error `√(Σ_K a_K(e, e) / a(u_h, u_h))`.
pub fn broken_energy_error(grids: &GridPair, cells: &[Vec<f64>], u_h: &FineFunction, field: &CoefficientField) -> Result<f64> {
    let num = broken_forms(grids, field, cells, Some(u_h)).1;
    ratio(num, global_forms(&grids.fine, field, &u_h.values).1)
}

/// Full report for a coarse solution; the broken forms are used throughout,
/// which coincide with the global ones for conforming spaces.
pub fn error_report(grids: &GridPair, solution: &CoarseSolution, u_h: &FineFunction, field: &CoefficientField, seconds: f64) -> Result<ErrorReport> {
    field.check_grid(&grids.fine)?;
    if u_h.len() != grids.fine.num_nodes() {
        return Err(Error::Mismatch("reference lives on a different grid".into()));
    }
    let (l2n, h1n) = broken_forms(grids, field, &solution.cells, Some(u_h));
    let (l2d, h1d) = global_forms(&grids.fine, field, &u_h.values);
    let (_, ms_energy) = broken_forms(grids, field, &solution.cells, None);
    Ok(ErrorReport {
        e_l2: ratio(l2n, l2d)?,
        e_h1: ratio(h1n, h1d)?,
        l2_numerator: l2n,
        l2_denominator: l2d,
        h1_numerator: h1n,
        h1_denominator: h1d,
        ms_energy,
        dim: solution.coefficients.len(),
        seconds,
    })
}
