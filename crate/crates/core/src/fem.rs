//! P1 finite elements on the structured triangulation: element matrices,
//! global and patch assembly, Dirichlet elimination and the fine-scale
//! reference solve.

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix};
use crate::mesh::{FineGrid, Patch, CELL_TRIANGLES};

/// Default relative residual for the fine-scale reference solve.
pub const FINE_TOL: f64 = 1e-10;

/// Gradient of the P1 interpolant on triangle `t` (0 = lower-right,
/// 1 = upper-left) of a fine cell with corner values `[v00, v10, v01, v11]`.
pub fn triangle_gradient(t: usize, v: &[f64; 4], h: f64) -> [f64; 2] {
    match t {
        0 => [(v[1] - v[0]) / h, (v[3] - v[1]) / h],
        _ => [(v[3] - v[2]) / h, (v[2] - v[0]) / h],
    }
}

/// Stiffness matrix of one fine cell for `κ = 1`, ordered
/// `[p00, p10, p01, p11]`. In 2D it does not depend on `h`.
pub fn unit_cell_stiffness() -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for tri in CELL_TRIANGLES {
        // gradients of the three hats on the reference-size triangle
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|a| {
                let mut v = [0.0; 4];
                v[tri[a]] = 1.0;
                let t = if tri == CELL_TRIANGLES[0] { 0 } else { 1 };
                triangle_gradient(t, &v, 1.0)
            })
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                k[tri[a]][tri[b]] += 0.5 * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            }
        }
    }
    k
}

/// Consistent P1 mass matrix of one fine cell of size `h`.
pub fn cell_mass(h: f64) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    let area = 0.5 * h * h;
    for tri in CELL_TRIANGLES {
        for a in 0..3 {
            for b in 0..3 {
                m[tri[a]][tri[b]] += area / 12.0 * if a == b { 2.0 } else { 1.0 };
            }
        }
    }
    m
}

/// Nodal values of a function on the fine grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FineFunction {
    pub values: Vec<f64>,
}

impl FineFunction {
    pub fn zeros(grid: &FineGrid) -> Self {
        Self {
            values: vec![0.0; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: &FineGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: (0..grid.num_nodes())
                .map(|p| {
                    let (x, y) = grid.node_coords(p);
                    f(x, y)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Values on `patch`, in its local numbering.
    pub fn restrict(&self, grid: &FineGrid, patch: &Patch) -> Vec<f64> {
        (0..patch.len()).map(|l| self.values[patch.global(grid, l)]).collect()
    }
}

/// Symmetric operator, right-hand side and prescribed values.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(dof, value)`, sorted by dof.
    pub constrained: Vec<(usize, f64)>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, mut constrained: Vec<(usize, f64)>) -> Self {
        constrained.sort_unstable_by_key(|c| c.0);
        constrained.dedup_by_key(|c| c.0);
        Self {
            matrix,
            rhs,
            constrained,
        }
    }

    /// Eliminates the prescribed DOFs and solves the free block to relative
    /// residual `tol`.
    pub fn solve(&self, tol: f64) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        if self.rhs.len() != n {
            return Err(Error::Mismatch(format!("rhs length {} for a {n}×{n} system", self.rhs.len())));
        }
        let mut x = vec![0.0; n];
        let mut fixed = vec![false; n];
        for &(d, v) in &self.constrained {
            fixed[d] = true;
            x[d] = v;
        }
        let free: Vec<usize> = (0..n).filter(|&d| !fixed[d]).collect();
        if free.is_empty() {
            return Ok(x);
        }
        let ax = self.matrix.mul_vec(&x);
        let b: Vec<f64> = free.iter().map(|&d| self.rhs[d] - ax[d]).collect();
        let a_ff = self.matrix.principal_submatrix(&free);
        let y = linalg::solve_spd(&a_ff, &b, tol)?;
        for (&d, v) in free.iter().zip(y) {
            x[d] = v;
        }
        Ok(x)
    }
}

/// Stiffness matrix of `a(u,v) = ∫ κ ∇u·∇v` on the fine cells of `patch`,
/// in the patch's local numbering.
pub fn assemble_patch_stiffness(grid: &FineGrid, field: &CoefficientField, patch: &Patch) -> CsrMatrix {
    let ke = unit_cell_stiffness();
    let mut triplets = Vec::with_capacity(patch.num_cells() * 16);
    let _ = grid;
    for (cx, cy) in patch.cells() {
        let kappa = field.at(cx, cy);
        let loc = patch.cell_local_nodes(cx, cy);
        for a in 0..4 {
            for b in 0..4 {
                if ke[a][b] != 0.0 {
                    triplets.push((loc[a], loc[b], kappa * ke[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(patch.len(), patch.len(), triplets)
}

pub fn assemble_stiffness(grid: &FineGrid, field: &CoefficientField) -> Result<CsrMatrix> {
    field.check_grid(grid)?;
    Ok(assemble_patch_stiffness(grid, field, &grid.full_patch()))
}

/// Mass matrix, optionally weighted by `κ`, on the fine cells of `patch`.
pub fn assemble_patch_mass(grid: &FineGrid, weight: Option<&CoefficientField>, patch: &Patch) -> CsrMatrix {
    let me = cell_mass(grid.h());
    let mut triplets = Vec::with_capacity(patch.num_cells() * 16);
    for (cx, cy) in patch.cells() {
        let w = weight.map_or(1.0, |f| f.at(cx, cy));
        let loc = patch.cell_local_nodes(cx, cy);
        for a in 0..4 {
            for b in 0..4 {
                if me[a][b] != 0.0 {
                    triplets.push((loc[a], loc[b], w * me[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(patch.len(), patch.len(), triplets)
}

/// Load vector `(f, φ_p)` for the P1 interpolant of `f`, given by its nodal
/// values; exact per triangle.
pub fn assemble_load(grid: &FineGrid, f_nodal: &[f64]) -> Result<Vec<f64>> {
    if f_nodal.len() != grid.num_nodes() {
        return Err(Error::Mismatch(format!(
            "{} source values for {} fine nodes",
            f_nodal.len(),
            grid.num_nodes()
        )));
    }
    Ok(patch_load(grid, &grid.full_patch(), f_nodal))
}

/// Load vector for a source given as a function of `(x, y)`.
pub fn assemble_load_fn(grid: &FineGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let nodal = FineFunction::from_fn(grid, f);
    patch_load(grid, &grid.full_patch(), &nodal.values)
}

/// Local load on `patch` from local nodal values of the source.
pub fn patch_load(grid: &FineGrid, patch: &Patch, f_local: &[f64]) -> Vec<f64> {
    let me = cell_mass(grid.h());
    let mut b = vec![0.0; patch.len()];
    for (cx, cy) in patch.cells() {
        let loc = patch.cell_local_nodes(cx, cy);
        for a in 0..4 {
            let mut s = 0.0;
            for c in 0..4 {
                s += me[a][c] * f_local[loc[c]];
            }
            b[loc[a]] += s;
        }
    }
    b
}

/// Load vector of a source that is constant on each fine cell.
pub fn patch_load_cellwise(grid: &FineGrid, patch: &Patch, cell_values: &[f64]) -> Vec<f64> {
    let me = cell_mass(grid.h());
    let row: Vec<f64> = me.iter().map(|r| r.iter().sum()).collect();
    let mut b = vec![0.0; patch.len()];
    for (cx, cy) in patch.cells() {
        let g = cell_values[grid.cell(cx, cy)];
        let loc = patch.cell_local_nodes(cx, cy);
        for a in 0..4 {
            b[loc[a]] += g * row[a];
        }
    }
    b
}

/// Applies the patch stiffness without forming it: `y = A x`.
pub fn apply_patch_stiffness(field: &CoefficientField, patch: &Patch, x: &[f64], y: &mut [f64]) {
    let ke = unit_cell_stiffness();
    y.iter_mut().for_each(|v| *v = 0.0);
    for (cx, cy) in patch.cells() {
        let kappa = field.at(cx, cy);
        let loc = patch.cell_local_nodes(cx, cy);
        let xv = [x[loc[0]], x[loc[1]], x[loc[2]], x[loc[3]]];
        for a in 0..4 {
            let s = ke[a][0] * xv[0] + ke[a][1] * xv[1] + ke[a][2] * xv[2] + ke[a][3] * xv[3];
            y[loc[a]] += kappa * s;
        }
    }
}

/// Stiffness system with homogeneous Dirichlet data on `∂D`.
pub fn dirichlet_system(grid: &FineGrid, field: &CoefficientField, load: Vec<f64>, boundary: impl Fn(f64, f64) -> f64) -> Result<SparseSystem> {
    let matrix = assemble_stiffness(grid, field)?;
    let constrained = grid
        .boundary_nodes()
        .into_iter()
        .map(|p| {
            let (x, y) = grid.node_coords(p);
            (p, boundary(x, y))
        })
        .collect();
    Ok(SparseSystem::new(matrix, load, constrained))
}

/// Fine-scale reference `u_h` with `u = 0` on `∂D`.
pub fn fine_reference(grid: &FineGrid, field: &CoefficientField, f_nodal: &[f64]) -> Result<FineFunction> {
    fine_reference_tol(grid, field, f_nodal, FINE_TOL)
}

pub fn fine_reference_tol(grid: &FineGrid, field: &CoefficientField, f_nodal: &[f64], tol: f64) -> Result<FineFunction> {
    let load = assemble_load(grid, f_nodal)?;
    let system = dirichlet_system(grid, field, load, |_, _| 0.0)?;
    Ok(FineFunction {
        values: system.solve(tol)?,
    })
}
