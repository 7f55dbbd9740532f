//! Sparse storage and the two symmetric positive definite solvers used
//! throughout: a banded Cholesky factorization for the many small local
//! problems and the reduced Galerkin system, and Jacobi-preconditioned
//! conjugate gradients for the global fine-scale system.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over the stored entries of `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[span.clone()].binary_search(&col) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// Quadratic form `xᵀ A x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        dot(x, &ay)
    }

    /// Principal submatrix on the index set `keep` (in the given order).
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            for (c, v) in self.row(old_r) {
                let nc = map[c];
                if nc != usize::MAX {
                    triplets.push((new_r, nc, v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), triplets)
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// Maximum relative asymmetry `max |a_ij - a_ji| / max |a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cholesky factor `L` of a symmetric positive definite band matrix, stored
/// row-wise: row `i` keeps `L[i][i-bw..=i]`.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the lower band of a symmetric matrix given entry-wise.
    /// `entry(i, j)` is queried only for `i - bw <= j <= i`.
    pub fn factor_with(n: usize, bw: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                data[i * w + (j + bw - i)] = entry(i, j);
            }
        }
        let mut f = Self { n, bw, data };
        f.factor_in_place()?;
        Ok(f)
    }

    /// Factors a symmetric CSR matrix; only the lower triangle is read.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[i * w + (j + bw - i)] = v;
                }
            }
        }
        let mut f = Self { n, bw, data };
        f.factor_in_place()?;
        Ok(f)
    }

    /// Factors a lower band assembled elsewhere (row-major storage of
    /// width `bw + 1`, same layout as the factor).
    pub fn factor_band(n: usize, bw: usize, data: Vec<f64>) -> Result<Self> {
        assert_eq!(data.len(), n * (bw + 1));
        let mut f = Self { n, bw, data };
        f.factor_in_place()?;
        Ok(f)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let data = &mut self.data;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // columns k in [max(i,j)-bw, j) shared by rows i and j
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = data[i * w + (j + bw - i)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= data[ri + k] * data[rj + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = s / data[j * w + bw];
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        assert_eq!(x.len(), n);
        // L y = b
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let mut s = x[i];
            for j in j0..i {
                s -= self.data[ri + j] * x[j];
            }
            x[i] = s / self.data[i * w + bw];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            x[i] /= self.data[i * w + bw];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            for j in j0..i {
                x[j] -= self.data[ri + j] * xi;
            }
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
///
/// Stops when the recursive residual satisfies `‖r‖_{D⁻¹} ≤ tol·‖b‖_{D⁻¹}`,
/// `D = diag(a)`. The 2-norm of the true residual cannot be driven far
/// below `ε·‖|A||x|‖` and at high contrast that floor sits above `1e-10‖b‖`,
/// so the scaled norm is the one that is meaningful. The true residual is
/// returned alongside.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut rz = dot(&r, &z);
    let bnorm = rz.sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        rel = rz_new.max(0.0).sqrt() / bnorm;
        if !rel.is_finite() {
            break;
        }
        if rel <= tol {
            let ax = a.mul_vec(&x);
            let true_rz: f64 = b.iter().zip(&ax).zip(&inv_diag).map(|((b, a), d)| (b - a) * (b - a) * d).sum();
            return Ok(CgOutcome {
                solution: x,
                iterations: it,
                relative_residual: true_rz.sqrt() / bnorm,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rel,
    })
}

/// Systems up to this many unknowns are factored directly.
pub const DIRECT_SOLVE_LIMIT: usize = 12_000;

/// Solves an SPD system to relative residual `tol`, by banded Cholesky for
/// small systems and by preconditioned CG above [`DIRECT_SOLVE_LIMIT`].
/// The direct path ignores `tol`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if a.nrows() <= DIRECT_SOLVE_LIMIT {
        let f = BandedCholesky::factor(a)?;
        let mut x = f.solve(b);
        // one refinement step keeps the direct path within the same contract
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = f.solve(&r);
        for (x, d) in x.iter_mut().zip(dx) {
            *x += d;
        }
        Ok(x)
    } else {
        let max_iter = 20 * a.nrows() + 1000;
        Ok(pcg(a, b, tol, max_iter)?.solution)
    }
}
