//! Global multiscale spaces and the coarse Galerkin solve.
//!
//! Basis functions are stored as pieces on the coarse cells of their
//! support, so conforming (edge multiscale, plain MsFEM) and nonconforming
//! (oversampled MsFEM) spaces share one representation and one assembly.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficient::{weighted_coefficient, CoefficientField, WeightedCoefficient};
use crate::error::{Error, Result};
use crate::fem::{self, FineFunction};
use crate::linalg::{self, BandedCholesky};
use crate::local::{build_pou, harmonic_corner_functions, NeighborhoodSolver, PouBasis};
use crate::mesh::{GridPair, LocalDofMap};
use crate::parallel::map_indexed;
use crate::wavelets::{edge_basis, WaveletKind, WaveletSpec};

/// Relative Gram threshold below which a local basis function is treated as
/// dependent on the ones before it.
pub const PRUNE_TOL: f64 = 1e-12;

/// Corner-matching systems with a smaller reciprocal condition number fall
/// back to the non-oversampled cell basis.
const MATCHING_RCOND: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Oversampling {
    /// `K⁺ = K`
    None,
    /// `K⁺ = K + n/2` fine cells
    Half,
    /// `K⁺ = K + n` fine cells
    Full,
}

impl Oversampling {
    pub fn margin(self, n: usize) -> usize {
        match self {
            Oversampling::None => 0,
            Oversampling::Half => n / 2,
            Oversampling::Full => n,
        }
    }
}

impl FromStr for Oversampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Oversampling::None),
            "half" => Ok(Oversampling::Half),
            "full" => Ok(Oversampling::Full),
            other => Err(Error::Config(format!("unknown oversampling mode {other:?} (none, half, full)"))),
        }
    }
}

impl fmt::Display for Oversampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Oversampling::None => "none",
            Oversampling::Half => "half",
            Oversampling::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    MsFem(Oversampling),
    EsMsFem { n_b: usize },
    WeMsFem(WaveletSpec),
    Custom,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::MsFem(Oversampling::None) => f.write_str("msfem"),
            Method::MsFem(o) => write!(f, "msfem-{o}"),
            Method::EsMsFem { .. } => f.write_str("esmsfem"),
            Method::WeMsFem(spec) => match spec.kind {
                WaveletKind::Haar => f.write_str("wemsfem-haar"),
                WaveletKind::Hierarchical => f.write_str("wemsfem-hierarchical"),
            },
            Method::Custom => f.write_str("custom"),
        }
    }
}

/// Where a basis function came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    MsFem,
    Steklov { mode: usize },
    Wavelet { edge: usize, level: u32, index: usize },
    Source,
    Custom,
}

/// Values of a basis function on one coarse cell, in the cell patch's
/// local numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct CellPiece {
    pub cell: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisFunction {
    pub node: Option<usize>,
    pub kind: BasisKind,
    pub pieces: Vec<CellPiece>,
}

#[derive(Clone, Debug)]
pub struct MultiscaleSpace {
    pub method: Method,
    pub basis: Vec<BasisFunction>,
    /// pieces agree on shared coarse edges
    pub conforming: bool,
    /// `Λ = min_i λ_{N_b+1}` for spectral spaces
    pub lambda: Option<f64>,
    /// number of candidates removed as linearly dependent
    pub pruned: usize,
    /// coarse cells whose oversampled basis fell back to `K⁺ = K`
    pub fallback_cells: Vec<usize>,
    nx_coarse: usize,
    n: usize,
}

impl MultiscaleSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn check_grids(&self, grids: &GridPair) -> Result<()> {
        if self.nx_coarse != grids.coarse.nx() || self.n != grids.coarse.refinement() {
            return Err(Error::Mismatch("space was built on different grids".into()));
        }
        Ok(())
    }

    /// Space spanned by arbitrary global fine functions (zeroed on `∂D`).
    pub fn from_functions(grids: &GridPair, functions: &[FineFunction]) -> Result<Self> {
        let fine = &grids.fine;
        let mut basis = Vec::with_capacity(functions.len());
        for f in functions {
            if f.len() != fine.num_nodes() {
                return Err(Error::Mismatch(format!("function of length {} on {} nodes", f.len(), fine.num_nodes())));
            }
            let mut pieces = Vec::new();
            for cell in 0..grids.coarse.num_cells() {
                let cp = grids.coarse.cell_patch(cell);
                let values: Vec<f64> = (0..cp.len())
                    .map(|l| {
                        let g = cp.global(fine, l);
                        if fine.is_boundary_node(g) {
                            0.0
                        } else {
                            f.values[g]
                        }
                    })
                    .collect();
                if values.iter().any(|&v| v != 0.0) {
                    pieces.push(CellPiece { cell, values });
                }
            }
            basis.push(BasisFunction {
                node: None,
                kind: BasisKind::Custom,
                pieces,
            });
        }
        Ok(Self {
            method: Method::Custom,
            basis,
            conforming: true,
            lambda: None,
            pruned: 0,
            fallback_cells: Vec::new(),
            nx_coarse: grids.coarse.nx(),
            n: grids.coarse.refinement(),
        })
    }

    /// Basis function `k` as a global fine function; on nonconforming spaces
    /// shared nodes take the mean of the adjacent pieces.
    pub fn to_fine(&self, grids: &GridPair, k: usize) -> FineFunction {
        let fine = &grids.fine;
        let mut sum = vec![0.0; fine.num_nodes()];
        let mut count = vec![0u32; fine.num_nodes()];
        for piece in &self.basis[k].pieces {
            let cp = grids.coarse.cell_patch(piece.cell);
            for (l, v) in piece.values.iter().enumerate() {
                let g = cp.global(fine, l);
                sum[g] += v;
                count[g] += 1;
            }
        }
        for (s, &c) in sum.iter_mut().zip(&count) {
            if c > 1 {
                *s /= c as f64;
            }
        }
        FineFunction { values: sum }
    }

    /// For every coarse cell, `(basis index, piece index)` of the pieces on it,
    /// in basis order.
    pub fn cell_index(&self, grids: &GridPair) -> Vec<Vec<(usize, usize)>> {
        let mut index = vec![Vec::new(); grids.coarse.num_cells()];
        for (b, f) in self.basis.iter().enumerate() {
            for (p, piece) in f.pieces.iter().enumerate() {
                index[piece.cell].push((b, p));
            }
        }
        index
    }
}

/// Data shared by all edge multiscale spaces over one coefficient.
#[derive(Clone, Debug)]
pub struct OfflineData {
    pub pou: PouBasis,
    pub weighted: WeightedCoefficient,
}

pub fn prepare(grids: &GridPair, field: &CoefficientField) -> Result<OfflineData> {
    let pou = build_pou(grids, field)?;
    let weighted = weighted_coefficient(grids, field, &pou)?;
    Ok(OfflineData { pou, weighted })
}

fn cell_pieces(grids: &GridPair, dofs: &LocalDofMap, local: &[f64]) -> Vec<CellPiece> {
    dofs.cells
        .iter()
        .map(|&cell| {
            let cp = grids.coarse.cell_patch(cell);
            let values = (0..cp.len())
                .map(|l| {
                    let (ix, iy) = cp.coords(l);
                    local[dofs.patch.local(ix, iy)]
                })
                .collect();
            CellPiece { cell, values }
        })
        .collect()
}

/// Greedy Cholesky on a Gram matrix: candidate `k` is kept when its residual
/// after projection onto the kept ones exceeds `tol · G_kk`.
pub fn independent_subset(gram: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let n = gram.nrows();
    let mut kept: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let d = gram[(k, k)];
        if !(d > 0.0) {
            continue;
        }
        let mut row = Vec::with_capacity(kept.len() + 1);
        for (j, &kj) in kept.iter().enumerate() {
            let mut s = gram[(k, kj)];
            for p in 0..j {
                s -= row[p] * rows[j][p];
            }
            row.push(s / rows[j][j]);
        }
        let r = d - row.iter().map(|v| v * v).sum::<f64>();
        if r > tol * d {
            row.push(r.sqrt());
            kept.push(k);
            rows.push(row);
        }
    }
    kept
}

/// Multiplies candidates by `χ_i`, zeroes them on `∂D`, drops dependent ones
/// and scales the rest to unit energy.
fn finish_neighborhood(
    grids: &GridPair,
    solver: &NeighborhoodSolver,
    chi: &[f64],
    candidates: Vec<(BasisKind, Vec<f64>)>,
) -> (Vec<BasisFunction>, usize) {
    let dofs = solver.dofs;
    let funcs: Vec<(BasisKind, Vec<f64>)> = candidates
        .into_iter()
        .map(|(kind, g)| {
            let v = g
                .iter()
                .zip(chi)
                .enumerate()
                .map(|(l, (g, c))| if dofs.on_domain_boundary[l] { 0.0 } else { g * c })
                .collect();
            (kind, v)
        })
        .collect();
    let a = solver.stiffness();
    let applied: Vec<Vec<f64>> = funcs.iter().map(|(_, v)| a.mul_vec(v)).collect();
    let m = funcs.len();
    let gram = DMatrix::from_fn(m, m, |r, c| linalg::dot(&funcs[r].1, &applied[c]));
    let gram = (&gram + gram.transpose()) * 0.5;
    let kept = independent_subset(&gram, PRUNE_TOL);
    let pruned = m - kept.len();
    let basis = kept
        .into_iter()
        .map(|k| {
            let scale = 1.0 / gram[(k, k)].sqrt();
            let values: Vec<f64> = funcs[k].1.iter().map(|v| v * scale).collect();
            BasisFunction {
                node: Some(dofs.node),
                kind: funcs[k].0,
                pieces: cell_pieces(grids, dofs, &values),
            }
        })
        .collect();
    (basis, pruned)
}

fn collect_space(
    grids: &GridPair,
    method: Method,
    per_node: Vec<(Vec<BasisFunction>, usize)>,
    lambda: Option<f64>,
) -> MultiscaleSpace {
    let mut basis = Vec::new();
    let mut pruned = 0;
    for (b, p) in per_node {
        basis.extend(b);
        pruned += p;
    }
    MultiscaleSpace {
        method,
        basis,
        conforming: true,
        lambda,
        pruned,
        fallback_cells: Vec::new(),
        nx_coarse: grids.coarse.nx(),
        n: grids.coarse.refinement(),
    }
}

/// Spectral edge space: per neighborhood the `N_b − 1` lowest Steklov modes
/// and `v^i`, all multiplied by `χ_i`.
pub fn build_esmsfem_space(grids: &GridPair, field: &CoefficientField, n_b: usize) -> Result<MultiscaleSpace> {
    esmsfem_space(grids, field, &prepare(grids, field)?, n_b)
}

pub fn esmsfem_space(grids: &GridPair, field: &CoefficientField, offline: &OfflineData, n_b: usize) -> Result<MultiscaleSpace> {
    if n_b == 0 {
        return Err(Error::Config("N_b must be at least 1".into()));
    }
    field.check_grid(&grids.fine)?;
    offline.pou.check_grids(grids)?;
    let per_node = map_indexed(grids.coarse.num_nodes(), |i| {
        let solver = NeighborhoodSolver::new(grids, field, i)?;
        let steklov = solver.steklov(n_b - 1)?;
        let next = *steklov.eigenvalues.get(n_b).ok_or_else(|| Error::Eigen {
            neighborhood: i,
            msg: format!("N_b = {n_b} needs {} boundary DOFs, neighborhood has {}", n_b + 1, steklov.eigenvalues.len()),
        })?;
        let mut candidates: Vec<(BasisKind, Vec<f64>)> = steklov
            .extensions
            .into_iter()
            .enumerate()
            .map(|(mode, v)| (BasisKind::Steklov { mode }, v))
            .collect();
        candidates.push((BasisKind::Source, solver.local_source(&offline.weighted)?.values));
        let chi = offline.pou.local(grids, i);
        Ok((finish_neighborhood(grids, &solver, &chi, candidates), next))
    })?;
    let lambda = per_node.iter().map(|(_, l)| *l).fold(f64::INFINITY, f64::min);
    let per_node = per_node.into_iter().map(|(b, _)| b).collect();
    Ok(collect_space(grids, Method::EsMsFem { n_b }, per_node, Some(lambda)))
}

/// Nodal boundary data on `∂ω_i` of one edge function. Interior edge nodes
/// take the P1 trace (Haar: mean of the two adjacent intervals); an end node
/// shared with a neighbouring edge takes half of the edge's own value there.
pub fn edge_trace(kind: WaveletKind, values: &[f64], shared: [bool; 2]) -> Vec<f64> {
    let weight = |j: usize, last: usize| {
        if (j == 0 && shared[0]) || (j == last && shared[1]) {
            0.5
        } else {
            1.0
        }
    };
    match kind {
        WaveletKind::Haar => {
            let m = values.len();
            (0..=m)
                .map(|j| match j {
                    0 => weight(0, m) * values[0],
                    j if j == m => weight(m, m) * values[m - 1],
                    j => 0.5 * (values[j - 1] + values[j]),
                })
                .collect()
        }
        WaveletKind::Hierarchical => {
            let last = values.len() - 1;
            values.iter().enumerate().map(|(j, &v)| weight(j, last) * v).collect()
        }
    }
}

/// Wavelet edge space: per neighborhood the harmonic extensions of every
/// level-`ℓ` edge function (zero on the other edges) and `v^i`, all
/// multiplied by `χ_i`.
pub fn build_wemsfem_space(grids: &GridPair, field: &CoefficientField, spec: WaveletSpec) -> Result<MultiscaleSpace> {
    wemsfem_space(grids, field, &prepare(grids, field)?, spec)
}

pub fn wemsfem_space(grids: &GridPair, field: &CoefficientField, offline: &OfflineData, spec: WaveletSpec) -> Result<MultiscaleSpace> {
    field.check_grid(&grids.fine)?;
    offline.pou.check_grids(grids)?;
    let per_node = map_indexed(grids.coarse.num_nodes(), |i| {
        let solver = NeighborhoodSolver::new(grids, field, i)?;
        let dofs = solver.dofs;
        let mut owners = vec![0u8; dofs.len()];
        for &l in dofs.edges.iter().flatten() {
            owners[l] += 1;
        }
        let mut candidates = Vec::new();
        for (edge, nodes) in dofs.edges.iter().enumerate() {
            let set = edge_basis(nodes.len() - 1, spec)?;
            let shared = [owners[nodes[0]] > 1, owners[nodes[nodes.len() - 1]] > 1];
            for func in &set.functions {
                let trace = edge_trace(spec.kind, &func.values, shared);
                let mut data = vec![0.0; dofs.len()];
                for (&l, &v) in nodes.iter().zip(&trace) {
                    data[l] = v;
                }
                let kind = BasisKind::Wavelet {
                    edge,
                    level: func.level,
                    index: func.index,
                };
                candidates.push((kind, solver.extend_local(&data)));
            }
        }
        candidates.push((BasisKind::Source, solver.local_source(&offline.weighted)?.values));
        let chi = offline.pou.local(grids, i);
        Ok(finish_neighborhood(grids, &solver, &chi, candidates))
    })?;
    Ok(collect_space(grids, Method::WeMsFem(spec), per_node, None))
}

/// Classical MsFEM over interior coarse nodes; with oversampling the cell
/// basis comes from `κ`-harmonic problems on `K⁺` matched at the corners of `K`.
pub fn build_msfem_space(grids: &GridPair, field: &CoefficientField, oversampling: Oversampling) -> Result<MultiscaleSpace> {
    msfem_space(grids, field, &build_pou(grids, field)?, oversampling)
}

pub fn msfem_space(grids: &GridPair, field: &CoefficientField, pou: &PouBasis, oversampling: Oversampling) -> Result<MultiscaleSpace> {
    field.check_grid(&grids.fine)?;
    pou.check_grids(grids)?;
    let fine = &grids.fine;
    let n = grids.coarse.refinement();
    let margin = oversampling.margin(n);
    let cells = map_indexed(grids.coarse.num_cells(), |k| {
        if margin == 0 {
            return Ok((pou.cell_functions(k).clone(), false));
        }
        let cp = grids.coarse.cell_patch(k);
        let big = cp.grown(margin, fine.nx());
        let psi: Vec<Vec<f64>> = harmonic_corner_functions(grids, field, &big)?
            .iter()
            .map(|v| big.restrict_to(&cp, v))
            .collect();
        let corners = [0, n, n * (n + 1), (n + 1) * (n + 1) - 1];
        let p = DMatrix::from_fn(4, 4, |c, j| psi[j][corners[c]]);
        let svd = p.clone().svd(false, false);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        let alpha = match p.transpose().try_inverse() {
            Some(inv) if smin > MATCHING_RCOND * smax => inv,
            _ => return Ok((pou.cell_functions(k).clone(), true)),
        };
        let mut out: [Vec<f64>; 4] = Default::default();
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = (0..cp.len()).map(|l| (0..4).map(|j| alpha[(c, j)] * psi[j][l]).sum()).collect();
        }
        Ok((out, false))
    })?;
    let fallback_cells = cells.iter().enumerate().filter(|(_, c)| c.1).map(|(k, _)| k).collect();

    let mut basis = Vec::new();
    for i in grids.coarse.interior_nodes() {
        let dofs = grids.neighborhood_dofs(i);
        let pieces = dofs
            .cells
            .iter()
            .map(|&cell| {
                let corner = grids.coarse.cell_corners(cell).iter().position(|&c| c == i).unwrap();
                let cp = grids.coarse.cell_patch(cell);
                let values = cells[cell].0[corner]
                    .iter()
                    .enumerate()
                    .map(|(l, &v)| if fine.is_boundary_node(cp.global(fine, l)) { 0.0 } else { v })
                    .collect();
                CellPiece { cell, values }
            })
            .collect();
        basis.push(BasisFunction {
            node: Some(i),
            kind: BasisKind::MsFem,
            pieces,
        });
    }
    Ok(MultiscaleSpace {
        method: Method::MsFem(oversampling),
        basis,
        conforming: margin == 0,
        lambda: None,
        pruned: 0,
        fallback_cells,
        nx_coarse: grids.coarse.nx(),
        n,
    })
}

/// Multiscale solution: coefficients and reconstruction.
#[derive(Clone, Debug)]
pub struct CoarseSolution {
    pub coefficients: Vec<f64>,
    /// `u_ms` per coarse cell (cell patch numbering)
    pub cells: Vec<Vec<f64>>,
    /// `u_ms` on the fine grid (shared nodes averaged when nonconforming)
    pub fine: FineFunction,
    pub conforming: bool,
    /// diagonal shift used when the reduced matrix failed to factor
    pub shift: f64,
    /// relative residual of the reduced system
    pub residual: f64,
}

/// Symmetric band matrix, lower part stored row-wise (the layout of
/// [`BandedCholesky`]).
struct Band {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Band {
    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.data[i * w + self.bw - i..];
            let mut s = row[i] * x[i];
            for j in j0..i {
                s += row[j] * x[j];
                y[j] += row[j] * x[i];
            }
            y[i] += s;
        }
        y
    }
}

/// Reduced stiffness `Φ_Kᵀ A_K Φ_K` and load `Φ_Kᵀ b_K` of one coarse cell.
fn cell_block(
    grids: &GridPair,
    space: &MultiscaleSpace,
    field: &CoefficientField,
    f_nodal: &[f64],
    cell: usize,
    entries: &[(usize, usize)],
) -> (DMatrix<f64>, Vec<f64>) {
    let fine = &grids.fine;
    let cp = grids.coarse.cell_patch(cell);
    let f_local: Vec<f64> = (0..cp.len()).map(|l| f_nodal[cp.global(fine, l)]).collect();
    let load = fem::patch_load(fine, &cp, &f_local);
    let pieces: Vec<&[f64]> = entries.iter().map(|&(b, p)| &space.basis[b].pieces[p].values[..]).collect();
    let mut applied = vec![vec![0.0; cp.len()]; pieces.len()];
    for (v, out) in pieces.iter().zip(applied.iter_mut()) {
        fem::apply_patch_stiffness(field, &cp, v, out);
    }
    let m = pieces.len();
    let mut block = DMatrix::zeros(m, m);
    for r in 0..m {
        for c in 0..=r {
            let v = linalg::dot(pieces[r], &applied[c]);
            block[(r, c)] = v;
            block[(c, r)] = v;
        }
    }
    let rhs = pieces.iter().map(|v| linalg::dot(v, &load)).collect();
    (block, rhs)
}

/// Galerkin problem `a(u_ms, v) = (f, v)` for all `v` in the space, with
/// `f` given by nodal values (P1 interpolant).
pub fn coarse_solve(grids: &GridPair, space: &MultiscaleSpace, field: &CoefficientField, f_nodal: &[f64]) -> Result<CoarseSolution> {
    space.check_grids(grids)?;
    field.check_grid(&grids.fine)?;
    let fine = &grids.fine;
    if f_nodal.len() != fine.num_nodes() {
        return Err(Error::Mismatch(format!("source has {} values for {} nodes", f_nodal.len(), fine.num_nodes())));
    }
    let dim = space.dim();
    if dim == 0 {
        return Err(Error::Mismatch("empty multiscale space".into()));
    }
    let index = space.cell_index(grids);
    let blocks = map_indexed(index.len(), |k| Ok(cell_block(grids, space, field, f_nodal, k, &index[k])))?;

    let bw = index
        .iter()
        .filter(|e| !e.is_empty())
        .map(|e| {
            let lo = e.iter().map(|x| x.0).min().unwrap();
            let hi = e.iter().map(|x| x.0).max().unwrap();
            hi - lo
        })
        .max()
        .unwrap_or(0);
    let w = bw + 1;
    let mut band = vec![0.0; dim * w];
    let mut rhs = vec![0.0; dim];
    for (entries, (block, b)) in index.iter().zip(&blocks) {
        for (r, &(i, _)) in entries.iter().enumerate() {
            rhs[i] += b[r];
            for (c, &(j, _)) in entries.iter().enumerate() {
                if j <= i {
                    band[i * w + (j + bw - i)] += block[(r, c)];
                }
            }
        }
    }
    let matrix = Band { n: dim, bw, data: band };

    let mut shift = 0.0;
    let factor = match BandedCholesky::factor_band(dim, bw, matrix.data.clone()) {
        Ok(f) => f,
        Err(_) => {
            let trace: f64 = (0..dim).map(|i| matrix.data[i * w + bw]).sum();
            shift = 1e-14 * trace / dim as f64;
            let mut shifted = matrix.data.clone();
            for i in 0..dim {
                shifted[i * w + bw] += shift;
            }
            BandedCholesky::factor_band(dim, bw, shifted).map_err(|e| match e {
                Error::NotPositiveDefinite { pivot, .. } => Error::Singular { indices: vec![pivot] },
                other => other,
            })?
        }
    };
    let mut coefficients = factor.solve(&rhs);
    let rhs_norm = linalg::norm2(&rhs);
    let mut residual = 0.0;
    for _ in 0..3 {
        let ax = matrix.mul_vec(&coefficients);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        residual = if rhs_norm > 0.0 { linalg::norm2(&r) / rhs_norm } else { linalg::norm2(&r) };
        if residual < 1e-15 {
            break;
        }
        let dx = factor.solve(&r);
        for (x, d) in coefficients.iter_mut().zip(dx) {
            *x += d;
        }
    }
    if !coefficients.iter().all(|c| c.is_finite()) {
        return Err(Error::Singular { indices: (0..dim).collect() });
    }

    let cells = reconstruct_cells(grids, space, &index, &coefficients);
    let fine_values = glue_cells(grids, &cells);
    Ok(CoarseSolution {
        coefficients,
        cells,
        fine: fine_values,
        conforming: space.conforming,
        shift,
        residual,
    })
}

fn reconstruct_cells(grids: &GridPair, space: &MultiscaleSpace, index: &[Vec<(usize, usize)>], coefficients: &[f64]) -> Vec<Vec<f64>> {
    index
        .iter()
        .enumerate()
        .map(|(k, entries)| {
            let mut u = vec![0.0; grids.coarse.cell_patch(k).len()];
            for &(b, p) in entries {
                let c = coefficients[b];
                for (u, v) in u.iter_mut().zip(&space.basis[b].pieces[p].values) {
                    *u += c * v;
                }
            }
            u
        })
        .collect()
}

/// Global fine function from per-cell values, averaging at shared nodes.
pub fn glue_cells(grids: &GridPair, cells: &[Vec<f64>]) -> FineFunction {
    let fine = &grids.fine;
    let mut sum = vec![0.0; fine.num_nodes()];
    let mut count = vec![0u32; fine.num_nodes()];
    for (k, u) in cells.iter().enumerate() {
        let cp = grids.coarse.cell_patch(k);
        for (l, v) in u.iter().enumerate() {
            let g = cp.global(fine, l);
            sum[g] += v;
            count[g] += 1;
        }
    }
    for (s, &c) in sum.iter_mut().zip(&count) {
        *s /= c as f64;
    }
    FineFunction { values: sum }
}

/// `max_k |a(u_h − u_ms, φ_k)|`, with `a` evaluated cell by cell.
pub fn galerkin_residual(grids: &GridPair, space: &MultiscaleSpace, field: &CoefficientField, u_h: &FineFunction, solution: &CoarseSolution) -> f64 {
    let fine = &grids.fine;
    let mut res = vec![0.0; space.dim()];
    let index = space.cell_index(grids);
    for (k, entries) in index.iter().enumerate() {
        let cp = grids.coarse.cell_patch(k);
        let diff: Vec<f64> = (0..cp.len()).map(|l| u_h.values[cp.global(fine, l)] - solution.cells[k][l]).collect();
        let mut ad = vec![0.0; cp.len()];
        fem::apply_patch_stiffness(field, &cp, &diff, &mut ad);
        for &(b, p) in entries {
            res[b] += linalg::dot(&space.basis[b].pieces[p].values, &ad);
        }
    }
    res.iter().fold(0.0, |m, v| m.max(v.abs()))
}
