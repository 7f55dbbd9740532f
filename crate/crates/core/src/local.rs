//! Per-neighborhood computations: the partition of unity `χ_i`,
//! `κ`-harmonic extension, the Steklov eigenproblem on `∂ω_i` and the
//! special source solution `v^i`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::coefficient::{CoefficientField, WeightedCoefficient};
use crate::error::{Error, Result};
use crate::fem::{self, FineFunction};
use crate::linalg::{BandedCholesky, CsrMatrix};
use crate::mesh::{GridPair, LocalDofMap, NeighborhoodKind, Patch};

/// Dirichlet solver on a patch: the nodes flagged `fixed` carry data, the
/// rest are solved for.
#[derive(Clone, Debug)]
pub struct PatchDirichlet {
    matrix: CsrMatrix,
    free: Vec<usize>,
    factor: Option<BandedCholesky>,
}

impl PatchDirichlet {
    pub fn new(matrix: CsrMatrix, fixed: &[bool]) -> Result<Self> {
        let free: Vec<usize> = (0..matrix.nrows()).filter(|&l| !fixed[l]).collect();
        let factor = if free.is_empty() {
            None
        } else {
            Some(BandedCholesky::factor(&matrix.principal_submatrix(&free))?)
        };
        Ok(Self { matrix, free, factor })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Discrete `κ`-harmonic function matching `data` at the fixed nodes
    /// (entries of `data` at free nodes are ignored).
    pub fn extend(&self, data: &[f64]) -> Vec<f64> {
        let mut x = data.to_vec();
        for &l in &self.free {
            x[l] = 0.0;
        }
        if let Some(factor) = &self.factor {
            let ax = self.matrix.mul_vec(&x);
            let mut rhs: Vec<f64> = self.free.iter().map(|&l| -ax[l]).collect();
            factor.solve_in_place(&mut rhs);
            for (&l, v) in self.free.iter().zip(rhs) {
                x[l] = v;
            }
        }
        x
    }
}

/// `χ_i`, stored per coarse cell as the four corner functions on the cell
/// patch (corner order `[O00, O10, O01, O11]`).
#[derive(Clone, Debug, PartialEq)]
pub struct PouBasis {
    nx_coarse: usize,
    n: usize,
    cells: Vec<[Vec<f64>; 4]>,
}

impl PouBasis {
    pub fn cell_functions(&self, cell: usize) -> &[Vec<f64>; 4] {
        &self.cells[cell]
    }

    pub fn check_grids(&self, grids: &GridPair) -> Result<()> {
        if self.nx_coarse != grids.coarse.nx() || self.n != grids.coarse.refinement() {
            return Err(Error::Mismatch(format!(
                "partition of unity built for {}×{} grids, given {}×{}",
                self.nx_coarse,
                self.n,
                grids.coarse.nx(),
                grids.coarse.refinement()
            )));
        }
        Ok(())
    }

    /// `χ_i` on the neighborhood patch `ω̄_i`.
    pub fn local(&self, grids: &GridPair, i: usize) -> Vec<f64> {
        let dofs = grids.neighborhood_dofs(i);
        let mut out = vec![0.0; dofs.len()];
        for &k in &dofs.cells {
            let corner = grids.coarse.cell_corners(k).iter().position(|&c| c == i).unwrap();
            let cp = grids.coarse.cell_patch(k);
            let chi = &self.cells[k][corner];
            for (l, v) in chi.iter().enumerate() {
                let (ix, iy) = cp.coords(l);
                out[dofs.patch.local(ix, iy)] = *v;
            }
        }
        out
    }

    /// `χ_i` as a global fine function.
    pub fn global(&self, grids: &GridPair, i: usize) -> FineFunction {
        let mut f = FineFunction::zeros(&grids.fine);
        let dofs = grids.neighborhood_dofs(i);
        for (l, v) in self.local(grids, i).into_iter().enumerate() {
            f.values[dofs.global[l]] = v;
        }
        f
    }
}

/// Bilinear nodal function of a rectangle's corner `c` (`[00, 10, 01, 11]`),
/// evaluated at every node of `patch`.
pub fn bilinear_corner(patch: &Patch, c: usize) -> Vec<f64> {
    let (w, h) = ((patch.width() - 1) as f64, (patch.height() - 1) as f64);
    (0..patch.len())
        .map(|l| {
            let (ix, iy) = patch.coords(l);
            let s = (ix - patch.x0) as f64 / w;
            let t = (iy - patch.y0) as f64 / h;
            let sx = if c & 1 == 1 { s } else { 1.0 - s };
            let ty = if c & 2 == 2 { t } else { 1.0 - t };
            sx * ty
        })
        .collect()
}

/// Solves the four `κ`-harmonic problems with bilinear boundary data on
/// every coarse cell `patch`, returning them normalized to sum to one.
pub(crate) fn harmonic_corner_functions(grids: &GridPair, field: &CoefficientField, patch: &Patch) -> Result<[Vec<f64>; 4]> {
    let a = fem::assemble_patch_stiffness(&grids.fine, field, patch);
    let fixed: Vec<bool> = (0..patch.len()).map(|l| patch.is_perimeter(l)).collect();
    let solver = PatchDirichlet::new(a, &fixed)?;
    let mut out: [Vec<f64>; 4] = Default::default();
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = solver.extend(&bilinear_corner(patch, c));
    }
    Ok(out)
}

pub fn build_pou(grids: &GridPair, field: &CoefficientField) -> Result<PouBasis> {
    field.check_grid(&grids.fine)?;
    let cells = crate::parallel::map_indexed(grids.coarse.num_cells(), |k| {
        let patch = grids.coarse.cell_patch(k);
        let mut chis = harmonic_corner_functions(grids, field, &patch)?;
        for l in 0..patch.len() {
            let s: f64 = chis.iter().map(|c| c[l]).sum();
            for c in chis.iter_mut() {
                c[l] /= s;
            }
        }
        Ok(chis)
    })?;
    Ok(PouBasis {
        nx_coarse: grids.coarse.nx(),
        n: grids.coarse.refinement(),
        cells,
    })
}

/// Operators of one coarse neighborhood `ω_i`.
///
/// Traces live on the coarse edges `Γ_{i,k}`. When `O_i` is a boundary node,
/// the part of `∂ω_i` on `∂D` carries the homogeneous Dirichlet condition.
/// When `O_i` is interior but `ω_i` touches `∂D`, that part is left with a
/// natural (zero-flux) condition: `χ_i` already vanishes there and constants
/// stay harmonic, so `χ_i` remains in the local spaces.
#[derive(Clone, Debug)]
pub struct NeighborhoodSolver<'a> {
    pub grids: &'a GridPair,
    pub index: usize,
    pub dofs: &'a LocalDofMap,
    /// local nodes carrying trace data, ascending
    pub trace: Vec<usize>,
    dirichlet: PatchDirichlet,
}

impl<'a> NeighborhoodSolver<'a> {
    pub fn new(grids: &'a GridPair, field: &CoefficientField, index: usize) -> Result<Self> {
        let dofs = grids.neighborhood_dofs(index);
        let a = fem::assemble_patch_stiffness(&grids.fine, field, &dofs.patch);
        let mut on_edge = vec![false; dofs.len()];
        for &l in dofs.edges.iter().flatten() {
            on_edge[l] = true;
        }
        let mut fixed = vec![false; dofs.len()];
        let trace: Vec<usize> = if dofs.kind == NeighborhoodKind::Interior {
            for &l in &dofs.boundary {
                fixed[l] = on_edge[l];
            }
            dofs.boundary.iter().copied().filter(|&l| on_edge[l]).collect()
        } else {
            for &l in &dofs.boundary {
                fixed[l] = true;
            }
            dofs.free_boundary()
        };
        Ok(Self {
            grids,
            index,
            dofs,
            trace,
            dirichlet: PatchDirichlet::new(a, &fixed)?,
        })
    }

    /// Whether `∂ω_i ∩ ∂D` carries zero Dirichlet data.
    pub fn truncated(&self) -> bool {
        self.dofs.kind != NeighborhoodKind::Interior
    }

    /// Local stiffness on `ω̄_i`.
    pub fn stiffness(&self) -> &CsrMatrix {
        self.dirichlet.matrix()
    }

    /// `L_i⁻¹`: `κ`-harmonic extension of values given on `∂ω_i`, ordered as
    /// `dofs.boundary`. Values off the trace nodes are ignored (zero on `∂D`
    /// for boundary nodes, free for interior ones).
    pub fn harmonic_extend(&self, boundary_data: &[f64]) -> Result<Vec<f64>> {
        if boundary_data.len() != self.dofs.boundary.len() {
            return Err(Error::Mismatch(format!(
                "{} boundary values for {} boundary nodes",
                boundary_data.len(),
                self.dofs.boundary.len()
            )));
        }
        let mut full = vec![0.0; self.dofs.len()];
        for (&l, &v) in self.dofs.boundary.iter().zip(boundary_data) {
            full[l] = v;
        }
        Ok(self.extend_local(&full))
    }

    /// Harmonic extension of the trace values of a full local vector.
    pub fn extend_local(&self, local: &[f64]) -> Vec<f64> {
        let mut data = vec![0.0; self.dofs.len()];
        for &l in &self.trace {
            data[l] = local[l];
        }
        self.dirichlet.extend(&data)
    }

    /// P1 mass matrix of the coarse edges restricted to the `free` nodes.
    fn boundary_mass(&self, free: &[usize]) -> DMatrix<f64> {
        let h = self.grids.fine_h();
        let mut pos = vec![usize::MAX; self.dofs.len()];
        for (k, &l) in free.iter().enumerate() {
            pos[l] = k;
        }
        let mut m = DMatrix::zeros(free.len(), free.len());
        for seg in self.dofs.perimeter.iter().filter(|s| s.edge.is_some()) {
            let (a, b) = (pos[seg.a], pos[seg.b]);
            let pairs = [(a, a, 2.0), (b, b, 2.0), (a, b, 1.0), (b, a, 1.0)];
            for (r, c, w) in pairs {
                if r != usize::MAX && c != usize::MAX {
                    m[(r, c)] += w * h / 6.0;
                }
            }
        }
        m
    }

    /// Steklov pairs `κ ∂v/∂n = λ v` on the coarse edges of `∂ω_i`,
    /// discretized through the boundary Schur complement; returns all
    /// eigenvalues and the `count` lowest eigenvectors.
    pub fn steklov(&self, count: usize) -> Result<SteklovDecomposition> {
        let free = self.trace.clone();
        let nb = free.len();
        if count > nb {
            return Err(Error::Eigen {
                neighborhood: self.index,
                msg: format!("requested {count} modes but only {nb} boundary DOFs"),
            });
        }
        let a = self.stiffness();
        let mut schur = DMatrix::zeros(nb, nb);
        let mut unit = vec![0.0; self.dofs.len()];
        for (c, &l) in free.iter().enumerate() {
            unit[l] = 1.0;
            let ext = self.dirichlet.extend(&unit);
            unit[l] = 0.0;
            let flux = a.mul_vec(&ext);
            for (r, &lr) in free.iter().enumerate() {
                schur[(r, c)] = flux[lr];
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let mass = self.boundary_mass(&free);
        let chol = mass.clone().cholesky().ok_or_else(|| Error::Eigen {
            neighborhood: self.index,
            msg: "boundary mass matrix is not positive definite".into(),
        })?;
        let l = chol.l();
        let l_inv = l.clone().try_inverse().ok_or_else(|| Error::Eigen {
            neighborhood: self.index,
            msg: "singular boundary mass factor".into(),
        })?;
        let c = &l_inv * &schur * l_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000).ok_or_else(|| Error::Eigen {
            neighborhood: self.index,
            msg: "symmetric eigensolver did not converge".into(),
        })?;
        let mut order: Vec<usize> = (0..nb).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let l_inv_t = l_inv.transpose();
        let mut boundary_vectors = Vec::with_capacity(count);
        let mut extensions = Vec::with_capacity(count);
        for &k in order.iter().take(count) {
            let w = &l_inv_t * eig.eigenvectors.column(k);
            let mut w: Vec<f64> = w.iter().copied().collect();
            let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if let Some(first) = w.iter().find(|v| v.abs() > 1e-10 * scale) {
                if *first < 0.0 {
                    w.iter_mut().for_each(|v| *v = -*v);
                }
            }
            let mut full = vec![0.0; self.dofs.len()];
            for (&lb, &v) in free.iter().zip(&w) {
                full[lb] = v;
            }
            extensions.push(self.dirichlet.extend(&full));
            boundary_vectors.push(w);
        }
        Ok(SteklovDecomposition {
            neighborhood: self.index,
            free_boundary: free,
            eigenvalues,
            boundary_vectors,
            extensions,
            boundary_mass: mass,
        })
    }

    /// `v^i`: `−∇·(κ∇v) = κ̃/∫κ̃` in `ω_i`, outward flux `|∂ω_i ∩ D|⁻¹` on
    /// `∂ω_i ∩ D`, zero flux on `∂D`, normalized to zero mean.
    pub fn local_source(&self, weighted: &WeightedCoefficient) -> Result<LocalSourceSolution> {
        let grids = self.grids;
        let fine = &grids.fine;
        let dofs = self.dofs;
        let h = fine.h();
        let total: f64 = dofs.patch.cells().map(|(cx, cy)| weighted.values[fine.cell(cx, cy)]).sum::<f64>() * h * h;
        if !(total > 0.0) {
            return Err(Error::DegenerateSource { neighborhood: self.index });
        }
        let g: Vec<f64> = weighted.values.iter().map(|v| v / total).collect();
        let mut rhs = fem::patch_load_cellwise(fine, &dofs.patch, &g);
        let length = dofs.free_boundary_length(h);
        for seg in dofs.perimeter.iter().filter(|s| s.edge.is_some()) {
            rhs[seg.a] -= 0.5 * h / length;
            rhs[seg.b] -= 0.5 * h / length;
        }
        let compatibility_residual = rhs.iter().sum::<f64>().abs();

        // The constant nullspace is removed by the mean-zero constraint: the
        // bordered system's solution is the pinned solution shifted to zero mean.
        let a = self.stiffness();
        let pin = 0;
        let free: Vec<usize> = (0..dofs.len()).filter(|&l| l != pin).collect();
        let factor = BandedCholesky::factor(&a.principal_submatrix(&free))?;
        let mut y: Vec<f64> = free.iter().map(|&l| rhs[l]).collect();
        factor.solve_in_place(&mut y);
        let mut values = vec![0.0; dofs.len()];
        for (&l, v) in free.iter().zip(y) {
            values[l] = v;
        }
        let ones = vec![1.0; dofs.len()];
        let mass = fem::patch_load(fine, &dofs.patch, &ones);
        let mean = crate::linalg::dot(&mass, &values) / mass.iter().sum::<f64>();
        values.iter_mut().for_each(|v| *v -= mean);
        Ok(LocalSourceSolution {
            neighborhood: self.index,
            values,
            compatibility_residual,
            rhs,
        })
    }
}

/// Steklov eigenpairs of one neighborhood.
#[derive(Clone, Debug)]
pub struct SteklovDecomposition {
    pub neighborhood: usize,
    /// local trace nodes the eigenvectors live on
    pub free_boundary: Vec<usize>,
    /// all eigenvalues, ascending
    pub eigenvalues: Vec<f64>,
    /// boundary-mass orthonormal eigenvectors on `free_boundary`
    pub boundary_vectors: Vec<Vec<f64>>,
    /// harmonic extensions into `ω̄_i` (local numbering)
    pub extensions: Vec<Vec<f64>>,
    pub boundary_mass: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct LocalSourceSolution {
    pub neighborhood: usize,
    /// `v^i` on `ω̄_i`
    pub values: Vec<f64>,
    /// `|Σ rhs|` of the assembled Neumann problem
    pub compatibility_residual: f64,
    pub rhs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{constant_field, synthetic_field, weighted_coefficient, SyntheticKind};
    use crate::mesh::build_grids;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grids: &GridPair, seed: u64) -> CoefficientField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grids.fine.num_cells()).map(|_| 10f64.powf(rng.random_range(0.0..3.0))).collect();
        CoefficientField::from_values(&grids.fine, v).unwrap()
    }

    #[test]
    fn pou_for_unit_kappa_is_bilinear() {
        let g = build_grids(4, 4).unwrap();
        let field = constant_field(&g.fine, 1.0).unwrap();
        let pou = build_pou(&g, &field).unwrap();
        for k in 0..g.coarse.num_cells() {
            let patch = g.coarse.cell_patch(k);
            for c in 0..4 {
                let exact = bilinear_corner(&patch, c);
                for (a, b) in pou.cell_functions(k)[c].iter().zip(&exact) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pou_sums_to_one_and_interpolates() {
        let g = build_grids(4, 8).unwrap();
        let field = synthetic_field(&g.fine, SyntheticKind::Mixed, 1e4, 1).unwrap();
        let pou = build_pou(&g, &field).unwrap();
        let mut sum = vec![0.0; g.fine.num_nodes()];
        let mut funcs = Vec::new();
        for i in 0..g.coarse.num_nodes() {
            let chi = pou.global(&g, i);
            for (s, v) in sum.iter_mut().zip(&chi.values) {
                *s += v;
            }
            assert!(chi.values.iter().all(|&v| (-1e-12..=1.0 + 1e-10).contains(&v)));
            funcs.push(chi);
        }
        assert!(sum.iter().all(|s| (s - 1.0).abs() <= 1e-12));
        for (i, chi) in funcs.iter().enumerate() {
            for j in 0..g.coarse.num_nodes() {
                let (ci, cj) = g.coarse.node_ij(j);
                let p = g.fine.node(ci * 8, cj * 8);
                assert_eq!(chi.values[p], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn pou_flattens_across_inclusion() {
        // one coarse cell with a high-conductivity block in its centre
        let g = build_grids(2, 16).unwrap();
        let mut values = vec![1.0; g.fine.num_cells()];
        for cy in 4..12 {
            for cx in 4..12 {
                values[g.fine.cell(cx, cy)] = 1e4;
            }
        }
        let field = CoefficientField::from_values(&g.fine, values).unwrap();
        let pou = build_pou(&g, &field).unwrap();
        let patch = g.coarse.cell_patch(0);
        let h = g.fine_h();
        for c in 0..4 {
            let chi = &pou.cell_functions(0)[c];
            let bil = bilinear_corner(&patch, c);
            let energy = |v: &[f64]| -> f64 {
                let mut e = 0.0;
                for cy in 4..12 {
                    for cx in 4..12 {
                        let loc = patch.cell_local_nodes(cx, cy);
                        let vals = [v[loc[0]], v[loc[1]], v[loc[2]], v[loc[3]]];
                        for t in 0..2 {
                            let gr = fem::triangle_gradient(t, &vals, h);
                            e += (gr[0] * gr[0] + gr[1] * gr[1]) * 0.5 * h * h;
                        }
                    }
                }
                e
            };
            assert!(energy(chi) <= energy(&bil), "corner {c}");
            assert!(energy(chi) < 1e-2 * energy(&bil));
        }
    }

    #[test]
    fn harmonic_extension_properties() {
        let g = build_grids(4, 4).unwrap();
        let field = random_field(&g, 9);
        let unit = constant_field(&g.fine, 1.0).unwrap();
        let i = g.coarse.node(2, 2);
        let solver = NeighborhoodSolver::new(&g, &field, i).unwrap();
        let nb = solver.dofs.boundary.len();
        let c = solver.harmonic_extend(&vec![0.7; nb]).unwrap();
        assert!(c.iter().all(|v| (v - 0.7).abs() < 1e-12));

        let unit_solver = NeighborhoodSolver::new(&g, &unit, i).unwrap();
        let affine = |l: usize| {
            let (ix, iy) = solver.dofs.patch.coords(l);
            0.2 + 0.1 * ix as f64 - 0.05 * iy as f64
        };
        let data: Vec<f64> = solver.dofs.boundary.iter().map(|&l| affine(l)).collect();
        let ext = unit_solver.harmonic_extend(&data).unwrap();
        for (l, v) in ext.iter().enumerate() {
            assert!((v - affine(l)).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g1: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..2.0)).collect();
        let g2: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..2.0)).collect();
        let e1 = solver.harmonic_extend(&g1).unwrap();
        let e2 = solver.harmonic_extend(&g2).unwrap();
        let (lo, hi) = g1.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(e1.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
        let combo: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let ec = solver.harmonic_extend(&combo).unwrap();
        for k in 0..ec.len() {
            assert!((ec[k] - (2.0 * e1[k] - 0.5 * e2[k])).abs() < 1e-10);
        }
        assert!(solver.harmonic_extend(&[1.0]).is_err());
    }

    #[test]
    fn steklov_unit_kappa_interior() {
        let g = build_grids(4, 4).unwrap();
        let field = constant_field(&g.fine, 1.0).unwrap();
        let i = g.coarse.node(2, 2);
        let s = NeighborhoodSolver::new(&g, &field, i).unwrap().steklov(4).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-9);
        let w = &s.boundary_vectors[0];
        let cos = w.iter().sum::<f64>() / ((w.len() as f64).sqrt() * w.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!(cos >= 1.0 - 1e-8);
        assert!(s.extensions[0].iter().all(|v| (v - s.extensions[0][0]).abs() < 1e-9));
    }

    #[test]
    fn constants_stay_harmonic_next_to_the_boundary() {
        let g = build_grids(4, 4).unwrap();
        let field = constant_field(&g.fine, 1.0).unwrap();
        for i in [g.coarse.node(1, 1), g.coarse.node(1, 2)] {
            let solver = NeighborhoodSolver::new(&g, &field, i).unwrap();
            assert!(!solver.truncated());
            let nb = solver.dofs.boundary.len();
            assert!(solver.harmonic_extend(&vec![1.0; nb]).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
            let s = solver.steklov(1).unwrap();
            assert!(s.eigenvalues[0].abs() < 1e-9);
        }
        let corner = NeighborhoodSolver::new(&g, &field, 0).unwrap();
        assert!(corner.truncated());
        let nb = corner.dofs.boundary.len();
        let ext = corner.harmonic_extend(&vec![1.0; nb]).unwrap();
        for (l, v) in ext.iter().enumerate() {
            if corner.dofs.on_domain_boundary[l] {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(corner.steklov(1).unwrap().eigenvalues[0] > 0.0);
    }

    #[test]
    fn steklov_ordering_orthonormality_and_energy() {
        let g = build_grids(3, 4).unwrap();
        let field = random_field(&g, 5);
        for i in 0..g.coarse.num_nodes() {
            let solver = NeighborhoodSolver::new(&g, &field, i).unwrap();
            let count = 5;
            let s = solver.steklov(count).unwrap();
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.eigenvalues.iter().all(|&l| l >= -1e-10));
            for a in 0..count {
                for b in 0..count {
                    let wa = nalgebra::DVector::from_vec(s.boundary_vectors[a].clone());
                    let wb = nalgebra::DVector::from_vec(s.boundary_vectors[b].clone());
                    let ip = wa.dot(&(&s.boundary_mass * wb));
                    assert!((ip - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
                }
                let energy = solver.stiffness().energy(&s.extensions[a]);
                let lam = s.eigenvalues[a];
                assert!((energy - lam).abs() <= 1e-8 * lam.abs().max(1.0), "{energy} vs {lam}");
            }
            assert!(solver.steklov(s.free_boundary.len() + 1).is_err());
        }
    }

    #[test]
    fn steklov_scales_with_kappa() {
        let g = build_grids(3, 4).unwrap();
        let field = random_field(&g, 8);
        let scaled = field.scaled(7.0).unwrap();
        let i = g.coarse.node(1, 1);
        let a = NeighborhoodSolver::new(&g, &field, i).unwrap().steklov(3).unwrap();
        let b = NeighborhoodSolver::new(&g, &scaled, i).unwrap().steklov(3).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues).skip(1) {
            assert!((y / x - 7.0).abs() < 1e-8 * 7.0);
        }
    }

    #[test]
    fn local_source_contract() {
        let g = build_grids(4, 4).unwrap();
        let field = random_field(&g, 2);
        let pou = build_pou(&g, &field).unwrap();
        let wk = weighted_coefficient(&g, &field, &pou).unwrap();
        for i in 0..g.coarse.num_nodes() {
            let solver = NeighborhoodSolver::new(&g, &field, i).unwrap();
            let v = solver.local_source(&wk).unwrap();
            assert!(v.compatibility_residual <= 1e-12);
            let ones = vec![1.0; solver.dofs.len()];
            let mass = fem::patch_load(&g.fine, &solver.dofs.patch, &ones);
            assert!(crate::linalg::dot(&mass, &v.values).abs() < 1e-12);
            // the discrete equations hold in every row
            let av = solver.stiffness().mul_vec(&v.values);
            let scale = v.rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (a, b) in av.iter().zip(&v.rhs) {
                assert!((a - b).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn local_source_symmetry_for_unit_kappa() {
        let g = build_grids(4, 4).unwrap();
        let field = constant_field(&g.fine, 1.0).unwrap();
        let pou = build_pou(&g, &field).unwrap();
        let wk = weighted_coefficient(&g, &field, &pou).unwrap();
        let i = g.coarse.node(2, 2);
        let solver = NeighborhoodSolver::new(&g, &field, i).unwrap();
        assert_eq!(solver.dofs.kind, NeighborhoodKind::Interior);
        let v = solver.local_source(&wk).unwrap().values;
        let p = solver.dofs.patch;
        let m = p.width() - 1;
        let at = |x: usize, y: usize| v[y * (m + 1) + x];
        // symmetries that map the fixed-diagonal triangulation onto itself
        for y in 0..=m {
            for x in 0..=m {
                let u = at(x, y);
                assert!((u - at(y, x)).abs() < 1e-9);
                assert!((u - at(m - x, m - y)).abs() < 1e-9);
                assert!((u - at(m - y, m - x)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_weighted_source() {
        let g = build_grids(2, 2).unwrap();
        let field = constant_field(&g.fine, 1.0).unwrap();
        let wk = WeightedCoefficient {
            values: vec![0.0; g.fine.num_cells()],
            inverse: vec![1.0; g.fine.num_cells()],
        };
        let solver = NeighborhoodSolver::new(&g, &field, 4).unwrap();
        assert!(matches!(solver.local_source(&wk), Err(Error::DegenerateSource { neighborhood: 4 })));
    }
}
