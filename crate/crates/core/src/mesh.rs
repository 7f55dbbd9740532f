//! Nested structured grids on the unit square.
//!
//! The fine grid has `nx × nx` square cells, each split into two P1
//! triangles along its bottom-left → top-right diagonal. The coarse grid
//! groups `n × n` fine cells into one coarse cell. Coarse nodes are numbered
//! row-major, `O_i = (I·H, J·H)` with `i = J·(nx_coarse+1) + I`.

use crate::error::{Error, Result};

/// Uniform fine grid on `[0,1]²`, nodes numbered row-major from the bottom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FineGrid {
    nx: usize,
}

impl FineGrid {
    pub fn new(nx: usize) -> Result<Self> {
        if nx == 0 {
            return Err(Error::InvalidGrid("fine grid needs at least one cell".into()));
        }
        Ok(Self { nx })
    }

    /// Cells per axis.
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.nx + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.nx
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix <= self.nx && iy <= self.nx);
        iy * (self.nx + 1) + ix
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let (ix, iy) = self.node_ij(node);
        (self.coord(ix), self.coord(iy))
    }

    /// Coordinate of grid line `k`; exact at 0 and 1.
    pub fn coord(&self, k: usize) -> f64 {
        k as f64 / self.nx as f64
    }

    pub fn cell(&self, cx: usize, cy: usize) -> usize {
        cy * self.nx + cx
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Corner nodes `[p00, p10, p01, p11]` of fine cell `(cx, cy)`.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        let p00 = self.node(cx, cy);
        let p10 = p00 + 1;
        let p01 = p00 + self.nx + 1;
        [p00, p10, p01, p01 + 1]
    }

    /// The two triangles of a fine cell as vertex triples, counter-clockwise.
    pub fn cell_triangles(&self, cx: usize, cy: usize) -> [[usize; 3]; 2] {
        let [p00, p10, p01, p11] = self.cell_nodes(cx, cy);
        [[p00, p10, p11], [p00, p11, p01]]
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (ix, iy) = self.node_ij(node);
        ix == 0 || iy == 0 || ix == self.nx || iy == self.nx
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&p| self.is_boundary_node(p)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&p| !self.is_boundary_node(p)).collect()
    }

    /// The whole domain as a patch.
    pub fn full_patch(&self) -> Patch {
        Patch::new(0, 0, self.nx, self.nx)
    }
}

/// Index of the vertex of a fine cell within the local 2×2 ordering
/// `[p00, p10, p01, p11]` that each triangle uses.
pub const CELL_TRIANGLES: [[usize; 3]; 2] = [[0, 1, 3], [0, 3, 2]];

/// Axis-aligned rectangle of fine nodes `[x0, x1] × [y0, y1]` (inclusive),
/// with its own row-major local numbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Patch {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Patch {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        assert!(x1 > x0 && y1 > y0, "degenerate patch");
        Self { x0, y0, x1, y1 }
    }

    /// Nodes per row.
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_cells(&self) -> usize {
        (self.width() - 1) * (self.height() - 1)
    }

    pub fn contains(&self, ix: usize, iy: usize) -> bool {
        (self.x0..=self.x1).contains(&ix) && (self.y0..=self.y1).contains(&iy)
    }

    /// Local index of global node coordinates `(ix, iy)`.
    pub fn local(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(self.contains(ix, iy));
        (iy - self.y0) * self.width() + (ix - self.x0)
    }

    /// Global fine-node coordinates of a local index.
    pub fn coords(&self, local: usize) -> (usize, usize) {
        (self.x0 + local % self.width(), self.y0 + local / self.width())
    }

    pub fn global(&self, grid: &FineGrid, local: usize) -> usize {
        let (ix, iy) = self.coords(local);
        grid.node(ix, iy)
    }

    pub fn global_nodes(&self, grid: &FineGrid) -> Vec<usize> {
        (0..self.len()).map(|l| self.global(grid, l)).collect()
    }

    /// Fine cells `(cx, cy)` inside the patch, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |cy| (self.x0..self.x1).map(move |cx| (cx, cy)))
    }

    /// Local indices `[p00, p10, p01, p11]` of fine cell `(cx, cy)`.
    pub fn cell_local_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        let p00 = self.local(cx, cy);
        let w = self.width();
        [p00, p00 + 1, p00 + w, p00 + w + 1]
    }

    pub fn is_perimeter(&self, local: usize) -> bool {
        let (ix, iy) = self.coords(local);
        ix == self.x0 || ix == self.x1 || iy == self.y0 || iy == self.y1
    }

    /// Copies values of `src` (defined on `self`) into the sub-patch `dst`.
    pub fn restrict_to(&self, dst: &Patch, src: &[f64]) -> Vec<f64> {
        debug_assert_eq!(src.len(), self.len());
        let mut out = Vec::with_capacity(dst.len());
        for iy in dst.y0..=dst.y1 {
            let start = self.local(dst.x0, iy);
            out.extend_from_slice(&src[start..start + dst.width()]);
        }
        out
    }

    /// Bounding patch of `self` grown by `margin` fine cells, clipped to `[0, nx]`.
    pub fn grown(&self, margin: usize, nx: usize) -> Patch {
        Patch::new(
            self.x0.saturating_sub(margin),
            self.y0.saturating_sub(margin),
            (self.x1 + margin).min(nx),
            (self.y1 + margin).min(nx),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborhoodKind {
    Interior,
    /// Coarse node on a side of `∂D` (not a corner).
    Edge,
    Corner,
}

/// One fine segment of `∂ω_i` between consecutive local nodes `a → b`.
/// `edge` is the index of the coarse edge `Γ_{i,k}` it belongs to, or `None`
/// when it lies on `∂D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PerimeterSegment {
    pub a: usize,
    pub b: usize,
    pub edge: Option<usize>,
}

/// Local degrees of freedom of a coarse neighborhood `ω̄_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDofMap {
    pub node: usize,
    pub kind: NeighborhoodKind,
    pub patch: Patch,
    /// local → global fine node
    pub global: Vec<usize>,
    /// local indices strictly inside `ω_i`
    pub interior: Vec<usize>,
    /// local indices on `∂ω_i`
    pub boundary: Vec<usize>,
    /// per local node: lies on `∂D`
    pub on_domain_boundary: Vec<bool>,
    /// `Γ_{i,k}` as ordered local node lists (left→right, bottom→top)
    pub edges: Vec<Vec<usize>>,
    /// every fine segment of `∂ω_i`
    pub perimeter: Vec<PerimeterSegment>,
    /// coarse cells of `ω_i`
    pub cells: Vec<usize>,
}

impl LocalDofMap {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// Boundary nodes of `ω_i` that do not lie on `∂D`.
    pub fn free_boundary(&self) -> Vec<usize> {
        self.boundary
            .iter()
            .copied()
            .filter(|&l| !self.on_domain_boundary[l])
            .collect()
    }

    /// Length of `∂ω_i ∩ D` (sum over coarse edges).
    pub fn free_boundary_length(&self, h: f64) -> f64 {
        self.perimeter.iter().filter(|s| s.edge.is_some()).count() as f64 * h
    }
}

/// Coarse grid of `nx × nx` cells, each refined into `n × n` fine cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseGrid {
    nx: usize,
    n: usize,
    neighborhoods: Vec<LocalDofMap>,
}

impl CoarseGrid {
    /// Cells per axis.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Refinement factor `H / h`.
    pub fn refinement(&self) -> usize {
        self.n
    }

    /// Coarse mesh size `H`.
    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.nx + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.nx
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    pub fn cell(&self, cx: usize, cy: usize) -> usize {
        cy * self.nx + cx
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Fine-node patch covered by coarse cell `K`.
    pub fn cell_patch(&self, cell: usize) -> Patch {
        let (cx, cy) = self.cell_ij(cell);
        Patch::new(cx * self.n, cy * self.n, (cx + 1) * self.n, (cy + 1) * self.n)
    }

    /// Coarse corner nodes `[O00, O10, O01, O11]` of coarse cell `K`.
    pub fn cell_corners(&self, cell: usize) -> [usize; 4] {
        let (cx, cy) = self.cell_ij(cell);
        [
            self.node(cx, cy),
            self.node(cx + 1, cy),
            self.node(cx, cy + 1),
            self.node(cx + 1, cy + 1),
        ]
    }

    /// Local DOF map `ω̄_i`.
    pub fn neighborhood(&self, i: usize) -> &LocalDofMap {
        &self.neighborhoods[i]
    }

    pub fn neighborhoods(&self) -> &[LocalDofMap] {
        &self.neighborhoods
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.neighborhoods[i].kind != NeighborhoodKind::Interior
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| !self.is_boundary_node(i)).collect()
    }
}

/// Fine and coarse grids built together.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPair {
    pub fine: FineGrid,
    pub coarse: CoarseGrid,
}

impl GridPair {
    /// Coarse mesh size `H`.
    pub fn coarse_h(&self) -> f64 {
        self.coarse.h()
    }

    /// Fine mesh size `h`.
    pub fn fine_h(&self) -> f64 {
        self.fine.h()
    }

    /// Local DOF map of neighborhood `i`.
    pub fn neighborhood_dofs(&self, i: usize) -> &LocalDofMap {
        self.coarse.neighborhood(i)
    }
}

/// Builds the nested grid pair with `nx_coarse` coarse cells per axis and
/// refinement factor `n` (a power of two, at least 2).
pub fn build_grids(nx_coarse: usize, n: usize) -> Result<GridPair> {
    if nx_coarse < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 coarse cells per axis, got {nx_coarse}"
        )));
    }
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "refinement factor must be a power of two ≥ 2 so wavelet levels align with fine nodes, got {n}"
        )));
    }
    let fine = FineGrid::new(nx_coarse * n)?;
    let mut coarse = CoarseGrid {
        nx: nx_coarse,
        n,
        neighborhoods: Vec::with_capacity((nx_coarse + 1) * (nx_coarse + 1)),
    };
    for j in 0..=nx_coarse {
        for i in 0..=nx_coarse {
            let map = neighborhood_map(&fine, &coarse, i, j);
            coarse.neighborhoods.push(map);
        }
    }
    Ok(GridPair { fine, coarse })
}

fn neighborhood_map(fine: &FineGrid, coarse: &CoarseGrid, i: usize, j: usize) -> LocalDofMap {
    let (nxc, n) = (coarse.nx, coarse.n);
    let node = coarse.node(i, j);
    let on_x = i == 0 || i == nxc;
    let on_y = j == 0 || j == nxc;
    let kind = match (on_x, on_y) {
        (true, true) => NeighborhoodKind::Corner,
        (false, false) => NeighborhoodKind::Interior,
        _ => NeighborhoodKind::Edge,
    };

    let ci0 = i.saturating_sub(1);
    let ci1 = (i + 1).min(nxc);
    let cj0 = j.saturating_sub(1);
    let cj1 = (j + 1).min(nxc);
    let patch = Patch::new(ci0 * n, cj0 * n, ci1 * n, cj1 * n);

    let mut cells = Vec::new();
    for cy in cj0..cj1 {
        for cx in ci0..ci1 {
            cells.push(coarse.cell(cx, cy));
        }
    }

    let global = patch.global_nodes(fine);
    let on_domain_boundary: Vec<bool> = global.iter().map(|&g| fine.is_boundary_node(g)).collect();
    let (interior, boundary): (Vec<usize>, Vec<usize>) = (0..patch.len()).partition(|&l| !patch.is_perimeter(l));

    // Sides of the patch rectangle in canonical orientation:
    // bottom (→), right (↑), top (→), left (↑).
    let fnx = fine.nx();
    let sides: [(Vec<(usize, usize)>, bool); 4] = [
        ((patch.x0..=patch.x1).map(|x| (x, patch.y0)).collect(), patch.y0 == 0),
        ((patch.y0..=patch.y1).map(|y| (patch.x1, y)).collect(), patch.x1 == fnx),
        ((patch.x0..=patch.x1).map(|x| (x, patch.y1)).collect(), patch.y1 == fnx),
        ((patch.y0..=patch.y1).map(|y| (patch.x0, y)).collect(), patch.x0 == 0),
    ];

    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut perimeter = Vec::new();
    for (side, on_boundary) in sides.iter() {
        let locals: Vec<usize> = side.iter().map(|&(x, y)| patch.local(x, y)).collect();
        if *on_boundary {
            for w in locals.windows(2) {
                perimeter.push(PerimeterSegment {
                    a: w[0],
                    b: w[1],
                    edge: None,
                });
            }
            continue;
        }
        // Interior neighborhoods keep whole sides (length 2H); truncated ones
        // split sides into single coarse edges (length H).
        let pieces: Vec<&[usize]> = if kind == NeighborhoodKind::Interior {
            vec![&locals[..]]
        } else {
            let m = locals.len() - 1;
            (0..m / n).map(|k| &locals[k * n..=(k + 1) * n]).collect()
        };
        for piece in pieces {
            let k = edges.len();
            for w in piece.windows(2) {
                perimeter.push(PerimeterSegment {
                    a: w[0],
                    b: w[1],
                    edge: Some(k),
                });
            }
            edges.push(piece.to_vec());
        }
    }

    LocalDofMap {
        node,
        kind,
        patch,
        global,
        interior,
        boundary,
        on_domain_boundary,
        edges,
        perimeter,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn counts_for_four_by_four() {
        let g = build_grids(4, 4).unwrap();
        assert_eq!(g.fine.nx(), 16);
        assert_eq!(g.fine.num_nodes(), 17 * 17);
        assert_eq!(g.coarse.num_nodes(), 25);
        let interior: Vec<_> = g.coarse.interior_nodes();
        assert_eq!(interior.len(), 9);
        for &i in &interior {
            assert_eq!(g.neighborhood_dofs(i).cells.len(), 4);
        }
    }

    #[test]
    fn corner_neighborhood_is_one_cell() {
        let g = build_grids(2, 2).unwrap();
        let m = g.neighborhood_dofs(0);
        assert_eq!(m.kind, NeighborhoodKind::Corner);
        assert_eq!(m.cells, vec![0]);
        assert_eq!(m.patch, Patch::new(0, 0, 2, 2));
        assert_eq!(m.len(), 9);
        assert_eq!(m.boundary.len(), 8);
        // two interior sides of length H
        assert_eq!(m.edges.len(), 2);
        assert!(m.edges.iter().all(|e| e.len() == 3));
    }

    #[test]
    fn fine_resolution_matches_reference_scale() {
        let g = build_grids(8, 64).unwrap();
        assert_eq!(g.fine.nx(), 512);
        assert_eq!(g.fine_h(), 2f64.powi(-9));
        assert_eq!(g.fine_h() * g.fine.nx() as f64, 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_grids(1, 4), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grids(4, 3), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grids(4, 1), Err(Error::InvalidGrid(_))));
        let msg = build_grids(4, 6).unwrap_err().to_string();
        assert!(msg.contains("power of two"), "{msg}");
    }

    #[test]
    fn interior_neighborhood_counts() {
        let g = build_grids(4, 4).unwrap();
        let i = g.coarse.node(2, 2);
        let m = g.neighborhood_dofs(i);
        assert_eq!(m.len(), 81);
        assert_eq!(m.boundary.len(), 32);
        assert_eq!(m.interior.len(), 49);
        assert_eq!(m.edges.len(), 4);
        assert!(m.edges.iter().all(|e| e.len() == 2 * 4 + 1));
    }

    #[test]
    fn interior_edges_cover_boundary_with_shared_corners() {
        let g = build_grids(4, 4).unwrap();
        for &i in &g.coarse.interior_nodes() {
            let m = g.neighborhood_dofs(i);
            if m.on_domain_boundary.iter().any(|&b| b) {
                continue;
            }
            let mut seen: HashMap<usize, usize> = HashMap::new();
            for e in &m.edges {
                for &l in e {
                    *seen.entry(l).or_default() += 1;
                }
            }
            let mut covered: Vec<_> = seen.keys().copied().collect();
            covered.sort_unstable();
            assert_eq!(covered, m.boundary);
            let corners = seen.values().filter(|&&c| c == 2).count();
            assert_eq!(corners, 4);
            assert!(seen.values().all(|&c| c == 1 || c == 2));
            assert_eq!(m.boundary.len(), 8 * 4);
        }
    }

    #[test]
    fn truncated_edges_cover_free_boundary() {
        let g = build_grids(4, 4).unwrap();
        for i in 0..g.coarse.num_nodes() {
            let m = g.neighborhood_dofs(i);
            let mut covered: Vec<usize> = m.edges.iter().flatten().copied().filter(|&l| !m.on_domain_boundary[l]).collect();
            covered.sort_unstable();
            covered.dedup();
            assert_eq!(covered, m.free_boundary(), "node {i}");
            if m.kind != NeighborhoodKind::Interior {
                assert!(m.edges.iter().all(|e| e.len() == 4 + 1));
            }
            // orientation: coordinates increase along each edge
            for e in &m.edges {
                for w in e.windows(2) {
                    let (a, b) = (m.patch.coords(w[0]), m.patch.coords(w[1]));
                    assert!(b.0 + b.1 == a.0 + a.1 + 1);
                }
            }
            assert_eq!(m.perimeter.len(), m.boundary.len());
        }
        // bottom edge node away from corners: left, top-left, top-right, right
        let m = g.neighborhood_dofs(g.coarse.node(2, 0));
        assert_eq!(m.kind, NeighborhoodKind::Edge);
        assert_eq!(m.edges.len(), 4);
        assert_eq!(m.free_boundary_length(g.fine_h()), 4.0 * g.coarse_h());
        let c = g.neighborhood_dofs(0);
        assert_eq!(c.edges.len(), 2);
    }

    #[test]
    fn cell_memberships_sum_to_four_per_cell() {
        let g = build_grids(5, 2).unwrap();
        let total: usize = g.coarse.neighborhoods().iter().map(|m| m.cells.len()).sum();
        assert_eq!(total, 4 * g.coarse.num_cells());
    }

    #[test]
    fn rebuilding_is_bit_identical() {
        assert_eq!(build_grids(3, 4).unwrap(), build_grids(3, 4).unwrap());
    }

    #[test]
    fn each_fine_cell_has_two_triangles_covering_it() {
        let f = FineGrid::new(3).unwrap();
        let tris = f.cell_triangles(1, 2);
        let nodes = f.cell_nodes(1, 2);
        assert_eq!(tris[0], [nodes[0], nodes[1], nodes[3]]);
        assert_eq!(tris[1], [nodes[0], nodes[3], nodes[2]]);
        for (t, local) in tris.iter().zip(CELL_TRIANGLES) {
            for k in 0..3 {
                assert_eq!(t[k], nodes[local[k]]);
            }
        }
    }

    #[test]
    fn restrict_copies_subpatch() {
        let p = Patch::new(0, 0, 3, 3);
        let q = Patch::new(1, 1, 3, 2);
        let v: Vec<f64> = (0..p.len()).map(|k| k as f64).collect();
        assert_eq!(p.restrict_to(&q, &v), vec![5.0, 6.0, 7.0, 9.0, 10.0, 11.0]);
    }
}
