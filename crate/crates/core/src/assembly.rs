//! Interior-unknown numbering and sparse assembly of operator stencils.

use crate::grid::Grid;
use crate::linalg::Csr;
use crate::ops::OperatorSpec;

/// Interior nodes numbered in row-major order (`i-1 + mx·(j-1)` in 2D).
#[derive(Debug, Clone)]
pub struct InteriorMap {
    pub nodes: Vec<usize>,
    pub pos: Vec<usize>,
    pub mx: usize,
    pub my: usize,
}

impl InteriorMap {
    pub fn new(grid: &Grid) -> Self {
        let nodes = grid.interior_nodes();
        let mut pos = vec![usize::MAX; grid.node_count()];
        for (r, &k) in nodes.iter().enumerate() {
            pos[k] = r;
        }
        let mx = grid.nx() - 2;
        let my = if grid.dim() == 2 { grid.ny() - 2 } else { 1 };
        InteriorMap { nodes, pos, mx, my }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&k| full[k]).collect()
    }

    pub fn scatter(&self, x: &[f64], full: &mut [f64]) {
        for (&k, &v) in self.nodes.iter().zip(x) {
            full[k] = v;
        }
    }
}

/// Linearization of `op` at `values`: matrix on interior unknowns plus the
/// contribution of the (fixed) boundary values to each row.
pub fn assemble(
    op: &OperatorSpec,
    grid: &Grid,
    values: &[f64],
    map: &InteriorMap,
    extra_diag: Option<&[f64]>,
) -> (Csr, Vec<f64>) {
    let n = map.len();
    let mut t = Vec::with_capacity(n * 5);
    let mut bc = vec![0.0; n];
    for (r, &node) in map.nodes.iter().enumerate() {
        let s = op.stencil(grid, values, node);
        let mut d = s.center;
        if let Some(e) = extra_diag {
            d += e[r];
        }
        t.push((r, r, d));
        for &(j, c) in s.neighbors() {
            let pj = map.pos[j];
            if pj == usize::MAX {
                bc[r] += c * values[j];
            } else {
                t.push((r, pj, c));
            }
        }
    }
    (Csr::from_triplets(n, n, t), bc)
}

/// As [`assemble`], with the rows flagged in `fixed` replaced by identity
/// rows (the unknown is pinned to its right-hand side).
pub fn assemble_with_fixed(
    op: &OperatorSpec,
    grid: &Grid,
    values: &[f64],
    map: &InteriorMap,
    fixed: &[bool],
) -> (Csr, Vec<f64>) {
    let n = map.len();
    let mut t = Vec::with_capacity(n * 5);
    let mut bc = vec![0.0; n];
    for (r, &node) in map.nodes.iter().enumerate() {
        if fixed[r] {
            t.push((r, r, 1.0));
            continue;
        }
        let s = op.stencil(grid, values, node);
        t.push((r, r, s.center));
        for &(j, c) in s.neighbors() {
            let pj = map.pos[j];
            if pj == usize::MAX {
                bc[r] += c * values[j];
            } else {
                t.push((r, pj, c));
            }
        }
    }
    (Csr::from_triplets(n, n, t), bc)
}
