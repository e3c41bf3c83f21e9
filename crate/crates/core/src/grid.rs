//! Uniform rectangular grids in one or two dimensions, nodal fields and
//! Dirichlet boundary data.
//!
//! Nodes are numbered row-major with the x index running fastest:
//! `index = i + nx * j`. In one dimension `j` is always zero.

use std::io::{self, Write};

use thiserror::Error;

/// Relative tolerance for "all axes share one spacing".
pub const SPACING_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("dimension {0} is not supported, expected 1 or 2")]
    UnsupportedDimension(usize),
    #[error("axis {axis}: lower corner {lower} is not below upper corner {upper}")]
    BadCorners { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis}: {nodes} nodes requested, at least 3 are needed")]
    TooFewNodes { axis: usize, nodes: usize },
    #[error("spacing differs across axes: {hx} vs {hy}")]
    NonuniformSpacing { hx: f64, hy: f64 },
    #[error("non-finite value {value} at node {node}")]
    NonFiniteSample { node: usize, value: f64 },
    #[error("center {center:?} lies outside the grid")]
    CenterOutsideDomain { center: Vec<f64> },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operands live on different grids")]
    GridMismatch,
}

/// A validated uniform grid on `[lower, upper]` (1D) or a rectangle (2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    nodes: [usize; 2],
    h: f64,
}

/// Convenience wrapper matching the operation name used in the docs.
pub fn build_grid(
    dim: usize,
    corners: &[(f64, f64)],
    nodes_per_axis: &[usize],
) -> Result<Grid, GridError> {
    if corners.len() != dim || nodes_per_axis.len() != dim {
        return Err(GridError::UnsupportedDimension(dim));
    }
    let lower: Vec<f64> = corners.iter().map(|c| c.0).collect();
    let upper: Vec<f64> = corners.iter().map(|c| c.1).collect();
    Grid::new(&lower, &upper, nodes_per_axis)
}

impl Grid {
    pub fn new(lower: &[f64], upper: &[f64], nodes: &[usize]) -> Result<Self, GridError> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) || upper.len() != dim || nodes.len() != dim {
            return Err(GridError::UnsupportedDimension(dim));
        }
        let mut g = Grid {
            dim,
            lower: [0.0; 2],
            upper: [0.0; 2],
            nodes: [1, 1],
            h: 0.0,
        };
        let mut hs = [0.0; 2];
        for a in 0..dim {
            let (lo, hi) = (lower[a], upper[a]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GridError::BadCorners {
                    axis: a,
                    lower: lo,
                    upper: hi,
                });
            }
            if nodes[a] < 3 {
                return Err(GridError::TooFewNodes {
                    axis: a,
                    nodes: nodes[a],
                });
            }
            g.lower[a] = lo;
            g.upper[a] = hi;
            g.nodes[a] = nodes[a];
            hs[a] = (hi - lo) / (nodes[a] - 1) as f64;
        }
        if dim == 2 {
            let scale = hs[0].max(hs[1]);
            if (hs[0] - hs[1]).abs() > SPACING_RTOL * scale {
                return Err(GridError::NonuniformSpacing {
                    hx: hs[0],
                    hy: hs[1],
                });
            }
        }
        g.h = hs[0];
        Ok(g)
    }

    /// `[a, b]` with `n` nodes.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        Self::new(&[a], &[b], &[n])
    }

    /// `[a, b]²` with `n × n` nodes.
    pub fn square(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        Self::new(&[a, a], &[b, b], &[n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes[..self.dim]
    }

    pub fn nx(&self) -> usize {
        self.nodes[0]
    }

    /// Node count along y (1 for one-dimensional grids).
    pub fn ny(&self) -> usize {
        self.nodes[1]
    }

    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes[0] * j
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nodes[0], idx / self.nodes[0])
    }

    fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.nodes[axis] - 1;
        if i == n {
            self.upper[axis]
        } else {
            self.lower[axis] + (self.upper[axis] - self.lower[axis]) * (i as f64 / n as f64)
        }
    }

    /// Coordinates of a node; the second entry is 0 in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        let x = self.axis_coord(0, i);
        let y = if self.dim == 2 {
            self.axis_coord(1, j)
        } else {
            0.0
        };
        [x, y]
    }

    /// Node reached by an integer offset, if it stays on the grid.
    pub fn offset(&self, idx: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni < 0 || nj < 0 || ni >= self.nodes[0] as isize || nj >= self.nodes[1] as isize {
            return None;
        }
        Some(self.index(ni as usize, nj as usize))
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        let bx = i == 0 || i + 1 == self.nodes[0];
        if self.dim == 1 {
            bx
        } else {
            bx || j == 0 || j + 1 == self.nodes[1]
        }
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&k| self.is_boundary(k))
            .collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&k| !self.is_boundary(k))
            .collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        (0..self.dim).all(|a| point[a] >= self.lower[a] && point[a] <= self.upper[a])
    }

    /// Distance from a point to the outer faces of the bounding box.
    pub fn distance_to_boundary(&self, point: &[f64]) -> f64 {
        (0..self.dim)
            .map(|a| (point[a] - self.lower[a]).min(self.upper[a] - point[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.coords(a), self.coords(b));
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }

    /// Nodes within Euclidean distance `r` of `center`, ascending.
    pub fn ball(&self, center: &[f64], r: f64) -> Result<Vec<usize>, GridError> {
        if center.len() < self.dim || !self.contains(center) {
            return Err(GridError::CenterOutsideDomain {
                center: center.to_vec(),
            });
        }
        let mut c = [0.0; 2];
        c[..self.dim].copy_from_slice(&center[..self.dim]);
        let range = |axis: usize| -> (usize, usize) {
            if axis >= self.dim {
                return (0, 0);
            }
            let lo = ((c[axis] - r - self.lower[axis]) / self.h).floor().max(0.0) as usize;
            let hi = ((c[axis] + r - self.lower[axis]) / self.h).ceil().max(0.0) as usize;
            (lo, hi.min(self.nodes[axis] - 1))
        };
        let (i0, i1) = range(0);
        let (j0, j1) = range(1);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = self.index(i, j);
                let p = self.coords(k);
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                if d2.sqrt() <= r {
                    out.push(k);
                }
            }
        }
        Ok(out)
    }
}

/// Operation-name alias for [`Grid::ball`].
pub fn grid_ball(grid: &Grid, center: &[f64], r: f64) -> Result<Vec<usize>, GridError> {
    grid.ball(center, r)
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::LengthMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFiniteSample { node, value });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    /// Evaluate `f` at every node (`f` receives `n` coordinates).
    pub fn sample(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        let values = (0..grid.node_count())
            .map(|k| f(&grid.coords(k)[..grid.dim()]))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Sup-norm of the difference, restricted to nodes accepted by `keep`.
    pub fn max_diff_where(&self, other: &ScalarField, keep: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(k, _)| keep(*k))
            .fold(0.0, |m, (_, (a, b))| m.max((a - b).abs()))
    }

    pub fn max_diff(&self, other: &ScalarField) -> f64 {
        self.max_diff_where(other, |_| true)
    }

    /// CSV dump: `x[,y],value`, one node per row in index order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = if self.grid.dim() == 1 {
            "x,value"
        } else {
            "x,y,value"
        };
        writeln!(w, "{header}")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", coord_prefix(&self.grid, k), fmt17(*v))?;
        }
        Ok(())
    }
}

/// Decimal with 17 significant digits; parses back to the same double.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn coord_prefix(grid: &Grid, k: usize) -> String {
    let c = grid.coords(k);
    if grid.dim() == 1 {
        fmt17(c[0])
    } else {
        format!("{},{}", fmt17(c[0]), fmt17(c[1]))
    }
}

/// Dirichlet values on the outer faces of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    grid: Grid,
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        let nodes = grid.boundary_nodes();
        let values: Vec<f64> = nodes
            .iter()
            .map(|&k| f(&grid.coords(k)[..grid.dim()]))
            .collect();
        Self::from_parts(grid, nodes, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self, GridError> {
        Self::from_fn(grid, |_| c)
    }

    pub fn zero(grid: Grid) -> Self {
        let nodes = grid.boundary_nodes();
        let values = vec![0.0; nodes.len()];
        BoundaryData {
            grid,
            nodes,
            values,
        }
    }

    /// Trace of a field on the boundary.
    pub fn from_field(field: &ScalarField) -> Self {
        let grid = *field.grid();
        let nodes = grid.boundary_nodes();
        let values = nodes.iter().map(|&k| field.get(k)).collect();
        BoundaryData {
            grid,
            nodes,
            values,
        }
    }

    fn from_parts(grid: Grid, nodes: Vec<usize>, values: Vec<f64>) -> Result<Self, GridError> {
        for (&node, &value) in nodes.iter().zip(&values) {
            if !value.is_finite() {
                return Err(GridError::NonFiniteSample { node, value });
            }
        }
        Ok(BoundaryData {
            grid,
            nodes,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, node: usize) -> Option<f64> {
        self.nodes
            .binary_search(&node)
            .ok()
            .map(|pos| self.values[pos])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Overwrite the boundary entries of a full nodal vector.
    pub fn impose(&self, full: &mut [f64]) {
        for (&k, &v) in self.nodes.iter().zip(&self.values) {
            full[k] = v;
        }
    }

    /// Field equal to the data on the boundary and `fill` inside.
    pub fn extend(&self, fill: f64) -> ScalarField {
        let mut values = vec![fill; self.grid.node_count()];
        self.impose(&mut values);
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        BoundaryData {
            grid: self.grid,
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}
