//! The magnitude `|(u,v)| = u₊^{1/(1+p)} + v₊^{1/(1+q)}` and the split of the
//! grid into dead core, positivity set and free boundary.

use std::io::{self, Write};

use thiserror::Error;

use crate::grid::{coord_prefix, fmt17, Grid, ScalarField};
use crate::system::{ProblemSpec, SolutionPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FreeBoundaryError {
    #[error("component {component} is {value:e} at node {node}, below the clamping tolerance")]
    NegativeInput {
        component: char,
        node: usize,
        value: f64,
    },
    #[error("threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
}

/// Relative size below which negative values are treated as rounding noise.
pub const NEGATIVE_TOL: f64 = 1e-8;

/// Magnitude with negatives above `−NEGATIVE_TOL·(1 + ‖u‖∞ + ‖v‖∞)` clamped
/// to zero.
pub fn magnitude(pair: &SolutionPair) -> Result<ScalarField, FreeBoundaryError> {
    let scale = 1.0 + pair.u.sup_norm() + pair.v.sup_norm();
    magnitude_with_tolerance(pair, NEGATIVE_TOL * scale)
}

/// Magnitude that accepts negatives down to `−tol` (use `f64::INFINITY` to
/// take positive parts unconditionally).
pub fn magnitude_with_tolerance(pair: &SolutionPair, tol: f64) -> Result<ScalarField, FreeBoundaryError> {
    for (component, f) in [('u', &pair.u), ('v', &pair.v)] {
        if let Some((node, &value)) = f.values().iter().enumerate().find(|(_, &x)| x < -tol) {
            return Err(FreeBoundaryError::NegativeInput {
                component,
                node,
                value,
            });
        }
    }
    let (ep, eq) = (1.0 / (1.0 + pair.p), 1.0 / (1.0 + pair.q));
    let values = pair
        .u
        .values()
        .iter()
        .zip(pair.v.values())
        .map(|(&u, &v)| u.max(0.0).powf(ep) + v.max(0.0).powf(eq))
        .collect();
    Ok(ScalarField::new(*pair.grid(), values).expect("same grid"))
}

/// Default threshold for a problem: the magnitude of a pair whose components
/// both sit at `1e-8·h²·(1 + ‖φ‖∞ + ‖ψ‖∞)`.
pub fn default_threshold(problem: &ProblemSpec) -> f64 {
    let scale = 1.0 + problem.phi().sup_norm() + problem.psi().sup_norm();
    threshold_for(problem.grid().h(), scale, problem.p(), problem.q())
}

pub fn threshold_for(h: f64, scale: f64, p: f64, q: f64) -> f64 {
    let eta = 1e-8 * h * h * scale;
    eta.powf(1.0 / (1.0 + p)) + eta.powf(1.0 / (1.0 + q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Core,
    Positive,
    /// Dead-core node with a positive axis neighbour.
    FreeBoundary,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Core => "core",
            Region::Positive => "positive",
            Region::FreeBoundary => "fb",
        }
    }

    pub fn is_dead(self) -> bool {
        self != Region::Positive
    }
}

#[derive(Debug, Clone)]
pub struct RegionDecomposition {
    magnitude: ScalarField,
    labels: Vec<Region>,
    eps: f64,
}

fn axis_neighbors(grid: &Grid, k: usize) -> impl Iterator<Item = usize> + '_ {
    let offs: &[(isize, isize)] = if grid.dim() == 1 {
        &[(-1, 0), (1, 0)]
    } else {
        &[(-1, 0), (1, 0), (0, -1), (0, 1)]
    };
    offs.iter().filter_map(move |&(di, dj)| grid.offset(k, di, dj))
}

impl RegionDecomposition {
    /// Threshold an already computed magnitude.
    pub fn from_magnitude(magnitude: ScalarField, eps: f64) -> Result<Self, FreeBoundaryError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(FreeBoundaryError::BadThreshold(eps));
        }
        let grid = *magnitude.grid();
        let positive: Vec<bool> = magnitude.values().iter().map(|&m| m > eps).collect();
        let labels = (0..grid.node_count())
            .map(|k| {
                if positive[k] {
                    Region::Positive
                } else if axis_neighbors(&grid, k).any(|j| positive[j]) {
                    Region::FreeBoundary
                } else {
                    Region::Core
                }
            })
            .collect();
        Ok(RegionDecomposition {
            magnitude,
            labels,
            eps,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.magnitude.grid()
    }
    pub fn magnitude(&self) -> &ScalarField {
        &self.magnitude
    }
    pub fn threshold(&self) -> f64 {
        self.eps
    }
    pub fn labels(&self) -> &[Region] {
        &self.labels
    }
    pub fn region(&self, k: usize) -> Region {
        self.labels[k]
    }

    fn select(&self, f: impl Fn(Region) -> bool) -> Vec<usize> {
        (0..self.labels.len()).filter(|&k| f(self.labels[k])).collect()
    }

    /// Dead-core nodes, free-boundary nodes included.
    pub fn dead_core(&self) -> Vec<usize> {
        self.select(Region::is_dead)
    }
    pub fn positivity(&self) -> Vec<usize> {
        self.select(|r| r == Region::Positive)
    }
    pub fn free_boundary(&self) -> Vec<usize> {
        self.select(|r| r == Region::FreeBoundary)
    }

    /// Region dump: coordinates, magnitude and label per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = if self.grid().dim() == 1 {
            "x,magnitude,label"
        } else {
            "x,y,magnitude,label"
        };
        writeln!(w, "{header}")?;
        for (k, r) in self.labels.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                coord_prefix(self.grid(), k),
                fmt17(self.magnitude.get(k)),
                r.label()
            )?;
        }
        Ok(())
    }
}

pub fn decompose(pair: &SolutionPair, eps: f64) -> Result<RegionDecomposition, FreeBoundaryError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(FreeBoundaryError::BadThreshold(eps));
    }
    RegionDecomposition::from_magnitude(magnitude(pair)?, eps)
}
