//! Measurement routines run on computed or closed-form pairs.

mod compare;
mod flatten;
mod growth;
mod liouville;
mod measure;

pub use compare::{weak_compare, ComparisonReport};
pub use flatten::{flattening_experiment, FlatteningRow, FlatteningSetup, FlatteningTable};
pub use growth::{
    default_radius_window, growth_profile, nearest_free_boundary_node, nondegeneracy_ratios, GrowthProfile,
};
pub use liouville::{
    liouville_experiment, scaled_grid, LiouvilleFamily, LiouvilleReport, LiouvilleSetup, LiouvilleVerdict,
};
pub use measure::{
    box_dimension, density_scan, distance_transform, porosity_and_dimension, DensityReport, MeasureReport,
    PorosityReport,
};

use serde::Serialize;
use thiserror::Error;

use crate::free_boundary::FreeBoundaryError;
use crate::grid::GridError;
use crate::radial::RadialError;
use crate::system::SystemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("no free-boundary node within one node of {point:?}")]
    NotAFreeBoundaryPoint { point: Vec<f64> },
    #[error("ball of radius {radius} around {center:?} leaves the domain")]
    BallLeavesDomain { center: Vec<f64>, radius: f64 },
    #[error("boundary ordering fails for {component} at node {node}: super {sup:e} < sub {sub:e}")]
    BoundaryOrderingViolated {
        component: char,
        node: usize,
        sup: f64,
        sub: f64,
    },
    #[error("solution for delta = {delta} leaves [0, 1]: range [{min:e}, {max:e}]")]
    RangeViolation { delta: f64, min: f64, max: f64 },
    #[error("free boundary is empty")]
    EmptyFreeBoundary,
    #[error("invalid radii: {0}")]
    BadRadii(String),
    #[error("pairs live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    FreeBoundary(#[from] FreeBoundaryError),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// `None` with fewer than two points or a degenerate abscissa; pairs with a
/// nonpositive coordinate are skipped.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
