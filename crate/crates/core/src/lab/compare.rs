use serde::Serialize;

use super::LabError;
use crate::system::SolutionPair;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `min` over nodes of `max{u* − u₋, v* − v₋}`.
    pub min_gap: f64,
    pub argmin: usize,
    /// Separate minima of `u* − u₋` and `v* − v₋`.
    pub min_u_gap: f64,
    pub min_v_gap: f64,
    /// `10h²·(1 + sup norms of all four fields)`.
    pub tolerance: f64,
    pub passed: bool,
}

/// Discrete weak comparison between a super-pair and a sub-pair with
/// ordered boundary values.
pub fn weak_compare(sup: &SolutionPair, sub: &SolutionPair) -> Result<ComparisonReport, LabError> {
    let grid = *sup.grid();
    if sub.grid() != &grid {
        return Err(LabError::GridMismatch);
    }
    let scale = 1.0 + sup.u.sup_norm() + sup.v.sup_norm() + sub.u.sup_norm() + sub.v.sup_norm();
    // Slack for boundary values that agree up to rounding.
    let slack = 1e-14 * scale;
    for k in grid.boundary_nodes() {
        for (component, a, b) in [('u', &sup.u, &sub.u), ('v', &sup.v, &sub.v)] {
            if a.get(k) < b.get(k) - slack {
                return Err(LabError::BoundaryOrderingViolated {
                    component,
                    node: k,
                    sup: a.get(k),
                    sub: b.get(k),
                });
            }
        }
    }
    let h = grid.h();
    let tolerance = 10.0 * h * h * scale;
    let mut min_gap = f64::INFINITY;
    let mut argmin = 0;
    let mut min_u_gap = f64::INFINITY;
    let mut min_v_gap = f64::INFINITY;
    for k in 0..grid.node_count() {
        let du = sup.u.get(k) - sub.u.get(k);
        let dv = sup.v.get(k) - sub.v.get(k);
        min_u_gap = min_u_gap.min(du);
        min_v_gap = min_v_gap.min(dv);
        let g = du.max(dv);
        if g < min_gap {
            min_gap = g;
            argmin = k;
        }
    }
    Ok(ComparisonReport {
        min_gap,
        argmin,
        min_u_gap,
        min_v_gap,
        tolerance,
        passed: min_gap >= -tolerance,
    })
}
