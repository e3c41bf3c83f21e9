use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabError;
use crate::free_boundary::magnitude;
use crate::grid::{BoundaryData, Grid};
use crate::ops::OperatorSpec;
use crate::radial::RadialBarrier;
use crate::system::{fixed_point_solve, ProblemSpec, SystemOptions};

/// Boundary data on `∂[−R, R]ⁿ` as a function of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LiouvilleFamily {
    /// Constant data of magnitude `θ·m·R^γ`, split evenly between `u` and `v`.
    Threshold { theta: f64 },
    /// Traces of the `ρ = 0` barrier with `E = Λ`.
    Barrier,
    Zero,
}

#[derive(Debug, Clone)]
pub struct LiouvilleSetup {
    pub f: OperatorSpec,
    pub g: OperatorSpec,
    pub p: f64,
    pub q: f64,
    pub dim: usize,
    pub nodes: usize,
    /// Radius of the fixed window around the origin.
    pub window: f64,
    pub family: LiouvilleFamily,
    pub opts: SystemOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiouvilleVerdict {
    /// Below the threshold and the dead core swallows the window.
    ConsistentWithLiouville,
    /// Below the threshold but the window does not empty out.
    Inconsistent,
    /// At or above the threshold; nontrivial solutions are admissible.
    AboveThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleReport {
    pub radii: Vec<f64>,
    /// Node maximum of the magnitude over the outermost layer.
    pub s_r: Vec<f64>,
    pub ratios: Vec<f64>,
    pub interior_sups: Vec<f64>,
    pub window: f64,
    pub gamma: f64,
    /// `min{A^{1/(1+p)}, B^{1/(1+q)}}` for `E = Λ`.
    pub threshold: f64,
    /// `A^{1/(1+p)} + B^{1/(1+q)}`, the limit ratio of the barrier itself.
    pub barrier_ratio: f64,
    /// The barrier's own ratio exceeds the threshold.
    pub barrier_exceeds_threshold: bool,
    /// Ratio at the largest radius, standing in for the limsup.
    pub limsup_proxy: f64,
    pub proxy_note: &'static str,
    pub verdict: LiouvilleVerdict,
}

pub fn scaled_grid(dim: usize, radius: f64, nodes: usize) -> Result<Grid, LabError> {
    Ok(match dim {
        1 => Grid::interval(-radius, radius, nodes)?,
        _ => Grid::square(-radius, radius, nodes)?,
    })
}

const PROXY_NOTE: &str = "limsup replaced by the ratio at the largest tested radius";

pub fn liouville_experiment(setup: &LiouvilleSetup, radii: &[f64]) -> Result<LiouvilleReport, LabError> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(LabError::BadRadii(format!("radii must be positive and increasing: {radii:?}")));
    }
    let origin = vec![0.0; setup.dim];
    let barrier = RadialBarrier::super_for(&setup.f, setup.p, setup.q, setup.dim, 0.0, &origin)?;
    let m = barrier.liouville_threshold();
    let gamma = barrier.gamma();
    let rows = radii
        .par_iter()
        .map(|&r| -> Result<(f64, f64), LabError> {
            let grid = scaled_grid(setup.dim, r, setup.nodes)?;
            let (phi, psi) = match setup.family {
                LiouvilleFamily::Threshold { theta } => {
                    let half = 0.5 * theta * m * r.powf(gamma);
                    (
                        BoundaryData::constant(grid, half.powf(1.0 + setup.p))?,
                        BoundaryData::constant(grid, half.powf(1.0 + setup.q))?,
                    )
                }
                LiouvilleFamily::Barrier => barrier.boundary_data(&grid)?,
                LiouvilleFamily::Zero => (BoundaryData::zero(grid), BoundaryData::zero(grid)),
            };
            let pr = ProblemSpec::new(setup.f.clone(), setup.g.clone(), setup.p, setup.q, phi, psi)?;
            let (pair, _) = fixed_point_solve(&pr, &setup.opts)?;
            let mag = magnitude(&pair)?;
            let s = grid.boundary_nodes().iter().fold(0.0_f64, |a, &k| a.max(mag.get(k)));
            let inner = grid
                .ball(&origin, setup.window)?
                .iter()
                .fold(0.0_f64, |a, &k| a.max(mag.get(k)));
            Ok((s, inner))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let s_r: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let interior_sups: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let ratios: Vec<f64> = s_r.iter().zip(radii).map(|(s, r)| s / r.powf(gamma)).collect();
    let limsup_proxy = *ratios.last().expect("nonempty");
    let verdict = if limsup_proxy >= m {
        LiouvilleVerdict::AboveThreshold
    } else if interior_sups[interior_sups.len() - 1] <= 0.5 * interior_sups[0] {
        LiouvilleVerdict::ConsistentWithLiouville
    } else {
        LiouvilleVerdict::Inconsistent
    };
    let barrier_ratio = barrier.magnitude_coefficient();
    Ok(LiouvilleReport {
        radii: radii.to_vec(),
        s_r,
        ratios,
        interior_sups,
        window: setup.window,
        gamma,
        threshold: m,
        barrier_ratio,
        barrier_exceeds_threshold: barrier_ratio > m,
        limsup_proxy,
        proxy_note: PROXY_NOTE,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(family: LiouvilleFamily) -> LiouvilleSetup {
        LiouvilleSetup {
            f: OperatorSpec::laplacian(),
            g: OperatorSpec::laplacian(),
            p: 0.5,
            q: 0.5,
            dim: 1,
            nodes: 257,
            window: 0.75,
            family,
            opts: SystemOptions::default(),
        }
    }

    #[test]
    fn below_threshold_window_empties() {
        let r = liouville_experiment(&setup(LiouvilleFamily::Threshold { theta: 0.5 }), &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.verdict, LiouvilleVerdict::ConsistentWithLiouville, "{r:?}");
        assert!(r.interior_sups[2] <= 0.5 * r.interior_sups[0]);
        assert!(r.ratios.iter().all(|&x| (x - 0.5 * r.threshold).abs() < 1e-12 * r.threshold));
    }

    #[test]
    fn barrier_ratio_is_constant() {
        let r = liouville_experiment(&setup(LiouvilleFamily::Barrier), &[1.0, 2.0, 4.0]).unwrap();
        for x in &r.ratios {
            assert!((x / r.ratios[0] - 1.0).abs() <= 0.02);
            assert!((x / r.barrier_ratio - 1.0).abs() <= 1e-12);
        }
        assert!(r.barrier_exceeds_threshold);
        assert_eq!(r.verdict, LiouvilleVerdict::AboveThreshold);
    }

    #[test]
    fn zero_data_is_trivial() {
        let r = liouville_experiment(&setup(LiouvilleFamily::Zero), &[1.0, 3.0]).unwrap();
        assert!(r.s_r.iter().all(|&s| s == 0.0));
        assert!(r.interior_sups.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn radii_must_increase() {
        assert!(matches!(
            liouville_experiment(&setup(LiouvilleFamily::Zero), &[2.0, 1.0]),
            Err(LabError::BadRadii(_))
        ));
    }
}
