use rayon::prelude::*;
use serde::Serialize;

use super::LabError;
use crate::free_boundary::magnitude_with_tolerance;
use crate::grid::{BoundaryData, Grid};
use crate::ops::OperatorSpec;
use crate::radial::RadialBarrier;
use crate::system::{fixed_point_solve, ProblemSpec, SystemOptions};

/// The family `F(D²u) = δ²·v₊ᵖ`, `G(D²v) = γ_c·u₊^q` with fixed boundary data.
#[derive(Debug, Clone)]
pub struct FlatteningSetup {
    pub f: OperatorSpec,
    pub g: OperatorSpec,
    pub p: f64,
    pub q: f64,
    pub gamma_c: f64,
    pub phi: BoundaryData,
    pub psi: BoundaryData,
    pub opts: SystemOptions,
}

impl FlatteningSetup {
    /// Traces of the centred radial pair with dead-core radius `rho`,
    /// each rescaled to peak at `peak`.
    pub fn radial(
        op: OperatorSpec,
        p: f64,
        q: f64,
        gamma_c: f64,
        grid: Grid,
        rho: f64,
        peak: f64,
    ) -> Result<Self, LabError> {
        let b = RadialBarrier::centered(p, q, grid.dim(), rho)?;
        let (phi, psi) = b.boundary_data(&grid)?;
        let (su, sv) = (phi.max(), psi.max());
        let phi = if su > 0.0 { phi.scaled(peak / su) } else { phi };
        let psi = if sv > 0.0 { psi.scaled(peak / sv) } else { psi };
        Ok(FlatteningSetup {
            f: op.clone(),
            g: op,
            p,
            q,
            gamma_c,
            phi,
            psi,
            opts: SystemOptions::default(),
        })
    }

    pub fn problem(&self, delta: f64) -> Result<ProblemSpec, LabError> {
        Ok(ProblemSpec::new(
            self.f.clone(),
            self.g.clone(),
            self.p,
            self.q,
            self.phi.clone(),
            self.psi.clone(),
        )?
        .with_sources(delta * delta, self.gamma_c)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatteningRow {
    pub delta: f64,
    /// Node maximum of the magnitude over the grid ball of radius 1/2 at the
    /// domain centre.
    pub sup_half_ball: f64,
    pub u_center: f64,
    pub v_center: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatteningTable {
    pub gamma_c: f64,
    pub rows: Vec<FlatteningRow>,
    /// Sups nonincreasing in δ up to a 5% relative slack.
    pub nonincreasing: bool,
}

const TREND_SLACK: f64 = 0.05;

pub fn flattening_experiment(setup: &FlatteningSetup, deltas: &[f64]) -> Result<FlatteningTable, LabError> {
    let grid = *setup.phi.grid();
    let center: Vec<f64> = (0..grid.dim())
        .map(|a| 0.5 * (grid.lower()[a] + grid.upper()[a]))
        .collect();
    let half = grid.ball(&center, 0.5)?;
    let mid = *grid
        .ball(&center, grid.h())?
        .iter()
        .min_by(|&&a, &&b| {
            let d = |k: usize| {
                let c = grid.coords(k);
                (0..grid.dim()).map(|i| (c[i] - center[i]).powi(2)).sum::<f64>()
            };
            d(a).total_cmp(&d(b))
        })
        .expect("centre ball holds a node");
    let peak = 1.0 + setup.phi.sup_norm().max(setup.psi.sup_norm());
    let tol = 1e-6 * peak;
    let mut rows = deltas
        .par_iter()
        .map(|&delta| -> Result<FlatteningRow, LabError> {
            let pr = setup.problem(delta)?;
            let (pair, hist) = fixed_point_solve(&pr, &setup.opts)?;
            let lo = pair.u.min().min(pair.v.min());
            let hi = pair.u.max().max(pair.v.max());
            if lo < -tol || hi > 1.0 + tol {
                return Err(LabError::RangeViolation { delta, min: lo, max: hi });
            }
            let m = magnitude_with_tolerance(&pair, tol)?;
            Ok(FlatteningRow {
                delta,
                sup_half_ball: half.iter().fold(0.0_f64, |s, &k| s.max(m.get(k))),
                u_center: pair.u.get(mid),
                v_center: pair.v.get(mid),
                iterations: hist.iterations(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    // Walking towards smaller δ the sup may not drop.
    let nonincreasing = rows
        .windows(2)
        .all(|w| w[0].sup_half_ball <= w[1].sup_half_ball * (1.0 + TREND_SLACK) + 1e-300);
    Ok(FlatteningTable {
        gamma_c: setup.gamma_c,
        rows,
        nonincreasing,
    })
}
