//! Single Dirichlet problems F(D²u) = f in Ω, u = φ on ∂Ω.
//!
//! Linear operators are solved directly (banded LU, or multigrid-GMRES on
//! large 2D grids) followed by residual-correction passes; SOR sweeps are
//! available as an alternative. Pucci operators use policy iteration:
//! freeze the extremal direction pair and coefficients at the current
//! iterate, solve the resulting linear M-matrix problem, repeat.

use std::io::{self, Write};

use thiserror::Error;

use crate::assembly::{assemble, InteriorMap};
use crate::grid::{BoundaryData, Grid, GridError, ScalarField};
use crate::linalg::{self, relax, LinalgError};
use crate::ops::{OpError, OperatorSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Operator(#[from] OpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("iterate became non-finite at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },
    #[error("no convergence within {} iterations (residual {:e})", .report.iterations, .report.residual)]
    MaxIterExceeded {
        best: Box<ScalarField>,
        report: SolveReport,
    },
}

/// F(D²u) = f₊ with u = φ on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProblem {
    pub operator: OperatorSpec,
    pub rhs: ScalarField,
    pub boundary: BoundaryData,
}

impl ScalarProblem {
    pub fn new(
        operator: OperatorSpec,
        rhs: ScalarField,
        boundary: BoundaryData,
    ) -> Result<Self, ScalarError> {
        if rhs.grid() != boundary.grid() {
            return Err(GridError::GridMismatch.into());
        }
        operator.check_grid(rhs.grid())?;
        Ok(ScalarProblem {
            operator,
            rhs,
            boundary,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.rhs.grid()
    }

    /// `1e−10·max(1, ‖f‖∞ + ‖φ‖∞)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-10 * (self.rhs.sup_norm() + self.boundary.sup_norm()).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub tolerance: f64,
    /// Sup-norm residual after each iteration.
    pub residual_log: Vec<f64>,
}

impl SolveReport {
    /// `iteration,residual` CSV.
    pub fn write_residual_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,residual")?;
        for (i, r) in self.residual_log.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, crate::grid::fmt17(*r))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearMethod {
    /// Banded LU, or multigrid-preconditioned GMRES on large 2D grids.
    Auto,
    /// Symmetric SOR sweeps with the given relaxation factor.
    Sor { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOptions {
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub method: LinearMethod,
    /// Step length of each policy update, in (0, 1].
    pub damping: f64,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        ScalarOptions {
            tol: None,
            max_iter: 100,
            method: LinearMethod::Auto,
            damping: 1.0,
        }
    }
}

/// Sup over interior nodes of |F(D²u) − f₊|.
pub fn scalar_residual(op: &OperatorSpec, u: &[f64], rhs: &[f64], grid: &Grid) -> f64 {
    let mut res = 0.0_f64;
    for node in 0..grid.node_count() {
        if !grid.is_boundary(node) {
            let lhs = op.stencil(grid, u, node).apply(u);
            res = res.max((lhs - rhs[node].max(0.0)).abs());
        }
    }
    res
}

pub fn solve_dirichlet(
    problem: &ScalarProblem,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveReport), ScalarError> {
    solve_dirichlet_with(
        problem,
        &ScalarOptions {
            tol: Some(tol),
            max_iter,
            ..Default::default()
        },
    )
}

pub fn solve_dirichlet_with(
    problem: &ScalarProblem,
    opts: &ScalarOptions,
) -> Result<(ScalarField, SolveReport), ScalarError> {
    let tol = opts.tol.unwrap_or_else(|| problem.default_tolerance());
    if !(tol > 0.0) {
        return Err(ScalarError::BadTolerance(tol));
    }
    let grid = *problem.grid();
    let op = &problem.operator;
    let map = InteriorMap::new(&grid);
    let rhs: Vec<f64> = problem.rhs.values().iter().map(|v| v.max(0.0)).collect();
    let mut u = problem.boundary.extend(0.0).into_values();
    let mut report = SolveReport {
        tolerance: tol,
        ..Default::default()
    };
    let mut best = (f64::INFINITY, u.clone());
    let max_iter = opts.max_iter.max(1);

    if let LinearMethod::Sor { omega } = opts.method {
        // Only meaningful for linear operators: one assembly, then sweeps.
        let (a, bc) = assemble(op, &grid, &u, &map, None);
        let b: Vec<f64> = map
            .nodes
            .iter()
            .zip(&bc)
            .map(|(&k, c)| rhs[k] - c)
            .collect();
        let mut x = map.gather(&u);
        let (sweeps, _) = relax::sor_solve(&a, &b, &mut x, omega, tol, max_iter);
        map.scatter(&x, &mut u);
        report.iterations = sweeps;
        report.residual = scalar_residual(op, &u, &rhs, &grid);
        report.residual_log.push(report.residual);
        return finish(grid, u, report, tol);
    }

    for it in 1..=max_iter {
        let (a, bc) = assemble(op, &grid, &u, &map, None);
        let x_old = map.gather(&u);
        let b: Vec<f64> = if op.is_linear() {
            // Correction form: A δ = f − F(u).
            let mut ax = vec![0.0; map.len()];
            a.matvec(&x_old, &mut ax);
            map.nodes
                .iter()
                .enumerate()
                .map(|(r, &k)| rhs[k] - bc[r] - ax[r])
                .collect()
        } else {
            map.nodes
                .iter()
                .zip(&bc)
                .map(|(&k, c)| rhs[k] - c)
                .collect()
        };
        let mut x = vec![0.0; map.len()];
        linalg::solve_scalar(&a, map.mx, map.my, &b, &mut x, 1e-12)?;
        let t = opts.damping.clamp(f64::MIN_POSITIVE, 1.0);
        let new: Vec<f64> = if op.is_linear() {
            x_old.iter().zip(&x).map(|(o, d)| o + d).collect()
        } else {
            x_old.iter().zip(&x).map(|(o, n)| o + t * (n - o)).collect()
        };
        if new.iter().any(|v| !v.is_finite()) {
            return Err(ScalarError::NonFiniteIterate { iteration: it });
        }
        map.scatter(&new, &mut u);
        let res = scalar_residual(op, &u, &rhs, &grid);
        report.iterations = it;
        report.residual = res;
        report.residual_log.push(res);
        if res < best.0 {
            best = (res, u.clone());
        }
        if res <= tol {
            break;
        }
    }
    if report.residual > tol && best.0 < report.residual {
        report.residual = best.0;
        u = best.1;
    }
    finish(grid, u, report, tol)
}

fn finish(
    grid: Grid,
    u: Vec<f64>,
    mut report: SolveReport,
    tol: f64,
) -> Result<(ScalarField, SolveReport), ScalarError> {
    let field = ScalarField::new(grid, u)?;
    report.converged = report.residual <= tol;
    if report.converged {
        Ok((field, report))
    } else {
        Err(ScalarError::MaxIterExceeded {
            best: Box::new(field),
            report,
        })
    }
}

/// Whether the maximum of `field` is attained on the boundary, within
/// `1e−10·max(1, ‖field‖∞)`. Meaningful for `rhs ≥ 0` (subsolutions).
pub fn maximum_principle_check(field: &ScalarField, boundary: &BoundaryData, rhs: &ScalarField) -> bool {
    let _ = rhs;
    let scale = field.sup_norm().max(1.0);
    let bmax = boundary
        .nodes()
        .iter()
        .map(|&k| field.get(k))
        .fold(f64::NEG_INFINITY, f64::max);
    field.max() <= bmax + 1e-10 * scale
}
