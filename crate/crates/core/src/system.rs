//! The coupled dead-core system
//!
//! ```text
//! F(D²u) = c_u·v₊ᵖ,   G(D²v) = c_v·u₊^q   in Ω,   u = φ, v = ψ on ∂Ω.
//! ```
//!
//! [`apply_T`] is the two-solve map whose fixed points are solutions.
//! Plain Picard iteration of that map is available, but for `p, q > 0` the
//! nonnegative solution is typically a saddle of `T` and Picard settles
//! into a 2-cycle. The default solver is therefore a projected
//! (semismooth) Newton method on the full discrete system, started from
//! the first Picard iterate `T(0, 0)`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble, assemble_with_fixed, InteriorMap};
use crate::grid::{fmt17, BoundaryData, Grid, GridError, ScalarField};
use crate::linalg::{self, CoupledSystem, LinalgError};
use crate::ops::{OpError, OperatorSpec};
use crate::scalar::{self, ScalarError, ScalarOptions, ScalarProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Operator(#[from] OpError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("exponents must satisfy p ≥ 0, q ≥ 0 and pq < 1 (got p = {p}, q = {q})")]
    ExponentOutOfRange { p: f64, q: f64 },
    #[error("source scales must be finite and nonnegative (got {c_u}, {c_v})")]
    BadSourceScale { c_u: f64, c_v: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("damping must lie in (0, 1], got {0}")]
    BadDamping(f64),
    #[error("iterate became non-finite at outer iteration {iteration}")]
    NonFiniteIterate { iteration: usize },
    #[error("no convergence within {} outer iterations", .history.iterations())]
    MaxOuterExceeded {
        best: Box<SolutionPair>,
        history: Box<IterationHistory>,
    },
    #[error("iteration diverges even with damping {damping}")]
    DivergingIteration {
        best: Box<SolutionPair>,
        history: Box<IterationHistory>,
        damping: f64,
    },
}

impl SystemError {
    /// Best iterate and history for the non-convergence variants.
    pub fn partial(&self) -> Option<(&SolutionPair, &IterationHistory)> {
        match self {
            SystemError::MaxOuterExceeded { best, history }
            | SystemError::DivergingIteration { best, history, .. } => Some((best, history)),
            _ => None,
        }
    }
}

/// Meaning of `t₊⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPowerConvention {
    /// `t₊⁰ = 1` for every `t` (the `0⁰ = 1` convention).
    #[default]
    One,
    /// `t₊⁰ = 1` if `t > 0` and 0 if `t < 0`; at `t = 0` any value in
    /// `[0, 1]` is admissible (residuals measure the distance to that range).
    Indicator,
}

/// `t₊ᵖ` under the given zero-power convention.
pub fn positive_power(t: f64, p: f64, conv: ZeroPowerConvention) -> f64 {
    if p == 0.0 {
        match conv {
            ZeroPowerConvention::One => 1.0,
            ZeroPowerConvention::Indicator => f64::from(u8::from(t > 0.0)),
        }
    } else if t > 0.0 {
        t.powf(p)
    } else {
        0.0
    }
}

/// Derivative of `t ↦ t₊ᵉ`; zero where it is infinite (`t = 0`, `0 < e < 1`).
fn power_slope(t: f64, e: f64) -> f64 {
    if e == 0.0 || t < 0.0 || (t == 0.0 && e < 1.0) {
        0.0
    } else if t == 0.0 {
        f64::from(u8::from(e == 1.0))
    } else {
        e * t.powf(e - 1.0)
    }
}

/// Local Newton coordinate for a field entering a right-hand side as `c·t₊ᵉ`.
/// Where the slope `c·e·tᵉ⁻¹` would exceed the stencil scale `1/h²`, the step
/// is taken in `y = sign(t)·|t|ᵉ`, which turns `t₊ᵉ` into the linear `y₊`.
#[derive(Debug, Clone, Copy)]
struct Chart {
    e: f64,
    thresh: f64,
}

impl Chart {
    fn new(e: f64, c: f64, h: f64) -> Self {
        let thresh = if e > 0.0 && e < 1.0 && c > 0.0 {
            (c * e * h * h).powf(1.0 / (1.0 - e))
        } else {
            0.0
        };
        Chart { e, thresh }
    }

    fn bends(self, t: f64) -> bool {
        t.abs() < self.thresh
    }

    /// `(dt/dy, d(t₊ᵉ)/dy)` at `t`.
    fn linearize(self, t: f64) -> (f64, f64) {
        if self.bends(t) {
            let scale = t.abs().powf(1.0 - self.e) / self.e;
            (scale.max(DT_DY_FLOOR), f64::from(u8::from(t >= 0.0)))
        } else {
            (1.0, power_slope(t, self.e))
        }
    }

    /// `t` after a step `d` in the local coordinate.
    fn step(self, t: f64, d: f64) -> f64 {
        if self.bends(t) {
            let y = t.signum() * t.abs().powf(self.e) + d;
            y.signum() * y.abs().powf(1.0 / self.e)
        } else {
            t + d
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    f: OperatorSpec,
    g: OperatorSpec,
    p: f64,
    q: f64,
    phi: BoundaryData,
    psi: BoundaryData,
    c_u: f64,
    c_v: f64,
    zero_power: ZeroPowerConvention,
}

/// Reject anything outside `p, q ≥ 0`, `pq < 1`.
pub fn check_exponents(p: f64, q: f64) -> Result<(), SystemError> {
    if !(p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite() && p * q < 1.0) {
        return Err(SystemError::ExponentOutOfRange { p, q });
    }
    Ok(())
}

impl ProblemSpec {
    pub fn new(
        f: OperatorSpec,
        g: OperatorSpec,
        p: f64,
        q: f64,
        phi: BoundaryData,
        psi: BoundaryData,
    ) -> Result<Self, SystemError> {
        check_exponents(p, q)?;
        if phi.grid() != psi.grid() {
            return Err(GridError::GridMismatch.into());
        }
        f.check_grid(phi.grid())?;
        g.check_grid(phi.grid())?;
        Ok(ProblemSpec {
            f,
            g,
            p,
            q,
            phi,
            psi,
            c_u: 1.0,
            c_v: 1.0,
            zero_power: ZeroPowerConvention::One,
        })
    }

    /// Scale the sources: `F(D²u) = c_u·v₊ᵖ`, `G(D²v) = c_v·u₊^q`.
    pub fn with_sources(mut self, c_u: f64, c_v: f64) -> Result<Self, SystemError> {
        if !(c_u >= 0.0 && c_v >= 0.0 && c_u.is_finite() && c_v.is_finite()) {
            return Err(SystemError::BadSourceScale { c_u, c_v });
        }
        self.c_u = c_u;
        self.c_v = c_v;
        Ok(self)
    }

    pub fn with_zero_power(mut self, conv: ZeroPowerConvention) -> Self {
        self.zero_power = conv;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }
    pub fn f(&self) -> &OperatorSpec {
        &self.f
    }
    pub fn g(&self) -> &OperatorSpec {
        &self.g
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn phi(&self) -> &BoundaryData {
        &self.phi
    }
    pub fn psi(&self) -> &BoundaryData {
        &self.psi
    }
    pub fn sources(&self) -> (f64, f64) {
        (self.c_u, self.c_v)
    }
    pub fn zero_power(&self) -> ZeroPowerConvention {
        self.zero_power
    }

    /// `1e−8·(1 + ‖φ‖∞ + ‖ψ‖∞)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-8 * (1.0 + self.phi.sup_norm() + self.psi.sup_norm())
    }

    /// Both equations identical, so `u = v` is preserved by Newton.
    pub fn is_symmetric(&self) -> bool {
        self.f == self.g && self.p == self.q && self.phi == self.psi && self.c_u == self.c_v
    }

    fn rhs_u(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&t| self.c_u * positive_power(t, self.p, self.zero_power))
            .collect()
    }

    fn rhs_v(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .map(|&t| self.c_v * positive_power(t, self.q, self.zero_power))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    pub u: ScalarField,
    pub v: ScalarField,
    pub p: f64,
    pub q: f64,
}

impl SolutionPair {
    pub fn new(u: ScalarField, v: ScalarField, p: f64, q: f64) -> Result<Self, SystemError> {
        check_exponents(p, q)?;
        if u.grid() != v.grid() {
            return Err(GridError::GridMismatch.into());
        }
        Ok(SolutionPair { u, v, p, q })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn max_diff(&self, other: &SolutionPair) -> f64 {
        self.u.max_diff(&other.u).max(self.v.max_diff(&other.v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemMethod {
    #[default]
    Newton,
    Picard,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IterationHistory {
    pub method: SystemMethod,
    pub tolerance: f64,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub res_u: Vec<f64>,
    pub res_v: Vec<f64>,
    /// Newton step length or Picard damping used at each iteration.
    pub step: Vec<f64>,
    pub converged: bool,
}

impl IterationHistory {
    pub fn iterations(&self) -> usize {
        self.du.len()
    }

    pub fn final_residuals(&self) -> (f64, f64) {
        (
            self.res_u.last().copied().unwrap_or(f64::NAN),
            self.res_v.last().copied().unwrap_or(f64::NAN),
        )
    }

    fn push(&mut self, du: f64, dv: f64, res: (f64, f64), step: f64) {
        self.du.push(du);
        self.dv.push(dv);
        self.res_u.push(res.0);
        self.res_v.push(res.1);
        self.step.push(step);
    }

    /// `iter,du,dv,res_u,res_v` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,du,dv,res_u,res_v")?;
        for k in 0..self.iterations() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k + 1,
                fmt17(self.du[k]),
                fmt17(self.dv[k]),
                fmt17(self.res_u[k]),
                fmt17(self.res_v[k])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemOptions {
    /// Defaults to [`ProblemSpec::default_tolerance`].
    pub tol: Option<f64>,
    pub max_outer: usize,
    pub method: SystemMethod,
    /// Picard relaxation ω ∈ (0, 1]; halved when the iteration diverges.
    pub damping: f64,
    /// Keep Newton iterates nonnegative: no value may drop below
    /// `1e−3` times its previous value. `None` enables this when `φ, ψ ≥ 0`
    /// and the sources vanish on `t ≤ 0`.
    pub clamp: Option<bool>,
    /// Solve the scalar equation when [`ProblemSpec::is_symmetric`].
    pub symmetric_reduction: bool,
    /// Start Newton from the interpolated solution on the next coarser
    /// nested grid (recursively) when the node counts allow it.
    pub nested: bool,
}

impl Default for SystemOptions {
    fn default() -> Self {
        SystemOptions {
            tol: None,
            max_outer: 500,
            method: SystemMethod::Newton,
            damping: 1.0,
            clamp: None,
            symmetric_reduction: true,
            nested: true,
        }
    }
}

impl SystemOptions {
    pub fn picard(damping: f64) -> Self {
        SystemOptions {
            method: SystemMethod::Picard,
            damping,
            ..Default::default()
        }
    }
}

/// One application of the two-solve map: `u` solves `F(D²u) = c_u·f₊ᵖ`
/// with `u = φ`, `v` solves `G(D²v) = c_v·g₊^q` with `v = ψ`. The next
/// Picard input is `(f, g) ← (v, u)`.
#[allow(non_snake_case)]
pub fn apply_T(
    problem: &ProblemSpec,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<SolutionPair, SystemError> {
    if f.grid() != problem.grid() || g.grid() != problem.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let grid = *problem.grid();
    let pu = ScalarProblem::new(
        problem.f.clone(),
        ScalarField::new(grid, problem.rhs_u(f.values()))?,
        problem.phi.clone(),
    )?;
    let pv = ScalarProblem::new(
        problem.g.clone(),
        ScalarField::new(grid, problem.rhs_v(g.values()))?,
        problem.psi.clone(),
    )?;
    let opts = ScalarOptions::default();
    let (u, v) = rayon::join(
        || scalar::solve_dirichlet_with(&pu, &opts),
        || scalar::solve_dirichlet_with(&pv, &opts),
    );
    SolutionPair::new(u?.0, v?.0, problem.p, problem.q)
}

/// Interior residual vectors `F_h(u) − c_u·v₊ᵖ` and `G_h(v) − c_v·u₊^q`.
fn residual_vectors(
    problem: &ProblemSpec,
    u: &[f64],
    v: &[f64],
    map: &InteriorMap,
) -> (Vec<f64>, Vec<f64>) {
    let grid = problem.grid();
    let conv = problem.zero_power;
    map.nodes
        .par_iter()
        .map(|&k| {
            let fu = problem.f.stencil(grid, u, k).apply(u);
            let gv = problem.g.stencil(grid, v, k).apply(v);
            (
                source_residual(fu, problem.c_u, v[k], problem.p, conv),
                source_residual(gv, problem.c_v, u[k], problem.q, conv),
            )
        })
        .unzip()
}

fn source_residual(f: f64, c: f64, t: f64, p: f64, conv: ZeroPowerConvention) -> f64 {
    if p == 0.0 && t == 0.0 && conv == ZeroPowerConvention::Indicator {
        f - f.clamp(0.0, c)
    } else {
        f - c * positive_power(t, p, conv)
    }
}

fn merit(ru: &[f64], rv: &[f64]) -> f64 {
    0.5 * ru.iter().chain(rv).map(|r| r * r).sum::<f64>()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Sup over interior nodes of `|F_h(u) − c_u·v₊ᵖ|` and `|G_h(v) − c_v·u₊^q|`.
pub fn system_residual(problem: &ProblemSpec, pair: &SolutionPair) -> (f64, f64) {
    let map = InteriorMap::new(problem.grid());
    let (ru, rv) = residual_vectors(problem, pair.u.values(), pair.v.values(), &map);
    (sup(&ru), sup(&rv))
}

/// Signed residuals `F_h(u) − c_u·v₊ᵖ`, `G_h(v) − c_v·u₊^q` on every node
/// (zero on the boundary).
pub fn signed_residuals(problem: &ProblemSpec, pair: &SolutionPair) -> (ScalarField, ScalarField) {
    let grid = *problem.grid();
    let map = InteriorMap::new(&grid);
    let (ru, rv) = residual_vectors(problem, pair.u.values(), pair.v.values(), &map);
    let mut fu = vec![0.0; grid.node_count()];
    let mut fv = vec![0.0; grid.node_count()];
    map.scatter(&ru, &mut fu);
    map.scatter(&rv, &mut fv);
    (
        ScalarField::new(grid, fu).expect("finite residuals"),
        ScalarField::new(grid, fv).expect("finite residuals"),
    )
}

pub fn fixed_point_solve(
    problem: &ProblemSpec,
    opts: &SystemOptions,
) -> Result<(SolutionPair, IterationHistory), SystemError> {
    let tol = opts.tol.unwrap_or_else(|| problem.default_tolerance());
    if !(tol > 0.0) {
        return Err(SystemError::BadTolerance(tol));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(SystemError::BadDamping(opts.damping));
    }
    match opts.method {
        SystemMethod::Newton => newton_or_unclamped(problem, opts, tol, None),
        SystemMethod::Picard => picard(problem, opts, tol),
    }
}

/// Newton from a caller-supplied initial pair (boundary values are reset
/// to `φ`, `ψ`).
pub fn fixed_point_solve_from(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    start: &SolutionPair,
) -> Result<(SolutionPair, IterationHistory), SystemError> {
    let tol = opts.tol.unwrap_or_else(|| problem.default_tolerance());
    if !(tol > 0.0) {
        return Err(SystemError::BadTolerance(tol));
    }
    if start.grid() != problem.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let mut u = start.u.values().to_vec();
    let mut v = start.v.values().to_vec();
    problem.phi.impose(&mut u);
    problem.psi.impose(&mut v);
    newton_or_unclamped(problem, opts, tol, Some((u, v)))
}

fn auto_clamp(problem: &ProblemSpec) -> bool {
    problem.phi.min() >= 0.0
        && problem.psi.min() >= 0.0
        && ((problem.p > 0.0 && problem.q > 0.0)
            || problem.zero_power == ZeroPowerConvention::Indicator)
}

/// Newton restricted to nonnegative iterates first; when that stalls, the
/// nonnegative discrete solution may not exist, so search again without the
/// bound, and finally by continuation on the full grid alone.
fn newton_or_unclamped(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    tol: f64,
    start: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<(SolutionPair, IterationHistory), SystemError> {
    if obstacle_form(problem, opts) {
        return obstacle(problem, opts, tol, start.map(|s| s.0));
    }
    let mut attempts = vec![*opts];
    let mut last = *opts;
    if opts.clamp.is_none() && auto_clamp(problem) {
        last.clamp = Some(false);
        attempts.push(last);
    }
    if opts.nested && start.is_none() {
        last.nested = false;
        attempts.push(last);
    }
    let mut result = None;
    for o in attempts {
        match newton(problem, &o, tol, start.clone()) {
            Err(
                e @ (SystemError::MaxOuterExceeded { .. }
                | SystemError::NonFiniteIterate { .. }
                | SystemError::Linalg(_)),
            ) => result = Some(Err(e)),
            r => return r,
        }
    }
    result.expect("at least one attempt")
}

/// Symmetric `p = q = 0` under the indicator convention with nonnegative
/// data: `F_h(u) ∈ c·H(u)` is the complementarity problem
/// `min(u, c − F_h(u)) = 0`.
fn obstacle_form(problem: &ProblemSpec, opts: &SystemOptions) -> bool {
    opts.symmetric_reduction
        && problem.is_symmetric()
        && problem.p == 0.0
        && problem.zero_power == ZeroPowerConvention::Indicator
        && problem.phi.min() >= 0.0
}

/// Howard (policy) iteration on `min(u, h²(c − F_h(u))) = 0`: pin the nodes
/// where the first entry is smaller, solve the equation elsewhere.
fn obstacle(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    tol: f64,
    start: Option<Vec<f64>>,
) -> Result<(SolutionPair, IterationHistory), SystemError> {
    let grid = *problem.grid();
    let map = InteriorMap::new(&grid);
    let h2 = grid.h() * grid.h();
    let c = problem.c_u;
    let mut hist = IterationHistory {
        method: SystemMethod::Newton,
        tolerance: tol,
        ..Default::default()
    };
    let start = start.or_else(|| nested_start(problem, opts, tol).map(|s| s.0));
    // Without a start, the unconstrained solve lies below the solution and
    // Howard iteration climbs from there.
    let mut first = start.is_none();
    let mut u = start.unwrap_or_else(|| problem.phi.extend(0.0).into_values());
    problem.phi.impose(&mut u);
    let (ru, _) = residual_vectors(problem, &u, &u, &map);
    let mut res = sup(&ru);
    hist.push(sup(&u), sup(&u), (res, res), 1.0);
    let mut it = 1;
    let mut prev: Option<Vec<bool>> = None;
    while res > tol && it < opts.max_outer {
        it += 1;
        let pin: Vec<bool> = map
            .nodes
            .iter()
            .map(|&k| {
                if first {
                    return false;
                }
                let f = problem.f.stencil(&grid, &u, k).apply(&u);
                u[k] <= h2 * (c - f)
            })
            .collect();
        // Same policy twice (and a linear F): the iterate cannot move any more.
        if problem.f.is_linear() && prev.as_ref() == Some(&pin) {
            break;
        }
        first = false;
        let (a, bc) = assemble_with_fixed(&problem.f, &grid, &u, &map, &pin);
        let b: Vec<f64> = pin
            .iter()
            .zip(&bc)
            .map(|(&p, &g)| if p { 0.0 } else { c - g })
            .collect();
        let mut x = map.gather(&u);
        linalg::solve_scalar(&a, map.mx, map.my, &b, &mut x, 1e-13)?;
        for (xi, &p) in x.iter_mut().zip(&pin) {
            if p {
                *xi = 0.0;
            }
        }
        let mut nu = u.clone();
        map.scatter(&x, &mut nu);
        let du = nu.iter().zip(&u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        u = nu;
        let (ru, _) = residual_vectors(problem, &u, &u, &map);
        res = sup(&ru);
        hist.push(du, du, (res, res), 1.0);
        if !u.iter().all(|x| x.is_finite()) {
            return Err(SystemError::NonFiniteIterate { iteration: it });
        }
        prev = Some(pin);
    }
    let pair = SolutionPair::new(
        ScalarField::new(grid, u.clone())?,
        ScalarField::new(grid, u)?,
        problem.p,
        problem.q,
    )?;
    hist.converged = res <= tol;
    if hist.converged {
        Ok((pair, hist))
    } else {
        Err(SystemError::MaxOuterExceeded {
            best: Box::new(pair),
            history: Box::new(hist),
        })
    }
}

fn picard(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    tol: f64,
) -> Result<(SolutionPair, IterationHistory), SystemError> {
    let grid = *problem.grid();
    let mut hist = IterationHistory {
        method: SystemMethod::Picard,
        tolerance: tol,
        ..Default::default()
    };
    let mut f = ScalarField::zeros(grid);
    let mut g = ScalarField::zeros(grid);
    let mut prev = SolutionPair::new(f.clone(), g.clone(), problem.p, problem.q)?;
    let mut best: Option<(f64, SolutionPair)> = None;
    let mut omega = opts.damping;
    let mut growth = 0;
    let mut last_change = f64::INFINITY;
    for it in 1..=opts.max_outer.max(1) {
        let pair = apply_T(problem, &f, &g)?;
        let du = pair.u.max_diff(&prev.u);
        let dv = pair.v.max_diff(&prev.v);
        let res = system_residual(problem, &pair);
        if !(res.0.is_finite() && res.1.is_finite()) {
            return Err(SystemError::NonFiniteIterate { iteration: it });
        }
        hist.push(du, dv, res, omega);
        let worst = res.0.max(res.1);
        if best.as_ref().is_none_or(|b| worst < b.0) {
            best = Some((worst, pair.clone()));
        }
        if worst <= tol {
            hist.converged = true;
            return Ok((pair, hist));
        }
        let change = du.max(dv);
        growth = if change > last_change { growth + 1 } else { 0 };
        last_change = change;
        if growth >= 10 {
            omega /= 2.0;
            growth = 0;
            if omega < 1.0 / 1024.0 {
                return Err(SystemError::DivergingIteration {
                    best: Box::new(best.expect("at least one iterate").1),
                    history: Box::new(hist),
                    damping: omega,
                });
            }
        }
        let relax = |old: &ScalarField, new: &ScalarField| {
            let vals = old
                .values()
                .iter()
                .zip(new.values())
                .map(|(o, n)| (1.0 - omega) * o + omega * n)
                .collect();
            ScalarField::new(grid, vals)
        };
        f = relax(&f, &pair.v)?;
        g = relax(&g, &pair.u)?;
        prev = pair;
    }
    Err(SystemError::MaxOuterExceeded {
        best: Box::new(best.expect("at least one iterate").1),
        history: Box::new(hist),
    })
}

/// Keeps Jacobian rows of fields sitting at zero from vanishing.
const DT_DY_FLOOR: f64 = 1e-10;
const NONMONOTONE: usize = 5;
/// Newton gives up after this many steps without halving the best residual.
const STALL: usize = 15;
/// Newton budget for each continuation increment.
const CONTINUATION_STEPS: usize = 25;
/// Largest per-step relative decrease of a nonnegative value.
const SHRINK: f64 = 1e-3;
/// Nested starts stop coarsening below this many nodes per axis.
const MIN_NESTED: usize = 17;

/// Solve on the grid with every other node and interpolate the result.
fn nested_start(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    tol: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    if !opts.nested {
        return None;
    }
    let fine = *problem.grid();
    let dims = &fine.nodes_per_axis()[..fine.dim()];
    if dims.iter().any(|&m| (m - 1) % 2 != 0 || (m - 1) / 2 + 1 < MIN_NESTED) {
        return None;
    }
    let cdims: Vec<usize> = dims.iter().map(|&m| (m - 1) / 2 + 1).collect();
    let coarse = Grid::new(
        &fine.lower()[..fine.dim()],
        &fine.upper()[..fine.dim()],
        &cdims,
    )
    .ok()?;
    let restrict_bd = |bd: &BoundaryData| {
        let full = bd.extend(0.0);
        let vals = (0..coarse.node_count())
            .map(|k| {
                let (i, j) = coarse.ij(k);
                full.get(fine.index(2 * i, 2 * j))
            })
            .collect();
        ScalarField::new(coarse, vals).map(|f| BoundaryData::from_field(&f))
    };
    let cp = ProblemSpec {
        f: problem.f.restricted(&coarse, 2),
        g: problem.g.restricted(&coarse, 2),
        phi: restrict_bd(&problem.phi).ok()?,
        psi: restrict_bd(&problem.psi).ok()?,
        ..problem.clone()
    };
    let coarse_solve = if obstacle_form(&cp, opts) {
        obstacle(&cp, opts, tol, None)
    } else {
        newton(&cp, opts, tol, None)
    };
    let pair = match coarse_solve {
        Ok((pair, _)) => pair,
        Err(e) => e.partial()?.0.clone(),
    };
    let mut u = prolong(pair.u.values(), &coarse, &fine);
    let mut v = prolong(pair.v.values(), &coarse, &fine);
    problem.phi.impose(&mut u);
    problem.psi.impose(&mut v);
    Some((u, v))
}

/// Follow the solution from zero sources (a pair of homogeneous problems)
/// up to the full source scale, shrinking the increment when Newton fails.
fn continuation_start(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), SystemError> {
    let zero = ScalarField::zeros(*problem.grid());
    let homogeneous = problem.clone().with_sources(0.0, 0.0)?;
    let first = apply_T(&homogeneous, &zero, &zero)?;
    let mut state = (first.u.into_values(), first.v.into_values());
    if problem.c_u == 0.0 && problem.c_v == 0.0 {
        return Ok(state);
    }
    let inner = SystemOptions {
        max_outer: opts.max_outer.min(CONTINUATION_STEPS),
        ..*opts
    };
    let (mut lam, mut dl) = (0.0_f64, 0.25_f64);
    while lam < 1.0 {
        let next = (lam + dl).min(1.0);
        let scaled = problem
            .clone()
            .with_sources(next * problem.c_u, next * problem.c_v)?;
        match newton(&scaled, &inner, tol, Some(state.clone())) {
            Ok((pair, _)) => {
                state = (pair.u.into_values(), pair.v.into_values());
                lam = next;
                dl = (2.0 * dl).min(1.0);
            }
            Err(SystemError::MaxOuterExceeded { best, .. }) if dl < 1e-4 => {
                // Hand the best effort to the caller, which reports failure.
                return Ok((best.u.into_values(), best.v.into_values()));
            }
            Err(SystemError::MaxOuterExceeded { .. }) => dl /= 4.0,
            Err(e) => return Err(e),
        }
    }
    Ok(state)
}

/// Bilinear interpolation from a grid to its 2× refinement.
fn prolong(c: &[f64], coarse: &Grid, fine: &Grid) -> Vec<f64> {
    (0..fine.node_count())
        .map(|k| {
            let (i, j) = fine.ij(k);
            let is = [i / 2, i.div_ceil(2)];
            let js = [j / 2, j.div_ceil(2)];
            let mut s = 0.0;
            for a in is {
                for b in js {
                    s += c[coarse.index(a, b)];
                }
            }
            s / 4.0
        })
        .collect()
}

fn newton(
    problem: &ProblemSpec,
    opts: &SystemOptions,
    tol: f64,
    start: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<(SolutionPair, IterationHistory), SystemError> {
    let grid = *problem.grid();
    let map = InteriorMap::new(&grid);
    let mut hist = IterationHistory {
        method: SystemMethod::Newton,
        tolerance: tol,
        ..Default::default()
    };
    let (mut u, mut v) = match start.or_else(|| nested_start(problem, opts, tol)) {
        Some(start) => start,
        None => continuation_start(problem, opts, tol)?,
    };
    let clamp = opts.clamp.unwrap_or_else(|| auto_clamp(problem));
    if clamp {
        u.iter_mut().chain(v.iter_mut()).for_each(|x| *x = x.max(0.0));
    }
    // u enters G through c_v·u₊^q, v enters F through c_u·v₊ᵖ.
    let cu = Chart::new(problem.q, problem.c_v, grid.h());
    let cv = Chart::new(problem.p, problem.c_u, grid.h());
    let (mut ru, mut rv) = residual_vectors(problem, &u, &v, &map);
    let mut res = (sup(&ru), sup(&rv));
    hist.push(sup(&u), sup(&v), res, 1.0);

    let mut merits = vec![merit(&ru, &rv)];
    let symmetric = opts.symmetric_reduction && problem.is_symmetric();
    let n = map.len();
    let mut best = (res.0.max(res.1), u.clone(), v.clone());
    let mut last_gain = 1;

    let mut it = 1;
    while res.0.max(res.1) > tol && it < opts.max_outer {
        it += 1;
        let mut du_i = vec![0.0; n];
        let mut dv_i = vec![0.0; n];
        let lin = |c: Chart, t: &[f64]| -> (Vec<f64>, Vec<f64>) {
            map.nodes.iter().map(|&k| c.linearize(t[k])).unzip()
        };
        let (su, hu) = lin(cu, &u);
        let (sv, hv) = lin(cv, &v);
        if symmetric {
            let (mut a, _) = assemble(&problem.f, &grid, &u, &map, None);
            a.scale_columns(&su);
            let extra: Vec<f64> = hu.iter().map(|h| -problem.c_u * h).collect();
            a.add_diagonal(&extra);
            let b: Vec<f64> = ru.iter().map(|r| -r).collect();
            linalg::solve_scalar(&a, map.mx, map.my, &b, &mut du_i, 1e-10)?;
            dv_i.copy_from_slice(&du_i);
        } else {
            let (mut a_u, _) = assemble(&problem.f, &grid, &u, &map, None);
            let (mut a_v, _) = assemble(&problem.g, &grid, &v, &map, None);
            a_u.scale_columns(&su);
            a_v.scale_columns(&sv);
            let c_u: Vec<f64> = hv.iter().map(|h| problem.c_u * h).collect();
            let c_v: Vec<f64> = hu.iter().map(|h| problem.c_v * h).collect();
            let sys = CoupledSystem {
                a_u: &a_u,
                a_v: &a_v,
                c_u: &c_u,
                c_v: &c_v,
                mx: map.mx,
                my: map.my,
            };
            let b: Vec<f64> = ru.iter().chain(&rv).map(|r| -r).collect();
            let mut x = vec![0.0; 2 * n];
            linalg::solve_coupled(&sys, &b, &mut x, 1e-10)?;
            du_i.copy_from_slice(&x[..n]);
            dv_i.copy_from_slice(&x[n..]);
        }

        // Non-monotone Armijo backtracking on ½‖R‖₂², for which the Newton
        // direction is a descent direction; compare with the worst of the
        // last few iterates.
        let old = merits
            .iter()
            .rev()
            .take(NONMONOTONE)
            .fold(0.0_f64, |m, &x| m.max(x));
        let mut t = 1.0;
        let mut chosen: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
        loop {
            let mut tu = u.clone();
            let mut tv = v.clone();
            for (r, &k) in map.nodes.iter().enumerate() {
                tu[k] = cu.step(u[k], t * du_i[r]);
                tv[k] = cv.step(v[k], t * dv_i[r]);
                if clamp {
                    tu[k] = tu[k].max(SHRINK * u[k]);
                    tv[k] = tv[k].max(SHRINK * v[k]);
                }
            }
            let m = if tu.iter().chain(&tv).all(|x| x.is_finite()) {
                let (tru, trv) = residual_vectors(problem, &tu, &tv, &map);
                merit(&tru, &trv)
            } else {
                f64::INFINITY
            };
            if m.is_finite() && chosen.as_ref().is_none_or(|c| m < c.0) {
                chosen = Some((m, t, tu, tv));
            }
            if m <= (1.0 - 2e-4 * t) * old || (t / 2.0 < 1e-3 && chosen.is_some()) || t < 1e-16 {
                break;
            }
            t /= 2.0;
        }
        let Some((m, t, nu, nv)) = chosen else {
            return Err(SystemError::NonFiniteIterate { iteration: it });
        };
        merits.push(m);
        let du = nu.iter().zip(&u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let dv = nv.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        u = nu;
        v = nv;
        (ru, rv) = residual_vectors(problem, &u, &v, &map);
        res = (sup(&ru), sup(&rv));
        hist.push(du, dv, res, t);
        if res.0.max(res.1) < best.0 {
            if res.0.max(res.1) < 0.5 * best.0 {
                last_gain = it;
            }
            best = (res.0.max(res.1), u.clone(), v.clone());
        }
        // Rounding floor or a cycle: no real progress for a while.
        if it - last_gain >= STALL {
            break;
        }
    }
    let converged = res.0.max(res.1) <= tol;
    hist.converged = converged;
    if converged {
        let pair = SolutionPair::new(
            ScalarField::new(grid, u)?,
            ScalarField::new(grid, v)?,
            problem.p,
            problem.q,
        )?;
        return Ok((pair, hist));
    }
    let pair = SolutionPair::new(
        ScalarField::new(grid, best.1)?,
        ScalarField::new(grid, best.2)?,
        problem.p,
        problem.q,
    )?;
    Err(SystemError::MaxOuterExceeded {
        best: Box::new(pair),
        history: Box::new(hist),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quartic(x: &[f64]) -> f64 {
        (x[0].abs() - 0.3).max(0.0).powi(4) / 144.0
    }

    fn radial_problem(n: usize) -> ProblemSpec {
        let g = Grid::interval(-1.0, 1.0, n).unwrap();
        let bd = BoundaryData::from_fn(g, quartic).unwrap();
        ProblemSpec::new(
            OperatorSpec::laplacian(),
            OperatorSpec::laplacian(),
            0.5,
            0.5,
            bd.clone(),
            bd,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_exponents() {
        let g = Grid::interval(-1.0, 1.0, 5).unwrap();
        let bd = BoundaryData::zero(g);
        let lap = OperatorSpec::laplacian;
        for (p, q) in [(2.0, 0.5), (1.0, 1.0), (-0.1, 0.0), (f64::NAN, 0.0)] {
            assert!(matches!(
                ProblemSpec::new(lap(), lap(), p, q, bd.clone(), bd.clone()),
                Err(SystemError::ExponentOutOfRange { .. })
            ));
        }
        assert!(ProblemSpec::new(lap(), lap(), 0.99, 1.0, bd.clone(), bd).is_ok());
    }

    #[test]
    fn zero_power_conventions() {
        use ZeroPowerConvention::*;
        assert_eq!(positive_power(-1.0, 0.0, One), 1.0);
        assert_eq!(positive_power(-1.0, 0.0, Indicator), 0.0);
        assert_eq!(positive_power(0.0, 0.0, Indicator), 0.0);
        assert_eq!(positive_power(2.0, 0.0, Indicator), 1.0);
        assert_eq!(positive_power(4.0, 0.5, One), 2.0);
        assert_eq!(positive_power(-4.0, 0.5, One), 0.0);
    }

    #[test]
    fn chart_linearizes_fractional_powers() {
        assert_eq!(power_slope(4.0, 0.5), 0.25);
        assert_eq!(power_slope(0.0, 0.5), 0.0);
        assert_eq!(power_slope(-1.0, 0.5), 0.0);
        assert_eq!(power_slope(0.0, 1.0), 1.0);
        assert_eq!(power_slope(0.0, 2.0), 0.0);
        assert_eq!(power_slope(3.0, 0.0), 0.0);
        let c = Chart::new(0.5, 1.0, 0.1);
        assert!((c.thresh - 0.005 * 0.005).abs() < 1e-18);
        assert!(c.bends(0.0) && c.bends(-1e-6) && !c.bends(1e-3));
        assert_eq!(c.linearize(1e-3), (1.0, power_slope(1e-3, 0.5)));
        let (scale, slope) = c.linearize(1e-6);
        assert!((scale - 2e-3).abs() < 1e-15 && slope == 1.0);
        // A unit step in y from 0 lands on t = 1.
        assert_eq!(c.step(0.0, 1.0), 1.0);
        assert!((c.step(1e-6, -2e-3) + 1e-6).abs() < 1e-18);
        assert_eq!(c.step(0.5, 0.25), 0.75);
        assert_eq!(Chart::new(2.0, 1.0, 0.1).thresh, 0.0);
        assert_eq!(Chart::new(0.5, 0.0, 0.1).thresh, 0.0);
    }

    #[test]
    fn apply_t_zero_exponents_ignore_inputs() {
        let g = Grid::interval(-1.0, 1.0, 33).unwrap();
        let bd = BoundaryData::zero(g);
        let lap = OperatorSpec::laplacian;
        let pr = ProblemSpec::new(lap(), lap(), 0.0, 0.0, bd.clone(), bd).unwrap();
        let a = apply_T(&pr, &ScalarField::constant(g, 3.0), &ScalarField::constant(g, 0.1)).unwrap();
        let b = apply_T(&pr, &ScalarField::constant(g, 0.2), &ScalarField::constant(g, 9.0)).unwrap();
        assert_eq!(a, b);
        let exact = ScalarField::sample(g, |x| (x[0] * x[0] - 1.0) / 2.0).unwrap();
        assert!(a.u.max_diff(&exact) < 1e-13);
    }

    #[test]
    fn apply_t_zero_inputs_give_harmonic_extension() {
        let g = Grid::interval(-1.0, 1.0, 17).unwrap();
        let phi = BoundaryData::from_fn(g, |x| 1.0 + x[0]).unwrap();
        let psi = BoundaryData::constant(g, 2.0).unwrap();
        let lap = OperatorSpec::laplacian;
        let pr = ProblemSpec::new(lap(), lap(), 0.5, 0.25, phi, psi).unwrap();
        let z = ScalarField::zeros(g);
        let pair = apply_T(&pr, &z, &z).unwrap();
        assert!(pair.u.max_diff(&ScalarField::sample(g, |x| 1.0 + x[0]).unwrap()) < 1e-13);
        assert!(pair.v.max_diff(&ScalarField::constant(g, 2.0)) < 1e-13);
    }

    #[test]
    fn exact_pair_is_nearly_fixed() {
        let pr = radial_problem(257);
        let g = *pr.grid();
        let exact = ScalarField::sample(g, quartic).unwrap();
        let pair = apply_T(&pr, &exact, &exact).unwrap();
        let h = g.h();
        assert!(pair.u.max_diff(&exact) <= 10.0 * h * h);
        assert!(pair.v.max_diff(&exact) <= 10.0 * h * h);
    }

    #[test]
    fn degenerate_exponents_converge_immediately() {
        let g = Grid::interval(-1.0, 1.0, 129).unwrap();
        let bd = BoundaryData::zero(g);
        let lap = OperatorSpec::laplacian;
        let pr = ProblemSpec::new(lap(), lap(), 0.0, 0.0, bd.clone(), bd).unwrap();
        let exact = ScalarField::sample(g, |x| (x[0] * x[0] - 1.0) / 2.0).unwrap();
        for opts in [SystemOptions::default(), SystemOptions::picard(1.0)] {
            let (pair, hist) = fixed_point_solve(&pr, &opts).unwrap();
            assert!(hist.converged && hist.iterations() <= 2);
            assert!(pair.u.max_diff(&exact) <= 1e-12);
            assert!(pair.v.max_diff(&exact) <= 1e-12);
        }
    }

    #[test]
    fn trivial_data_gives_trivial_solution() {
        let g = Grid::square(-1.0, 1.0, 9).unwrap();
        let bd = BoundaryData::zero(g);
        let pr = ProblemSpec::new(
            OperatorSpec::pucci_minus(1.0, 2.0).unwrap(),
            OperatorSpec::laplacian(),
            0.5,
            0.25,
            bd.clone(),
            bd,
        )
        .unwrap();
        let (pair, hist) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
        assert_eq!(pair.u.sup_norm(), 0.0);
        assert_eq!(pair.v.sup_norm(), 0.0);
        assert_eq!(hist.final_residuals(), (0.0, 0.0));
        assert_eq!(system_residual(&pr, &pair), (0.0, 0.0));
    }

    #[test]
    fn newton_recovers_radial_solution() {
        let mut errs = Vec::new();
        for n in [129, 257] {
            let pr = radial_problem(n);
            let g = *pr.grid();
            let opts = SystemOptions {
                tol: Some(1e-12),
                ..Default::default()
            };
            let (pair, hist) = fixed_point_solve(&pr, &opts).unwrap();
            assert!(hist.converged);
            let exact = ScalarField::sample(g, quartic).unwrap();
            let err = pair.u.max_diff(&exact).max(pair.v.max_diff(&exact));
            assert!(err <= 10.0 * g.h() * g.h(), "{err}");
            errs.push(err);
            let (ru, rv) = system_residual(&pr, &pair);
            assert!(ru <= 1e-12 && rv <= 1e-12);
            // Bounded by the boundary data, nonnegative.
            assert!(pair.u.max() <= pr.phi().max() + 1e-8 && pair.u.min() >= 0.0);
            // Re-applying T barely moves a converged pair.
            let again = apply_T(&pr, &pair.v, &pair.u).unwrap();
            assert!(again.max_diff(&pair) <= 2.0 * 1e-12 / pr.f().lambda() * 10.0);
        }
        assert!((errs[0] / errs[1]).log2() >= 1.0);
    }

    #[test]
    fn coupled_and_symmetric_paths_agree() {
        let pr = radial_problem(65);
        let base = SystemOptions {
            tol: Some(1e-12),
            ..Default::default()
        };
        let (a, _) = fixed_point_solve(&pr, &base).unwrap();
        let full = SystemOptions {
            symmetric_reduction: false,
            ..base
        };
        let (b, _) = fixed_point_solve(&pr, &full).unwrap();
        assert!(a.max_diff(&b) < 1e-11);
    }

    #[test]
    fn asymmetric_pucci_system_2d() {
        let g = Grid::square(-1.0, 1.0, 17).unwrap();
        let phi = BoundaryData::from_fn(g, |x| 0.05 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let psi = BoundaryData::from_fn(g, |x| 0.02 * (1.0 + x[0])).unwrap();
        let pr = ProblemSpec::new(
            OperatorSpec::pucci_minus(1.0, 2.0).unwrap(),
            OperatorSpec::laplacian(),
            0.25,
            0.5,
            phi,
            psi,
        )
        .unwrap();
        let (pair, hist) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
        assert!(hist.converged);
        let (ru, rv) = system_residual(&pr, &pair);
        assert!(ru.max(rv) <= pr.default_tolerance());
        // Nonnegative right-hand sides: maxima sit on the boundary.
        assert!(pair.u.max() <= pr.phi().max() + 1e-12);
        assert!(pair.v.max() <= pr.psi().max() + 1e-12);
    }

    #[test]
    fn picard_reports_non_convergence() {
        let pr = radial_problem(33);
        let opts = SystemOptions {
            max_outer: 5,
            ..SystemOptions::picard(1.0)
        };
        match fixed_point_solve(&pr, &opts) {
            Err(e @ SystemError::MaxOuterExceeded { .. }) => {
                let (_, hist) = e.partial().unwrap();
                assert!(!hist.converged);
                assert_eq!(hist.iterations(), 5);
            }
            Ok((_, h)) => assert!(h.converged),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn newton_max_outer_one_fails() {
        let pr = radial_problem(33);
        let opts = SystemOptions {
            max_outer: 1,
            ..Default::default()
        };
        assert!(matches!(
            fixed_point_solve(&pr, &opts),
            Err(SystemError::MaxOuterExceeded { .. })
        ));
    }

    #[test]
    fn residual_detects_mismatch() {
        let g = Grid::interval(-1.0, 1.0, 21).unwrap();
        let u = ScalarField::sample(g, |x| (x[0] * x[0] - 1.0) / 2.0).unwrap();
        let v = ScalarField::sample(g, |x| 4.0 * x[0] * x[0]).unwrap();
        let pr = ProblemSpec::new(
            OperatorSpec::laplacian(),
            OperatorSpec::laplacian(),
            0.5,
            0.5,
            BoundaryData::from_field(&u),
            BoundaryData::from_field(&v),
        )
        .unwrap();
        let pair = SolutionPair::new(u, v.clone(), 0.5, 0.5).unwrap();
        let (ru, _) = system_residual(&pr, &pair);
        let expect = g
            .interior_nodes()
            .into_iter()
            .map(|k| (1.0 - v.get(k).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!((ru - expect).abs() < 1e-12 && ru > 0.0);
    }

    #[test]
    fn history_csv_header() {
        let pr = radial_problem(17);
        let (_, hist) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,du,dv,res_u,res_v\n1,"));
        assert_eq!(text.lines().count(), hist.iterations() + 1);
    }

    #[test]
    fn indicator_zero_power_recovers_obstacle_profile() {
        let exact = |x: &[f64]| 0.5 * (x[0].abs() - 0.3).max(0.0).powi(2);
        let g = Grid::interval(-1.0, 1.0, 257).unwrap();
        let bd = BoundaryData::from_fn(g, exact).unwrap();
        let lap = OperatorSpec::laplacian;
        let pr = ProblemSpec::new(lap(), lap(), 0.0, 0.0, bd.clone(), bd)
            .unwrap()
            .with_zero_power(ZeroPowerConvention::Indicator);
        let opts = SystemOptions::default();
        assert!(obstacle_form(&pr, &opts));
        let (pair, hist) = fixed_point_solve(&pr, &opts).unwrap();
        assert!(hist.converged);
        let err = (0..g.node_count())
            .map(|k| (pair.u.get(k) - exact(&g.coords(k))).abs())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-3, "{err}");
        assert!(pair.u.min() >= 0.0);
        let dead = (0..g.node_count()).filter(|&k| pair.u.get(k) == 0.0).count();
        assert!(dead > 60, "{dead}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn solutions_obey_maximum_principle(p in 0.05..1.0f64, q in 0.05..0.9f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            prop_assume!(p * q < 1.0);
            let g = Grid::interval(-1.0, 1.0, 33).unwrap();
            let phi = BoundaryData::from_fn(g, |x| if x[0] < 0.0 { a } else { b }).unwrap();
            let psi = BoundaryData::from_fn(g, |x| if x[0] < 0.0 { b } else { a }).unwrap();
            let pr = ProblemSpec::new(OperatorSpec::laplacian(), OperatorSpec::pucci_minus(1.0, 2.0).unwrap(), p, q, phi, psi).unwrap();
            let (pair, hist) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
            prop_assert!(hist.converged);
            let (ru, rv) = system_residual(&pr, &pair);
            prop_assert!(ru.max(rv) <= pr.default_tolerance());
            let scale = 1e-8 * (1.0 + a + b);
            prop_assert!(pair.u.max() <= pr.phi().max() + scale);
            prop_assert!(pair.v.max() <= pr.psi().max() + scale);
        }
    }
}
