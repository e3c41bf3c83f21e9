//! Discrete uniformly elliptic operators: Laplacian, Pucci extremal
//! operators and diagonal variable-coefficient operators.
//!
//! Every operator is evaluated through a [`Stencil`]: the linear five-point
//! (or three-point) combination selected at a node. For the Pucci operators
//! the stencil depends on the field (the extremal direction pair and
//! coefficients), and evaluating that stencil reproduces the nonlinear value
//! exactly, so the same object serves as both evaluation and Newton/policy
//! linearization.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error("ellipticity constants must satisfy 0 < lambda <= Lambda, got ({lambda}, {big_lambda})")]
    BadEllipticityConstants { lambda: f64, big_lambda: f64 },
    #[error("direction count {0} must be a positive multiple of 4")]
    BadDirectionCount(usize),
    #[error("node {0} lies on the boundary")]
    BoundaryNode(usize),
    #[error("direction {dir:?} leaves the grid at node {node}")]
    StencilOutOfRange { node: usize, dir: (isize, isize) },
    #[error("coefficient a_{axis} = {value} at node {node} is outside [lambda, Lambda]")]
    CoefficientOutOfRange { node: usize, axis: usize, value: f64 },
    #[error("operator coefficients were sampled on a different grid")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Laplacian,
    PucciMinus,
    PucciPlus,
    DiagonalCoeff,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorKind::Laplacian => "laplacian",
            OperatorKind::PucciMinus => "pucci_minus",
            OperatorKind::PucciPlus => "pucci_plus",
            OperatorKind::DiagonalCoeff => "diagonal_coeff",
        };
        f.write_str(s)
    }
}

/// Per-node, per-axis coefficients of a diagonal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCoefficients {
    grid: Grid,
    a: Vec<[f64; 2]>,
}

impl DiagonalCoefficients {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, node: usize) -> [f64; 2] {
        self.a[node]
    }
}

/// A uniformly elliptic operator with constants `0 < λ ≤ Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    kind: OperatorKind,
    lambda: f64,
    big_lambda: f64,
    directions: usize,
    coeffs: Option<Arc<DiagonalCoefficients>>,
}

pub const DEFAULT_DIRECTIONS: usize = 8;

fn check_constants(lambda: f64, big_lambda: f64) -> Result<(), OpError> {
    if lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite() {
        Ok(())
    } else {
        Err(OpError::BadEllipticityConstants { lambda, big_lambda })
    }
}

impl OperatorSpec {
    pub fn laplacian() -> Self {
        OperatorSpec {
            kind: OperatorKind::Laplacian,
            lambda: 1.0,
            big_lambda: 1.0,
            directions: 4,
            coeffs: None,
        }
    }

    pub fn pucci_minus(lambda: f64, big_lambda: f64) -> Result<Self, OpError> {
        check_constants(lambda, big_lambda)?;
        Ok(OperatorSpec {
            kind: OperatorKind::PucciMinus,
            lambda,
            big_lambda,
            directions: DEFAULT_DIRECTIONS,
            coeffs: None,
        })
    }

    pub fn pucci_plus(lambda: f64, big_lambda: f64) -> Result<Self, OpError> {
        Ok(OperatorSpec {
            kind: OperatorKind::PucciPlus,
            ..Self::pucci_minus(lambda, big_lambda)?
        })
    }

    /// Diagonal operator Σᵢ aᵢ(x) ∂ᵢᵢ with coefficients sampled at the nodes
    /// of `grid`; `a(x, axis)` must lie in `[λ, Λ]` everywhere.
    pub fn diagonal(
        grid: Grid,
        lambda: f64,
        big_lambda: f64,
        a: impl Fn(&[f64], usize) -> f64,
    ) -> Result<Self, OpError> {
        check_constants(lambda, big_lambda)?;
        let mut vals = Vec::with_capacity(grid.node_count());
        for node in 0..grid.node_count() {
            let x = grid.coords(node);
            let mut c = [lambda; 2];
            for (axis, slot) in c.iter_mut().enumerate().take(grid.dim()) {
                let value = a(&x[..grid.dim()], axis);
                if !(value >= lambda && value <= big_lambda) {
                    return Err(OpError::CoefficientOutOfRange { node, axis, value });
                }
                *slot = value;
            }
            vals.push(c);
        }
        Ok(OperatorSpec {
            kind: OperatorKind::DiagonalCoeff,
            lambda,
            big_lambda,
            directions: 4,
            coeffs: Some(Arc::new(DiagonalCoefficients { grid, a: vals })),
        })
    }

    /// The same operator on a grid whose nodes are every `stride`-th node of
    /// the coefficient grid (coefficients are subsampled).
    pub(crate) fn restricted(&self, coarse: &Grid, stride: usize) -> OperatorSpec {
        let coeffs = self.coeffs.as_ref().map(|c| {
            let a = (0..coarse.node_count())
                .map(|k| {
                    let (i, j) = coarse.ij(k);
                    c.a[c.grid.index(i * stride, j * stride)]
                })
                .collect();
            Arc::new(DiagonalCoefficients { grid: *coarse, a })
        });
        OperatorSpec {
            coeffs,
            ..self.clone()
        }
    }

    /// Set the wide-stencil direction count for 2D Pucci operators.
    pub fn with_directions(mut self, k: usize) -> Result<Self, OpError> {
        if k == 0 || !k.is_multiple_of(4) {
            return Err(OpError::BadDirectionCount(k));
        }
        self.directions = k;
        Ok(self)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    pub fn directions(&self) -> usize {
        self.directions
    }

    pub fn coefficients(&self) -> Option<&DiagonalCoefficients> {
        self.coeffs.as_deref()
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::Laplacian | OperatorKind::DiagonalCoeff
        )
    }

    /// Coefficients valid on `grid`?
    pub fn check_grid(&self, grid: &Grid) -> Result<(), OpError> {
        match &self.coeffs {
            Some(c) if c.grid != *grid => Err(OpError::GridMismatch),
            _ => Ok(()),
        }
    }

    /// Pointwise matrix form F(M) (at `node` for x-dependent operators).
    pub fn evaluate_matrix(&self, m: &HessianSample, node: usize) -> f64 {
        match self.kind {
            OperatorKind::Laplacian => m.trace(),
            OperatorKind::PucciMinus => {
                pucci_minus_unchecked(&m.eigenvalues(), self.lambda, self.big_lambda)
            }
            OperatorKind::PucciPlus => {
                pucci_plus_unchecked(&m.eigenvalues(), self.lambda, self.big_lambda)
            }
            OperatorKind::DiagonalCoeff => {
                let a = self.coeffs.as_ref().map_or([self.lambda; 2], |c| c.a[node]);
                let mut s = a[0] * m.a11;
                if m.n == 2 {
                    s += a[1] * m.a22;
                }
                s
            }
        }
    }

    /// Stencil at an interior node, with the Pucci policy chosen from
    /// `values`. No range checks; see [`apply_operator`] for the checked path.
    pub fn stencil(&self, grid: &Grid, values: &[f64], node: usize) -> Stencil {
        let h2 = grid.h() * grid.h();
        match self.kind {
            OperatorKind::Laplacian => {
                let mut s = Stencil::default();
                for axis in 0..grid.dim() {
                    s.add_direction(grid, node, axis_dir(axis), 1.0 / h2);
                }
                s
            }
            OperatorKind::DiagonalCoeff => {
                let a = self.coeffs.as_ref().map_or([self.lambda; 2], |c| c.a[node]);
                let mut s = Stencil::default();
                for (axis, coef) in a.iter().enumerate().take(grid.dim()) {
                    s.add_direction(grid, node, axis_dir(axis), coef / h2);
                }
                s
            }
            OperatorKind::PucciMinus | OperatorKind::PucciPlus => {
                let minus = self.kind == OperatorKind::PucciMinus;
                if grid.dim() == 1 {
                    let d = second_difference(grid, values, node, (1, 0));
                    let a = self.pucci_weight(d, minus);
                    let mut s = Stencil::default();
                    s.add_direction(grid, node, (1, 0), a / h2);
                    return s;
                }
                let mut best: Option<(f64, Stencil)> = None;
                for pair in direction_pairs(self.directions) {
                    if !pair.iter().all(|&e| fits(grid, node, e)) {
                        continue;
                    }
                    let mut s = Stencil::default();
                    let mut val = 0.0;
                    for &e in pair.iter() {
                        let d = second_difference(grid, values, node, e);
                        let a = self.pucci_weight(d, minus);
                        val += a * d;
                        let len2 = (e.0 * e.0 + e.1 * e.1) as f64;
                        s.add_direction(grid, node, e, a / (len2 * h2));
                    }
                    let better = match &best {
                        None => true,
                        Some((b, _)) => {
                            if minus {
                                val < *b
                            } else {
                                val > *b
                            }
                        }
                    };
                    if better {
                        best = Some((val, s));
                    }
                }
                best.map(|(_, s)| s).unwrap_or_default()
            }
        }
    }

    fn pucci_weight(&self, d: f64, minus: bool) -> f64 {
        let (pos, neg) = if minus {
            (self.lambda, self.big_lambda)
        } else {
            (self.big_lambda, self.lambda)
        };
        if d > 0.0 {
            pos
        } else {
            neg
        }
    }

    /// Operator applied at every interior node; boundary entries are 0.
    pub fn apply_all(&self, grid: &Grid, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for node in 0..grid.node_count() {
            if !grid.is_boundary(node) {
                out[node] = self.stencil(grid, values, node).apply(values);
            }
        }
        out
    }
}

fn axis_dir(axis: usize) -> (isize, isize) {
    if axis == 0 {
        (1, 0)
    } else {
        (0, 1)
    }
}

fn fits(grid: &Grid, node: usize, e: (isize, isize)) -> bool {
    grid.offset(node, e.0, e.1).is_some() && grid.offset(node, -e.0, -e.1).is_some()
}

/// Raw second difference u(x+e h) − 2u(x) + u(x−e h), divided by |e|²h².
fn second_difference(grid: &Grid, values: &[f64], node: usize, e: (isize, isize)) -> f64 {
    let p = grid.offset(node, e.0, e.1).expect("stencil checked");
    let m = grid.offset(node, -e.0, -e.1).expect("stencil checked");
    let len2 = (e.0 * e.0 + e.1 * e.1) as f64;
    ((values[p] + values[m]) - 2.0 * values[node]) / (len2 * grid.h() * grid.h())
}

/// Checked directional second difference along the lattice vector `e`.
pub fn directional_second_difference(
    field: &ScalarField,
    node: usize,
    e: (isize, isize),
) -> Result<f64, OpError> {
    let grid = field.grid();
    if grid.is_boundary(node) {
        return Err(OpError::BoundaryNode(node));
    }
    if !fits(grid, node, e) {
        return Err(OpError::StencilOutOfRange { node, dir: e });
    }
    Ok(second_difference(grid, field.values(), node, e))
}

/// Orthogonal lattice direction pairs used by a K-direction wide stencil.
/// K = 4 gives the axes, K = 8 adds the diagonals, then (2,1), (1,2),
/// (3,1), ... by increasing length.
pub fn direction_pairs(k: usize) -> Vec<[(isize, isize); 2]> {
    let want = (k / 4).max(1);
    let mut prims: Vec<(isize, isize)> = Vec::new();
    let mut r = 1;
    while prims.len() < want {
        let mut shell: Vec<(isize, isize)> = Vec::new();
        for a in 1..=r {
            for b in 0..=r {
                if a.max(b) == r && gcd(a, b) == 1 {
                    shell.push((a, b));
                }
            }
        }
        shell.sort_by_key(|&(a, b)| (a * a + b * b, -a));
        prims.extend(shell);
        r += 1;
    }
    prims.sort_by_key(|&(a, b)| (a * a + b * b, -a));
    prims
        .into_iter()
        .take(want)
        .map(|(a, b)| [(a, b), (-b, a)])
        .collect()
}

fn gcd(a: isize, b: isize) -> isize {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// A linear combination `center·u[node] + Σ coef·u[nbr]` at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stencil {
    pub node: usize,
    pub center: f64,
    nbrs: [(usize, f64); 4],
    len: usize,
}

impl Stencil {
    fn add_direction(&mut self, grid: &Grid, node: usize, e: (isize, isize), w: f64) {
        self.node = node;
        let p = grid.offset(node, e.0, e.1).expect("stencil checked");
        let m = grid.offset(node, -e.0, -e.1).expect("stencil checked");
        self.center -= 2.0 * w;
        self.nbrs[self.len] = (p, w);
        self.nbrs[self.len + 1] = (m, w);
        self.len += 2;
    }

    pub fn neighbors(&self) -> &[(usize, f64)] {
        &self.nbrs[..self.len]
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(j, c) in self.neighbors() {
            s += c * values[j];
        }
        s + self.center * values[self.node]
    }
}

/// Discrete F(D²u) at an interior node.
pub fn apply_operator(op: &OperatorSpec, field: &ScalarField, node: usize) -> Result<f64, OpError> {
    let grid = field.grid();
    op.check_grid(grid)?;
    if grid.is_boundary(node) {
        return Err(OpError::BoundaryNode(node));
    }
    Ok(op.stencil(grid, field.values(), node).apply(field.values()))
}

/// λ·Σ(positive eigenvalues) + Λ·Σ(negative eigenvalues).
pub fn pucci_minus_value(eig: &[f64], lambda: f64, big_lambda: f64) -> Result<f64, OpError> {
    check_constants(lambda, big_lambda)?;
    Ok(pucci_minus_unchecked(eig, lambda, big_lambda))
}

/// Λ·Σ(positive eigenvalues) + λ·Σ(negative eigenvalues).
pub fn pucci_plus_value(eig: &[f64], lambda: f64, big_lambda: f64) -> Result<f64, OpError> {
    check_constants(lambda, big_lambda)?;
    Ok(pucci_plus_unchecked(eig, lambda, big_lambda))
}

fn pucci_minus_unchecked(eig: &[f64], lambda: f64, big_lambda: f64) -> f64 {
    let (pos, neg) = split_sums(eig);
    lambda * pos + big_lambda * neg
}

fn pucci_plus_unchecked(eig: &[f64], lambda: f64, big_lambda: f64) -> f64 {
    let (pos, neg) = split_sums(eig);
    big_lambda * pos + lambda * neg
}

fn split_sums(eig: &[f64]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &e in eig {
        if e > 0.0 {
            pos += e;
        } else {
            neg += e;
        }
    }
    (pos, neg)
}

/// Symmetric 1×1 or 2×2 matrix stored by its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianSample {
    pub n: usize,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl HessianSample {
    pub fn one(a: f64) -> Self {
        HessianSample {
            n: 1,
            a11: a,
            a12: 0.0,
            a22: 0.0,
        }
    }

    pub fn two(a11: f64, a12: f64, a22: f64) -> Self {
        HessianSample {
            n: 2,
            a11,
            a12,
            a22,
        }
    }

    pub fn trace(&self) -> f64 {
        if self.n == 1 {
            self.a11
        } else {
            self.a11 + self.a22
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.a11];
        }
        let mean = 0.5 * (self.a11 + self.a22);
        let half = 0.5 * (self.a11 - self.a22);
        let rad = half.hypot(self.a12);
        vec![mean - rad, mean + rad]
    }

    pub fn add(&self, o: &HessianSample) -> HessianSample {
        HessianSample {
            n: self.n,
            a11: self.a11 + o.a11,
            a12: self.a12 + o.a12,
            a22: self.a22 + o.a22,
        }
    }

    pub fn scale(&self, t: f64) -> HessianSample {
        HessianSample {
            n: self.n,
            a11: t * self.a11,
            a12: t * self.a12,
            a22: t * self.a22,
        }
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |m, e| m.max(e.abs()))
    }
}

/// Outcome of [`check_ellipticity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub kind: OperatorKind,
    pub dimension: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub samples: usize,
    pub seed: u64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub passes: bool,
}

/// Random symmetric M (entries uniform in [−1, 1]) for property sweeps.
pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> HessianSample {
    if n == 1 {
        HessianSample::one(rng.random_range(-1.0..=1.0))
    } else {
        HessianSample::two(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        )
    }
}

/// Random positive semidefinite N = BBᵀ; every fourth draw is rank one.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> HessianSample {
    if n == 1 {
        let b: f64 = rng.random_range(-1.0..=1.0);
        return HessianSample::one(b * b);
    }
    let rank_one = rng.random_range(0..4) == 0;
    let b: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
    if rank_one {
        HessianSample::two(b[0] * b[0], b[0] * b[1], b[1] * b[1])
    } else {
        HessianSample::two(
            b[0] * b[0] + b[1] * b[1],
            b[0] * b[2] + b[1] * b[3],
            b[2] * b[2] + b[3] * b[3],
        )
    }
}

/// Sample the difference quotients (F(M+N) − F(M))/‖N‖ with a ChaCha8
/// generator seeded by `seed`. The pass band is `[λ, nΛ]` with a 1e−9
/// relative slack: with the spectral norm, even the Laplacian reaches
/// `trace(N) = n‖N‖`.
pub fn check_ellipticity(
    op: &OperatorSpec,
    dimension: usize,
    samples: usize,
    seed: u64,
) -> EllipticityReport {
    let n = op.coeffs.as_ref().map_or(dimension, |c| c.grid.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = op
        .coeffs
        .as_ref()
        .map(|c| c.grid.interior_nodes())
        .unwrap_or_default();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut used = 0;
    for _ in 0..samples.max(1) {
        let m = random_symmetric(&mut rng, n).scale(rng.random_range(0.0..10.0));
        let nn = random_psd(&mut rng, n).scale(rng.random_range(0.0..10.0));
        let node = if interior.is_empty() {
            0
        } else {
            interior[rng.random_range(0..interior.len())]
        };
        let norm = nn.norm();
        // Tiny N relative to M only measures rounding.
        if norm <= 1e-6 * (1.0 + m.norm()) {
            continue;
        }
        let q = (op.evaluate_matrix(&m.add(&nn), node) - op.evaluate_matrix(&m, node)) / norm;
        lo = lo.min(q);
        hi = hi.max(q);
        used += 1;
    }
    let lower_bound = op.lambda * (1.0 - 1e-9);
    let upper_bound = n as f64 * op.big_lambda * (1.0 + 1e-9);
    EllipticityReport {
        kind: op.kind,
        dimension: n,
        lambda: op.lambda,
        big_lambda: op.big_lambda,
        min_quotient: lo,
        max_quotient: hi,
        samples: used,
        seed,
        lower_bound,
        upper_bound,
        passes: used > 0 && lo >= lower_bound && hi <= upper_bound,
    }
}

/// Failure counts of the operator property suites.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PropertySuiteReport {
    pub samples: usize,
    pub duality_failures: usize,
    pub homogeneity_failures: usize,
    pub ordering_failures: usize,
    pub monotonicity_failures: usize,
}

impl PropertySuiteReport {
    pub fn passed(&self) -> bool {
        self.duality_failures == 0
            && self.homogeneity_failures == 0
            && self.ordering_failures == 0
            && self.monotonicity_failures == 0
    }
}

/// Run the eigenvalue-level identities (duality, homogeneity, ordering) and
/// the scheme monotonicity check of `op` on `grid`, `samples` draws each.
pub fn property_suites(
    op: &OperatorSpec,
    grid: &Grid,
    samples: usize,
    seed: u64,
) -> PropertySuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lambda, big) = (op.lambda, op.big_lambda);
    let mut rep = PropertySuiteReport {
        samples,
        ..Default::default()
    };
    let interior = grid.interior_nodes();
    let mut field: Vec<f64> = vec![0.0; grid.node_count()];
    for _ in 0..samples {
        let n = rng.random_range(1..=3);
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let neg: Vec<f64> = e.iter().map(|x| -x).collect();
        let mm = pucci_minus_unchecked(&e, lambda, big);
        let mp = pucci_plus_unchecked(&e, lambda, big);
        if mp != -pucci_minus_unchecked(&neg, lambda, big) {
            rep.duality_failures += 1;
        }
        if mm > mp {
            rep.ordering_failures += 1;
        }
        let t: f64 = rng.random_range(0.0..5.0);
        let te: Vec<f64> = e.iter().map(|x| t * x).collect();
        let lhs = pucci_minus_unchecked(&te, lambda, big);
        if (lhs - t * mm).abs() > 1e-12 * (1.0 + (t * mm).abs()) {
            rep.homogeneity_failures += 1;
        }

        // Scheme monotonicity on a random field.
        for v in field.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let node = interior[rng.random_range(0..interior.len())];
        let base = op.stencil(grid, &field, node).apply(&field);
        let bump: f64 = rng.random_range(0.0..0.5);
        let nbrs = all_wide_neighbors(grid, node, op);
        let target = nbrs[rng.random_range(0..nbrs.len())];
        let old = field[target];
        field[target] += bump;
        let up = op.stencil(grid, &field, node).apply(&field);
        field[target] = old;
        field[node] -= bump;
        let down = op.stencil(grid, &field, node).apply(&field);
        if up < base || down < base {
            rep.monotonicity_failures += 1;
        }
    }
    rep
}

fn all_wide_neighbors(grid: &Grid, node: usize, op: &OperatorSpec) -> Vec<usize> {
    let pairs = if grid.dim() == 1 {
        vec![[(1, 0), (1, 0)]]
    } else if op.is_linear() {
        direction_pairs(4)
    } else {
        direction_pairs(op.directions)
    };
    let mut out = Vec::new();
    for pair in pairs {
        for e in pair {
            for s in [1, -1] {
                if let Some(k) = grid.offset(node, s * e.0, s * e.1) {
                    if !out.contains(&k) {
                        out.push(k);
                    }
                }
            }
        }
    }
    out
}
