//! Closed-form radial pairs `(A(|x−c|−ρ)₊^α, B(|x−c|−ρ)₊^β)` and their
//! exponents and constants.

use thiserror::Error;

use crate::grid::{BoundaryData, Grid, GridError, ScalarField};
use crate::ops::{OperatorKind, OperatorSpec};
use crate::system::{SolutionPair, ZeroPowerConvention};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("exponents p={p}, q={q} need p, q >= 0 and pq < 1")]
    ExponentOutOfRange { p: f64, q: f64 },
    #[error("dimension must be at least 1, got {0}")]
    BadDimension(usize),
    #[error("ellipticity constant must be positive and finite, got {0}")]
    BadEllipticity(f64),
    #[error("dead-core radius must be nonnegative and finite, got {0}")]
    BadRadius(f64),
    #[error("barrier constants for p={p}, q={q} are outside the floating-point range")]
    Unrepresentable { p: f64, q: f64 },
    #[error("barrier lives in dimension {barrier}, grid in dimension {grid}")]
    DimensionMismatch { barrier: usize, grid: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn check(p: f64, q: f64) -> Result<(), RadialError> {
    if p.is_finite() && q.is_finite() && p >= 0.0 && q >= 0.0 && p * q < 1.0 {
        Ok(())
    } else {
        Err(RadialError::ExponentOutOfRange { p, q })
    }
}

/// `(α, β, γ) = (2(1+p), 2(1+q), 2) / (1−pq)`.
pub fn exponents(p: f64, q: f64) -> Result<(f64, f64, f64), RadialError> {
    check(p, q)?;
    let d = 1.0 - p * q;
    Ok((2.0 * (1.0 + p) / d, 2.0 * (1.0 + q) / d, 2.0 / d))
}

/// Constants solving `E·A·α(α+n−2) = Bᵖ` and `E·B·β(β+n−2) = A^q`.
pub fn barrier_constants(p: f64, q: f64, n: usize, e: f64) -> Result<(f64, f64), RadialError> {
    let (alpha, beta, _) = exponents(p, q)?;
    if n == 0 {
        return Err(RadialError::BadDimension(n));
    }
    if !(e > 0.0 && e.is_finite()) {
        return Err(RadialError::BadEllipticity(e));
    }
    let nf = n as f64;
    let la = (alpha * (alpha + nf - 2.0)).ln();
    let lb = (beta * (beta + nf - 2.0)).ln();
    let le = e.ln();
    // Logs avoid overflow of the intermediate powers for pq close to 1.
    let d = p * q - 1.0;
    let ln_a = ((p + 1.0) * le + la + p * lb) / d;
    let ln_b = ((q + 1.0) * le + lb + q * la) / d;
    let (a, b) = (ln_a.exp(), ln_b.exp());
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok((a, b))
    } else {
        Err(RadialError::Unrepresentable { p, q })
    }
}

/// How a radial pair relates to the system for a given operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierClass {
    Exact,
    SuperOnly,
    SubOnly,
    Unordered,
}

impl BarrierClass {
    pub fn is_exact(self) -> bool {
        self == BarrierClass::Exact
    }

    pub fn reason(self) -> &'static str {
        match self {
            BarrierClass::Exact => "exact solution",
            BarrierClass::SuperOnly => "super-solution only",
            BarrierClass::SubOnly => "sub-solution only",
            BarrierClass::Unordered => "neither sub- nor super-solution",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialBarrier {
    p: f64,
    q: f64,
    n: usize,
    e: f64,
    rho: f64,
    center: [f64; 2],
    alpha: f64,
    beta: f64,
    gamma: f64,
    a: f64,
    b: f64,
}

impl RadialBarrier {
    pub fn new(p: f64, q: f64, n: usize, e: f64, rho: f64, center: &[f64]) -> Result<Self, RadialError> {
        let (alpha, beta, gamma) = exponents(p, q)?;
        let (a, b) = barrier_constants(p, q, n, e)?;
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(RadialError::BadRadius(rho));
        }
        let mut c = [0.0; 2];
        for (dst, src) in c.iter_mut().zip(center) {
            *dst = *src;
        }
        Ok(RadialBarrier {
            p,
            q,
            n,
            e,
            rho,
            center: c,
            alpha,
            beta,
            gamma,
            a,
            b,
        })
    }

    /// Barrier at the origin with `E = 1`.
    pub fn centered(p: f64, q: f64, n: usize, rho: f64) -> Result<Self, RadialError> {
        Self::new(p, q, n, 1.0, rho, &[0.0, 0.0])
    }

    /// Super-solution barrier for `op`: `E = Λ`.
    pub fn super_for(op: &OperatorSpec, p: f64, q: f64, n: usize, rho: f64, center: &[f64]) -> Result<Self, RadialError> {
        Self::new(p, q, n, op.big_lambda(), rho, center)
    }

    /// Sub-solution barrier for `op`: `E = λ`.
    pub fn sub_for(op: &OperatorSpec, p: f64, q: f64, n: usize, rho: f64, center: &[f64]) -> Result<Self, RadialError> {
        Self::new(p, q, n, op.lambda(), rho, center)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn ellipticity(&self) -> f64 {
        self.e
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn center(&self) -> &[f64] {
        &self.center[..self.n.min(2)]
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// `(A, B)`.
    pub fn constants(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `|x − center|` over the first `min(n, 2)` coordinates.
    pub fn radius(&self, x: &[f64]) -> f64 {
        self.center()
            .iter()
            .zip(x)
            .map(|(c, xi)| (xi - c).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from `x` to the sphere `|x − center| = ρ`.
    pub fn distance_to_kink(&self, x: &[f64]) -> f64 {
        (self.radius(x) - self.rho).abs()
    }

    fn excess(&self, x: &[f64]) -> f64 {
        (self.radius(x) - self.rho).max(0.0)
    }

    pub fn u_at(&self, x: &[f64]) -> f64 {
        self.a * self.excess(x).powf(self.alpha)
    }

    pub fn v_at(&self, x: &[f64]) -> f64 {
        self.b * self.excess(x).powf(self.beta)
    }

    /// `A^{1/(1+p)} + B^{1/(1+q)}`, the magnitude per unit `(r−ρ)^γ`.
    pub fn magnitude_coefficient(&self) -> f64 {
        self.a.powf(1.0 / (1.0 + self.p)) + self.b.powf(1.0 / (1.0 + self.q))
    }

    /// `min{A^{1/(1+p)}, B^{1/(1+q)}}`.
    pub fn liouville_threshold(&self) -> f64 {
        self.a
            .powf(1.0 / (1.0 + self.p))
            .min(self.b.powf(1.0 / (1.0 + self.q)))
    }

    pub fn magnitude_at(&self, x: &[f64]) -> f64 {
        self.magnitude_coefficient() * self.excess(x).powf(self.gamma)
    }

    fn check_grid(&self, grid: &Grid) -> Result<(), RadialError> {
        if grid.dim() != self.n {
            return Err(RadialError::DimensionMismatch {
                barrier: self.n,
                grid: grid.dim(),
            });
        }
        Ok(())
    }

    /// Both fields sampled at every node.
    pub fn pair(&self, grid: &Grid) -> Result<SolutionPair, RadialError> {
        self.check_grid(grid)?;
        let u = ScalarField::sample(*grid, |x| self.u_at(x))?;
        let v = ScalarField::sample(*grid, |x| self.v_at(x))?;
        Ok(SolutionPair::new(u, v, self.p, self.q).expect("exponents already validated"))
    }

    /// Boundary traces `(φ, ψ)` of the pair.
    pub fn boundary_data(&self, grid: &Grid) -> Result<(BoundaryData, BoundaryData), RadialError> {
        self.check_grid(grid)?;
        Ok((
            BoundaryData::from_fn(*grid, |x| self.u_at(x))?,
            BoundaryData::from_fn(*grid, |x| self.v_at(x))?,
        ))
    }

    /// Classify the pair against `F(D²u) = v₊ᵖ`, `F(D²v) = u₊^q` with `F = op`.
    ///
    /// The Hessians are positive semidefinite, so `λ·tr ≤ F ≤ Λ·tr`, and the
    /// trace is at most `α(α+n−2)A(r−ρ)^{α−2}` with equality iff `n = 1` or
    /// `ρ = 0`.
    pub fn classify(&self, op: &OperatorSpec) -> BarrierClass {
        self.classify_with(op, ZeroPowerConvention::One)
    }

    /// As [`classify`](Self::classify) under an explicit zero-power convention.
    /// With `p = 0` or `q = 0` the right-hand side jumps where the other
    /// component vanishes, which breaks exactness on the dead set.
    pub fn classify_with(&self, op: &OperatorSpec, conv: ZeroPowerConvention) -> BarrierClass {
        let base = self.classify_smooth(op);
        if self.p != 0.0 && self.q != 0.0 {
            return base;
        }
        let defect = match conv {
            // F = 0 < 1 on the dead ball.
            ZeroPowerConvention::One if self.rho > 0.0 => BarrierClass::SuperOnly,
            // F > 0 = rhs at the centre.
            ZeroPowerConvention::Indicator if self.rho == 0.0 => BarrierClass::SubOnly,
            _ => return base,
        };
        match base {
            BarrierClass::Exact => defect,
            c if c == defect => c,
            _ => BarrierClass::Unordered,
        }
    }

    fn classify_smooth(&self, op: &OperatorSpec) -> BarrierClass {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        let flat = self.n == 1 || self.rho == 0.0;
        // Operators that act on PSD Hessians as a fixed multiple of the trace.
        let trace_multiple = match op.kind() {
            OperatorKind::Laplacian => Some(1.0),
            OperatorKind::PucciMinus => Some(op.lambda()),
            OperatorKind::PucciPlus => Some(op.big_lambda()),
            _ => None,
        };
        if flat && trace_multiple.is_some_and(|c| close(c, self.e)) {
            return BarrierClass::Exact;
        }
        let big = op.big_lambda();
        let small = op.lambda();
        if self.e >= big || close(self.e, big) {
            BarrierClass::SuperOnly
        } else if flat && (self.e <= small || close(self.e, small)) {
            BarrierClass::SubOnly
        } else {
            BarrierClass::Unordered
        }
    }
}

/// Operation-name wrapper for [`RadialBarrier::pair`].
pub fn radial_pair(barrier: &RadialBarrier, grid: &Grid) -> Result<SolutionPair, RadialError> {
    barrier.pair(grid)
}

/// `(exact?, reason)` for the barrier against `op`.
pub fn is_exact_solution(barrier: &RadialBarrier, op: &OperatorSpec) -> (bool, &'static str) {
    let c = barrier.classify(op);
    (c.is_exact(), c.reason())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{signed_residuals, system_residual, ProblemSpec};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(exponents(0.0, 0.0).unwrap(), (2.0, 2.0, 2.0));
        let (a, b, g) = exponents(0.5, 0.5).unwrap();
        assert!((a - 4.0).abs() < 1e-15 && (b - 4.0).abs() < 1e-15 && (g - 8.0 / 3.0).abs() < 1e-15);
        let (a, b, g) = exponents(1.0 / 3.0, 0.25).unwrap();
        assert!(rel(a, 32.0 / 11.0) < 1e-15);
        assert!(rel(b, 30.0 / 11.0) < 1e-15);
        assert!(rel(g, 24.0 / 11.0) < 1e-15);
        assert!(rel(a - 2.0, b / 3.0) < 1e-14);
        assert!(matches!(exponents(2.0, 0.5), Err(RadialError::ExponentOutOfRange { .. })));
        assert!(exponents(-0.1, 0.0).is_err());
    }

    #[test]
    fn constant_examples() {
        let (a, b) = barrier_constants(0.5, 0.5, 1, 1.0).unwrap();
        assert!(rel(a, 1.0 / 144.0) < 1e-14 && rel(b, 1.0 / 144.0) < 1e-14);
        let (a, b) = barrier_constants(0.5, 0.5, 2, 1.0).unwrap();
        assert!(rel(a, 1.0 / 256.0) < 1e-14 && rel(b, a) < 1e-14);
        let (a, _) = barrier_constants(0.5, 0.5, 1, 2.0).unwrap();
        assert!(rel(a, 1.0 / 576.0) < 1e-14);
        assert!(rel(2.0 * a * 12.0, a.sqrt()) < 1e-14);
        assert!(barrier_constants(0.5, 0.5, 0, 1.0).is_err());
        assert!(barrier_constants(0.5, 0.5, 1, 0.0).is_err());
    }

    #[test]
    fn pair_examples() {
        let g = Grid::interval(-1.0, 1.0, 9).unwrap();
        let b0 = RadialBarrier::centered(0.5, 0.5, 1, 0.0).unwrap();
        assert!(rel(b0.u_at(&[0.5]), 0.5f64.powi(4) / 144.0) < 1e-14);
        let b = RadialBarrier::centered(0.5, 0.5, 1, 0.3).unwrap();
        assert_eq!(b.u_at(&[0.2]), 0.0);
        assert!(rel(b.u_at(&[-1.0]), 0.7f64.powi(4) / 144.0) < 1e-14);
        let pair = b.pair(&g).unwrap();
        assert!(rel(pair.u.get(0), 0.001_667_361_111_111_111) < 1e-12);
        let g2 = Grid::square(-1.0, 1.0, 5).unwrap();
        assert!(matches!(b.pair(&g2), Err(RadialError::DimensionMismatch { .. })));
    }

    #[test]
    fn classification_examples() {
        let lap = OperatorSpec::laplacian();
        let b = RadialBarrier::centered(0.5, 0.5, 1, 0.3).unwrap();
        assert_eq!(is_exact_solution(&b, &lap), (true, "exact solution"));
        let b = RadialBarrier::centered(0.5, 0.5, 2, 0.0).unwrap();
        assert!(is_exact_solution(&b, &lap).0);
        let b = RadialBarrier::centered(0.5, 0.5, 2, 0.3).unwrap();
        assert_eq!(is_exact_solution(&b, &lap), (false, "super-solution only"));
        let pm = OperatorSpec::pucci_minus(1.0, 2.0).unwrap();
        let sup = RadialBarrier::super_for(&pm, 0.5, 0.25, 1, 0.0, &[0.0]).unwrap();
        assert_eq!(sup.classify(&pm), BarrierClass::SuperOnly);
        let sub = RadialBarrier::sub_for(&pm, 0.5, 0.25, 1, 0.0, &[0.0]).unwrap();
        assert_eq!(sub.classify(&pm), BarrierClass::Exact);
        let pp = OperatorSpec::pucci_plus(1.0, 2.0).unwrap();
        assert_eq!(sup.classify(&pp), BarrierClass::Exact);
        assert_eq!(sub.classify(&pp), BarrierClass::SubOnly);
        let b = RadialBarrier::centered(0.0, 0.5, 1, 0.3).unwrap();
        assert_eq!(b.classify(&lap), BarrierClass::SuperOnly);
        assert!(b.classify_with(&lap, ZeroPowerConvention::Indicator).is_exact());
        let b = RadialBarrier::centered(0.0, 0.5, 1, 0.0).unwrap();
        assert!(b.classify(&lap).is_exact());
        assert_eq!(b.classify_with(&lap, ZeroPowerConvention::Indicator), BarrierClass::SubOnly);
        let mid = RadialBarrier::new(0.5, 0.25, 1, 1.5, 0.0, &[0.0]).unwrap();
        assert_eq!(mid.classify(&pm), BarrierClass::Unordered);
    }

    fn residual_on(b: &RadialBarrier, op: &OperatorSpec, grid: &Grid) -> (f64, f64) {
        let (phi, psi) = b.boundary_data(grid).unwrap();
        let conv = if b.rho() > 0.0 { ZeroPowerConvention::Indicator } else { ZeroPowerConvention::One };
        assert!(b.classify_with(op, conv).is_exact());
        let pr = ProblemSpec::new(op.clone(), op.clone(), b.p(), b.q(), phi, psi)
            .unwrap()
            .with_zero_power(conv);
        let (ru, rv) = signed_residuals(&pr, &b.pair(grid).unwrap());
        let h = grid.h();
        let keep = |k: usize| b.distance_to_kink(&grid.coords(k)[..grid.dim()]) > 2.0 * h;
        let sup = |f: &ScalarField| {
            (0..grid.node_count())
                .filter(|&k| keep(k))
                .fold(0.0_f64, |m, k| m.max(f.get(k).abs()))
        };
        (sup(&ru), sup(&rv))
    }

    #[test]
    fn exact_barriers_have_second_order_residuals() {
        let lap = OperatorSpec::laplacian();
        for (p, q, n, rho) in [(0.5, 0.5, 1, 0.3), (0.25, 0.5, 1, 0.0), (0.5, 0.5, 2, 0.0), (0.0, 0.5, 1, 0.3)] {
            let b = RadialBarrier::centered(p, q, n, rho).unwrap();
            for m in [65, 129] {
                let grid = if n == 1 {
                    Grid::interval(-1.0, 1.0, m).unwrap()
                } else {
                    Grid::square(-1.0, 1.0, m).unwrap()
                };
                let (ru, rv) = residual_on(&b, &lap, &grid);
                let h2 = grid.h() * grid.h();
                assert!(ru.max(rv) <= 10.0 * h2, "p={p} q={q} n={n} rho={rho}: {ru:e} {rv:e}");
            }
        }
    }

    #[test]
    fn exact_pair_residual_from_system_residual() {
        let g = Grid::interval(-1.0, 1.0, 513).unwrap();
        let b = RadialBarrier::centered(0.5, 0.5, 1, 0.0).unwrap();
        let (phi, psi) = b.boundary_data(&g).unwrap();
        let op = OperatorSpec::laplacian();
        let pr = ProblemSpec::new(op.clone(), op, 0.5, 0.5, phi, psi).unwrap();
        let (ru, rv) = system_residual(&pr, &b.pair(&g).unwrap());
        assert!(ru.max(rv) <= 10.0 * g.h() * g.h());
    }

    #[test]
    fn super_barrier_residuals_are_nonpositive() {
        // 2D Laplacian with ρ > 0: F(D²ũ) − ṽ₊ᵖ ≤ C h² away from the kink.
        let b = RadialBarrier::centered(0.5, 0.5, 2, 0.3).unwrap();
        let g = Grid::square(-1.0, 1.0, 81).unwrap();
        let (phi, psi) = b.boundary_data(&g).unwrap();
        let op = OperatorSpec::laplacian();
        let pr = ProblemSpec::new(op.clone(), op, 0.5, 0.5, phi, psi).unwrap();
        let (ru, _) = signed_residuals(&pr, &b.pair(&g).unwrap());
        let h = g.h();
        let worst = (0..g.node_count())
            .filter(|&k| b.distance_to_kink(&g.coords(k)[..2]) > 2.0 * h)
            .fold(f64::NEG_INFINITY, |m, k| m.max(ru.get(k)));
        assert!(worst <= 10.0 * h * h, "{worst:e}");
        let most_negative = ru.values().iter().fold(0.0_f64, |m, &x| m.min(x));
        assert!(most_negative < -1e-3);
    }

    #[test]
    fn magnitude_closed_form() {
        let b = RadialBarrier::centered(0.5, 0.5, 1, 0.0).unwrap();
        let direct = 2.0 * (0.5f64.powi(4) / 144.0).powf(2.0 / 3.0);
        assert!(rel(b.magnitude_at(&[0.5]), direct) < 1e-13);
        assert!(b.liouville_threshold() < b.magnitude_coefficient());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn identities_hold(p in 0.0..3.0f64, t in 0.0..1.0f64, n in 1usize..6, e in 0.05..20.0f64) {
            let q = t * (0.9 / p).min(3.0);
            let (alpha, beta, gamma) = exponents(p, q).unwrap();
            prop_assert!((alpha - 2.0 - p * beta).abs() <= 1e-12 * alpha);
            prop_assert!((beta - 2.0 - q * alpha).abs() <= 1e-12 * beta);
            prop_assert!((gamma * (1.0 + p) - alpha).abs() <= 1e-12 * alpha);
            let (a, b) = barrier_constants(p, q, n, e).unwrap();
            let nf = n as f64;
            prop_assert!(rel(e * a * alpha * (alpha + nf - 2.0), b.powf(p)) <= 1e-12);
            prop_assert!(rel(e * b * beta * (beta + nf - 2.0), a.powf(q)) <= 1e-12);
            // Swapping the exponents swaps the exponent and constant pairs.
            let (a2, b2) = barrier_constants(q, p, n, e).unwrap();
            let (al2, be2, _) = exponents(q, p).unwrap();
            prop_assert!(rel(a2, b) <= 1e-12 && rel(b2, a) <= 1e-12);
            prop_assert!(al2 == beta && be2 == alpha);
        }

        #[test]
        fn rho_zero_pair_is_scale_invariant(p in 0.0..0.9f64, q in 0.0..0.9f64, s in 0.2..5.0f64, x in 0.01..1.0f64, y in -1.0..1.0f64) {
            let b = RadialBarrier::centered(p, q, 2, 0.0).unwrap();
            let g = b.gamma();
            let xs = [x / s, y / s];
            let u = s.powf(g * (1.0 + p)) * b.u_at(&xs);
            let v = s.powf(g * (1.0 + q)) * b.v_at(&xs);
            prop_assert!(rel(u, b.u_at(&[x, y])) <= 1e-9);
            prop_assert!(rel(v, b.v_at(&[x, y])) <= 1e-9);
            prop_assert!(rel(s.powf(g) * b.magnitude_at(&xs), b.magnitude_at(&[x, y])) <= 1e-9);
        }
    }
}
