use serde::Serialize;

use super::{log_log_fit, LabError, LogLogFit};
use crate::free_boundary::RegionDecomposition;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    /// Node maximum of the magnitude over each grid ball.
    pub sups: Vec<f64>,
    pub fit: Option<LogLogFit>,
}

impl GrowthProfile {
    pub fn from_samples(center: &[f64], radii: Vec<f64>, sups: Vec<f64>) -> Self {
        let fit = log_log_fit(&radii, &sups);
        GrowthProfile {
            center: center.to_vec(),
            radii,
            sups,
            fit,
        }
    }

    /// Fitted exponent; `NaN` when the fit is degenerate.
    pub fn slope(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope)
    }

    /// `sup_k / r_k^γ`.
    pub fn ratios(&self, gamma: f64) -> Vec<f64> {
        self.radii
            .iter()
            .zip(&self.sups)
            .map(|(r, s)| s / r.powf(gamma))
            .collect()
    }

    /// Sub-profile over radii in `[lo, hi]`, refitted.
    pub fn window(&self, lo: f64, hi: f64) -> GrowthProfile {
        let (radii, sups): (Vec<f64>, Vec<f64>) = self
            .radii
            .iter()
            .zip(&self.sups)
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(r, s)| (*r, *s))
            .unzip();
        GrowthProfile::from_samples(&self.center, radii, sups)
    }
}

/// Free-boundary node closest to `point`, if any.
pub fn nearest_free_boundary_node(decomp: &RegionDecomposition, point: &[f64]) -> Option<usize> {
    let grid = decomp.grid();
    let d = grid.dim();
    decomp.free_boundary().into_iter().min_by(|&a, &b| {
        let da = dist(&grid.coords(a)[..d], point);
        let db = dist(&grid.coords(b)[..d], point);
        da.total_cmp(&db)
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `[4h, dist(x₀, ∂Ω)/2]`.
pub fn default_radius_window(decomp: &RegionDecomposition, x0: &[f64]) -> (f64, f64) {
    let g = decomp.grid();
    (4.0 * g.h(), 0.5 * g.distance_to_boundary(x0))
}

/// Node-maximum growth of the magnitude around a free-boundary point over
/// `levels` geometric radii between `r_min` and `r_max`.
pub fn growth_profile(
    decomp: &RegionDecomposition,
    x0: &[f64],
    r_min: f64,
    r_max: f64,
    levels: usize,
) -> Result<GrowthProfile, LabError> {
    let grid = decomp.grid();
    let d = grid.dim();
    if x0.len() < d {
        return Err(LabError::BadRadii(format!("center needs {d} coordinates")));
    }
    let x0 = &x0[..d];
    if !(r_min > 0.0 && r_max > r_min && levels >= 2) {
        return Err(LabError::BadRadii(format!(
            "need 0 < r_min < r_max and at least 2 levels (got {r_min}, {r_max}, {levels})"
        )));
    }
    let one_node = grid.h() * (d as f64).sqrt() * (1.0 + 1e-9);
    let near = nearest_free_boundary_node(decomp, x0)
        .map(|k| dist(&grid.coords(k)[..d], x0))
        .is_some_and(|dd| dd <= one_node);
    if !near {
        return Err(LabError::NotAFreeBoundaryPoint { point: x0.to_vec() });
    }
    if !grid.contains(x0) || r_max > grid.distance_to_boundary(x0) * (1.0 + 1e-12) {
        return Err(LabError::BallLeavesDomain {
            center: x0.to_vec(),
            radius: r_max,
        });
    }
    let ratio = r_max / r_min;
    let radii: Vec<f64> = (0..levels)
        .map(|k| r_min * ratio.powf(k as f64 / (levels - 1) as f64))
        .collect();
    let m = decomp.magnitude();
    let sups = radii
        .iter()
        .map(|&r| {
            grid.ball(x0, r)
                .map(|nodes| nodes.iter().fold(0.0_f64, |s, &k| s.max(m.get(k))))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(GrowthProfile::from_samples(x0, radii, sups))
}

/// `(min_k, max_k)` of `sup_k / r_k^γ`.
pub fn nondegeneracy_ratios(profile: &GrowthProfile, gamma: f64) -> (f64, f64) {
    profile
        .ratios(gamma)
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_boundary::{decompose, threshold_for};
    use crate::grid::{Grid, ScalarField};
    use crate::radial::RadialBarrier;
    use crate::system::SolutionPair;
    use proptest::prelude::*;

    fn radial_decomp(p: f64, q: f64, rho: f64, m: usize) -> (RadialBarrier, RegionDecomposition) {
        let g = Grid::interval(-1.0, 1.0, m).unwrap();
        let b = RadialBarrier::centered(p, q, 1, rho).unwrap();
        let eps = threshold_for(g.h(), 1.0, p, q);
        (b.clone(), decompose(&b.pair(&g).unwrap(), eps).unwrap())
    }

    fn fb_point(d: &RegionDecomposition, x: f64) -> [f64; 1] {
        let k = nearest_free_boundary_node(d, &[x]).unwrap();
        [d.grid().coords(k)[0]]
    }

    #[test]
    fn exact_radial_growth_exponent() {
        for (p, q) in [(0.5, 0.5), (0.0, 0.0), (0.25, 0.5)] {
            let (b, d) = radial_decomp(p, q, 0.3, 1025);
            let x0 = fb_point(&d, 0.3);
            let (_, hi) = default_radius_window(&d, &x0);
            // FB node offsets of up to h bias the fit by ~γh/r at the small radii.
            let prof = growth_profile(&d, &x0, 8.0 * d.grid().h(), hi, 8).unwrap();
            let g = b.gamma();
            assert!((prof.slope() - g).abs() <= 0.05 * g, "p={p} q={q}: {} vs {g}", prof.slope());
            assert!(prof.sups.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn slope_drift_shrinks_under_refinement() {
        let mut errs = Vec::new();
        for m in [129, 257, 513] {
            let (b, d) = radial_decomp(0.5, 0.5, 0.3, m);
            let x0 = fb_point(&d, 0.3);
            let h = d.grid().h();
            let prof = growth_profile(&d, &x0, 4.0 * h, 0.25, 6).unwrap();
            errs.push((prof.slope() - b.gamma()).abs());
        }
        assert!(errs[2] < errs[0], "{errs:?}");
    }

    #[test]
    fn ratios_near_closed_form_constant() {
        let g = Grid::interval(-1.0, 1.0, 513).unwrap();
        let b = RadialBarrier::centered(0.5, 0.5, 1, 0.0).unwrap();
        let d = decompose(&b.pair(&g).unwrap(), threshold_for(g.h(), 1.0, 0.5, 0.5)).unwrap();
        let x0 = fb_point(&d, 0.0);
        let prof = growth_profile(&d, &x0, 8.0 * g.h(), 0.5, 6).unwrap();
        let (lo, hi) = nondegeneracy_ratios(&prof, b.gamma());
        let c = b.magnitude_coefficient();
        // Node maxima undershoot the ball radius by less than h.
        let worst = (1.0 - 1.0 / 8.0f64).powf(b.gamma());
        assert!(hi <= c * (1.0 + 1e-12) && lo >= c * worst, "{lo} {hi} {c}");
        assert!(hi / lo <= 1.0 / worst);
        let one = GrowthProfile::from_samples(&[0.0], vec![0.1], vec![2.0]);
        let (a, z) = nondegeneracy_ratios(&one, 2.0);
        assert_eq!(a, z);
    }

    #[test]
    fn growth_errors() {
        let g = Grid::interval(-1.0, 1.0, 65).unwrap();
        let k = ScalarField::constant(g, 0.7);
        let pair = SolutionPair::new(k.clone(), k, 0.5, 0.5).unwrap();
        let d = decompose(&pair, 1e-6).unwrap();
        assert!(matches!(
            growth_profile(&d, &[0.0], 0.1, 0.2, 4),
            Err(LabError::NotAFreeBoundaryPoint { .. })
        ));
        let (_, d) = radial_decomp(0.5, 0.5, 0.3, 65);
        let x0 = fb_point(&d, 0.3);
        assert!(matches!(
            growth_profile(&d, &x0, 0.1, 0.9, 4),
            Err(LabError::BallLeavesDomain { .. })
        ));
        assert!(matches!(growth_profile(&d, &x0, 0.2, 0.1, 4), Err(LabError::BadRadii(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ratios_scale_with_the_pair(s in 0.2..5.0f64) {
            let (b, d) = radial_decomp(0.5, 0.25, 0.3, 129);
            let g = *d.grid();
            let pair = b.pair(&g).unwrap();
            let scaled = SolutionPair::new(
                pair.u.map(|u| s.powf(1.5) * u).unwrap(),
                pair.v.map(|v| s.powf(1.25) * v).unwrap(),
                0.5,
                0.25,
            ).unwrap();
            let ds = decompose(&scaled, d.threshold() * s).unwrap();
            let x0 = fb_point(&d, 0.3);
            let p0 = growth_profile(&d, &x0, 0.05, 0.3, 4).unwrap();
            let p1 = growth_profile(&ds, &x0, 0.05, 0.3, 4).unwrap();
            for (a, c) in p0.ratios(b.gamma()).iter().zip(p1.ratios(b.gamma())) {
                prop_assert!((c - s * a).abs() <= 1e-10 * c.abs());
            }
        }
    }
}
