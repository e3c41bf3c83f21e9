use deadcore::free_boundary::{decompose, default_threshold, Region};
use deadcore::grid::{BoundaryData, Grid};
use deadcore::lab::{growth_profile, weak_compare};
use deadcore::ops::OperatorSpec;
use deadcore::radial::RadialBarrier;
use deadcore::system::{fixed_point_solve, system_residual, ProblemSpec, SystemOptions};
use proptest::prelude::*;

fn radial_problem(op: OperatorSpec, n: usize, rho: f64) -> (ProblemSpec, RadialBarrier) {
    let g = Grid::interval(-1.0, 1.0, n).unwrap();
    let b = RadialBarrier::centered(0.5, 0.5, 1, rho).unwrap();
    let (phi, psi) = b.boundary_data(&g).unwrap();
    (ProblemSpec::new(op.clone(), op, 0.5, 0.5, phi, psi).unwrap(), b)
}

#[test]
fn free_boundary_sits_at_the_kink() {
    let (pr, _) = radial_problem(OperatorSpec::laplacian(), 257, 0.3);
    let (pair, hist) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
    assert!(hist.converged);
    let d = decompose(&pair, default_threshold(&pr)).unwrap();
    let g = *pr.grid();
    let fb = d.free_boundary();
    assert_eq!(fb.len(), 2);
    for k in fb {
        assert!((g.coords(k)[0].abs() - 0.3).abs() <= 2.0 * g.h());
    }
    assert_eq!(d.region(g.node_count() / 2), Region::Core);
    assert_eq!(d.region(0), Region::Positive);
}

#[test]
fn growth_profile_of_computed_solution() {
    let (pr, b) = radial_problem(OperatorSpec::laplacian(), 513, 0.3);
    let (pair, _) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
    let d = decompose(&pair, default_threshold(&pr)).unwrap();
    let h = pr.grid().h();
    let prof = growth_profile(&d, &[0.3], 8.0 * h, 0.3, 10).unwrap();
    assert!((prof.slope() / b.gamma() - 1.0).abs() < 0.05, "{}", prof.slope());
}

#[test]
fn pucci_barriers_bracket_the_solution() {
    let op = OperatorSpec::pucci_minus(1.0, 2.0).unwrap();
    let g = Grid::interval(-1.0, 1.0, 129).unwrap();
    let sup = RadialBarrier::super_for(&op, 0.5, 0.5, 1, 0.0, &[0.0]).unwrap();
    let sub = RadialBarrier::sub_for(&op, 0.5, 0.5, 1, 0.3, &[0.0]).unwrap();
    // Data between the two traces: the sub barrier's own traces.
    let (phi, psi) = sub.boundary_data(&g).unwrap();
    let pr = ProblemSpec::new(op.clone(), op, 0.5, 0.5, phi, psi).unwrap();
    let (sol, _) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
    assert!(weak_compare(&sup.pair(&g).unwrap(), &sol).unwrap().passed);
    assert!(weak_compare(&sol, &sub.pair(&g).unwrap()).unwrap().passed);
}

#[test]
fn two_dimensional_pucci_solve_converges() {
    let op = OperatorSpec::pucci_plus(0.5, 1.5).unwrap();
    let g = Grid::square(-1.0, 1.0, 33).unwrap();
    let b = RadialBarrier::centered(0.5, 0.5, 2, 0.2).unwrap();
    let (phi, psi) = b.boundary_data(&g).unwrap();
    let pr = ProblemSpec::new(op.clone(), op, 0.5, 0.5, phi, psi).unwrap();
    let (pair, hist) = fixed_point_solve(&pr, &SystemOptions::default()).unwrap();
    assert!(hist.converged);
    let (ru, rv) = system_residual(&pr, &pair);
    assert!(ru.max(rv) <= pr.default_tolerance());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ordered_data_give_ordered_solutions(
        p in 0.1..1.0f64,
        q in 0.1..0.9f64,
        lo in 0.0..0.5f64,
        gap in 0.0..0.5f64,
    ) {
        let g = Grid::interval(-1.0, 1.0, 65).unwrap();
        let lap = OperatorSpec::laplacian;
        let solve = |c: f64| {
            let bd = BoundaryData::constant(g, c).unwrap();
            let pr = ProblemSpec::new(lap(), lap(), p, q, bd.clone(), bd).unwrap();
            fixed_point_solve(&pr, &SystemOptions::default()).unwrap().0
        };
        let (a, b) = (solve(lo), solve(lo + gap));
        let r = weak_compare(&b, &a).unwrap();
        prop_assert!(r.passed, "{r:?}");
    }
}
