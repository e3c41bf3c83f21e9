//! Pointwise relaxation sweeps.

use super::Csr;

/// One Gauss–Seidel sweep, forward or backward in index order.
pub fn gauss_seidel(a: &Csr, diag: &[f64], b: &[f64], x: &mut [f64], forward: bool) {
    sor_sweep(a, diag, b, x, 1.0, forward);
}

/// One SOR sweep with relaxation factor `omega`.
pub fn sor_sweep(a: &Csr, diag: &[f64], b: &[f64], x: &mut [f64], omega: f64, forward: bool) {
    let n = a.rows;
    let mut step = |r: usize| {
        let (idx, val) = a.row(r);
        let mut s = b[r];
        for (&c, &v) in idx.iter().zip(val) {
            if c != r {
                s -= v * x[c];
            }
        }
        x[r] += omega * (s / diag[r] - x[r]);
    };
    if forward {
        (0..n).for_each(&mut step);
    } else {
        (0..n).rev().for_each(&mut step);
    }
}

/// Symmetric SOR iteration until the sup-norm residual drops below `tol`.
/// Returns (sweeps, final residual).
pub fn sor_solve(
    a: &Csr,
    b: &[f64],
    x: &mut [f64],
    omega: f64,
    tol: f64,
    max_sweeps: usize,
) -> (usize, f64) {
    let diag = a.diagonal();
    let mut r = vec![0.0; b.len()];
    let resid = |x: &[f64], r: &mut [f64]| {
        a.matvec(x, r);
        r.iter().zip(b).fold(0.0_f64, |m, (ax, bi)| m.max((bi - ax).abs()))
    };
    let mut res = resid(x, &mut r);
    let mut sweeps = 0;
    while res > tol && sweeps < max_sweeps {
        sor_sweep(a, &diag, b, x, omega, true);
        sor_sweep(a, &diag, b, x, omega, false);
        sweeps += 1;
        res = resid(x, &mut r);
    }
    (sweeps, res)
}
