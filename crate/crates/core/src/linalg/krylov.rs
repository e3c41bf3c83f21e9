//! Restarted GMRES with right preconditioning.

/// Outcome of a GMRES run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresInfo {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` to `‖b − A x‖₂ ≤ rtol·‖b‖₂`, starting from `x`.
/// `apply(v, out)` computes `A v`; `precond(v, out)` approximates `A⁻¹ v`.
pub fn gmres(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    precond: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresInfo {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresInfo {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let target = rtol * bnorm;
    let m = restart.max(1);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut total = 0;
    let mut resid;
    loop {
        apply(x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        resid = norm(&r);
        if resid <= target || total >= max_iter {
            return GmresInfo {
                iterations: total,
                residual: resid / bnorm,
                converged: resid <= target,
            };
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / resid).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = resid;
        let mut k = 0;
        while k < m && total < max_iter {
            precond(&basis[k], &mut z);
            apply(&z, &mut w);
            for (i, vi) in basis.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let rho = h[k][k].hypot(hn);
            if rho == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / rho;
                sn[k] = hn / rho;
            }
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            let est = g[k].abs();
            if hn == 0.0 || est <= target {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution for the Hessenberg least-squares solution.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut comb = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            for (c, v) in comb.iter_mut().zip(vi) {
                *c += yi * v;
            }
        }
        precond(&comb, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Csr;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = Csr::from_triplets(n, n, t);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xs, &mut b);
        let mut x = vec![0.0; n];
        let info = gmres(
            &mut |v, o| a.matvec(v, o),
            &mut |v, o| o.copy_from_slice(v),
            &b,
            &mut x,
            1e-12,
            10,
            500,
        );
        assert!(info.converged, "{info:?}");
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
