//! Linear algebra for the interior systems: banded LU, restarted GMRES,
//! Galerkin multigrid and SOR.

mod banded;
mod krylov;
mod multigrid;
pub mod relax;
mod sparse;

pub use banded::BandedLu;
pub use krylov::{gmres, GmresInfo};
pub use multigrid::Multigrid;
pub use sparse::Csr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("zero diagonal entry in a relaxation matrix")]
    ZeroDiagonal,
    #[error("iterative solve stalled after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Banded factorizations above this many flops switch to multigrid-GMRES.
pub const DIRECT_BUDGET: f64 = 2.0e8;

/// Work counters reported by [`solve_scalar`] / [`solve_coupled`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearStats {
    pub direct: bool,
    pub krylov_iterations: usize,
}

/// Solve `A x = b` for a scalar interior system on an `mx × my` grid.
pub fn solve_scalar(
    a: &Csr,
    mx: usize,
    my: usize,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
) -> Result<LinearStats, LinalgError> {
    let (kl, ku) = a.bandwidths();
    if my <= 1 || BandedLu::cost(a.rows, kl, ku) <= DIRECT_BUDGET {
        x.copy_from_slice(b);
        BandedLu::factor(a)?.solve_in_place(x);
        return Ok(LinearStats {
            direct: true,
            krylov_iterations: 0,
        });
    }
    let mg = Multigrid::new(a.clone(), mx, my)?;
    x.iter_mut().for_each(|v| *v = 0.0);
    let info = gmres(
        &mut |v, o| a.matvec(v, o),
        &mut |v, o| mg.vcycle(v, o),
        b,
        x,
        rtol,
        40,
        400,
    );
    if !info.converged {
        return Err(LinalgError::NotConverged {
            iterations: info.iterations,
            residual: info.residual,
        });
    }
    Ok(LinearStats {
        direct: false,
        krylov_iterations: info.iterations,
    })
}

/// Coupled two-field system
/// `[A_u  -C_u; -C_v  A_v] [x_u; x_v] = [b_u; b_v]` with diagonal couplings.
pub struct CoupledSystem<'a> {
    pub a_u: &'a Csr,
    pub a_v: &'a Csr,
    pub c_u: &'a [f64],
    pub c_v: &'a [f64],
    pub mx: usize,
    pub my: usize,
}

impl CoupledSystem<'_> {
    /// Node-interleaved assembly: unknown `2k` is `x_u[k]`, `2k+1` is `x_v[k]`.
    pub fn interleaved(&self) -> Csr {
        let n = self.a_u.rows;
        let mut t = Vec::with_capacity(self.a_u.nnz() + self.a_v.nnz() + 2 * n);
        for r in 0..n {
            let (iu, vu) = self.a_u.row(r);
            for (&c, &v) in iu.iter().zip(vu) {
                t.push((2 * r, 2 * c, v));
            }
            let (iv, vv) = self.a_v.row(r);
            for (&c, &v) in iv.iter().zip(vv) {
                t.push((2 * r + 1, 2 * c + 1, v));
            }
            t.push((2 * r, 2 * r + 1, -self.c_u[r]));
            t.push((2 * r + 1, 2 * r, -self.c_v[r]));
        }
        Csr::from_triplets(2 * n, 2 * n, t)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.a_u.rows;
        let (xu, xv) = x.split_at(n);
        let (ou, ov) = out.split_at_mut(n);
        self.a_u.matvec(xu, ou);
        self.a_v.matvec(xv, ov);
        for k in 0..n {
            ou[k] -= self.c_u[k] * xv[k];
            ov[k] -= self.c_v[k] * xu[k];
        }
    }
}

/// Solve a coupled system; `b` and `x` are stacked `[u-part; v-part]`.
pub fn solve_coupled(
    sys: &CoupledSystem<'_>,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
) -> Result<LinearStats, LinalgError> {
    let n = sys.a_u.rows;
    let inter = sys.interleaved();
    let (kl, ku) = inter.bandwidths();
    if sys.my <= 1 || BandedLu::cost(inter.rows, kl, ku) <= DIRECT_BUDGET {
        let mut y = vec![0.0; 2 * n];
        for k in 0..n {
            y[2 * k] = b[k];
            y[2 * k + 1] = b[n + k];
        }
        BandedLu::factor(&inter)?.solve_in_place(&mut y);
        for k in 0..n {
            x[k] = y[2 * k];
            x[n + k] = y[2 * k + 1];
        }
        return Ok(LinearStats {
            direct: true,
            krylov_iterations: 0,
        });
    }
    // Block lower-triangular preconditioner with one V-cycle per block.
    let mg_u = Multigrid::new(sys.a_u.clone(), sys.mx, sys.my)?;
    let mg_v = Multigrid::new(sys.a_v.clone(), sys.mx, sys.my)?;
    let mut tmp = vec![0.0; n];
    let mut precond = |v: &[f64], o: &mut [f64]| {
        let (vu, vv) = v.split_at(n);
        let (ou, ov) = o.split_at_mut(n);
        mg_u.vcycle(vu, ou);
        for k in 0..n {
            tmp[k] = vv[k] + sys.c_v[k] * ou[k];
        }
        mg_v.vcycle(&tmp, ov);
    };
    x.iter_mut().for_each(|v| *v = 0.0);
    let info = gmres(
        &mut |v, o| sys.apply(v, o),
        &mut precond,
        b,
        x,
        rtol,
        60,
        3000,
    );
    if !info.converged {
        return Err(LinalgError::NotConverged {
            iterations: info.iterations,
            residual: info.residual,
        });
    }
    Ok(LinearStats {
        direct: false,
        krylov_iterations: info.iterations,
    })
}
