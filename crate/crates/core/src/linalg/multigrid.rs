//! Geometric-hierarchy multigrid with Galerkin coarse operators for scalar
//! problems on the interior of a 2D structured grid.
//!
//! The fine matrix is indexed like the interior nodes, `i + mx·j` with
//! `mx × my` unknowns. Coarsening halves both axes while they stay odd
//! (grids with 2^k + 1 nodes per axis coarsen all the way down).

use super::{relax, BandedLu, Csr, LinalgError};

const COARSEST: usize = 1200;

struct Level {
    a: Csr,
    diag: Vec<f64>,
    /// Prolongation from the next coarser level and its scaled transpose.
    p: Option<(Csr, Csr)>,
}

pub struct Multigrid {
    levels: Vec<Level>,
    coarse: BandedLu,
    pub sweeps: usize,
}

fn prolongation(mx: usize, my: usize) -> Csr {
    let (cx, cy) = ((mx - 1) / 2, (my - 1) / 2);
    let mut t = Vec::with_capacity(cx * cy * 9);
    for jc in 0..cy {
        for ic in 0..cx {
            let col = ic + cx * jc;
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    let fi = (2 * ic + 1) as isize + di;
                    let fj = (2 * jc + 1) as isize + dj;
                    let w = (1.0 - di.abs() as f64 / 2.0) * (1.0 - dj.abs() as f64 / 2.0);
                    t.push((fi as usize + mx * fj as usize, col, w));
                }
            }
        }
    }
    Csr::from_triplets(mx * my, cx * cy, t)
}

impl Multigrid {
    pub fn new(a: Csr, mx: usize, my: usize) -> Result<Self, LinalgError> {
        assert_eq!(a.rows, mx * my);
        let mut levels = Vec::new();
        let (mut nx, mut ny) = (mx, my);
        let mut cur = a;
        while cur.rows > COARSEST && nx % 2 == 1 && ny % 2 == 1 && nx >= 7 && ny >= 7 {
            let p = prolongation(nx, ny);
            let mut r = p.transpose();
            r.data.iter_mut().for_each(|v| *v *= 0.25);
            let coarse = r.matmul(&cur.matmul(&p));
            let diag = cur.diagonal();
            levels.push(Level {
                a: cur,
                diag,
                p: Some((p, r)),
            });
            cur = coarse;
            nx = (nx - 1) / 2;
            ny = (ny - 1) / 2;
        }
        let coarse = BandedLu::factor(&cur)?;
        let diag = cur.diagonal();
        levels.push(Level {
            a: cur,
            diag,
            p: None,
        });
        if levels.iter().any(|l| l.diag.contains(&0.0)) {
            return Err(LinalgError::ZeroDiagonal);
        }
        Ok(Multigrid {
            levels,
            coarse,
            sweeps: 2,
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle for `A x = b` from a zero initial guess.
    pub fn vcycle(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(0, b, x);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let lev = &self.levels[l];
        x.iter_mut().for_each(|v| *v = 0.0);
        let Some((p, r)) = &lev.p else {
            x.copy_from_slice(b);
            self.coarse.solve_in_place(x);
            return;
        };
        for _ in 0..self.sweeps {
            relax::gauss_seidel(&lev.a, &lev.diag, b, x, true);
        }
        let mut res = vec![0.0; b.len()];
        lev.a.matvec(x, &mut res);
        for (ri, bi) in res.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut rc = vec![0.0; r.rows];
        r.matvec(&res, &mut rc);
        let mut xc = vec![0.0; r.rows];
        self.cycle(l + 1, &rc, &mut xc);
        p.matvec(&xc, &mut res);
        for (xi, ci) in x.iter_mut().zip(&res) {
            *xi += ci;
        }
        for _ in 0..self.sweeps {
            relax::gauss_seidel(&lev.a, &lev.diag, b, x, false);
        }
    }
}
