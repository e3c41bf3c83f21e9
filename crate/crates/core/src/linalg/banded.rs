//! Banded LU factorization with partial pivoting.

use super::{Csr, LinalgError};

/// LU factors of a banded matrix. Row `i` stores columns
/// `i - kl ..= i + ku + kl`; the extra `kl` columns hold pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Rough flop count of factoring an `n × n` matrix with the given bands.
    pub fn cost(n: usize, kl: usize, ku: usize) -> f64 {
        2.0 * n as f64 * kl as f64 * (kl + ku + 1) as f64
    }

    pub fn factor(a: &Csr) -> Result<Self, LinalgError> {
        let n = a.rows;
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * width];
        for r in 0..n {
            let (idx, val) = a.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                ab[r * width + c + kl - r] += v;
            }
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            ab,
            ipiv: vec![0; n],
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * self.width + c + self.kl - r
    }

    fn eliminate(&mut self) -> Result<(), LinalgError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut scale = 0.0_f64;
        for v in &self.ab {
            scale = scale.max(v.abs());
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.at(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.ab[self.at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(LinalgError::Singular { pivot: k });
            }
            self.ipiv[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (i, j) = (self.at(k, c), self.at(p, c));
                    self.ab.swap(i, j);
                }
            }
            let pivot = self.ab[self.at(k, k)];
            let len = last_col - k;
            let krow = self.at(k, k + 1);
            for r in k + 1..=last_row {
                let ir = self.at(r, k);
                let l = self.ab[ir] / pivot;
                self.ab[ir] = l;
                if l == 0.0 {
                    continue;
                }
                let rrow = self.at(r, k + 1);
                let (head, tail) = self.ab.split_at_mut(rrow);
                let src = &head[krow..krow + len];
                for (d, s) in tail[..len].iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.ab[self.at(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.ab[self.at(k, c)] * b[c];
            }
            b[k] = s / self.ab[self.at(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(a: &Csr, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; a.rows];
        a.matvec(x, &mut y);
        y
    }

    #[test]
    fn solves_tridiagonal() {
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0));
            if i > 0 {
                t.push((i, i - 1, 1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
            }
        }
        let a = Csr::from_triplets(n, n, t);
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let mut b = dense_mul(&a, &x);
        BandedLu::factor(&a).unwrap().solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_pivoting() {
        // Zero leading entry forces a row swap.
        let a = Csr::from_triplets(
            3,
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0), (1, 2, 2.0), (2, 1, 3.0), (2, 2, 1.0)],
        );
        let x = [1.0, -2.0, 0.5];
        let mut b = dense_mul(&a, &x);
        BandedLu::factor(&a).unwrap().solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            BandedLu::factor(&a),
            Err(LinalgError::Singular { .. })
        ));
    }

    proptest! {
        #[test]
        fn random_banded_systems(n in 3usize..30, kl in 0usize..3, ku in 0usize..3,
                                 seed in prop::collection::vec(-1.0..1.0f64, 200)) {
            let mut t = Vec::new();
            let mut s = seed.iter().cycle();
            for i in 0..n {
                t.push((i, i, 4.0 + s.next().unwrap()));
                for d in 1..=kl { if i >= d { t.push((i, i - d, *s.next().unwrap())); } }
                for d in 1..=ku { if i + d < n { t.push((i, i + d, *s.next().unwrap())); } }
            }
            let a = Csr::from_triplets(n, n, t);
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let mut b = dense_mul(&a, &x);
            BandedLu::factor(&a).unwrap().solve_in_place(&mut b);
            for (u, v) in b.iter().zip(&x) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
