//! Compressed sparse row matrices.

/// Square or rectangular CSR matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let (idx, val) = self.row(r);
            let mut s = 0.0;
            for (&c, &v) in idx.iter().zip(val) {
                s += v * x[c];
            }
            *yr = s;
        }
    }

    /// `A ← A·diag(d)`.
    pub fn scale_columns(&mut self, d: &[f64]) {
        for (v, &c) in self.data.iter_mut().zip(&self.indices) {
            *v *= d[c];
        }
    }

    /// `A ← A + diag(e)`; every diagonal entry must be stored.
    pub fn add_diagonal(&mut self, e: &[f64]) {
        for (r, &er) in e.iter().enumerate() {
            let pos = (self.indptr[r]..self.indptr[r + 1])
                .find(|&k| self.indices[k] == r)
                .expect("stored diagonal");
            self.data[pos] += er;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let (idx, val) = self.row(r);
                idx.iter()
                    .position(|&c| c == r)
                    .map_or(0.0, |p| val[p])
            })
            .collect()
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.rows {
            let (idx, _) = self.row(r);
            if let (Some(&first), Some(&last)) = (idx.first(), idx.last()) {
                kl = kl.max(r.saturating_sub(first));
                ku = ku.max(last.saturating_sub(r));
            }
        }
        (kl, ku)
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                t.push((c, r, v));
            }
        }
        Csr::from_triplets(self.cols, self.rows, t)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.cols, other.rows);
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            let (ia, va) = self.row(r);
            for (&k, &a) in ia.iter().zip(va) {
                let (ib, vb) = other.row(k);
                for (&c, &b) in ib.iter().zip(vb) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                indices.push(c);
                data.push(acc[c]);
            }
            indptr[r + 1] = indices.len();
        }
        Csr {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            data,
        }
    }
}
