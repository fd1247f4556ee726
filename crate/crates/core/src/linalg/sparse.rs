//! Minimal sparse machinery for the assembled finite element operators:
//! triplet accumulation, CSR conversion, matvec and permutation.

use crate::error::{Error, Result};

/// Accumulated (row, col, value) entries; duplicates add up in `to_csr`.
#[derive(Debug, Clone)]
pub struct Triplets {
    n: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            self.rows.push(i as u32);
            self.cols.push(j as u32);
            self.vals.push(v);
        }
    }

    pub fn to_csr(&self) -> Csr {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &r in &self.rows {
            counts[r as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let indptr_raw = counts.clone();
        let mut indices = vec![0u32; self.rows.len()];
        let mut data = vec![0f64; self.rows.len()];
        let mut cursor = indptr_raw.clone();
        for k in 0..self.rows.len() {
            let r = self.rows[k] as usize;
            let p = cursor[r];
            indices[p] = self.cols[k];
            data[p] = self.vals[k];
            cursor[r] += 1;
        }
        // sort each row by column and merge duplicates
        let mut out_indptr = vec![0usize; n + 1];
        let mut out_indices = Vec::with_capacity(indices.len());
        let mut out_data = Vec::with_capacity(data.len());
        let mut row_buf: Vec<(u32, f64)> = Vec::new();
        for r in 0..n {
            row_buf.clear();
            for k in indptr_raw[r]..indptr_raw[r + 1] {
                row_buf.push((indices[k], data[k]));
            }
            row_buf.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row_buf.len() {
                let col = row_buf[k].0;
                let mut v = 0.0;
                while k < row_buf.len() && row_buf[k].0 == col {
                    v += row_buf[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    out_indices.push(col);
                    out_data.push(v);
                }
            }
            out_indptr[r + 1] = out_indices.len();
        }
        Csr { n, indptr: out_indptr, indices: out_indices, data: out_data }
    }
}

/// Compressed sparse row matrix (square).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi]
            .iter()
            .zip(&self.data[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            y[i] = s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&(j as u32)) {
            Ok(k) => self.data[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Csr {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut indices = vec![0u32; self.nnz()];
        let mut data = vec![0f64; self.nnz()];
        for r in 0..n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k] as usize;
                let p = cursor[c];
                indices[p] = r as u32;
                data[p] = self.data[k];
                cursor[c] += 1;
            }
        }
        Csr { n, indptr: counts, indices, data }
    }

    /// max |A_ij - A_ji| over all entries.
    pub fn symmetry_error(&self) -> f64 {
        let t = self.transpose();
        let mut err = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                err = err.max((v - t.get(i, j)).abs());
            }
        }
        err
    }

    /// Fail unless the matrix is numerically symmetric.
    pub fn require_symmetric(&self, rel_tol: f64) -> Result<()> {
        let scale = self.max_abs().max(1e-300);
        let err = self.symmetry_error() / scale;
        if err > rel_tol {
            return Err(Error::KNotSymmetric(err));
        }
        Ok(())
    }

    /// B = P A P^T with new index p[i] for old index i, i.e.
    /// B[p[i], p[j]] = A[i, j].
    pub fn permuted(&self, new_of_old: &[usize]) -> Csr {
        let mut t = Triplets::new(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push(new_of_old[i], new_of_old[j], v);
            }
        }
        t.to_csr()
    }

    /// Semi-bandwidth: max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }
}
