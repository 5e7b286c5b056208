use alloc::vec::Vec;

use num_complex::Complex64;

use super::CMat;
use crate::{Error, Result};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    swaps: usize,
    pivot_ratio: f64,
}

/// Pivots smaller than this fraction of the largest pivot count as zero.
const SINGULAR_RATIO: f64 = 1e-14;

impl Lu {
    /// Factorizes a square matrix. Never fails; check [`Lu::is_singular`]
    /// or use [`Lu::solve`], which refuses singular factors.
    pub fn new(a: &CMat) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                swaps += 1;
            }
            max_pivot = max_pivot.max(best);
            min_pivot = min_pivot.min(best);
            if best == 0.0 {
                continue;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        let pivot_ratio = if n == 0 || max_pivot == 0.0 { 0.0 } else { min_pivot / max_pivot };
        Lu { lu, perm, swaps, pivot_ratio: if n == 0 { 1.0 } else { pivot_ratio } }
    }

    /// Smallest over largest pivot modulus; a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn is_singular(&self) -> bool {
        self.pivot_ratio < SINGULAR_RATIO
    }

    pub fn determinant(&self) -> Complex64 {
        let n = self.lu.rows();
        let mut det = Complex64::new(if self.swaps.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0);
        for i in 0..n {
            det *= self.lu[(i, i)];
        }
        det
    }

    /// Solves `A x = b` for one right-hand side.
    pub fn solve_vec(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.is_singular() {
            return Err(Error::SingularSystem { pivot_ratio: self.pivot_ratio });
        }
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &CMat) -> Result<CMat> {
        let mut out = CMat::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j))?;
            out.set_column(j, &x);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve(&CMat::identity(self.lu.rows()))
    }
}
