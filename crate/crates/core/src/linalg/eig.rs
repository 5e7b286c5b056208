//! General complex eigensolver: Householder reduction to Hessenberg form,
//! single-shift implicit QR to a complex Schur form `A = Z T Z^H`, and
//! eigenvectors by back-substitution on `T`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{norm2, CMat};
use crate::{Error, Result};

/// Eigenvalues and unit-norm right eigenvectors (columns), in the order the
/// Schur form delivers them.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Full eigendecomposition of a square complex matrix.
pub fn eigen(a: &CMat) -> Result<Eigen> {
    assert!(a.is_square(), "eigen needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: CMat::zeros(0, 0) });
    }
    let scale = a.max_abs();
    if scale == 0.0 || n == 1 {
        return Ok(Eigen { values: (0..n).map(|i| a[(i, i)]).collect(), vectors: CMat::identity(n) });
    }
    let mut h = a.scale(Complex64::new(1.0 / scale, 0.0));
    let mut z = CMat::identity(n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;
    let vectors = schur_vectors(&h, &z);
    let values = (0..n).map(|i| h[(i, i)] * scale).collect();
    Ok(Eigen { values, vectors })
}

fn hessenberg(h: &mut CMat, q: &mut CMat) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = norm2(&v);
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm == 0.0 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in 0..n {
            let mut s = ZERO;
            for (idx, i) in (k + 1..n).enumerate() {
                s += v[idx].conj() * h[(i, j)];
            }
            s *= 2.0;
            for (idx, i) in (k + 1..n).enumerate() {
                let upd = v[idx] * s;
                h[(i, j)] -= upd;
            }
        }
        // H <- H (I - 2 v v^H), Q <- Q (I - 2 v v^H)
        for m in [&mut *h, &mut *q] {
            for i in 0..n {
                let mut s = ZERO;
                for (idx, j) in (k + 1..n).enumerate() {
                    s += m[(i, j)] * v[idx];
                }
                s *= 2.0;
                for (idx, j) in (k + 1..n).enumerate() {
                    let upd = s * v[idx].conj();
                    m[(i, j)] -= upd;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    if ax == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let nrm = libm::hypot(ax, y.norm());
    (ax / nrm, (x / ax) * y.conj() / nrm)
}

fn schur(h: &mut CMat, z: &mut CMat) -> Result<()> {
    let n = h.rows();
    let eps = f64::EPSILON;
    let max_iter = 60 * n.max(10);
    let mut total = 0;
    let mut hi = n - 1;
    let mut its = 0;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let mut s = abs1(h[(lo - 1, lo - 1)]) + abs1(h[(lo, lo)]);
            if s == 0.0 {
                s = 1.0;
            }
            if abs1(h[(lo, lo - 1)]) <= eps * s {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > max_iter {
            return Err(Error::NoConvergence { iterations: total });
        }

        let shift = if its % 11 == 10 {
            h[(hi, hi)] + Complex64::new(h[(hi, hi - 1)].re.abs() * 0.75, 0.0)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };

        for k in lo..hi {
            let (x, y) =
                if k == lo { (h[(lo, lo)] - shift, h[(lo + 1, lo)]) } else { (h[(k, k - 1)], h[(k + 1, k - 1)]) };
            let (c, s) = givens(x, y);
            let col_start = if k == lo { lo } else { k - 1 };
            for j in col_start..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
        }
    }
    Ok(())
}

fn schur_vectors(t: &CMat, z: &CMat) -> CMat {
    let n = t.rows();
    let tnorm = t.max_abs().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut vectors = CMat::zeros(n, n);
    let mut x = vec![ZERO; n];
    for k in 0..n {
        for v in x.iter_mut() {
            *v = ZERO;
        }
        x[k] = Complex64::new(1.0, 0.0);
        let lambda = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            x[i] = -s / d;
            // keep the partial solution bounded near coalescing eigenvalues
            let big = x[i].norm();
            if big > 1e100 {
                for v in x[i..=k].iter_mut() {
                    *v /= big;
                }
            }
        }
        let mut v: Vec<Complex64> = (0..n).map(|r| (0..=k).fold(ZERO, |acc, j| acc + z[(r, j)] * x[j])).collect();
        let nv = norm2(&v);
        for c in v.iter_mut() {
            *c /= nv;
        }
        vectors.set_column(k, &v);
    }
    vectors
}
