//! Complex Schur decomposition: Householder reduction to Hessenberg form
//! followed by Wilkinson-shifted QR sweeps with Givens rotations.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `A = Q T Q^H` with `Q` unitary and `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub q: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.t.diagonal().iter().copied().collect()
    }
}

pub fn complex_schur(a: &DMatrix<Complex64>) -> Result<ComplexSchur> {
    assert!(a.is_square(), "Schur decomposition needs a square matrix");
    let n = a.nrows();
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut h = a.clone();
    let mut q = DMatrix::<Complex64>::identity(n, n);
    hessenberg(&mut h, &mut q);
    qr_iterate(&mut h, &mut q)?;
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok(ComplexSchur { q, t: h })
}

pub fn eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    Ok(complex_schur(a)?.eigenvalues())
}

fn hessenberg(h: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in k + 1..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v.iter_mut().skip(k + 1) {
            *vi /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in k..n {
            let s: Complex64 = (k + 1..n).map(|i| v[i].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] -= v[i] * s * 2.0;
            }
        }
        // H <- H (I - 2 v v^H), Q <- Q (I - 2 v v^H)
        for m in [&mut *h, &mut *q] {
            for i in 0..n {
                let s: Complex64 = (k + 1..n).map(|j| m[(i, j)] * v[j]).sum();
                for j in k + 1..n {
                    m[(i, j)] -= s * v[j].conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

#[derive(Clone, Copy)]
struct Givens {
    c: f64,
    s: Complex64,
}

impl Givens {
    /// Rotation mapping `(a, b)` to `(r, 0)`.
    fn new(a: Complex64, b: Complex64) -> Self {
        let (na, nb) = (a.norm(), b.norm());
        if nb == 0.0 {
            return Self { c: 1.0, s: ZERO };
        }
        if na == 0.0 {
            return Self { c: 0.0, s: b.conj() / nb };
        }
        let r = na.hypot(nb);
        Self { c: na / r, s: (a / na) * b.conj() / r }
    }

    fn rotate_rows(&self, m: &mut DMatrix<Complex64>, k: usize, cols: std::ops::Range<usize>) {
        for j in cols {
            let (x, y) = (m[(k, j)], m[(k + 1, j)]);
            m[(k, j)] = x * self.c + self.s * y;
            m[(k + 1, j)] = -self.s.conj() * x + y * self.c;
        }
    }

    /// Right multiplication by the adjoint rotation on columns `k, k+1`.
    fn rotate_cols(&self, m: &mut DMatrix<Complex64>, k: usize, rows: std::ops::Range<usize>) {
        for i in rows {
            let (x, y) = (m[(i, k)], m[(i, k + 1)]);
            m[(i, k)] = x * self.c + y * self.s.conj();
            m[(i, k + 1)] = -x * self.s + y * self.c;
        }
    }
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_iterate(h: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tiny = f64::MIN_POSITIVE.max(scale * f64::EPSILON * 1e-3);
    let max_iter = 100 * n;
    let mut hi = n - 1;
    let mut iter = 0;
    let mut since_deflation = 0;
    let mut rotations = Vec::with_capacity(n);
    while hi > 0 {
        // locate the active unreduced block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if sub <= f64::EPSILON * diag || sub <= tiny {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iter += 1;
        since_deflation += 1;
        if iter > max_iter {
            let defect = h[(hi, hi - 1)].norm();
            return Err(Error::NoConvergence { what: "complex Schur QR iteration".into(), defect });
        }
        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75, 0.5) * h[(hi, hi - 1)].norm()
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for k in lo..=hi {
            h[(k, k)] -= shift;
        }
        rotations.clear();
        for k in lo..hi {
            let g = Givens::new(h[(k, k)], h[(k + 1, k)]);
            g.rotate_rows(h, k, k..n);
            h[(k + 1, k)] = ZERO;
            rotations.push(g);
        }
        for (off, g) in rotations.iter().enumerate() {
            let k = lo + off;
            g.rotate_cols(h, k, 0..(k + 2).min(hi + 1));
            g.rotate_cols(q, k, 0..n);
        }
        for k in lo..=hi {
            h[(k, k)] += shift;
        }
    }
    Ok(())
}
