//! Banded storage and factorizations, plus small dense helpers.

use crate::error::{Error, Result};
use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Element `(i, j)` lives at `data[j * (kl + ku + 1) + ku + i - j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![T::zero(); n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.kl + self.ku + 1) + self.ku + i - j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            T::zero()
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn columns_of_row(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for j in self.columns_of_row(i) {
                s += self.data[self.idx(i, j)] * x[j];
            }
            *yi = s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `self + alpha * other`; both must share dimensions.
    pub fn axpy(&self, alpha: T, other: &Self) -> Self {
        let kl = self.kl.max(other.kl);
        let ku = self.ku.max(other.ku);
        let mut out = Self::zeros(self.n, kl, ku);
        for j in 0..self.n {
            for i in j.saturating_sub(ku)..(j + kl + 1).min(self.n) {
                out.set(i, j, self.get(i, j) + alpha * other.get(i, j));
            }
        }
        out
    }

    pub fn lu(&self) -> Result<BandLu<T>> {
        BandLu::factor(self)
    }
}

impl BandMatrix<f64> {
    pub fn to_complex(&self) -> BandMatrix<Complex64> {
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// `a * self + b * other` as a complex band matrix.
    pub fn complex_combination(&self, a: Complex64, other: &Self, b: Complex64) -> BandMatrix<Complex64> {
        let kl = self.kl.max(other.kl);
        let ku = self.ku.max(other.ku);
        let mut out = BandMatrix::zeros(self.n, kl, ku);
        for j in 0..self.n {
            for i in j.saturating_sub(ku)..(j + kl + 1).min(self.n) {
                out.set(i, j, a * self.get(i, j) + b * other.get(i, j));
            }
        }
        out
    }
}

/// LU factorization with partial pivoting in band storage (the upper band
/// widens to `kl + ku` through fill-in).
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    kv: usize,
    ab: Vec<T>,
    ipiv: Vec<usize>,
    min_pivot: f64,
}

impl<T: ComplexField<RealField = f64> + Copy> BandLu<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        j * (self.kl + self.kv + 1) + self.kv + i - j
    }

    fn factor(a: &BandMatrix<T>) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let kv = a.kl + a.ku;
        let ld = kl + kv + 1;
        let mut lu = Self { n, kl, kv, ab: vec![T::zero(); ld * n], ipiv: vec![0; n], min_pivot: f64::INFINITY };
        for j in 0..n {
            for i in j.saturating_sub(a.ku)..(j + kl + 1).min(n) {
                let k = lu.at(i, j);
                lu.ab[k] = a.get(i, j);
            }
        }
        let scale = a.max_abs();
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut piv = j;
            let mut best = lu.ab[lu.at(j, j)].modulus();
            for i in j + 1..=j + km {
                let v = lu.ab[lu.at(i, j)].modulus();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            lu.ipiv[j] = piv;
            lu.min_pivot = lu.min_pivot.min(best);
            if best <= f64::EPSILON * scale || best == 0.0 {
                return Err(Error::Singular { smallest: best });
            }
            let last = (j + kv).min(n - 1);
            if piv != j {
                for c in j..=last {
                    let (x, y) = (lu.at(j, c), lu.at(piv, c));
                    lu.ab.swap(x, y);
                }
            }
            let inv = T::one() / lu.ab[lu.at(j, j)];
            for i in j + 1..=j + km {
                let k = lu.at(i, j);
                lu.ab[k] *= inv;
            }
            for c in j + 1..=last {
                let t = lu.ab[lu.at(j, c)];
                if t == T::zero() {
                    continue;
                }
                for i in j + 1..=j + km {
                    let l = lu.ab[lu.at(i, j)];
                    let k = lu.at(i, c);
                    lu.ab[k] -= l * t;
                }
            }
        }
        Ok(lu)
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != T::zero() {
                for i in j + 1..=(j + self.kl).min(n - 1) {
                    b[i] -= self.ab[self.at(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.at(j, j)];
            let bj = b[j];
            if bj != T::zero() {
                for i in j.saturating_sub(self.kv)..j {
                    b[i] -= self.ab[self.at(i, j)] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    // l[i * (kd + 1) + (i - j)] = L(i, j)
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &BandMatrix<f64>) -> Result<Self> {
        let n = a.n();
        let kd = a.lower_bandwidth().max(a.upper_bandwidth());
        let w = kd + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(kd)..=i {
                let mut s = a.get(i, j);
                for k in i.saturating_sub(kd).max(j.saturating_sub(kd))..j {
                    s -= l[i * w + i - k] * l[j * w + j - k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Consistency(format!("matrix not positive definite at row {i}")));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + i - j] = s / l[j * w];
                }
            }
        }
        Ok(Self { n, kd, l })
    }

    pub fn solve_in_place<T>(&self, b: &mut [T])
    where
        T: Copy + std::ops::SubAssign + std::ops::Mul<f64, Output = T> + std::ops::DivAssign<f64>,
    {
        let w = self.kd + 1;
        for i in 0..self.n {
            for k in i.saturating_sub(self.kd)..i {
                let bk = b[k];
                b[i] -= bk * self.l[i * w + i - k];
            }
            b[i] /= self.l[i * w];
        }
        for i in (0..self.n).rev() {
            b[i] /= self.l[i * w];
            let bi = b[i];
            for k in i.saturating_sub(self.kd)..i {
                b[k] -= bi * self.l[i * w + i - k];
            }
        }
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn kron<T: ComplexField + Copy>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn one_norm<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.modulus()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn inf_norm<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.modulus()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.modulus()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values in descending order.
pub fn singular_values<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> DVector<f64> {
    m.clone().singular_values()
}
