//! Band structure of the temporal matrices and their symbol polynomials.

use crate::eigen::eigenvalues;
use crate::error::{invalid, Error, Result};
use crate::temporal::assemble_temporal;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Band Toeplitz matrix plus dense corrections in the two corner blocks.
#[derive(Debug, Clone)]
pub struct NearlyToeplitz {
    pub size: usize,
    /// Number of bands below the diagonal.
    pub lower: usize,
    /// Number of bands above the diagonal.
    pub upper: usize,
    /// `band[j + lower]` is the value on offset `j` (column minus row).
    pub band: Vec<Complex64>,
    pub top_left: DMatrix<Complex64>,
    pub bottom_right: DMatrix<Complex64>,
    pub deviation_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Corner {
    TopLeft,
    BottomRight,
}

impl NearlyToeplitz {
    pub fn corner_size(&self) -> usize {
        self.lower + self.upper
    }

    pub fn band_value(&self, offset: isize) -> Complex64 {
        let idx = offset + self.lower as isize;
        if idx < 0 || idx as usize >= self.band.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.band[idx as usize]
        }
    }

    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.size;
        let w = self.corner_size();
        DMatrix::from_fn(n, n, |r, c| {
            let mut v = self.band_value(c as isize - r as isize);
            if r < w && c < w {
                v += self.top_left[(r, c)];
            }
            if r >= n - w && c >= n - w {
                v += self.bottom_right[(r + w - n, c + w - n)];
            }
            v
        })
    }

    /// Corner entries deviating from the band by more than `tol` times the
    /// largest band coefficient. Indices are local to the corner block.
    pub fn deviation_positions(&self, tol: f64) -> Vec<(Corner, usize, usize)> {
        let scale = self.band.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut out = Vec::new();
        for (corner, block) in [(Corner::TopLeft, &self.top_left), (Corner::BottomRight, &self.bottom_right)] {
            for c in 0..block.ncols() {
                for r in 0..block.nrows() {
                    if block[(r, c)].norm() > tol * scale {
                        out.push((corner, r, c));
                    }
                }
            }
        }
        out
    }
}

const DEVIATION_TOL: f64 = 1e-11;

pub fn extract_nearly_toeplitz(m: &DMatrix<Complex64>, lower: usize, upper: usize) -> Result<NearlyToeplitz> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let w = lower + upper;
    let required = 2 * w + 1;
    if n < required {
        return Err(Error::TooSmall { size: n, required });
    }
    let mid = w;
    let band: Vec<Complex64> = (0..=w).map(|t| m[(mid, mid + t - lower)]).collect();
    let mut out = NearlyToeplitz {
        size: n,
        lower,
        upper,
        band,
        top_left: DMatrix::zeros(w, w),
        bottom_right: DMatrix::zeros(w, w),
        deviation_count: 0,
    };
    let scale = out.band.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for c in 0..n {
        for r in 0..n {
            let dev = m[(r, c)] - out.band_value(c as isize - r as isize);
            if r < w && c < w {
                out.top_left[(r, c)] = dev;
            } else if r >= n - w && c >= n - w {
                out.bottom_right[(r + w - n, c + w - n)] = dev;
            } else if dev.norm() > 1e-12 * scale {
                return Err(Error::Consistency(format!(
                    "entry ({r}, {c}) deviates from the band outside the corner blocks"
                )));
            }
        }
    }
    out.deviation_count = out.deviation_positions(DEVIATION_TOL).len();
    Ok(out)
}

/// `q(z) = sum_t coeffs[t] z^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPolynomial {
    pub coeffs: Vec<Complex64>,
}

impl SymbolPolynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self { coeffs: coeffs.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    /// Degree ignoring exactly-zero leading coefficients; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|v| *v != Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(t, &c)| c * t as f64).collect() }
    }

    pub fn linear_combination(a: Complex64, qa: &Self, b: Complex64, qb: &Self) -> Self {
        let len = qa.coeffs.len().max(qb.coeffs.len());
        let get = |q: &Self, t: usize| q.coeffs.get(t).copied().unwrap_or_default();
        Self { coeffs: (0..len).map(|t| a * get(qa, t) + b * get(qb, t)).collect() }
    }
}

pub fn symbol_polynomial(nt: &NearlyToeplitz) -> SymbolPolynomial {
    SymbolPolynomial { coeffs: nt.band.clone() }
}

/// Symbol polynomials of the scaled stiffness-like and advection-like
/// temporal families for one degree.
#[derive(Debug, Clone)]
pub struct SplineSymbols {
    pub degree: usize,
    pub stiffness: SymbolPolynomial,
    pub advection: SymbolPolynomial,
}

const REAL_RESIDUE_TOL: f64 = 1e-12;

impl SplineSymbols {
    pub fn new(p: usize) -> Result<Self> {
        let (b, c) = temporal_bands(p)?;
        Ok(Self { degree: p, stiffness: symbol_polynomial(&b), advection: symbol_polynomial(&c) })
    }

    /// Symbol of `i hB - rho C`.
    pub fn system(&self, rho: f64) -> SymbolPolynomial {
        SymbolPolynomial::linear_combination(I, &self.stiffness, Complex64::new(-rho, 0.0), &self.advection)
    }

    fn rotated(&self, q: &SymbolPolynomial, theta: f64) -> Complex64 {
        Complex64::from_polar(1.0, -(self.degree as f64) * theta) * q.eval(Complex64::from_polar(1.0, theta))
    }

    pub fn b_p(&self, theta: f64) -> Result<f64> {
        let w = -self.rotated(&self.stiffness, theta);
        real_part_checked(w, "B_p")
    }

    pub fn c_p(&self, theta: f64) -> Result<f64> {
        let w = I * self.rotated(&self.advection, theta);
        real_part_checked(w, "C_p")
    }

    pub fn k_p(&self, theta: f64, rho: f64) -> Result<f64> {
        Ok(self.b_p(theta)? - rho * self.c_p(theta)?)
    }
}

fn real_part_checked(w: Complex64, what: &str) -> Result<f64> {
    if w.im.abs() > REAL_RESIDUE_TOL {
        return Err(Error::Consistency(format!("{what} has imaginary residue {:e}", w.im)));
    }
    Ok(w.re)
}

/// Nearly-Toeplitz views of `h B` and `C` for degree `p`.
pub fn temporal_bands(p: usize) -> Result<(NearlyToeplitz, NearlyToeplitz)> {
    let tm = assemble_temporal(p, 4 * p + 4, 1.0)?;
    let h = tm.meshsize();
    let to_c = |m: &DMatrix<f64>, s: f64| m.map(|v| Complex64::new(s * v, 0.0));
    let b = extract_nearly_toeplitz(&to_c(&tm.b, h), p + 1, p - 1)?;
    let c = extract_nearly_toeplitz(&to_c(&tm.c, 1.0), p + 1, p - 1)?;
    Ok((b, c))
}

pub fn eval_bp_cp(p: usize, theta: f64) -> Result<(f64, f64)> {
    if !(-PI..=PI).contains(&theta) {
        return Err(Error::OutOfDomain { point: theta, lower: -PI, upper: PI });
    }
    let s = SplineSymbols::new(p)?;
    Ok((s.b_p(theta)?, s.c_p(theta)?))
}

/// Series form of `(B_p, C_p)` built from [`uhat`], valid on `(0, pi]`.
pub fn bp_cp_series(p: usize, theta: f64, tol: f64) -> Result<(f64, f64)> {
    let factor = (2.0 - 2.0 * theta.cos()).powi(p as i32 + 1);
    Ok((-factor * uhat(2 * p, theta, tol)?, -factor * uhat(2 * p + 1, theta, tol)?))
}

const UHAT_MAX_TERMS: usize = 1 << 20;

/// `sum_{j in Z} (theta + 2 j pi)^{-k}` for `theta` in `(0, pi]`.
///
/// Terms with `|j| < J` are summed directly; both tails use Euler-Maclaurin
/// corrections, and `J` grows until the first omitted correction is below `tol`.
pub fn uhat(k: usize, theta: f64, tol: f64) -> Result<f64> {
    if k < 2 {
        return Err(invalid(format!("uhat needs k >= 2, got {k}")));
    }
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::OutOfDomain { point: theta, lower: 0.0, upper: PI });
    }
    let sign_neg = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut cutoff = 8usize;
    loop {
        // positive side: g(x) = (theta + 2 pi x)^{-k}, negative: (2 pi x - theta)^{-k}
        let (tail_pos, rem_pos) = em_tail(k, theta, cutoff);
        let (tail_neg, rem_neg) = em_tail(k, -theta, cutoff);
        if rem_pos + rem_neg <= tol {
            let mut sum = theta.powi(-(k as i32));
            for j in 1..cutoff {
                let x = 2.0 * PI * j as f64;
                sum += (theta + x).powi(-(k as i32)) + sign_neg * (x - theta).powi(-(k as i32));
            }
            return Ok(sum + tail_pos + sign_neg * tail_neg);
        }
        if cutoff >= UHAT_MAX_TERMS {
            return Err(Error::NoConvergence { what: "uhat series".into(), defect: rem_pos + rem_neg });
        }
        cutoff *= 2;
    }
}

/// `sum_{j >= J} (a + 2 pi j)^{-k}` and a bound on the neglected remainder.
fn em_tail(k: usize, a: f64, cutoff: usize) -> (f64, f64) {
    let b = 2.0 * PI;
    let y = a + b * cutoff as f64;
    let kf = k as f64;
    // r-th derivative of (a + b x)^{-k} at x = J
    let deriv = |r: usize| -> f64 {
        let mut coef = 1.0;
        for i in 0..r {
            coef *= -(kf + i as f64) * b;
        }
        coef * y.powf(-kf - r as f64)
    };
    let integral = y.powf(1.0 - kf) / (b * (kf - 1.0));
    let value = integral + 0.5 * deriv(0) - deriv(1) / 12.0 + deriv(3) / 720.0 - deriv(5) / 30240.0;
    let remainder = (deriv(7) / 1209600.0).abs() * 2.0;
    (value, remainder)
}

/// Root counts inside, on, and outside the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct RootType {
    pub inside: usize,
    pub on: usize,
    pub outside: usize,
    pub roots: Vec<Complex64>,
}

impl RootType {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.inside, self.on, self.outside)
    }
}

pub const UNIT_CIRCLE_TOL: f64 = 1e-8;

pub fn classify_roots(q: &SymbolPolynomial, tol: f64) -> Result<RootType> {
    let roots = polynomial_roots(q)?;
    let mut rt = RootType { inside: 0, on: 0, outside: 0, roots };
    for z in &rt.roots {
        let r = z.norm();
        if r < 1.0 - tol {
            rt.inside += 1;
        } else if r <= 1.0 + tol {
            rt.on += 1;
        } else {
            rt.outside += 1;
        }
    }
    Ok(rt)
}

/// Roots from the companion matrix, each refined by guarded Newton steps.
pub fn polynomial_roots(q: &SymbolPolynomial) -> Result<Vec<Complex64>> {
    let degree = q.degree().ok_or_else(|| invalid("zero polynomial has no root type"))?;
    let zeros_at_origin = q.coeffs.iter().position(|v| *v != Complex64::new(0.0, 0.0)).unwrap_or(0);
    let core = &q.coeffs[zeros_at_origin..=degree];
    let d = core.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    if d == 0 {
        return Ok(roots);
    }
    let lead = core[d];
    let mut companion = DMatrix::zeros(d, d);
    for i in 1..d {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..d {
        companion[(i, d - 1)] = -core[i] / lead;
    }
    let trimmed = SymbolPolynomial::new(core.to_vec());
    let dq = trimmed.derivative();
    for mut z in eigenvalues(&companion)? {
        for _ in 0..3 {
            let f = trimmed.eval(z);
            let df = dq.eval(z);
            if df.norm() == 0.0 {
                break;
            }
            let cand = z - f / df;
            if trimmed.eval(cand).norm() < f.norm() {
                z = cand;
            } else {
                break;
            }
        }
        roots.push(z);
    }
    Ok(roots)
}

/// True when the coefficients equal their conjugate reversal up to a
/// unimodular factor, so the root set is closed under `z -> 1 / conj(z)`.
/// For real coefficients this is the usual palindromic condition.
pub fn is_reciprocal(q: &SymbolPolynomial, tol: f64) -> bool {
    let Some(deg) = q.degree() else { return true };
    let start = q.coeffs.iter().position(|v| *v != Complex64::new(0.0, 0.0)).unwrap_or(0);
    let c = &q.coeffs[start..=deg];
    let rev: Vec<Complex64> = c.iter().rev().map(|v| v.conj()).collect();
    let norm2: f64 = rev.iter().map(|v| v.norm_sqr()).sum();
    let factor: Complex64 = rev.iter().zip(c).map(|(r, v)| r.conj() * v).sum::<Complex64>() / norm2;
    if (factor.norm() - 1.0).abs() > tol {
        return false;
    }
    let diff: f64 = c.iter().zip(&rev).map(|(v, r)| (v - factor * r).norm_sqr()).sum::<f64>().sqrt();
    diff <= tol * norm2.sqrt()
}

pub const DEGENERATE_RHO: f64 = 1e-8;

/// Zeros of `K_p(., rho)` on `[-pi, pi]`: `0` and one further simple zero.
pub fn locate_unit_zeros(p: usize, rho: f64) -> Result<Vec<f64>> {
    let symbols = SplineSymbols::new(p)?;
    locate_unit_zeros_with(&symbols, rho)
}

pub fn locate_unit_zeros_with(symbols: &SplineSymbols, rho: f64) -> Result<Vec<f64>> {
    if !rho.is_finite() || rho.abs() < DEGENERATE_RHO {
        return Err(invalid(format!("rho = {rho} is degenerate: the two zeros merge at the origin")));
    }
    // B_p / C_p is odd, so negative rho mirrors the positive case
    let target = rho.abs();
    let f = |theta: f64| symbols.k_p(theta, target);
    let mut hi = PI;
    if f(hi)? >= 0.0 {
        return Err(Error::NoConvergence { what: "zero bracket at theta = pi".into(), defect: f(hi)? });
    }
    let mut lo = PI / 2.0;
    let mut halvings = 0;
    while f(lo)? <= 0.0 {
        hi = lo;
        lo *= 0.5;
        halvings += 1;
        if halvings > 1100 {
            return Err(Error::NoConvergence { what: "zero bracket near theta = 0".into(), defect: lo });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = if f(lo)?.abs() <= f(hi)?.abs() { lo } else { hi };
    Ok(vec![0.0, theta.copysign(rho)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn pure_toeplitz_has_no_deviation() {
        let n = 12;
        let m = DMatrix::from_fn(n, n, |r, col| match col as isize - r as isize {
            -2 => c(3.0),
            -1 => c(-1.0),
            0 => c(2.0),
            1 => c(0.5),
            _ => c(0.0),
        });
        let nt = extract_nearly_toeplitz(&m, 2, 1).unwrap();
        assert_eq!(nt.deviation_count, 0);
        assert_eq!(nt.band, vec![c(3.0), c(-1.0), c(2.0), c(0.5)]);
        assert!(nt.top_left.iter().all(|v| v.norm() == 0.0));
        assert!((nt.reconstruct() - m).camax() == 0.0);
        assert!(matches!(extract_nearly_toeplitz(&DMatrix::zeros(6, 6), 2, 1), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn stray_entry_is_rejected() {
        let mut m = DMatrix::from_fn(12, 12, |r, col| if r == col { c(1.0) } else { c(0.0) });
        m[(6, 0)] = c(1.0);
        assert!(matches!(extract_nearly_toeplitz(&m, 1, 1), Err(Error::Consistency(_))));
    }

    #[test]
    fn linear_bands() {
        let (b, cc) = temporal_bands(1).unwrap();
        assert_eq!(b.deviation_count, 0);
        assert_eq!(cc.deviation_count, 0);
        let bb: Vec<f64> = b.band.iter().map(|v| v.re).collect();
        assert!((bb[0] + 1.0).abs() < 1e-13 && (bb[1] - 2.0).abs() < 1e-13 && (bb[2] + 1.0).abs() < 1e-13);
    }

    #[test]
    fn quadratic_symbols() {
        let s = SplineSymbols::new(2).unwrap();
        let qb = [-1.0, -2.0, 6.0, -2.0, -1.0].map(|v| v / 6.0);
        let qc = [-1.0, -10.0, 0.0, 10.0, 1.0].map(|v| v / 24.0);
        for t in 0..5 {
            assert_abs_diff_eq!(s.stiffness.coeffs[t].re, qb[t], epsilon = 1e-14);
            assert_abs_diff_eq!(s.advection.coeffs[t].re, qc[t], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(s.b_p(PI).unwrap(), -4.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s.c_p(PI / 2.0).unwrap(), -5.0 / 6.0, epsilon = 1e-13);
    }

    #[test]
    fn single_coefficient_symbol() {
        let nt = NearlyToeplitz {
            size: 9,
            lower: 2,
            upper: 1,
            band: vec![c(0.0), c(0.0), c(4.0), c(0.0)],
            top_left: DMatrix::zeros(3, 3),
            bottom_right: DMatrix::zeros(3, 3),
            deviation_count: 0,
        };
        let q = symbol_polynomial(&nt);
        assert_eq!(q.degree(), Some(2));
        let z = Complex64::new(0.3, 0.7);
        assert!((q.eval(z) - z * z * 4.0).norm() < 1e-15);
    }

    #[test]
    fn uhat_closed_forms() {
        assert_abs_diff_eq!(uhat(2, PI, 1e-15).unwrap(), 0.25, epsilon = 1e-14);
        assert!(uhat(2, 0.0, 1e-14).is_err());
        for &theta in &[0.1, 0.7, 1.5, 2.9, PI - 1e-9] {
            let exact = 1.0 / (4.0 * (theta / 2.0).sin().powi(2));
            assert_abs_diff_eq!(uhat(2, theta, 1e-15).unwrap(), exact, epsilon = 1e-12 * exact);
        }
        // derivative recursion U_3 = -U_2' / 2
        let theta = PI / 2.0;
        let h = 1e-5;
        let u2 = |t: f64| 1.0 / (4.0 * (t / 2.0).sin().powi(2));
        let fd = (u2(theta + h) - u2(theta - h)) / (2.0 * h);
        assert_abs_diff_eq!(uhat(3, theta, 1e-14).unwrap(), -fd / 2.0, epsilon = 1e-6);
        assert!(uhat(4, 1.0, 1e-14).unwrap() > 0.0);
        assert!(uhat(1, 1.0, 1e-14).is_err());
    }

    #[test]
    fn simple_root_types() {
        let lin = SymbolPolynomial::from_real(&[-2.0, 1.0]);
        assert_eq!(classify_roots(&lin, UNIT_CIRCLE_TOL).unwrap().counts(), (0, 0, 1));
        let sq = SymbolPolynomial::from_real(&[-1.0, 0.0, 1.0]);
        assert_eq!(classify_roots(&sq, UNIT_CIRCLE_TOL).unwrap().counts(), (0, 2, 0));
        let shifted = SymbolPolynomial::from_real(&[0.0, 0.0, -0.25, 1.0]);
        assert_eq!(classify_roots(&shifted, UNIT_CIRCLE_TOL).unwrap().counts(), (3, 0, 0));
        assert!(classify_roots(&SymbolPolynomial::from_real(&[0.0, 0.0]), 1e-8).is_err());
    }

    #[test]
    fn reciprocity_examples() {
        assert!(is_reciprocal(&SymbolPolynomial::from_real(&[1.0, 0.0, 1.0]), 1e-12));
        assert!(!is_reciprocal(&SymbolPolynomial::from_real(&[2.0, 1.0]), 1e-12));
        assert!(is_reciprocal(&SymbolPolynomial::from_real(&[1.0, -1.0]), 1e-12));
    }

    #[test]
    fn unit_zero_of_quadratic() {
        let z = locate_unit_zeros(2, 8.0 / 5.0).unwrap();
        assert_eq!(z[0], 0.0);
        assert_abs_diff_eq!(z[1], PI / 2.0, epsilon = 1e-12);
        let z = locate_unit_zeros(2, -8.0 / 5.0).unwrap();
        assert_abs_diff_eq!(z[1], -PI / 2.0, epsilon = 1e-12);
        assert!(locate_unit_zeros(2, 1e-9).is_err());
    }
}
