//! Open uniform B-spline bases of maximal regularity.
//!
//! Basis functions are indexed `0..dim()` in the natural order: function `j`
//! is supported on `[knots[j], knots[j + p + 1])`. Evaluation uses the
//! right-continuous element at interior breakpoints and the last element at
//! the right endpoint.

use crate::error::{invalid, Error, Result};

pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
}

/// Values and derivatives of the `p + 1` basis functions active at a point.
///
/// `values[d][r]` is the `d`-th derivative of basis function `first_active + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub first_active: usize,
    pub values: Vec<Vec<f64>>,
}

/// Clamped knot vector with `n` uniform elements on `[a, b]`.
pub fn open_uniform_knots(p: usize, n: usize, interval: (f64, f64)) -> Result<KnotVector> {
    let (a, b) = interval;
    if p == 0 || p > MAX_DEGREE {
        return Err(invalid(format!("degree must be in 1..={MAX_DEGREE}, got {p}")));
    }
    if n == 0 {
        return Err(invalid("number of elements must be positive"));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid(format!("degenerate interval [{a}, {b}]")));
    }
    let h = (b - a) / n as f64;
    let mut breakpoints: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
    breakpoints[n] = b;
    let mut knots = Vec::with_capacity(n + 2 * p + 1);
    knots.extend(std::iter::repeat_n(a, p));
    knots.extend_from_slice(&breakpoints);
    knots.extend(std::iter::repeat_n(b, p));
    Ok(KnotVector { degree: p, breakpoints, knots })
}

impl KnotVector {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Dimension of the spline space, `N + p`.
    pub fn dim(&self) -> usize {
        self.num_elements() + self.degree
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn meshsize(&self) -> f64 {
        let (a, b) = self.interval();
        (b - a) / self.num_elements() as f64
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    /// Element containing `t` (half-open, last element closed on the right).
    pub fn element_of(&self, t: f64) -> Result<usize> {
        let (a, b) = self.interval();
        let tol = 1e-14 * (b - a).abs().max(1.0);
        if !(t >= a - tol && t <= b + tol) {
            return Err(Error::OutOfDomain { point: t, lower: a, upper: b });
        }
        let n = self.num_elements();
        let e = ((t - a) / self.meshsize()).floor();
        let mut e = if e < 0.0 { 0 } else { (e as usize).min(n - 1) };
        // floor() can land one element off near breakpoints
        while e + 1 < n && t >= self.breakpoints[e + 1] {
            e += 1;
        }
        while e > 0 && t < self.breakpoints[e] {
            e -= 1;
        }
        Ok(e)
    }

    /// Basis values and derivatives up to `max_deriv` at `t`.
    pub fn eval_all(&self, t: f64, max_deriv: usize) -> Result<BasisEval> {
        if max_deriv > self.degree {
            return Err(invalid(format!(
                "derivative order {max_deriv} exceeds degree {}",
                self.degree
            )));
        }
        let e = self.element_of(t)?;
        Ok(self.eval_on_element(e, t, max_deriv))
    }

    /// Same as [`eval_all`](Self::eval_all) with the element fixed by the
    /// caller; `t` may sit on either end of element `e`.
    pub fn eval_on_element(&self, e: usize, t: f64, max_deriv: usize) -> BasisEval {
        let p = self.degree;
        let span = e + p;
        let u = &self.knots;
        let nd = max_deriv.min(p);

        // Triangular table: ndu[j][r] holds basis values (upper) and knot
        // differences (lower).
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; max_deriv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0].iter_mut().for_each(|v| *v = 0.0);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=nd {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        BasisEval { first_active: e, values: ders }
    }

    /// Value (or derivative) of a single basis function; zero off support.
    pub fn eval_basis(&self, index: usize, t: f64, deriv: usize) -> Result<f64> {
        let be = self.eval_all(t, deriv)?;
        let r = index.wrapping_sub(be.first_active);
        Ok(if r <= self.degree { be.values[deriv][r] } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    /// Literal Cox-de Boor recursion, zero-denominator terms dropped.
    fn cox_de_boor(knots: &[f64], j: usize, k: usize, t: f64, last: bool) -> f64 {
        if k == 0 {
            let (lo, hi) = (knots[j], knots[j + 1]);
            let inside = (t >= lo && t < hi) || (last && hi > lo && t == hi && hi == *knots.last().unwrap());
            return if inside { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[j + k] - knots[j];
        if d1 != 0.0 {
            v += (t - knots[j]) / d1 * cox_de_boor(knots, j, k - 1, t, last);
        }
        let d2 = knots[j + k + 1] - knots[j + 1];
        if d2 != 0.0 {
            v += (knots[j + k + 1] - t) / d2 * cox_de_boor(knots, j + 1, k - 1, t, last);
        }
        v
    }

    #[test]
    fn linear_knots() {
        let kv = open_uniform_knots(1, 2, (0.0, 1.0)).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(kv.dim(), 3);
    }

    #[test]
    fn quadratic_dimension() {
        let kv = open_uniform_knots(2, 4, (0.0, 1.0)).unwrap();
        assert_eq!(kv.dim(), 6);
        assert_eq!(kv.knots().len(), 4 + 2 * 2 + 1);
    }

    #[test]
    fn single_element_cubic_is_bernstein() {
        let kv = open_uniform_knots(3, 1, (0.0, 2.0)).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0]);
        let s: f64 = 0.3;
        let be = kv.eval_all(2.0 * s, 0).unwrap();
        let bern = [(1.0 - s).powi(3), 3.0 * s * (1.0 - s).powi(2), 3.0 * s * s * (1.0 - s), s.powi(3)];
        for r in 0..4 {
            assert!((be.values[0][r] - bern[r]).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(open_uniform_knots(0, 3, (0.0, 1.0)).is_err());
        assert!(open_uniform_knots(2, 0, (0.0, 1.0)).is_err());
        assert!(open_uniform_knots(2, 3, (1.0, 1.0)).is_err());
        let kv = open_uniform_knots(2, 3, (0.0, 1.0)).unwrap();
        assert!(matches!(kv.eval_all(1.5, 0), Err(Error::OutOfDomain { .. })));
        assert!(kv.eval_all(0.5, 3).is_err());
    }

    #[test]
    fn hat_functions() {
        let kv = open_uniform_knots(1, 2, (0.0, 1.0)).unwrap();
        let be = kv.eval_all(0.25, 1).unwrap();
        assert_eq!(be.first_active, 0);
        assert!((be.values[0][0] - 0.5).abs() < 1e-15);
        assert!((be.values[0][1] - 0.5).abs() < 1e-15);
        assert!((be.values[1][0] + 2.0).abs() < 1e-14);
        assert!((be.values[1][1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn right_continuous_and_endpoint_conventions() {
        let kv = open_uniform_knots(2, 4, (0.0, 1.0)).unwrap();
        assert_eq!(kv.eval_all(0.5, 0).unwrap().first_active, 2);
        assert_eq!(kv.eval_all(1.0, 0).unwrap().first_active, 3);
        let end = kv.eval_all(1.0, 0).unwrap();
        assert!((end.values[0][2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_recursive_oracle() {
        let kv = open_uniform_knots(2, 4, (0.0, 1.0)).unwrap();
        let be = kv.eval_all(0.25, 0).unwrap();
        for j in 0..kv.dim() {
            let oracle = cox_de_boor(kv.knots(), j, 2, 0.25, false);
            let r = j.wrapping_sub(be.first_active);
            let got = if r <= 2 { be.values[0][r] } else { 0.0 };
            assert!((got - oracle).abs() < 1e-15, "j={j}: {got} vs {oracle}");
        }
        for p in 1..=5 {
            let kv = open_uniform_knots(p, 7, (-1.0, 2.0)).unwrap();
            for &t in &[-1.0, -0.3, 0.0, 0.71, 1.999, 2.0] {
                let be = kv.eval_all(t, 0).unwrap();
                for j in 0..kv.dim() {
                    let oracle = cox_de_boor(kv.knots(), j, p, t, true);
                    let r = j.wrapping_sub(be.first_active);
                    let got = if r <= p { be.values[0][r] } else { 0.0 };
                    assert!((got - oracle).abs() < 1e-13, "p={p} t={t} j={j}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for p in 1..=6 {
            let kv = open_uniform_knots(p, 5, (0.0, 1.0)).unwrap();
            let t = 0.537;
            let be = kv.eval_all(t, p).unwrap();
            let step = 1e-6;
            for d in 1..=p.min(2) {
                for r in 0..=p {
                    let j = be.first_active + r;
                    let f = |s: f64| kv.eval_basis(j, s, d - 1).unwrap();
                    let fd = (f(t + step) - f(t - step)) / (2.0 * step);
                    let scale = 1.0 + be.values[d][r].abs();
                    assert!((fd - be.values[d][r]).abs() < 1e-5 * scale, "p={p} d={d} r={r}");
                }
            }
        }
    }

    #[test]
    fn continuity_across_breakpoints() {
        for p in 1..=6 {
            let n = 6;
            let kv = open_uniform_knots(p, n, (0.0, 3.0)).unwrap();
            let h = kv.meshsize();
            for e in 1..n {
                let t = kv.breakpoints()[e];
                let left = kv.eval_on_element(e - 1, t, p);
                let right = kv.eval_on_element(e, t, p);
                for d in 0..p {
                    for j in 0..kv.dim() {
                        let get = |be: &BasisEval| {
                            let r = j.wrapping_sub(be.first_active);
                            if r <= p { be.values[d][r] } else { 0.0 }
                        };
                        let diff = (get(&left) - get(&right)).abs();
                        assert!(diff <= 1e-9 * h.powi(-(d as i32)), "p={p} d={d} e={e} j={j}: {diff}");
                    }
                }
            }
        }
    }

    #[test]
    fn reproduces_polynomials() {
        // Interpolate a degree-p polynomial at the Greville abscissae, then
        // check the spline agrees with it everywhere.
        for p in 1..=6 {
            let kv = open_uniform_knots(p, 5, (-1.0, 2.0)).unwrap();
            let poly = |t: f64| (0..=p).map(|k| (0.3 + k as f64 * 0.7) * t.powi(k as i32)).sum::<f64>();
            let n = kv.dim();
            let greville: Vec<f64> =
                (0..n).map(|j| kv.knots()[j + 1..=j + p].iter().sum::<f64>() / p as f64).collect();
            let mut a = DMatrix::<f64>::zeros(n, n);
            for (i, &g) in greville.iter().enumerate() {
                for j in 0..n {
                    a[(i, j)] = kv.eval_basis(j, g, 0).unwrap();
                }
            }
            let rhs = DVector::from_iterator(n, greville.iter().map(|&g| poly(g)));
            let coef = a.lu().solve(&rhs).unwrap();
            for k in 0..=40 {
                let t = -1.0 + 3.0 * k as f64 / 40.0;
                let be = kv.eval_all(t, 0).unwrap();
                let s: f64 = (0..=p).map(|r| coef[be.first_active + r] * be.values[0][r]).sum();
                assert!((s - poly(t)).abs() < 1e-11, "p={p} t={t}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn partition_of_unity(p in 1usize..=6, n in 1usize..20, s in 0.0f64..=1.0) {
            let kv = open_uniform_knots(p, n, (-2.0, 5.0)).unwrap();
            let t = -2.0 + 7.0 * s;
            let be = kv.eval_all(t, 1).unwrap();
            prop_assert_eq!(be.values[0].len(), p + 1);
            let sum: f64 = be.values[0].iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            let dsum: f64 = be.values[1].iter().sum();
            prop_assert!(dsum.abs() <= 1e-11 / kv.meshsize());
        }
    }
}
