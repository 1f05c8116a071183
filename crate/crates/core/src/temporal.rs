//! Temporal Petrov-Galerkin matrices and the scalar model problem.
//!
//! Trial functions are the splines `phi_1..phi_n` (the first basis function
//! carries the initial value), test functions are `phi_0..phi_{n-1}`, with
//! `n = Nt + p - 1`. Rows index test functions and columns trial functions.

use crate::bspline::{open_uniform_knots, KnotVector, MAX_DEGREE};
use crate::error::{invalid, Error, Result};
use crate::linalg::singular_values;
use crate::quadrature::{gauss_legendre_rule, QuadratureRule};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct TemporalMatrices {
    pub knots: KnotVector,
    /// `(phi'_{c+1}, phi'_r)` for row `r`, column `c`.
    pub b: DMatrix<f64>,
    /// `(phi'_{c+1}, phi_r)`.
    pub c: DMatrix<f64>,
    /// `(phi'_0, phi'_r)`, the column belonging to the first basis function.
    pub b_first: DVector<f64>,
    /// `(phi'_0, phi_r)`.
    pub c_first: DVector<f64>,
}

impl TemporalMatrices {
    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn num_elements(&self) -> usize {
        self.knots.num_elements()
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn meshsize(&self) -> f64 {
        self.knots.meshsize()
    }

    pub fn t_final(&self) -> f64 {
        self.knots.interval().1
    }

    /// `i B - mu C`.
    pub fn pencil(&self, mu: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| Complex64::new(-mu * self.c[(r, c)], self.b[(r, c)]))
    }
}

/// Quadrature order that integrates all spline products exactly.
pub(crate) fn exact_order(p: usize) -> usize {
    p + 3
}

pub fn assemble_temporal(p: usize, nt: usize, t_final: f64) -> Result<TemporalMatrices> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid(format!("final time must be positive, got {t_final}")));
    }
    if p == 0 || p > MAX_DEGREE {
        return Err(invalid(format!("degree must be in 1..={MAX_DEGREE}, got {p}")));
    }
    if nt < p {
        return Err(Error::TooSmall { size: nt, required: p });
    }
    let knots = open_uniform_knots(p, nt, (0.0, t_final))?;
    let n = nt + p - 1;
    let mut b = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    let mut b_first = DVector::zeros(n);
    let mut c_first = DVector::zeros(n);
    let rule = gauss_legendre_rule(exact_order(p))?;
    for e in 0..nt {
        let (lo, hi) = knots.element_bounds(e);
        for (t, w) in rule.mapped(lo, hi) {
            let ev = knots.eval_on_element(e, t, 1);
            let (vals, ders) = (&ev.values[0], &ev.values[1]);
            for (a, &val_test) in vals.iter().enumerate() {
                let row = ev.first_active + a;
                if row >= n {
                    continue;
                }
                let der_test = ders[a];
                for (bb, &der_trial) in ders.iter().enumerate() {
                    let trial = ev.first_active + bb;
                    if trial == 0 {
                        b_first[row] += w * der_trial * der_test;
                        c_first[row] += w * der_trial * val_test;
                    } else {
                        b[(row, trial - 1)] += w * der_trial * der_test;
                        c[(row, trial - 1)] += w * der_trial * val_test;
                    }
                }
            }
        }
    }
    Ok(TemporalMatrices { knots, b, c, b_first, c_first })
}

/// Mesh-independent form `K(rho) = i hB - rho C` with `rho = mu h`.
#[derive(Debug, Clone)]
pub struct ScaledSystem {
    pub degree: usize,
    pub rho: f64,
    pub scaled_b: DMatrix<f64>,
    pub scaled_c: DMatrix<f64>,
    pub matrix: DMatrix<Complex64>,
}

pub fn scaled_system(p: usize, nt: usize, rho: f64) -> Result<ScaledSystem> {
    let tm = assemble_temporal(p, nt, 1.0)?;
    let h = tm.meshsize();
    let scaled_b = &tm.b * h;
    let scaled_c = tm.c;
    let matrix = DMatrix::from_fn(scaled_b.nrows(), scaled_b.ncols(), |r, c| {
        Complex64::new(-rho * scaled_c[(r, c)], scaled_b[(r, c)])
    });
    Ok(ScaledSystem { degree: p, rho, scaled_b, scaled_c, matrix })
}

/// Right-hand side of the scalar problem `i u' + mu u = f`, `u(0) = psi0`,
/// after lifting the initial value with the constant `psi0`.
pub fn scalar_rhs(
    tm: &TemporalMatrices,
    mu: f64,
    psi0: Complex64,
    source: &dyn Fn(f64) -> Complex64,
) -> Result<DVector<Complex64>> {
    let n = tm.dim();
    let mut rhs = DVector::zeros(n);
    let rule = gauss_legendre_rule(exact_order(tm.degree()) + 2)?;
    for e in 0..tm.num_elements() {
        let (lo, hi) = tm.knots.element_bounds(e);
        for (t, w) in rule.mapped(lo, hi) {
            let ev = tm.knots.eval_on_element(e, t, 1);
            let f = source(t);
            for (a, &d) in ev.values[1].iter().enumerate() {
                let row = ev.first_active + a;
                if row < n {
                    rhs[row] += f * (w * d);
                }
            }
        }
    }
    // Only phi_0 is nonzero at t = 0.
    rhs[0] += psi0 * mu;
    Ok(rhs)
}

/// Spline solution of the scalar problem.
#[derive(Debug, Clone)]
pub struct ScalarSolution {
    pub knots: KnotVector,
    /// Coefficients of all `n + 1` basis functions, the first equal to `psi0`.
    pub coefficients: Vec<Complex64>,
}

impl ScalarSolution {
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        self.eval_derivative(t, 0)
    }

    pub fn eval_derivative(&self, t: f64, deriv: usize) -> Result<Complex64> {
        let e = self.knots.element_of(t)?;
        let ev = self.knots.eval_on_element(e, t, deriv.min(self.knots.degree()));
        if deriv > self.knots.degree() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(ev.values[deriv]
            .iter()
            .enumerate()
            .map(|(a, &v)| self.coefficients[ev.first_active + a] * v)
            .sum())
    }
}

pub fn solve_scalar_ivp(
    p: usize,
    nt: usize,
    t_final: f64,
    mu: f64,
    psi0: Complex64,
    source: &dyn Fn(f64) -> Complex64,
) -> Result<ScalarSolution> {
    let tm = assemble_temporal(p, nt, t_final)?;
    let k = tm.pencil(mu);
    let sv = singular_values(&k);
    let frob = k.norm();
    let smallest = sv.min();
    if smallest < 1e-13 * frob {
        return Err(Error::Singular { smallest });
    }
    let rhs = scalar_rhs(&tm, mu, psi0, source)?;
    let u = k.lu().solve(&rhs).ok_or(Error::Singular { smallest })?;
    let mut coefficients = Vec::with_capacity(u.len() + 1);
    coefficients.push(psi0);
    coefficients.extend(u.iter().map(|&v| v + psi0));
    Ok(ScalarSolution { knots: tm.knots, coefficients })
}

/// `psi(t) = e^{i mu t} psi0 - i int_0^t e^{i mu (t - s)} f(s) ds`, with the
/// integral computed adaptively.
pub fn exact_ivp_solution(mu: f64, psi0: Complex64, source: &dyn Fn(f64) -> Complex64, t: f64) -> Complex64 {
    let phase = |s: f64| Complex64::from_polar(1.0, mu * s);
    let integrand = |s: f64| phase(t - s) * source(s);
    phase(t) * psi0 - I * adaptive_integral(&integrand, 0.0, t, 1e-13)
}

/// Adaptive Gauss-Legendre integration by interval bisection.
pub fn adaptive_integral(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    let rule = gauss_legendre_rule(10).expect("static rule");
    let whole = integrate_rule(&rule, f, a, b);
    refine(&rule, f, a, b, whole, tol, 0)
}

fn integrate_rule(rule: &QuadratureRule, f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
    rule.mapped(a, b).map(|(x, w)| f(x) * w).sum()
}

fn refine(
    rule: &QuadratureRule,
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: usize,
) -> Complex64 {
    let mid = 0.5 * (a + b);
    let left = integrate_rule(rule, f, a, mid);
    let right = integrate_rule(rule, f, mid, b);
    let split = left + right;
    if depth >= 40 || (split - whole).norm() <= tol * split.norm().max(1.0) {
        return split;
    }
    refine(rule, f, a, mid, left, tol, depth + 1) + refine(rule, f, mid, b, right, tol, depth + 1)
}

/// Relative L2(0, T) error of a scalar solution against the exact one.
pub fn scalar_l2_error(
    sol: &ScalarSolution,
    mu: f64,
    psi0: Complex64,
    source: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let rule = gauss_legendre_rule(sol.knots.degree() + 5)?;
    let (mut err, mut norm) = (0.0, 0.0);
    for e in 0..sol.knots.num_elements() {
        let (lo, hi) = sol.knots.element_bounds(e);
        for (t, w) in rule.mapped(lo, hi) {
            let exact = exact_ivp_solution(mu, psi0, source, t);
            err += w * (sol.eval(t)? - exact).norm_sqr();
            norm += w * exact.norm_sqr();
        }
    }
    Ok((err / norm).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero(_: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(assemble_temporal(3, 2, 1.0), Err(Error::TooSmall { .. })));
        assert!(assemble_temporal(0, 4, 1.0).is_err());
        assert!(assemble_temporal(2, 4, 0.0).is_err());
    }

    #[test]
    fn linear_matrices_have_closed_form() {
        let nt = 6;
        let tm = assemble_temporal(1, nt, 1.5).unwrap();
        let h = 1.5 / nt as f64;
        let n = tm.dim();
        assert_eq!(n, nt);
        for r in 0..n {
            for c in 0..n {
                let (eb, ec) = match r as isize - c as isize {
                    0 => (-1.0 / h, 0.5),
                    1 => (2.0 / h, 0.0),
                    2 => (-1.0 / h, -0.5),
                    _ => (0.0, 0.0),
                };
                assert_abs_diff_eq!(tm.b[(r, c)], eb, epsilon = 1e-12);
                assert_abs_diff_eq!(tm.c[(r, c)], ec, epsilon = 1e-14);
            }
        }
        assert_abs_diff_eq!(tm.b_first[0], 1.0 / h, epsilon = 1e-12);
        assert_abs_diff_eq!(tm.b_first[1], -1.0 / h, epsilon = 1e-12);
        assert_abs_diff_eq!(tm.c_first[0], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(tm.c_first[1], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn rows_sum_against_first_column() {
        // sum of all trial derivatives vanishes by partition of unity
        for p in 1..=5 {
            let tm = assemble_temporal(p, 3 * p + 2, 2.0).unwrap();
            for r in 0..tm.dim() {
                let sb: f64 = tm.b.row(r).sum() + tm.b_first[r];
                let sc: f64 = tm.c.row(r).sum() + tm.c_first[r];
                assert!(sb.abs() < 1e-10 / tm.meshsize(), "p={p} r={r} {sb}");
                assert!(sc.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn scaled_matrices_are_mesh_independent() {
        for p in 1..=4 {
            let nt = 4 * p + 3;
            let a = assemble_temporal(p, nt, 1.0).unwrap();
            let b = assemble_temporal(p, nt, 7.5).unwrap();
            let hb_a = &a.b * a.meshsize();
            let hb_b = &b.b * b.meshsize();
            assert!((hb_a - hb_b).amax() < 1e-12);
            assert!((&a.c - &b.c).amax() < 1e-13);
        }
    }

    #[test]
    fn quadratic_golden_values() {
        let tm = assemble_temporal(2, 12, 1.0).unwrap();
        let hb = &tm.b * tm.meshsize();
        let n = tm.dim();
        let top_b = [[-6.0, -2.0, 0.0], [8.0, -1.0, -1.0], [-1.0, 6.0, -2.0]];
        let top_c = [[10.0, 2.0, 0.0], [0.0, 9.0, 1.0], [-9.0, 0.0, 10.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(hb[(r, c)], top_b[r][c] / 6.0, epsilon = 1e-13);
                assert_abs_diff_eq!(tm.c[(r, c)], top_c[r][c] / 24.0, epsilon = 1e-13);
            }
        }
        let band_b = [-1.0, -2.0, 6.0, -2.0, -1.0];
        let band_c = [-1.0, -10.0, 0.0, 10.0, 1.0];
        for r in 4..n - 4 {
            for (k, off) in (-3isize..=1).enumerate() {
                let c = (r as isize + off) as usize;
                assert_abs_diff_eq!(hb[(r, c)], band_b[k] / 6.0, epsilon = 1e-13);
                assert_abs_diff_eq!(tm.c[(r, c)], band_c[k] / 24.0, epsilon = 1e-13);
            }
        }
        let k = scaled_system(2, 12, 1.0).unwrap().matrix;
        assert!((k[(0, 0)] - Complex64::new(-10.0 / 24.0, -1.0)).norm() < 1e-13);
        let k0 = scaled_system(2, 12, 0.0).unwrap();
        assert!((k0.matrix - k0.scaled_b.map(|v| Complex64::new(0.0, v))).camax() == 0.0);
    }

    #[test]
    fn persymmetry() {
        for p in 1..=5 {
            let tm = assemble_temporal(p, 4 * p + 5, 1.0).unwrap();
            let hb = &tm.b * tm.meshsize();
            let n = tm.dim();
            for l in 0..n {
                for j in 0..n {
                    assert_abs_diff_eq!(hb[(l, j)], hb[(n - 1 - j, n - 1 - l)], epsilon = 1e-13);
                    assert_abs_diff_eq!(tm.c[(l, j)], tm.c[(n - 1 - j, n - 1 - l)], epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn rhs_examples() {
        let tm = assemble_temporal(2, 6, 1.0).unwrap();
        let z = scalar_rhs(&tm, 3.0, Complex64::new(0.0, 0.0), &zero).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
        let e1 = scalar_rhs(&tm, 3.0, Complex64::new(1.0, 0.0), &zero).unwrap();
        assert_eq!(e1[0], Complex64::new(3.0, 0.0));
        assert!(e1.iter().skip(1).all(|v| v.norm() == 0.0));
        // int of a derivative is the difference of endpoint values
        let tm = assemble_temporal(1, 5, 2.0).unwrap();
        let one = |_: f64| Complex64::new(1.0, 0.0);
        let r = scalar_rhs(&tm, 0.0, Complex64::new(0.0, 0.0), &one).unwrap();
        for (l, v) in r.iter().enumerate() {
            let at = |t: f64| tm.knots.eval_basis(l, t, 0).unwrap();
            assert_abs_diff_eq!(v.re, at(2.0) - at(0.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn trial_space_members_are_reproduced() {
        let one = solve_scalar_ivp(3, 5, 1.0, 0.0, Complex64::new(1.0, 0.0), &zero).unwrap();
        let mu = 2.5;
        let f = move |t: f64| Complex64::new(mu * t, 1.0);
        let lin = solve_scalar_ivp(2, 7, 1.0, mu, Complex64::new(0.0, 0.0), &f).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((one.eval(t).unwrap() - 1.0).norm() < 1e-13);
            assert!((lin.eval(t).unwrap() - t).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_solution_hits_initial_value() {
        let psi0 = Complex64::new(0.3, -1.2);
        let sol = solve_scalar_ivp(3, 8, 1.0, 2.0, psi0, &zero).unwrap();
        assert!((sol.eval(0.0).unwrap() - psi0).norm() < 1e-14);
    }

    #[test]
    fn duhamel_oracle_matches_closed_form() {
        let mu = 3.0;
        let psi0 = Complex64::new(1.0, 0.5);
        let t = 0.8;
        let exact = Complex64::from_polar(1.0, mu * t) * psi0;
        assert!((exact_ivp_solution(mu, psi0, &zero, t) - exact).norm() < 1e-14);
        let pi = exact_ivp_solution(1.0, Complex64::new(1.0, 0.0), &zero, std::f64::consts::PI);
        assert!((pi + 1.0).norm() < 1e-15);
        // f = 1: psi = e^{i mu t} psi0 - (e^{i mu t} - 1)/mu
        let one = |_: f64| Complex64::new(1.0, 0.0);
        let e = Complex64::from_polar(1.0, mu * t);
        let closed = e * psi0 - (e - 1.0) / mu;
        assert!((exact_ivp_solution(mu, psi0, &one, t) - closed).norm() < 1e-12);
    }

    #[test]
    fn scalar_solution_satisfies_ode_with_source() {
        let mu = -2.0;
        let psi0 = Complex64::new(0.0, 1.0);
        let f = |t: f64| Complex64::new(t.cos(), t * t);
        let coarse = solve_scalar_ivp(3, 8, 1.0, mu, psi0, &f).unwrap();
        let fine = solve_scalar_ivp(3, 32, 1.0, mu, psi0, &f).unwrap();
        let e1 = scalar_l2_error(&coarse, mu, psi0, &f).unwrap();
        let e2 = scalar_l2_error(&fine, mu, psi0, &f).unwrap();
        assert!(e2 < 1e-5, "{e2}");
        assert!((e1 / e2).log2() / 2.0 > 3.5);
    }

    use crate::linalg::vec_norm;

    fn residual_norm(k: &DMatrix<Complex64>, u: &DVector<Complex64>, rhs: &DVector<Complex64>) -> f64 {
        let r = k * u - rhs;
        vec_norm(r.as_slice()) / vec_norm(rhs.as_slice())
    }

    #[test]
    fn residual_small() {
        let tm = assemble_temporal(2, 10, 1.0).unwrap();
        let k = tm.pencil(5.0);
        let rhs = scalar_rhs(&tm, 5.0, Complex64::new(1.0, 0.0), &zero).unwrap();
        let u = k.clone().lu().solve(&rhs).unwrap();
        assert!(residual_norm(&k, &u, &rhs) < 1e-13);
    }
}
