//! Harmonic-oscillator benchmarks: exact states, error norms, conservation
//! traces and the sweeps behind the CLI.

use crate::bspline::KnotVector;
use crate::conditioning::{conditioning_sweep, gevp_spectrum, ConditioningReport, NormKind, PencilSpectrum};
use crate::error::{invalid, Error, Result};
use crate::linalg::BandMatrix;
use crate::quadrature::gauss_legendre_rule;
use crate::spacetime::{assemble_spacetime, bartels_stewart_solve, DiscreteField, FieldValue, SpaceTimeSystem};
use crate::spatial::{assemble_spatial, spatial_space, SpatialSpace, SpatialSystem};
use crate::structure::{classify_roots, is_reciprocal, locate_unit_zeros_with, SplineSymbols, UNIT_CIRCLE_TOL};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::sync::Arc;

/// Physicists' Hermite polynomial.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Stationary state `n` of the oscillator with potential `-omega^2 x^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicOscillator {
    pub level: usize,
    pub omega: f64,
}

impl HarmonicOscillator {
    pub fn new(level: usize, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { level, omega })
    }

    fn normalization(&self) -> f64 {
        let fact: f64 = (1..=self.level).map(|k| k as f64).product();
        (2f64.powi(self.level as i32) * fact).sqrt().recip() * (self.omega / std::f64::consts::PI).powf(0.25)
    }

    pub fn potential(&self) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
        let w2 = self.omega * self.omega;
        move |x| -0.5 * w2 * x * x
    }

    pub fn energy(&self) -> f64 {
        self.omega * (self.level as f64 + 0.5)
    }

    pub fn eval(&self, x: f64, t: f64) -> FieldValue {
        let n = self.level;
        let sw = self.omega.sqrt();
        let y = sw * x;
        let h = hermite(n, y);
        let dh = if n == 0 { 0.0 } else { 2.0 * n as f64 * hermite(n - 1, y) };
        let gauss = self.normalization() * (-0.5 * self.omega * x * x).exp();
        let phase = Complex64::from_polar(1.0, -self.energy() * t);
        let value = phase * (gauss * h);
        FieldValue {
            value,
            dt: Complex64::new(0.0, -self.energy()) * value,
            dx: phase * (gauss * (sw * dh - self.omega * x * h)),
        }
    }

    pub fn initial(&self, x: f64) -> Complex64 {
        self.eval(x, 0.0).value
    }
}

pub fn exact_state(n: usize, omega: f64, x: f64, t: f64) -> Result<FieldValue> {
    Ok(HarmonicOscillator::new(n, omega)?.eval(x, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub rel_l2: f64,
    pub rel_h1: f64,
}

struct SpatialPoint {
    x: f64,
    w: f64,
    active: Vec<(usize, f64, f64)>,
}

fn spatial_points(space: &SpatialSpace, order: usize) -> Result<Vec<SpatialPoint>> {
    let rule = gauss_legendre_rule(order)?;
    let mut out = Vec::with_capacity(space.num_elements() * order);
    for e in 0..space.num_elements() {
        let (lo, hi) = space.knots().element_bounds(e);
        for (x, w) in rule.mapped(lo, hi) {
            out.push(SpatialPoint { x, w, active: space.eval_on_element(e, x).active });
        }
    }
    Ok(out)
}

#[derive(Default, Clone, Copy)]
struct Sums {
    err: [f64; 3],
    norm: [f64; 3],
}

impl Sums {
    fn add(&mut self, approx: FieldValue, exact: FieldValue, w: f64) {
        let pairs = [(approx.value, exact.value), (approx.dt, exact.dt), (approx.dx, exact.dx)];
        for (k, (a, e)) in pairs.into_iter().enumerate() {
            self.err[k] += w * (a - e).norm_sqr();
            self.norm[k] += w * e.norm_sqr();
        }
    }

    fn merge(mut self, o: Sums) -> Sums {
        for k in 0..3 {
            self.err[k] += o.err[k];
            self.norm[k] += o.norm[k];
        }
        self
    }

    fn finish(self) -> Result<ErrorNorms> {
        if self.norm[0] == 0.0 || self.norm[1] + self.norm[2] == 0.0 {
            return Err(Error::Consistency("exact solution has zero norm".into()));
        }
        let r = |v: f64| v.sqrt();
        Ok(ErrorNorms {
            rel_l2: r(self.err[0] / self.norm[0]),
            rel_h1: (r(self.err[1]) + r(self.err[2])) / (r(self.norm[1]) + r(self.norm[2])),
        })
    }
}

type Exact<'a> = &'a (dyn Fn(f64, f64) -> FieldValue + Sync);

/// Relative `L2(Q_T)` error and relative error in `|dt .| + |dx .|`, with a
/// tensor Gauss rule of `quad_order` points per direction and element.
pub fn error_norms(field: &DiscreteField, exact: Exact, quad_order: usize) -> Result<ErrorNorms> {
    let points = spatial_points(&field.space, quad_order)?;
    integrate_over_time(&field.time, quad_order, |e, t| {
        let (c, dc) = field.spatial_coefficients_on(e, t);
        let mut s = Sums::default();
        for pt in &points {
            let mut v = FieldValue { value: Complex64::default(), dt: Complex64::default(), dx: Complex64::default() };
            for &(i, phi, dphi) in &pt.active {
                v.value += c[i] * phi;
                v.dx += c[i] * dphi;
                v.dt += dc[i] * phi;
            }
            s.add(v, exact(pt.x, t), pt.w);
        }
        s
    })
}

/// Same norms for an arbitrary evaluable approximation on a given mesh.
pub fn error_norms_of(
    approx: &(dyn Fn(f64, f64) -> FieldValue + Sync),
    exact: Exact,
    time: &KnotVector,
    space: &SpatialSpace,
    quad_order: usize,
) -> Result<ErrorNorms> {
    let points = spatial_points(space, quad_order)?;
    integrate_over_time(time, quad_order, |_, t| {
        let mut s = Sums::default();
        for pt in &points {
            s.add(approx(pt.x, t), exact(pt.x, t), pt.w);
        }
        s
    })
}

fn integrate_over_time(time: &KnotVector, order: usize, slice: impl Fn(usize, f64) -> Sums + Sync) -> Result<ErrorNorms> {
    let rule = gauss_legendre_rule(order)?;
    let nodes: Vec<(usize, f64, f64)> = (0..time.num_elements())
        .flat_map(|e| {
            let (lo, hi) = time.element_bounds(e);
            rule.mapped(lo, hi).map(move |(t, w)| (e, t, w)).collect::<Vec<_>>()
        })
        .collect();
    // collect before summing so the result does not depend on scheduling
    let parts: Vec<Sums> = nodes
        .par_iter()
        .map(|&(e, t, w)| {
            let mut s = slice(e, t);
            s.err.iter_mut().chain(s.norm.iter_mut()).for_each(|v| *v *= w);
            s
        })
        .collect();
    parts.into_iter().fold(Sums::default(), Sums::merge).finish()
}

/// Mass and energy of a field at sample times, with deviations from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub degree: usize,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ConservationReport {
    pub fn mass_deviation(&self) -> Vec<f64> {
        self.mass.iter().map(|m| (m - self.mass[0]).abs()).collect()
    }

    pub fn energy_deviation(&self) -> Vec<f64> {
        self.energy.iter().map(|e| (e - self.energy[0]).abs()).collect()
    }

    pub fn final_relative_mass_deviation(&self) -> f64 {
        self.mass_deviation().last().copied().unwrap_or(0.0) / self.mass[0].abs()
    }

    pub fn final_relative_energy_deviation(&self) -> f64 {
        self.energy_deviation().last().copied().unwrap_or(0.0) / self.energy[0].abs()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,t,mass_dev,energy_dev\n");
        for ((t, m), e) in self.times.iter().zip(self.mass_deviation()).zip(self.energy_deviation()) {
            let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", self.degree, t, m, e);
        }
        out
    }
}

fn quadratic_form(m: &BandMatrix<f64>, c: &[Complex64]) -> f64 {
    let mc = m.to_complex().matvec(c);
    c.iter().zip(&mc).map(|(a, b)| (a.conj() * b).re).sum()
}

/// `int |u|^2` and `-int |u'|^2 / 2 + int V |u|^2` for a spatial spline;
/// the assembled matrices integrate both exactly for polynomial potentials
/// up to degree four.
pub fn mass_and_energy(spatial: &SpatialSystem, coeffs: &[Complex64]) -> (f64, f64) {
    (quadratic_form(&spatial.mass, coeffs), -quadratic_form(&spatial.hamiltonian, coeffs))
}

pub fn functionals_trace(field: &DiscreteField, spatial: &SpatialSystem, sample_times: &[f64]) -> Result<ConservationReport> {
    let mut mass = Vec::with_capacity(sample_times.len());
    let mut energy = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let (c, _) = field.spatial_coefficients(t)?;
        let (m, e) = mass_and_energy(spatial, &c);
        mass.push(m);
        energy.push(e);
    }
    Ok(ConservationReport { degree: field.time.degree(), times: sample_times.to_vec(), mass, energy })
}

/// Shared settings of the oscillator experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub degree: usize,
    pub t_final: f64,
    pub domain: (f64, f64),
    pub omega: f64,
    pub level: usize,
    pub quad_order: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { degree: 2, t_final: 1.0, domain: (-3.0, 3.0), omega: 10.0, level: 2, quad_order: None }
    }
}

impl ExperimentConfig {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(invalid("degree must be positive"));
        }
        if !(self.t_final > 0.0) {
            return Err(invalid("final time must be positive"));
        }
        if !(self.domain.1 > self.domain.0) {
            return Err(invalid("domain is degenerate"));
        }
        HarmonicOscillator::new(self.level, self.omega)?;
        Ok(())
    }

    pub fn state(&self) -> HarmonicOscillator {
        HarmonicOscillator { level: self.level, omega: self.omega }
    }

    pub fn error_order(&self) -> usize {
        self.quad_order.unwrap_or(self.degree + 5)
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn spatial_system(&self, nx: usize) -> Result<SpatialSystem> {
        let space = spatial_space(self.degree, nx, self.domain)?;
        assemble_spatial(&space, Arc::new(self.state().potential()))
    }

    pub fn system(&self, nt: usize, nx: usize) -> Result<SpaceTimeSystem> {
        self.validate()?;
        let spatial = self.spatial_system(nx)?;
        let state = self.state();
        assemble_spacetime(self.degree, nt, self.t_final, &spatial, None, &|x| state.initial(x))
    }

    pub fn solve(&self, nt: usize, nx: usize) -> Result<(SpaceTimeSystem, DiscreteField)> {
        let sys = self.system(nt, nx)?;
        let field = bartels_stewart_solve(&sys)?;
        Ok((sys, field))
    }

    pub fn errors(&self, field: &DiscreteField) -> Result<ErrorNorms> {
        let state = self.state();
        error_norms(field, &move |x, t| state.eval(x, t), self.error_order())
    }
}

fn mesh_count(length: f64, h: f64) -> Result<usize> {
    let n = (length / h).round();
    if n < 1.0 || ((length / h) - n).abs() > 1e-9 * n {
        return Err(invalid(format!("meshsize {h} does not divide length {length}")));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub ht: f64,
    pub hx: f64,
    pub rel_l2: f64,
    pub rel_h1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub degree: usize,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// `log2(e_prev / e_cur)` per consecutive pair, for L2 and H1.
    pub fn rates(&self) -> Vec<(f64, f64)> {
        self.rows
            .windows(2)
            .map(|w| ((w[0].rel_l2 / w[1].rel_l2).log2(), (w[0].rel_h1 / w[1].rel_h1).log2()))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,ht,hx,relL2,relH1,rateL2,rateH1\n");
        let rates = self.rates();
        for (k, r) in self.rows.iter().enumerate() {
            let _ = write!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e}", self.degree, r.ht, r.hx, r.rel_l2, r.rel_h1);
            match k.checked_sub(1).map(|i| rates[i]) {
                Some((a, b)) => {
                    let _ = writeln!(out, ",{a:.16e},{b:.16e}");
                }
                None => out.push_str(",,\n"),
            }
        }
        out
    }

    pub fn to_stability_csv(&self) -> String {
        let mut out = String::from("p,ht,hx,ratio,relL2,relH1\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.degree,
                r.ht,
                r.hx,
                r.ht / r.hx,
                r.rel_l2,
                r.rel_h1
            );
        }
        out
    }
}

/// Errors on meshes with `h_t = h_x = 1 / N` for each `N` in `levels`.
pub fn run_convergence(cfg: &ExperimentConfig, levels: &[usize]) -> Result<ErrorReport> {
    cfg.validate()?;
    let rows = levels
        .par_iter()
        .map(|&n| {
            let h = 1.0 / n as f64;
            let nt = mesh_count(cfg.t_final, h)?;
            let nx = mesh_count(cfg.length(), h)?;
            let (_, field) = cfg.solve(nt, nx)?;
            let e = cfg.errors(&field)?;
            Ok(ErrorRow { ht: cfg.t_final / nt as f64, hx: cfg.length() / nx as f64, rel_l2: e.rel_l2, rel_h1: e.rel_h1 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport { degree: cfg.degree, rows })
}

/// Fixed temporal mesh of `nt` elements; spatial meshes with `h_t / h_x`
/// equal to each entry of `ratios`.
pub fn run_stability(cfg: &ExperimentConfig, nt: usize, ratios: &[usize]) -> Result<ErrorReport> {
    cfg.validate()?;
    let ht = cfg.t_final / nt as f64;
    let rows = ratios
        .par_iter()
        .map(|&ratio| {
            let nx = mesh_count(cfg.length(), ht / ratio as f64)?;
            let (_, field) = cfg.solve(nt, nx)?;
            let e = cfg.errors(&field)?;
            Ok(ErrorRow { ht, hx: cfg.length() / nx as f64, rel_l2: e.rel_l2, rel_h1: e.rel_h1 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport { degree: cfg.degree, rows })
}

/// Mass and energy at the `Nt + 1` temporal mesh nodes.
pub fn run_conservation(cfg: &ExperimentConfig, nt: usize, nx: usize) -> Result<ConservationReport> {
    let (sys, field) = cfg.solve(nt, nx)?;
    functionals_trace(&field, &sys.spatial, field.time.breakpoints())
}

pub fn conditioning_csv(report: &ConditioningReport) -> String {
    let mut out = String::from("p,n,rho,kappa,norm\n");
    for r in &report.rows {
        let _ = writeln!(out, "{},{},{:.16e},{:.16e},{}", report.degree, r.n, r.rho, r.kappa, report.norm.label());
    }
    out
}

pub fn run_conditioning(p: usize, sizes: &[usize], rhos: &[f64]) -> Result<ConditioningReport> {
    conditioning_sweep(p, sizes, rhos, NormKind::Spectral)
}

pub fn run_gevp(p: usize, nt: usize) -> Result<PencilSpectrum> {
    gevp_spectrum(p, nt)
}

pub fn gevp_csv(spec: &PencilSpectrum) -> String {
    let mut out = String::from("p,Nt,re_lambda,im_lambda\n");
    for l in &spec.finite {
        let _ = writeln!(out, "{},{},{:.16e},{:.16e}", spec.degree, spec.num_elements, l.re, l.im);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRow {
    pub rho: f64,
    pub root_type: (usize, usize, usize),
    pub reciprocal: bool,
    pub theta_star: f64,
    pub residual: f64,
}

pub fn run_symbol(p: usize, rhos: &[f64]) -> Result<Vec<SymbolRow>> {
    let symbols = SplineSymbols::new(p)?;
    rhos.iter()
        .map(|&rho| {
            let q = symbols.system(rho);
            let root_type = classify_roots(&q, UNIT_CIRCLE_TOL)?.counts();
            let zeros = locate_unit_zeros_with(&symbols, rho)?;
            let theta_star = zeros[1];
            Ok(SymbolRow {
                rho,
                root_type,
                reciprocal: is_reciprocal(&q, 1e-12),
                theta_star,
                residual: symbols.k_p(theta_star, rho)?.abs(),
            })
        })
        .collect()
}

pub fn symbol_csv(p: usize, rows: &[SymbolRow]) -> String {
    let mut out = String::from("p,rho,s,u,l,theta_star,residual\n");
    for r in rows {
        let (s, u, l) = r.root_type;
        let _ = writeln!(out, "{p},{:.16e},{s},{u},{l},{:.16e},{:.16e}", r.rho, r.theta_star, r.residual);
    }
    out
}

/// One oscillator solve with error norms and the final-time conservation defects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSummary {
    pub degree: usize,
    pub nt: usize,
    pub nx: usize,
    pub errors: ErrorNorms,
    pub mass_deviation: f64,
    pub energy_deviation: f64,
}

pub fn run_solve(cfg: &ExperimentConfig, nt: usize, nx: usize) -> Result<SolveSummary> {
    let (sys, field) = cfg.solve(nt, nx)?;
    let errors = cfg.errors(&field)?;
    let trace = functionals_trace(&field, &sys.spatial, &[0.0, cfg.t_final])?;
    Ok(SolveSummary {
        degree: cfg.degree,
        nt,
        nx,
        errors,
        mass_deviation: trace.final_relative_mass_deviation(),
        energy_deviation: trace.final_relative_energy_deviation(),
    })
}

pub fn solve_csv(s: &SolveSummary) -> String {
    format!(
        "p,nt,nx,relL2,relH1,mass_dev_T,energy_dev_T\n{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
        s.degree, s.nt, s.nx, s.errors.rel_l2, s.errors.rel_h1, s.mass_deviation, s.energy_deviation
    )
}
