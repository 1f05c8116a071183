//! Spline space on an interval with homogeneous Dirichlet conditions.

use crate::bspline::{open_uniform_knots, KnotVector};
use crate::error::{Error, Result};
use crate::linalg::{BandCholesky, BandMatrix};
use crate::quadrature::gauss_legendre_rule;
use nalgebra::DVector;
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// Splines on `(a, b)` with the two endpoint basis functions removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpace {
    knots: KnotVector,
}

/// Active interior basis functions at a point.
#[derive(Debug, Clone)]
pub struct SpatialEval {
    /// `(interior index, value, derivative)` for every active interior function.
    pub active: Vec<(usize, f64, f64)>,
}

impl SpatialSpace {
    pub fn new(p: usize, nx: usize, interval: (f64, f64)) -> Result<Self> {
        if nx < 2 {
            return Err(Error::TooSmall { size: nx, required: 2 });
        }
        Ok(Self { knots: open_uniform_knots(p, nx, interval)? })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn num_elements(&self) -> usize {
        self.knots.num_elements()
    }

    pub fn dim(&self) -> usize {
        self.knots.dim() - 2
    }

    pub fn interval(&self) -> (f64, f64) {
        self.knots.interval()
    }

    pub fn meshsize(&self) -> f64 {
        self.knots.meshsize()
    }

    pub fn eval_on_element(&self, e: usize, x: f64) -> SpatialEval {
        let ev = self.knots.eval_on_element(e, x, 1);
        let last = self.knots.dim() - 1;
        let active = (0..ev.values[0].len())
            .filter_map(|a| {
                let g = ev.first_active + a;
                (g != 0 && g != last).then(|| (g - 1, ev.values[0][a], ev.values[1][a]))
            })
            .collect();
        SpatialEval { active }
    }

    pub fn eval(&self, x: f64) -> Result<SpatialEval> {
        let e = self.knots.element_of(x)?;
        Ok(self.eval_on_element(e, x))
    }

    /// Value and derivative of the spline with the given interior coefficients.
    pub fn eval_function(&self, coeffs: &[Complex64], x: f64) -> Result<(Complex64, Complex64)> {
        let ev = self.eval(x)?;
        Ok(ev.active.iter().fold((Complex64::default(), Complex64::default()), |(v, d), &(i, phi, dphi)| {
            (v + coeffs[i] * phi, d + coeffs[i] * dphi)
        }))
    }
}

pub fn spatial_space(p: usize, nx: usize, interval: (f64, f64)) -> Result<SpatialSpace> {
    SpatialSpace::new(p, nx, interval)
}

pub type Potential = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Mass matrix and the matrix of `a(u, v) = (u', v') / 2 - (V u, v)`.
#[derive(Clone)]
pub struct SpatialSystem {
    pub space: SpatialSpace,
    pub mass: BandMatrix<f64>,
    pub hamiltonian: BandMatrix<f64>,
    pub potential: Potential,
    mass_factor: BandCholesky,
}

impl fmt::Debug for SpatialSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialSystem")
            .field("space", &self.space)
            .field("mass", &self.mass)
            .field("hamiltonian", &self.hamiltonian)
            .finish_non_exhaustive()
    }
}

impl SpatialSystem {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn project(&self, f: &dyn Fn(f64) -> Complex64) -> Result<DVector<Complex64>> {
        let mut load = load_vector(&self.space, f)?;
        self.mass_factor.solve_in_place(load.as_mut_slice());
        Ok(load)
    }

    pub fn mass_solve_in_place(&self, v: &mut [Complex64]) {
        self.mass_factor.solve_in_place(v);
    }
}

pub fn assemble_spatial(space: &SpatialSpace, potential: Potential) -> Result<SpatialSystem> {
    assemble_spatial_with_order(space, potential, space.degree() + 3)
}

pub fn assemble_spatial_with_order(space: &SpatialSpace, potential: Potential, order: usize) -> Result<SpatialSystem> {
    let p = space.degree();
    let n = space.dim();
    let mut mass = BandMatrix::zeros(n, p, p);
    let mut hamiltonian = BandMatrix::zeros(n, p, p);
    let rule = gauss_legendre_rule(order)?;
    for e in 0..space.num_elements() {
        let (lo, hi) = space.knots.element_bounds(e);
        for (x, w) in rule.mapped(lo, hi) {
            let ev = space.eval_on_element(e, x);
            let v = potential(x);
            for &(i, phi_i, dphi_i) in &ev.active {
                for &(r, phi_r, dphi_r) in &ev.active {
                    mass.add(i, r, w * phi_i * phi_r);
                    hamiltonian.add(i, r, w * (0.5 * dphi_i * dphi_r - v * phi_i * phi_r));
                }
            }
        }
    }
    let mass_factor = BandCholesky::factor(&mass)?;
    Ok(SpatialSystem { space: space.clone(), mass, hamiltonian, potential, mass_factor })
}

fn load_vector(space: &SpatialSpace, f: &dyn Fn(f64) -> Complex64) -> Result<DVector<Complex64>> {
    let mut load = DVector::zeros(space.dim());
    let rule = gauss_legendre_rule(space.degree() + 5)?;
    for e in 0..space.num_elements() {
        let (lo, hi) = space.knots.element_bounds(e);
        for (x, w) in rule.mapped(lo, hi) {
            let fx = f(x) * w;
            for &(i, phi, _) in &space.eval_on_element(e, x).active {
                load[i] += fx * phi;
            }
        }
    }
    Ok(load)
}

/// L2 projection onto the space.
pub fn l2_project(space: &SpatialSpace, f: &dyn Fn(f64) -> Complex64) -> Result<DVector<Complex64>> {
    let system = assemble_spatial(space, Arc::new(|_| 0.0))?;
    system.project(f)
}
