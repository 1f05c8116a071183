//! Global space-time system `(i B (x) M + C (x) A) u = f` in time-major
//! ordering: unknown `(j, i)` sits at `j * Ns + i`.

use crate::bspline::KnotVector;
use crate::eigen::complex_schur;
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, BandLu, BandMatrix};
use crate::quadrature::gauss_legendre_rule;
use crate::spatial::{SpatialSpace, SpatialSystem};
use crate::temporal::{assemble_temporal, exact_order, TemporalMatrices};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

/// Nonzero basis functions at a point: (index, value, derivative).
type ActiveBasis = Vec<(usize, f64, f64)>;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub type SpaceTimeSource<'a> = &'a (dyn Fn(f64, f64) -> Complex64 + Sync);

#[derive(Debug, Clone)]
pub struct SpaceTimeSystem {
    pub temporal: TemporalMatrices,
    pub spatial: SpatialSystem,
    /// Time-major right-hand side of length `n * Ns`.
    pub rhs: Vec<Complex64>,
    /// Coefficients of the projected initial datum.
    pub lifting: DVector<Complex64>,
}

/// Largest number of stored entries accepted by [`direct_solve`].
pub const MAX_DIRECT_STORAGE: usize = 60_000_000;
pub const MAX_DIRECT_UNKNOWNS: usize = 200_000;

impl SpaceTimeSystem {
    pub fn time_dim(&self) -> usize {
        self.temporal.dim()
    }

    pub fn space_dim(&self) -> usize {
        self.spatial.dim()
    }

    pub fn num_unknowns(&self) -> usize {
        self.time_dim() * self.space_dim()
    }

    /// Column range of nonzeros in row `r` of the temporal matrices.
    fn time_columns(&self, r: usize) -> std::ops::Range<usize> {
        let p = self.temporal.degree();
        r.saturating_sub(p + 1)..(r + p).min(self.time_dim())
    }

    /// Applies the Kronecker operator to a time-major vector.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let (n, ns) = (self.time_dim(), self.space_dim());
        assert_eq!(u.len(), n * ns);
        let mass = self.spatial.mass.to_complex();
        let ham = self.spatial.hamiltonian.to_complex();
        let mu: Vec<Vec<Complex64>> = u.chunks(ns).map(|b| mass.matvec(b)).collect();
        let au: Vec<Vec<Complex64>> = u.chunks(ns).map(|b| ham.matvec(b)).collect();
        let mut out = vec![ZERO; n * ns];
        for (l, block) in out.chunks_mut(ns).enumerate() {
            for j in self.time_columns(l) {
                let b = I * self.temporal.b[(l, j)];
                let c = Complex64::new(self.temporal.c[(l, j)], 0.0);
                for i in 0..ns {
                    block[i] += b * mu[j][i] + c * au[j][i];
                }
            }
        }
        out
    }

    /// Dense operator, for small sizes only.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let (n, ns) = (self.time_dim(), self.space_dim());
        let m = self.spatial.mass.to_dense();
        let a = self.spatial.hamiltonian.to_dense();
        DMatrix::from_fn(n * ns, n * ns, |row, col| {
            let (l, i) = (row / ns, row % ns);
            let (j, r) = (col / ns, col % ns);
            I * self.temporal.b[(l, j)] * m[(i, r)] + self.temporal.c[(l, j)] * a[(i, r)]
        })
    }

    pub fn relative_residual(&self, field: &DiscreteField) -> f64 {
        let r = self.apply(&field.coefficients);
        let diff: Vec<Complex64> = r.iter().zip(&self.rhs).map(|(a, b)| a - b).collect();
        let denom = vec_norm(&self.rhs);
        if denom == 0.0 {
            vec_norm(&diff)
        } else {
            vec_norm(&diff) / denom
        }
    }

    fn field(&self, coefficients: Vec<Complex64>) -> DiscreteField {
        DiscreteField {
            time: self.temporal.knots.clone(),
            space: self.spatial.space.clone(),
            coefficients,
            lifting: self.lifting.clone(),
        }
    }
}

/// Assembles the system for degree `p` in time on `Nt` elements of `(0, T)`.
///
/// The initial datum is lifted by its L2 projection, constant in time.
pub fn assemble_spacetime(
    p: usize,
    nt: usize,
    t_final: f64,
    spatial: &SpatialSystem,
    source: Option<SpaceTimeSource>,
    initial: &dyn Fn(f64) -> Complex64,
) -> Result<SpaceTimeSystem> {
    let temporal = assemble_temporal(p, nt, t_final)?;
    let lifting = spatial.project(initial)?;
    let (n, ns) = (temporal.dim(), spatial.dim());
    let mut rhs = vec![ZERO; n * ns];
    if let Some(f) = source {
        let space = &spatial.space;
        let t_rule = gauss_legendre_rule(exact_order(p))?;
        let x_rule = gauss_legendre_rule(space.degree() + 3)?;
        let x_points: Vec<(f64, f64, ActiveBasis)> = (0..space.num_elements())
            .flat_map(|e| {
                let (lo, hi) = space.knots().element_bounds(e);
                x_rule.mapped(lo, hi).map(move |(x, w)| (x, w, space.eval_on_element(e, x).active)).collect::<Vec<_>>()
            })
            .collect();
        for e in 0..nt {
            let (lo, hi) = temporal.knots.element_bounds(e);
            for (t, wt) in t_rule.mapped(lo, hi) {
                let ev = temporal.knots.eval_on_element(e, t, 1);
                let mut load = vec![ZERO; ns];
                for (x, wx, active) in &x_points {
                    let fx = f(*x, t) * (wt * wx);
                    for &(i, phi, _) in active {
                        load[i] += fx * phi;
                    }
                }
                for (a, &dphi) in ev.values[1].iter().enumerate() {
                    let row = ev.first_active + a;
                    if row < n {
                        for (r, l) in rhs[row * ns..(row + 1) * ns].iter_mut().zip(&load) {
                            *r += l * dphi;
                        }
                    }
                }
            }
        }
    }
    // boundary term at t = 0; only the first test function is nonzero there
    let a_lift = spatial.hamiltonian.to_complex().matvec(lifting.as_slice());
    for (r, a) in rhs[..ns].iter_mut().zip(&a_lift) {
        *r -= a;
    }
    Ok(SpaceTimeSystem { temporal, spatial: spatial.clone(), rhs, lifting })
}

/// Banded LU of the full operator. The unknowns are reordered internally to
/// whichever of time-major or space-major has the smaller bandwidth.
pub fn direct_solve(system: &SpaceTimeSystem) -> Result<DiscreteField> {
    let (n, ns) = (system.time_dim(), system.space_dim());
    let total = n * ns;
    if total > MAX_DIRECT_UNKNOWNS {
        return Err(Error::InvalidArgument(format!("{total} unknowns exceed the direct solver limit")));
    }
    let p = system.temporal.degree();
    let px = system.spatial.space.degree();
    let time_major = (p + 1) * ns + px <= px * n + p + 1;
    let index = |j: usize, i: usize| if time_major { j * ns + i } else { i * n + j };
    let (kl, ku) = if time_major {
        ((p + 1) * ns + px, (p.saturating_sub(1)) * ns + px)
    } else {
        (px * n + p + 1, px * n + p.saturating_sub(1))
    };
    if total * (2 * kl + ku + 1) > MAX_DIRECT_STORAGE {
        return Err(Error::InvalidArgument(format!("band storage for {total} unknowns is too large")));
    }
    let mut global = BandMatrix::<Complex64>::zeros(total, kl, ku);
    let m = &system.spatial.mass;
    let a = &system.spatial.hamiltonian;
    for l in 0..n {
        for j in system.time_columns(l) {
            let (b, c) = (system.temporal.b[(l, j)], system.temporal.c[(l, j)]);
            for i in 0..ns {
                for r in m.columns_of_row(i) {
                    let v = I * (b * m.get(i, r)) + c * a.get(i, r);
                    global.add(index(l, i), index(j, r), v);
                }
            }
        }
    }
    let lu = global.lu()?;
    let solve = |f: &[Complex64]| {
        let mut permuted = vec![ZERO; total];
        for l in 0..n {
            for i in 0..ns {
                permuted[index(l, i)] = f[l * ns + i];
            }
        }
        lu.solve_in_place(&mut permuted);
        let mut out = vec![ZERO; total];
        for j in 0..n {
            for i in 0..ns {
                out[j * ns + i] = permuted[index(j, i)];
            }
        }
        out
    };
    let mut coefficients = solve(&system.rhs);
    let applied = system.apply(&coefficients);
    let residual: Vec<Complex64> = system.rhs.iter().zip(&applied).map(|(f, a)| f - a).collect();
    for (u, d) in coefficients.iter_mut().zip(solve(&residual)) {
        *u += d;
    }
    Ok(system.field(coefficients))
}

/// `Q^H X Q = R` with `Q` unitary and `R` upper triangular.
#[derive(Debug, Clone)]
pub struct SchurFactors {
    pub q: DMatrix<Complex64>,
    pub r: DMatrix<Complex64>,
}

impl SchurFactors {
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.q.nrows();
        (self.q.adjoint() * &self.q - DMatrix::identity(n, n)).camax()
    }

    pub fn similarity_defect(&self, x: &DMatrix<Complex64>) -> f64 {
        (&self.q * &self.r * self.q.adjoint() - x).camax()
    }
}

pub fn schur_decompose(x: &DMatrix<Complex64>) -> Result<SchurFactors> {
    let s = complex_schur(x)?;
    Ok(SchurFactors { q: s.q, r: s.t })
}

/// Solves the system through a complex Schur form of `(iB)^{-1} C`, which
/// turns it into a block upper triangular system with one shifted spatial
/// solve `M + R_kk A` per time block.
pub fn bartels_stewart_solve(system: &SpaceTimeSystem) -> Result<DiscreteField> {
    let solver = BartelsStewart::new(system)?;
    let mut coefficients = solver.solve(&system.rhs);
    // one step of iterative refinement with the same factors
    let applied = system.apply(&coefficients);
    let residual: Vec<Complex64> = system.rhs.iter().zip(&applied).map(|(f, a)| f - a).collect();
    for (u, d) in coefficients.iter_mut().zip(solver.solve(&residual)) {
        *u += d;
    }
    Ok(system.field(coefficients))
}

struct BartelsStewart<'a> {
    system: &'a SpaceTimeSystem,
    ib_lu: nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    schur: SchurFactors,
    blocks: Vec<BandLu<Complex64>>,
    hamiltonian: BandMatrix<Complex64>,
}

impl<'a> BartelsStewart<'a> {
    fn new(system: &'a SpaceTimeSystem) -> Result<Self> {
        let n = system.time_dim();
        let ib_lu = system.temporal.b.map(|v| Complex64::new(0.0, v)).lu();
        let c = system.temporal.c.map(|v| Complex64::new(v, 0.0));
        let x = ib_lu.solve(&c).ok_or(Error::Singular { smallest: 0.0 })?;
        let schur = schur_decompose(&x)?;
        let mass = &system.spatial.mass;
        let ham = &system.spatial.hamiltonian;
        let blocks = (0..n)
            .into_par_iter()
            .map(|k| {
                let shift = schur.r[(k, k)];
                mass.complex_combination(Complex64::new(1.0, 0.0), ham, shift)
                    .lu()
                    .map_err(|_| Error::SingularShiftedBlock { block: k, shift })
            })
            .collect::<Result<_>>()?;
        Ok(Self { system, ib_lu, schur, blocks, hamiltonian: ham.to_complex() })
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, ns) = (self.system.time_dim(), self.system.space_dim());
        // Y = Q^H (iB)^{-1} F, with F stored as an n x Ns matrix
        let f = DMatrix::from_fn(n, ns, |j, i| rhs[j * ns + i]);
        let y = self.ib_lu.solve(&f).expect("factor checked at construction");
        let y = self.schur.q.adjoint() * y;

        let mut z = DMatrix::<Complex64>::zeros(n, ns);
        let mut acc = vec![ZERO; ns];
        for k in (0..n).rev() {
            acc.iter_mut().for_each(|v| *v = ZERO);
            for l in k + 1..n {
                let r = self.schur.r[(k, l)];
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += r * z[(l, i)];
                }
            }
            let coupled = self.hamiltonian.matvec(&acc);
            let mut block: Vec<Complex64> = (0..ns).map(|i| y[(k, i)] - coupled[i]).collect();
            self.blocks[k].solve_in_place(&mut block);
            for (i, v) in block.into_iter().enumerate() {
                z[(k, i)] = v;
            }
        }
        let u = &self.schur.q * z;
        let mut out = vec![ZERO; n * ns];
        for j in 0..n {
            for i in 0..ns {
                out[j * ns + i] = u[(j, i)];
            }
        }
        out
    }
}

/// Space-time spline with constant-in-time lifting of the initial datum.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub time: KnotVector,
    pub space: SpatialSpace,
    /// Time-major coefficients of the trial functions `phi_1..phi_n`.
    pub coefficients: Vec<Complex64>,
    pub lifting: DVector<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: Complex64,
    pub dt: Complex64,
    pub dx: Complex64,
}

impl DiscreteField {
    pub fn space_dim(&self) -> usize {
        self.space.dim()
    }

    pub fn time_block(&self, j: usize) -> &[Complex64] {
        let ns = self.space_dim();
        &self.coefficients[j * ns..(j + 1) * ns]
    }

    /// Spatial coefficients of the field and of its time derivative at `t`.
    pub fn spatial_coefficients(&self, t: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let e = self.time.element_of(t)?;
        Ok(self.spatial_coefficients_on(e, t))
    }

    pub(crate) fn spatial_coefficients_on(&self, e: usize, t: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let ev = self.time.eval_on_element(e, t, 1);
        let mut c: Vec<Complex64> = self.lifting.iter().copied().collect();
        let mut dc = vec![ZERO; c.len()];
        for (a, (&phi, &dphi)) in ev.values[0].iter().zip(&ev.values[1]).enumerate() {
            let g = ev.first_active + a;
            if g == 0 {
                continue;
            }
            for ((ci, di), &u) in c.iter_mut().zip(dc.iter_mut()).zip(self.time_block(g - 1)) {
                *ci += u * phi;
                *di += u * dphi;
            }
        }
        (c, dc)
    }

    /// Spatial coefficients at the final time.
    pub fn final_coefficients(&self) -> Vec<Complex64> {
        let n = self.coefficients.len() / self.space_dim();
        self.lifting.iter().zip(self.time_block(n - 1)).map(|(a, b)| a + b).collect()
    }
}

pub fn evaluate_field(field: &DiscreteField, x: f64, t: f64) -> Result<FieldValue> {
    let (c, dc) = field.spatial_coefficients(t)?;
    let ev = field.space.eval(x)?;
    let mut out = FieldValue { value: ZERO, dt: ZERO, dx: ZERO };
    for &(i, phi, dphi) in &ev.active {
        out.value += c[i] * phi;
        out.dx += c[i] * dphi;
        out.dt += dc[i] * phi;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{assemble_spatial, spatial_space};
    use std::sync::Arc;

    fn oscillator(px: usize, nx: usize) -> SpatialSystem {
        let s = spatial_space(px, nx, (-3.0, 3.0)).unwrap();
        assemble_spatial(&s, Arc::new(|x| -50.0 * x * x)).unwrap()
    }

    fn gaussian(x: f64) -> Complex64 {
        Complex64::new((-5.0 * x * x).exp(), 0.3 * x * (-5.0 * x * x).exp())
    }

    #[test]
    fn operator_matches_dense_kronecker() {
        let sp = oscillator(2, 4);
        let sys = assemble_spacetime(2, 4, 1.0, &sp, None, &gaussian).unwrap();
        let dense = sys.to_dense();
        let n = sys.num_unknowns();
        let u: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        let fast = sys.apply(&u);
        let slow = &dense * DVector::from_vec(u);
        for k in 0..n {
            assert!((fast[k] - slow[k]).norm() < 1e-12 * (1.0 + slow[k].norm()));
        }
        let kron = crate::linalg::kron(&sys.temporal.b.map(|v| I * v), &sp.mass.to_complex().to_dense())
            + crate::linalg::kron(&crate::linalg::to_complex(&sys.temporal.c), &sp.hamiltonian.to_complex().to_dense());
        assert!((kron - dense).camax() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let sp = oscillator(2, 8);
        let sys = assemble_spacetime(2, 4, 1.0, &sp, None, &|_| ZERO).unwrap();
        assert!(sys.rhs.iter().all(|v| v.norm() == 0.0));
        let f = bartels_stewart_solve(&sys).unwrap();
        assert!(f.coefficients.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn solvers_agree() {
        let sp = oscillator(2, 16);
        let src = |x: f64, t: f64| Complex64::new(x * t, (x + t).sin());
        let sys = assemble_spacetime(2, 8, 1.0, &sp, Some(&src), &gaussian).unwrap();
        let d = direct_solve(&sys).unwrap();
        let b = bartels_stewart_solve(&sys).unwrap();
        assert!(sys.relative_residual(&d) < 1e-10);
        assert!(sys.relative_residual(&b) < 1e-10);
        let scale = d.coefficients.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diff = d.coefficients.iter().zip(&b.coefficients).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9 * scale);
    }

    #[test]
    fn field_at_initial_time_is_projection() {
        let sp = oscillator(3, 12);
        let sys = assemble_spacetime(3, 6, 1.0, &sp, None, &gaussian).unwrap();
        let f = bartels_stewart_solve(&sys).unwrap();
        for &x in &[-2.5, -0.3, 0.0, 1.7] {
            let v = evaluate_field(&f, x, 0.0).unwrap().value;
            let (proj, _) = sp.space.eval_function(sys.lifting.as_slice(), x).unwrap();
            assert!((v - proj).norm() < 1e-12);
        }
        assert_eq!(evaluate_field(&f, 3.0, 0.5).unwrap().value, ZERO);
        assert!(evaluate_field(&f, 3.5, 0.5).is_err());
    }

    #[test]
    fn single_time_unknown() {
        let sp = oscillator(1, 6);
        let sys = assemble_spacetime(1, 1, 0.5, &sp, None, &gaussian).unwrap();
        assert_eq!(sys.time_dim(), 1);
        let d = direct_solve(&sys).unwrap();
        let b = bartels_stewart_solve(&sys).unwrap();
        for (x, y) in d.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn schur_of_diagonal() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.0)]));
        let s = schur_decompose(&x).unwrap();
        assert!((&s.r - &x).camax() < 1e-15);
        assert!(s.unitarity_defect() < 1e-15);
    }
}
