//! Condition numbers of the scaled temporal systems and the pencil spectrum.

use crate::eigen::eigenvalues;
use crate::error::{invalid, Error, Result};
use crate::linalg::one_norm;
use crate::temporal::{assemble_temporal, scaled_system};
use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;

/// Largest matrix handled by the dense SVD and inverse routines.
pub const MAX_DENSE_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Spectral,
    One,
}

impl NormKind {
    pub fn label(self) -> &'static str {
        match self {
            NormKind::Spectral => "2",
            NormKind::One => "1",
        }
    }
}

/// Condition number, or `f64::INFINITY` for a numerically singular matrix.
pub fn condition_number<T>(m: &DMatrix<T>, kind: NormKind) -> Result<f64>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if !m.is_square() {
        return Err(Error::Dimension(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    if n > MAX_DENSE_SIZE {
        return Err(Error::InvalidArgument(format!("size {n} exceeds the dense limit {MAX_DENSE_SIZE}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    match kind {
        NormKind::Spectral => {
            let sv = m.clone().singular_values();
            let (max, min) = (sv.max(), sv.min());
            if min == 0.0 || min <= max * f64::EPSILON {
                Ok(f64::INFINITY)
            } else {
                Ok(max / min)
            }
        }
        NormKind::One => match m.clone().lu().try_inverse() {
            Some(inv) => {
                let k = one_norm(m) * one_norm(&inv);
                Ok(if k.is_finite() { k } else { f64::INFINITY })
            }
            None => Ok(f64::INFINITY),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningRow {
    pub n: usize,
    pub rho: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningReport {
    pub degree: usize,
    pub norm: NormKind,
    pub rows: Vec<ConditioningRow>,
    /// Least-squares slope of `log kappa` against `log n`, per parameter value.
    /// `None` when fewer than two finite sizes are available.
    pub slopes: Vec<(f64, Option<f64>)>,
}

impl ConditioningReport {
    pub(crate) fn from_rows(degree: usize, norm: NormKind, params: &[f64], rows: Vec<ConditioningRow>) -> Self {
        let slopes = params
            .iter()
            .map(|&rho| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.rho == rho && r.kappa.is_finite())
                    .map(|r| ((r.n as f64).ln(), r.kappa.ln()))
                    .collect();
                (rho, least_squares_slope(&pts))
            })
            .collect();
        Self { degree, norm, rows, slopes }
    }

    pub fn max_slope(&self) -> Option<f64> {
        self.slopes.iter().filter_map(|s| s.1).reduce(f64::max)
    }

    /// Ratio between the largest and smallest condition number at size `n`.
    pub fn parameter_variation(&self, n: usize) -> f64 {
        let ks: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.kappa).collect();
        let max = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub(crate) fn check_sizes(p: usize, sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(invalid("no sizes given"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sizes must be strictly ascending"));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 4 * p) {
        return Err(Error::TooSmall { size: n, required: 4 * p });
    }
    if let Some(&n) = sizes.iter().find(|&&n| n > MAX_DENSE_SIZE) {
        return Err(invalid(format!("size {n} exceeds the dense limit {MAX_DENSE_SIZE}")));
    }
    Ok(())
}

/// Condition numbers of `K_n(rho) = i hB - rho C` for every `(n, rho)` pair,
/// where `n = Nt + p - 1` is the matrix size.
pub fn conditioning_sweep(p: usize, sizes: &[usize], rhos: &[f64], norm: NormKind) -> Result<ConditioningReport> {
    check_sizes(p, sizes)?;
    let pairs: Vec<(usize, f64)> = sizes.iter().flat_map(|&n| rhos.iter().map(move |&r| (n, r))).collect();
    let rows = pairs
        .par_iter()
        .map(|&(n, rho)| {
            let sys = scaled_system(p, n + 1 - p, rho)?;
            Ok(ConditioningRow { n, rho, kappa: condition_number(&sys.matrix, norm)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditioningReport::from_rows(p, norm, rhos, rows))
}

/// Eigenvalues of the pencil `B v = lambda C v`.
#[derive(Debug, Clone)]
pub struct PencilSpectrum {
    pub degree: usize,
    pub num_elements: usize,
    pub finite: Vec<Complex64>,
    pub infinite_count: usize,
    pub min_abs_real: f64,
    pub near_imaginary: usize,
}

pub const NEAR_IMAGINARY_TOL: f64 = 1e-8;
pub const MAX_PENCIL_ELEMENTS: usize = 64;

pub fn gevp_spectrum(p: usize, nt: usize) -> Result<PencilSpectrum> {
    if nt > MAX_PENCIL_ELEMENTS {
        return Err(invalid(format!("Nt = {nt} exceeds {MAX_PENCIL_ELEMENTS} in double precision")));
    }
    let tm = assemble_temporal(p, nt, 1.0)?;
    let b = tm.b.map(|v| Complex64::new(v, 0.0));
    let c = tm.c.map(|v| Complex64::new(v, 0.0));
    // B^{-1} C has eigenvalues 1 / lambda; zero ones belong to infinite lambda
    let x = b.lu().solve(&c).ok_or(Error::Singular { smallest: 0.0 })?;
    let nus = eigenvalues(&x)?;
    let scale = nus.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Consistency("pencil is numerically degenerate".into()));
    }
    let mut finite = Vec::with_capacity(nus.len());
    let mut infinite_count = 0;
    for nu in nus {
        if nu.norm() <= 1e-12 * scale {
            infinite_count += 1;
        } else {
            finite.push(1.0 / nu);
        }
    }
    finite.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let min_abs_real = finite.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    let near_imaginary = finite.iter().filter(|l| l.re.abs() < NEAR_IMAGINARY_TOL * l.norm()).count();
    Ok(PencilSpectrum { degree: p, num_elements: nt, finite, infinite_count, min_abs_real, near_imaginary })
}
