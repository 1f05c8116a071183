//! Real block form of the temporal problem and its link to the wave equation.

use crate::conditioning::{check_sizes, condition_number, ConditioningReport, ConditioningRow, NormKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::{one_norm, singular_values};
use crate::temporal::{assemble_temporal, scalar_rhs};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Largest temporal size `n` accepted by the block sweeps (blocks are `2n x 2n`).
pub const MAX_BLOCK_SIZE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockKind {
    /// Real and imaginary parts of `i u' + mu_s u = f`.
    SchrodingerSplit { mu_s: f64 },
    /// First-order form of `u'' + mu_w u = f`.
    Wave { mu_w: f64 },
}

impl BlockKind {
    /// Factor in front of `C B^{-1} C` in the Schur complement.
    pub fn schur_coefficient(self) -> f64 {
        match self {
            BlockKind::SchrodingerSplit { mu_s } => mu_s * mu_s,
            BlockKind::Wave { mu_w } => mu_w,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            BlockKind::SchrodingerSplit { mu_s } if mu_s.is_finite() => Ok(()),
            BlockKind::Wave { mu_w } if mu_w.is_finite() && mu_w >= 0.0 => Ok(()),
            other => Err(invalid(format!("invalid block parameter in {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub kind: BlockKind,
    pub degree: usize,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// `[[B, -mu_s C], [mu_s C, B]]` or `[[B, C], [-mu_w C, B]]`.
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Both halves `(u, v)` of the solution.
    pub fn solve(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let x = self.matrix.clone().lu().solve(&self.rhs).ok_or(Error::Singular { smallest: 0.0 })?;
        let n = self.dim();
        Ok((x.rows(0, n).into_owned(), x.rows(n, n).into_owned()))
    }
}

fn block_matrix(b: &DMatrix<f64>, upper: &DMatrix<f64>, lower: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(b);
    m.view_mut((0, n), (n, n)).copy_from(upper);
    m.view_mut((n, 0), (n, n)).copy_from(lower);
    m.view_mut((n, n), (n, n)).copy_from(b);
    m
}

/// Block system with zero initial data. The wave kind uses the real part of
/// `source`.
pub fn assemble_block_system(
    kind: BlockKind,
    p: usize,
    nt: usize,
    t_final: f64,
    source: &dyn Fn(f64) -> Complex64,
) -> Result<BlockSystem> {
    kind.validate()?;
    let tm = assemble_temporal(p, nt, t_final)?;
    let load = scalar_rhs(&tm, 0.0, Complex64::new(0.0, 0.0), source)?;
    let n = tm.dim();
    let (matrix, rhs) = match kind {
        BlockKind::SchrodingerSplit { mu_s } => {
            let mc = &tm.c * mu_s;
            let rhs = DVector::from_fn(2 * n, |k, _| if k < n { load[k].im } else { -load[k - n].re });
            (block_matrix(&tm.b, &(-&mc), &mc), rhs)
        }
        BlockKind::Wave { mu_w } => {
            let rhs = DVector::from_fn(2 * n, |k, _| if k < n { 0.0 } else { load[k - n].re });
            (block_matrix(&tm.b, &tm.c, &(&tm.c * -mu_w)), rhs)
        }
    };
    Ok(BlockSystem { kind, degree: p, b: tm.b, c: tm.c, matrix, rhs })
}

#[derive(Debug, Clone)]
pub struct SchurComplementReport {
    pub norm: NormKind,
    pub schur: DMatrix<f64>,
    pub kappa_schur: f64,
    pub kappa_block: f64,
    pub kappa_b: f64,
    /// `(1 + coefficient |C|^2 / |B|^2 kappa(B)) kappa(block)`.
    pub bound: f64,
}

impl SchurComplementReport {
    pub fn bound_holds(&self) -> bool {
        !(self.kappa_schur.is_finite() && self.bound.is_finite()) || self.kappa_schur <= self.bound
    }
}

fn matrix_norm(m: &DMatrix<f64>, kind: NormKind) -> f64 {
    match kind {
        NormKind::One => one_norm(m),
        NormKind::Spectral => singular_values(m).max(),
    }
}

/// Schur complement `S = B + coefficient * C B^{-1} C` and the quantities of
/// the bound on its condition number. The bound is guaranteed for the block
/// `[[B, -sqrt(c) C], [sqrt(c) C, B]]` in the 1-norm; spectral values are
/// informative only.
pub fn schur_complement_report(
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    coefficient: f64,
    block: &DMatrix<f64>,
    norm: NormKind,
) -> Result<SchurComplementReport> {
    if b.shape() != c.shape() || !b.is_square() || block.nrows() != 2 * b.nrows() || !block.is_square() {
        return Err(Error::Dimension("blocks do not fit".into()));
    }
    let b_lu = b.clone().lu();
    let binv_c = b_lu.solve(c).ok_or(Error::Singular { smallest: 0.0 })?;
    let schur = b + c * binv_c * coefficient;
    let kappa_b = condition_number(b, norm)?;
    let kappa_block = condition_number(block, norm)?;
    let ratio = matrix_norm(c, norm) / matrix_norm(b, norm);
    Ok(SchurComplementReport {
        norm,
        kappa_schur: condition_number(&schur, norm)?,
        kappa_block,
        kappa_b,
        bound: (1.0 + coefficient * ratio * ratio * kappa_b) * kappa_block,
        schur,
    })
}

pub fn block_schur_report(system: &BlockSystem, norm: NormKind) -> Result<SchurComplementReport> {
    schur_complement_report(&system.b, &system.c, system.kind.schur_coefficient(), &system.matrix, norm)
}

/// Largest `|psi_j - (u_j + i v_j)|` between the complex solve and the real
/// split solve of the same problem with zero initial data.
pub fn verify_equivalence(
    p: usize,
    nt: usize,
    t_final: f64,
    mu_s: f64,
    source: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let tm = assemble_temporal(p, nt, t_final)?;
    let rhs = scalar_rhs(&tm, mu_s, Complex64::new(0.0, 0.0), source)?;
    let psi = tm.pencil(mu_s).lu().solve(&rhs).ok_or(Error::Singular { smallest: 0.0 })?;
    let split = assemble_block_system(BlockKind::SchrodingerSplit { mu_s }, p, nt, t_final, source)?;
    let (u, v) = split.solve()?;
    Ok(psi
        .iter()
        .zip(u.iter().zip(v.iter()))
        .map(|(z, (&re, &im))| (z - Complex64::new(re, im)).norm())
        .fold(0.0, f64::max))
}

/// Spectral condition numbers of the wave block matrix, with `T = 1` and
/// `n = Nt + p - 1`.
pub fn wave_conditioning_sweep(p: usize, sizes: &[usize], mu_w_values: &[f64]) -> Result<ConditioningReport> {
    check_sizes(p, sizes)?;
    if let Some(&n) = sizes.iter().find(|&&n| n > MAX_BLOCK_SIZE) {
        return Err(invalid(format!("size {n} exceeds the block limit {MAX_BLOCK_SIZE}")));
    }
    for &mu_w in mu_w_values {
        BlockKind::Wave { mu_w }.validate()?;
    }
    let zero = |_: f64| Complex64::new(0.0, 0.0);
    let pairs: Vec<(usize, f64)> = sizes.iter().flat_map(|&n| mu_w_values.iter().map(move |&m| (n, m))).collect();
    let rows = pairs
        .par_iter()
        .map(|&(n, mu_w)| {
            let sys = assemble_block_system(BlockKind::Wave { mu_w }, p, n + 1 - p, 1.0, &zero)?;
            Ok(ConditioningRow { n, rho: mu_w, kappa: condition_number(&sys.matrix, NormKind::Spectral)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditioningReport::from_rows(p, NormKind::Spectral, mu_w_values, rows))
}

/// One row of the wave check: 1-norm condition numbers of the wave block and
/// its Schur complement, with the bound evaluated on the split block at
/// `mu_s = sqrt(mu_w)`, which has the same Schur complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveCheckRow {
    pub n: usize,
    pub mu_w: f64,
    pub kappa_block: f64,
    pub kappa_schur: f64,
    pub lemma_bound: f64,
}

pub fn wave_check(p: usize, sizes: &[usize], mu_w_values: &[f64]) -> Result<Vec<WaveCheckRow>> {
    check_sizes(p, sizes)?;
    if let Some(&n) = sizes.iter().find(|&&n| n > MAX_BLOCK_SIZE) {
        return Err(invalid(format!("size {n} exceeds the block limit {MAX_BLOCK_SIZE}")));
    }
    let zero = |_: f64| Complex64::new(0.0, 0.0);
    let pairs: Vec<(usize, f64)> = sizes.iter().flat_map(|&n| mu_w_values.iter().map(move |&m| (n, m))).collect();
    pairs
        .par_iter()
        .map(|&(n, mu_w)| {
            let nt = n + 1 - p;
            let wave = assemble_block_system(BlockKind::Wave { mu_w }, p, nt, 1.0, &zero)?;
            let split = assemble_block_system(BlockKind::SchrodingerSplit { mu_s: mu_w.sqrt() }, p, nt, 1.0, &zero)?;
            let rep = block_schur_report(&split, NormKind::One)?;
            Ok(WaveCheckRow {
                n,
                mu_w,
                kappa_block: condition_number(&wave.matrix, NormKind::One)?,
                kappa_schur: rep.kappa_schur,
                lemma_bound: rep.bound,
            })
        })
        .collect()
}

pub fn wave_check_csv(p: usize, rows: &[WaveCheckRow]) -> String {
    let mut out = String::from("p,n,mu,kappa_block,kappa_schur,lemma_bound\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{p},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.mu_w, r.kappa_block, r.kappa_schur, r.lemma_bound
        );
    }
    out
}

/// Infinity-norm variant of [`schur_complement_report`]; condition numbers
/// in the infinity-norm equal 1-norm ones of the transposes.
pub fn schur_complement_report_inf(
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    coefficient: f64,
    block: &DMatrix<f64>,
) -> Result<SchurComplementReport> {
    let mut rep = schur_complement_report(&b.transpose(), &c.transpose(), coefficient, &block.transpose(), NormKind::One)?;
    rep.schur = rep.schur.transpose();
    Ok(rep)
}
