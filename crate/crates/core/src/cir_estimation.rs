//! CIR recovery from partial-subcarrier CSI.
//!
//! The LS estimator solves `min ||F_{K,L} h - H_K||` over a fixed tap support,
//! where `F` is the unitary DFT. The IDFT baseline zero-fills the missing bins.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dft::{inverse_unitary, unitary_entry};
use crate::error::{Error, Result};
use crate::frame::{Cir, CsiFrame};
use crate::layout::{SubcarrierLayout, TapSet};

/// Condition-number bound for unregularized Gram matrices.
pub const DEFAULT_COND_BOUND: f64 = 1e8;

/// Ridge selection for [`build_ls_operator`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Ridge {
    /// `1e-6 * trace(Gram) / |L|`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Ridge {
    pub fn resolve(self, layout: &SubcarrierLayout, tapset: &TapSet) -> f64 {
        match self {
            Ridge::Fixed(v) => v,
            // unitary columns: every Gram diagonal entry is |K| / N
            Ridge::Auto => {
                let trace = tapset.len() as f64 * layout.n_active() as f64 / layout.n_fft() as f64;
                1e-6 * trace / tapset.len() as f64
            }
        }
    }
}

/// Something that turns a CSI frame into taps over a support containing tap 0.
pub trait CirEstimator: Send + Sync {
    fn layout(&self) -> &Arc<SubcarrierLayout>;
    fn tapset(&self) -> &Arc<TapSet>;
    fn estimate(&self, frame: &CsiFrame) -> Result<Cir>;
    /// Weights `w` with `h[0] = sum_k w_k H_k`.
    fn zero_tap_weights(&self) -> Result<&[Complex64]>;
}

/// `F_{K,L}` as a dense |K| x |L| matrix.
pub fn sub_dft_matrix(layout: &SubcarrierLayout, tapset: &TapSet) -> DMatrix<Complex64> {
    let n = layout.n_fft();
    DMatrix::from_fn(layout.n_active(), tapset.len(), |r, c| unitary_entry(layout.active()[r], tapset.taps()[c], n))
}

/// Precomputed `(F^H F + lambda I)^{-1} F^H` for one (layout, tap set) pair.
#[derive(Debug, Clone)]
pub struct LsOperator {
    layout: Arc<SubcarrierLayout>,
    tapset: Arc<TapSet>,
    ridge: f64,
    cond: f64,
    // row-major, |taps| x |active|
    matrix: Vec<Complex64>,
}

pub fn build_ls_operator(layout: Arc<SubcarrierLayout>, tapset: Arc<TapSet>, ridge: f64) -> Result<LsOperator> {
    build_ls_operator_with_bound(layout, tapset, ridge, DEFAULT_COND_BOUND)
}

pub fn build_ls_operator_with_bound(
    layout: Arc<SubcarrierLayout>,
    tapset: Arc<TapSet>,
    ridge: f64,
    cond_bound: f64,
) -> Result<LsOperator> {
    if tapset.n_fft() != layout.n_fft() {
        return Err(Error::LayoutMismatch);
    }
    if tapset.len() > layout.n_active() {
        return Err(Error::InvalidTapSet(format!(
            "{} taps exceed {} active subcarriers",
            tapset.len(),
            layout.n_active()
        )));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    let f = sub_dft_matrix(&layout, &tapset);
    let fh = f.adjoint();
    let gram = &fh * &f;

    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if ridge == 0.0 && !(cond < cond_bound) {
        return Err(Error::IllConditioned { cond, bound: cond_bound });
    }

    let mut reg = gram;
    for i in 0..reg.nrows() {
        reg[(i, i)] += Complex64::new(ridge, 0.0);
    }
    let chol = reg.cholesky().ok_or(Error::IllConditioned { cond, bound: cond_bound })?;
    let solved = chol.solve(&fh);
    let mut matrix = Vec::with_capacity(solved.nrows() * solved.ncols());
    for r in 0..solved.nrows() {
        for c in 0..solved.ncols() {
            matrix.push(solved[(r, c)]);
        }
    }
    Ok(LsOperator { layout, tapset, ridge, cond, matrix })
}

impl LsOperator {
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Condition number of the unregularized Gram matrix.
    pub fn gram_condition(&self) -> f64 {
        self.cond
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let w = self.layout.n_active();
        &self.matrix[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> usize {
        self.tapset.len()
    }

    /// Apply to a raw active-subcarrier vector.
    pub fn apply(&self, csi: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows()).map(|r| self.row(r).iter().zip(csi).map(|(a, b)| a * b).sum()).collect()
    }
}

impl CirEstimator for LsOperator {
    fn layout(&self) -> &Arc<SubcarrierLayout> {
        &self.layout
    }

    fn tapset(&self) -> &Arc<TapSet> {
        &self.tapset
    }

    fn estimate(&self, frame: &CsiFrame) -> Result<Cir> {
        estimate_cir_ls(self, frame)
    }

    fn zero_tap_weights(&self) -> Result<&[Complex64]> {
        let i = self.tapset.position_of(0).ok_or(Error::MissingZeroTap)?;
        Ok(self.row(i))
    }
}

/// `h = op * H_K`.
pub fn estimate_cir_ls(op: &LsOperator, frame: &CsiFrame) -> Result<Cir> {
    if !frame.same_layout(&op.layout) {
        return Err(Error::LayoutMismatch);
    }
    Cir::new(Arc::clone(&op.tapset), op.apply(&frame.values), op.layout.ts())
}

/// Zero-fill the inactive bins and take the unitary inverse DFT; all N taps.
pub fn estimate_cir_idft(frame: &CsiFrame) -> Cir {
    let layout = &frame.layout;
    let taps = idft_taps(frame);
    let tapset = TapSet::contiguous(layout.n_fft(), layout.n_fft()).expect("full grid");
    Cir { tapset: Arc::new(tapset), taps, ts: layout.ts() }
}

fn idft_taps(frame: &CsiFrame) -> Vec<Complex64> {
    let layout = &frame.layout;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); layout.n_fft()];
    for (&k, &v) in layout.active().iter().zip(&frame.values) {
        spectrum[k] = v;
    }
    inverse_unitary(&spectrum)
}

/// IDFT baseline restricted to a tap support, for side-by-side use with LS.
#[derive(Debug, Clone)]
pub struct IdftEstimator {
    layout: Arc<SubcarrierLayout>,
    tapset: Arc<TapSet>,
    weights: Vec<Complex64>,
}

impl IdftEstimator {
    pub fn new(layout: Arc<SubcarrierLayout>, tapset: Arc<TapSet>) -> Result<Self> {
        if tapset.n_fft() != layout.n_fft() {
            return Err(Error::LayoutMismatch);
        }
        let w = Complex64::new(1.0 / (layout.n_fft() as f64).sqrt(), 0.0);
        let weights = vec![w; layout.n_active()];
        Ok(Self { layout, tapset, weights })
    }
}

impl CirEstimator for IdftEstimator {
    fn layout(&self) -> &Arc<SubcarrierLayout> {
        &self.layout
    }

    fn tapset(&self) -> &Arc<TapSet> {
        &self.tapset
    }

    fn estimate(&self, frame: &CsiFrame) -> Result<Cir> {
        if !frame.same_layout(&self.layout) {
            return Err(Error::LayoutMismatch);
        }
        let all = idft_taps(frame);
        let taps = self.tapset.taps().iter().map(|&t| all[t]).collect();
        Cir::new(Arc::clone(&self.tapset), taps, self.layout.ts())
    }

    fn zero_tap_weights(&self) -> Result<&[Complex64]> {
        self.tapset.position_of(0).ok_or(Error::MissingZeroTap)?;
        Ok(&self.weights)
    }
}

/// `F_{K,L} x`: the active-subcarrier CSI produced by taps `x` on `tapset`.
pub fn csi_from_taps(layout: &SubcarrierLayout, tapset: &TapSet, x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != tapset.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: tapset.len() });
    }
    if tapset.n_fft() != layout.n_fft() {
        return Err(Error::LayoutMismatch);
    }
    let n = layout.n_fft();
    Ok(layout
        .active()
        .iter()
        .map(|&k| tapset.taps().iter().zip(x).map(|(&t, &v)| unitary_entry(k, t, n) * v).sum())
        .collect())
}

/// Normalized MSE in dB: `10 log10(||est - truth||^2 / ||truth||^2)`.
pub fn nmse_db(estimate: &[Complex64], truth: &[Complex64]) -> f64 {
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    let norm: f64 = truth.iter().map(|v| v.norm_sqr()).sum();
    10.0 * (err / norm).log10()
}
