//! Dominant-path distortion compensation.
//!
//! Two steps per frame:
//!
//! 1. Alignment: find the delay shift that maximizes the magnitude of the
//!    first CIR tap. Shifts are applied as phase ramps on the raw CSI, so they
//!    may be fractional.
//! 2. Normalization: divide the aligned CIR by its first tap. The gain and
//!    phase distortions are common to every path and cancel in the ratio.
//!
//! The alignment search is coarse-to-fine: integer candidate from the full
//! circular IDFT, golden-section refinement of the estimator's tap-0 row over a
//! two-tap bracket, then Newton steps on the analytic derivative so the
//! optimum is located to near machine precision.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cir_estimation::{estimate_cir_idft, CirEstimator};
use crate::error::{Error, Result};
use crate::frame::{Cir, CsiFrame};
use crate::search::golden_section_max;

/// Magnitude floor guarding empty frames and the normalizing division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFloor {
    Absolute(f64),
    /// Fraction of the median tap magnitude.
    RelativeToMedian(f64),
}

impl Default for NoiseFloor {
    fn default() -> Self {
        NoiseFloor::RelativeToMedian(1e-3)
    }
}

impl NoiseFloor {
    pub fn resolve(&self, magnitudes: &[f64]) -> f64 {
        match *self {
            NoiseFloor::Absolute(v) => v,
            NoiseFloor::RelativeToMedian(frac) => frac * median(magnitudes),
        }
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let m = v.len() / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(m, |a, b| a.total_cmp(b));
    if values.len() % 2 == 1 {
        *upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + *upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Golden-section stopping width, taps.
    pub tol_taps: f64,
    /// Largest admissible |shift| in taps; `None` means N/4.
    pub search_radius_taps: Option<f64>,
    /// Newton refinement after golden section.
    pub polish: bool,
    pub noise_floor: NoiseFloor,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { tol_taps: 1e-4, search_radius_taps: None, polish: true, noise_floor: NoiseFloor::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompensationConfig {
    pub search: SearchConfig,
    /// Also produce the compensated CSI.
    pub with_csi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    /// Delay correction in taps, `~ -(tau_0 + eps) / ts`. The aligned frame is
    /// `apply_delay_shift(frame, -epsilon_est)`.
    pub epsilon_est: f64,
    /// `|h[0]|^2` at the optimum, in estimator units.
    pub peak_power: f64,
    /// Strongest tap before alignment, signed.
    pub n0: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedFrame {
    pub timestamp: f64,
    /// Normalized CIR; the tap at delay 0 is exactly `1 + 0j`.
    pub cir_norm: Cir,
    pub alignment: AlignmentResult,
    /// Aligned CSI divided by the dominant tap, when requested. Its LS
    /// estimate is `cir_norm`.
    pub csi_norm: Option<CsiFrame>,
}

/// `H'[k] = H[k] e^{+j 2 pi k shift / N}` with `k` the signed bin: moves CIR
/// energy `shift` taps toward tap 0, i.e. yields `h[n + shift]`.
pub fn apply_delay_shift(frame: &CsiFrame, shift_taps: f64) -> CsiFrame {
    if shift_taps == 0.0 {
        return frame.clone();
    }
    let layout = &frame.layout;
    let nf = layout.n_fft() as f64;
    let values = layout
        .active()
        .iter()
        .zip(&frame.values)
        .map(|(&k, &h)| {
            let ks = layout.signed_index(k) as f64;
            h * Complex64::from_polar(1.0, TAU * ks * shift_taps / nf)
        })
        .collect();
    CsiFrame { timestamp: frame.timestamp, layout: Arc::clone(layout), values }
}

/// Tap 0 of a shifted frame as a trigonometric polynomial in the shift:
/// `g(s) = sum_k c_k e^{j 2 pi k s / N}` with `c_k = w_k H_k`, stored as
/// `c_0 + sum_m (pos_m z^m + neg_m z^-m)`.
struct ZeroTapProfile {
    dc: Complex64,
    pos: Vec<Complex64>,
    neg: Vec<Complex64>,
    n_fft: f64,
}

impl ZeroTapProfile {
    fn new(frame: &CsiFrame, weights: &[Complex64]) -> Self {
        let bins = frame.layout.signed_active();
        let max_bin = bins.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
        let zero = Complex64::new(0.0, 0.0);
        let (mut dc, mut pos, mut neg) = (zero, vec![zero; max_bin + 1], vec![zero; max_bin + 1]);
        for ((w, h), &k) in weights.iter().zip(&frame.values).zip(&bins) {
            match k {
                0 => dc += w * h,
                k if k > 0 => pos[k as usize] += w * h,
                k => neg[(-k) as usize] += w * h,
            }
        }
        Self { dc, pos, neg, n_fft: frame.layout.n_fft() as f64 }
    }

    /// Visits `(m, z^m)` for m >= 1.
    fn for_each_power(&self, s: f64, mut f: impl FnMut(usize, Complex64)) {
        let z = Complex64::from_polar(1.0, TAU * s / self.n_fft);
        let mut acc = z;
        for m in 1..self.pos.len() {
            // resync with an exact phasor to bound drift
            if m % 32 == 0 {
                acc = Complex64::from_polar(1.0, TAU * s * m as f64 / self.n_fft);
            }
            f(m, acc);
            acc *= z;
        }
    }

    fn value(&self, s: f64) -> Complex64 {
        let mut g = self.dc;
        self.for_each_power(s, |m, p| g += self.pos[m] * p + self.neg[m] * p.conj());
        g
    }

    fn power(&self, s: f64) -> f64 {
        self.value(s).norm_sqr()
    }

    /// `(g, g', g'')` at `s`.
    fn derivatives(&self, s: f64) -> (Complex64, Complex64, Complex64) {
        let mut g = self.dc;
        let mut g1 = Complex64::new(0.0, 0.0);
        let mut g2 = Complex64::new(0.0, 0.0);
        self.for_each_power(s, |m, p| {
            let w = TAU * m as f64 / self.n_fft;
            let a = self.pos[m] * p;
            let b = self.neg[m] * p.conj();
            g += a + b;
            g1 += (a - b) * Complex64::new(0.0, w);
            g2 -= (a + b) * (w * w);
        });
        (g, g1, g2)
    }
}

fn search_radius(cfg: &SearchConfig, n_fft: usize) -> f64 {
    let r = cfg.search_radius_taps.unwrap_or(n_fft as f64 / 4.0);
    r.clamp(1.0, (n_fft / 2) as f64)
}

/// Delay alignment maximizing the first-tap magnitude.
pub fn estimate_alignment(frame: &CsiFrame, est: &dyn CirEstimator, cfg: &SearchConfig) -> Result<AlignmentResult> {
    if !frame.same_layout(est.layout()) {
        return Err(Error::LayoutMismatch);
    }
    let weights = est.zero_tap_weights()?;
    let n_fft = frame.layout.n_fft();

    let coarse = estimate_cir_idft(frame);
    let mags: Vec<f64> = coarse.taps.iter().map(|v| v.norm()).collect();
    let floor = cfg.noise_floor.resolve(&mags);
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if !(peak > floor) || !peak.is_finite() {
        return Err(Error::EmptySignal { floor });
    }

    let radius = search_radius(cfg, n_fft);
    let r = radius.floor() as i64;
    let mut n0 = -r;
    let mut best = f64::NEG_INFINITY;
    for d in -r..=r {
        let m = mags[d.rem_euclid(n_fft as i64) as usize];
        if m > best {
            best = m;
            n0 = d;
        }
    }

    let profile = ZeroTapProfile::new(frame, weights);
    let lo = (n0 as f64 - 1.0).max(-radius);
    let hi = (n0 as f64 + 1.0).min(radius);
    let golden = golden_section_max(|s| profile.power(s), lo, hi, cfg.tol_taps);
    let mut shift = golden.x;
    let mut power = golden.value;

    if cfg.polish {
        for _ in 0..20 {
            let (g, g1, g2) = profile.derivatives(shift);
            let d1 = 2.0 * (g.conj() * g1).re;
            let d2 = 2.0 * (g1.norm_sqr() + (g.conj() * g2).re);
            if !(d2 < 0.0) {
                break;
            }
            let step = -d1 / d2;
            let next = shift + step;
            if !(next >= lo && next <= hi) || step.abs() > 2.0 * cfg.tol_taps.max(1e-6) {
                break;
            }
            shift = next;
            power = profile.power(shift);
            if step.abs() < 1e-14 {
                break;
            }
        }
    }

    for cand in [n0 - 1, n0, n0 + 1] {
        let c = cand as f64;
        if c >= lo && c <= hi {
            let p = profile.power(c);
            if p > power {
                power = p;
                shift = c;
            }
        }
    }

    Ok(AlignmentResult { epsilon_est: -shift, peak_power: power, n0 })
}

/// Divide every tap by the tap at delay 0.
pub fn dominant_path_normalize(cir: &Cir, floor: NoiseFloor) -> Result<Cir> {
    let pos = cir.tapset.position_of(0).ok_or(Error::MissingZeroTap)?;
    let mags: Vec<f64> = cir.taps.iter().map(|v| v.norm()).collect();
    let threshold = floor.resolve(&mags);
    let reference = cir.taps[pos];
    let magnitude = reference.norm();
    if !(magnitude >= threshold) || magnitude == 0.0 || !magnitude.is_finite() {
        return Err(Error::DominantTapTooWeak { magnitude, floor: threshold });
    }
    let mut taps: Vec<Complex64> = cir.taps.iter().map(|v| v / reference).collect();
    taps[pos] = Complex64::new(1.0, 0.0);
    Cir::new(Arc::clone(&cir.tapset), taps, cir.ts)
}

/// Alignment, shift, re-estimation and normalization of one frame.
pub fn compensate_frame(
    frame: &CsiFrame,
    est: &dyn CirEstimator,
    cfg: &CompensationConfig,
) -> Result<CompensatedFrame> {
    let alignment = estimate_alignment(frame, est, &cfg.search)?;
    compensate_with_alignment(frame, est, cfg, alignment)
}

/// [`compensate_frame`] with a precomputed alignment.
pub fn compensate_with_alignment(
    frame: &CsiFrame,
    est: &dyn CirEstimator,
    cfg: &CompensationConfig,
    alignment: AlignmentResult,
) -> Result<CompensatedFrame> {
    let aligned = apply_delay_shift(frame, -alignment.epsilon_est);
    let cir = est.estimate(&aligned)?;
    let pos = cir.tapset.position_of(0).ok_or(Error::MissingZeroTap)?;
    let reference = cir.taps[pos];
    let cir_norm = dominant_path_normalize(&cir, cfg.search.noise_floor)?;
    let csi_norm = cfg.with_csi.then(|| aligned.scaled(Complex64::new(1.0, 0.0) / reference));
    Ok(CompensatedFrame { timestamp: frame.timestamp, cir_norm, alignment, csi_norm })
}

/// Clamps frame-to-frame alignment jumps for one antenna stream.
#[derive(Debug, Clone)]
pub struct AlignmentSmoother {
    max_jump_taps: f64,
    last: Option<f64>,
}

impl AlignmentSmoother {
    pub fn new(max_jump_taps: f64) -> Self {
        Self { max_jump_taps, last: None }
    }

    pub fn smooth(&mut self, mut a: AlignmentResult) -> AlignmentResult {
        if let Some(prev) = self.last {
            a.epsilon_est = a.epsilon_est.clamp(prev - self.max_jump_taps, prev + self.max_jump_taps);
        }
        self.last = Some(a.epsilon_est);
        a
    }
}

/// Compensates whole streams with a fixed estimator.
#[derive(Clone)]
pub struct Compensator {
    estimator: Arc<dyn CirEstimator>,
    cfg: CompensationConfig,
    /// Max alignment jump per frame when tracking; `None` for independent frames.
    smoothing: Option<f64>,
}

impl Compensator {
    pub fn new(estimator: Arc<dyn CirEstimator>, cfg: CompensationConfig) -> Self {
        Self { estimator, cfg, smoothing: None }
    }

    pub fn with_smoothing(mut self, max_jump_taps: f64) -> Self {
        self.smoothing = Some(max_jump_taps);
        self
    }

    pub fn estimator(&self) -> &Arc<dyn CirEstimator> {
        &self.estimator
    }

    pub fn config(&self) -> &CompensationConfig {
        &self.cfg
    }

    pub fn compensate(&self, frame: &CsiFrame) -> Result<CompensatedFrame> {
        compensate_frame(frame, self.estimator.as_ref(), &self.cfg)
    }

    /// One antenna stream, in order. Independent mode runs frames in parallel.
    pub fn compensate_stream(&self, frames: &[CsiFrame]) -> Result<Vec<CompensatedFrame>> {
        match self.smoothing {
            None => frames.par_iter().map(|f| self.compensate(f)).collect(),
            Some(jump) => {
                let mut smoother = AlignmentSmoother::new(jump);
                frames
                    .iter()
                    .map(|f| {
                        let a = estimate_alignment(f, self.estimator.as_ref(), &self.cfg.search)?;
                        compensate_with_alignment(f, self.estimator.as_ref(), &self.cfg, smoother.smooth(a))
                    })
                    .collect()
            }
        }
    }
}
