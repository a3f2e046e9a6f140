//! Respiration-rate estimation from compensated time series.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Minimum analysis span, seconds.
pub const MIN_DURATION_S: f64 = 30.0;
pub const DETREND_WINDOW_S: f64 = 10.0;
/// Peak-to-median ratio below which no rate is reported.
pub const MIN_PEAK_RATIO: f64 = 3.0;
pub const ZERO_PAD_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Default for Band {
    fn default() -> Self {
        Self { lo_hz: 0.1, hi_hz: 0.5 }
    }
}

impl Band {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        let b = Self { lo_hz, hi_hz };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo_hz > 0.0 && self.hi_hz > self.lo_hz && self.hi_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!("band [{}, {}] Hz", self.lo_hz, self.hi_hz)));
        }
        Ok(())
    }

    fn check_fs(&self, fs: f64) -> Result<()> {
        self.validate()?;
        if !(fs > 2.0 * self.hi_hz) {
            return Err(Error::InvalidArgument(format!("fs {fs} Hz must exceed twice the band edge {}", self.hi_hz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSelection {
    pub index: usize,
    /// In-band share of detrended signal power, in [0, 1].
    pub periodicity_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub bpm: f64,
    /// Spectral peak over the in-band median.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    /// Absolute errors, bpm, in input order.
    pub samples: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    pub p80: f64,
}

impl ErrorStats {
    /// Sorted `(error, fraction <= error)` pairs.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut s = self.samples.clone();
        s.sort_by(|a, b| a.total_cmp(b));
        let n = s.len() as f64;
        s.into_iter().enumerate().map(|(i, e)| (e, (i + 1) as f64 / n)).collect()
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }
}

fn check_duration(len: usize, fs: f64) -> Result<()> {
    let seconds = len as f64 / fs;
    if seconds + 1e-9 < MIN_DURATION_S {
        return Err(Error::TooShort { seconds, required: MIN_DURATION_S });
    }
    Ok(())
}

/// Subtract a centered moving mean; the window shrinks at the edges.
pub fn detrend(signal: &[f64], fs: f64) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let half = ((DETREND_WINDOW_S * fs / 2.0).round() as usize).max(1);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in signal {
        acc += x;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            signal[i] - (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos()).collect()
}

struct Spectrum {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    len: usize,
}

impl Spectrum {
    fn new(planner: &mut FftPlanner<f64>, len: usize, pad_factor: usize) -> Self {
        let size = (len * pad_factor).next_power_of_two();
        Self { fft: planner.plan_fft_forward(size), window: hann(len), len: size }
    }

    /// One-sided magnitudes of the windowed signal.
    fn magnitudes(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for ((b, v), w) in buf.iter_mut().zip(x).zip(&self.window) {
            b.re = v * w;
        }
        self.fft.process(&mut buf);
        buf[..=self.len / 2].iter().map(|c| c.norm()).collect()
    }

    fn bin_range(&self, fs: f64, band: &Band) -> (usize, usize) {
        let df = fs / self.len as f64;
        let lo = (band.lo_hz / df).ceil() as usize;
        let hi = ((band.hi_hz / df).floor() as usize).min(self.len / 2);
        (lo, hi)
    }
}

fn periodicity(spec: &Spectrum, x: &[f64], fs: f64, band: &Band) -> f64 {
    let mags = spec.magnitudes(x);
    let (lo, hi) = spec.bin_range(fs, band);
    let total: f64 = mags.iter().map(|m| m * m).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let inband: f64 = mags[lo..=hi].iter().map(|m| m * m).sum();
    (inband / total).clamp(0.0, 1.0)
}

/// Periodicity score of one real series.
pub fn periodicity_score(signal: &[f64], fs: f64, band: Band) -> Result<f64> {
    band.check_fs(fs)?;
    check_duration(signal.len(), fs)?;
    let mut planner = FftPlanner::new();
    let spec = Spectrum::new(&mut planner, signal.len(), 1);
    Ok(periodicity(&spec, &detrend(signal, fs), fs, &band))
}

/// Channel whose detrended magnitude has the largest in-band power share.
/// `channels[c][t]`; ties go to the lowest index.
pub fn select_signal(channels: &[Vec<Complex64>], fs: f64, band: Band) -> Result<SignalSelection> {
    band.check_fs(fs)?;
    let first = channels.first().ok_or_else(|| Error::InvalidArgument("no channels".into()))?;
    let len = first.len();
    if let Some(c) = channels.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch { left: len, right: c.len() });
    }
    check_duration(len, fs)?;
    let mut planner = FftPlanner::new();
    let spec = Spectrum::new(&mut planner, len, 1);
    let mut best = SignalSelection { index: 0, periodicity_score: f64::NEG_INFINITY };
    for (i, c) in channels.iter().enumerate() {
        let mag: Vec<f64> = c.iter().map(|v| v.norm()).collect();
        let score = periodicity(&spec, &detrend(&mag, fs), fs, &band);
        if score > best.periodicity_score {
            best = SignalSelection { index: i, periodicity_score: score };
        }
    }
    Ok(best)
}

/// Spectral peak of the detrended, Hann-windowed, zero-padded series.
pub fn estimate_rate(signal: &[f64], fs: f64, band: Band) -> Result<RateEstimate> {
    band.check_fs(fs)?;
    check_duration(signal.len(), fs)?;
    let mut planner = FftPlanner::new();
    let spec = Spectrum::new(&mut planner, signal.len(), ZERO_PAD_FACTOR);
    let mags = spec.magnitudes(&detrend(signal, fs));
    let (lo, hi) = spec.bin_range(fs, &band);
    if hi < lo {
        return Err(Error::InvalidArgument("band narrower than one bin".into()));
    }
    let mut peak = lo;
    for i in lo..=hi {
        if mags[i] > mags[peak] {
            peak = i;
        }
    }
    let mut inband: Vec<f64> = mags[lo..=hi].to_vec();
    inband.sort_by(|a, b| a.total_cmp(b));
    let median = inband[inband.len() / 2];

    let mut offset = 0.0;
    if peak > 0 && peak + 1 < mags.len() {
        let (a, b, c) = (mags[peak - 1], mags[peak], mags[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    let df = fs / spec.len as f64;
    let f = ((peak as f64 + offset) * df).clamp(band.lo_hz, band.hi_hz);
    let bpm = 60.0 * f;
    let ratio = if median > 0.0 {
        mags[peak] / median
    } else if mags[peak] > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if !(ratio >= MIN_PEAK_RATIO) {
        return Err(Error::NoPeak { ratio, bpm });
    }
    Ok(RateEstimate { bpm, confidence: ratio })
}

/// Linear-interpolation percentile of sorted data, `p` in [0, 1].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let rank = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = rank.floor() as usize;
            let frac = rank - i as f64;
            if i + 1 >= n {
                sorted[n - 1]
            } else {
                sorted[i] + frac * (sorted[i + 1] - sorted[i])
            }
        }
    }
}

pub fn error_stats(estimates: &[f64], truths: &[f64]) -> Result<ErrorStats> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch { left: estimates.len(), right: truths.len() });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no estimates".into()));
    }
    let samples: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| (e - t).abs()).collect();
    Ok(stats_from_errors(samples))
}

/// Statistics over precomputed absolute errors.
pub fn stats_from_errors(samples: Vec<f64>) -> ErrorStats {
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    ErrorStats { median: percentile(&sorted, 0.5), p80: percentile(&sorted, 0.8), mean, samples }
}
