//! Multipath channels, per-frame hardware distortions and the CSI they produce.
//!
//! Every frame is `H[k] = beta e^{-j theta} sum_l a_l e^{-j2 pi f_c tau_l}
//! e^{-j2 pi f_k (tau_l + eps)} + noise`. The matching delay-domain pulse is the
//! Dirichlet kernel of the active band, so the CIR model and the frequency-domain
//! simulator agree exactly.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Cir, CsiFrame};
use crate::layout::{SubcarrierLayout, TapSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
}

impl PathComponent {
    pub fn new(gain: Complex64, delay: f64) -> Self {
        Self { gain, delay }
    }

    /// Path with delay given in taps of `ts`.
    pub fn in_taps(magnitude: f64, phase: f64, delay_taps: f64, ts: f64) -> Self {
        Self { gain: Complex64::from_polar(magnitude, phase), delay: delay_taps * ts }
    }
}

/// Ground-truth multipath description.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    paths: Vec<PathComponent>,
    carrier_hz: f64,
    layout: Arc<SubcarrierLayout>,
}

impl ChannelSpec {
    pub fn new(paths: Vec<PathComponent>, carrier_hz: f64, layout: Arc<SubcarrierLayout>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidChannel("at least one path required".into()));
        }
        if !(carrier_hz.is_finite() && carrier_hz >= 0.0) {
            return Err(Error::InvalidChannel(format!("bad carrier {carrier_hz}")));
        }
        let window = layout.n_fft() as f64 * layout.ts();
        for (i, p) in paths.iter().enumerate() {
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::InvalidChannel(format!("path {i} has a non-finite gain")));
            }
            if !(p.delay.is_finite() && p.delay >= 0.0 && p.delay < window) {
                return Err(Error::InvalidChannel(format!(
                    "path {i} delay {:.4e} s outside the tap window [0, {window:.4e})",
                    p.delay
                )));
            }
        }
        Ok(Self { paths, carrier_hz, layout })
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn layout(&self) -> &Arc<SubcarrierLayout> {
        &self.layout
    }

    /// Index of the strongest path; ties go to the smaller delay.
    pub fn strongest_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.paths.iter().enumerate().skip(1) {
            let (m, bm) = (p.gain.norm(), self.paths[best].gain.norm());
            if m > bm || (m == bm && p.delay < self.paths[best].delay) {
                best = i;
            }
        }
        best
    }

    /// Same paths and layout with path `index` replaced.
    pub fn with_path(&self, index: usize, path: PathComponent) -> Result<Self> {
        let mut paths = self.paths.clone();
        paths[index] = path;
        Self::new(paths, self.carrier_hz, Arc::clone(&self.layout))
    }

    /// Mean `|H[k]|^2` over the active band without distortion.
    pub fn mean_power(&self) -> f64 {
        let freqs = self.layout.active_freqs_hz();
        let h = response(self, &DistortionDraw::identity(), &freqs);
        h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64
    }
}

/// One frame's hardware distortion: AGC gain, phase offset, delay shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionDraw {
    pub beta: f64,
    /// Radians in `[0, 2 pi)`.
    pub theta: f64,
    /// Seconds.
    pub epsilon: f64,
}

impl DistortionDraw {
    pub fn new(beta: f64, theta: f64, epsilon: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidDistortion(format!("beta must be > 0, got {beta}")));
        }
        if !theta.is_finite() || !epsilon.is_finite() {
            return Err(Error::InvalidDistortion("non-finite theta or epsilon".into()));
        }
        Ok(Self { beta, theta: theta.rem_euclid(TAU), epsilon })
    }

    pub fn identity() -> Self {
        Self { beta: 1.0, theta: 0.0, epsilon: 0.0 }
    }

    /// `beta e^{-j theta}`.
    pub fn complex_gain(&self) -> Complex64 {
        Complex64::from_polar(self.beta, -self.theta)
    }

    /// `|epsilon| < N ts / 4`.
    pub fn check_window(&self, layout: &SubcarrierLayout) -> Result<()> {
        let limit = layout.n_fft() as f64 * layout.ts() / 4.0;
        if self.epsilon.abs() >= limit {
            return Err(Error::InvalidDistortion(format!(
                "|epsilon| = {:.4e} s must stay below N*ts/4 = {limit:.4e} s",
                self.epsilon.abs()
            )));
        }
        Ok(())
    }
}

/// Whether the receive chains of one card share a distortion draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntennaMode {
    Shared,
    Independent,
}

/// Uniform sampling ranges for [`DistortionDraw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionRanges {
    pub beta: (f64, f64),
    pub theta: (f64, f64),
    /// Delay shift range in taps.
    pub epsilon_taps: (f64, f64),
    pub antenna_mode: AntennaMode,
}

impl Default for DistortionRanges {
    fn default() -> Self {
        Self { beta: (0.5, 2.0), theta: (0.0, TAU), epsilon_taps: (-2.0, 2.0), antenna_mode: AntennaMode::Independent }
    }
}

impl DistortionRanges {
    /// No distortion at all.
    pub fn none() -> Self {
        Self { beta: (1.0, 1.0), theta: (0.0, 0.0), epsilon_taps: (0.0, 0.0), antenna_mode: AntennaMode::Shared }
    }

    pub fn validate(&self, layout: &SubcarrierLayout) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.beta) || self.beta.0 <= 0.0 {
            return Err(Error::InvalidDistortion(format!("beta range {:?} must be positive", self.beta)));
        }
        if !ordered(self.theta) {
            return Err(Error::InvalidDistortion(format!("bad theta range {:?}", self.theta)));
        }
        if !ordered(self.epsilon_taps) {
            return Err(Error::InvalidDistortion(format!("bad epsilon range {:?}", self.epsilon_taps)));
        }
        let quarter = layout.n_fft() as f64 / 4.0;
        if self.epsilon_taps.0.abs() >= quarter || self.epsilon_taps.1.abs() >= quarter {
            return Err(Error::InvalidDistortion(format!(
                "epsilon range {:?} taps must stay inside +-N/4 = {quarter}",
                self.epsilon_taps
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, ts: f64) -> DistortionDraw {
        let beta = uniform(rng, self.beta);
        let theta = uniform(rng, self.theta);
        let eps = uniform(rng, self.epsilon_taps) * ts;
        DistortionDraw { beta, theta: theta.rem_euclid(TAU), epsilon: eps }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Sinusoidal respiration acting on one non-dominant path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub target_path_index: usize,
    pub delay_amplitude_s: f64,
    pub gain_amplitude: f64,
    pub rate_hz: f64,
    pub phase_rad: f64,
}

impl MotionModel {
    pub fn validate(&self, spec: &ChannelSpec) -> Result<()> {
        if self.target_path_index >= spec.paths().len() {
            return Err(Error::InvalidMotion(format!(
                "target path {} does not exist ({} paths)",
                self.target_path_index,
                spec.paths().len()
            )));
        }
        if self.target_path_index == spec.strongest_index() {
            return Err(Error::InvalidMotion("motion must not target the strongest (static) path".into()));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz < 1.0) {
            return Err(Error::InvalidMotion(format!("rate {} Hz outside (0, 1)", self.rate_hz)));
        }
        if !(self.delay_amplitude_s.is_finite() && self.delay_amplitude_s >= 0.0) {
            return Err(Error::InvalidMotion("delay amplitude must be >= 0".into()));
        }
        if !(self.gain_amplitude >= 0.0 && self.gain_amplitude < 1.0) {
            return Err(Error::InvalidMotion("gain amplitude must lie in [0, 1)".into()));
        }
        if !self.phase_rad.is_finite() {
            return Err(Error::InvalidMotion("phase must be finite".into()));
        }
        let base = spec.paths()[self.target_path_index].delay;
        if base - self.delay_amplitude_s < 0.0 {
            return Err(Error::InvalidMotion("delay excursion would go negative".into()));
        }
        Ok(())
    }

    /// Channel at time `t`.
    pub fn apply(&self, spec: &ChannelSpec, t: f64) -> Result<ChannelSpec> {
        let s = (TAU * self.rate_hz * t + self.phase_rad).sin();
        let base = spec.paths()[self.target_path_index];
        let moved = PathComponent {
            gain: base.gain * (1.0 + self.gain_amplitude * s),
            delay: base.delay + self.delay_amplitude_s * s,
        };
        spec.with_path(self.target_path_index, moved)
    }

    pub fn rate_bpm(&self) -> f64 {
        self.rate_hz * 60.0
    }
}

/// `p[n, tau]`: tap `n` of the band-limited pulse centered at `tau`, peak 1.
pub fn sample_pulse(n: i64, tau: f64, ts: f64, layout: &SubcarrierLayout) -> Complex64 {
    let nf = layout.n_fft() as f64;
    let offset = n as f64 - tau / ts;
    let sum: Complex64 =
        layout.signed_active().iter().map(|&k| Complex64::from_polar(1.0, TAU * k as f64 * offset / nf)).sum();
    sum / layout.n_active() as f64
}

/// `tau_hat - round(tau_hat / ts) * ts`, rounding half away from zero.
pub fn fractional_delay(tau_hat: f64, ts: f64) -> f64 {
    tau_hat - (tau_hat / ts).round() * ts
}

fn response(spec: &ChannelSpec, draw: &DistortionDraw, freqs: &[f64]) -> Vec<Complex64> {
    let c = draw.complex_gain();
    let weighted: Vec<(Complex64, f64)> = spec
        .paths
        .iter()
        .map(|p| (p.gain * Complex64::from_polar(1.0, -TAU * spec.carrier_hz * p.delay), p.delay + draw.epsilon))
        .collect();
    freqs
        .iter()
        .map(|&f| {
            let s: Complex64 = weighted.iter().map(|&(g, d)| g * Complex64::from_polar(1.0, -TAU * f * d)).sum();
            c * s
        })
        .collect()
}

/// Distorted CSI on the active subcarriers, plus circular Gaussian noise of
/// `noise_std` per component.
pub fn synth_csi<R: Rng + ?Sized>(
    spec: &ChannelSpec,
    draw: &DistortionDraw,
    noise_std: f64,
    rng: &mut R,
) -> Result<CsiFrame> {
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise_std must be >= 0, got {noise_std}")));
    }
    draw.check_window(&spec.layout)?;
    let freqs = spec.layout.active_freqs_hz();
    let mut values = response(spec, draw, &freqs);
    if noise_std > 0.0 {
        for v in values.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * noise_std;
        }
    }
    CsiFrame::new(0.0, Arc::clone(&spec.layout), values)
}

/// Noiseless [`synth_csi`].
pub fn synth_csi_clean(spec: &ChannelSpec, draw: &DistortionDraw) -> Result<CsiFrame> {
    draw.check_window(&spec.layout)?;
    let freqs = spec.layout.active_freqs_hz();
    CsiFrame::new(0.0, Arc::clone(&spec.layout), response(spec, draw, &freqs))
}

/// Noise standard deviation per component giving `snr_db` against the
/// channel's mean undistorted power.
pub fn noise_std_for_snr(spec: &ChannelSpec, snr_db: f64) -> f64 {
    (spec.mean_power() / (2.0 * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Band-limited transform of a CSI frame onto signed taps:
/// `h[n] = |K|^{-1} sum_k H[k] e^{j 2 pi k n / N}`.
pub fn band_limited_cir(frame: &CsiFrame, taps: &[i64]) -> Vec<Complex64> {
    let layout = &frame.layout;
    let nf = layout.n_fft() as f64;
    let ks = layout.signed_active();
    taps.iter()
        .map(|&n| {
            let s: Complex64 = ks
                .iter()
                .zip(&frame.values)
                .map(|(&k, &h)| h * Complex64::from_polar(1.0, TAU * (k * n) as f64 / nf))
                .sum();
            s / layout.n_active() as f64
        })
        .collect()
}

/// Distorted noiseless CIR on taps `[0, n_taps)` in physical scale (an on-grid
/// path of gain `a` reads `a`).
pub fn synth_cir(spec: &ChannelSpec, draw: &DistortionDraw, n_taps: usize) -> Result<Cir> {
    let tapset = TapSet::contiguous(spec.layout.n_fft(), n_taps)?;
    synth_cir_on(spec, draw, &Arc::new(tapset))
}

/// [`synth_cir`] over an arbitrary tap support.
pub fn synth_cir_on(spec: &ChannelSpec, draw: &DistortionDraw, tapset: &Arc<TapSet>) -> Result<Cir> {
    draw.check_window(&spec.layout)?;
    if tapset.n_fft() != spec.layout.n_fft() {
        return Err(Error::LayoutMismatch);
    }
    let ts = spec.layout.ts();
    let c = draw.complex_gain();
    let taps = tapset
        .signed_taps()
        .iter()
        .map(|&n| {
            let s: Complex64 = spec
                .paths
                .iter()
                .map(|p| {
                    p.gain
                        * Complex64::from_polar(1.0, -TAU * spec.carrier_hz * p.delay)
                        * sample_pulse(n, p.delay + draw.epsilon, ts, &spec.layout)
                })
                .sum();
            c * s
        })
        .collect();
    Cir::new(Arc::clone(tapset), taps, ts)
}

/// One frame of a synthetic respiration trace.
#[derive(Debug, Clone)]
pub struct TraceSample {
    pub time: f64,
    /// One frame per receive antenna.
    pub csi: Vec<CsiFrame>,
    pub draws: Vec<DistortionDraw>,
    /// Ground-truth channel of antenna 0 at `time`.
    pub spec_at_t: ChannelSpec,
}

/// Everything needed to synthesize a respiration trace.
#[derive(Debug, Clone)]
pub struct TraceSetup {
    pub spec: ChannelSpec,
    pub motion: MotionModel,
    pub ranges: DistortionRanges,
    pub noise_std: f64,
    pub n_antennas: usize,
    pub seed: u64,
}

// streams above this are reserved for per-antenna geometry
const GEOMETRY_STREAM_BASE: u64 = u64::MAX - 1024;

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-antenna copies of the channel. Antenna 0 is `spec`; each further
/// antenna sees every path with a fixed random geometric phase.
fn antenna_specs(spec: &ChannelSpec, n_antennas: usize, seed: u64) -> Result<Vec<ChannelSpec>> {
    let mut out = vec![spec.clone()];
    for a in 1..n_antennas {
        let mut rng = frame_rng(seed, GEOMETRY_STREAM_BASE + a as u64);
        let paths = spec
            .paths
            .iter()
            .map(|p| PathComponent {
                gain: p.gain * Complex64::from_polar(1.0, rng.random_range(-PI..PI)),
                delay: p.delay,
            })
            .collect();
        out.push(ChannelSpec::new(paths, spec.carrier_hz, Arc::clone(&spec.layout))?);
    }
    Ok(out)
}

impl TraceSetup {
    pub fn validate(&self, frame_times: &[f64]) -> Result<()> {
        self.motion.validate(&self.spec)?;
        self.ranges.validate(&self.spec.layout)?;
        if self.n_antennas == 0 {
            return Err(Error::InvalidArgument("need at least one antenna".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
        }
        if frame_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("frame times must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Synthesize one frame. Each frame draws from its own RNG stream, so the
    /// result depends only on `(seed, index)`.
    fn frame(&self, antennas: &[ChannelSpec], index: usize, t: f64) -> Result<TraceSample> {
        let mut rng = frame_rng(self.seed, index as u64);
        let ts = self.spec.layout.ts();
        let draws: Vec<DistortionDraw> = match self.ranges.antenna_mode {
            AntennaMode::Shared => vec![self.ranges.sample(&mut rng, ts); self.n_antennas],
            AntennaMode::Independent => (0..self.n_antennas).map(|_| self.ranges.sample(&mut rng, ts)).collect(),
        };
        let mut csi = Vec::with_capacity(self.n_antennas);
        let mut spec_at_t = None;
        for (spec_a, draw) in antennas.iter().zip(&draws) {
            let moved = self.motion.apply(spec_a, t)?;
            let mut frame = synth_csi(&moved, draw, self.noise_std, &mut rng)?;
            frame.timestamp = t;
            csi.push(frame);
            spec_at_t.get_or_insert(moved);
        }
        Ok(TraceSample { time: t, csi, draws, spec_at_t: spec_at_t.expect("n_antennas >= 1") })
    }

    pub fn generate(&self, frame_times: &[f64]) -> Result<Vec<TraceSample>> {
        self.validate(frame_times)?;
        let antennas = antenna_specs(&self.spec, self.n_antennas, self.seed)?;
        frame_times.par_iter().enumerate().map(|(i, &t)| self.frame(&antennas, i, t)).collect()
    }

    /// Single-threaded reference for [`generate`](Self::generate).
    pub fn generate_serial(&self, frame_times: &[f64]) -> Result<Vec<TraceSample>> {
        self.validate(frame_times)?;
        let antennas = antenna_specs(&self.spec, self.n_antennas, self.seed)?;
        frame_times.iter().enumerate().map(|(i, &t)| self.frame(&antennas, i, t)).collect()
    }
}

/// Single-antenna respiration trace: `(frame, draw, channel at t)` per time.
pub fn respiration_trace(
    spec: &ChannelSpec,
    motion: &MotionModel,
    frame_times: &[f64],
    ranges: &DistortionRanges,
    noise_std: f64,
    rng_seed: u64,
) -> Result<Vec<(CsiFrame, DistortionDraw, ChannelSpec)>> {
    let setup =
        TraceSetup { spec: spec.clone(), motion: *motion, ranges: *ranges, noise_std, n_antennas: 1, seed: rng_seed };
    Ok(setup.generate(frame_times)?.into_iter().map(|mut s| (s.csi.remove(0), s.draws[0], s.spec_at_t)).collect())
}

/// `count` frame times at `fs` Hz starting from zero.
pub fn uniform_times(fs: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / fs).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Arc<SubcarrierLayout> {
        Arc::new(SubcarrierLayout::desk_default())
    }

    fn single(l: &Arc<SubcarrierLayout>, gain: Complex64, delay_taps: f64) -> ChannelSpec {
        ChannelSpec::new(vec![PathComponent::new(gain, delay_taps * l.ts())], 5.25e9, Arc::clone(l)).unwrap()
    }

    #[test]
    fn pulse_peak_is_one_on_grid() {
        let l = layout();
        let p = sample_pulse(0, 0.0, l.ts(), &l);
        assert!((p.norm() - 1.0).abs() < 1e-14);
        let half = sample_pulse(0, 0.5 * l.ts(), l.ts(), &l);
        assert!(half.norm() < p.norm());
    }

    // Oracle: zero-fill the active bins on the unsigned FFT grid and sum the
    // inverse DFT directly. Independent of the signed-frequency path above.
    fn pulse_oracle(n: usize, tau_taps: f64, l: &SubcarrierLayout) -> Complex64 {
        let nf = l.n_fft();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); nf];
        for &k in l.active() {
            let f = if k < nf / 2 { k as f64 } else { k as f64 - nf as f64 };
            spectrum[k] = Complex64::from_polar(1.0, -TAU * f * tau_taps / nf as f64);
        }
        let s: Complex64 =
            (0..nf).map(|k| spectrum[k] * Complex64::from_polar(1.0, TAU * ((k * n) % nf) as f64 / nf as f64)).sum();
        s / l.n_active() as f64
    }

    #[test]
    fn pulse_matches_direct_dft_oracle() {
        let l = layout();
        let p = sample_pulse(3, 3.27 * l.ts(), l.ts(), &l);
        let o = pulse_oracle(3, 3.27, &l);
        assert!((p - o).norm() < 1e-12, "{p} vs {o}");
        // frozen from a numpy evaluation of the same sum
        assert!((p.re - 0.901_553_192_581_618_6).abs() < 1e-9, "{}", p.re);
        assert!(p.im.abs() < 1e-12);
    }

    #[test]
    fn fractional_delay_examples() {
        let ts = 6.25e-9;
        assert_eq!(fractional_delay(5.0 * ts, ts), 0.0);
        assert!((fractional_delay(5.5 * ts, ts) + 0.5 * ts).abs() < 1e-20);
        assert!((fractional_delay(2.3 * ts, ts) - 0.3 * ts).abs() < 1e-20);
        assert!((fractional_delay(-2.5 * ts, ts) - 0.5 * ts).abs() < 1e-20);
    }

    #[test]
    fn flat_channel_is_all_ones() {
        let l = layout();
        let f = synth_csi_clean(&single(&l, Complex64::new(1.0, 0.0), 0.0), &DistortionDraw::identity()).unwrap();
        assert!(f.values.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn distortion_is_a_constant_scalar() {
        let l = layout();
        let draw = DistortionDraw::new(2.0, PI / 2.0, 0.0).unwrap();
        let f = synth_csi_clean(&single(&l, Complex64::new(1.0, 0.0), 0.0), &draw).unwrap();
        let expect = Complex64::from_polar(2.0, -PI / 2.0);
        assert!(f.values.iter().all(|v| (v - expect).norm() < 1e-14));
    }

    #[test]
    fn two_paths_match_term_by_term_sum() {
        let l = layout();
        let ts = l.ts();
        let spec = ChannelSpec::new(
            vec![PathComponent::in_taps(0.9, 0.3, 3.71, ts), PathComponent::in_taps(0.4, -1.2, 8.05, ts)],
            5.25e9,
            Arc::clone(&l),
        )
        .unwrap();
        let draw = DistortionDraw::new(1.3, 0.8, 0.61 * ts).unwrap();
        let f = synth_csi_clean(&spec, &draw).unwrap();
        for (i, &k) in l.active().iter().enumerate() {
            let fk = if k < 128 { k as f64 } else { k as f64 - 256.0 } * 625e3;
            let mut h = Complex64::new(0.0, 0.0);
            for (a, d) in [(Complex64::from_polar(0.9, 0.3), 3.71 * ts), (Complex64::from_polar(0.4, -1.2), 8.05 * ts)]
            {
                let carrier = Complex64::new(0.0, -2.0 * PI * 5.25e9 * d).exp();
                let sub = Complex64::new(0.0, -2.0 * PI * fk * (d + 0.61 * ts)).exp();
                h += a * carrier * sub;
            }
            h *= 1.3 * Complex64::new(0.0, -0.8).exp();
            assert!((h - f.values[i]).norm() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn noise_is_seeded() {
        let l = layout();
        let spec = single(&l, Complex64::new(1.0, 0.0), 2.0);
        let a = synth_csi(&spec, &DistortionDraw::identity(), 0.1, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = synth_csi(&spec, &DistortionDraw::identity(), 0.1, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(synth_csi(&spec, &DistortionDraw::identity(), -1.0, &mut ChaCha8Rng::seed_from_u64(7)).is_err());
    }

    #[test]
    fn on_grid_cir_concentrates_at_its_tap() {
        let l = layout();
        let a = Complex64::from_polar(0.7, 0.4);
        // carrier phase of an on-grid delay: fold it into the expectation
        let spec = single(&l, a, 2.0);
        let cir = synth_cir(&spec, &DistortionDraw::identity(), 8).unwrap();
        let carrier = Complex64::from_polar(1.0, -TAU * 5.25e9 * 2.0 * l.ts());
        assert!((cir.taps[2] - a * carrier).norm() < 1e-12);
        let others: f64 =
            cir.taps.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, v)| v.norm()).fold(0.0, f64::max);
        assert!(others < 0.1);
        let draw = DistortionDraw::new(1.7, 2.2, 0.0).unwrap();
        let d = synth_cir(&spec, &draw, 8).unwrap();
        for (x, y) in d.taps.iter().zip(&cir.taps) {
            assert!((x - y * draw.complex_gain()).norm() < 1e-12);
        }
    }

    #[test]
    fn off_grid_cir_leaks_to_neighbor() {
        let l = layout();
        let spec = single(&l, Complex64::new(1.0, 0.0), 2.4);
        let cir = synth_cir(&spec, &DistortionDraw::identity(), 8).unwrap();
        let carrier = Complex64::from_polar(1.0, -TAU * 5.25e9 * 2.4 * l.ts());
        for n in 0..8 {
            let expect = carrier * pulse_oracle(n, 2.4, &l);
            assert!((cir.taps[n] - expect).norm() < 1e-12);
        }
        assert!(cir.taps[2].norm() < 0.95);
        assert!(cir.taps[3].norm() > 0.3);
    }

    #[test]
    fn cir_matches_band_limited_transform_of_csi() {
        let l = layout();
        let ts = l.ts();
        let spec = ChannelSpec::new(
            vec![PathComponent::in_taps(1.0, 0.0, 4.3, ts), PathComponent::in_taps(0.5, 1.0, 9.9, ts)],
            5.25e9,
            Arc::clone(&l),
        )
        .unwrap();
        let draw = DistortionDraw::new(0.7, 4.0, -1.3 * ts).unwrap();
        let cir = synth_cir(&spec, &draw, 32).unwrap();
        let csi = synth_csi_clean(&spec, &draw).unwrap();
        let bl = band_limited_cir(&csi, &(0..32).collect::<Vec<_>>());
        let scale = cir.taps.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in cir.taps.iter().zip(&bl) {
            assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn rejects_out_of_window_delay() {
        let l = layout();
        let window = 256.0 * l.ts();
        assert!(
            ChannelSpec::new(vec![PathComponent::new(Complex64::new(1.0, 0.0), window)], 5e9, Arc::clone(&l)).is_err()
        );
        assert!(ChannelSpec::new(vec![], 5e9, Arc::clone(&l)).is_err());
        let spec = single(&l, Complex64::new(1.0, 0.0), 1.0);
        let big = DistortionDraw::new(1.0, 0.0, 64.0 * l.ts()).unwrap();
        assert!(synth_csi_clean(&spec, &big).is_err());
    }

    #[test]
    fn strongest_ties_break_to_earliest() {
        let l = layout();
        let ts = l.ts();
        let spec = ChannelSpec::new(
            vec![PathComponent::in_taps(1.0, 0.0, 7.0, ts), PathComponent::in_taps(1.0, 2.0, 3.0, ts)],
            5e9,
            Arc::clone(&l),
        )
        .unwrap();
        assert_eq!(spec.strongest_index(), 1);
    }

    fn motion_spec(l: &Arc<SubcarrierLayout>) -> ChannelSpec {
        let ts = l.ts();
        ChannelSpec::new(
            vec![PathComponent::in_taps(1.0, 0.0, 4.3, ts), PathComponent::in_taps(0.3, 1.0, 10.8, ts)],
            5.25e9,
            Arc::clone(l),
        )
        .unwrap()
    }

    #[test]
    fn motion_on_strongest_path_is_rejected() {
        let l = layout();
        let spec = motion_spec(&l);
        let m = MotionModel {
            target_path_index: 0,
            delay_amplitude_s: 0.0,
            gain_amplitude: 0.1,
            rate_hz: 0.25,
            phase_rad: 0.0,
        };
        assert!(matches!(
            respiration_trace(&spec, &m, &[0.0, 0.1], &DistortionRanges::default(), 0.0, 1),
            Err(Error::InvalidMotion(_))
        ));
        let bad_rate = MotionModel { target_path_index: 1, rate_hz: 1.5, ..m };
        assert!(bad_rate.validate(&spec).is_err());
    }

    #[test]
    fn static_scene_shares_one_channel() {
        let l = layout();
        let spec = motion_spec(&l);
        let m = MotionModel {
            target_path_index: 1,
            delay_amplitude_s: 0.0,
            gain_amplitude: 0.0,
            rate_hz: 0.25,
            phase_rad: 0.3,
        };
        let tr = respiration_trace(&spec, &m, &uniform_times(50.0, 20), &DistortionRanges::default(), 0.0, 3).unwrap();
        assert!(tr.iter().all(|(_, _, s)| *s == spec));
        assert!(tr.windows(2).any(|w| w[0].1 != w[1].1));
    }

    #[test]
    fn target_delay_traces_the_sinusoid() {
        let l = layout();
        let spec = motion_spec(&l);
        let m = MotionModel {
            target_path_index: 1,
            delay_amplitude_s: 3e-11,
            gain_amplitude: 0.2,
            rate_hz: 0.25,
            phase_rad: 0.4,
        };
        let times = uniform_times(50.0, 3000);
        let tr = respiration_trace(&spec, &m, &times, &DistortionRanges::default(), 0.0, 9).unwrap();
        let base = spec.paths()[1];
        for ((_, _, s), &t) in tr.iter().zip(&times).step_by(37) {
            let sin = (2.0 * PI * 0.25 * t + 0.4).sin();
            assert!((s.paths()[1].delay - (base.delay + 3e-11 * sin)).abs() < 1e-20);
            assert!((s.paths()[1].gain - base.gain * (1.0 + 0.2 * sin)).norm() < 1e-14);
            assert_eq!(s.paths()[0], spec.paths()[0]);
        }
    }

    #[test]
    fn parallel_generation_equals_serial() {
        let l = layout();
        let setup = TraceSetup {
            spec: motion_spec(&l),
            motion: MotionModel {
                target_path_index: 1,
                delay_amplitude_s: 1e-11,
                gain_amplitude: 0.1,
                rate_hz: 0.3,
                phase_rad: 0.0,
            },
            ranges: DistortionRanges::default(),
            noise_std: 0.05,
            n_antennas: 2,
            seed: 11,
        };
        let times = uniform_times(50.0, 64);
        let par = setup.generate(&times).unwrap();
        let ser = setup.generate_serial(&times).unwrap();
        for (a, b) in par.iter().zip(&ser) {
            assert_eq!(a.csi, b.csi);
            assert_eq!(a.draws, b.draws);
        }
        assert_ne!(par[0].draws[0], par[0].draws[1]);
    }

    #[test]
    fn non_increasing_times_rejected() {
        let l = layout();
        let m = MotionModel {
            target_path_index: 1,
            delay_amplitude_s: 0.0,
            gain_amplitude: 0.1,
            rate_hz: 0.25,
            phase_rad: 0.0,
        };
        assert!(respiration_trace(&motion_spec(&l), &m, &[0.0, 0.0], &DistortionRanges::default(), 0.0, 1).is_err());
    }
}
