//! Synthetic respiration benchmark: scene definition, scenario grid,
//! per-scheme error statistics and acceptance checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::channel_model::{
    noise_std_for_snr, uniform_times, ChannelSpec, DistortionRanges, MotionModel, PathComponent, TraceSample,
    TraceSetup,
};
use crate::error::{Error, Result};
use crate::frame::CsiFrame;
use crate::layout::SubcarrierLayout;
use crate::pipeline::{Pipeline, PipelineConfig, Scheme};
use crate::respiration::{stats_from_errors, ErrorStats};

/// A path given in tap units: `(magnitude, phase_rad, delay_taps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTaps {
    pub magnitude: f64,
    pub phase: f64,
    pub delay_taps: f64,
}

impl PathTaps {
    pub const fn new(magnitude: f64, phase: f64, delay_taps: f64) -> Self {
        Self { magnitude, phase, delay_taps }
    }
}

/// Static geometry, breathing target and radio impairments of a synthetic
/// recording.
#[derive(Debug, Clone)]
pub struct Scene {
    pub layout: Arc<SubcarrierLayout>,
    pub carrier_hz: f64,
    pub paths: Vec<PathTaps>,
    pub target_path: usize,
    pub delay_amplitude_s: f64,
    pub gain_amplitude: f64,
    pub motion_phase_rad: f64,
    pub ranges: DistortionRanges,
    pub fs_hz: f64,
    pub duration_s: f64,
    pub n_antennas: usize,
}

impl Scene {
    pub fn desk_default() -> Self {
        Self {
            layout: Arc::new(SubcarrierLayout::desk_default()),
            carrier_hz: 5.25e9,
            paths: vec![
                PathTaps::new(1.0, 0.0, 4.3),
                PathTaps::new(0.45, 1.1, 6.6),
                PathTaps::new(0.3, 2.3, 8.8),
                PathTaps::new(0.2, -0.7, 11.1),
            ],
            target_path: 2,
            delay_amplitude_s: 2e-11,
            gain_amplitude: 0.2,
            motion_phase_rad: 0.0,
            ranges: DistortionRanges::default(),
            fs_hz: 50.0,
            duration_s: 60.0,
            n_antennas: 2,
        }
    }

    pub fn channel(&self) -> Result<ChannelSpec> {
        let ts = self.layout.ts();
        let paths = self.paths.iter().map(|p| PathComponent::in_taps(p.magnitude, p.phase, p.delay_taps, ts)).collect();
        ChannelSpec::new(paths, self.carrier_hz, Arc::clone(&self.layout))
    }

    pub fn motion(&self, rate_bpm: f64) -> MotionModel {
        MotionModel {
            target_path_index: self.target_path,
            delay_amplitude_s: self.delay_amplitude_s,
            gain_amplitude: self.gain_amplitude,
            rate_hz: rate_bpm / 60.0,
            phase_rad: self.motion_phase_rad,
        }
    }

    pub fn n_frames(&self) -> usize {
        (self.fs_hz * self.duration_s).round() as usize
    }

    pub fn frame_times(&self) -> Vec<f64> {
        uniform_times(self.fs_hz, self.n_frames())
    }

    /// Setup for one recording. `snr_db = inf` gives noiseless frames.
    pub fn setup(&self, rate_bpm: f64, snr_db: f64, ranges: DistortionRanges, seed: u64) -> Result<TraceSetup> {
        let spec = self.channel()?;
        let noise_std = if snr_db.is_infinite() && snr_db > 0.0 { 0.0 } else { noise_std_for_snr(&spec, snr_db) };
        let setup =
            TraceSetup { spec, motion: self.motion(rate_bpm), ranges, noise_std, n_antennas: self.n_antennas, seed };
        setup.validate(&[])?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz > 0.0 && self.fs_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!("fs must be > 0, got {}", self.fs_hz)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration must be > 0, got {}", self.duration_s)));
        }
        if self.n_antennas == 0 {
            return Err(Error::InvalidArgument("need at least one antenna".into()));
        }
        let spec = self.channel()?;
        self.motion(15.0).validate(&spec)?;
        self.ranges.validate(&self.layout)
    }
}

/// Split trace samples into per-antenna frame streams.
pub fn antenna_streams(samples: &[TraceSample]) -> Vec<Vec<CsiFrame>> {
    let n = samples.first().map_or(0, |s| s.csi.len());
    (0..n).map(|a| samples.iter().map(|s| s.csi[a].clone()).collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrid {
    pub rates_bpm: Vec<f64>,
    pub snr_db: Vec<f64>,
    /// Each entry `e` draws the delay distortion from `[-e, e]` taps.
    pub epsilon_max_taps: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
    pub schemes: Vec<Scheme>,
}

impl Default for BenchGrid {
    fn default() -> Self {
        Self {
            rates_bpm: vec![10.0, 14.0, 18.0, 22.0],
            snr_db: vec![10.0, 20.0],
            epsilon_max_taps: vec![1.0, 2.0],
            seeds: 1,
            base_seed: 1,
            schemes: vec![
                Scheme::Domino,
                Scheme::DominoIdft,
                Scheme::CsiRatio,
                Scheme::DoubleRatio,
                Scheme::Raw,
                Scheme::Sharp,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub index: usize,
    pub rate_bpm: f64,
    pub snr_db: f64,
    pub epsilon_max_taps: f64,
    pub seed: u64,
}

impl BenchGrid {
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        if self.rates_bpm.is_empty() || self.snr_db.is_empty() || self.epsilon_max_taps.is_empty() || self.seeds == 0 {
            return Err(Error::InvalidArgument("benchmark grid is empty".into()));
        }
        if !self.schemes.iter().any(Scheme::is_implemented) {
            return Err(Error::InvalidArgument("no implemented scheme in the benchmark".into()));
        }
        let mut out = Vec::new();
        for &rate_bpm in &self.rates_bpm {
            for &snr_db in &self.snr_db {
                for &epsilon_max_taps in &self.epsilon_max_taps {
                    for _ in 0..self.seeds {
                        let index = out.len();
                        let seed = self.base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
                        out.push(Scenario { index, rate_bpm, snr_db, epsilon_max_taps, seed });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    /// `None` when the scheme produced no rate at all.
    pub estimate_bpm: Option<f64>,
    /// Absolute error; failures are charged the full band width.
    pub error_bpm: f64,
    /// Whether the spectral peak passed the confidence test.
    pub confident: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub outcomes: Vec<SchemeOutcome>,
}

/// Run one scenario through every implemented scheme in `schemes`.
pub fn run_scenario(scene: &Scene, pipeline: &Pipeline, schemes: &[Scheme], sc: &Scenario) -> Result<ScenarioResult> {
    let ranges = DistortionRanges { epsilon_taps: (-sc.epsilon_max_taps, sc.epsilon_max_taps), ..scene.ranges };
    let setup = scene.setup(sc.rate_bpm, sc.snr_db, ranges, sc.seed)?;
    let samples = setup.generate(&scene.frame_times())?;
    let streams = antenna_streams(&samples);
    let band = pipeline.config().band;
    let penalty = 60.0 * (band.hi_hz - band.lo_hz);
    let outcomes = schemes
        .iter()
        .filter(|s| s.is_implemented())
        .map(|&scheme| match pipeline.respire(scheme, &streams, scene.fs_hz) {
            Ok(r) => {
                let est = r.bpm();
                SchemeOutcome {
                    scheme,
                    estimate_bpm: est,
                    error_bpm: est.map_or(penalty, |b| (b - sc.rate_bpm).abs()),
                    confident: r.rate.is_ok(),
                    note: match &r.rate {
                        Ok(_) => String::new(),
                        Err(e) => e.to_string(),
                    },
                }
            }
            Err(e) => {
                SchemeOutcome { scheme, estimate_bpm: None, error_bpm: penalty, confident: false, note: e.to_string() }
            }
        })
        .collect();
    Ok(ScenarioResult { scenario: *sc, outcomes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub stats: ErrorStats,
    pub failures: usize,
    pub low_confidence: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub results: Vec<ScenarioResult>,
    pub summaries: Vec<SchemeSummary>,
    pub not_implemented: Vec<Scheme>,
}

/// Pass/fail thresholds applied to a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceThresholds {
    pub domino_max_mean_bpm: Option<f64>,
    pub require_domino_best: bool,
    pub require_raw_worst: bool,
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        Self { domino_max_mean_bpm: None, require_domino_best: true, require_raw_worst: true }
    }
}

pub fn run_bench(scene: &Scene, pcfg: PipelineConfig, grid: &BenchGrid) -> Result<BenchReport> {
    scene.validate()?;
    let scenarios = grid.scenarios()?;
    let pipeline = Pipeline::new(Arc::clone(&scene.layout), pcfg)?;
    let mut results: Vec<ScenarioResult> =
        scenarios.par_iter().map(|sc| run_scenario(scene, &pipeline, &grid.schemes, sc)).collect::<Result<_>>()?;
    results.sort_by_key(|r| r.scenario.index);

    let mut per: BTreeMap<Scheme, (Vec<f64>, usize, usize)> = BTreeMap::new();
    for r in &results {
        for o in &r.outcomes {
            let e = per.entry(o.scheme).or_default();
            e.0.push(o.error_bpm);
            e.1 += o.estimate_bpm.is_none() as usize;
            e.2 += (!o.confident) as usize;
        }
    }
    let summaries = grid
        .schemes
        .iter()
        .filter_map(|s| per.remove(s).map(|(errs, f, lc)| (s, errs, f, lc)))
        .map(|(&scheme, errs, failures, low_confidence)| SchemeSummary {
            scheme,
            stats: stats_from_errors(errs),
            failures,
            low_confidence,
        })
        .collect();
    let not_implemented = grid.schemes.iter().copied().filter(|s| !s.is_implemented()).collect();
    Ok(BenchReport { results, summaries, not_implemented })
}

impl BenchReport {
    pub fn summary(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.summaries.iter().find(|s| s.scheme == scheme)
    }

    /// Schemes ordered by mean error, best first.
    pub fn ranking(&self) -> Vec<&SchemeSummary> {
        let mut v: Vec<&SchemeSummary> = self.summaries.iter().collect();
        v.sort_by(|a, b| a.stats.mean.total_cmp(&b.stats.mean));
        v
    }

    /// Failed checks as readable lines; empty when everything passes.
    pub fn check(&self, t: &AcceptanceThresholds) -> Vec<String> {
        let mut failed = Vec::new();
        let mean = |s: Scheme| self.summary(s).map(|x| x.stats.mean);
        if let Some(max) = t.domino_max_mean_bpm {
            match mean(Scheme::Domino) {
                Some(m) if m <= max => {}
                Some(m) => failed.push(format!("domino mean error {m:.4} bpm exceeds {max}")),
                None => failed.push("domino not in benchmark".into()),
            }
        }
        if t.require_domino_best {
            if let Some(d) = mean(Scheme::Domino) {
                for s in &self.summaries {
                    if s.scheme != Scheme::Domino && !(d < s.stats.mean) {
                        failed.push(format!("domino mean {d:.4} not below {} mean {:.4}", s.scheme, s.stats.mean));
                    }
                }
            } else {
                failed.push("domino not in benchmark".into());
            }
        }
        if t.require_raw_worst {
            if let Some(r) = mean(Scheme::Raw) {
                for s in &self.summaries {
                    if s.scheme != Scheme::Raw && !(r > s.stats.mean) {
                        failed.push(format!("raw mean {r:.4} not above {} mean {:.4}", s.scheme, s.stats.mean));
                    }
                }
            } else {
                failed.push("raw not in benchmark".into());
            }
        }
        failed
    }

    /// `scenario,rate_bpm,snr_db,epsilon_max_taps,seed,scheme,estimate_bpm,error_bpm,confident,note`
    pub fn errors_csv(&self) -> String {
        let mut s = String::from(
            "scenario,rate_bpm,snr_db,epsilon_max_taps,seed,scheme,estimate_bpm,error_bpm,confident,note\n",
        );
        for r in &self.results {
            let sc = &r.scenario;
            for o in &r.outcomes {
                let est = o.estimate_bpm.map_or(String::new(), |v| format!("{v}"));
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    sc.index,
                    sc.rate_bpm,
                    sc.snr_db,
                    sc.epsilon_max_taps,
                    sc.seed,
                    o.scheme,
                    est,
                    o.error_bpm,
                    o.confident as u8,
                    csv_field(&o.note)
                );
            }
        }
        s
    }

    /// `scheme,error_bpm,fraction`
    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("scheme,error_bpm,fraction\n");
        for sum in &self.summaries {
            for (e, f) in sum.stats.cdf() {
                let _ = writeln!(s, "{},{},{}", sum.scheme, e, f);
            }
        }
        s
    }

    /// `scheme,n,mean_bpm,median_bpm,p80_bpm,max_bpm,failures,low_confidence,rank`
    pub fn stats_csv(&self) -> String {
        let mut s = String::from("scheme,n,mean_bpm,median_bpm,p80_bpm,max_bpm,failures,low_confidence,rank\n");
        let ranking = self.ranking();
        for sum in &self.summaries {
            let rank = ranking.iter().position(|r| r.scheme == sum.scheme).unwrap_or(0) + 1;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                sum.scheme,
                sum.stats.samples.len(),
                sum.stats.mean,
                sum.stats.median,
                sum.stats.p80,
                sum.stats.max(),
                sum.failures,
                sum.low_confidence,
                rank
            );
        }
        for s_ in &self.not_implemented {
            let _ = writeln!(s, "{s_},0,,,,,,,");
        }
        s
    }

    /// Human-readable table.
    pub fn summary_table(&self) -> String {
        let mut s =
            format!("{:<14}{:>10}{:>10}{:>10}{:>10}{:>10}\n", "scheme", "mean", "median", "p80", "max", "failed");
        for sum in self.ranking() {
            let _ = writeln!(
                s,
                "{:<14}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                sum.scheme.name(),
                sum.stats.mean,
                sum.stats.median,
                sum.stats.p80,
                sum.stats.max(),
                sum.failures
            );
        }
        for n in &self.not_implemented {
            let _ = writeln!(s, "{:<14}{:>10}", n.name(), "not implemented");
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_rejected() {
        let g = BenchGrid { rates_bpm: vec![], ..BenchGrid::default() };
        assert!(g.scenarios().is_err());
        let g = BenchGrid { schemes: vec![Scheme::Sharp], ..BenchGrid::default() };
        assert!(g.scenarios().is_err());
    }

    #[test]
    fn scenario_seeds_are_distinct() {
        let s = BenchGrid::default().scenarios().unwrap();
        let mut seeds: Vec<u64> = s.iter().map(|x| x.seed).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), s.len());
    }

    #[test]
    fn default_scene_is_valid() {
        Scene::desk_default().validate().unwrap();
    }
}
