//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, keys are unique. `preset` is
//! applied before every other key regardless of its position. Example:
//!
//! ```text
//! preset = desk
//! sim.fs_hz = 100
//! channel.path.0 = 1.0 0.0 4.3     # magnitude, phase rad, delay taps
//! bench.schemes = domino, raw
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::bench::{AcceptanceThresholds, BenchGrid, PathTaps, Scene};
use crate::channel_model::AntennaMode;
use crate::cir_estimation::Ridge;
use crate::compensation::NoiseFloor;
use crate::error::{Error, Result};
use crate::layout::{SubcarrierLayout, TapSet};
use crate::pipeline::{PipelineConfig, Scheme};
use crate::respiration::Band;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    /// 200 Hz packet rate.
    PaperLike,
}

/// Parameters of a single simulated recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub rate_bpm: f64,
    /// `inf` for noiseless frames.
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Preset,
    pub scene: Scene,
    pub pipeline: PipelineConfig,
    pub sim: SimParams,
    pub bench: BenchGrid,
    pub accept: AcceptanceThresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut scene = Scene::desk_default();
        if preset == Preset::PaperLike {
            scene.fs_hz = 200.0;
        }
        let pipeline = PipelineConfig::desk_default(&scene.layout);
        Self {
            preset,
            scene,
            pipeline,
            sim: SimParams { rate_bpm: 15.0, snr_db: 20.0, seed: 1 },
            bench: BenchGrid::default(),
            accept: AcceptanceThresholds::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = tokenize(text)?;
        let preset = match entries.get("preset") {
            Some(e) => match e.value.as_str() {
                "desk" => Preset::Desk,
                "paper-like" | "paper_like" => Preset::PaperLike,
                v => return Err(e.err(format!("unknown preset '{v}' (desk | paper-like)"))),
            },
            None => Preset::Desk,
        };
        let mut b = Builder::new(preset);
        for (key, e) in &entries {
            if key != "preset" {
                b.apply(key, e)?;
            }
        }
        b.finish(&entries)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

impl Entry {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Config { line: self.line, msg: msg.into() }
    }

    fn f64(&self) -> Result<f64> {
        let v = self.value.as_str();
        let x = match v {
            "inf" | "+inf" => f64::INFINITY,
            _ => v.parse::<f64>().map_err(|_| self.err(format!("expected a number, got '{v}'")))?,
        };
        if x.is_nan() {
            return Err(self.err("NaN is not allowed"));
        }
        Ok(x)
    }

    fn finite(&self) -> Result<f64> {
        let x = self.f64()?;
        if !x.is_finite() {
            return Err(self.err("value must be finite"));
        }
        Ok(x)
    }

    fn positive(&self) -> Result<f64> {
        let x = self.finite()?;
        if x <= 0.0 {
            return Err(self.err(format!("must be > 0, got {x}")));
        }
        Ok(x)
    }

    fn usize(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.err(format!("expected a non-negative integer, got '{}'", self.value)))
    }

    fn u64(&self) -> Result<u64> {
        self.value.parse().map_err(|_| self.err(format!("expected a non-negative integer, got '{}'", self.value)))
    }

    fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            v => Err(self.err(format!("expected true or false, got '{v}'"))),
        }
    }

    fn list(&self) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Entry { line: self.line, value: s.to_string() }.f64())
            .collect()
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::Config { line, msg: format!("expected 'key = value', got '{content}'") })?;
        let key = k.trim().to_ascii_lowercase();
        let value = v.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config { line, msg: "empty key".into() });
        }
        if value.is_empty() {
            return Err(Error::Config { line, msg: format!("missing value for '{key}'") });
        }
        if let Some(prev) = out.get(&key) {
            let prev: &Entry = prev;
            return Err(Error::Config {
                line,
                msg: format!("duplicate key '{key}' (first set on line {})", prev.line),
            });
        }
        out.insert(key, Entry { line, value });
    }
    Ok(out)
}

struct Builder {
    cfg: RunConfig,
    n_fft: usize,
    n_active: usize,
    delta_f: f64,
    taps_before: usize,
    taps_after: usize,
    paths: BTreeMap<usize, (usize, PathTaps)>,
    noise_floor_rel: f64,
}

impl Builder {
    fn new(preset: Preset) -> Self {
        let cfg = RunConfig::preset(preset);
        let l = Arc::clone(&cfg.scene.layout);
        let taps = cfg.pipeline.tapset.signed_taps();
        Self {
            n_fft: l.n_fft(),
            n_active: l.n_active(),
            delta_f: l.delta_f_hz(),
            taps_before: taps.iter().map(|t| (-t).max(0) as usize).max().unwrap_or(0),
            taps_after: taps.iter().copied().max().unwrap_or(0).max(0) as usize,
            paths: BTreeMap::new(),
            noise_floor_rel: 1e-3,
            cfg,
        }
    }

    fn apply(&mut self, key: &str, e: &Entry) -> Result<()> {
        let c = &mut self.cfg;
        match key {
            "layout.n_fft" => self.n_fft = e.usize()?,
            "layout.n_active" => self.n_active = e.usize()?,
            "layout.delta_f_hz" => self.delta_f = e.positive()?,
            "taps.before" => self.taps_before = e.usize()?,
            "taps.after" => self.taps_after = e.usize()?,
            "ls.ridge" => {
                c.pipeline.ridge = if e.value == "auto" {
                    Ridge::Auto
                } else {
                    let r = e.finite()?;
                    if r < 0.0 {
                        return Err(e.err("ridge must be >= 0"));
                    }
                    Ridge::Fixed(r)
                }
            }
            "search.tol_taps" => c.pipeline.compensation.search.tol_taps = e.positive()?,
            "search.radius_taps" => {
                c.pipeline.compensation.search.search_radius_taps =
                    if e.value == "auto" { None } else { Some(e.positive()?) }
            }
            "search.polish" => c.pipeline.compensation.search.polish = e.bool()?,
            "search.smoothing" => c.pipeline.smoothing = if e.value == "off" { None } else { Some(e.positive()?) },
            "search.noise_floor_rel" => {
                let v = e.finite()?;
                if v < 0.0 {
                    return Err(e.err("noise floor must be >= 0"));
                }
                self.noise_floor_rel = v;
            }
            "distortion.beta_min" => c.scene.ranges.beta.0 = e.positive()?,
            "distortion.beta_max" => c.scene.ranges.beta.1 = e.positive()?,
            "distortion.theta_min" => c.scene.ranges.theta.0 = e.finite()?,
            "distortion.theta_max" => c.scene.ranges.theta.1 = e.finite()?,
            "distortion.epsilon_min_taps" => c.scene.ranges.epsilon_taps.0 = e.finite()?,
            "distortion.epsilon_max_taps" => c.scene.ranges.epsilon_taps.1 = e.finite()?,
            "distortion.antenna_mode" => {
                c.scene.ranges.antenna_mode = match e.value.as_str() {
                    "shared" => AntennaMode::Shared,
                    "independent" => AntennaMode::Independent,
                    v => return Err(e.err(format!("antenna_mode must be shared or independent, got '{v}'"))),
                }
            }
            "motion.target_path" => c.scene.target_path = e.usize()?,
            "motion.delay_amplitude_s" => c.scene.delay_amplitude_s = e.finite()?,
            "motion.gain_amplitude" => c.scene.gain_amplitude = e.finite()?,
            "motion.phase_rad" => c.scene.motion_phase_rad = e.finite()?,
            "channel.carrier_hz" => c.scene.carrier_hz = e.finite()?,
            "sim.fs_hz" => c.scene.fs_hz = e.positive()?,
            "sim.duration_s" => c.scene.duration_s = e.positive()?,
            "sim.n_antennas" => c.scene.n_antennas = e.usize()?,
            "sim.snr_db" => c.sim.snr_db = e.f64()?,
            "sim.seed" => c.sim.seed = e.u64()?,
            "sim.rate_bpm" => c.sim.rate_bpm = e.positive()?,
            "band.lo_hz" => c.pipeline.band.lo_hz = e.positive()?,
            "band.hi_hz" => c.pipeline.band.hi_hz = e.positive()?,
            "bench.rates_bpm" => c.bench.rates_bpm = e.list()?,
            "bench.snr_db" => c.bench.snr_db = e.list()?,
            "bench.epsilon_max_taps" => c.bench.epsilon_max_taps = e.list()?,
            "bench.seeds" => c.bench.seeds = e.usize()?,
            "bench.seed" => c.bench.base_seed = e.u64()?,
            "bench.schemes" => {
                c.bench.schemes = e
                    .value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<Scheme>().map_err(|err| e.err(err.to_string())))
                    .collect::<Result<_>>()?
            }
            "accept.domino_max_mean_bpm" => {
                c.accept.domino_max_mean_bpm = if e.value == "none" { None } else { Some(e.positive()?) }
            }
            "accept.require_domino_best" => c.accept.require_domino_best = e.bool()?,
            "accept.require_raw_worst" => c.accept.require_raw_worst = e.bool()?,
            k if k.starts_with("channel.path.") => {
                let idx: usize =
                    k["channel.path.".len()..].parse().map_err(|_| e.err(format!("bad path index in '{k}'")))?;
                let parts: Vec<&str> = e.value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(e.err("path needs 'magnitude phase_rad delay_taps'"));
                }
                let num = |s: &str| Entry { line: e.line, value: s.to_string() }.finite();
                let p = PathTaps::new(num(parts[0])?, num(parts[1])?, num(parts[2])?);
                if p.magnitude <= 0.0 {
                    return Err(e.err("path magnitude must be > 0"));
                }
                self.paths.insert(idx, (e.line, p));
            }
            k => return Err(e.err(format!("unknown key '{k}'"))),
        }
        Ok(())
    }

    fn finish(mut self, entries: &BTreeMap<String, Entry>) -> Result<RunConfig> {
        // cross-field problems are reported at the first related key present
        let line_of = |keys: &[&str]| keys.iter().filter_map(|k| entries.get(*k)).map(|e| e.line).min().unwrap_or(0);
        let at = |keys: &[&str], err: Error| Error::Config { line: line_of(keys), msg: err.to_string() };

        let layout_keys = ["layout.n_fft", "layout.n_active", "layout.delta_f_hz"];
        let layout = Arc::new(
            SubcarrierLayout::symmetric_guard(self.n_fft, self.n_active, self.delta_f)
                .map_err(|e| at(&layout_keys, e))?,
        );
        let tapset = TapSet::centered(self.n_fft, self.taps_before, self.taps_after)
            .map_err(|e| at(&["taps.before", "taps.after", "layout.n_fft"], e))?;
        if tapset.len() > layout.n_active() {
            return Err(at(
                &["taps.before", "taps.after"],
                Error::InvalidTapSet(format!("{} taps exceed {} active subcarriers", tapset.len(), layout.n_active())),
            ));
        }
        let c = &mut self.cfg;
        c.scene.layout = Arc::clone(&layout);
        c.pipeline.tapset = Arc::new(tapset);
        c.pipeline.compensation.search.noise_floor = NoiseFloor::RelativeToMedian(self.noise_floor_rel);

        if !self.paths.is_empty() {
            for (want, (&idx, (line, _))) in self.paths.iter().enumerate() {
                if idx != want {
                    return Err(Error::Config {
                        line: *line,
                        msg: format!("path indices must run 0..n without gaps, missing {want}"),
                    });
                }
            }
            c.scene.paths = self.paths.values().map(|(_, p)| *p).collect();
        }
        let path_keys: Vec<String> = entries.keys().filter(|k| k.starts_with("channel.path.")).cloned().collect();
        let mut scene_keys: Vec<&str> = path_keys.iter().map(String::as_str).collect();
        scene_keys.extend([
            "channel.carrier_hz",
            "motion.target_path",
            "motion.delay_amplitude_s",
            "motion.gain_amplitude",
        ]);
        scene_keys.extend(layout_keys);
        let spec = c.scene.channel().map_err(|e| at(&scene_keys, e))?;
        c.scene.motion(c.sim.rate_bpm).validate(&spec).map_err(|e| at(&scene_keys, e))?;
        c.scene.ranges.validate(&layout).map_err(|e| {
            at(
                &[
                    "distortion.beta_min",
                    "distortion.beta_max",
                    "distortion.theta_min",
                    "distortion.theta_max",
                    "distortion.epsilon_min_taps",
                    "distortion.epsilon_max_taps",
                ],
                e,
            )
        })?;
        if c.scene.n_antennas == 0 || c.scene.n_antennas > u16::MAX as usize {
            return Err(at(&["sim.n_antennas"], Error::InvalidArgument("n_antennas must be in 1..=65535".into())));
        }
        if c.sim.snr_db == f64::NEG_INFINITY {
            return Err(at(&["sim.snr_db"], Error::InvalidArgument("snr must be finite or +inf".into())));
        }
        let band = Band { lo_hz: c.pipeline.band.lo_hz, hi_hz: c.pipeline.band.hi_hz };
        band.validate().map_err(|e| at(&["band.lo_hz", "band.hi_hz"], e))?;
        if !(c.scene.fs_hz > 2.0 * band.hi_hz) {
            return Err(at(
                &["sim.fs_hz", "band.hi_hz"],
                Error::InvalidArgument("fs must exceed twice the band edge".into()),
            ));
        }
        let bench_keys = ["bench.rates_bpm", "bench.snr_db", "bench.epsilon_max_taps", "bench.seeds", "bench.schemes"];
        c.bench.scenarios().map_err(|e| at(&bench_keys, e))?;
        for &e in &c.bench.epsilon_max_taps {
            if !(e >= 0.0 && e < layout.n_fft() as f64 / 4.0) {
                return Err(at(
                    &["bench.epsilon_max_taps"],
                    Error::InvalidDistortion(format!("epsilon bound {e} taps out of range")),
                ));
            }
        }
        if c.bench.rates_bpm.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(at(&["bench.rates_bpm"], Error::InvalidArgument("rates must be positive".into())));
        }
        if c.bench.snr_db.contains(&f64::NEG_INFINITY) {
            return Err(at(&["bench.snr_db"], Error::InvalidArgument("snr must be finite or +inf".into())));
        }
        Ok(self.cfg)
    }
}
