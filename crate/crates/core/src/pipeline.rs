//! Scheme dispatch: turns multi-antenna CSI streams into channel time series
//! and respiration estimates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::baselines::{csi_ratio, default_ref_subcarrier, double_ratio, raw_magnitude, RatioSeries};
use crate::cir_estimation::{build_ls_operator, IdftEstimator, Ridge};
use crate::compensation::{CompensationConfig, Compensator};
use crate::error::{Error, Result};
use crate::frame::CsiFrame;
use crate::layout::{SubcarrierLayout, TapSet};
use crate::respiration::{estimate_rate, select_signal, Band, RateEstimate, SignalSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Domino,
    DominoIdft,
    CsiRatio,
    DoubleRatio,
    Raw,
    /// Listed for reporting only.
    Sharp,
}

impl Scheme {
    pub const IMPLEMENTED: [Scheme; 5] =
        [Scheme::Domino, Scheme::DominoIdft, Scheme::CsiRatio, Scheme::DoubleRatio, Scheme::Raw];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Domino => "domino",
            Scheme::DominoIdft => "domino-idft",
            Scheme::CsiRatio => "csi-ratio",
            Scheme::DoubleRatio => "double-ratio",
            Scheme::Raw => "raw",
            Scheme::Sharp => "sharp",
        }
    }

    pub fn is_implemented(&self) -> bool {
        *self != Scheme::Sharp
    }

    pub fn min_antennas(&self) -> usize {
        if *self == Scheme::CsiRatio {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "domino" => Scheme::Domino,
            "domino-idft" | "domino_idft" => Scheme::DominoIdft,
            "csi-ratio" | "csi_ratio" => Scheme::CsiRatio,
            "double-ratio" | "double_ratio" => Scheme::DoubleRatio,
            "raw" => Scheme::Raw,
            "sharp" => Scheme::Sharp,
            other => return Err(Error::Scheme(format!("unknown scheme '{other}'"))),
        })
    }
}

/// Estimator settings shared by both compensating schemes.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub tapset: Arc<TapSet>,
    pub ridge: Ridge,
    pub compensation: CompensationConfig,
    /// Max alignment jump per frame; `None` for independent frames.
    pub smoothing: Option<f64>,
    pub band: Band,
}

impl PipelineConfig {
    pub fn desk_default(layout: &SubcarrierLayout) -> Self {
        Self {
            tapset: Arc::new(TapSet::desk_default(layout.n_fft())),
            ridge: Ridge::Auto,
            compensation: CompensationConfig::default(),
            smoothing: None,
            band: Band::default(),
        }
    }
}

/// Prebuilt compensators for one layout.
#[derive(Clone)]
pub struct Pipeline {
    layout: Arc<SubcarrierLayout>,
    cfg: PipelineConfig,
    ls: Compensator,
    idft: Compensator,
}

impl Pipeline {
    pub fn new(layout: Arc<SubcarrierLayout>, cfg: PipelineConfig) -> Result<Self> {
        let ridge = cfg.ridge.resolve(&layout, &cfg.tapset);
        let op = build_ls_operator(Arc::clone(&layout), Arc::clone(&cfg.tapset), ridge)?;
        let idft = IdftEstimator::new(Arc::clone(&layout), Arc::clone(&cfg.tapset))?;
        let mut ls = Compensator::new(Arc::new(op), cfg.compensation);
        let mut idft = Compensator::new(Arc::new(idft), cfg.compensation);
        if let Some(j) = cfg.smoothing {
            ls = ls.with_smoothing(j);
            idft = idft.with_smoothing(j);
        }
        Ok(Self { layout, cfg, ls, idft })
    }

    pub fn layout(&self) -> &Arc<SubcarrierLayout> {
        &self.layout
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn compensator(&self, scheme: Scheme) -> Option<&Compensator> {
        match scheme {
            Scheme::Domino => Some(&self.ls),
            Scheme::DominoIdft => Some(&self.idft),
            _ => None,
        }
    }

    /// `antennas[a][frame]`.
    pub fn series(&self, scheme: Scheme, antennas: &[Vec<CsiFrame>]) -> Result<ChannelSeries> {
        if !scheme.is_implemented() {
            return Err(Error::Scheme(format!("{scheme} is not implemented")));
        }
        if antennas.len() < scheme.min_antennas() {
            return Err(Error::Scheme(format!(
                "{scheme} needs {} antennas, trace has {}",
                scheme.min_antennas(),
                antennas.len()
            )));
        }
        let n_frames = antennas[0].len();
        if let Some(a) = antennas.iter().find(|a| a.len() != n_frames) {
            return Err(Error::LengthMismatch { left: n_frames, right: a.len() });
        }
        let timestamps: Vec<f64> = antennas[0].iter().map(|f| f.timestamp).collect();
        let mut out = ChannelSeries { scheme, timestamps, channels: Vec::new(), labels: Vec::new() };
        match scheme {
            Scheme::Domino | Scheme::DominoIdft => {
                let comp = self.compensator(scheme).expect("compensating scheme");
                let taps = comp.estimator().tapset().signed_taps();
                for (a, frames) in antennas.iter().enumerate() {
                    let cf = comp.compensate_stream(frames)?;
                    for (i, t) in taps.iter().enumerate() {
                        out.channels.push(cf.iter().map(|c| c.cir_norm.taps[i]).collect());
                        out.labels.push(ChannelLabel { antenna: a, index: *t });
                    }
                }
            }
            Scheme::CsiRatio => {
                for a in 1..antennas.len() {
                    out.extend_from_ratio(&csi_ratio(&antennas[a], &antennas[0])?, a, &self.layout);
                }
            }
            Scheme::DoubleRatio => {
                for (a, frames) in antennas.iter().enumerate() {
                    let r = default_ref_subcarrier(frames)?;
                    out.extend_from_ratio(&double_ratio(frames, r)?, a, &self.layout);
                }
            }
            Scheme::Raw => {
                for (a, frames) in antennas.iter().enumerate() {
                    out.extend_from_ratio(&raw_magnitude(frames), a, &self.layout);
                }
            }
            Scheme::Sharp => unreachable!(),
        }
        Ok(out)
    }

    /// Series, channel selection and rate for one scheme.
    pub fn respire(&self, scheme: Scheme, antennas: &[Vec<CsiFrame>], fs: f64) -> Result<Respiration> {
        let series = self.series(scheme, antennas)?;
        series.respire(fs, self.cfg.band)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelLabel {
    pub antenna: usize,
    /// Signed tap for CIR schemes, subcarrier index otherwise.
    pub index: i64,
}

/// Per-channel complex time series; only fully valid channels are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries {
    pub scheme: Scheme,
    pub timestamps: Vec<f64>,
    pub channels: Vec<Vec<Complex64>>,
    pub labels: Vec<ChannelLabel>,
}

impl ChannelSeries {
    fn extend_from_ratio(&mut self, r: &RatioSeries, antenna: usize, layout: &SubcarrierLayout) {
        for c in r.fully_valid_channels() {
            self.channels.push(r.column(c));
            self.labels.push(ChannelLabel { antenna, index: layout.active()[c] as i64 });
        }
    }

    pub fn respire(&self, fs: f64, band: Band) -> Result<Respiration> {
        if self.channels.is_empty() {
            return Err(Error::InvalidArgument(format!("{}: no valid channels", self.scheme)));
        }
        let selection = select_signal(&self.channels, fs, band)?;
        let signal: Vec<f64> = self.channels[selection.index].iter().map(|v| v.norm()).collect();
        let rate = estimate_rate(&signal, fs, band);
        Ok(Respiration { selection, label: self.labels[selection.index], rate })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Respiration {
    pub selection: SignalSelection,
    pub label: ChannelLabel,
    /// `NoPeak` still carries the best in-band guess.
    pub rate: Result<RateEstimate>,
}

impl Respiration {
    /// Estimated rate, falling back to the in-band guess when the peak test
    /// failed.
    pub fn bpm(&self) -> Option<f64> {
        match &self.rate {
            Ok(r) => Some(r.bpm),
            Err(Error::NoPeak { bpm, .. }) => Some(*bpm),
            Err(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::IMPLEMENTED.into_iter().chain([Scheme::Sharp]) {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("music".parse::<Scheme>().is_err());
    }

    #[test]
    fn csi_ratio_needs_two_antennas() {
        let layout = Arc::new(SubcarrierLayout::desk_default());
        let p = Pipeline::new(Arc::clone(&layout), PipelineConfig::desk_default(&layout)).unwrap();
        let f = CsiFrame::new(0.0, layout, vec![Complex64::new(1.0, 0.0); 234]).unwrap();
        assert!(matches!(p.series(Scheme::CsiRatio, &[vec![f.clone()]]), Err(Error::Scheme(_))));
        assert!(matches!(p.series(Scheme::Sharp, &[vec![f]]), Err(Error::Scheme(_))));
    }
}
