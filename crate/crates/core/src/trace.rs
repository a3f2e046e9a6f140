//! Binary CSI trace format.
//!
//! All fields little-endian:
//!
//! ```text
//! magic      b"DCSI"
//! version    u16 (= 1)
//! n_fft      u32
//! delta_f    f64  Hz
//! n_active   u32
//! active     u32 x n_active, sorted, unique
//! carrier    f64  Hz
//! n_antennas u16
//! n_frames   u64
//! flags      u16  bit 0: ground-truth block present
//! records    n_frames x { timestamp f64, n_antennas x n_active x (re f64, im f64) }
//! truth      n_frames x { rate_bpm f64, n_antennas x (beta f64, theta f64, epsilon f64) }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::channel_model::{DistortionDraw, TraceSample};
use crate::error::{Error, Result};
use crate::frame::CsiFrame;
use crate::layout::SubcarrierLayout;

pub const MAGIC: &[u8; 4] = b"DCSI";
pub const VERSION: u16 = 1;
const FLAG_TRUTH: u16 = 1;

/// Per-frame ground truth of a synthetic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rate_bpm: Vec<f64>,
    /// `draws[frame][antenna]`.
    pub draws: Vec<Vec<DistortionDraw>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub layout: Arc<SubcarrierLayout>,
    pub carrier_hz: f64,
    /// `streams[antenna][frame]`; all antennas share timestamps.
    pub streams: Vec<Vec<CsiFrame>>,
    pub truth: Option<GroundTruth>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format_err(format!("non-finite {what}")))
    }
}

impl TraceFile {
    pub fn new(
        layout: Arc<SubcarrierLayout>,
        carrier_hz: f64,
        streams: Vec<Vec<CsiFrame>>,
        truth: Option<GroundTruth>,
    ) -> Result<Self> {
        let t = Self { layout, carrier_hz, streams, truth };
        t.validate()?;
        Ok(t)
    }

    /// Trace from simulator output, with the true rate recorded per frame.
    pub fn from_samples(samples: &[TraceSample], carrier_hz: f64, rate_bpm: f64) -> Result<Self> {
        let first = samples.first().ok_or_else(|| format_err("no frames"))?;
        let layout = Arc::clone(&first.csi[0].layout);
        let n_ant = first.csi.len();
        let streams = (0..n_ant).map(|a| samples.iter().map(|s| s.csi[a].clone()).collect()).collect();
        let truth = GroundTruth {
            rate_bpm: vec![rate_bpm; samples.len()],
            draws: samples.iter().map(|s| s.draws.clone()).collect(),
        };
        Self::new(layout, carrier_hz, streams, Some(truth))
    }

    pub fn n_antennas(&self) -> usize {
        self.streams.len()
    }

    pub fn n_frames(&self) -> usize {
        self.streams.first().map_or(0, Vec::len)
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.streams.first().map_or_else(Vec::new, |s| s.iter().map(|f| f.timestamp).collect())
    }

    /// Mean frame rate from the first and last timestamps.
    pub fn sample_rate_hz(&self) -> Option<f64> {
        let t = self.timestamps();
        let span = t.last()? - t.first()?;
        (t.len() > 1 && span > 0.0).then(|| (t.len() - 1) as f64 / span)
    }

    pub fn validate(&self) -> Result<()> {
        finite(self.carrier_hz, "carrier")?;
        if self.streams.is_empty() || self.streams.len() > u16::MAX as usize {
            return Err(format_err(format!("antenna count {} out of range", self.streams.len())));
        }
        let n = self.n_frames();
        for (a, s) in self.streams.iter().enumerate() {
            if s.len() != n {
                return Err(Error::LengthMismatch { left: n, right: s.len() });
            }
            for (i, f) in s.iter().enumerate() {
                if !f.same_layout(&self.layout) {
                    return Err(Error::LayoutMismatch);
                }
                if !f.is_finite() || !f.timestamp.is_finite() {
                    return Err(format_err(format!("non-finite value in frame {i}, antenna {a}")));
                }
                if f.timestamp.to_bits() != self.streams[0][i].timestamp.to_bits() {
                    return Err(format_err(format!("antenna {a} timestamp differs at frame {i}")));
                }
            }
        }
        if let Some(t) = &self.truth {
            if t.rate_bpm.len() != n || t.draws.len() != n {
                return Err(format_err("ground-truth length does not match frame count"));
            }
            if t.draws.iter().any(|d| d.len() != self.streams.len()) {
                return Err(format_err("ground-truth antenna count mismatch"));
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        let l = &self.layout;
        w.write_all(MAGIC)?;
        w.write_u16::<LE>(VERSION)?;
        w.write_u32::<LE>(l.n_fft() as u32)?;
        w.write_f64::<LE>(l.delta_f_hz())?;
        w.write_u32::<LE>(l.n_active() as u32)?;
        for &k in l.active() {
            w.write_u32::<LE>(k as u32)?;
        }
        w.write_f64::<LE>(self.carrier_hz)?;
        w.write_u16::<LE>(self.n_antennas() as u16)?;
        w.write_u64::<LE>(self.n_frames() as u64)?;
        w.write_u16::<LE>(if self.truth.is_some() { FLAG_TRUTH } else { 0 })?;
        for i in 0..self.n_frames() {
            w.write_f64::<LE>(self.streams[0][i].timestamp)?;
            for s in &self.streams {
                for v in &s[i].values {
                    w.write_f64::<LE>(v.re)?;
                    w.write_f64::<LE>(v.im)?;
                }
            }
        }
        if let Some(t) = &self.truth {
            for (rate, draws) in t.rate_bpm.iter().zip(&t.draws) {
                w.write_f64::<LE>(*rate)?;
                for d in draws {
                    w.write_f64::<LE>(d.beta)?;
                    w.write_f64::<LE>(d.theta)?;
                    w.write_f64::<LE>(d.epsilon)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(format_err("bad magic"));
        }
        let version = r.read_u16::<LE>().map_err(truncated)?;
        if version != VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let n_fft = r.read_u32::<LE>().map_err(truncated)? as usize;
        let delta_f = finite(r.read_f64::<LE>().map_err(truncated)?, "subcarrier spacing")?;
        let n_active = r.read_u32::<LE>().map_err(truncated)? as usize;
        if n_active > n_fft {
            return Err(format_err(format!("{n_active} active subcarriers exceed n_fft {n_fft}")));
        }
        let mut active = Vec::with_capacity(n_active);
        for _ in 0..n_active {
            active.push(r.read_u32::<LE>().map_err(truncated)? as usize);
        }
        if active.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format_err("active indices not sorted and unique"));
        }
        let layout = Arc::new(SubcarrierLayout::new(n_fft, active, delta_f).map_err(|e| format_err(e.to_string()))?);
        let carrier_hz = finite(r.read_f64::<LE>().map_err(truncated)?, "carrier")?;
        let n_ant = r.read_u16::<LE>().map_err(truncated)? as usize;
        let n_frames = r.read_u64::<LE>().map_err(truncated)?;
        let flags = r.read_u16::<LE>().map_err(truncated)?;
        if flags & !FLAG_TRUTH != 0 {
            return Err(format_err(format!("unknown flags {flags:#x}")));
        }
        if n_ant == 0 {
            return Err(format_err("zero antennas"));
        }
        let n_frames = usize::try_from(n_frames).map_err(|_| format_err("frame count too large"))?;

        let cap = n_frames.min(1 << 20);
        let mut streams: Vec<Vec<CsiFrame>> = (0..n_ant).map(|_| Vec::with_capacity(cap)).collect();
        for i in 0..n_frames {
            let ts = finite(r.read_f64::<LE>().map_err(truncated)?, "timestamp")?;
            for s in streams.iter_mut() {
                let mut values = Vec::with_capacity(n_active);
                for _ in 0..n_active {
                    let re = r.read_f64::<LE>().map_err(truncated)?;
                    let im = r.read_f64::<LE>().map_err(truncated)?;
                    if !(re.is_finite() && im.is_finite()) {
                        return Err(format_err(format!("non-finite CSI in frame {i}")));
                    }
                    values.push(Complex64::new(re, im));
                }
                s.push(CsiFrame { timestamp: ts, layout: Arc::clone(&layout), values });
            }
        }
        let truth = if flags & FLAG_TRUTH != 0 {
            let mut rate_bpm = Vec::with_capacity(cap);
            let mut draws = Vec::with_capacity(cap);
            for _ in 0..n_frames {
                rate_bpm.push(r.read_f64::<LE>().map_err(truncated)?);
                let mut d = Vec::with_capacity(n_ant);
                for _ in 0..n_ant {
                    let beta = r.read_f64::<LE>().map_err(truncated)?;
                    let theta = r.read_f64::<LE>().map_err(truncated)?;
                    let epsilon = r.read_f64::<LE>().map_err(truncated)?;
                    // stored verbatim; no re-wrapping of theta
                    d.push(DistortionDraw { beta, theta, epsilon });
                }
                draws.push(d);
            }
            Some(GroundTruth { rate_bpm, draws })
        } else {
            None
        };
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(format_err("trailing bytes after last record"));
        }
        let t = Self { layout, carrier_hz, streams, truth };
        t.validate()?;
        Ok(t)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = Vec::new();
        self.write_to(&mut v)?;
        Ok(v)
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        format_err("file truncated")
    } else {
        e.into()
    }
}
