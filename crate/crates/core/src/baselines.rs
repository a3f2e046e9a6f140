//! Reference compensation schemes: antenna ratio, reference-subcarrier ratio
//! and the uncompensated magnitude.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::CsiFrame;

/// Denominators below this fraction of the frame median magnitude are masked.
pub const GUARD_FRACTION: f64 = 1e-6;

/// Frames used to pick the default reference subcarrier.
pub const REF_CALIBRATION_FRAMES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    CsiRatio,
    DoubleRatio,
    Raw,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::CsiRatio => "csi_ratio",
            BaselineKind::DoubleRatio => "double_ratio",
            BaselineKind::Raw => "raw",
        })
    }
}

/// Frames x channels matrix with a validity mask. Masked entries hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSeries {
    pub scheme: BaselineKind,
    pub timestamps: Vec<f64>,
    n_channels: usize,
    values: Vec<Complex64>,
    valid: Vec<bool>,
}

impl RatioSeries {
    fn with_capacity(scheme: BaselineKind, n_frames: usize, n_channels: usize) -> Self {
        Self {
            scheme,
            timestamps: Vec::with_capacity(n_frames),
            n_channels,
            values: Vec::with_capacity(n_frames * n_channels),
            valid: Vec::with_capacity(n_frames * n_channels),
        }
    }

    fn push(&mut self, v: Complex64, ok: bool) {
        let ok = ok && v.re.is_finite() && v.im.is_finite();
        self.values.push(if ok { v } else { Complex64::new(0.0, 0.0) });
        self.valid.push(ok);
    }

    pub fn n_frames(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// `None` when masked.
    pub fn get(&self, frame: usize, channel: usize) -> Option<Complex64> {
        let i = frame * self.n_channels + channel;
        self.valid[i].then(|| self.values[i])
    }

    pub fn is_valid(&self, frame: usize, channel: usize) -> bool {
        self.valid[frame * self.n_channels + channel]
    }

    pub fn row(&self, frame: usize) -> &[Complex64] {
        &self.values[frame * self.n_channels..(frame + 1) * self.n_channels]
    }

    /// Channel time series, masked entries as zero.
    pub fn column(&self, channel: usize) -> Vec<Complex64> {
        (0..self.n_frames()).map(|f| self.values[f * self.n_channels + channel]).collect()
    }

    /// Channels without any masked entry.
    pub fn fully_valid_channels(&self) -> Vec<usize> {
        (0..self.n_channels).filter(|&c| (0..self.n_frames()).all(|f| self.is_valid(f, c))).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

fn median_magnitude(values: &[Complex64]) -> f64 {
    let mut m: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    if m.is_empty() {
        return 0.0;
    }
    m.sort_by(|a, b| a.total_cmp(b));
    let h = m.len() / 2;
    if m.len() % 2 == 1 {
        m[h]
    } else {
        0.5 * (m[h - 1] + m[h])
    }
}

fn check_layouts(frames: &[CsiFrame]) -> Result<()> {
    if let Some(first) = frames.first() {
        if frames.iter().any(|f| !f.same_layout(&first.layout)) {
            return Err(Error::LayoutMismatch);
        }
    }
    Ok(())
}

/// `H_a[k] / H_b[k]` per frame.
pub fn csi_ratio(frames_a: &[CsiFrame], frames_b: &[CsiFrame]) -> Result<RatioSeries> {
    if frames_a.len() != frames_b.len() {
        return Err(Error::LengthMismatch { left: frames_a.len(), right: frames_b.len() });
    }
    check_layouts(frames_a)?;
    check_layouts(frames_b)?;
    if let (Some(a), Some(b)) = (frames_a.first(), frames_b.first()) {
        if !a.same_layout(&b.layout) {
            return Err(Error::LayoutMismatch);
        }
    }
    let n = frames_a.first().map_or(0, |f| f.values.len());
    let mut out = RatioSeries::with_capacity(BaselineKind::CsiRatio, frames_a.len(), n);
    for (a, b) in frames_a.iter().zip(frames_b) {
        let guard = GUARD_FRACTION * median_magnitude(&b.values);
        for (x, y) in a.values.iter().zip(&b.values) {
            let q = x / y;
            let ok = y.norm() >= guard && y.norm() > 0.0 && q.is_finite();
            out.push(if ok { q } else { Complex64::new(0.0, 0.0) }, ok);
        }
        out.timestamps.push(a.timestamp);
    }
    Ok(out)
}

/// `H[k] / H[ref]` per frame; the reference column is masked.
pub fn double_ratio(frames: &[CsiFrame], ref_subcarrier: usize) -> Result<RatioSeries> {
    check_layouts(frames)?;
    let Some(first) = frames.first() else {
        return Ok(RatioSeries::with_capacity(BaselineKind::DoubleRatio, 0, 0));
    };
    let pos = first.layout.position_of(ref_subcarrier).ok_or(Error::RefNotActive(ref_subcarrier))?;
    let n = first.values.len();
    let mut out = RatioSeries::with_capacity(BaselineKind::DoubleRatio, frames.len(), n);
    for f in frames {
        let guard = GUARD_FRACTION * median_magnitude(&f.values);
        let r = f.values[pos];
        let ok_ref = r.norm() >= guard && r.norm() > 0.0;
        for (i, x) in f.values.iter().enumerate() {
            let q = x / r;
            let ok = ok_ref && i != pos && q.is_finite();
            out.push(if ok { q } else { Complex64::new(0.0, 0.0) }, ok);
        }
        out.timestamps.push(f.timestamp);
    }
    Ok(out)
}

/// Active subcarrier with the highest mean magnitude over the first
/// calibration frames.
pub fn default_ref_subcarrier(frames: &[CsiFrame]) -> Result<usize> {
    check_layouts(frames)?;
    let first = frames.first().ok_or_else(|| Error::InvalidArgument("no frames".into()))?;
    let window = &frames[..frames.len().min(REF_CALIBRATION_FRAMES)];
    let mut sums = vec![0.0; first.values.len()];
    for f in window {
        for (s, v) in sums.iter_mut().zip(&f.values) {
            *s += v.norm();
        }
    }
    let mut best = 0;
    for (i, s) in sums.iter().enumerate() {
        if *s > sums[best] {
            best = i;
        }
    }
    Ok(first.layout.active()[best])
}

/// `|H[k]|` per frame.
pub fn raw_magnitude(frames: &[CsiFrame]) -> RatioSeries {
    let n = frames.first().map_or(0, |f| f.values.len());
    let mut out = RatioSeries::with_capacity(BaselineKind::Raw, frames.len(), n);
    for f in frames {
        for v in &f.values {
            let m = v.norm();
            let ok = m.is_finite();
            out.push(Complex64::new(if ok { m } else { 0.0 }, 0.0), ok);
        }
        out.timestamps.push(f.timestamp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{synth_csi_clean, ChannelSpec, DistortionDraw, PathComponent};
    use crate::layout::SubcarrierLayout;
    use std::sync::Arc;

    fn layout() -> Arc<SubcarrierLayout> {
        Arc::new(SubcarrierLayout::desk_default())
    }

    fn spec(l: &Arc<SubcarrierLayout>) -> ChannelSpec {
        let ts = l.ts();
        ChannelSpec::new(
            vec![PathComponent::in_taps(1.0, 0.2, 3.3, ts), PathComponent::in_taps(0.4, -1.0, 8.1, ts)],
            5.25e9,
            Arc::clone(l),
        )
        .unwrap()
    }

    #[test]
    fn self_ratio_is_ones() {
        let l = layout();
        let f = vec![synth_csi_clean(&spec(&l), &DistortionDraw::new(1.3, 0.4, 1e-9).unwrap()).unwrap()];
        let r = csi_ratio(&f, &f).unwrap();
        for c in 0..r.n_channels() {
            assert!((r.get(0, c).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn ratio_rejects_unequal_lengths() {
        let l = layout();
        let f = synth_csi_clean(&spec(&l), &DistortionDraw::identity()).unwrap();
        assert!(matches!(csi_ratio(std::slice::from_ref(&f), &[]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn zero_denominator_is_masked() {
        let l = layout();
        let a = synth_csi_clean(&spec(&l), &DistortionDraw::identity()).unwrap();
        let mut b = a.clone();
        b.values[5] = Complex64::new(0.0, 0.0);
        let r = csi_ratio(&[a], &[b]).unwrap();
        assert!(!r.is_valid(0, 5));
        assert_eq!(r.masked_count(), 1);
        assert!(!r.fully_valid_channels().contains(&5));
    }

    #[test]
    fn double_ratio_flat_channel() {
        let l = layout();
        let f = CsiFrame::new(0.0, Arc::clone(&l), vec![Complex64::new(0.7, 0.1); l.n_active()]).unwrap();
        let r = double_ratio(&[f], 10).unwrap();
        let pos = l.position_of(10).unwrap();
        for c in 0..r.n_channels() {
            match r.get(0, c) {
                Some(v) => assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15),
                None => assert_eq!(c, pos),
            }
        }
    }

    #[test]
    fn double_ratio_rejects_null_ref() {
        let l = layout();
        let f = CsiFrame::new(0.0, Arc::clone(&l), vec![Complex64::new(1.0, 0.0); l.n_active()]).unwrap();
        assert_eq!(double_ratio(&[f], 0), Err(Error::RefNotActive(0)));
    }

    #[test]
    fn double_ratio_residual_ramp() {
        let l = layout();
        let s = spec(&l);
        let eps = 0.7 * l.ts();
        let a = synth_csi_clean(&s, &DistortionDraw::identity()).unwrap();
        let b = synth_csi_clean(&s, &DistortionDraw::new(1.8, 2.0, eps).unwrap()).unwrap();
        let rf = 20;
        let ra = double_ratio(&[a], rf).unwrap();
        let rb = double_ratio(&[b], rf).unwrap();
        let freqs = l.active_freqs_hz();
        let f_ref = freqs[l.position_of(rf).unwrap()];
        for (c, f) in freqs.iter().enumerate() {
            if let (Some(x), Some(y)) = (ra.get(0, c), rb.get(0, c)) {
                let ramp = Complex64::from_polar(1.0, -std::f64::consts::TAU * (f - f_ref) * eps);
                assert!((y - x * ramp).norm() < 1e-9 * x.norm().max(1.0));
            }
        }
    }

    #[test]
    fn default_ref_is_strongest() {
        let l = layout();
        let mut v = vec![Complex64::new(1.0, 0.0); l.n_active()];
        v[40] = Complex64::new(0.0, 3.0);
        let f = CsiFrame::new(0.0, Arc::clone(&l), v).unwrap();
        assert_eq!(default_ref_subcarrier(&[f]).unwrap(), l.active()[40]);
    }

    #[test]
    fn raw_is_magnitude() {
        let l = layout();
        let f = synth_csi_clean(&spec(&l), &DistortionDraw::new(2.0, 1.0, 0.0).unwrap()).unwrap();
        let r = raw_magnitude(std::slice::from_ref(&f));
        for (c, v) in f.values.iter().enumerate() {
            assert_eq!(r.get(0, c).unwrap(), Complex64::new(v.norm(), 0.0));
        }
        assert_eq!(r.scheme, BaselineKind::Raw);
    }
}
