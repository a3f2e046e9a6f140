//! Subcarrier layouts and CIR tap supports.

use crate::error::{Error, Result};

/// The DFT grid and the subset of bins that carry CSI.
///
/// Active indices use FFT ordering in `[0, n_fft)`; bin `k` sits at baseband
/// frequency `signed(k) * delta_f_hz` where `signed` maps the upper half of the
/// grid to negative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierLayout {
    n_fft: usize,
    active: Vec<usize>,
    delta_f_hz: f64,
}

impl SubcarrierLayout {
    pub fn new(n_fft: usize, active: Vec<usize>, delta_f_hz: f64) -> Result<Self> {
        if n_fft < 2 {
            return Err(Error::InvalidLayout(format!("n_fft must be >= 2, got {n_fft}")));
        }
        if !(delta_f_hz.is_finite() && delta_f_hz > 0.0) {
            return Err(Error::InvalidLayout(format!("subcarrier spacing must be positive, got {delta_f_hz}")));
        }
        if active.is_empty() {
            return Err(Error::InvalidLayout("active set is empty".into()));
        }
        if let Some(&k) = active.iter().find(|&&k| k >= n_fft) {
            return Err(Error::InvalidLayout(format!("active index {k} outside [0, {n_fft})")));
        }
        if active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLayout("active indices must be sorted and unique".into()));
        }
        Ok(Self { n_fft, active, delta_f_hz })
    }

    /// Every bin active.
    pub fn full(n_fft: usize, delta_f_hz: f64) -> Result<Self> {
        Self::new(n_fft, (0..n_fft).collect(), delta_f_hz)
    }

    /// Symmetric layout: bins `±1..=±half_width` active, DC and the band edges
    /// around Nyquist left empty.
    pub fn symmetric_guard(n_fft: usize, n_active: usize, delta_f_hz: f64) -> Result<Self> {
        if !n_active.is_multiple_of(2) || n_active == 0 || n_active >= n_fft {
            return Err(Error::InvalidLayout(format!(
                "symmetric layout needs an even active count below n_fft, got {n_active}"
            )));
        }
        let half = n_active / 2;
        if half >= n_fft / 2 {
            return Err(Error::InvalidLayout("active band reaches Nyquist".into()));
        }
        let mut active: Vec<usize> = (1..=half).collect();
        active.extend((n_fft - half)..n_fft);
        Self::new(n_fft, active, delta_f_hz)
    }

    /// 256-bin grid, 234 active subcarriers, 625 kHz spacing.
    pub fn desk_default() -> Self {
        Self::symmetric_guard(256, 234, 625e3).expect("static layout is valid")
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn delta_f_hz(&self) -> f64 {
        self.delta_f_hz
    }

    /// Tap spacing `1 / (N * delta_f)`.
    pub fn ts(&self) -> f64 {
        1.0 / (self.n_fft as f64 * self.delta_f_hz)
    }

    pub fn signed_index(&self, k: usize) -> i64 {
        signed_index(k, self.n_fft)
    }

    /// Signed bin numbers of the active subcarriers.
    pub fn signed_active(&self) -> Vec<i64> {
        self.active.iter().map(|&k| self.signed_index(k)).collect()
    }

    /// Baseband frequency of every active subcarrier in Hz.
    pub fn active_freqs_hz(&self) -> Vec<f64> {
        self.active.iter().map(|&k| self.signed_index(k) as f64 * self.delta_f_hz).collect()
    }

    pub fn position_of(&self, k: usize) -> Option<usize> {
        self.active.binary_search(&k).ok()
    }
}

/// Map an FFT-ordered index to a signed bin in `(-n/2, n/2]`.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Candidate tap support for LS recovery, as sorted indices in `[0, n_fft)`.
///
/// Negative delays wrap around to the top of the grid, so a window centered on
/// tap 0 holds `{0, 1, .., after, n-before, .., n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet {
    n_fft: usize,
    taps: Vec<usize>,
}

impl TapSet {
    pub fn new(n_fft: usize, mut taps: Vec<usize>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidTapSet("empty".into()));
        }
        if let Some(&t) = taps.iter().find(|&&t| t >= n_fft) {
            return Err(Error::InvalidTapSet(format!("tap {t} outside [0, {n_fft})")));
        }
        taps.sort_unstable();
        taps.dedup();
        Ok(Self { n_fft, taps })
    }

    /// Taps `[0, len)`.
    pub fn contiguous(n_fft: usize, len: usize) -> Result<Self> {
        if len > n_fft {
            return Err(Error::InvalidTapSet(format!("{len} taps exceed n_fft {n_fft}")));
        }
        Self::new(n_fft, (0..len).collect())
    }

    /// Taps `[-before, after]` around tap 0, wrapped onto the grid.
    pub fn centered(n_fft: usize, before: usize, after: usize) -> Result<Self> {
        if before + after + 1 > n_fft {
            return Err(Error::InvalidTapSet("window wider than the DFT grid".into()));
        }
        let taps = (-(before as i64)..=after as i64).map(|d| d.rem_euclid(n_fft as i64) as usize).collect();
        Self::new(n_fft, taps)
    }

    /// The desk default: 17 taps spanning `[-8, 8]`. A symmetric window keeps the
    /// tap-0 alignment objective unbiased on a symmetric band; wider windows
    /// inflate the LS noise gain at tap 0 sharply once guard bands are present
    /// (about 1.9 here, 28 at `[-16, 16]`).
    pub fn desk_default(n_fft: usize) -> Self {
        Self::centered(n_fft, 8, 8).expect("n_fft large enough for the default window")
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn position_of(&self, tap: usize) -> Option<usize> {
        self.taps.binary_search(&tap).ok()
    }

    /// Tap delays in units of `ts`, signed.
    pub fn signed_taps(&self) -> Vec<i64> {
        self.taps.iter().map(|&t| signed_index(t, self.n_fft)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_layout_shape() {
        let l = SubcarrierLayout::desk_default();
        assert_eq!(l.n_fft(), 256);
        assert_eq!(l.n_active(), 234);
        assert!(l.position_of(0).is_none());
        assert!(l.position_of(118).is_none() && l.position_of(138).is_none());
        assert!(l.position_of(117).is_some() && l.position_of(139).is_some());
        assert!((l.ts() - 6.25e-9).abs() < 1e-18);
        let s = l.signed_active();
        assert_eq!(s.iter().sum::<i64>(), 0);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(SubcarrierLayout::new(8, vec![], 1.0).is_err());
        assert!(SubcarrierLayout::new(8, vec![3, 2], 1.0).is_err());
        assert!(SubcarrierLayout::new(8, vec![1, 8], 1.0).is_err());
        assert!(SubcarrierLayout::new(8, vec![1, 1], 1.0).is_err());
        assert!(SubcarrierLayout::new(8, vec![1], 0.0).is_err());
    }

    #[test]
    fn centered_tapset_wraps() {
        let t = TapSet::centered(16, 2, 3).unwrap();
        assert_eq!(t.taps(), &[0, 1, 2, 3, 14, 15]);
        assert_eq!(t.signed_taps(), vec![0, 1, 2, 3, -2, -1]);
        assert_eq!(t.position_of(0), Some(0));
        assert!(TapSet::new(4, vec![]).is_err());
        assert!(TapSet::new(4, vec![4]).is_err());
    }
}
