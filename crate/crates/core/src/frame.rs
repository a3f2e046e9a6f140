use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::{SubcarrierLayout, TapSet};

/// One packet's channel response on the active subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    pub timestamp: f64,
    pub layout: Arc<SubcarrierLayout>,
    /// One value per active subcarrier, in layout order.
    pub values: Vec<Complex64>,
}

impl CsiFrame {
    pub fn new(timestamp: f64, layout: Arc<SubcarrierLayout>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != layout.n_active() {
            return Err(Error::LengthMismatch { left: values.len(), right: layout.n_active() });
        }
        Ok(Self { timestamp, layout, values })
    }

    pub fn same_layout(&self, other: &SubcarrierLayout) -> bool {
        std::ptr::eq(self.layout.as_ref(), other) || *self.layout == *other
    }

    /// Multiply every subcarrier by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            timestamp: self.timestamp,
            layout: Arc::clone(&self.layout),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Delay-domain taps over a [`TapSet`]. Estimator outputs follow the unitary
/// DFT convention, so an on-grid path of gain `a` reads `a * sqrt(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub tapset: Arc<TapSet>,
    pub taps: Vec<Complex64>,
    pub ts: f64,
}

impl Cir {
    pub fn new(tapset: Arc<TapSet>, taps: Vec<Complex64>, ts: f64) -> Result<Self> {
        if taps.len() != tapset.len() {
            return Err(Error::LengthMismatch { left: taps.len(), right: tapset.len() });
        }
        Ok(Self { tapset, taps, ts })
    }

    /// Value at grid tap `tap`, if it is part of the support.
    pub fn tap(&self, tap: usize) -> Option<Complex64> {
        self.tapset.position_of(tap).map(|i| self.taps[i])
    }

    pub fn is_finite(&self) -> bool {
        self.taps.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|v| v.norm_sqr()).sum()
    }
}
