//! Dominant-path compensation of RF distortions in WiFi CSI.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod channel_model;
pub mod cir_estimation;
pub mod compensation;
pub mod config;
pub mod dft;
pub mod error;
pub mod frame;
pub mod layout;
pub mod pipeline;
pub mod respiration;
pub mod search;
pub mod trace;

pub use error::{Error, Result};
pub use frame::{Cir, CsiFrame};
pub use layout::{SubcarrierLayout, TapSet};
