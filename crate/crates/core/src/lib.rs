//! Simulator and signal-processing toolkit for direction-aware Wi-Fi sensing
//! with a single frequency-scanning antenna (FSA).
//!
//! A coupled-resonator FSA radiates every OFDM subcarrier toward a different
//! angle, so each subcarrier acts as a spatial probe. This crate provides:
//!
//! * [`dispersion`]: resonator phase delay, beam steering, array-factor beam
//!   patterns and the frequency/angle map (synthetic or calibrated).
//! * [`scene`]: declarative 2-D sensing scenarios with moving and breathing targets.
//! * [`channel`]: two-receiver CSI synthesis under the dispersive model.
//! * [`pipeline`]: CSI-ratio offset cancellation, multi-interval TD-CSI and
//!   phase-stability SSNR profiling.
//! * [`estimators`]: direction tracking, region classification and
//!   multi-target respiration monitoring.
//! * [`harness`]: experiment configs, presets, sweeps and reports.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod channel;
pub mod dispersion;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod par;
pub mod pipeline;
pub mod scene;

pub use error::{Error, Result};
pub use num_complex::Complex64;
