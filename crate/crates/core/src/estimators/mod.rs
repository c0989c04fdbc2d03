//! Direction, region and respiration estimators built on SSNR profiles.

pub mod direction;
pub mod region;
pub mod respiration;

pub use direction::{estimate_direction, track_direction, write_estimates_csv, DirectionEstimate};
pub use region::{classify_region, ClassificationRule, RegionSpec, Sector};
pub use respiration::{
    extract_waveform, multi_target_respiration, respiration_rate, RateEstimate, RespirationOutcome,
    RespirationConfig, RespirationResult, BREATHING_BAND_BPM,
};
