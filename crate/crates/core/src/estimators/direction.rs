use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::CsiTrace;
use crate::dispersion::FrequencyAngleMap;
use crate::error::{Error, Result};
use crate::pipeline::{csi_ratio, ssnr_profiles, PipelineConfig, SsnrProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub window_start: f64,
    /// Degrees; the map angle of the chosen subcarrier.
    pub angle: f64,
    pub subcarrier_index: usize,
    /// Best score minus the runner-up's.
    pub score_margin: f64,
    pub min_variance: f64,
    /// False when even the most stable subcarrier exceeds the no-motion threshold.
    pub valid: bool,
}

/// Picks the subcarrier with the lowest mean circular variance.
///
/// Exact ties go to the subcarrier whose angle is nearest `previous`, or to
/// the lowest frequency when there is no history.
pub fn estimate_direction(
    profile: &SsnrProfile,
    map: &FrequencyAngleMap,
    no_motion_threshold: f64,
    previous: Option<f64>,
) -> Result<DirectionEstimate> {
    let best = profile
        .best_subcarrier()
        .ok_or_else(|| Error::InsufficientData("profile has no valid subcarriers".into()))?;
    let min = profile.mean_circular_variance[best];
    let tied: Vec<usize> = (0..profile.len())
        .filter(|&i| profile.valid[i] && profile.mean_circular_variance[i] == min)
        .collect();
    let chosen = match previous {
        Some(prev) if tied.len() > 1 => {
            let mut pick = tied[0];
            let mut pick_dist = f64::INFINITY;
            for &i in &tied {
                let d = (map.angle_for_frequency(profile.subcarrier_freqs[i])? - prev).abs();
                if d < pick_dist {
                    pick = i;
                    pick_dist = d;
                }
            }
            pick
        }
        _ => tied[0],
    };
    let runner_up = (0..profile.len())
        .filter(|&i| i != chosen && profile.valid[i])
        .map(|i| profile.ssnr_score[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let best_score = profile.ssnr_score[chosen];
    let score_margin = if runner_up.is_finite() {
        (best_score - runner_up).max(0.0)
    } else {
        0.0
    };
    Ok(DirectionEstimate {
        window_start: profile.window_start,
        angle: map.angle_for_frequency(profile.subcarrier_freqs[chosen])?,
        subcarrier_index: chosen,
        score_margin,
        min_variance: min,
        valid: min <= no_motion_threshold,
    })
}

/// One estimate per pipeline window, carrying the last valid angle forward
/// for tie-breaking.
pub fn track_direction(
    trace: &CsiTrace,
    map: &FrequencyAngleMap,
    cfg: &PipelineConfig,
    no_motion_threshold: f64,
) -> Result<Vec<DirectionEstimate>> {
    let ratio = csi_ratio(trace)?;
    let profiles = ssnr_profiles(&ratio, cfg)?;
    estimates_from_profiles(&profiles, map, no_motion_threshold)
}

pub fn estimates_from_profiles(
    profiles: &[SsnrProfile],
    map: &FrequencyAngleMap,
    no_motion_threshold: f64,
) -> Result<Vec<DirectionEstimate>> {
    let mut previous = None;
    let mut out = Vec::with_capacity(profiles.len());
    for p in profiles {
        let est = estimate_direction(p, map, no_motion_threshold, previous)?;
        if est.valid {
            previous = Some(est.angle);
        }
        out.push(est);
    }
    Ok(out)
}

pub fn write_estimates_csv<W: Write>(writer: W, estimates: &[DirectionEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_start", "angle_deg", "subcarrier", "score_margin", "valid"])?;
    for e in estimates {
        w.write_record(&[
            e.window_start.to_string(),
            e.angle.to_string(),
            e.subcarrier_index.to_string(),
            e.score_margin.to_string(),
            e.valid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
