use serde::{Deserialize, Serialize};

use super::direction::DirectionEstimate;
use crate::dispersion::FrequencyAngleMap;
use crate::error::{Error, Result};

/// Half-open angular sector `[lo, hi)` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sector {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub sectors: Vec<Sector>,
}

impl RegionSpec {
    pub fn new(sectors: Vec<Sector>) -> Result<Self> {
        let spec = Self { sectors };
        spec.validate(None)?;
        Ok(spec)
    }

    /// Sectors must be non-empty, disjoint and, given a map, inside its span.
    pub fn validate(&self, map: Option<&FrequencyAngleMap>) -> Result<()> {
        if self.sectors.is_empty() {
            return Err(Error::config("regions.sectors", "at least one sector is required"));
        }
        for (i, s) in self.sectors.iter().enumerate() {
            if !(s.lo < s.hi) {
                return Err(Error::config(
                    format!("regions.sectors[{i}]"),
                    format!("lo ({}) must be below hi ({})", s.lo, s.hi),
                ));
            }
            if let Some(map) = map {
                let (lo, hi) = map.angle_span();
                if s.lo < lo - 1e-9 || s.hi > hi + 1e-9 {
                    return Err(Error::config(
                        format!("regions.sectors[{i}]"),
                        format!("[{}, {}) leaves the field of view [{lo:.2}, {hi:.2}]", s.lo, s.hi),
                    ));
                }
            }
            for (j, o) in self.sectors.iter().enumerate().skip(i + 1) {
                if s.lo < o.hi && o.lo < s.hi {
                    return Err(Error::config(
                        format!("regions.sectors[{j}]"),
                        format!("overlaps sector `{}`", s.label),
                    ));
                }
                if s.label == o.label {
                    return Err(Error::config(format!("regions.sectors[{j}]"), "duplicate label"));
                }
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.sectors.iter().map(|s| s.label.clone()).collect()
    }

    /// Index of the sector containing `angle`, else the nearest one.
    pub fn sector_index(&self, angle: f64) -> usize {
        if let Some(i) = self.sectors.iter().position(|s| angle >= s.lo && angle < s.hi) {
            return i;
        }
        let gap = |s: &Sector| {
            if angle < s.lo {
                s.lo - angle
            } else {
                angle - s.hi
            }
        };
        (0..self.sectors.len())
            .min_by(|&a, &b| gap(&self.sectors[a]).total_cmp(&gap(&self.sectors[b])))
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationRule {
    /// Most frequent sector among valid estimates.
    #[default]
    Majority,
    /// Sector of the final valid estimate.
    LastValid,
}

/// Sector label for a series of estimates. Majority ties go to the sector
/// listed first in the `RegionSpec`.
pub fn classify_region(
    estimates: &[DirectionEstimate],
    spec: &RegionSpec,
    rule: ClassificationRule,
) -> Result<String> {
    let mut valid = estimates.iter().filter(|e| e.valid);
    let index = match rule {
        ClassificationRule::LastValid => {
            let last = valid.next_back().ok_or(Error::Unclassifiable)?;
            spec.sector_index(last.angle)
        }
        ClassificationRule::Majority => {
            let mut counts = vec![0usize; spec.sectors.len()];
            for e in valid {
                counts[spec.sector_index(e.angle)] += 1;
            }
            let top = counts.iter().copied().max().unwrap_or(0);
            if top == 0 {
                return Err(Error::Unclassifiable);
            }
            counts.iter().position(|&c| c == top).unwrap_or(0)
        }
    };
    Ok(spec.sectors[index].label.clone())
}
