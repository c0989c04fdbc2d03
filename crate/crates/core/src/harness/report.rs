use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::Task;

/// Bumped whenever a report field changes meaning or disappears.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const UNCLASSIFIED: &str = "unclassified";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespirationRecord {
    pub direction_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_rate_bpm: Option<f64>,
    pub estimated_rate_bpm: Option<f64>,
    pub abs_error_bpm: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub case: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimated_angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_error_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion_detected: Option<bool>,
    pub windows: usize,
    pub valid_windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_region: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_region: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub respiration: Vec<RespirationRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TrialRecord {
    pub fn new(case: &str, group: Option<String>, trial: usize, seed: u64) -> Self {
        Self {
            case: case.into(),
            group,
            trial,
            seed,
            true_angle_deg: None,
            estimated_angle_deg: None,
            angle_error_deg: None,
            motion_detected: None,
            windows: 0,
            valid_windows: 0,
            true_region: None,
            predicted_region: None,
            respiration: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Rows are true labels, columns predicted labels (plus `unclassified`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub predicted_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let mut predicted_labels = labels.clone();
        predicted_labels.push(UNCLASSIFIED.into());
        let counts = vec![vec![0; predicted_labels.len()]; labels.len()];
        Self { labels, predicted_labels, counts }
    }

    pub fn record(&mut self, truth: &str, predicted: Option<&str>) {
        let Some(row) = self.labels.iter().position(|l| l == truth) else { return };
        let col = predicted
            .and_then(|p| self.predicted_labels.iter().position(|l| l == p))
            .unwrap_or(self.predicted_labels.len() - 1);
        self.counts[row][col] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_mae_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_max_error_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub respiration_mae_bpm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub respiration_max_error_bpm: Option<f64>,
    /// Directions with a true rate whose breathing was detected.
    pub respiration_detected: usize,
    pub respiration_expected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn max(values: &[f64]) -> Option<f64> {
    values.iter().cloned().reduce(f64::max)
}

impl Metrics {
    pub fn from_trials<'a>(trials: impl IntoIterator<Item = &'a TrialRecord>, region_labels: Option<&[String]>) -> Self {
        let trials: Vec<&TrialRecord> = trials.into_iter().collect();
        let angle_errors: Vec<f64> = trials.iter().filter_map(|t| t.angle_error_deg).collect();
        let rate_errors: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.respiration.iter())
            .filter_map(|r| r.abs_error_bpm)
            .collect();
        let respiration_expected = trials
            .iter()
            .flat_map(|t| t.respiration.iter())
            .filter(|r| r.true_rate_bpm.is_some())
            .count();
        let confusion = region_labels.map(|labels| {
            let mut m = ConfusionMatrix::new(labels.to_vec());
            for t in &trials {
                if let Some(truth) = &t.true_region {
                    m.record(truth, t.predicted_region.as_deref());
                }
            }
            m
        });
        Self {
            trials: trials.len(),
            angle_mae_deg: mean(&angle_errors),
            angle_max_error_deg: max(&angle_errors),
            respiration_mae_bpm: mean(&rate_errors),
            respiration_max_error_bpm: max(&rate_errors),
            respiration_detected: rate_errors.len(),
            respiration_expected,
            region_accuracy: confusion.as_ref().and_then(ConfusionMatrix::accuracy),
            confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment_id: String,
    pub task: Task,
    pub base_seed: u64,
    pub trials_per_case: usize,
    pub seeds: Vec<u64>,
    pub map_id: String,
    pub metrics: Metrics,
    pub groups: BTreeMap<String, Metrics>,
    pub trials: Vec<TrialRecord>,
    /// Wall-clock seconds; kept out of report.json so reports stay reproducible.
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTrial {
    pub case: String,
    pub trial: usize,
    pub seed: u64,
    pub fsa: Vec<RespirationRecord>,
    pub omni: Vec<RespirationRecord>,
    /// Mean absolute rate error, or none when any direction went undetected.
    pub fsa_error_bpm: Option<f64>,
    pub omni_error_bpm: Option<f64>,
}

impl ComparisonTrial {
    pub fn fsa_wins(&self) -> bool {
        match (self.fsa_error_bpm, self.omni_error_bpm) {
            (Some(f), Some(o)) => f < o,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub experiment_id: String,
    pub base_seed: u64,
    pub trials: Vec<ComparisonTrial>,
    pub fsa_mae_bpm: Option<f64>,
    pub omni_mae_bpm: Option<f64>,
    pub fsa_wins: usize,
    #[serde(skip)]
    pub runtime_s: f64,
}

impl ComparisonReport {
    pub fn summarize(experiment_id: &str, base_seed: u64, trials: Vec<ComparisonTrial>) -> Self {
        let fsa: Vec<f64> = trials.iter().filter_map(|t| t.fsa_error_bpm).collect();
        let omni: Vec<f64> = trials.iter().filter_map(|t| t.omni_error_bpm).collect();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment_id: experiment_id.into(),
            base_seed,
            fsa_wins: trials.iter().filter(|t| t.fsa_wins()).count(),
            fsa_mae_bpm: mean(&fsa),
            omni_mae_bpm: mean(&omni),
            trials,
            runtime_s: 0.0,
        }
    }
}

/// Mean absolute error over directions with a true rate; none if any was missed.
pub fn trial_rate_error(records: &[RespirationRecord]) -> Option<f64> {
    let scored: Vec<&RespirationRecord> = records.iter().filter(|r| r.true_rate_bpm.is_some()).collect();
    if scored.is_empty() {
        return None;
    }
    let errors: Option<Vec<f64>> = scored.iter().map(|r| r.abs_error_bpm).collect();
    errors.and_then(|e| mean(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rows_sum_to_trials() {
        let mut m = ConfusionMatrix::new(vec!["a".into(), "b".into()]);
        m.record("a", Some("a"));
        m.record("a", Some("b"));
        m.record("b", None);
        assert_eq!(m.counts, vec![vec![1, 1, 0], vec![0, 0, 1]]);
        assert_eq!(m.accuracy(), Some(1.0 / 3.0));
    }

    #[test]
    fn comparison_prefers_detected() {
        let t = |f: Option<f64>, o: Option<f64>| ComparisonTrial {
            case: "c".into(),
            trial: 0,
            seed: 0,
            fsa: vec![],
            omni: vec![],
            fsa_error_bpm: f,
            omni_error_bpm: o,
        };
        assert!(t(Some(0.1), Some(2.0)).fsa_wins());
        assert!(t(Some(0.1), None).fsa_wins());
        assert!(!t(None, None).fsa_wins());
        assert!(!t(Some(1.0), Some(0.5)).fsa_wins());
    }
}
