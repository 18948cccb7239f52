use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::qd::Archive;

/// Fixed log₁₀ bin edges, so histograms of different runs line up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub bins_per_decade: usize,
    /// Values below `10^min_exponent` (zero included) land in the first bin.
    pub min_exponent: i32,
    /// Values above `10^max_exponent` (blown-up trials included) land in the last bin.
    pub max_exponent: i32,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { bins_per_decade: 2, min_exponent: -16, max_exponent: 2 }
    }
}

impl HistogramConfig {
    pub fn edges(&self) -> Vec<f64> {
        let n = self.bin_count();
        (0..=n).map(|i| 10f64.powf(self.min_exponent as f64 + i as f64 / self.bins_per_decade as f64)).collect()
    }

    fn bin_count(&self) -> usize {
        (self.max_exponent - self.min_exponent) as usize * self.bins_per_decade
    }

    fn bin_of(&self, v: f64) -> usize {
        let n = self.bin_count();
        if !(v > 0.0) {
            return 0;
        }
        let s = (v.log10() - self.min_exponent as f64) * self.bins_per_decade as f64;
        (s.floor().max(0.0) as usize).min(n - 1)
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if self.bins_per_decade == 0 || self.max_exponent <= self.min_exponent {
            return Err(AnalysisError::InvalidConfig("need bins_per_decade >= 1 and max_exponent > min_exponent".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One count per trial.
    PerTrial,
    /// One count per pose, at the mean of its trial variances.
    PoseMean,
}

/// Lowest-variance member of a bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub cell: u64,
    /// Trial index for per-trial histograms.
    pub trial: Option<usize>,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationHistogram {
    pub aggregation: Aggregation,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub exemplars: Vec<Option<Exemplar>>,
}

impl PerturbationHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Histogram of DR trial variances over every valid elite. Every valid elite
/// must carry a label.
pub fn perturbation_histogram(
    archive: &Archive,
    cfg: &HistogramConfig,
    aggregation: Aggregation,
) -> Result<PerturbationHistogram, AnalysisError> {
    cfg.validate()?;
    let n = cfg.bin_count();
    let mut counts = vec![0; n];
    let mut exemplars: Vec<Option<Exemplar>> = vec![None; n];
    let mut add = |ex: Exemplar| {
        let b = cfg.bin_of(ex.variance);
        counts[b] += 1;
        let better = exemplars[b].map_or(true, |cur| {
            (ex.variance, ex.cell, ex.trial).partial_cmp(&(cur.variance, cur.cell, cur.trial)) == Some(std::cmp::Ordering::Less)
        });
        if better {
            exemplars[b] = Some(ex);
        }
    };
    for (cell, elite) in archive.elites().filter(|(_, e)| e.valid) {
        let label = elite.robust.as_ref().ok_or(AnalysisError::MissingLabels { cell })?;
        match aggregation {
            Aggregation::PerTrial => {
                for (m, &v) in label.trial_variances.iter().enumerate() {
                    add(Exemplar { cell, trial: Some(m), variance: v });
                }
            }
            Aggregation::PoseMean => {
                let k = label.trial_variances.len().max(1) as f64;
                // blown-up trials are recorded as f64::MAX; summing them would overflow
                let mean = label.trial_variances.iter().map(|v| v / k).sum::<f64>();
                add(Exemplar { cell, trial: None, variance: mean });
            }
        }
    }
    Ok(PerturbationHistogram { aggregation, edges: cfg.edges(), counts, exemplars })
}
