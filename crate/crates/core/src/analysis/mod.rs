//! Metrics and figure data: coverage, contact heatmaps and perturbation
//! variance histograms, plus their CSV, SVG and point-cloud files.

mod heatmap;
mod histogram;
pub mod plot;

pub use heatmap::{heatmap_from_points, placement_heatmap, HeatmapConfig, HeatmapResult};
pub use histogram::{perturbation_histogram, Aggregation, Exemplar, HistogramConfig, PerturbationHistogram};

pub use crate::qd::{CoveragePoint, CoverageSeries};
use crate::qd::{Archive, ArchiveSpec};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("archive spec does not match the expected spec")]
    SpecMismatch,
    #[error("archive holds no valid elites")]
    NoValidElites,
    #[error("scenario {0:?} has no table-top support face; heatmaps need one")]
    NotTableTop(String),
    #[error("valid elite in cell {cell} has no robustness label; run the DR filter first")]
    MissingLabels { cell: u64 },
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fraction of cells holding a valid elite.
pub fn coverage(archive: &Archive, spec: &ArchiveSpec) -> Result<f64, AnalysisError> {
    if archive.spec != *spec {
        return Err(AnalysisError::SpecMismatch);
    }
    let valid = archive.elites().filter(|(_, e)| e.valid).count();
    Ok(valid as f64 / spec.total_cells() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::qd::{ArchiveMode, BinSpec, Elite};
    use crate::sim::RejectReason;
    use crate::space::{Genome, SpaceKind};
    use nalgebra::{UnitQuaternion, Vector3};

    pub(crate) fn elite(feature: Pose<f64>, variance: f64, valid: bool) -> Elite {
        Elite {
            genome: Genome::new(SpaceKind::Naive, vec![0.0; 6]),
            initial: feature,
            fitness: if valid { -variance } else { -variance.max(1.0) },
            variance,
            feature,
            valid,
            reason: if valid { RejectReason::None } else { RejectReason::Moving },
            eval_index: 0,
            robust: None,
            novelty: None,
        }
    }

    fn small_spec() -> ArchiveSpec {
        let bins = BinSpec { position: [10, 10, 1], orientation: [1, 1, 1] };
        ArchiveSpec { bins, feature_min: [0.0, 0.0, 0.0], feature_max: [1.0, 1.0, 1.0] }
    }

    fn at(x: f64, y: f64) -> Pose<f64> {
        Pose::new(Vector3::new(x, y, 0.5), UnitQuaternion::identity())
    }

    #[test]
    fn coverage_counts_valid_cells() {
        let spec = small_spec();
        let mut a = Archive::new(spec, ArchiveMode::MapElites, 1e-6);
        assert_eq!(coverage(&a, &spec).unwrap(), 0.0);
        for i in 0..5 {
            a.offer(elite(at(0.05 + 0.1 * i as f64, 0.05), 0.0, true));
        }
        a.offer(elite(at(0.95, 0.95), 1.0, false));
        assert_eq!(coverage(&a, &spec).unwrap(), 0.05);
        for i in 0..100 {
            a.offer(elite(at(0.05 + 0.1 * (i % 10) as f64, 0.05 + 0.1 * (i / 10) as f64), 0.0, true));
        }
        assert_eq!(coverage(&a, &spec).unwrap(), 1.0);
        let other = ArchiveSpec { feature_max: [2.0, 1.0, 1.0], ..spec };
        assert!(matches!(coverage(&a, &other), Err(AnalysisError::SpecMismatch)));
    }
}
