use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::geometry::sample_surface;
use crate::qd::Archive;
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    /// Height of the contact chunk as a fraction of the object's extent above the table.
    pub chunk_fraction: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self { chunk_fraction: 0.1, samples: 4000, seed: 0 }
    }
}

/// Relative contact quality per object surface point, in the object frame.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapResult {
    pub points: Vec<Point3<f64>>,
    pub quality: Vec<f64>,
    /// Raw sums of shifted fitness.
    pub accumulated: Vec<f64>,
    /// Added to every fitness before accumulation.
    pub fitness_shift: f64,
    pub chunk_fraction: f64,
    pub elites: usize,
}

/// Accumulates each valid elite's fitness, shifted by `σ_st` so that every
/// valid fitness is positive, on the object points lying in the lowest chunk
/// above the table.
pub fn placement_heatmap(archive: &Archive, scenario: &Scenario, cfg: &HeatmapConfig) -> Result<HeatmapResult, AnalysisError> {
    let table = scenario.params.table_height.ok_or_else(|| AnalysisError::NotTableTop(scenario.name.clone()))?;
    if cfg.samples == 0 {
        return Err(AnalysisError::InvalidConfig("samples must be positive".into()));
    }
    let samples = sample_surface(&scenario.object, cfg.samples, cfg.seed)
        .map_err(|e| AnalysisError::InvalidConfig(e.to_string()))?;
    heatmap_from_points(archive, &samples.points, table, cfg.chunk_fraction)
}

pub fn heatmap_from_points(
    archive: &Archive,
    points: &[Point3<f64>],
    table_height: f64,
    chunk_fraction: f64,
) -> Result<HeatmapResult, AnalysisError> {
    if !(chunk_fraction > 0.0 && chunk_fraction <= 1.0) {
        return Err(AnalysisError::InvalidConfig("chunk_fraction must be in (0, 1]".into()));
    }
    let elites: Vec<_> = archive.elites().filter(|(_, e)| e.valid).map(|(_, e)| e).collect();
    if elites.is_empty() {
        return Err(AnalysisError::NoValidElites);
    }
    let shift = archive.sigma_st;
    let chunks: Vec<Vec<usize>> = elites
        .par_iter()
        .map(|e| {
            let heights: Vec<f64> = points.iter().map(|p| e.feature.apply(p).z - table_height).collect();
            let top = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let limit = chunk_fraction * top;
            (0..points.len()).filter(|&i| heights[i] <= limit).collect()
        })
        .collect();
    let mut accumulated = vec![0.0; points.len()];
    for (e, chunk) in elites.iter().zip(&chunks) {
        let w = e.fitness + shift;
        for &i in chunk {
            accumulated[i] += w;
        }
    }
    let max = accumulated.iter().copied().fold(0.0, f64::max);
    let quality = accumulated.iter().map(|&a| if max > 0.0 { (a / max).clamp(0.0, 1.0) } else { 0.0 }).collect();
    Ok(HeatmapResult {
        points: points.to_vec(),
        quality,
        accumulated,
        fitness_shift: shift,
        chunk_fraction,
        elites: elites.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::elite;
    use crate::geometry::Pose;
    use crate::qd::{ArchiveMode, ArchiveSpec, BinSpec};
    use crate::scenario::tests::flat_scenario;
    use nalgebra::{UnitQuaternion, Vector3};
    use std::f64::consts::FRAC_PI_2;

    fn archive(sigma_st: f64) -> Archive {
        let spec = ArchiveSpec { bins: BinSpec::default(), feature_min: [-1.0, -1.0, 0.0], feature_max: [1.0, 1.0, 1.0] };
        Archive::new(spec, ArchiveMode::MapElites, sigma_st)
    }

    /// Points on a vertical segment of an object 1 unit tall, centred on its origin.
    fn column() -> Vec<Point3<f64>> {
        (0..=20).map(|i| Point3::new(0.0, 0.0, -0.5 + i as f64 / 20.0)).collect()
    }

    #[test]
    fn single_elite_lights_its_chunk_fully() {
        let mut a = archive(1e-6);
        a.offer(elite(Pose::from_translation(Vector3::new(0.0, 0.0, 0.5)), 0.0, true));
        let h = heatmap_from_points(&a, &column(), 0.0, 0.1).unwrap();
        for (p, q) in h.points.iter().zip(&h.quality) {
            let expected = if p.z + 0.5 <= 0.1 + 1e-12 { 1.0 } else { 0.0 };
            assert_eq!(*q, expected, "{p:?}");
        }
        assert_eq!(h.quality.iter().filter(|&&q| q == 1.0).count(), 3);
    }

    #[test]
    fn disjoint_chunks_scale_with_shifted_fitness() {
        let mut a = archive(1.0);
        // upright rests on the low end, flipped on the high end
        a.offer(elite(Pose::from_translation(Vector3::new(0.0, 0.0, 0.5)), 0.0, true));
        let flipped = Pose::new(Vector3::new(0.5, 0.0, 0.5), UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
        a.offer(elite(flipped, 0.5, true));
        let h = heatmap_from_points(&a, &column(), 0.0, 0.1).unwrap();
        assert_eq!(h.quality[0], 1.0);
        assert_eq!(h.quality[20], 0.5);
        assert!(h.quality[5..16].iter().all(|&q| q == 0.0));
    }

    #[test]
    fn points_above_the_chunk_never_accumulate() {
        let mut a = archive(1e-6);
        for k in 0..8 {
            let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), k as f64 * 0.7);
            a.offer(elite(Pose::new(Vector3::new(0.1 * k as f64, 0.0, 0.5), yaw), 0.0, true));
        }
        let h = heatmap_from_points(&a, &column(), 0.0, 0.1).unwrap();
        for (p, acc) in h.points.iter().zip(&h.accumulated) {
            if p.z + 0.5 > 0.1 + 1e-12 {
                assert_eq!(*acc, 0.0);
            }
        }
    }

    #[test]
    fn invalid_elites_are_ignored_and_required() {
        let mut a = archive(1e-6);
        a.offer(elite(Pose::from_translation(Vector3::new(0.0, 0.0, 0.5)), 1.0, false));
        assert!(matches!(heatmap_from_points(&a, &column(), 0.0, 0.1), Err(AnalysisError::NoValidElites)));
    }

    #[test]
    fn rotating_the_scene_about_vertical_keeps_qualities() {
        let sc = flat_scenario();
        let cfg = HeatmapConfig { samples: 500, ..HeatmapConfig::default() };
        let mut a = archive(sc.sim.sigma_st);
        let mut b = archive(sc.sim.sigma_st);
        let turn = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.83);
        let poses = [
            Pose::new(Vector3::new(0.0, 0.0, 0.025), UnitQuaternion::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2)),
            Pose::new(Vector3::new(0.3, 0.1, 0.025), UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.1)),
        ];
        for (i, p) in poses.iter().enumerate() {
            a.offer(elite(*p, 1e-8 * i as f64, true));
            let moved = Pose::new(turn * p.position, turn * p.orientation);
            b.offer(elite(moved, 1e-8 * i as f64, true));
        }
        let ha = placement_heatmap(&a, &sc, &cfg).unwrap();
        let hb = placement_heatmap(&b, &sc, &cfg).unwrap();
        for (x, y) in ha.quality.iter().zip(&hb.quality) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
