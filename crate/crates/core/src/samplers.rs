//! Prior-based baseline samplers. Each draws initial poses directly and
//! inserts settled outcomes into an archive, one budget unit per draw.

use nalgebra::{Matrix3, Point3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{overlap, principal_axes, rotation_between, rotation_from_matrix, uniform_quaternion, Pose};
use crate::qd::{evaluate_pose, offer_record, Archive, ArchiveMode, CoverageSeries, RunOutput};
use crate::scenario::Scenario;
use crate::space::{decode_contact, encode_naive, random_genome, Genome, SpaceKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("no separating offset found within the backoff range")]
    NoSeparation,
    #[error("evaluation budget must be at least 1")]
    EmptyBudget,
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    RandSample,
    FaceAlignment,
    PcaAlignment,
    ContactRandSample,
}

impl SamplerMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerMethod::RandSample => "rand_sample",
            SamplerMethod::FaceAlignment => "face_alignment",
            SamplerMethod::PcaAlignment => "pca_alignment",
            SamplerMethod::ContactRandSample => "contact_rand_sample",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Standard deviation of the PCA rotation perturbation (rad).
    pub rho_rot: f64,
    /// Standard deviation of the PCA translation perturbation per axis (m).
    pub rho_pos: f64,
    /// Gap between the support top and the lowest object point for PCA drops (m).
    pub clearance: f64,
    pub backoff_iterations: usize,
    /// Redraws allowed inside one budget unit when face alignment finds no separation.
    pub max_resamples: usize,
    /// Draws settled per parallel batch; does not affect results.
    pub chunk: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplerMethod::RandSample,
            rho_rot: 5f64.to_radians(),
            rho_pos: 0.005,
            clearance: 0.005,
            backoff_iterations: 32,
            max_resamples: 16,
            chunk: 256,
        }
    }
}

impl SamplerConfig {
    pub fn new(method: SamplerMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.rho_rot >= 0.0 && self.rho_pos >= 0.0 && self.clearance >= 0.0) {
            return Err(SamplerError::InvalidConfig("perturbation scales and clearance must be non-negative".into()));
        }
        if self.backoff_iterations == 0 || self.chunk == 0 {
            return Err(SamplerError::InvalidConfig("backoff_iterations and chunk must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform position in the placement volume, uniform rotation.
pub fn sample_rand(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Pose<f64> {
    let u = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
    let q = uniform_quaternion(rng.gen(), rng.gen(), rng.gen());
    Pose::new(scenario.volume.lerp(u), q)
}

#[derive(Clone, Debug)]
pub struct FaceSample {
    pub pose: Pose<f64>,
    pub object_triangle: usize,
    pub support_triangle: usize,
    /// Pose with the triangle centroids coincident, before backing off.
    pub aligned: Pose<f64>,
    pub offset: f64,
}

/// Matches an area-weighted object triangle face to face with an
/// area-weighted support triangle, then backs off along the support normal
/// until the object no longer overlaps.
pub fn sample_face_alignment(scenario: &Scenario, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<FaceSample, SamplerError> {
    let obj = &scenario.object;
    let sup = &scenario.support;
    let to = scenario.object_cdf.pick(rng.gen());
    let ts = scenario.support_cdf.pick(rng.gen());
    let n_o = obj.normals[to];
    let n_s = sup.normals[ts];
    let spin = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(n_s), spin) * rotation_between(&n_o, &(-n_s));
    let c_s = sup.centroid(ts).coords;
    let aligned = Pose::new(c_s - q * obj.centroid(to).coords, q);
    let points = scenario.body.proxy_points();
    let tol = scenario.sim.penetration_tol;
    let at = |t: f64| Pose::new(aligned.position + n_s * t, q);
    let clear = |t: f64| !overlap(&points, &at(t), &scenario.support_sdf, tol);
    let reach = obj.aabb.diagonal();
    let offset = if clear(0.0) {
        0.0
    } else if !clear(reach) {
        return Err(SamplerError::NoSeparation);
    } else {
        let (mut lo, mut hi) = (0.0, reach);
        for _ in 0..cfg.backoff_iterations {
            let mid = 0.5 * (lo + hi);
            if clear(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(FaceSample { pose: at(offset), object_triangle: to, support_triangle: ts, aligned, offset })
}

#[derive(Clone, Debug)]
pub struct PcaSample {
    pub pose: Pose<f64>,
    /// Signed angle of the applied rotation perturbation (rad).
    pub angle: f64,
}

/// Orientation mapping the object's principal frame onto the support's,
/// with the support's first axis pointing against gravity.
pub fn pca_orientation(scenario: &Scenario) -> UnitQuaternion<f64> {
    let a_o = principal_axes(&scenario.object).axes;
    let mut a_s = principal_axes(&scenario.support).axes;
    let up = -scenario.gravity().normalize();
    if a_s.column(0).dot(&up) < 0.0 {
        // flip two axes to stay right-handed
        a_s.set_column(0, &(-a_s.column(0)));
        a_s.set_column(1, &(-a_s.column(1)));
    }
    let r: Matrix3<f64> = a_s * a_o.transpose();
    rotation_from_matrix(&r)
}

/// Principal-axis alignment over the support's top, plus a random
/// perturbation, dropped from a small clearance.
pub fn sample_pca_alignment(scenario: &Scenario, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> PcaSample {
    let base = pca_orientation(scenario);
    let axis = Unit::new_normalize(Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)));
    let angle = if cfg.rho_rot > 0.0 { Normal::new(0.0, cfg.rho_rot).unwrap().sample(rng) } else { 0.0 };
    let q = UnitQuaternion::from_axis_angle(&axis, angle) * base;
    let shift = if cfg.rho_pos > 0.0 {
        let n = Normal::new(0.0, cfg.rho_pos).unwrap();
        Vector3::from_fn(|_, _| n.sample(rng))
    } else {
        Vector3::zeros()
    };
    let up = -scenario.gravity().normalize();
    let top = scenario.support.vertices.iter().map(|v| v.coords.dot(&up)).fold(f64::NEG_INFINITY, f64::max);
    let below = scenario.object.vertices.iter().map(|v| -(q * v.coords).dot(&up)).fold(f64::NEG_INFINITY, f64::max);
    let centre = scenario.support.aabb.center().coords;
    let lateral = centre - up * centre.dot(&up);
    let position = lateral + up * (top + cfg.clearance + below) + shift;
    PcaSample { pose: Pose::new(position, q), angle }
}

pub fn sample_contact_rand(scenario: &Scenario, rng: &mut ChaCha8Rng) -> (Genome, Pose<f64>) {
    let g = random_genome(SpaceKind::Contact, rng);
    let pose = decode_contact(&g, scenario);
    (g, pose)
}

/// One draw of any method: genome stored with the elite and the initial pose.
pub fn draw(scenario: &Scenario, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<(Genome, Pose<f64>), SamplerError> {
    let naive = |pose: Pose<f64>| (encode_naive(&pose, scenario), pose);
    match cfg.method {
        SamplerMethod::RandSample => Ok(naive(sample_rand(scenario, rng))),
        SamplerMethod::PcaAlignment => Ok(naive(sample_pca_alignment(scenario, cfg, rng).pose)),
        SamplerMethod::ContactRandSample => Ok(sample_contact_rand(scenario, rng)),
        SamplerMethod::FaceAlignment => {
            let mut last = SamplerError::NoSeparation;
            for _ in 0..=cfg.max_resamples {
                match sample_face_alignment(scenario, cfg, rng) {
                    Ok(s) => return Ok(naive(s.pose)),
                    Err(e) => last = e,
                }
            }
            Err(last)
        }
    }
}

/// Draw, settle and insert `budget` times. Draws are sequential from the
/// seed; settling runs in parallel chunks and is inserted in draw order.
pub fn run_baseline(scenario: &Scenario, cfg: &SamplerConfig, budget: u64, seed: u64) -> Result<RunOutput, SamplerError> {
    use rayon::prelude::*;
    cfg.validate()?;
    if budget == 0 {
        return Err(SamplerError::EmptyBudget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = Archive::new(scenario.archive_spec(), ArchiveMode::MapElites, scenario.sim.sigma_st);
    let mut coverage = CoverageSeries::start(&archive);
    let mut used = 0u64;
    let mut failed = 0u64;
    while used < budget {
        let n = (cfg.chunk as u64).min(budget - used);
        let draws: Vec<_> = (0..n).map(|i| (used + i, draw(scenario, cfg, &mut rng))).collect();
        let records: Vec<_> = draws
            .into_par_iter()
            .map(|(index, d)| d.map(|(g, pose)| evaluate_pose(g, pose, index, scenario)).map_err(|e| (index, e)))
            .collect();
        for r in records {
            match r {
                Ok(rec) => {
                    offer_record(&mut archive, &mut coverage, &rec);
                }
                Err((index, e)) => {
                    failed += 1;
                    log::debug!("draw {index} consumed without settling: {e}");
                    coverage.record(index + 1, &archive);
                }
            }
        }
        used += n;
    }
    if failed > 0 {
        log::info!("{failed} of {budget} {} draws produced no start pose", cfg.method.as_str());
    }
    coverage.finish(used, &archive);
    Ok(RunOutput { archive, coverage, evaluations: used })
}

/// Object vertex lowest along gravity at `pose`.
pub fn lowest_point(pose: &Pose<f64>, scenario: &Scenario) -> Point3<f64> {
    let up = -scenario.gravity().normalize();
    scenario
        .object
        .vertices
        .iter()
        .map(|v| pose.apply(v))
        .min_by(|a, b| a.coords.dot(&up).total_cmp(&b.coords.dot(&up)))
        .expect("object has vertices")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_angle, primitives};
    use crate::scenario::tests::flat_scenario;
    use crate::scenario::ScenarioParams;
    use crate::space::PlacementVolume;
    use statrs::distribution::{ContinuousCDF, Uniform};

    fn ks_uniform(xs: &mut [f64], lo: f64, hi: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let u = Uniform::new(lo, hi).unwrap();
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = u.cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rand_positions_uniform_and_rotations_unbiased() {
        let sc = flat_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let poses: Vec<Pose<f64>> = (0..n).map(|_| sample_rand(&sc, &mut rng)).collect();
        // KS critical value at p = 0.01
        let crit = 1.628 / (n as f64).sqrt();
        for k in 0..3 {
            let mut xs: Vec<f64> = poses.iter().map(|p| p.position[k]).collect();
            let d = ks_uniform(&mut xs, sc.volume.min[k], sc.volume.max[k]);
            assert!(d < crit, "axis {k}: D = {d}");
        }
        let reference = UnitQuaternion::from_euler_angles(0.3, 0.2, 0.1);
        let mean_dot = poses.iter().map(|p| p.orientation.coords.dot(&reference.coords)).sum::<f64>() / n as f64;
        assert!(mean_dot.abs() < 0.01, "{mean_dot}");
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(sample_rand(&sc, &mut r2), poses[0]);
    }

    #[test]
    fn face_alignment_construction() {
        let sc = flat_scenario();
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points = sc.body.proxy_points();
        let mut ok = 0;
        for _ in 0..200 {
            let Ok(s) = sample_face_alignment(&sc, &cfg, &mut rng) else { continue };
            ok += 1;
            let n_o = s.pose.rotate(&sc.object.normals[s.object_triangle]);
            let n_s = sc.support.normals[s.support_triangle];
            assert!((n_o + n_s).norm() <= 1e-9);
            let c_o = s.aligned.apply(&sc.object.centroid(s.object_triangle));
            assert!((c_o - sc.support.centroid(s.support_triangle)).norm() <= 1e-9);
            assert!(!overlap(&points, &s.pose, &sc.support_sdf, sc.sim.penetration_tol));
        }
        assert!(ok > 100);
    }

    #[test]
    fn pca_peg_axis_follows_hole_axis() {
        let peg = primitives::cylinder(0.009, 0.08, 32, 600.0);
        let block = primitives::block_with_hole(0.06, 0.09, 0.013, 0.05, 32, 600.0);
        let params = ScenarioParams::new(PlacementVolume { min: [-0.03, -0.03, 0.0], max: [0.03, 0.03, 0.15] });
        let sc = Scenario::build("peg", &peg, &block, params).unwrap();
        let cfg = SamplerConfig { rho_rot: 0.0, rho_pos: 0.0, ..SamplerConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = sample_pca_alignment(&sc, &cfg, &mut rng);
        let b = sample_pca_alignment(&sc, &cfg, &mut rng);
        assert_eq!(a.pose, b.pose);
        let peg_axis = a.pose.rotate(&Vector3::z());
        let hole_axis = Vector3::z();
        assert!(peg_axis.dot(&hole_axis).abs() > 1f64.to_radians().cos(), "{peg_axis}");
        // lowest point sits the clearance above the block top
        let low = lowest_point(&a.pose, &sc);
        assert!((low.z - (sc.support.aabb.max.z + cfg.clearance)).abs() < 1e-9);
    }

    #[test]
    fn pca_perturbation_angle_spread() {
        let sc = flat_scenario();
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = pca_orientation(&sc);
        let angles: Vec<f64> = (0..10_000)
            .map(|_| {
                let s = sample_pca_alignment(&sc, &cfg, &mut rng);
                assert!((geodesic_angle(&s.pose.orientation, &base) - s.angle.abs()).abs() < 1e-9);
                s.angle
            })
            .collect();
        let n = angles.len() as f64;
        let mean = angles.iter().sum::<f64>() / n;
        let sd = (angles.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - cfg.rho_rot).abs() < 0.05 * cfg.rho_rot, "{sd}");
    }

    #[test]
    fn baseline_budget_accounting() {
        let sc = flat_scenario();
        let cfg = SamplerConfig::new(SamplerMethod::FaceAlignment);
        assert_eq!(run_baseline(&sc, &cfg, 0, 0).unwrap_err(), SamplerError::EmptyBudget);
        let one = run_baseline(&sc, &cfg, 1, 0).unwrap();
        assert_eq!(one.evaluations, 1);
        assert!(one.archive.elites().all(|(_, e)| e.eval_index == 0));
        for method in [SamplerMethod::RandSample, SamplerMethod::PcaAlignment, SamplerMethod::ContactRandSample] {
            let out = run_baseline(&sc, &SamplerConfig { chunk: 7, ..SamplerConfig::new(method) }, 30, 5).unwrap();
            assert_eq!(out.evaluations, 30);
            for w in out.coverage.points.windows(2) {
                assert!(w[1].coverage >= w[0].coverage);
            }
            let again = run_baseline(&sc, &SamplerConfig::new(method), 30, 5).unwrap();
            assert_eq!(again.archive, out.archive);
        }
    }
}
