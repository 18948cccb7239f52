//! Perturb-and-resettle test that separates stable equilibria from poses
//! that only happened to come to rest.

use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{geodesic_angle, Pose};
use crate::qd::{Archive, ArchiveSpec};
use crate::scenario::Scenario;
use crate::sim::{pose_variance, rollout, RigidBodyState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustnessError {
    #[error("archive is empty")]
    NonEmptyRequired,
    #[error("invalid robustness config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Offset the pose along one axis.
    Pose,
    /// Start from the unperturbed pose with an impulse along one axis.
    Impulse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrConfig {
    pub trials: usize,
    pub steps: usize,
    pub sigma_dr: f64,
    /// Translation offset as a fraction of the object bounding-box diagonal.
    pub translation_fraction: f64,
    /// Rotation offset about the center of mass (rad).
    pub rotation: f64,
    pub mode: PerturbationMode,
    /// Impulse magnitude (N·s) in impulse mode; rotational axes use a lever
    /// of half the bounding-box diagonal.
    pub impulse: f64,
    /// A trial counts as returning to its pose when within these tolerances.
    pub same_pose_position_fraction: f64,
    pub same_pose_angle: f64,
    pub seed: u64,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            steps: 240,
            sigma_dr: 1e-3,
            translation_fraction: 0.02,
            rotation: 5f64.to_radians(),
            mode: PerturbationMode::Pose,
            impulse: 0.01,
            same_pose_position_fraction: 0.05,
            same_pose_angle: 5f64.to_radians(),
            seed: 0,
        }
    }
}

impl DrConfig {
    pub fn validate(&self) -> Result<(), RobustnessError> {
        let bad = |m: &str| Err(RobustnessError::InvalidConfig(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.steps < 1 {
            return bad("steps must be at least 1");
        }
        if !(self.sigma_dr > 0.0) {
            return bad("sigma_dr must be positive");
        }
        if self.translation_fraction < 0.0 || self.rotation < 0.0 || self.impulse < 0.0 {
            return bad("perturbation magnitudes must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustLabel {
    pub robust: bool,
    pub trial_variances: Vec<f64>,
    pub worst: f64,
    /// Final distance (m) and angle (rad) of each trial from the unperturbed pose.
    pub deviations: Vec<[f64; 2]>,
}

/// Axis index `0..3` is translation along x, y, z; `3..6` rotation about them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub axis: usize,
    pub sign: f64,
}

pub fn draw_perturbation(rng: &mut ChaCha8Rng) -> Perturbation {
    let axis = rng.gen_range(0..6);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Perturbation { axis, sign }
}

/// Offsets `pose` along exactly one axis; rotations are about the center of mass.
pub fn apply_perturbation(pose: &Pose<f64>, p: Perturbation, translation: f64, rotation: f64) -> Pose<f64> {
    let mut out = *pose;
    if p.axis < 3 {
        out.position[p.axis] += p.sign * translation;
    } else {
        let axis = Unit::new_unchecked(Vector3::ith(p.axis - 3, 1.0));
        out.orientation = UnitQuaternion::from_axis_angle(&axis, p.sign * rotation) * pose.orientation;
    }
    out
}

/// One random single-axis pose offset of the configured size.
pub fn perturb_pose(pose: &Pose<f64>, cfg: &DrConfig, char_length: f64, rng: &mut ChaCha8Rng) -> Pose<f64> {
    let p = draw_perturbation(rng);
    apply_perturbation(pose, p, cfg.translation_fraction * char_length, cfg.rotation)
}

/// Stream for one trial of one cell; trial `m` is identical whatever `M` is.
pub fn trial_rng(seed: u64, cell: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ cell.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial as u64);
    rng
}

/// Pushes `pose` out of the support along the mean outward SDF gradient of
/// the penetrating proxies until none is deeper than the penetration
/// tolerance, so an offset never starts with a large penalty impulse.
pub fn depenetrate(pose: &Pose<f64>, scenario: &Scenario) -> Pose<f64> {
    let tol = scenario.sim.penetration_tol;
    let mut out = *pose;
    for _ in 0..16 {
        let mut deepest = 0.0f64;
        let mut dir = Vector3::zeros();
        for p in &scenario.body.proxies {
            let (d, grad) = scenario.support_sdf.query(&out.apply(&Point3::from(*p)));
            if d < -tol {
                deepest = deepest.max(-d);
                dir += grad * (-d);
            }
        }
        if deepest == 0.0 || dir.norm() < 1e-12 {
            break;
        }
        out.position += dir.normalize() * deepest;
    }
    out
}

/// Start state of one trial.
pub fn trial_start(pose: &Pose<f64>, scenario: &Scenario, cfg: &DrConfig, rng: &mut ChaCha8Rng) -> RigidBodyState<f64> {
    let l = scenario.char_length();
    let p = draw_perturbation(rng);
    match cfg.mode {
        PerturbationMode::Pose => {
            let moved = apply_perturbation(pose, p, cfg.translation_fraction * l, cfg.rotation);
            RigidBodyState::at_rest(depenetrate(&moved, scenario))
        }
        PerturbationMode::Impulse => {
            let body = &scenario.body;
            let mut s = RigidBodyState::at_rest(*pose);
            let e = Vector3::ith(p.axis % 3, p.sign * cfg.impulse);
            if p.axis < 3 {
                s.linear = e / body.mass;
            } else {
                let r = pose.rotation_matrix();
                let inertia = r * body.inertia * r.transpose();
                s.angular = inertia.try_inverse().unwrap_or_default() * (e * (0.5 * l));
            }
            s
        }
    }
}

/// Recorded for trials whose rollout blew up; finite so label files stay valid JSON.
pub const BLOWUP: f64 = f64::MAX;

/// Runs the `M` perturbation trials for the settled pose stored in `cell`.
pub fn dr_filter(feature: &Pose<f64>, cell: u64, scenario: &Scenario, cfg: &DrConfig) -> RobustLabel {
    let l = scenario.char_length();
    let mut trial_variances = Vec::with_capacity(cfg.trials);
    let mut deviations = Vec::with_capacity(cfg.trials);
    for m in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, cell, m);
        let start = trial_start(feature, scenario, cfg, &mut rng);
        let traj = rollout(start, &scenario.body, &scenario.support_sdf, &scenario.sim, cfg.steps);
        let (variance, deviation) = if traj.blowup {
            (BLOWUP, [BLOWUP, BLOWUP])
        } else {
            let end = traj.last_pose();
            let v = pose_variance(&traj.poses(), l).expect("at least two poses and positive length");
            (v, [(end.position - feature.position).norm(), geodesic_angle(&end.orientation, &feature.orientation)])
        };
        trial_variances.push(variance);
        deviations.push(deviation);
    }
    let worst = trial_variances.iter().copied().fold(0.0, f64::max);
    let robust = trial_variances.iter().all(|&v| v < cfg.sigma_dr);
    RobustLabel { robust, trial_variances, worst, deviations }
}

/// Hold-out check: one perturbation from an independent stream, then a full
/// settle-length rollout; true when the final pose lands in `cell` again.
pub fn resettles_to_cell(feature: &Pose<f64>, cell: u64, scenario: &Scenario, spec: &ArchiveSpec, cfg: &DrConfig, seed: u64) -> bool {
    let mut rng = trial_rng(seed, cell, usize::MAX);
    let start = trial_start(feature, scenario, cfg, &mut rng);
    let traj = rollout(start, &scenario.body, &scenario.support_sdf, &scenario.sim, scenario.sim.steps);
    !traj.blowup && spec.cell_index(&traj.last_pose()) == Ok(cell)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub total: usize,
    pub valid: usize,
    pub robust: usize,
    pub fragile: usize,
}

impl LabelSummary {
    pub fn csv(&self, scenario: &str) -> String {
        format!(
            "scenario,total,valid,robust,fragile\n{scenario},{},{},{},{}\n",
            self.total, self.valid, self.robust, self.fragile
        )
    }
}

/// Labels every valid elite. Trials run in parallel; results are written
/// back in cell order.
pub fn label_archive(archive: &mut Archive, scenario: &Scenario, cfg: &DrConfig) -> Result<LabelSummary, RobustnessError> {
    cfg.validate()?;
    if archive.is_empty() {
        return Err(RobustnessError::NonEmptyRequired);
    }
    let jobs: Vec<(u64, Pose<f64>)> = archive.elites().filter(|(_, e)| e.valid).map(|(c, e)| (c, e.feature)).collect();
    let labels: Vec<RobustLabel> = jobs.par_iter().map(|(c, f)| dr_filter(f, *c, scenario, cfg)).collect();
    let mut summary = LabelSummary { total: archive.len(), valid: jobs.len(), ..Default::default() };
    let mut it = jobs.iter().map(|(c, _)| *c).zip(labels);
    let mut next = it.next();
    for (cell, elite) in archive.elites_mut() {
        if let Some((c, label)) = next.take() {
            if c == cell {
                if label.robust {
                    summary.robust += 1;
                } else {
                    summary.fragile += 1;
                }
                elite.robust = Some(label);
                next = it.next();
            } else {
                next = Some((c, label));
            }
        }
    }
    Ok(summary)
}

/// Hold-out comparison of a random valid subset against a robust subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldoutConfig {
    pub per_set: usize,
    /// Fresh perturbations per elite.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        Self { per_set: 50, repeats: 16, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SetSurvival {
    pub cells: Vec<u64>,
    pub trials: usize,
    pub survived: usize,
}

impl SetSurvival {
    /// `None` for an empty set.
    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.survived as f64 / self.trials as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub random: SetSurvival,
    pub robust: SetSurvival,
}

/// Both subsets come from one shuffle of the valid elites: the random set is
/// its prefix, the robust set the first robust-labelled elites in the same
/// order. Each set is still a uniform draw; shared elites see the same
/// perturbations, so the comparison only reflects the elites that differ.
pub fn holdout_survival(
    archive: &Archive,
    scenario: &Scenario,
    cfg: &DrConfig,
    holdout: &HoldoutConfig,
) -> Result<HoldoutReport, RobustnessError> {
    use rand::seq::SliceRandom;
    cfg.validate()?;
    if holdout.repeats == 0 || holdout.per_set == 0 {
        return Err(RobustnessError::InvalidConfig("per_set and repeats must be positive".into()));
    }
    let mut valid: Vec<(u64, Pose<f64>, bool)> = archive
        .elites()
        .filter(|(_, e)| e.valid)
        .map(|(c, e)| (c, e.feature, e.robust.as_ref().is_some_and(|l| l.robust)))
        .collect();
    if valid.is_empty() {
        return Err(RobustnessError::NonEmptyRequired);
    }
    valid.shuffle(&mut ChaCha8Rng::seed_from_u64(holdout.seed));
    let random: Vec<usize> = (0..valid.len().min(holdout.per_set)).collect();
    let robust: Vec<usize> = (0..valid.len()).filter(|&i| valid[i].2).take(holdout.per_set).collect();
    let mut union: Vec<usize> = random.iter().chain(&robust).copied().collect();
    union.sort_unstable();
    union.dedup();
    let spec = archive.spec;
    let survived: Vec<usize> = union
        .par_iter()
        .map(|&i| {
            let (cell, feature, _) = valid[i];
            (0..holdout.repeats as u64)
                .filter(|k| resettles_to_cell(&feature, cell, scenario, &spec, cfg, holdout.seed.wrapping_add(k + 1)))
                .count()
        })
        .collect();
    let count = |set: &[usize]| SetSurvival {
        cells: set.iter().map(|&i| valid[i].0).collect(),
        trials: set.len() * holdout.repeats,
        survived: set.iter().map(|i| survived[union.binary_search(i).expect("in union")]).sum(),
    };
    Ok(HoldoutReport { random: count(&random), robust: count(&robust) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::tests::flat_scenario;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn zero_magnitude_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = DrConfig { translation_fraction: 0.0, rotation: 0.0, ..DrConfig::default() };
        let pose = Pose::new(Vector3::new(0.1, 0.2, 0.3), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        for _ in 0..20 {
            let p = perturb_pose(&pose, &cfg, 1.0, &mut rng);
            assert_eq!(p.position, pose.position);
            assert!(geodesic_angle(&p.orientation, &pose.orientation) < 1e-15);
        }
    }

    #[test]
    fn translation_keeps_orientation_bitwise() {
        let pose = Pose::new(Vector3::new(0.1, 0.2, 0.3), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        for axis in 0..3 {
            let p = apply_perturbation(&pose, Perturbation { axis, sign: -1.0 }, 0.01, 0.1);
            assert_eq!(p.orientation, pose.orientation);
            assert!(((p.position - pose.position).norm() - 0.01).abs() < 1e-15);
        }
        for axis in 3..6 {
            let p = apply_perturbation(&pose, Perturbation { axis, sign: 1.0 }, 0.01, 0.1);
            assert_eq!(p.position, pose.position);
            assert!((geodesic_angle(&p.orientation, &pose.orientation) - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn axes_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000u64;
        let mut counts = [0u64; 6];
        for _ in 0..n {
            counts[draw_perturbation(&mut rng).axis] += 1;
        }
        let b = Binomial::new(1.0 / 6.0, n).unwrap();
        for c in counts {
            assert!(b.cdf(c) > 1e-4 && b.sf(c) > 1e-4, "{counts:?}");
        }
    }

    #[test]
    fn trial_streams_do_not_depend_on_trial_count() {
        let a: Vec<u64> = (0..3).map(|m| trial_rng(7, 11, m).gen()).collect();
        let b: Vec<u64> = (0..5).map(|m| trial_rng(7, 11, m).gen()).collect();
        assert_eq!(a[..], b[..3]);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn face_down_cube_is_robust_and_edge_balance_is_not() {
        let sc = flat_scenario();
        let cfg = DrConfig::default();
        let rest = Pose::from_translation(Vector3::new(0.0, 0.0, 0.025));
        let label = dr_filter(&rest, 1, &sc, &cfg);
        assert!(label.robust, "{label:?}");
        let h = 0.025 * 2f64.sqrt();
        let edge = Pose::new(
            Vector3::new(0.0, 0.0, h),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_4),
        );
        let label = dr_filter(&edge, 2, &sc, &cfg);
        assert!(!label.robust, "{label:?}");
        assert!(label.worst > 10.0 * cfg.sigma_dr);
        assert_eq!(label.trial_variances.len(), cfg.trials);
    }

    #[test]
    fn vacuous_threshold_accepts_everything() {
        let sc = flat_scenario();
        let cfg = DrConfig { trials: 1, sigma_dr: 1e9, ..DrConfig::default() };
        let edge = Pose::new(
            Vector3::new(0.0, 0.0, 0.0354),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_4),
        );
        assert!(dr_filter(&edge, 0, &sc, &cfg).robust);
    }

    #[test]
    fn holdout_sets_share_one_shuffle() {
        use crate::qd::{run_me_rand, QdParams};
        use crate::space::SpaceKind;
        let sc = flat_scenario();
        let params = QdParams { mu: 20, lambda: 20, budget: 60, ..QdParams::default() };
        let mut out = run_me_rand(&sc, SpaceKind::Naive, &params, 3).unwrap();
        let cfg = DrConfig { trials: 2, ..DrConfig::default() };
        label_archive(&mut out.archive, &sc, &cfg).unwrap();
        let hc = HoldoutConfig { per_set: 6, repeats: 2, seed: 1 };
        let r = holdout_survival(&out.archive, &sc, &cfg, &hc).unwrap();
        let valid = out.archive.elites().filter(|(_, e)| e.valid).count();
        assert_eq!(r.random.cells.len(), valid.min(6));
        assert_eq!(r.random.trials, 2 * r.random.cells.len());
        for c in &r.robust.cells {
            assert!(out.archive.get(*c).unwrap().robust.as_ref().unwrap().robust);
        }
        // robust members of the random prefix lead the robust set in the same order
        let lead: Vec<u64> =
            r.random.cells.iter().copied().filter(|c| out.archive.get(*c).unwrap().robust.as_ref().unwrap().robust).collect();
        assert_eq!(&r.robust.cells[..lead.len()], &lead[..]);
        assert!(r.random.rate().unwrap() <= 1.0);
        assert_eq!(holdout_survival(&out.archive, &sc, &cfg, &hc).unwrap(), r);
    }
}
