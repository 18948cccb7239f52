use std::io::{self, Write};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::step::Stepper;
use super::{pose_variance, RigidBodyState, SimBody, SimConfig};
use crate::geometry::{overlap, Pose, SdfGrid};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Overlap,
    Moving,
    LostContact,
    Escaped,
    None,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Overlap => "overlap",
            RejectReason::Moving => "moving",
            RejectReason::LostContact => "lost_contact",
            RejectReason::Escaped => "escaped",
            RejectReason::None => "none",
        }
    }
}

/// Recorded rollout. A numerical blowup truncates it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    pub states: Vec<RigidBodyState<T>>,
    pub contact: Vec<bool>,
    pub blowup: bool,
    /// Step at which the body was frozen, if it fell asleep.
    pub asleep_at: Option<usize>,
    /// Steps that ran the contact solver.
    pub solved_steps: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose<T>> {
        self.states.iter().map(|s| s.pose).collect()
    }

    pub fn last_pose(&self) -> Pose<T> {
        self.states.last().expect("trajectory holds the initial state").pose
    }
}

/// Net penalty force and torque at a pose, balanced against gravity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub force_residual: f64,
    pub torque_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SettleOutcome<T: Real> {
    pub valid: bool,
    /// Pose variance over the validation window; infinite when no window exists.
    pub variance: T,
    /// Always exactly `-variance`.
    pub fitness: T,
    /// Final pose `X(T)`.
    pub feature: Pose<T>,
    pub reason: RejectReason,
    pub diagnostics: Diagnostics,
}

/// Rolls the body forward `steps` steps from `start`, without any overlap check.
///
/// A body whose center of mass has passed below the support while moving
/// along gravity is integrated ballistically. A body that stays slow and in
/// contact for `sleep_steps` consecutive steps is frozen for the remainder.
pub fn rollout<T: Real>(
    start: RigidBodyState<T>,
    body: &SimBody<T>,
    support: &SdfGrid<T>,
    cfg: &SimConfig,
    steps: usize,
) -> Trajectory<T> {
    let mut stepper = Stepper::new(body, support, cfg);
    let mut traj = Trajectory {
        states: Vec::with_capacity(steps + 1),
        contact: Vec::with_capacity(steps + 1),
        blowup: false,
        asleep_at: None,
        solved_steps: 0,
    };
    let gravity = cfg.gravity_vec::<T>();
    let down = (gravity.norm() > T::zero()).then(|| gravity.normalize());
    let support_low = down.map(|d| lowest_extent(support, &d));
    let sleep_lin = T::lit(cfg.sleep_linear);
    let sleep_ang = T::lit(cfg.sleep_angular);

    let mut state = start;
    let mut quiet = 0usize;
    let mut ballistic = false;
    traj.states.push(state);
    for t in 0..steps {
        if !ballistic {
            if let (Some(d), Some(low)) = (down, support_low) {
                ballistic = state.pose.position.dot(&d) - body.radius > low && state.linear.dot(&d) >= T::zero();
            }
        }
        let next = if ballistic {
            traj.contact.push(false);
            stepper.free_step(&state)
        } else {
            traj.solved_steps += 1;
            stepper.step(&state).map(|r| {
                traj.contact.push(r.in_contact);
                r.next
            })
        };
        match next {
            Ok(s) => state = s,
            Err(_) => {
                traj.blowup = true;
                return traj;
            }
        }
        traj.states.push(state);
        if cfg.sleep_steps == 0 || ballistic {
            continue;
        }
        // the contact flag of the new state is only known after the next
        // query, so quietness is judged on the previous state's flag
        let was_touching = *traj.contact.last().expect("pushed above");
        if was_touching && state.linear.norm() < sleep_lin && state.angular.norm() < sleep_ang {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= cfg.sleep_steps && t + 1 < steps {
            let frozen = RigidBodyState::at_rest(state.pose);
            let flag = stepper.contact_flag(&frozen);
            *traj.states.last_mut().expect("pushed above") = frozen;
            traj.asleep_at = Some(t + 1);
            traj.states.resize(steps + 1, frozen);
            traj.contact.resize(steps + 1, flag);
            return traj;
        }
    }
    let last = if ballistic { false } else { stepper.contact_flag(&state) };
    traj.contact.push(last);
    traj
}

/// Furthest extent of the support grid along the unit direction `d`.
fn lowest_extent<T: Real>(support: &SdfGrid<T>, d: &Vector3<T>) -> T {
    let lo = support.origin;
    let hi = support.max_corner();
    let mut best = T::min_value().unwrap();
    for i in 0..8 {
        let c = Vector3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        );
        best = best.max(c.dot(d));
    }
    best
}

/// Drops the object from rest at `initial` and judges the final window.
pub fn settle<T: Real>(
    initial: &Pose<T>,
    body: &SimBody<T>,
    support: &SdfGrid<T>,
    cfg: &SimConfig,
) -> (Trajectory<T>, SettleOutcome<T>) {
    let start = RigidBodyState::at_rest(*initial);
    if overlap(&body.proxy_points(), initial, support, T::lit(cfg.penetration_tol)) {
        let traj = Trajectory {
            states: vec![start],
            contact: vec![true],
            blowup: false,
            asleep_at: None,
            solved_steps: 0,
        };
        let outcome = SettleOutcome {
            valid: false,
            variance: T::lit(f64::INFINITY),
            fitness: -T::lit(f64::INFINITY),
            feature: *initial,
            reason: RejectReason::Overlap,
            diagnostics: Diagnostics::default(),
        };
        return (traj, outcome);
    }
    let traj = rollout(start, body, support, cfg, cfg.steps);
    let outcome = judge(&traj, body, support, cfg);
    (traj, outcome)
}

/// [`settle`] without returning the trajectory.
pub fn evaluate<T: Real>(initial: &Pose<T>, body: &SimBody<T>, support: &SdfGrid<T>, cfg: &SimConfig) -> SettleOutcome<T> {
    settle(initial, body, support, cfg).1
}

fn judge<T: Real>(traj: &Trajectory<T>, body: &SimBody<T>, support: &SdfGrid<T>, cfg: &SimConfig) -> SettleOutcome<T> {
    let feature = traj.last_pose();
    if traj.blowup {
        return SettleOutcome {
            valid: false,
            variance: T::lit(f64::INFINITY),
            fitness: -T::lit(f64::INFINITY),
            feature,
            reason: RejectReason::Escaped,
            diagnostics: Diagnostics::default(),
        };
    }
    let n = traj.states.len();
    let from = n - 1 - cfg.window;
    let window = &traj.states[from..];
    let poses: Vec<Pose<T>> = window.iter().map(|s| s.pose).collect();
    let variance = pose_variance(&poses, body.char_length).expect("window length >= 2 and positive length");
    let v_eps = T::lit(cfg.v_eps);
    let touching = traj.contact[from..].iter().all(|&c| c);
    let still = window.iter().all(|s| s.linear.norm() < v_eps && s.angular.norm() < v_eps);
    let stable = variance < T::lit(cfg.sigma_st);
    let reason = if !touching {
        RejectReason::LostContact
    } else if !still || !stable {
        RejectReason::Moving
    } else {
        RejectReason::None
    };
    let diagnostics = static_residual(&feature, body, support, cfg);
    SettleOutcome { valid: reason == RejectReason::None, variance, fitness: -variance, feature, reason, diagnostics }
}

/// Residual of the static force and torque balance (penalty normal forces
/// plus gravity) at `pose`. Friction is not included.
pub fn static_residual<T: Real>(pose: &Pose<T>, body: &SimBody<T>, support: &SdfGrid<T>, cfg: &SimConfig) -> Diagnostics {
    let k = T::lit(cfg.stiffness);
    let mut force = cfg.gravity_vec::<T>() * body.mass;
    let mut torque = Vector3::zeros();
    for local in &body.proxies {
        let r = pose.rotate(local);
        let (s, grad) = support.query(&Point3::from(pose.position + r));
        if s < T::zero() && grad.norm() > T::zero() {
            let f = grad.normalize() * (-s * k);
            force += f;
            torque += r.cross(&f);
        }
    }
    Diagnostics { force_residual: force.norm().to_f64_lossy(), torque_residual: torque.norm().to_f64_lossy() }
}

/// Kinetic plus gravitational plus penalty energy. Gravitational energy is
/// zero at the support-frame origin.
pub fn mechanical_energy<T: Real>(
    state: &RigidBodyState<T>,
    body: &SimBody<T>,
    support: &SdfGrid<T>,
    cfg: &SimConfig,
) -> T {
    let half = T::lit(0.5);
    let rot = state.pose.rotation_matrix();
    let inertia = rot * body.inertia * rot.transpose();
    let kinetic = half * body.mass * state.linear.norm_squared() + half * state.angular.dot(&(inertia * state.angular));
    let potential = -body.mass * cfg.gravity_vec::<T>().dot(&state.pose.position);
    let k = T::lit(cfg.stiffness);
    let elastic = body.proxies.iter().fold(T::zero(), |acc, local| {
        let s = support.value(&Point3::from(state.pose.position + state.pose.rotate(local)));
        let d = (-s).max(T::zero());
        acc + half * k * d * d
    });
    kinetic + potential + elastic
}

/// One CSV row per recorded step: `t,px,py,pz,qw,qx,qy,qz,contact`.
pub fn write_trajectory_csv<T: Real, W: Write>(traj: &Trajectory<T>, mut out: W) -> io::Result<()> {
    writeln!(out, "t,px,py,pz,qw,qx,qy,qz,contact")?;
    for (t, (s, c)) in traj.states.iter().zip(&traj.contact).enumerate() {
        let p = s.pose.position;
        let q = s.pose.orientation.quaternion();
        writeln!(out, "{t},{},{},{},{},{},{},{},{}", p.x, p.y, p.z, q.w, q.i, q.j, q.k, u8::from(*c))?;
    }
    Ok(())
}

