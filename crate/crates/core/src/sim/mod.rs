//! Rigid-body settling: drop an object on a static support under gravity,
//! record the trajectory and decide whether it came to rest.

mod body;
mod settle;
mod step;
mod variance;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::scalar::Real;

pub use body::SimBody;
pub use settle::{
    evaluate, mechanical_energy, rollout, settle, static_residual, write_trajectory_csv, Diagnostics,
    RejectReason, SettleOutcome, Trajectory,
};
pub use step::{step, StepReport};
pub use variance::pose_variance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state component exceeded {limit:e}")]
    NumericalBlowup { limit: f64 },
    #[error("variance window needs at least 2 poses, got {0}")]
    WindowTooShort(usize),
    #[error("characteristic length must be positive")]
    NonPositiveLength,
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}

/// Simulator constants. All values are SI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    /// Total steps `T`; a rollout records `T + 1` states.
    pub steps: usize,
    /// Validation window length; the window covers steps `T - window ..= T`.
    pub window: usize,
    pub gravity: [f64; 3],
    /// Penalty stiffness per contact point (N/m).
    pub stiffness: f64,
    /// Normal damping per contact point (N·s/m), resisting approach only.
    pub contact_damping: f64,
    pub friction: f64,
    /// Per-step multiplicative velocity damping.
    pub linear_damping: f64,
    pub angular_damping: f64,
    /// Rest test on linear (m/s) and angular (rad/s) speed.
    pub v_eps: f64,
    /// Pose-variance stability threshold.
    pub sigma_st: f64,
    /// Contact flag distance (m).
    pub skin: f64,
    /// Initial penetration (m) beyond which a start pose is discarded.
    pub penetration_tol: f64,
    /// Tangential speed (m/s) below which friction is viscous.
    pub friction_reg: f64,
    /// Consecutive quiet in-contact steps before the body is frozen; 0 disables.
    pub sleep_steps: usize,
    pub sleep_linear: f64,
    pub sleep_angular: f64,
    pub blowup_limit: f64,
    pub newton_iterations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            steps: 720,
            window: 120,
            gravity: [0.0, 0.0, -9.81],
            stiffness: 1e4,
            contact_damping: 50.0,
            friction: 0.5,
            linear_damping: 0.999,
            angular_damping: 0.999,
            v_eps: 1e-2,
            sigma_st: 1e-6,
            skin: 1e-3,
            penetration_tol: 1e-3,
            friction_reg: 1e-4,
            sleep_steps: 48,
            sleep_linear: 1e-3,
            sleep_angular: 1e-2,
            blowup_limit: 1e6,
            newton_iterations: 30,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.window == 0 || self.window > self.steps {
            return bad("window must satisfy 0 < window <= steps");
        }
        if !(self.sigma_st > 0.0) {
            return bad("sigma_st must be positive");
        }
        if !(self.stiffness > 0.0) {
            return bad("stiffness must be positive");
        }
        if self.contact_damping < 0.0 || self.friction < 0.0 || !(self.friction_reg > 0.0) {
            return bad("damping, friction and friction_reg must be non-negative (friction_reg positive)");
        }
        if !(0.0..=1.0).contains(&self.linear_damping) || !(0.0..=1.0).contains(&self.angular_damping) {
            return bad("velocity damping factors must lie in [0, 1]");
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return bad("gravity must be finite");
        }
        Ok(())
    }

    pub fn gravity_vec<T: Real>(&self) -> Vector3<T> {
        Vector3::new(T::lit(self.gravity[0]), T::lit(self.gravity[1]), T::lit(self.gravity[2]))
    }
}

/// Pose and velocities of the object; velocities are in the support frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState<T: Real> {
    pub pose: Pose<T>,
    pub linear: Vector3<T>,
    pub angular: Vector3<T>,
}

impl<T: Real> RigidBodyState<T> {
    pub fn at_rest(pose: Pose<T>) -> Self {
        Self { pose, linear: Vector3::zeros(), angular: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        let q = self.pose.orientation.quaternion();
        self.pose.position.iter().chain(self.linear.iter()).chain(self.angular.iter()).all(|c| c.is_finite())
            && q.coords.iter().all(|c| c.is_finite())
    }

    pub(crate) fn max_abs(&self) -> T {
        self.pose.position.iter().chain(self.linear.iter()).chain(self.angular.iter()).fold(T::zero(), |m, c| m.max(c.abs()))
    }
}
