//! One time step: a linearly implicit penalty-contact update.
//!
//! The end-of-step twist `ξ = (v, ω)` minimizes a convex incremental
//! potential built from the contacts gathered at the start of the step:
//!
//! ```text
//! Φ(ξ) = ½ (ξ − ξ*)ᵀ M (ξ − ξ*)
//!      + Σ ½ k · max(0, d − h·Jξ)²                 penalty at the predicted depth
//!      + h · Σ_{d>0} ½ c · min(0, Jξ)²             normal damping, approach only
//!      + h · Σ μ λ · huber(|Gξ|, ε)                Coulomb friction, regularized
//! ```
//!
//! with `J = [n, r × n]`, `G` the tangential point-velocity map, `λ = k·max(0, d)`
//! lagged from the start of the step and `ξ* = ξ₀ + h·g`. Newton with a
//! backtracking line search finds the minimizer; the pose is then advanced
//! with the new twist and the velocities damped.

use nalgebra::{Matrix3, Matrix6, SMatrix, UnitQuaternion, Vector3, Vector6};

use super::{RigidBodyState, SimBody, SimConfig, SimError};
use crate::geometry::SdfGrid;
use crate::scalar::Real;

type Matrix3x6<T> = SMatrix<T, 3, 6>;

#[derive(Clone, Copy, Debug)]
struct Contact<T: Real> {
    /// Penetration depth (positive inside the support).
    depth: T,
    /// `[n, r × n]`.
    jac: Vector6<T>,
    /// Maps the twist to the tangential velocity of the contact point.
    tangent: Matrix3x6<T>,
    /// Lagged normal force magnitude.
    normal_force: T,
}

/// Result of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport<T: Real> {
    pub next: RigidBodyState<T>,
    /// Contact flag of the input state: some proxy closer than the skin.
    pub in_contact: bool,
}

struct Constants<T: Real> {
    h: T,
    k: T,
    c: T,
    mu: T,
    eps_v: T,
    skin: T,
    gravity: Vector3<T>,
}

impl<T: Real> Constants<T> {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            h: T::lit(cfg.dt),
            k: T::lit(cfg.stiffness),
            c: T::lit(cfg.contact_damping),
            mu: T::lit(cfg.friction),
            eps_v: T::lit(cfg.friction_reg),
            skin: T::lit(cfg.skin),
            gravity: cfg.gravity_vec(),
        }
    }
}

fn skew<T: Real>(r: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(T::zero(), -r.z, r.y, r.z, T::zero(), -r.x, -r.y, r.x, T::zero())
}

/// Advances the body by one step against the static support.
pub fn step<T: Real>(
    state: &RigidBodyState<T>,
    body: &SimBody<T>,
    support: &SdfGrid<T>,
    cfg: &SimConfig,
) -> Result<StepReport<T>, SimError> {
    let k = Constants::new(cfg);
    let mut contacts = Vec::new();
    let in_contact = gather_contacts(state, body, support, &k, &mut contacts);
    let next = advance(state, body, &contacts, &k, cfg)?;
    Ok(StepReport { next, in_contact })
}

/// Collects contact candidates for the step and returns the contact flag.
fn gather_contacts<T: Real>(
    state: &RigidBodyState<T>,
    body: &SimBody<T>,
    support: &SdfGrid<T>,
    k: &Constants<T>,
    out: &mut Vec<Contact<T>>,
) -> bool {
    out.clear();
    let two = T::lit(2.0);
    let (v, w) = (state.linear, state.angular);
    let drift = k.h * k.gravity.norm();
    let reach = two * k.h * (v.norm() + w.norm() * body.radius + drift);
    let com = state.pose.position;
    let (com_dist, _) = support.query(&nalgebra::Point3::from(com));
    if com_dist - body.radius > k.skin + reach {
        return false;
    }
    let rot = state.pose.orientation.to_rotation_matrix();
    let mut flag = false;
    for local in &body.proxies {
        let r = rot * local;
        let x = nalgebra::Point3::from(com + r);
        let u = v + w.cross(&r);
        let lookahead = k.skin + two * k.h * (u.norm() + drift);
        let (s, grad) = support.query(&x);
        if s < k.skin {
            flag = true;
        }
        if s >= lookahead {
            continue;
        }
        let gn = grad.norm();
        if !(gn > T::zero()) {
            continue;
        }
        let n = grad / gn;
        let proj = Matrix3::identity() - n * n.transpose();
        let mut tangent = Matrix3x6::zeros();
        tangent.fixed_view_mut::<3, 3>(0, 0).copy_from(&proj);
        tangent.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-(proj * skew(&r))));
        let rn = r.cross(&n);
        let depth = -s;
        out.push(Contact {
            depth,
            jac: Vector6::new(n.x, n.y, n.z, rn.x, rn.y, rn.z),
            tangent,
            normal_force: k.k * depth.max(T::zero()),
        });
    }
    flag
}

fn huber<T: Real>(x: T, eps: T) -> T {
    if x < eps {
        x * x / (T::lit(2.0) * eps)
    } else {
        x - eps * T::lit(0.5)
    }
}

struct Problem<'a, T: Real> {
    mass: Matrix6<T>,
    target: Vector6<T>,
    contacts: &'a [Contact<T>],
    k: &'a Constants<T>,
}

impl<T: Real> Problem<'_, T> {
    fn objective(&self, xi: &Vector6<T>) -> T {
        let half = T::lit(0.5);
        let d = xi - self.target;
        let mut f = half * d.dot(&(self.mass * d));
        let k = self.k;
        for c in self.contacts {
            let jx = c.jac.dot(xi);
            let gap = c.depth - k.h * jx;
            if gap > T::zero() {
                f += half * k.k * gap * gap;
            }
            if c.depth > T::zero() && jx < T::zero() {
                f += k.h * half * k.c * jx * jx;
            }
            if c.normal_force > T::zero() {
                f += k.h * k.mu * c.normal_force * huber((c.tangent * xi).norm(), k.eps_v);
            }
        }
        f
    }

    fn gradient_hessian(&self, xi: &Vector6<T>) -> (Vector6<T>, Matrix6<T>) {
        let k = self.k;
        let mut g = self.mass * (xi - self.target);
        let mut hess = self.mass;
        for c in self.contacts {
            let jx = c.jac.dot(xi);
            let gap = c.depth - k.h * jx;
            let jjt = c.jac * c.jac.transpose();
            if gap > T::zero() {
                g -= c.jac * (k.k * gap * k.h);
                hess += jjt * (k.k * k.h * k.h);
            }
            if c.depth > T::zero() && jx < T::zero() {
                g += c.jac * (k.h * k.c * jx);
                hess += jjt * (k.h * k.c);
            }
            if c.normal_force > T::zero() {
                let scale = k.h * k.mu * c.normal_force;
                let w = c.tangent * xi;
                let wn = w.norm();
                let (dir, inner) = if wn < k.eps_v {
                    (w / k.eps_v, Matrix3::identity() / k.eps_v)
                } else {
                    let u = w / wn;
                    (u, (Matrix3::identity() - u * u.transpose()) / wn)
                };
                g += c.tangent.transpose() * dir * scale;
                hess += c.tangent.transpose() * inner * c.tangent * scale;
            }
        }
        (g, hess)
    }

    fn solve(&self, max_iter: usize) -> Vector6<T> {
        let mut xi = self.target;
        if self.contacts.is_empty() {
            return xi;
        }
        let eps = T::default_epsilon();
        let tol = T::lit(64.0) * eps;
        let mut f = self.objective(&xi);
        for _ in 0..max_iter {
            let (g, hess) = self.gradient_hessian(&xi);
            let Some(chol) = hess.cholesky() else { break };
            let dir = -chol.solve(&g);
            let slope = g.dot(&dir);
            if !(slope < T::zero()) {
                break;
            }
            let scale = xi.dot(&(self.mass * xi)).max(self.target.dot(&(self.mass * self.target)));
            let dir_norm = dir.dot(&(self.mass * dir));
            if dir_norm <= tol * tol * scale {
                xi += dir;
                break;
            }
            let mut alpha = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let trial = xi + dir * alpha;
                let ft = self.objective(&trial);
                if ft <= f + T::lit(1e-4) * alpha * slope {
                    xi = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                alpha *= T::lit(0.5);
            }
            if !accepted {
                break;
            }
        }
        xi
    }
}

fn advance<T: Real>(
    state: &RigidBodyState<T>,
    body: &SimBody<T>,
    contacts: &[Contact<T>],
    k: &Constants<T>,
    cfg: &SimConfig,
) -> Result<RigidBodyState<T>, SimError> {
    let rot = state.pose.orientation.to_rotation_matrix();
    let inertia_world = rot.matrix() * body.inertia * rot.matrix().transpose();
    let mut mass = Matrix6::zeros();
    mass.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * body.mass));
    mass.fixed_view_mut::<3, 3>(3, 3).copy_from(&inertia_world);
    let v_target = state.linear + k.gravity * k.h;
    let target = Vector6::new(v_target.x, v_target.y, v_target.z, state.angular.x, state.angular.y, state.angular.z);
    let xi = Problem { mass, target, contacts, k }.solve(cfg.newton_iterations);

    let v = Vector3::new(xi[0], xi[1], xi[2]);
    let w = Vector3::new(xi[3], xi[4], xi[5]);
    let mut pose = state.pose;
    pose.position += v * k.h;
    pose.orientation = UnitQuaternion::from_scaled_axis(w * k.h) * pose.orientation;
    let next = RigidBodyState {
        pose: pose.renormalized(),
        linear: v * T::lit(cfg.linear_damping),
        angular: w * T::lit(cfg.angular_damping),
    };
    let limit = T::lit(cfg.blowup_limit);
    if !next.is_finite() || next.max_abs() > limit {
        return Err(SimError::NumericalBlowup { limit: cfg.blowup_limit });
    }
    Ok(next)
}

/// Step variant reusing a contact buffer; used by the rollout loop.
pub(crate) struct Stepper<'a, T: Real> {
    body: &'a SimBody<T>,
    support: &'a SdfGrid<T>,
    cfg: &'a SimConfig,
    k: Constants<T>,
    contacts: Vec<Contact<T>>,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub(crate) fn new(body: &'a SimBody<T>, support: &'a SdfGrid<T>, cfg: &'a SimConfig) -> Self {
        Self { body, support, cfg, k: Constants::new(cfg), contacts: Vec::new() }
    }

    /// Contact flag of `state` without stepping.
    pub(crate) fn contact_flag(&mut self, state: &RigidBodyState<T>) -> bool {
        gather_contacts(state, self.body, self.support, &self.k, &mut self.contacts)
    }

    pub(crate) fn step(&mut self, state: &RigidBodyState<T>) -> Result<StepReport<T>, SimError> {
        let in_contact = gather_contacts(state, self.body, self.support, &self.k, &mut self.contacts);
        let next = advance(state, self.body, &self.contacts, &self.k, self.cfg)?;
        Ok(StepReport { next, in_contact })
    }

    /// Ballistic step with no contact queries.
    pub(crate) fn free_step(&self, state: &RigidBodyState<T>) -> Result<RigidBodyState<T>, SimError> {
        advance(state, self.body, &[], &self.k, self.cfg)
    }
}
