use nalgebra::{Matrix3, Point3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Rigid transform in SE(3): a translation and a unit quaternion.
///
/// `apply` maps a point expressed in the body frame into the parent frame:
/// `x_parent = orientation * x_body + position`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<T: Real> {
    pub position: Vector3<T>,
    pub orientation: UnitQuaternion<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn new(position: Vector3<T>, orientation: UnitQuaternion<T>) -> Self {
        Self { position, orientation }
    }

    pub fn identity() -> Self {
        Self { position: Vector3::zeros(), orientation: UnitQuaternion::identity() }
    }

    pub fn from_translation(position: Vector3<T>) -> Self {
        Self { position, orientation: UnitQuaternion::identity() }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose {
            position: self.orientation * other.position + self.position,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose<T> {
        let inv = self.orientation.inverse();
        Pose { position: -(inv * self.position), orientation: inv }
    }

    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.orientation * p.coords + self.position)
    }

    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.orientation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<T> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    /// Intrinsic X-Y-Z Euler angles `(roll, pitch, yaw)`: `R = Rx(roll)·Ry(pitch)·Rz(yaw)`.
    pub fn euler_xyz(&self) -> [T; 3] {
        euler_xyz_from_quaternion(&self.orientation)
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        let q = self.orientation.quaternion();
        Pose {
            position: self.position.map(|c| U::lit(c.to_f64_lossy())),
            orientation: UnitQuaternion::new_normalize(Quaternion::new(
                U::lit(q.w.to_f64_lossy()),
                U::lit(q.i.to_f64_lossy()),
                U::lit(q.j.to_f64_lossy()),
                U::lit(q.k.to_f64_lossy()),
            )),
        }
    }

    /// Renormalizes the quaternion; used after integration steps.
    pub fn renormalized(mut self) -> Self {
        self.orientation.renormalize();
        self
    }
}

/// Builds `Rx(roll)·Ry(pitch)·Rz(yaw)`.
pub fn quaternion_from_euler_xyz<T: Real>(roll: T, pitch: T, yaw: T) -> UnitQuaternion<T> {
    let qx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), roll);
    let qy = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch);
    let qz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
    qx * qy * qz
}

/// Inverse of [`quaternion_from_euler_xyz`]. Pitch is in `[-π/2, π/2]`; at the
/// gimbal singularity yaw is set to zero.
pub fn euler_xyz_from_quaternion<T: Real>(q: &UnitQuaternion<T>) -> [T; 3] {
    let r = q.to_rotation_matrix();
    let m = r.matrix();
    let one = T::one();
    let s = m[(0, 2)].clamp(-one, one);
    let pitch = s.asin();
    if s.abs() < one - T::lit(1e-12) {
        let roll = (-m[(1, 2)]).atan2(m[(2, 2)]);
        let yaw = (-m[(0, 1)]).atan2(m[(0, 0)]);
        [roll, pitch, yaw]
    } else {
        let roll = m[(2, 1)].atan2(m[(1, 1)]);
        [roll, pitch, T::zero()]
    }
}

/// Geodesic angle between two orientations, in `[0, π]`.
pub fn geodesic_angle<T: Real>(a: &UnitQuaternion<T>, b: &UnitQuaternion<T>) -> T {
    let d = a.inverse() * b;
    let q = d.quaternion();
    let two = T::lit(2.0);
    two * q.vector().norm().atan2(q.w.abs())
}

/// Sign-aligned chordal mean of a set of unit quaternions.
///
/// Every quaternion is flipped into the hemisphere of the first one before
/// the component-wise average is normalized.
pub fn chordal_mean<T: Real>(qs: &[UnitQuaternion<T>]) -> UnitQuaternion<T> {
    let Some(first) = qs.first() else {
        return UnitQuaternion::identity();
    };
    let reference = first.quaternion().coords;
    let mut acc = Vector3::<T>::zeros().push(T::zero());
    for q in qs {
        let c = q.quaternion().coords;
        if c.dot(&reference) < T::zero() {
            acc -= c;
        } else {
            acc += c;
        }
    }
    if acc.norm() <= T::default_epsilon() {
        return *first;
    }
    UnitQuaternion::new_normalize(Quaternion::from(acc))
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`, with a
/// deterministic choice of axis for antiparallel inputs.
pub fn rotation_between<T: Real>(from: &Vector3<T>, to: &Vector3<T>) -> UnitQuaternion<T> {
    if let Some(q) = UnitQuaternion::rotation_between(from, to) {
        return q;
    }
    // antiparallel: rotate by π about any axis orthogonal to `from`
    let helper = if from.x.abs() < T::lit(0.9) { Vector3::x() } else { Vector3::y() };
    let axis = Unit::new_normalize(from.cross(&helper));
    UnitQuaternion::from_axis_angle(&axis, T::pi())
}

/// Uniform random rotation (Shoemake's method) from three uniforms in `[0, 1)`.
pub fn uniform_quaternion<T: Real>(u1: T, u2: T, u3: T) -> UnitQuaternion<T> {
    let one = T::one();
    let two_pi = T::two_pi();
    let a = (one - u1).sqrt();
    let b = u1.sqrt();
    let q = Quaternion::new(
        b * (two_pi * u3).cos(),
        a * (two_pi * u2).sin(),
        a * (two_pi * u2).cos(),
        b * (two_pi * u3).sin(),
    );
    UnitQuaternion::new_normalize(q)
}

pub fn rotation_from_matrix<T: Real>(m: &Matrix3<T>) -> UnitQuaternion<T> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
}

/// Plain-array form of a pose used in files: `[px, py, pz, qw, qx, qy, qz]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoseRecord(pub [f64; 7]);

impl<T: Real> From<&Pose<T>> for PoseRecord {
    fn from(p: &Pose<T>) -> Self {
        let q = p.orientation.quaternion();
        PoseRecord([
            p.position.x.to_f64_lossy(),
            p.position.y.to_f64_lossy(),
            p.position.z.to_f64_lossy(),
            q.w.to_f64_lossy(),
            q.i.to_f64_lossy(),
            q.j.to_f64_lossy(),
            q.k.to_f64_lossy(),
        ])
    }
}

impl From<PoseRecord> for Pose<f64> {
    /// The quaternion is taken as stored (no renormalization) so that files
    /// round-trip bit for bit.
    fn from(r: PoseRecord) -> Self {
        let [px, py, pz, w, i, j, k] = r.0;
        Pose {
            position: Vector3::new(px, py, pz),
            orientation: UnitQuaternion::new_unchecked(Quaternion::new(w, i, j, k)),
        }
    }
}

impl Serialize for Pose<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        PoseRecord::deserialize(d).map(Pose::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn arb_pose() -> impl Strategy<Value = Pose<f64>> {
        (
            prop::array::uniform3(-5.0..5.0f64),
            prop::array::uniform3(0.0..1.0f64),
        )
            .prop_map(|(p, u)| {
                Pose::new(Vector3::from(p), uniform_quaternion(u[0], u[1], u[2]))
            })
    }

    proptest! {
        #[test]
        fn apply_then_inverse_is_identity(pose in arb_pose(), p in prop::array::uniform3(-3.0..3.0f64)) {
            let p = Point3::from(p);
            let back = pose.inverse().apply(&pose.apply(&p));
            prop_assert!((back - p).norm() < 1e-9);
            let id = pose.compose(&pose.inverse());
            prop_assert!(id.position.norm() < 1e-9);
            prop_assert!(id.orientation.angle() < 1e-9);
            prop_assert!((pose.orientation.quaternion().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.position - r.position).norm() < 1e-9);
            prop_assert!(geodesic_angle(&l.orientation, &r.orientation) < 1e-9);
        }

        #[test]
        fn euler_round_trip(r in -3.1..3.1f64, p in -1.5..1.5f64, y in -3.1..3.1f64) {
            let q = quaternion_from_euler_xyz(r, p, y);
            let [r2, p2, y2] = euler_xyz_from_quaternion(&q);
            let q2 = quaternion_from_euler_xyz(r2, p2, y2);
            prop_assert!(geodesic_angle(&q, &q2) < 1e-9);
            prop_assert!((p - p2).abs() < 1e-9);
        }
    }

    #[test]
    fn euler_zero_is_identity() {
        let q = quaternion_from_euler_xyz(0.0, 0.0, 0.0);
        assert_eq!(euler_xyz_from_quaternion(&q), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn roll_pi_about_x() {
        let q = quaternion_from_euler_xyz(PI, 0.0, 0.0);
        let v = q * Vector3::z();
        assert!((v - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn chordal_mean_of_symmetric_pair_is_identity() {
        let a = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.1f64);
        let b = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -0.1);
        // include a sign-flipped copy: the mean must not care
        let b_neg = UnitQuaternion::new_unchecked(-b.into_inner());
        let m = chordal_mean(&[a, b_neg]);
        assert!(m.angle() < 1e-15);
        assert!((geodesic_angle(&a, &m) - 0.1).abs() < 1e-14);
    }

    #[test]
    fn antiparallel_rotation_between() {
        let q = rotation_between(&Vector3::<f64>::z(), &(-Vector3::z()));
        assert!((q * Vector3::z() + Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn pose_record_round_trip_is_bitwise() {
        let pose = Pose::<f64>::new(
            Vector3::new(0.1, -0.2, 1.0 / 3.0),
            uniform_quaternion(0.3, 0.7, 0.11),
        );
        let json = serde_json::to_string(&pose).unwrap();
        let back: Pose<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(PoseRecord::from(&pose).0.map(f64::to_bits), PoseRecord::from(&back).0.map(f64::to_bits));
    }
}
