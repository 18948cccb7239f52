use nalgebra::{Matrix3, Point3, Vector3};

use crate::geometry::{GeometryError, SurfaceSamples, TriMesh};
use crate::scalar::Real;

/// Rigid object as seen by the simulator: contact proxy points and inertia,
/// all expressed in a body frame centred on the center of mass.
#[derive(Clone, Debug)]
pub struct SimBody<T: Real> {
    pub proxies: Vec<Vector3<T>>,
    pub mass: T,
    pub inertia: Matrix3<T>,
    /// Largest proxy distance from the center of mass.
    pub radius: T,
    /// Length scale for the position term of the pose variance.
    pub char_length: T,
}

impl<T: Real> SimBody<T> {
    /// Proxies are the unique mesh vertices followed by the surface samples.
    ///
    /// The mesh frame need not be centred; proxies are shifted by the COM.
    pub fn from_mesh(mesh: &TriMesh<T>, samples: &SurfaceSamples<T>) -> Result<Self, GeometryError> {
        if !(mesh.mass > T::zero()) {
            return Err(GeometryError::DegenerateGeometry("object has no enclosed volume".into()));
        }
        let mut points: Vec<Point3<T>> = Vec::with_capacity(mesh.vertices.len() + samples.points.len());
        let mut seen = std::collections::HashSet::new();
        for v in &mesh.vertices {
            let key = v.coords.map(|c| c.to_f64_lossy().to_bits());
            if seen.insert((key.x, key.y, key.z)) {
                points.push(*v);
            }
        }
        points.extend(samples.points.iter().copied());
        Ok(Self::from_proxies(
            points.iter().map(|p| p - mesh.center_of_mass).collect(),
            mesh.mass,
            mesh.inertia,
            mesh.aabb.diagonal(),
        ))
    }

    pub fn from_proxies(proxies: Vec<Vector3<T>>, mass: T, inertia: Matrix3<T>, char_length: T) -> Self {
        let radius = proxies.iter().fold(T::zero(), |m, p| m.max(p.norm()));
        Self { proxies, mass, inertia, radius, char_length }
    }

    /// Proxy points as body-frame points, for overlap tests.
    pub fn proxy_points(&self) -> Vec<Point3<T>> {
        self.proxies.iter().map(|v| Point3::from(*v)).collect()
    }
}
