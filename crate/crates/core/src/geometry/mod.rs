//! Meshes, rigid transforms, surface sampling, principal axes and signed
//! distance fields.

mod io;
mod mesh;
mod pca;
mod pose;
pub mod primitives;
mod sampling;
mod sdf;

use nalgebra::Point3;
use thiserror::Error;

pub use io::{load_mesh, parse_obj, parse_stl, write_obj, write_stl_binary};
pub use mesh::{Aabb, TriMesh, DEGENERATE_AREA};
pub use pca::{principal_axes, surface_covariance, PrincipalAxes};
pub use pose::{
    chordal_mean, euler_xyz_from_quaternion, geodesic_angle, quaternion_from_euler_xyz, rotation_between,
    rotation_from_matrix, uniform_quaternion, Pose, PoseRecord,
};
pub use sampling::{
    closest_point_on_triangle, folded_barycentric, point_triangle_distance, sample_surface, AreaCdf,
    SurfaceSamples,
};
pub use sdf::{build_sdf, winding_number, SdfGrid};

use crate::scalar::Real;

/// Default allowed penetration (m) before two bodies count as overlapping.
pub const DEFAULT_PENETRATION_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("mesh parse error: {0}")]
    Parse(String),
    #[error("mesh io error: {0}")]
    Io(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("sdf resolution too coarse: {cells:.2} cells along the smallest edge, need {required}")]
    ResolutionTooCoarse { cells: f64, required: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

/// True iff any of the object's surface `samples` (object frame), moved by
/// `pose`, is deeper than `penetration_tol` inside the support.
pub fn overlap<T: Real>(samples: &[Point3<T>], pose: &Pose<T>, support: &SdfGrid<T>, penetration_tol: T) -> bool {
    samples.iter().any(|p| support.value(&pose.apply(p)) < -penetration_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn table() -> SdfGrid<f64> {
        build_sdf(&primitives::slab(1.0, 1.0, 0.1, 0.0), 0.01, 0.05).unwrap()
    }

    #[test]
    fn overlap_cases() {
        let sdf = table();
        let cube = primitives::box_mesh(Vector3::new(0.1f64, 0.1, 0.1), 500.0);
        let samples = sample_surface(&cube, 200, 1).unwrap().points;
        let mut verts = samples.clone();
        verts.extend(cube.vertices.iter().copied());
        let tol = DEFAULT_PENETRATION_TOL;
        assert!(!overlap(&verts, &Pose::from_translation(Vector3::new(0.0, 0.0, 1.0)), &sdf, tol));
        assert!(overlap(&verts, &Pose::from_translation(Vector3::new(0.0, 0.0, -0.05)), &sdf, tol));
        // resting with half the tolerance of penetration
        let touching = Pose::from_translation(Vector3::new(0.0, 0.0, 0.05 - 0.5 * tol));
        assert!(!overlap(&verts, &touching, &sdf, tol));
    }
}
