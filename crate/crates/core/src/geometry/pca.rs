use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::TriMesh;
use crate::scalar::Real;

/// Relative spread of the covariance spectrum below which the mesh is
/// considered isotropic.
const ISOTROPY_TOL: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct PrincipalAxes<T: Real> {
    /// Columns are unit axes, ordered by descending variance; right-handed.
    pub axes: Matrix3<T>,
    pub variances: Vector3<T>,
    /// Covariance was rank-deficient or isotropic; `axes` are bounding-box axes.
    pub fallback: bool,
}

/// Area-weighted covariance of the surface, integrated exactly per triangle.
pub fn surface_covariance<T: Real>(mesh: &TriMesh<T>) -> (Vector3<T>, Matrix3<T>) {
    let third = T::lit(1.0 / 3.0);
    let twelfth = T::lit(1.0 / 12.0);
    let mut mean = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for (i, &area) in mesh.areas.iter().enumerate() {
        let [a, b, c] = mesh.triangle(i).map(|p| p.coords);
        let s = a + b + c;
        mean += s * (area * third);
        second += (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose()) * (area * twelfth);
    }
    mean /= mesh.total_area;
    let cov = second / mesh.total_area - mean * mean.transpose();
    (mean, cov)
}

/// Flips `v` so that its largest-magnitude component is positive.
fn canonical_sign<T: Real>(v: Vector3<T>) -> Vector3<T> {
    let k = v.iamax();
    if v[k] < T::zero() {
        -v
    } else {
        v
    }
}

/// PCA frame of the area-weighted surface point distribution.
///
/// Axes 1 and 2 follow the largest-positive-component sign rule; axis 3 is
/// their cross product so the frame is a proper rotation. Degenerate
/// (rank < 3 or isotropic) spectra fall back to the bounding-box axes ordered
/// by extent.
pub fn principal_axes<T: Real>(mesh: &TriMesh<T>) -> PrincipalAxes<T> {
    let (_, cov) = surface_covariance(mesh);
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals = Vector3::from_fn(|k, _| eig.eigenvalues[order[k]]);
    let (hi, lo) = (vals[0], vals[2]);
    let degenerate = hi <= T::zero()
        || lo <= hi * T::lit(1e-12)
        || (hi - lo) <= hi * T::lit(ISOTROPY_TOL);
    if degenerate {
        return PrincipalAxes { axes: bbox_axes(mesh), variances: vals, fallback: true };
    }
    let a1 = canonical_sign(eig.eigenvectors.column(order[0]).into_owned().normalize());
    let a2 = canonical_sign(eig.eigenvectors.column(order[1]).into_owned().normalize());
    let a3 = a1.cross(&a2).normalize();
    PrincipalAxes { axes: Matrix3::from_columns(&[a1, a2, a3]), variances: vals, fallback: false }
}

fn bbox_axes<T: Real>(mesh: &TriMesh<T>) -> Matrix3<T> {
    let ext = mesh.aabb.extents();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| ext[j].partial_cmp(&ext[i]).unwrap());
    let a1 = Vector3::ith(order[0], T::one());
    let a2 = Vector3::ith(order[1], T::one());
    Matrix3::from_columns(&[a1, a2, a1.cross(&a2)])
}
