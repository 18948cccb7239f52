use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, TriMesh};
use crate::scalar::Real;

/// Points on a mesh surface with their outward normals and source triangles.
#[derive(Clone, Debug)]
pub struct SurfaceSamples<T: Real> {
    pub points: Vec<Point3<T>>,
    pub normals: Vec<Vector3<T>>,
    pub triangles: Vec<usize>,
}

/// Cumulative area distribution over the triangles of a mesh.
#[derive(Clone, Debug)]
pub struct AreaCdf {
    cumulative: Vec<f64>,
}

impl AreaCdf {
    pub fn new<T: Real>(mesh: &TriMesh<T>) -> Self {
        let total = mesh.total_area.to_f64_lossy();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = mesh
            .areas
            .iter()
            .map(|a| {
                acc += a.to_f64_lossy() / total;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { cumulative }
    }

    /// Triangle index for `u` in `[0, 1]`.
    pub fn pick(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}

/// Point on triangle `(a, b, c)` from two uniforms, folding the unit square
/// onto the triangle so the result is uniform over its area.
pub fn folded_barycentric<T: Real>(tri: &[Point3<T>; 3], u: T, v: T) -> Point3<T> {
    let (u, v) = if u + v > T::one() { (T::one() - u, T::one() - v) } else { (u, v) };
    let [a, b, c] = tri;
    a + (b - a) * u + (c - a) * v
}

/// Area-weighted uniform samples on the surface, deterministic in `seed`.
pub fn sample_surface<T: Real>(mesh: &TriMesh<T>, n: usize, seed: u64) -> Result<SurfaceSamples<T>, GeometryError> {
    if mesh.triangles.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let cdf = AreaCdf::new(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SurfaceSamples { points: Vec::with_capacity(n), normals: Vec::with_capacity(n), triangles: Vec::with_capacity(n) };
    for _ in 0..n {
        let t = cdf.pick(rng.gen::<f64>());
        let u = T::lit(rng.gen::<f64>());
        let v = T::lit(rng.gen::<f64>());
        out.points.push(folded_barycentric(&mesh.triangle(t), u, v));
        out.normals.push(mesh.normals[t]);
        out.triangles.push(t);
    }
    Ok(out)
}

/// Distance from `p` to the closest point of triangle `(a, b, c)`.
pub fn point_triangle_distance<T: Real>(p: &Point3<T>, tri: &[Point3<T>; 3]) -> T {
    (p - closest_point_on_triangle(p, tri)).norm()
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection §5.1.5).
pub fn closest_point_on_triangle<T: Real>(p: &Point3<T>, tri: &[Point3<T>; 3]) -> Point3<T> {
    let [a, b, c] = *tri;
    let zero = T::zero();
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= zero && d2 <= zero {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= zero && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= zero && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = T::one() / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

    fn unit_cube() -> TriMesh<f64> {
        primitives::box_mesh(Vector3::new(1.0f64, 1.0, 1.0), 1.0)
    }

    fn face_of(p: &Point3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::MAX;
        for k in 0..3 {
            for (s, side) in [(-0.5, 0), (0.5, 1)] {
                let d = (p[k] - s).abs();
                if d < best_d {
                    best_d = d;
                    best = 2 * k + side;
                }
            }
        }
        best
    }

    #[test]
    fn face_counts_within_five_sigma_binomial() {
        let s = sample_surface(&unit_cube(), 1000, 7).unwrap();
        let mut counts = [0usize; 6];
        for p in &s.points {
            counts[face_of(p)] += 1;
        }
        // binomial(1000, 1/6): mean 166.7, σ ≈ 11.8
        let sigma = (1000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0 / 6.0).abs() <= 5.0 * sigma, "{counts:?}");
        }
        // cross-check with the exact binomial tails
        let b = Binomial::new(1.0 / 6.0, 1000).unwrap();
        for c in counts {
            assert!(b.cdf(c as u64) > 1e-6 && b.sf(c as u64) > 1e-6);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = sample_surface(&unit_cube(), 50, 3).unwrap();
        let b = sample_surface(&unit_cube(), 50, 3).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn samples_lie_on_their_triangle() {
        let mesh = primitives::torus(0.1f64, 0.03, 24, 12, 1.0);
        let s = sample_surface(&mesh, 500, 1).unwrap();
        for (p, &t) in s.points.iter().zip(&s.triangles) {
            assert!(point_triangle_distance(p, &mesh.triangle(t)) < 1e-9);
        }
        let one = sample_surface(&mesh, 1, 9).unwrap();
        assert_eq!(one.points.len(), 1);
    }

    #[test]
    fn chi_square_density_matches_area_fraction() {
        let mesh = primitives::cylinder(0.1f64, 0.3, 8, 1.0);
        let n = 100_000;
        let s = sample_surface(&mesh, n, 11).unwrap();
        let mut counts = vec![0usize; mesh.triangles.len()];
        for &t in &s.triangles {
            counts[t] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(&mesh.areas)
            .map(|(&c, &a)| {
                let e = n as f64 * a / mesh.total_area;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let dof = (mesh.triangles.len() - 1) as f64;
        let p = ChiSquared::new(dof).unwrap().sf(stat);
        assert!(p > 0.01, "χ² = {stat}, p = {p}");
    }

    #[test]
    fn closest_point_regions() {
        let tri = [Point3::new(0.0f64, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!((point_triangle_distance(&Point3::new(0.2, 0.2, 0.5), &tri) - 0.5).abs() < 1e-12);
        assert!((point_triangle_distance(&Point3::new(-1.0, -1.0, 0.0), &tri) - 2f64.sqrt()).abs() < 1e-12);
        assert!((point_triangle_distance(&Point3::new(1.0, 1.0, 0.0), &tri) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((point_triangle_distance(&Point3::new(0.5, -1.0, 0.0), &tri) - 1.0).abs() < 1e-12);
    }
}
