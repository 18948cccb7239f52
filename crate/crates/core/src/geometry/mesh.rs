use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};

use super::GeometryError;
use crate::scalar::Real;

/// Triangles with area below this (m²) are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T: Real> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point3<T>>) -> Option<Self> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut min = first;
        let mut max = first;
        for p in it {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Self { min, max })
    }

    pub fn extents(&self) -> Vector3<T> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> T {
        self.extents().norm()
    }

    pub fn center(&self) -> Point3<T> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn inflated(&self, margin: T) -> Self {
        let m = Vector3::repeat(margin);
        Self { min: self.min - m, max: self.max + m }
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// Closed or open triangle mesh with uniform-density mass properties.
#[derive(Clone, Debug)]
pub struct TriMesh<T: Real> {
    pub vertices: Vec<Point3<T>>,
    pub triangles: Vec<[u32; 3]>,
    pub areas: Vec<T>,
    pub normals: Vec<Vector3<T>>,
    pub total_area: T,
    pub aabb: Aabb<T>,
    pub density: T,
    pub mass: T,
    pub center_of_mass: Point3<T>,
    /// Inertia tensor about the center of mass, in the mesh frame.
    pub inertia: Matrix3<T>,
    /// Every undirected edge is shared by exactly two triangles.
    pub watertight: bool,
    /// Count of zero-area triangles removed at construction.
    pub degenerate_dropped: usize,
}

impl<T: Real> TriMesh<T> {
    /// Builds a mesh, dropping degenerate triangles and computing mass
    /// properties for the given density (kg/m³).
    ///
    /// Closed meshes wound inward (negative signed volume) are flipped.
    pub fn new(
        vertices: Vec<Point3<T>>,
        triangles: Vec<[u32; 3]>,
        density: T,
    ) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if let Some(bad) = triangles.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(GeometryError::Parse(format!("triangle index {bad} out of range ({n} vertices)")));
        }
        let degenerate = T::lit(DEGENERATE_AREA);
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0usize;
        for t in triangles {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            if (b - a).cross(&(c - a)).norm() * T::lit(0.5) < degenerate {
                dropped += 1;
            } else {
                kept.push(t);
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangle(s)");
        }
        if kept.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let mut mesh = Self::assemble(vertices, kept, density, dropped);
        if mesh.watertight && mesh.signed_volume() < T::zero() {
            let flipped = mesh.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect();
            mesh = Self::assemble(mesh.vertices, flipped, density, dropped);
        }
        Ok(mesh)
    }

    fn assemble(vertices: Vec<Point3<T>>, triangles: Vec<[u32; 3]>, density: T, dropped: usize) -> Self {
        let half = T::lit(0.5);
        let mut areas = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let cr = (b - a).cross(&(c - a));
            let len = cr.norm();
            areas.push(len * half);
            normals.push(cr / len);
        }
        let total_area = areas.iter().fold(T::zero(), |s, &a| s + a);
        let aabb = Aabb::from_points(&vertices).expect("non-empty vertex list");
        let watertight = is_watertight(&triangles);
        let (mass, com, inertia) = mass_properties(&vertices, &triangles, density);
        Self {
            vertices,
            triangles,
            areas,
            normals,
            total_area,
            aabb,
            density,
            mass,
            center_of_mass: com,
            inertia,
            watertight,
            degenerate_dropped: dropped,
        }
    }

    pub fn triangle(&self, i: usize) -> [Point3<T>; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    pub fn centroid(&self, i: usize) -> Point3<T> {
        let [a, b, c] = self.triangle(i);
        Point3::from((a.coords + b.coords + c.coords) / T::lit(3.0))
    }

    pub fn signed_volume(&self) -> T {
        let sixth = T::lit(1.0 / 6.0);
        self.triangles.iter().fold(T::zero(), |s, t| {
            let [a, b, c] = t.map(|i| self.vertices[i as usize].coords);
            s + a.dot(&b.cross(&c)) * sixth
        })
    }

    /// Applies a uniform scale about the origin; mass properties are recomputed.
    pub fn scaled(&self, scale: T) -> Result<Self, GeometryError> {
        let verts = self.vertices.iter().map(|v| Point3::from(v.coords * scale)).collect();
        Self::new(verts, self.triangles.clone(), self.density)
    }

    /// Rigidly transforms every vertex; mass properties are recomputed.
    pub fn transformed(&self, pose: &super::Pose<T>) -> Self {
        let verts = self.vertices.iter().map(|v| pose.apply(v)).collect();
        Self::assemble(verts, self.triangles.clone(), self.density, self.degenerate_dropped)
    }
}

fn is_watertight(triangles: &[[u32; 3]]) -> bool {
    let mut edges: HashMap<(u32, u32), u32> = HashMap::with_capacity(triangles.len() * 3);
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    !edges.is_empty() && edges.values().all(|&c| c == 2)
}

/// Mass, center of mass and inertia (about the COM) of the solid bounded by a
/// closed, outward-wound triangle surface, via signed tetrahedra to the origin.
fn mass_properties<T: Real>(
    vertices: &[Point3<T>],
    triangles: &[[u32; 3]],
    density: T,
) -> (T, Point3<T>, Matrix3<T>) {
    let canonical = Matrix3::new(
        T::lit(2.0), T::one(), T::one(),
        T::one(), T::lit(2.0), T::one(),
        T::one(), T::one(), T::lit(2.0),
    ) / T::lit(120.0);
    let mut volume = T::zero();
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for t in triangles {
        let [a, b, c] = t.map(|i| vertices[i as usize].coords);
        let basis = Matrix3::from_columns(&[a, b, c]);
        let det = basis.determinant();
        volume += det / T::lit(6.0);
        first += (a + b + c) * (det / T::lit(24.0));
        second += basis * canonical * basis.transpose() * det;
    }
    let abs_vol = volume.abs();
    if abs_vol <= T::default_epsilon() {
        let aabb = Aabb::from_points(vertices).expect("non-empty");
        return (T::zero(), aabb.center(), Matrix3::zeros());
    }
    let com = first / volume;
    let mass = density * abs_vol;
    // second moment about the COM; the sign of `volume` cancels for inverted winding
    let covariance = (second - com * com.transpose() * volume) * (density / volume.signum());
    let inertia = Matrix3::identity() * covariance.trace() - covariance;
    (mass, Point3::from(com), inertia)
}
