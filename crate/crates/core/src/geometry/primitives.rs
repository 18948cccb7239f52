//! Procedural primitive meshes used by the bundled scenarios and the tests.
//!
//! All generators return closed, outward-wound meshes.

use nalgebra::{Point3, Vector3};

use super::{Pose, TriMesh};
use crate::scalar::Real;

struct Builder<T: Real> {
    vertices: Vec<Point3<T>>,
    triangles: Vec<[u32; 3]>,
}

impl<T: Real> Builder<T> {
    fn new() -> Self {
        Self { vertices: Vec::new(), triangles: Vec::new() }
    }

    fn vertex(&mut self, x: T, y: T, z: T) -> u32 {
        self.vertices.push(Point3::new(x, y, z));
        self.vertices.len() as u32 - 1
    }

    /// Counter-clockwise quad as seen from the outside.
    fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    fn build(self, density: T) -> TriMesh<T> {
        TriMesh::new(self.vertices, self.triangles, density).expect("primitive mesh is valid")
    }
}

/// Axis-aligned box centered at the origin.
pub fn box_mesh<T: Real>(extents: Vector3<T>, density: T) -> TriMesh<T> {
    let h = extents * T::lit(0.5);
    let mut b = Builder::new();
    let mut v = [0u32; 8];
    for (i, slot) in v.iter_mut().enumerate() {
        let sx = if i & 1 == 0 { -h.x } else { h.x };
        let sy = if i & 2 == 0 { -h.y } else { h.y };
        let sz = if i & 4 == 0 { -h.z } else { h.z };
        *slot = b.vertex(sx, sy, sz);
    }
    b.quad(v[0], v[2], v[3], v[1]); // -z
    b.quad(v[4], v[5], v[7], v[6]); // +z
    b.quad(v[0], v[1], v[5], v[4]); // -y
    b.quad(v[2], v[6], v[7], v[3]); // +y
    b.quad(v[0], v[4], v[6], v[2]); // -x
    b.quad(v[1], v[3], v[7], v[5]); // +x
    b.build(density)
}

/// Surface of revolution about +z.
///
/// `profile` lists `(r, z)` points walked with the solid on the left. Points
/// with `r == 0` collapse to a single pole vertex. When `closed` the last
/// point connects back to the first.
pub fn revolve<T: Real>(profile: &[(T, T)], segments: usize, closed: bool, density: T) -> TriMesh<T> {
    let mut b = Builder::new();
    let rings: Vec<Vec<u32>> = profile
        .iter()
        .map(|&(r, z)| {
            if r == T::zero() {
                let pole = b.vertex(T::zero(), T::zero(), z);
                vec![pole; segments]
            } else {
                (0..segments)
                    .map(|i| {
                        let th = T::two_pi() * T::lit(i as f64) / T::lit(segments as f64);
                        b.vertex(r * th.cos(), r * th.sin(), z)
                    })
                    .collect()
            }
        })
        .collect();
    let n = profile.len();
    let edges = if closed { n } else { n - 1 };
    for e in 0..edges {
        let (lo, hi) = (&rings[e], &rings[(e + 1) % n]);
        for i in 0..segments {
            let j = (i + 1) % segments;
            let (a, bb, c, d) = (lo[i], lo[j], hi[j], hi[i]);
            if a == bb {
                b.triangles.push([a, c, d]);
            } else if c == d {
                b.triangles.push([a, bb, c]);
            } else {
                b.quad(a, bb, c, d);
            }
        }
    }
    b.build(density)
}

/// Cylinder along z, centered at the origin.
pub fn cylinder<T: Real>(radius: T, height: T, segments: usize, density: T) -> TriMesh<T> {
    let h = height * T::lit(0.5);
    revolve(&[(T::zero(), -h), (radius, -h), (radius, h), (T::zero(), h)], segments, false, density)
}

/// Torus around z, centered at the origin.
pub fn torus<T: Real>(major: T, minor: T, segments: usize, tube_segments: usize, density: T) -> TriMesh<T> {
    let profile: Vec<(T, T)> = (0..tube_segments)
        .map(|i| {
            let a = T::two_pi() * T::lit(i as f64) / T::lit(tube_segments as f64);
            (major + minor * a.cos(), minor * a.sin())
        })
        .collect();
    revolve(&profile, segments, true, density)
}

/// Open-top truncated-cone shell (a bowl) with its outer bottom at z = 0.
pub fn bowl<T: Real>(
    bottom_radius: T,
    top_radius: T,
    height: T,
    thickness: T,
    segments: usize,
    density: T,
) -> TriMesh<T> {
    let zero = T::zero();
    // horizontal offset of the inner wall keeps the wall thickness uniform
    let slope_len = ((top_radius - bottom_radius).powi(2) + height * height).sqrt();
    let dr = thickness * slope_len / height;
    let profile = [
        (zero, zero),
        (bottom_radius, zero),
        (top_radius, height),
        (top_radius - dr, height),
        (bottom_radius - dr + thickness * (top_radius - bottom_radius) / height, thickness),
        (zero, thickness),
    ];
    revolve(&profile, segments, false, density)
}

/// Unit-radius icosphere scaled to `radius`, after `subdivisions` rounds of
/// edge splitting.
pub fn icosphere<T: Real>(radius: T, subdivisions: usize, density: T) -> TriMesh<T> {
    use std::collections::HashMap;
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let vertices = verts
        .iter()
        .map(|v| Point3::new(T::lit(v.x), T::lit(v.y), T::lit(v.z)) * radius)
        .collect();
    TriMesh::new(vertices, tris, density).expect("icosphere is valid")
}

/// Square block (`width`² × `height`, bottom at z = 0) with a blind circular
/// hole of `hole_radius` and `hole_depth` drilled from the top along +z.
///
/// `segments` must be a multiple of 8 so that the square corners are sampled.
pub fn block_with_hole<T: Real>(
    width: T,
    height: T,
    hole_radius: T,
    hole_depth: T,
    segments: usize,
    density: T,
) -> TriMesh<T> {
    assert!(segments % 8 == 0, "segments must be a multiple of 8");
    let mut b = Builder::new();
    let half = width * T::lit(0.5);
    let hole_bottom = height - hole_depth;
    let mut outer_top = Vec::new();
    let mut outer_bot = Vec::new();
    let mut inner_top = Vec::new();
    let mut inner_bot = Vec::new();
    for i in 0..segments {
        let th = T::two_pi() * T::lit(i as f64) / T::lit(segments as f64);
        let (s, c) = th.sin_cos();
        let to_square = half / c.abs().max(s.abs());
        outer_top.push(b.vertex(c * to_square, s * to_square, height));
        outer_bot.push(b.vertex(c * to_square, s * to_square, T::zero()));
        inner_top.push(b.vertex(c * hole_radius, s * hole_radius, height));
        inner_bot.push(b.vertex(c * hole_radius, s * hole_radius, hole_bottom));
    }
    let bottom_center = b.vertex(T::zero(), T::zero(), T::zero());
    let hole_center = b.vertex(T::zero(), T::zero(), hole_bottom);
    for i in 0..segments {
        let j = (i + 1) % segments;
        b.quad(outer_top[i], outer_top[j], inner_top[j], inner_top[i]);
        b.quad(outer_bot[i], outer_bot[j], outer_top[j], outer_top[i]);
        b.quad(inner_top[i], inner_top[j], inner_bot[j], inner_bot[i]);
        b.triangles.push([bottom_center, outer_bot[j], outer_bot[i]]);
        b.triangles.push([hole_center, inner_bot[i], inner_bot[j]]);
    }
    b.build(density)
}

/// Concatenates meshes into one (components may overlap).
pub fn merge<T: Real>(parts: &[TriMesh<T>], density: T) -> TriMesh<T> {
    let mut b = Builder::new();
    for part in parts {
        let base = b.vertices.len() as u32;
        b.vertices.extend(part.vertices.iter().copied());
        b.triangles.extend(part.triangles.iter().map(|t| t.map(|i| i + base)));
    }
    b.build(density)
}

/// Table-top slab: `width` × `depth` × `thickness` with its top face at z = `top`.
pub fn slab<T: Real>(width: T, depth: T, thickness: T, top: T) -> TriMesh<T> {
    box_mesh(Vector3::new(width, depth, thickness), T::lit(1000.0)).transformed(&Pose::from_translation(
        Vector3::new(T::zero(), T::zero(), top - thickness * T::lit(0.5)),
    ))
}
