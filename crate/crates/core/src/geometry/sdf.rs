use nalgebra::{Point3, Vector3};

use super::sampling::point_triangle_distance;
use super::{GeometryError, TriMesh};
use crate::scalar::Real;

/// Minimum number of cells along the smallest bounding-box edge.
const MIN_CELLS: f64 = 4.0;
/// Nodes per brick edge for the build-time culling pass.
const BRICK: usize = 4;

/// Signed distance samples on a regular grid (negative inside), with
/// central-difference gradients stored alongside each node.
#[derive(Clone, Debug)]
pub struct SdfGrid<T: Real> {
    pub origin: Point3<T>,
    pub cell: T,
    pub dims: [usize; 3],
    /// `[value, ∂x, ∂y, ∂z]` per node, x fastest.
    data: Vec<[T; 4]>,
}

impl<T: Real> SdfGrid<T> {
    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node_value(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.idx(i, j, k)][0]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Point3<T> {
        self.origin + Vector3::new(T::lit(i as f64), T::lit(j as f64), T::lit(k as f64)) * self.cell
    }

    pub fn max_corner(&self) -> Point3<T> {
        self.node_position(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    /// Length of one cell diagonal: the interpolation error bound.
    pub fn cell_diagonal(&self) -> T {
        self.cell * T::lit(3f64.sqrt())
    }

    pub fn value(&self, p: &Point3<T>) -> T {
        self.query(p).0
    }

    /// Interpolated signed distance and gradient at `p`.
    ///
    /// Outside the grid the value at the clamped point is extended by the
    /// distance to the grid box, and the gradient points away from the box.
    pub fn query(&self, p: &Point3<T>) -> (T, Vector3<T>) {
        let zero = T::zero();
        let inv = T::one() / self.cell;
        let mut f = [zero; 3];
        let mut base = [0usize; 3];
        let mut outside = Vector3::zeros();
        for a in 0..3 {
            let n = self.dims[a];
            let x = (p[a] - self.origin[a]) * inv;
            let hi = T::lit((n - 1) as f64);
            let xc = x.clamp(zero, hi);
            outside[a] = (x - xc) * self.cell;
            let fl = xc.floor().min(T::lit((n - 2) as f64));
            base[a] = fl.to_f64_lossy() as usize;
            f[a] = xc - fl;
        }
        let mut acc = [zero; 4];
        for dk in 0..2 {
            let wk = if dk == 0 { T::one() - f[2] } else { f[2] };
            for dj in 0..2 {
                let wj = if dj == 0 { T::one() - f[1] } else { f[1] };
                for di in 0..2 {
                    let wi = if di == 0 { T::one() - f[0] } else { f[0] };
                    let w = wi * wj * wk;
                    let node = &self.data[self.idx(base[0] + di, base[1] + dj, base[2] + dk)];
                    for c in 0..4 {
                        acc[c] += w * node[c];
                    }
                }
            }
        }
        let out = outside.norm();
        if out > zero {
            (acc[0] + out, outside / out)
        } else {
            (acc[0], Vector3::new(acc[1], acc[2], acc[3]))
        }
    }
}

/// Generalized winding number of a closed surface about `p`.
pub fn winding_number<T: Real>(mesh: &TriMesh<T>, p: &Point3<T>) -> T {
    let mut total = T::zero();
    for t in 0..mesh.triangles.len() {
        total += solid_angle(&mesh.triangle(t), p);
    }
    total / (T::lit(4.0) * T::pi())
}

fn solid_angle<T: Real>(tri: &[Point3<T>; 3], p: &Point3<T>) -> T {
    let a = tri[0] - p;
    let b = tri[1] - p;
    let c = tri[2] - p;
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
    T::lit(2.0) * num.atan2(den)
}

/// Builds a signed distance grid covering the mesh bounding box plus
/// `padding`, with node spacing `resolution`.
///
/// Node values are exact distances to the triangle set; the sign comes from
/// the generalized winding number, so the mesh must be closed.
pub fn build_sdf<T: Real>(mesh: &TriMesh<T>, resolution: T, padding: T) -> Result<SdfGrid<T>, GeometryError> {
    if !mesh.watertight {
        return Err(GeometryError::NotWatertight);
    }
    let ext = mesh.aabb.extents();
    let smallest = ext.x.min(ext.y).min(ext.z);
    if smallest / resolution < T::lit(MIN_CELLS) {
        return Err(GeometryError::ResolutionTooCoarse {
            cells: (smallest / resolution).to_f64_lossy(),
            required: MIN_CELLS,
        });
    }
    let origin = mesh.aabb.min - Vector3::repeat(padding);
    let span = ext + Vector3::repeat(padding * T::lit(2.0));
    let dims: [usize; 3] = std::array::from_fn(|a| (span[a] / resolution).ceil().to_f64_lossy() as usize + 1);
    let mut grid = SdfGrid { origin, cell: resolution, dims, data: vec![[T::zero(); 4]; dims[0] * dims[1] * dims[2]] };

    let tris: Vec<[Point3<T>; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
    let bricks: [usize; 3] = std::array::from_fn(|a| dims[a].div_ceil(BRICK));
    let mut candidates = Vec::with_capacity(tris.len());
    let mut dist_c = vec![T::zero(); tris.len()];
    for bk in 0..bricks[2] {
        for bj in 0..bricks[1] {
            for bi in 0..bricks[0] {
                let lo = [bi * BRICK, bj * BRICK, bk * BRICK];
                let hi: [usize; 3] = std::array::from_fn(|a| (lo[a] + BRICK).min(dims[a]) - 1);
                let p_lo = grid.node_position(lo[0], lo[1], lo[2]);
                let p_hi = grid.node_position(hi[0], hi[1], hi[2]);
                let center = nalgebra::center(&p_lo, &p_hi);
                let half_diag = (p_hi - p_lo).norm() * T::lit(0.5);
                let mut nearest = T::max_value().unwrap();
                for (t, tri) in tris.iter().enumerate() {
                    dist_c[t] = point_triangle_distance(&center, tri);
                    nearest = nearest.min(dist_c[t]);
                }
                let bound = nearest + half_diag;
                candidates.clear();
                candidates.extend((0..tris.len()).filter(|&t| dist_c[t] - half_diag <= bound));
                // a brick that cannot reach the surface lies entirely on one side
                let brick_sign = (nearest > half_diag).then(|| {
                    if winding_number(mesh, &center) > T::lit(0.5) { -T::one() } else { T::one() }
                });
                for k in lo[2]..=hi[2] {
                    for j in lo[1]..=hi[1] {
                        for i in lo[0]..=hi[0] {
                            let p = grid.node_position(i, j, k);
                            let d = candidates
                                .iter()
                                .map(|&t| point_triangle_distance(&p, &tris[t]))
                                .fold(T::max_value().unwrap(), |m, d| m.min(d));
                            let sign = brick_sign.unwrap_or_else(|| {
                                if winding_number(mesh, &p) > T::lit(0.5) { -T::one() } else { T::one() }
                            });
                            let idx = grid.idx(i, j, k);
                            grid.data[idx][0] = sign * d;
                        }
                    }
                }
            }
        }
    }
    fill_gradients(&mut grid);
    Ok(grid)
}

fn fill_gradients<T: Real>(grid: &mut SdfGrid<T>) {
    let dims = grid.dims;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let ijk = [i, j, k];
                let mut g = [T::zero(); 3];
                for a in 0..3 {
                    let mut lo = ijk;
                    let mut hi = ijk;
                    if ijk[a] > 0 {
                        lo[a] -= 1;
                    }
                    if ijk[a] + 1 < dims[a] {
                        hi[a] += 1;
                    }
                    let span = T::lit((hi[a] - lo[a]) as f64) * grid.cell;
                    g[a] = (grid.node_value(hi[0], hi[1], hi[2]) - grid.node_value(lo[0], lo[1], lo[2])) / span;
                }
                let idx = grid.idx(i, j, k);
                grid.data[idx][1] = g[0];
                grid.data[idx][2] = g[1];
                grid.data[idx][3] = g[2];
            }
        }
    }
}
