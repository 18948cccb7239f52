//! Genome spaces and their decoders into initial object poses.

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{folded_barycentric, quaternion_from_euler_xyz, rotation_between, Pose};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// Position in the placement volume plus Euler angles.
    Naive,
    /// Support triangle, point on it, direction in a cone, spin and standoff.
    Contact,
}

impl SpaceKind {
    pub fn len(self) -> usize {
        match self {
            SpaceKind::Naive => 6,
            SpaceKind::Contact => 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub space: SpaceKind,
    pub values: Vec<f64>,
}

impl Genome {
    /// Clamps every component into `[-1, 1]`. Panics on a length mismatch.
    pub fn new(space: SpaceKind, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), space.len(), "genome length does not match its space");
        let values = values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Self { space, values }
    }

    pub fn zeros(space: SpaceKind) -> Self {
        Self { space, values: vec![0.0; space.len()] }
    }
}

/// Axis-aligned box of allowed initial COM positions, support frame (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementVolume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl PlacementVolume {
    pub fn is_valid(&self) -> bool {
        (0..3).all(|k| self.min[k] < self.max[k] && self.min[k].is_finite() && self.max[k].is_finite())
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from_fn(|k, _| 0.5 * (self.min[k] + self.max[k]))
    }

    /// Linear map of `u ∈ [-1, 1]³` onto the box.
    pub fn lerp(&self, u: [f64; 3]) -> Vector3<f64> {
        Vector3::from_fn(|k, _| self.min[k] + 0.5 * (u[k] + 1.0) * (self.max[k] - self.min[k]))
    }
}

/// Shape of the contact-prior space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactSpaceConfig {
    /// Cone half-angle around the triangle normal (rad).
    pub alpha_max: f64,
    pub h_min: f64,
    /// Largest standoff (m); defaults to the object bounding-box diagonal.
    pub h_max: Option<f64>,
}

impl Default for ContactSpaceConfig {
    fn default() -> Self {
        Self { alpha_max: 30f64.to_radians(), h_min: 0.0, h_max: None }
    }
}

pub fn decode(genome: &Genome, scenario: &Scenario) -> Pose<f64> {
    match genome.space {
        SpaceKind::Naive => decode_naive(genome, scenario),
        SpaceKind::Contact => decode_contact(genome, scenario),
    }
}

pub fn decode_naive(genome: &Genome, scenario: &Scenario) -> Pose<f64> {
    let g = &genome.values;
    let position = scenario.volume.lerp([g[0], g[1], g[2]]);
    let pi = std::f64::consts::PI;
    Pose::new(position, quaternion_from_euler_xyz(g[3] * pi, g[4] * pi, g[5] * pi))
}

/// Naive genome that decodes back to `pose`; positions outside the volume
/// are clamped onto it.
pub fn encode_naive(pose: &Pose<f64>, scenario: &Scenario) -> Genome {
    let v = &scenario.volume;
    let angles = crate::geometry::euler_xyz_from_quaternion(&pose.orientation);
    let mut values = Vec::with_capacity(6);
    for k in 0..3 {
        values.push(2.0 * (pose.position[k] - v.min[k]) / (v.max[k] - v.min[k]) - 1.0);
    }
    values.extend(angles.iter().map(|a| a / std::f64::consts::PI));
    Genome::new(SpaceKind::Naive, values)
}

/// Orthonormal tangents `(t1, t2)` with `t1 × t2 = n`.
fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = helper.cross(n).normalize();
    (t1, n.cross(&t1))
}

/// Contact point, approach direction and pose for a contact genome.
pub struct ContactDecode {
    pub triangle: usize,
    pub point: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub pose: Pose<f64>,
}

pub fn decode_contact_detail(genome: &Genome, scenario: &Scenario) -> ContactDecode {
    let g = &genome.values;
    let unit = |x: f64| 0.5 * (x + 1.0);
    let support = &scenario.support;
    let triangle = scenario.support_cdf.pick(unit(g[0]));
    let point = folded_barycentric(&support.triangle(triangle), unit(g[1]), unit(g[2])).coords;
    let normal = support.normals[triangle];

    let cs = &scenario.contact;
    let polar = cs.alpha_max * g[3];
    let azimuth = std::f64::consts::FRAC_PI_2 * g[4];
    let (t1, t2) = tangent_frame(&normal);
    let tilt_axis = Unit::new_normalize(t1 * azimuth.cos() + t2 * azimuth.sin());
    let direction = (UnitQuaternion::from_axis_angle(&tilt_axis, polar) * normal).normalize();

    let spin = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(direction), std::f64::consts::PI * g[5]);
    let orientation = spin * rotation_between(&Vector3::z(), &direction);
    let h_max = cs.h_max.unwrap_or(scenario.object.aabb.diagonal());
    let standoff = cs.h_min + unit(g[6]) * (h_max - cs.h_min);
    ContactDecode { triangle, point, direction, pose: Pose::new(point + direction * standoff, orientation) }
}

pub fn decode_contact(genome: &Genome, scenario: &Scenario) -> Pose<f64> {
    decode_contact_detail(genome, scenario).pose
}

pub fn random_genome(space: SpaceKind, rng: &mut ChaCha8Rng) -> Genome {
    Genome { space, values: (0..space.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect() }
}

pub fn random_genome_seeded(space: SpaceKind, seed: u64) -> Genome {
    use rand::SeedableRng;
    random_genome(space, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Gaussian mutation: each gene with probability `ind_pb` gets `N(0, sigma²)`,
/// then the genome is clamped back into `[-1, 1]`.
pub fn mutate(genome: &Genome, ind_pb: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Genome {
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    let values = genome
        .values
        .iter()
        .map(|&v| if rng.gen_bool(ind_pb) { (v + normal.sample(rng)).clamp(-1.0, 1.0) } else { v })
        .collect();
    Genome { space: genome.space, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic_angle;
    use crate::scenario::tests::flat_scenario;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn zero_naive_genome_is_volume_center() {
        let sc = flat_scenario();
        let pose = decode_naive(&Genome::zeros(SpaceKind::Naive), &sc);
        assert!((pose.position - sc.volume.center()).norm() < 1e-15);
        assert!(pose.orientation.angle() < 1e-15);
    }

    #[test]
    fn encode_inverts_naive_decode() {
        let sc = flat_scenario();
        let g = Genome::new(SpaceKind::Naive, vec![0.3, -0.7, 0.1, 0.4, -0.2, 0.9]);
        let pose = decode_naive(&g, &sc);
        let back = decode_naive(&encode_naive(&pose, &sc), &sc);
        assert!((back.position - pose.position).norm() < 1e-12);
        assert!(geodesic_angle(&back.orientation, &pose.orientation) < 1e-9);
    }

    #[test]
    fn roll_gene_endpoint_is_pi() {
        let sc = flat_scenario();
        let g = Genome::new(SpaceKind::Naive, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let pose = decode_naive(&g, &sc);
        let expected = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        assert!(geodesic_angle(&pose.orientation, &expected) < 1e-12);
        assert!((pose.position - sc.volume.center()).norm() < 1e-15);
    }

    #[test]
    fn contact_zero_cone_genes_follow_normal() {
        let sc = flat_scenario();
        // pick a triangle on the top face of the slab
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for _ in 0..200 {
            let mut g = random_genome(SpaceKind::Contact, &mut rng);
            g.values[3] = 0.0;
            g.values[4] = 0.0;
            let d = decode_contact_detail(&g, &sc);
            let n = sc.support.normals[d.triangle];
            if n.z > 0.999 {
                assert!((d.direction - Vector3::z()).norm() < 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn standoff_endpoints() {
        let sc = flat_scenario();
        let mut g = Genome::zeros(SpaceKind::Contact);
        g.values[6] = -1.0;
        let d = decode_contact_detail(&g, &sc);
        assert!((d.pose.position - d.point).norm() < 1e-12);
        g.values[6] = 1.0;
        let d = decode_contact_detail(&g, &sc);
        assert!(((d.pose.position - d.point).norm() - sc.object.aabb.diagonal()).abs() < 1e-12);
    }

    #[test]
    fn object_z_axis_points_along_direction() {
        let sc = flat_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let d = decode_contact_detail(&random_genome(SpaceKind::Contact, &mut rng), &sc);
            assert!((d.pose.rotate(&Vector3::z()) - d.direction).norm() < 1e-12);
        }
    }

    #[test]
    fn contact_points_uniform_over_top_square() {
        // support is a single flat square: points must be uniform over it
        let sc = crate::scenario::tests::square_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bins = 5;
        let mut counts = vec![0usize; bins * bins];
        let n = 10_000;
        let mut used = 0;
        for _ in 0..n {
            let d = decode_contact_detail(&random_genome(SpaceKind::Contact, &mut rng), &sc);
            if sc.support.normals[d.triangle].z < 0.999 {
                continue;
            }
            used += 1;
            let ix = (((d.point.x + 0.5) * bins as f64) as usize).min(bins - 1);
            let iy = (((d.point.y + 0.5) * bins as f64) as usize).min(bins - 1);
            counts[ix * bins + iy] += 1;
        }
        let e = used as f64 / counts.len() as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        let p = ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn random_genome_properties() {
        assert_eq!(random_genome_seeded(SpaceKind::Naive, 3), random_genome_seeded(SpaceKind::Naive, 3));
        assert_eq!(random_genome_seeded(SpaceKind::Naive, 3).values.len(), 6);
        assert_eq!(random_genome_seeded(SpaceKind::Contact, 3).values.len(), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000;
        let mut sums = [0.0; 6];
        for _ in 0..n {
            let g = random_genome(SpaceKind::Naive, &mut rng);
            for k in 0..6 {
                sums[k] += g.values[k];
            }
        }
        for s in sums {
            assert!((s / n as f64).abs() < 0.01);
        }
    }

    #[test]
    fn mutation_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_genome(SpaceKind::Naive, &mut rng);
        assert_eq!(mutate(&g, 0.0, 0.1, &mut rng), g);
        let top = Genome::new(SpaceKind::Naive, vec![1.0; 6]);
        for _ in 0..100 {
            let m = mutate(&top, 1.0, 0.1, &mut rng);
            assert!(m.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    proptest! {
        #[test]
        fn mutation_chains_stay_in_space(seed in 0u64..1000, steps in 1usize..20, sigma in 0.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = random_genome(SpaceKind::Contact, &mut rng);
            for _ in 0..steps {
                g = mutate(&g, 0.5, sigma, &mut rng);
            }
            prop_assert!(g.values.iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert_eq!(g.values.len(), 7);
        }

        #[test]
        fn contact_direction_inside_cone(seed in 0u64..10_000) {
            let sc = flat_scenario();
            let g = random_genome_seeded(SpaceKind::Contact, seed);
            let d = decode_contact_detail(&g, &sc);
            let n = sc.support.normals[d.triangle];
            let angle = d.direction.dot(&n).clamp(-1.0, 1.0).acos();
            prop_assert!(angle <= sc.contact.alpha_max + 1e-9);
        }

        #[test]
        fn decoders_are_deterministic(seed in 0u64..10_000) {
            let sc = flat_scenario();
            for space in [SpaceKind::Naive, SpaceKind::Contact] {
                let g = random_genome_seeded(space, seed);
                prop_assert_eq!(decode(&g, &sc), decode(&g, &sc));
            }
        }

        #[test]
        fn naive_positions_injective(a in prop::array::uniform3(-1.0..1.0f64), b in prop::array::uniform3(-1.0..1.0f64)) {
            let sc = flat_scenario();
            prop_assume!(a != b);
            let ga = Genome::new(SpaceKind::Naive, vec![a[0], a[1], a[2], 0.0, 0.0, 0.0]);
            let gb = Genome::new(SpaceKind::Naive, vec![b[0], b[1], b[2], 0.0, 0.0, 0.0]);
            prop_assert_ne!(decode_naive(&ga, &sc).position, decode_naive(&gb, &sc).position);
        }
    }
}
