use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use qdplace::geometry::{build_sdf, primitives, sample_surface, Pose, SdfGrid, TriMesh};
use qdplace::sim::{
    evaluate, mechanical_energy, rollout, settle, step, write_trajectory_csv, RejectReason, RigidBodyState, SimBody,
    SimConfig,
};

const EDGE: f64 = 0.05;
const DENSITY: f64 = 600.0;

fn table() -> SdfGrid<f64> {
    build_sdf(&primitives::slab(0.4, 0.4, 0.04, 0.0), 0.005, 0.02).unwrap()
}

fn cube_mesh() -> TriMesh<f64> {
    primitives::box_mesh(Vector3::repeat(EDGE), DENSITY)
}

fn cube() -> SimBody<f64> {
    let mesh = cube_mesh();
    SimBody::from_mesh(&mesh, &sample_surface(&mesh, 64, 0).unwrap()).unwrap()
}

fn at_height(z: f64) -> Pose<f64> {
    Pose::from_translation(Vector3::new(0.0, 0.0, z))
}

#[test]
fn free_fall_single_step() {
    let cfg = SimConfig { dt: 1e-3, linear_damping: 1.0, angular_damping: 1.0, ..SimConfig::default() };
    let s = RigidBodyState::at_rest(at_height(1.0));
    let r = step(&s, &cube(), &table(), &cfg).unwrap();
    assert!(!r.in_contact);
    assert!((r.next.linear.z + 9.81e-3).abs() < 1e-15);
    let damped = step(&s, &cube(), &table(), &SimConfig { dt: 1e-3, ..SimConfig::default() }).unwrap();
    assert!((damped.next.linear.z + 9.81e-3 * 0.999).abs() < 1e-15);
}

#[test]
fn zero_gravity_rest_is_fixed_point() {
    let cfg = SimConfig { gravity: [0.0; 3], ..SimConfig::default() };
    let pose = Pose::new(Vector3::new(0.01, 0.02, 0.5), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
    let s = RigidBodyState::at_rest(pose);
    let r = step(&s, &cube(), &table(), &cfg).unwrap();
    assert_eq!(r.next.linear, Vector3::zeros());
    assert_eq!(r.next.pose.position, pose.position);
    assert!(r.next.pose.orientation.angle_to(&pose.orientation) < 1e-15);
}

#[test]
fn cube_face_down_rests_at_analytic_height() {
    let body = cube();
    let sdf = table();
    let cfg = SimConfig::default();
    let (traj, out) = settle(&at_height(EDGE / 2.0 + 0.01), &body, &sdf, &cfg);
    assert_eq!(traj.len(), cfg.steps + 1);
    assert!(out.valid, "{out:?}");
    assert!(out.variance < cfg.sigma_st);
    assert_eq!(out.fitness, -out.variance);
    // bottom proxies share the weight equally at equilibrium
    let bottom = body.proxies.iter().filter(|p| (p.z + EDGE / 2.0).abs() < 1e-9).count() as f64;
    let d_star = body.mass * 9.81 / (cfg.stiffness * bottom);
    let z = out.feature.position.z;
    assert!((z - (EDGE / 2.0 - d_star)).abs() < 1e-3 * EDGE, "z = {z}, d* = {d_star}");
}

#[test]
fn static_penetration_matches_solved_depth() {
    let body = cube();
    let sdf = table();
    let cfg = SimConfig { sleep_steps: 0, ..SimConfig::default() };
    let traj = rollout(RigidBodyState::at_rest(at_height(EDGE / 2.0 + 0.002)), &body, &sdf, &cfg, 1440);
    let last = traj.states.last().unwrap().pose;
    let bottom: Vec<f64> = body
        .proxies
        .iter()
        .filter(|p| (p.z + EDGE / 2.0).abs() < 1e-9)
        .map(|p| -sdf.value(&last.apply(&nalgebra::Point3::from(*p))))
        .collect();
    let d_star = body.mass * 9.81 / (cfg.stiffness * bottom.len() as f64);
    let mean = bottom.iter().sum::<f64>() / bottom.len() as f64;
    assert!((mean - d_star).abs() < 0.05 * d_star, "mean {mean:e} vs d* {d_star:e}");
}

#[test]
fn cube_far_from_table_loses_contact() {
    let (traj, out) = settle(&Pose::from_translation(Vector3::new(10.0, 0.0, 0.1)), &cube(), &table(), &SimConfig::default());
    assert!(!out.valid);
    assert_eq!(out.reason, RejectReason::LostContact);
    assert_eq!(traj.len(), 721);
}

#[test]
fn intersecting_start_is_overlap() {
    let (traj, out) = settle(&at_height(0.0), &cube(), &table(), &SimConfig::default());
    assert_eq!(out.reason, RejectReason::Overlap);
    assert!(!out.valid);
    assert_eq!(traj.len(), 1);
}

#[test]
fn energy_never_increases_face_down_drop() {
    // vertex proxies only: the bottom face is symmetric, so the motion is a pure translation
    let mesh = cube_mesh();
    let body = SimBody::from_proxies(
        mesh.vertices.iter().map(|v| v.coords).collect(),
        mesh.mass,
        mesh.inertia,
        mesh.aabb.diagonal(),
    );
    let sdf = table();
    let cfg = SimConfig { sleep_steps: 0, ..SimConfig::default() };
    let traj = rollout(RigidBodyState::at_rest(at_height(EDGE / 2.0 + 0.03)), &body, &sdf, &cfg, 720);
    let energies: Vec<f64> = traj.states.iter().map(|s| mechanical_energy(s, &body, &sdf, &cfg)).collect();
    for (t, w) in energies.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-6 * w[0].abs(), "step {t}: {} -> {}", w[0], w[1]);
    }
    assert!(traj.contact.iter().any(|&c| c));
}

#[test]
fn sphere_rest_height_is_yaw_invariant() {
    let r = 0.03;
    let mesh = primitives::icosphere(r, 5, DENSITY);
    let body = SimBody::from_proxies(
        mesh.vertices.iter().map(|v| v.coords - mesh.center_of_mass.coords).collect(),
        mesh.mass,
        mesh.inertia,
        mesh.aabb.diagonal(),
    );
    let sdf = table();
    let cfg = SimConfig::default();
    let mut heights = Vec::new();
    for k in 0..6 {
        let yaw = k as f64 * 0.5;
        let pose = Pose::new(Vector3::new(0.0, 0.0, r + 0.01), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw));
        let out = evaluate(&pose, &body, &sdf, &cfg);
        heights.push(out.feature.position.z);
    }
    let d_star = body.mass * 9.81 / cfg.stiffness;
    for h in &heights {
        assert!((h - heights[0]).abs() < 1e-3 * r, "{heights:?}");
        // between one and a handful of vertices carry the load
        assert!(*h <= r + 1e-3 * r && *h >= r - d_star - 1e-3 * r, "{h} vs r = {r}");
    }
}

#[test]
fn settle_is_deterministic_and_matches_evaluate() {
    let body = cube();
    let sdf = table();
    let cfg = SimConfig::default();
    let pose = Pose::new(Vector3::new(0.01, -0.02, 0.08), UnitQuaternion::from_euler_angles(0.7, -0.4, 2.0));
    let (a, oa) = settle(&pose, &body, &sdf, &cfg);
    let (b, ob) = settle(&pose, &body, &sdf, &cfg);
    assert_eq!(a, b);
    assert_eq!(oa, ob);
    assert_eq!(evaluate(&pose, &body, &sdf, &cfg), oa);
}

#[test]
fn tilted_cube_topples_onto_a_face() {
    let body = cube();
    let sdf = table();
    let cfg = SimConfig::default();
    let pose = Pose::new(Vector3::new(0.0, 0.0, 0.08), UnitQuaternion::from_euler_angles(0.5, 0.3, 0.0));
    let out = evaluate(&pose, &body, &sdf, &cfg);
    assert!(out.valid, "{out:?}");
    // some body axis points straight down
    let down = -Vector3::z();
    let best = [Vector3::x(), Vector3::y(), Vector3::z()]
        .iter()
        .map(|a| out.feature.rotate(a).dot(&down).abs())
        .fold(0.0, f64::max);
    assert!(best > 0.999, "{best}");
}

#[test]
fn valid_outcomes_satisfy_window_conditions() {
    let body = cube();
    let sdf = table();
    let cfg = SimConfig::default();
    for k in 0..8 {
        let a = k as f64 * 0.7;
        let pose = Pose::new(Vector3::new(0.0, 0.0, 0.07), UnitQuaternion::from_euler_angles(a, 0.5 * a, -a));
        let (traj, out) = settle(&pose, &body, &sdf, &cfg);
        if !out.valid {
            continue;
        }
        let from = traj.len() - 1 - cfg.window;
        assert!(traj.contact[from..].iter().all(|&c| c));
        assert!(traj.states[from..].iter().all(|s| s.linear.norm() < cfg.v_eps && s.angular.norm() < cfg.v_eps));
        assert!(out.variance < cfg.sigma_st);
    }
}

#[test]
fn single_precision_run_settles() {
    let mesh = primitives::box_mesh(Vector3::repeat(EDGE as f32), DENSITY as f32);
    let body = SimBody::from_mesh(&mesh, &sample_surface(&mesh, 64, 0).unwrap()).unwrap();
    let sdf = build_sdf(&primitives::slab(0.4f32, 0.4, 0.04, 0.0), 0.005, 0.02).unwrap();
    let pose = Pose::<f32>::from_translation(Vector3::new(0.0, 0.0, EDGE as f32 / 2.0 + 0.01));
    let out = evaluate(&pose, &body, &sdf, &SimConfig::default());
    assert!(out.valid, "{out:?}");
    assert!((out.feature.position.z - EDGE as f32 / 2.0).abs() < 1e-3 * EDGE as f32);
}

#[test]
fn trajectory_csv_has_one_row_per_state() {
    let (traj, _) = settle(&at_height(0.05), &cube(), &table(), &SimConfig::default());
    let mut buf = Vec::new();
    write_trajectory_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,px,py,pz,qw,qx,qy,qz,contact");
    assert_eq!(lines.count(), traj.len());
}

#[test]
fn inertia_is_used_in_world_frame() {
    // a long bar dropped tilted still comes to rest lying flat
    let mesh = primitives::box_mesh(Vector3::new(0.12, 0.02, 0.02), DENSITY);
    let body = SimBody::from_mesh(&mesh, &sample_surface(&mesh, 64, 3).unwrap()).unwrap();
    assert!(body.inertia != Matrix3::zeros());
    let pose = Pose::new(Vector3::new(0.0, 0.0, 0.07), UnitQuaternion::from_euler_angles(0.0, 0.4, 0.3));
    let out = evaluate(&pose, &body, &table(), &SimConfig::default());
    assert!(out.valid, "{out:?}");
    assert!(out.feature.rotate(&Vector3::x()).z.abs() < 1e-2);
}
