//! Bundled desk-scale scenarios built from primitive meshes, and loading of
//! scenario description files.

use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{load_mesh, primitives, write_obj, Pose, TriMesh};
use crate::scenario::{Scenario, ScenarioError, ScenarioParams};
use crate::space::PlacementVolume;

pub const BUILTIN: [&str; 5] = ["box_on_plane", "cylinder_on_plane", "peg_in_hole", "bowl_stack", "hook_hang"];

const DENSITY: f64 = 600.0;
const SUPPORT_DENSITY: f64 = 1000.0;

/// Object mesh, support mesh and constants of a bundled scenario.
pub fn builtin_parts(name: &str) -> Option<(TriMesh<f64>, TriMesh<f64>, ScenarioParams)> {
    let table = || primitives::slab(0.4, 0.4, 0.04, 0.0);
    let tabletop = |volume| {
        let mut p = ScenarioParams::new(volume);
        p.table_height = Some(0.0);
        p
    };
    let parts = match name {
        "box_on_plane" => {
            let params = tabletop(PlacementVolume { min: [-0.15, -0.15, 0.0], max: [0.15, 0.15, 0.15] });
            (primitives::box_mesh(Vector3::repeat(0.05), DENSITY), table(), params)
        }
        "cylinder_on_plane" => {
            let mut params = tabletop(PlacementVolume { min: [-0.15, -0.15, 0.0], max: [0.15, 0.15, 0.15] });
            // a faceted cylinder on its side rocks for seconds otherwise
            params.sim.angular_damping = 0.98;
            params.sim.linear_damping = 0.98;
            (primitives::cylinder(0.025, 0.08, 32, DENSITY), table(), params)
        }
        "peg_in_hole" => {
            // block only: a peg that misses the block falls away
            let mut params = ScenarioParams::new(PlacementVolume { min: [-0.04, -0.04, 0.06], max: [0.04, 0.04, 0.2] });
            params.sdf_resolution = 0.002;
            let block = primitives::block_with_hole(0.06, 0.09, 0.013, 0.05, 32, SUPPORT_DENSITY);
            (primitives::cylinder(0.009, 0.08, 24, DENSITY), block, params)
        }
        "bowl_stack" => {
            let mut params = ScenarioParams::new(PlacementVolume { min: [-0.06, -0.06, 0.0], max: [0.06, 0.06, 0.15] });
            params.sdf_resolution = 0.002;
            let bowl = |d| primitives::bowl(0.04, 0.07, 0.05, 0.006, 32, d);
            (bowl(DENSITY), bowl(SUPPORT_DENSITY), params)
        }
        "hook_hang" => {
            let mut params = ScenarioParams::new(PlacementVolume { min: [0.0, -0.03, 0.15], max: [0.1, 0.05, 0.28] });
            params.sdf_resolution = 0.003;
            // a ring pivoting on the rod loses almost nothing to friction
            params.sim.linear_damping = 0.9;
            params.sim.angular_damping = 0.9;
            params.table_height = Some(0.0);
            let plate = primitives::slab(0.16, 0.16, 0.02, 0.0);
            let post = primitives::box_mesh(Vector3::new(0.02, 0.02, 0.25), SUPPORT_DENSITY)
                .transformed(&Pose::from_translation(Vector3::new(-0.05, 0.0, 0.125)));
            let rod = primitives::cylinder(0.006, 0.16, 24, SUPPORT_DENSITY).transformed(&Pose::new(
                Vector3::new(0.03, 0.0, 0.22),
                UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2),
            ));
            let support = primitives::merge(&[plate, post, rod], SUPPORT_DENSITY);
            // a key ring with a tag, so the hanging orientation is unique
            let ring = primitives::torus(0.03, 0.005, 48, 12, DENSITY);
            let tag = primitives::box_mesh(Vector3::new(0.02, 0.02, 0.008), DENSITY)
                .transformed(&Pose::from_translation(Vector3::new(0.0, -0.045, 0.0)));
            (primitives::merge(&[ring, tag], DENSITY), support, params)
        }
        _ => return None,
    };
    Some(parts)
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let (object, support, params) =
        builtin_parts(name).ok_or_else(|| ScenarioError::Invalid(format!("unknown scenario {name:?}")))?;
    Scenario::build(name, &object, &support, params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRef {
    /// Relative paths resolve against the scenario file's directory.
    pub path: PathBuf,
    #[serde(default = "one")]
    pub scale: f64,
    pub density: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub object: MeshRef,
    pub support: MeshRef,
    pub params: ScenarioParams,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Io(String),
}

/// Reads `scenario.toml` (or the given file) and builds the scenario.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioFileError> {
    let file = if path.is_dir() { path.join("scenario.toml") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| ScenarioFileError::Io(format!("{}: {e}", file.display())))?;
    let spec: ScenarioFile =
        toml::from_str(&text).map_err(|e| ScenarioFileError::Parse { path: file.display().to_string(), message: e.to_string() })?;
    let dir = file.parent().unwrap_or(Path::new("."));
    let mesh = |m: &MeshRef| {
        let p = if m.path.is_absolute() { m.path.clone() } else { dir.join(&m.path) };
        load_mesh(&p, m.scale, m.density).map_err(ScenarioError::from)
    };
    let object = mesh(&spec.object)?;
    let support = mesh(&spec.support)?;
    Ok(Scenario::build(&spec.name, &object, &support, spec.params)?)
}

/// Writes a bundled scenario as `object.obj`, `support.obj` and `scenario.toml` under `dir`.
pub fn write_builtin(name: &str, dir: &Path) -> std::io::Result<()> {
    let (object, support, params) =
        builtin_parts(name).ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, format!("unknown scenario {name}")))?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("object.obj"), write_obj(&object))?;
    std::fs::write(dir.join("support.obj"), write_obj(&support))?;
    let file = ScenarioFile {
        name: name.to_string(),
        object: MeshRef { path: "object.obj".into(), scale: 1.0, density: DENSITY },
        support: MeshRef { path: "support.obj".into(), scale: 1.0, density: SUPPORT_DENSITY },
        params,
    };
    let text = toml::to_string(&file).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("scenario.toml"), text)
}

/// Directory of the committed scenario pack.
pub fn pack_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}
