//! A placement task: object, support, sampling volume and all constants.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{build_sdf, sample_surface, AreaCdf, GeometryError, Pose, SdfGrid, SurfaceSamples, TriMesh};
use crate::qd::{ArchiveSpec, BinSpec};
use crate::sim::{SimBody, SimConfig, SimError};
use crate::space::{ContactSpaceConfig, PlacementVolume};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Scenario constants other than the meshes themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub volume: PlacementVolume,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub bins: BinSpec,
    #[serde(default)]
    pub contact: ContactSpaceConfig,
    /// Area-weighted surface samples added to the mesh vertices as contact proxies.
    #[serde(default = "default_proxy_samples")]
    pub proxy_samples: usize,
    #[serde(default)]
    pub proxy_seed: u64,
    /// Support SDF node spacing (m).
    #[serde(default = "default_sdf_resolution")]
    pub sdf_resolution: f64,
    #[serde(default = "default_sdf_padding")]
    pub sdf_padding: f64,
    /// Height of a horizontal table-top face, for heatmaps.
    #[serde(default)]
    pub table_height: Option<f64>,
}

fn default_proxy_samples() -> usize {
    64
}
fn default_sdf_resolution() -> f64 {
    0.004
}
fn default_sdf_padding() -> f64 {
    0.02
}

impl ScenarioParams {
    pub fn new(volume: PlacementVolume) -> Self {
        Self {
            volume,
            sim: SimConfig::default(),
            bins: BinSpec::default(),
            contact: ContactSpaceConfig::default(),
            proxy_samples: default_proxy_samples(),
            proxy_seed: 0,
            sdf_resolution: default_sdf_resolution(),
            sdf_padding: default_sdf_padding(),
            table_height: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    /// Object mesh translated so that its center of mass is the origin.
    pub object: TriMesh<f64>,
    pub object_samples: SurfaceSamples<f64>,
    pub body: SimBody<f64>,
    pub support: TriMesh<f64>,
    pub support_sdf: SdfGrid<f64>,
    pub support_cdf: AreaCdf,
    pub object_cdf: AreaCdf,
    pub volume: PlacementVolume,
    pub sim: SimConfig,
    pub contact: ContactSpaceConfig,
    pub params: ScenarioParams,
    /// Hex SHA-256 over the meshes and parameters.
    pub hash: String,
}

impl Scenario {
    pub fn build(name: &str, object: &TriMesh<f64>, support: &TriMesh<f64>, params: ScenarioParams) -> Result<Self, ScenarioError> {
        if !params.volume.is_valid() {
            return Err(ScenarioError::Invalid("placement volume needs min < max on every axis".into()));
        }
        params.sim.validate()?;
        params.bins.validate().map_err(ScenarioError::Invalid)?;
        let c = &params.contact;
        if !(c.alpha_max >= 0.0 && c.alpha_max <= std::f64::consts::PI) || c.h_min < 0.0 || c.h_max.is_some_and(|h| h < c.h_min) {
            return Err(ScenarioError::Invalid("contact space needs 0 <= alpha_max <= pi and 0 <= h_min <= h_max".into()));
        }
        if !(object.mass > 0.0) {
            return Err(ScenarioError::Invalid("object must enclose a positive volume".into()));
        }
        let object = object.transformed(&Pose::from_translation(-object.center_of_mass.coords));
        let object_samples = sample_surface(&object, params.proxy_samples, params.proxy_seed)?;
        let body = SimBody::from_mesh(&object, &object_samples)?;
        let support_sdf = build_sdf(support, params.sdf_resolution, params.sdf_padding)?;
        let grown = support.aabb.inflated(object.aabb.diagonal());
        let vol = &params.volume;
        let intersects = (0..3).all(|k| vol.min[k] <= grown.max[k] && vol.max[k] >= grown.min[k]);
        if !intersects {
            return Err(ScenarioError::Invalid("placement volume is far from the support".into()));
        }
        let hash = scenario_hash(name, &object, support, &params);
        Ok(Self {
            name: name.to_string(),
            support_cdf: AreaCdf::new(support),
            object_cdf: AreaCdf::new(&object),
            object,
            object_samples,
            body,
            support: support.clone(),
            support_sdf,
            volume: params.volume,
            sim: params.sim.clone(),
            contact: params.contact,
            params,
            hash,
        })
    }

    /// Feature box is the placement volume grown by the object diagonal.
    pub fn archive_spec(&self) -> ArchiveSpec {
        let grow = self.object.aabb.diagonal();
        let v = &self.volume;
        ArchiveSpec {
            bins: self.params.bins,
            feature_min: [v.min[0] - grow, v.min[1] - grow, v.min[2] - grow],
            feature_max: [v.max[0] + grow, v.max[1] + grow, v.max[2] + grow],
        }
    }

    pub fn char_length(&self) -> f64 {
        self.body.char_length
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.sim.gravity_vec()
    }
}

fn scenario_hash(name: &str, object: &TriMesh<f64>, support: &TriMesh<f64>, params: &ScenarioParams) -> String {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    for mesh in [object, support] {
        h.update((mesh.vertices.len() as u64).to_le_bytes());
        for v in &mesh.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for t in &mesh.triangles {
            for i in t {
                h.update(i.to_le_bytes());
            }
        }
        h.update(mesh.density.to_le_bytes());
    }
    h.update(serde_json::to_vec(params).expect("params serialize"));
    hex::encode(h.finalize())
}
