//! Generation of diverse, stable placement poses for a rigid object on a
//! support, by driving a settling simulator with quality-diversity search.

pub mod analysis;
pub mod geometry;
pub mod scalar;
pub mod pack;
pub mod qd;
pub mod robustness;
pub mod run;
pub mod samplers;
pub mod scenario;
pub mod sim;
pub mod space;

pub use scalar::Real;

pub type Pose64 = geometry::Pose<f64>;
pub type Pose32 = geometry::Pose<f32>;
pub type TriMesh64 = geometry::TriMesh<f64>;
pub type TriMesh32 = geometry::TriMesh<f32>;
pub type SdfGrid64 = geometry::SdfGrid<f64>;
pub type SdfGrid32 = geometry::SdfGrid<f32>;
