//! Archive and quality-diversity search loops.

mod archive;
mod cma;
mod cma_mae;
mod eval;
pub mod io;
mod map_elites;
mod params;

pub use archive::*;
pub use cma::CmaEs;
pub use cma_mae::{improvement_ranking, run_cma_mae};
pub use eval::{evaluate_batch, evaluate_genome, evaluate_pose, EvalRecord, RunOutput};
pub(crate) use eval::offer_record;
pub use map_elites::{assign_novelty, make_offspring, parent_pool, run_me_rand, run_me_scs, Selection};
pub use params::{QdError, QdParams};
