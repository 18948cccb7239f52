use rayon::prelude::*;

use super::archive::{Archive, CoverageSeries, Elite, OfferResult, OfferStatus};
use crate::geometry::Pose;
use crate::scenario::Scenario;
use crate::sim::{evaluate, SettleOutcome};
use crate::space::{decode, Genome};

/// One consumed unit of the evaluation budget.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub genome: Genome,
    pub initial: Pose<f64>,
    pub outcome: SettleOutcome<f64>,
    pub index: u64,
}

pub fn evaluate_pose(genome: Genome, initial: Pose<f64>, index: u64, scenario: &Scenario) -> EvalRecord {
    let outcome = evaluate(&initial, &scenario.body, &scenario.support_sdf, &scenario.sim);
    EvalRecord { genome, initial, outcome, index }
}

pub fn evaluate_genome(genome: Genome, index: u64, scenario: &Scenario) -> EvalRecord {
    let initial = decode(&genome, scenario);
    evaluate_pose(genome, initial, index, scenario)
}

/// Settles a batch in parallel; results come back in input order with
/// consecutive indices from `first_index`.
pub fn evaluate_batch(genomes: Vec<Genome>, first_index: u64, scenario: &Scenario) -> Vec<EvalRecord> {
    genomes
        .into_par_iter()
        .enumerate()
        .map(|(i, g)| evaluate_genome(g, first_index + i as u64, scenario))
        .collect()
}

/// Result of one optimizer or sampler run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub archive: Archive,
    pub coverage: CoverageSeries,
    pub evaluations: u64,
}

/// Offers one record and records coverage after it.
pub(crate) fn offer_record(archive: &mut Archive, coverage: &mut CoverageSeries, rec: &EvalRecord) -> OfferResult {
    let result = match Elite::from_outcome(rec.genome.clone(), rec.initial, &rec.outcome, rec.index, archive.sigma_st) {
        Some(elite) => archive.offer(elite),
        None => OfferResult { status: OfferStatus::Rejected, accepted: false, delta: f64::NEG_INFINITY },
    };
    coverage.record(rec.index + 1, archive);
    result
}
