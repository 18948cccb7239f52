use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::archive::{Archive, ArchiveMode, CoverageSeries};
use super::eval::{evaluate_batch, offer_record, RunOutput};
use super::params::{QdError, QdParams};
use crate::geometry::geodesic_angle;
use crate::scenario::Scenario;
use crate::space::{mutate, random_genome, Genome, SpaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Any stored elite.
    Uniform,
    /// Only elites whose outcome was valid.
    SuccessGreedy,
}

/// Cells eligible as parents, in cell order.
pub fn parent_pool(archive: &Archive, selection: Selection) -> Vec<u64> {
    archive
        .elites()
        .filter(|(_, e)| selection == Selection::Uniform || e.valid)
        .map(|(c, _)| c)
        .collect()
}

/// Offspring for one iteration: mutated copies of uniformly drawn parents,
/// or fresh random genomes while the pool is empty.
pub fn make_offspring(archive: &Archive, selection: Selection, space: SpaceKind, n: usize, params: &QdParams, rng: &mut ChaCha8Rng) -> Vec<Genome> {
    let pool = parent_pool(archive, selection);
    (0..n)
        .map(|_| {
            if pool.is_empty() {
                random_genome(space, rng)
            } else {
                let cell = pool[rng.gen_range(0..pool.len())];
                let parent = &archive.get(cell).expect("pool cell is filled").genome;
                mutate(parent, params.ind_pb, params.sigma, rng)
            }
        })
        .collect()
}

fn run_map_elites(scenario: &Scenario, space: SpaceKind, params: &QdParams, seed: u64, selection: Selection) -> Result<RunOutput, QdError> {
    params.validate()?;
    if params.budget < params.mu as u64 {
        return Err(QdError::BudgetTooSmall { budget: params.budget, minimum: params.mu as u64 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = Archive::new(scenario.archive_spec(), ArchiveMode::MapElites, scenario.sim.sigma_st).with_f_min(params.f_min);
    let mut coverage = CoverageSeries::start(&archive);
    let mut used = 0u64;
    let init: Vec<Genome> = (0..params.mu).map(|_| random_genome(space, &mut rng)).collect();
    for rec in evaluate_batch(init, used, scenario) {
        offer_record(&mut archive, &mut coverage, &rec);
    }
    used += params.mu as u64;
    while used < params.budget {
        let n = params.lambda.min((params.budget - used) as usize);
        let children = make_offspring(&archive, selection, space, n, params, &mut rng);
        for rec in evaluate_batch(children, used, scenario) {
            offer_record(&mut archive, &mut coverage, &rec);
        }
        used += n as u64;
        log::debug!("{used}/{} evaluations, coverage {:.5}", params.budget, archive.coverage());
    }
    coverage.finish(used, &archive);
    Ok(RunOutput { archive, coverage, evaluations: used })
}

/// MAP-Elites with uniform parent selection over all elites.
pub fn run_me_rand(scenario: &Scenario, space: SpaceKind, params: &QdParams, seed: u64) -> Result<RunOutput, QdError> {
    run_map_elites(scenario, space, params, seed, Selection::Uniform)
}

/// MAP-Elites selecting only from successful elites; stores a novelty score
/// per elite at the end of the run.
pub fn run_me_scs(scenario: &Scenario, space: SpaceKind, params: &QdParams, seed: u64) -> Result<RunOutput, QdError> {
    let mut out = run_map_elites(scenario, space, params, seed, Selection::SuccessGreedy)?;
    assign_novelty(&mut out.archive, params.k, scenario.char_length());
    Ok(out)
}

/// Mean feature distance to the `k` nearest other elites, where distance is
/// position offset over `char_length` plus geodesic angle.
pub fn assign_novelty(archive: &mut Archive, k: usize, char_length: f64) {
    let features: Vec<_> = archive.elites().map(|(_, e)| e.feature).collect();
    let scores: Vec<f64> = features
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut d: Vec<f64> = features
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (a.position - b.position).norm() / char_length + geodesic_angle(&a.orientation, &b.orientation))
                .collect();
            if d.is_empty() {
                return 0.0;
            }
            let m = k.min(d.len());
            d.select_nth_unstable_by(m - 1, f64::total_cmp);
            d[..m].iter().sum::<f64>() / m as f64
        })
        .collect();
    for ((_, e), s) in archive.elites_mut().zip(scores) {
        e.novelty = Some(s);
    }
}
