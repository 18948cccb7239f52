use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::archive::{Archive, ArchiveMode, CoverageSeries, OfferResult};
use super::cma::CmaEs;
use super::eval::{evaluate_batch, offer_record, RunOutput};
use super::params::{QdError, QdParams};
use crate::scenario::Scenario;
use crate::space::{random_genome, Genome, SpaceKind};

/// Orders a batch for the CMA update: accepted offers first, each group by
/// improvement descending. Stable, so equal keys keep sample order.
pub fn improvement_ranking(results: &[OfferResult]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&results[a], &results[b]);
        rb.accepted.cmp(&ra.accepted).then(rb.delta.total_cmp(&ra.delta))
    });
    order
}

struct Emitter {
    es: CmaEs,
    stale: usize,
    restarts: usize,
}

fn restart_point(archive: &Archive, space: SpaceKind, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let genome = if archive.is_empty() {
        random_genome(space, rng)
    } else {
        let i = rng.gen_range(0..archive.len());
        archive.elites().nth(i).expect("index below len").1.genome.clone()
    };
    DVector::from_vec(genome.values)
}

/// CMA-MAE: independent CMA-ES emitters ranked by improvement over annealed
/// per-cell thresholds.
pub fn run_cma_mae(scenario: &Scenario, space: SpaceKind, params: &QdParams, seed: u64) -> Result<RunOutput, QdError> {
    params.validate()?;
    let round = (params.emitters * params.emitter_batch) as u64;
    if params.budget < round {
        return Err(QdError::BudgetTooSmall { budget: params.budget, minimum: round });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = ArchiveMode::Annealing { alpha: params.alpha };
    let mut archive = Archive::new(scenario.archive_spec(), mode, scenario.sim.sigma_st).with_f_min(params.f_min);
    let mut coverage = CoverageSeries::start(&archive);
    let mut emitters: Vec<Emitter> = (0..params.emitters)
        .map(|_| Emitter {
            es: CmaEs::new(restart_point(&archive, space, &mut rng), params.sigma0, params.emitter_batch),
            stale: 0,
            restarts: 0,
        })
        .collect();
    let mut used = 0u64;
    while used < params.budget {
        let mut sizes = Vec::with_capacity(emitters.len());
        let mut samples: Vec<DVector<f64>> = Vec::new();
        let mut left = params.budget - used;
        for em in &emitters {
            let n = (params.emitter_batch as u64).min(left) as usize;
            left -= n as u64;
            sizes.push(n);
            samples.extend((0..n).map(|_| em.es.sample(&mut rng)));
        }
        let genomes: Vec<Genome> = samples.iter().map(|x| Genome::new(space, x.iter().copied().collect())).collect();
        let records = evaluate_batch(genomes, used, scenario);
        used += records.len() as u64;
        let mut start = 0;
        for (em, &n) in emitters.iter_mut().zip(&sizes) {
            if n == 0 {
                continue;
            }
            let results: Vec<OfferResult> = records[start..start + n].iter().map(|r| offer_record(&mut archive, &mut coverage, r)).collect();
            let batch = &samples[start..start + n];
            start += n;
            if n < params.emitter_batch {
                // truncated final batch: offered, no update
                continue;
            }
            let ranked: Vec<DVector<f64>> = improvement_ranking(&results).into_iter().map(|i| batch[i].clone()).collect();
            em.es.tell(&ranked);
            if results.iter().any(|r| r.accepted) {
                em.stale = 0;
            } else {
                em.stale += 1;
            }
            if em.es.sigma < 1e-8 || em.stale >= params.restart_patience || !(em.es.condition() < 1e14) {
                em.es = CmaEs::new(restart_point(&archive, space, &mut rng), params.sigma0, params.emitter_batch);
                em.stale = 0;
                em.restarts += 1;
            }
        }
        log::debug!("{used}/{} evaluations, coverage {:.5}", params.budget, archive.coverage());
    }
    log::debug!("emitter restarts: {:?}", emitters.iter().map(|e| e.restarts).collect::<Vec<_>>());
    coverage.finish(used, &archive);
    Ok(RunOutput { archive, coverage, evaluations: used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qd::OfferStatus;
    use crate::scenario::tests::flat_scenario;

    fn res(accepted: bool, delta: f64) -> OfferResult {
        OfferResult { status: OfferStatus::New, accepted, delta }
    }

    #[test]
    fn all_accepted_ranks_by_delta() {
        let r = [res(true, 1.0), res(true, 5.0), res(true, -2.0), res(true, 3.0)];
        assert_eq!(improvement_ranking(&r), vec![1, 3, 0, 2]);
    }

    #[test]
    fn accepted_before_rejected() {
        let r = [res(false, 9.0), res(true, 0.1), res(false, f64::NEG_INFINITY), res(true, 0.2)];
        assert_eq!(improvement_ranking(&r), vec![3, 1, 0, 2]);
    }

    #[test]
    fn one_round_uses_batch_per_emitter() {
        let sc = flat_scenario();
        let params = QdParams { emitters: 3, emitter_batch: 6, budget: 18, ..QdParams::default() };
        let out = run_cma_mae(&sc, SpaceKind::Naive, &params, 0).unwrap();
        assert_eq!(out.evaluations, 18);
        assert!(out.archive.elites().all(|(_, e)| e.eval_index < 18));
        let short = QdParams { budget: 17, ..params.clone() };
        assert!(matches!(run_cma_mae(&sc, SpaceKind::Naive, &short, 0), Err(QdError::BudgetTooSmall { .. })));
        let odd = QdParams { budget: 29, ..params };
        assert_eq!(run_cma_mae(&sc, SpaceKind::Contact, &odd, 0).unwrap().evaluations, 29);
    }
}
