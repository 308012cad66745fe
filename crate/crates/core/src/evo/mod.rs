//! Evolutionary co-search over (SubCircuit, qubit mapping) genes with a
//! noise-aware performance estimator.

mod estimator;
mod gene;

pub use estimator::{
    default_valid_ids, noise_free_score, noisy_qml_accuracy, noisy_qml_loss, pure_qml_accuracy,
    score_circuit, Estimator, EstimatorCounters, EstimatorMode,
};
pub use gene::{crossover, mutate, random_gene, repair_mapping, Gene, GeneDomain};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Engine configuration; `parents + mutation_count + crossover_count` must
/// equal `population`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvoConfig {
    pub iterations: usize,
    pub population: usize,
    pub parents: usize,
    pub mutation_count: usize,
    pub mutation_prob: f64,
    pub crossover_count: usize,
    pub seed: u64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            iterations: 40,
            population: 40,
            parents: 10,
            mutation_count: 20,
            mutation_prob: 0.4,
            crossover_count: 10,
            seed: 0,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parents + self.mutation_count + self.crossover_count != self.population {
            return Err(Error::Validation(format!(
                "population {} must equal parents {} + mutations {} + crossovers {}",
                self.population, self.parents, self.mutation_count, self.crossover_count
            )));
        }
        if self.parents < 2 {
            return Err(Error::Validation("need at least 2 parents for crossover".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::Validation("mutation_prob outside [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub best: f64,
    pub mean: f64,
    pub best_gene: String,
}

#[derive(Debug, Clone)]
pub struct EvoResult {
    pub best_gene: Gene,
    pub best_score: f64,
    pub history: Vec<IterRecord>,
    pub counters: EstimatorCounters,
}

fn score_population(est: &Estimator, pop: &[Gene]) -> Vec<f64> {
    est.score_batch(pop)
}

fn record(history: &mut Vec<IterRecord>, iteration: usize, pop: &[Gene], scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, s) in scores.iter().enumerate() {
        if s.total_cmp(&scores[best]).is_lt() {
            best = i;
        }
    }
    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    history.push(IterRecord {
        iteration,
        best: scores[best],
        mean,
        best_gene: pop[best].serialize(),
    });
    best
}

/// Run the evolutionary search. Each iteration scores the population, keeps
/// the best `parents`, and refills with mutations (uniform parent choice)
/// and crossovers (two distinct parents); the initial population is random.
pub fn evolve(est: &Estimator, domain: &GeneDomain, cfg: &EvoConfig) -> Result<EvoResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Gene> =
        (0..cfg.population).map(|_| random_gene(domain, &mut rng)).collect::<Result<_>>()?;
    let mut history = Vec::new();
    let mut scores = score_population(est, &pop);
    let mut best_idx = record(&mut history, 0, &pop, &scores);
    let mut best_ever = (pop[best_idx].clone(), scores[best_idx]);

    for iteration in 1..=cfg.iterations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let parents: Vec<Gene> = order[..cfg.parents].iter().map(|&i| pop[i].clone()).collect();

        let mut next = parents.clone();
        for _ in 0..cfg.mutation_count {
            let p = &parents[rng.random_range(0..parents.len())];
            next.push(mutate(p, domain, cfg.mutation_prob, &mut rng)?);
        }
        for _ in 0..cfg.crossover_count {
            let a = rng.random_range(0..parents.len());
            let b = loop {
                let b = rng.random_range(0..parents.len());
                if b != a {
                    break b;
                }
            };
            next.push(crossover(&parents[a], &parents[b], domain, &mut rng)?);
        }
        pop = next;
        scores = score_population(est, &pop);
        best_idx = record(&mut history, iteration, &pop, &scores);
        if scores[best_idx].total_cmp(&best_ever.1).is_lt() {
            best_ever = (pop[best_idx].clone(), scores[best_idx]);
        }
    }

    Ok(EvoResult {
        best_gene: best_ever.0,
        best_score: best_ever.1,
        history,
        counters: est.counters(),
    })
}

/// Budget-matched baseline: `evaluations` uniform random genes.
pub fn random_search(
    est: &Estimator,
    domain: &GeneDomain,
    evaluations: usize,
    seed: u64,
) -> Result<EvoResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop: Vec<Gene> =
        (0..evaluations).map(|_| random_gene(domain, &mut rng)).collect::<Result<_>>()?;
    let scores = score_population(est, &pop);
    let mut history = Vec::new();
    let best_idx = record(&mut history, 0, &pop, &scores);
    Ok(EvoResult {
        best_gene: pop[best_idx].clone(),
        best_score: scores[best_idx],
        history,
        counters: est.counters(),
    })
}
