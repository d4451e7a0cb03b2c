//! Budget-matched comparison optimizers: random search, genetic algorithm,
//! simulated annealing, and scalarized hill climbing. Every optimizer logs
//! observations in the campaign's format and consumes exactly `budget`
//! objective evaluations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::core::{ObjectiveValue, Observation, SubsetMask};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::rng::{self, tag};

/// Linear scalarization `s = lambda * acc + (1 - lambda) * (1 - ece)`,
/// monotone in both maximization objectives.
pub fn scalarize(lambda: f64, value: &ObjectiveValue) -> f64 {
    lambda * value.acc() + (1.0 - lambda) * (1.0 - value.ece())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            tournament: 3,
            crossover_rate: 0.9,
            elitism: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub t0: f64,
    pub t_final: f64,
    pub lambda: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            t0: 0.1,
            t_final: 1e-3,
            lambda: 0.5,
        }
    }
}

struct Runner<'p> {
    problem: &'p dyn Problem,
    seed: u64,
    eval_rng: ChaCha12Rng,
    log: Vec<Observation>,
    budget: usize,
}

impl<'p> Runner<'p> {
    fn new(problem: &'p dyn Problem, budget: usize, seed: u64) -> Self {
        Self {
            problem,
            seed,
            eval_rng: rng::stream(seed, &[tag::BASELINE, tag::EVAL_NOISE]),
            log: Vec::with_capacity(budget),
            budget,
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.log.len()
    }

    fn evaluate(&mut self, mask: &SubsetMask) -> Result<ObjectiveValue> {
        debug_assert!(self.remaining() > 0, "budget overrun");
        let eval = self.problem.evaluate(mask, &mut self.eval_rng)?;
        self.log.push(Observation::new(
            mask.clone(),
            eval.value,
            self.log.len() as u64,
            self.seed,
            eval.wall_ms,
        ));
        Ok(eval.value)
    }
}

/// Uniform random masks; duplicates are re-drawn up to 100 times before
/// being accepted anyway.
pub fn random_search(problem: &dyn Problem, budget: usize, seed: u64) -> Result<Vec<Observation>> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be >= 1".into()));
    }
    let m = problem.dim();
    let mut runner = Runner::new(problem, budget, seed);
    let mut draw = rng::stream(seed, &[tag::BASELINE, 0]);
    let mut seen: Vec<SubsetMask> = Vec::with_capacity(budget);
    while runner.remaining() > 0 {
        let mut mask = SubsetMask::random(m, &mut draw)?;
        for _ in 0..100 {
            if !seen.contains(&mask) {
                break;
            }
            mask = SubsetMask::random(m, &mut draw)?;
        }
        seen.push(mask.clone());
        runner.evaluate(&mask)?;
    }
    Ok(runner.log)
}

/// Generational GA: tournament selection on a scalarized fitness whose
/// weight is resampled each generation, uniform crossover, per-bit mutation
/// at rate 1/m, elitism, until the evaluation budget is exhausted.
pub fn genetic_algorithm(
    problem: &dyn Problem,
    budget: usize,
    seed: u64,
    cfg: &GaConfig,
) -> Result<Vec<Observation>> {
    if budget < cfg.population {
        return Err(Error::BudgetBelowPopulation {
            budget,
            population: cfg.population,
        });
    }
    let m = problem.dim();
    let mut runner = Runner::new(problem, budget, seed);
    let mut ga_rng = rng::stream(seed, &[tag::BASELINE, 1]);

    let mut population: Vec<(SubsetMask, ObjectiveValue)> = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        let mask = SubsetMask::random(m, &mut ga_rng)?;
        let value = runner.evaluate(&mask)?;
        population.push((mask, value));
    }

    while runner.remaining() > 0 {
        let lambda: f64 = ga_rng.random_range(0.0..=1.0);
        let mut scored: Vec<(usize, f64)> = population
            .iter()
            .enumerate()
            .map(|(i, (_, v))| (i, scalarize(lambda, v)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite fitness"));

        let mut next: Vec<(SubsetMask, ObjectiveValue)> = scored
            .iter()
            .take(cfg.elitism.min(population.len()))
            .map(|&(i, _)| population[i].clone())
            .collect();

        let tournament = |rng: &mut ChaCha12Rng| -> SubsetMask {
            let mut best: Option<(f64, usize)> = None;
            for _ in 0..cfg.tournament.max(1) {
                let i = rng.random_range(0..population.len());
                let s = scalarize(lambda, &population[i].1);
                if best.is_none_or(|(bs, _)| s > bs) {
                    best = Some((s, i));
                }
            }
            population[best.expect("population non-empty").1].0.clone()
        };

        while next.len() < cfg.population && runner.remaining() > 0 {
            let p1 = tournament(&mut ga_rng);
            let p2 = tournament(&mut ga_rng);
            let mut child_bits: Vec<bool> = if ga_rng.random::<f64>() < cfg.crossover_rate {
                (0..m)
                    .map(|j| if ga_rng.random::<bool>() { p1.get(j) } else { p2.get(j) })
                    .collect()
            } else {
                p1.bits().to_vec()
            };
            for bit in child_bits.iter_mut() {
                if ga_rng.random::<f64>() < 1.0 / m as f64 {
                    *bit = !*bit;
                }
            }
            let child = SubsetMask::new(child_bits)?;
            let value = runner.evaluate(&child)?;
            next.push((child, value));
        }
        population = next;
    }
    Ok(runner.log)
}

/// Single-bit-flip simulated annealing with a geometric cooling schedule
/// calibrated so the final proposal runs at `t_final`.
pub fn simulated_annealing(
    problem: &dyn Problem,
    budget: usize,
    seed: u64,
    cfg: &SaConfig,
) -> Result<Vec<Observation>> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be >= 1".into()));
    }
    let m = problem.dim();
    let mut runner = Runner::new(problem, budget, seed);
    let mut sa_rng = rng::stream(seed, &[tag::BASELINE, 2]);

    let mut current = SubsetMask::random(m, &mut sa_rng)?;
    let mut current_score = scalarize(cfg.lambda, &runner.evaluate(&current)?);

    let steps = budget.saturating_sub(1);
    let alpha = if steps > 1 {
        (cfg.t_final / cfg.t0).powf(1.0 / (steps as f64 - 1.0))
    } else {
        1.0
    };
    let mut temperature = cfg.t0;
    while runner.remaining() > 0 {
        let j = sa_rng.random_range(0..m);
        let proposal = current.flipped(j);
        let score = scalarize(cfg.lambda, &runner.evaluate(&proposal)?);
        let delta = score - current_score;
        let accept = delta >= 0.0
            || sa_rng.random::<f64>() < (delta / temperature.max(f64::MIN_POSITIVE)).exp();
        if accept {
            current = proposal;
            current_score = score;
        }
        temperature *= alpha;
    }
    Ok(runner.log)
}

/// Endpoint of one hill-climbing restart.
#[derive(Clone, Debug)]
pub struct HcRestart {
    pub lambda: f64,
    pub endpoint: SubsetMask,
    pub endpoint_value: ObjectiveValue,
    /// Whether the restart verified all m neighbors before stopping.
    pub completed: bool,
}

#[derive(Debug)]
pub struct HcOutcome {
    pub log: Vec<Observation>,
    pub restarts: Vec<HcRestart>,
}

/// Steepest-ascent hill climbing on a randomly scalarized score, restarting
/// from fresh random masks until the budget runs out. Neighbor evaluations
/// consume budget like any other evaluation.
pub fn scalarized_hill_climbing(
    problem: &dyn Problem,
    budget: usize,
    seed: u64,
) -> Result<HcOutcome> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be >= 1".into()));
    }
    let m = problem.dim();
    let mut runner = Runner::new(problem, budget, seed);
    let mut hc_rng = rng::stream(seed, &[tag::BASELINE, 3]);
    let mut restarts = Vec::new();

    'outer: while runner.remaining() > 0 {
        let lambda: f64 = hc_rng.random_range(0.0..=1.0);
        let start = SubsetMask::random(m, &mut hc_rng)?;
        let value = runner.evaluate(&start)?;
        let mut current = start;
        let mut current_value = value;
        let mut current_score = scalarize(lambda, &current_value);

        loop {
            let mut best: Option<(SubsetMask, ObjectiveValue, f64)> = None;
            let mut scanned_all = true;
            for j in 0..m {
                if runner.remaining() == 0 {
                    scanned_all = false;
                    break;
                }
                let neighbor = current.flipped(j);
                let v = runner.evaluate(&neighbor)?;
                let s = scalarize(lambda, &v);
                if s > current_score && best.as_ref().is_none_or(|(_, _, bs)| s > *bs) {
                    best = Some((neighbor, v, s));
                }
            }
            match best {
                Some((mask, v, s)) if scanned_all => {
                    current = mask;
                    current_value = v;
                    current_score = s;
                }
                Some(_) | None => {
                    // A local optimum only counts when the full scan finished.
                    restarts.push(HcRestart {
                        lambda,
                        endpoint: current,
                        endpoint_value: current_value,
                        completed: scanned_all,
                    });
                    if runner.remaining() == 0 {
                        break 'outer;
                    }
                    break;
                }
            }
        }
    }
    Ok(HcOutcome {
        log: runner.log,
        restarts,
    })
}

/// Shuffle helper exposed for tests that need deterministic mask orderings.
pub fn shuffled_indices(n: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{CountingProblem, SyntheticFamily, SyntheticProblem};
    use std::collections::HashSet;

    fn onemax(m: usize) -> SyntheticProblem {
        // P1 with equal-ish weights behaves like onemax on f1.
        SyntheticProblem::new(SyntheticFamily::P1, m, 123, 0.0).unwrap()
    }

    /// Accuracy = weighted bit count, ece identically zero, so any
    /// scalarization is monotone in the single objective.
    struct LinearProblem {
        weights: Vec<f64>,
    }

    impl LinearProblem {
        fn onemax(m: usize) -> Self {
            Self {
                weights: vec![1.0 / m as f64; m],
            }
        }
    }

    impl crate::problems::Problem for LinearProblem {
        fn dim(&self) -> usize {
            self.weights.len()
        }

        fn evaluate(
            &self,
            mask: &crate::core::SubsetMask,
            _rng: &mut dyn rand::RngCore,
        ) -> crate::error::Result<crate::problems::Evaluation> {
            let acc: f64 = mask
                .bits()
                .iter()
                .zip(&self.weights)
                .filter(|(&b, _)| b)
                .map(|(_, w)| w)
                .sum();
            Ok(crate::problems::Evaluation {
                value: ObjectiveValue::from_acc_ece(acc.min(1.0), 0.0)?,
                wall_ms: 0,
            })
        }
    }

    fn logs_equal(a: &[Observation], b: &[Observation]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.mask == y.mask
                    && x.value.max_pair() == y.value.max_pair()
                    && x.iteration == y.iteration
            })
    }

    #[test]
    fn random_search_budget_and_determinism() {
        let p = onemax(8);
        let counting = CountingProblem::new(&p);
        let log = random_search(&counting, 25, 4).unwrap();
        assert_eq!(log.len(), 25);
        assert_eq!(counting.count(), 25);
        let log2 = random_search(&p, 25, 4).unwrap();
        assert!(logs_equal(&log, &log2));
        assert!(random_search(&p, 0, 4).is_err());

        let single = random_search(&p, 1, 9).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn random_search_dedup_enumerates_small_space() {
        let p = onemax(4);
        let log = random_search(&p, 16, 2).unwrap();
        let distinct: HashSet<String> = log.iter().map(|o| o.mask.to_bitstring()).collect();
        assert_eq!(distinct.len(), 16, "all 16 masks should appear once");
    }

    #[test]
    fn ga_budget_errors_and_determinism() {
        let p = onemax(10);
        let cfg = GaConfig::default();
        assert!(matches!(
            genetic_algorithm(&p, 10, 0, &cfg),
            Err(Error::BudgetBelowPopulation { .. })
        ));
        let counting = CountingProblem::new(&p);
        let log = genetic_algorithm(&counting, 77, 5, &cfg).unwrap();
        assert_eq!(log.len(), 77);
        assert_eq!(counting.count(), 77);
        let log2 = genetic_algorithm(&p, 77, 5, &cfg).unwrap();
        assert!(logs_equal(&log, &log2));
    }

    #[test]
    fn ga_solves_onemax_most_seeds() {
        let m = 16;
        let p = LinearProblem::onemax(m);
        let mut hits = 0;
        for seed in 0..20 {
            let log = genetic_algorithm(&p, 200, seed, &GaConfig::default()).unwrap();
            let best = log
                .iter()
                .map(|o| o.mask.count_ones())
                .max()
                .unwrap();
            if best == m {
                hits += 1;
            }
        }
        assert!(hits >= 18, "GA solved onemax in only {hits}/20 seeds");
    }

    #[test]
    fn sa_budget_determinism_and_zero_temperature_greediness() {
        let p = onemax(10);
        let cfg = SaConfig::default();
        let counting = CountingProblem::new(&p);
        let log = simulated_annealing(&counting, 60, 3, &cfg).unwrap();
        assert_eq!(log.len(), 60);
        assert_eq!(counting.count(), 60);
        let log2 = simulated_annealing(&p, 60, 3, &cfg).unwrap();
        assert!(logs_equal(&log, &log2));

        // Near-zero temperature: the running best scalarized score never
        // decreases after an accepted move, i.e. pure hill climbing.
        let cold = SaConfig {
            t0: 1e-9,
            t_final: 1e-12,
            ..SaConfig::default()
        };
        let log = simulated_annealing(&p, 80, 7, &cold).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut current = f64::NEG_INFINITY;
        for obs in &log {
            let s = scalarize(cold.lambda, &obs.value);
            // A move is accepted only if it improves on the current state.
            if s >= current {
                current = s;
            }
            best = best.max(s);
        }
        assert!(current <= best + 1e-12);
    }

    #[test]
    fn sa_reaches_linear_optimum_usually() {
        let m = 10;
        let p = LinearProblem::onemax(m);
        let mut hits = 0;
        for seed in 0..20 {
            let log = simulated_annealing(&p, 300, seed, &SaConfig::default()).unwrap();
            if log.iter().any(|o| o.mask.count_ones() == m) {
                hits += 1;
            }
        }
        assert!(hits >= 16, "SA reached the optimum in only {hits}/20 seeds");
    }

    #[test]
    fn hc_budget_determinism_and_local_optimality() {
        let m = 8;
        let p = onemax(m);
        let counting = CountingProblem::new(&p);
        let out = scalarized_hill_climbing(&counting, 120, 11).unwrap();
        assert_eq!(out.log.len(), 120);
        assert_eq!(counting.count(), 120);
        let out2 = scalarized_hill_climbing(&p, 120, 11).unwrap();
        assert!(logs_equal(&out.log, &out2.log));

        // Every completed restart endpoint is a 1-flip local optimum of its
        // scalarized score, verified against all m neighbors.
        let mut rng = rng::stream(0, &[99]);
        for restart in out.restarts.iter().filter(|r| r.completed) {
            let s = scalarize(restart.lambda, &restart.endpoint_value);
            for j in 0..m {
                let neighbor = restart.endpoint.flipped(j);
                let v = p.evaluate(&neighbor, &mut rng).unwrap().value;
                assert!(
                    scalarize(restart.lambda, &v) <= s + 1e-12,
                    "restart endpoint improvable at bit {j}"
                );
            }
        }
        assert!(out.restarts.iter().any(|r| r.completed));
    }

    #[test]
    fn logs_are_schema_identical_across_strategies() {
        let p = onemax(6);
        let rs = random_search(&p, 24, 1).unwrap();
        let ga = genetic_algorithm(&p, 24, 1, &GaConfig { population: 8, ..GaConfig::default() }).unwrap();
        let sa = simulated_annealing(&p, 24, 1, &SaConfig::default()).unwrap();
        let hc = scalarized_hill_climbing(&p, 24, 1).unwrap().log;
        for log in [&rs, &ga, &sa, &hc] {
            assert_eq!(log.len(), 24);
            for (i, obs) in log.iter().enumerate() {
                assert_eq!(obs.iteration, i as u64);
                assert_eq!(obs.seed, 1);
            }
            // The shared Pareto machinery runs unchanged on any of them.
            crate::core::pareto_front(log).unwrap();
        }
    }
}
