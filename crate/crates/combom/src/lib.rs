//! Combinatorial multi-objective Bayesian optimization over binary subset
//! masks.
//!
//! The library searches `{0,1}^m` for masks that jointly maximize the
//! predictive accuracy and minimize the expected calibration error of a
//! black-box evaluator. The default strategy fits an independent
//! Hamming-kernel Gaussian process per objective, scores candidates with a
//! noisy expected-hypervolume-improvement acquisition, and optimizes the
//! acquisition by greedy hill-climbing inside a Hamming-ball trust region.
//! Budget-matched baselines (random search, GA, simulated annealing,
//! scalarized hill climbing), synthetic test problems with enumerable ground
//! truth, and a replayable LLM evaluation pipeline share the same observation
//! log format.

pub mod acqopt;
pub mod baselines;
pub mod campaign;
pub mod config;
pub mod core;
pub mod error;
pub mod eval;
pub mod llm;
pub mod mobo;
pub mod problems;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
