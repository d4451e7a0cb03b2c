//! Synthetic bi-objective test problems on `{0,1}^m` with enumerable ground
//! truth, the `Problem` abstraction every optimizer consumes, and fixture
//! round-tripping for the committed true fronts.

use std::cell::Cell;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::core::{pareto_front, ObjectiveValue, Observation, ParetoFront, SubsetMask};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// One objective evaluation, with the evaluator's own wall-clock cost.
/// Closed-form synthetic problems report zero cost.
#[derive(Clone, Copy, Debug)]
pub struct Evaluation {
    pub value: ObjectiveValue,
    pub wall_ms: u64,
}

/// A black-box bi-objective problem over masks. Evaluations may be noisy;
/// all randomness comes from the caller-provided stream so runs stay
/// deterministic end to end.
pub trait Problem {
    fn dim(&self) -> usize;

    fn evaluate(&self, mask: &SubsetMask, rng: &mut dyn rand::RngCore) -> Result<Evaluation>;
}

/// Wrapper that counts evaluations, for budget-accounting assertions.
pub struct CountingProblem<'p> {
    inner: &'p dyn Problem,
    count: Cell<u64>,
}

impl<'p> CountingProblem<'p> {
    pub fn new(inner: &'p dyn Problem) -> Self {
        Self {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.get()
    }
}

impl Problem for CountingProblem<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, mask: &SubsetMask, rng: &mut dyn rand::RngCore) -> Result<Evaluation> {
        self.count.set(self.count.get() + 1);
        self.inner.evaluate(mask, rng)
    }
}

/// Wrapper that fails the k-th evaluation, for exercising halt-and-resume.
pub struct FailingProblem<'p> {
    inner: &'p dyn Problem,
    fail_at: u64,
    count: Cell<u64>,
}

impl<'p> FailingProblem<'p> {
    /// Fails the `fail_at`-th evaluation (1-based).
    pub fn new(inner: &'p dyn Problem, fail_at: u64) -> Self {
        Self {
            inner,
            fail_at,
            count: Cell::new(0),
        }
    }
}

impl Problem for FailingProblem<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, mask: &SubsetMask, rng: &mut dyn rand::RngCore) -> Result<Evaluation> {
        let n = self.count.get() + 1;
        self.count.set(n);
        if n == self.fail_at {
            return Err(Error::EvalFailure {
                query_id: format!("injected-{n}"),
                detail: "injected evaluation failure".into(),
            });
        }
        self.inner.evaluate(mask, rng)
    }
}

/// Shipped problem families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticFamily {
    /// Weighted-subset trade-off: f1 = normalized weighted sum, f2 = 1 - |z|/m.
    P1,
    /// Hidden-mask pair: fi = 1 - Hamming(z, hi)/m with h1 != h2.
    P2,
    /// Quadratic pseudo-boolean pair with seed-fixed random coefficients.
    P3,
}

/// Quadratic pseudo-boolean function rescaled into [0, 1].
#[derive(Clone, Debug, Serialize, Deserialize)]
struct Quadratic {
    linear: Vec<f64>,
    /// Upper-triangular pairwise coefficients, row-major over i < j.
    pairwise: Vec<f64>,
    offset: f64,
    scale: f64,
}

impl Quadratic {
    fn random<R: Rng>(m: usize, rng: &mut R) -> Self {
        let linear: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pairwise: Vec<f64> = (0..m * (m - 1) / 2)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let mut q = Self {
            linear,
            pairwise,
            offset: 0.0,
            scale: 1.0,
        };
        q.normalize(m);
        q
    }

    fn raw(&self, mask: &SubsetMask) -> f64 {
        let m = mask.dim();
        let mut v = 0.0;
        let mut p = 0;
        for i in 0..m {
            if mask.get(i) {
                v += self.linear[i];
            }
            for j in (i + 1)..m {
                if mask.get(i) && mask.get(j) {
                    v += self.pairwise[p];
                }
                p += 1;
            }
        }
        v
    }

    /// Affine rescale so every mask lands in [0, 1]: exact min/max for
    /// m <= 16 by enumeration, conservative interval bounds above that.
    fn normalize(&mut self, m: usize) {
        let (lo, hi) = if m <= 16 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for mask in SubsetMask::enumerate_all(m).expect("m <= 16") {
                let v = self.raw(&mask);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo, hi)
        } else {
            let lo = self.linear.iter().map(|&a| a.min(0.0)).sum::<f64>()
                + self.pairwise.iter().map(|&b| b.min(0.0)).sum::<f64>();
            let hi = self.linear.iter().map(|&a| a.max(0.0)).sum::<f64>()
                + self.pairwise.iter().map(|&b| b.max(0.0)).sum::<f64>();
            (lo, hi)
        };
        self.offset = lo;
        self.scale = if hi > lo { hi - lo } else { 1.0 };
    }

    fn eval(&self, mask: &SubsetMask) -> f64 {
        ((self.raw(mask) - self.offset) / self.scale).clamp(0.0, 1.0)
    }
}

/// A deterministic bi-objective landscape plus optional Gaussian observation
/// noise with the given standard deviation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticProblem {
    pub family: SyntheticFamily,
    pub m: usize,
    pub seed: u64,
    pub sigma: f64,
    weights: Vec<f64>,
    hidden1: Vec<bool>,
    hidden2: Vec<bool>,
    quad1: Option<Quadratic>,
    quad2: Option<Quadratic>,
}

impl SyntheticProblem {
    pub fn new(family: SyntheticFamily, m: usize, seed: u64, sigma: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidParameter("sigma must be non-negative".into()));
        }
        let mut rng = rng::stream(seed, &[tag::BASELINE, family as u64]);
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let hidden1: Vec<bool> = (0..m).map(|_| rng.random::<bool>()).collect();
        let mut hidden2: Vec<bool> = (0..m).map(|_| rng.random::<bool>()).collect();
        if hidden1 == hidden2 {
            hidden2[0] = !hidden2[0];
        }
        let (quad1, quad2) = if family == SyntheticFamily::P3 {
            (
                Some(Quadratic::random(m, &mut rng)),
                Some(Quadratic::random(m, &mut rng)),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            family,
            m,
            seed,
            sigma,
            weights,
            hidden1,
            hidden2,
            quad1,
            quad2,
        })
    }

    /// P2 with explicit hidden targets. Unlike the seeded constructor this
    /// admits coinciding targets, where both objectives agree and the true
    /// front collapses to the single point (1, 1).
    pub fn p2_with_targets(hidden1: Vec<bool>, hidden2: Vec<bool>, sigma: f64) -> Result<Self> {
        let m = hidden1.len();
        if m == 0 || hidden2.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m.max(1),
                got: hidden2.len(),
            });
        }
        let mut problem = Self::new(SyntheticFamily::P2, m, 0, sigma)?;
        problem.hidden1 = hidden1;
        problem.hidden2 = hidden2;
        Ok(problem)
    }

    /// Noise-free objective values.
    pub fn ground_truth(&self, mask: &SubsetMask) -> Result<[f64; 2]> {
        if mask.dim() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: mask.dim(),
            });
        }
        let m = self.m as f64;
        Ok(match self.family {
            SyntheticFamily::P1 => {
                let total: f64 = self.weights.iter().sum();
                let picked: f64 = self
                    .weights
                    .iter()
                    .zip(mask.bits())
                    .filter(|(_, &b)| b)
                    .map(|(w, _)| w)
                    .sum();
                [picked / total, 1.0 - mask.count_ones() as f64 / m]
            }
            SyntheticFamily::P2 => {
                let d1 = mask
                    .bits()
                    .iter()
                    .zip(&self.hidden1)
                    .filter(|(a, b)| a != b)
                    .count() as f64;
                let d2 = mask
                    .bits()
                    .iter()
                    .zip(&self.hidden2)
                    .filter(|(a, b)| a != b)
                    .count() as f64;
                [1.0 - d1 / m, 1.0 - d2 / m]
            }
            SyntheticFamily::P3 => [
                self.quad1.as_ref().expect("P3 has quadratics").eval(mask),
                self.quad2.as_ref().expect("P3 has quadratics").eval(mask),
            ],
        })
    }

    /// Exact Pareto front by enumerating all 2^m masks (noise-free only).
    pub fn true_front(&self) -> Result<ParetoFront> {
        if self.m > 16 {
            return Err(Error::EnumerationCap { m: self.m });
        }
        if self.sigma != 0.0 {
            return Err(Error::InvalidParameter(
                "true_front requires a noise-free problem (sigma = 0)".into(),
            ));
        }
        let mut log = Vec::with_capacity(1 << self.m);
        for (i, mask) in SubsetMask::enumerate_all(self.m)?.into_iter().enumerate() {
            let [f1, f2] = self.ground_truth(&mask)?;
            log.push(Observation::new(
                mask,
                ObjectiveValue::from_acc_ece(f1, 1.0 - f2)?,
                i as u64,
                self.seed,
                0,
            ));
        }
        pareto_front(&log)
    }
}

impl Problem for SyntheticProblem {
    fn dim(&self) -> usize {
        self.m
    }

    fn evaluate(&self, mask: &SubsetMask, rng: &mut dyn rand::RngCore) -> Result<Evaluation> {
        let [mut f1, mut f2] = self.ground_truth(mask)?;
        if self.sigma > 0.0 {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            f1 = (f1 + self.sigma * n1).clamp(0.0, 1.0);
            f2 = (f2 + self.sigma * n2).clamp(0.0, 1.0);
        }
        Ok(Evaluation {
            // Maximization pair (f1, f2) maps onto (acc, 1 - ece).
            value: ObjectiveValue::from_acc_ece(f1, 1.0 - f2)?,
            wall_ms: 0,
        })
    }
}

/// Committed fixture: the full problem definition (seed plus the derived
/// weights/targets/coefficients) and its enumerated true front.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrueFrontFixture {
    pub problem: SyntheticProblem,
    /// `(mask bitstring, f1, f2)` rows sorted by ascending f1.
    pub front: Vec<(String, f64, f64)>,
}

impl TrueFrontFixture {
    pub fn from_problem(problem: &SyntheticProblem) -> Result<Self> {
        let front = problem.true_front()?;
        Ok(Self {
            problem: problem.clone(),
            front: front
                .points()
                .iter()
                .map(|o| {
                    (
                        o.mask.to_bitstring(),
                        o.value.max_pair()[0],
                        // Stored as the raw f2 value, not its ece form.
                        1.0 - o.value.ece(),
                    )
                })
                .collect(),
        })
    }

    /// Rebuild the problem from its seed and check both the definition
    /// parameters and the enumerated front against the committed values.
    pub fn verify(&self) -> Result<()> {
        let problem = SyntheticProblem::new(
            self.problem.family,
            self.problem.m,
            self.problem.seed,
            0.0,
        )?;
        let fresh = Self::from_problem(&problem)?;
        let mismatch = |what: &str| {
            Err(Error::InvalidParameter(format!(
                "fixture {what} for {:?} m={} seed={} does not match re-derivation",
                self.problem.family, self.problem.m, self.problem.seed
            )))
        };
        if serde_json::to_value(&fresh.problem)? != serde_json::to_value(&self.problem)? {
            return mismatch("definition parameters");
        }
        if fresh.front != self.front {
            return mismatch("front");
        }
        Ok(())
    }
}
