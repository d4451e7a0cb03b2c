//! Domain types shared by every other module: binary subset masks, joint
//! objective observations, Pareto dominance, and Pareto-front maintenance.
//!
//! Objective values are stored internally in maximization form `(acc, -ece)`;
//! accessors expose the `(acc, ece)` view so sign handling lives in exactly
//! one place.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary indicator vector over an exemplar pool: bit `j` selects exemplar `j`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsetMask {
    bits: Vec<bool>,
}

impl SubsetMask {
    /// A mask must have at least one position.
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidParameter("mask dimension must be >= 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(vec![false; m])
    }

    pub fn ones(m: usize) -> Result<Self> {
        Self::new(vec![true; m])
    }

    /// Uniform mask: each bit is an independent fair coin.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..m).map(|_| rng.random::<bool>()).collect())
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of set bits, ascending.
    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }

    pub fn hamming_distance(&self, other: &SubsetMask) -> Result<usize> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Copy with bit `j` flipped.
    pub fn flipped(&self, j: usize) -> SubsetMask {
        let mut bits = self.bits.clone();
        bits[j] = !bits[j];
        SubsetMask { bits }
    }

    /// Encode as a `0`/`1` string, index 0 first.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "invalid mask character {other:?}; expected '0' or '1'"
                ))),
            })
            .collect::<Result<_>>()?;
        Self::new(bits)
    }

    /// Enumerate all 2^m masks of dimension `m` in lexicographic bit order.
    pub fn enumerate_all(m: usize) -> Result<Vec<SubsetMask>> {
        if m == 0 {
            return Err(Error::InvalidParameter("mask dimension must be >= 1".into()));
        }
        if m > 16 {
            return Err(Error::EnumerationCap { m });
        }
        let mut out = Vec::with_capacity(1 << m);
        for code in 0u32..(1u32 << m) {
            let bits = (0..m).map(|j| (code >> j) & 1 == 1).collect();
            out.push(SubsetMask { bits });
        }
        Ok(out)
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetMask({})", self.to_bitstring())
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_bitstring())
    }
}

/// One joint observation of the two objectives, stored as the maximization
/// pair `(y1, y2) = (acc, -ece)`.
///
/// Values produced by evaluators satisfy `acc, ece in [0, 1]`; the type also
/// admits arbitrary finite maximization pairs so that synthetic geometry
/// (hypervolume tests, reference points) can use the same machinery.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    y: [f64; 2],
}

impl ObjectiveValue {
    /// Construct from evaluator outputs; both coordinates must lie in [0, 1].
    pub fn from_acc_ece(acc: f64, ece: f64) -> Result<Self> {
        if !acc.is_finite() || !ece.is_finite() {
            return Err(Error::NonFinite {
                context: "objective value",
            });
        }
        if !(0.0..=1.0).contains(&acc) || !(0.0..=1.0).contains(&ece) {
            return Err(Error::InvalidParameter(format!(
                "objective out of range: acc={acc}, ece={ece}"
            )));
        }
        Ok(Self { y: [acc, -ece] })
    }

    /// Construct directly from a finite maximization pair.
    pub fn from_max_pair(y: [f64; 2]) -> Result<Self> {
        if !y[0].is_finite() || !y[1].is_finite() {
            return Err(Error::NonFinite {
                context: "objective value",
            });
        }
        Ok(Self { y })
    }

    pub fn acc(&self) -> f64 {
        self.y[0]
    }

    pub fn ece(&self) -> f64 {
        -self.y[1]
    }

    /// The maximization pair `(acc, -ece)`.
    pub fn max_pair(&self) -> [f64; 2] {
        self.y
    }
}

impl fmt::Debug for ObjectiveValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectiveValue(acc={}, ece={})", self.acc(), self.ece())
    }
}

/// `true` iff `a` is at least as good as `b` in both maximization coordinates
/// and strictly better in at least one.
pub fn dominates(a: &ObjectiveValue, b: &ObjectiveValue) -> bool {
    let (a, b) = (a.max_pair(), b.max_pair());
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// One entry of a campaign log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Observation {
    pub mask: SubsetMask,
    pub value: ObjectiveValue,
    pub iteration: u64,
    pub seed: u64,
    pub wall_ms: u64,
}

impl Observation {
    pub fn new(mask: SubsetMask, value: ObjectiveValue, iteration: u64, seed: u64, wall_ms: u64) -> Self {
        Self {
            mask,
            value,
            iteration,
            seed,
            wall_ms,
        }
    }
}

/// The maximal non-dominated subset of an observation log.
///
/// Points are kept sorted by ascending first maximization coordinate; on a
/// bi-objective front this is a total order. Observations with duplicate
/// objective values keep the earliest iteration, so reruns report stably.
#[derive(Clone, Debug)]
pub struct ParetoFront {
    points: Vec<Observation>,
}

impl ParetoFront {
    pub fn points(&self) -> &[Observation] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maximization pairs of the front points, in front order.
    pub fn max_pairs(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|o| o.value.max_pair()).collect()
    }

    /// Whether `value` is dominated by (or equal to) some front point.
    pub fn covers(&self, value: &ObjectiveValue) -> bool {
        self.points
            .iter()
            .any(|p| dominates(&p.value, value) || p.value.max_pair() == value.max_pair())
    }
}

/// Compute the Pareto front of a log.
///
/// Duplicate objective values keep the earliest-iteration observation; ties
/// beyond that break lexicographically on the mask bits.
pub fn pareto_front(log: &[Observation]) -> Result<ParetoFront> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut points: Vec<&Observation> = Vec::new();
    for obs in log {
        if log
            .iter()
            .any(|other| dominates(&other.value, &obs.value))
        {
            continue;
        }
        match points
            .iter()
            .position(|kept| kept.value.max_pair() == obs.value.max_pair())
        {
            Some(i) => {
                let kept = points[i];
                let replace = (obs.iteration, obs.mask.bits()) < (kept.iteration, kept.mask.bits());
                if replace {
                    points[i] = obs;
                }
            }
            None => points.push(obs),
        }
    }
    let mut points: Vec<Observation> = points.into_iter().cloned().collect();
    points.sort_by(|a, b| {
        a.value.max_pair()[0]
            .partial_cmp(&b.value.max_pair()[0])
            .expect("front values are finite")
            .then_with(|| a.iteration.cmp(&b.iteration))
    });
    Ok(ParetoFront { points })
}
