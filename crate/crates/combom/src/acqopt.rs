//! Acquisition maximization over `{0,1}^m`: greedy steepest-ascent
//! hill-climbing restricted to a Hamming ball centered on the front point
//! with the largest hypervolume contribution.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::core::{ParetoFront, SubsetMask};
use crate::error::{Error, Result};
use crate::mobo::{hv_contributions, RefPoint};
#[cfg(test)]
use crate::mobo::hypervolume_2d;
use crate::rng::{self, tag};

/// Hamming ball around a promising mask, with the success/failure counters
/// that drive radius adaptation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrustRegion {
    pub center: SubsetMask,
    pub radius: usize,
    pub success_count: u32,
    pub failure_count: u32,
    pub radius_min: usize,
    pub radius_max: usize,
}

/// Consecutive successes/failures before the radius doubles/shrinks.
const ADAPT_THRESHOLD: u32 = 3;

impl TrustRegion {
    pub fn new(center: SubsetMask, radius: usize, radius_min: usize, radius_max: usize) -> Result<Self> {
        let m = center.dim();
        if radius_min < 1 || radius_min > radius || radius > radius_max || radius_max > m {
            return Err(Error::InvalidParameter(format!(
                "invalid trust region radii: min {radius_min} <= r {radius} <= max {radius_max} <= m {m} violated"
            )));
        }
        Ok(Self {
            center,
            radius,
            success_count: 0,
            failure_count: 0,
            radius_min,
            radius_max,
        })
    }

    /// Defaults: initial radius m/4, bounds [1, m].
    pub fn with_defaults(center: SubsetMask) -> Self {
        let m = center.dim();
        let radius = (m / 4).max(1);
        Self {
            center,
            radius,
            success_count: 0,
            failure_count: 0,
            radius_min: 1,
            radius_max: m,
        }
    }

    pub fn contains(&self, mask: &SubsetMask) -> Result<bool> {
        Ok(self.center.hamming_distance(mask)? <= self.radius)
    }

    /// Recenter without touching radius or counters.
    pub fn recentered(&self, center: SubsetMask) -> Self {
        Self {
            center,
            ..self.clone()
        }
    }
}

/// Radius adaptation: three consecutive successes double the radius, three
/// consecutive failures shrink it by ceil(m/8); both reset the counters.
pub fn update_region(region: &TrustRegion, improved: bool) -> TrustRegion {
    let mut next = region.clone();
    let m = region.center.dim();
    if improved {
        next.success_count += 1;
        next.failure_count = 0;
        if next.success_count >= ADAPT_THRESHOLD {
            next.radius = (next.radius * 2).min(next.radius_max);
            next.success_count = 0;
            next.failure_count = 0;
        }
    } else {
        next.failure_count += 1;
        next.success_count = 0;
        if next.failure_count >= ADAPT_THRESHOLD {
            let step = m.div_ceil(8);
            next.radius = next.radius.saturating_sub(step).max(next.radius_min);
            next.success_count = 0;
            next.failure_count = 0;
        }
    }
    next
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Greedy steps per restart.
    pub max_steps: usize,
    pub rng_seed: u64,
}

impl SearchConfig {
    /// Defaults for pool size `m`: 10 restarts, 4m steps.
    pub fn for_dim(m: usize, rng_seed: u64) -> Self {
        Self {
            restarts: 10,
            max_steps: 4 * m.max(1),
            rng_seed,
        }
    }
}

/// Mask of the front observation with the largest hypervolume contribution;
/// ties break on the lowest iteration index.
pub fn select_center(front: &ParetoFront, ref_point: &RefPoint) -> Result<SubsetMask> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    let contrib = hv_contributions(front, ref_point)?;
    let mut best = 0usize;
    for i in 1..contrib.len() {
        let better = contrib[i] > contrib[best];
        let tie_earlier = contrib[i] == contrib[best]
            && front.points()[i].iteration < front.points()[best].iteration;
        if better || tie_earlier {
            best = i;
        }
    }
    Ok(front.points()[best].mask.clone())
}

/// Outcome of one `hill_climb` call, including every acquisition value the
/// search computed (the memo table), best first.
pub struct SearchOutcome {
    pub best_mask: SubsetMask,
    pub best_value: f64,
    /// Distinct masks scored during the search, sorted by descending value.
    pub trace: Vec<(SubsetMask, f64)>,
}

/// Uniform draw from the Hamming ball: distance weighted by the count of
/// masks at that distance, then a uniform choice of coordinates to flip.
fn sample_in_ball<R: Rng>(region: &TrustRegion, rng: &mut R) -> SubsetMask {
    let m = region.center.dim();
    let radius = region.radius.min(m);
    // binomial(m, d) for d = 0..=radius, in f64 to avoid overflow.
    let mut weights = Vec::with_capacity(radius + 1);
    let mut c = 1.0f64;
    weights.push(c);
    for d in 1..=radius {
        c *= (m - d + 1) as f64 / d as f64;
        weights.push(c);
    }
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random_range(0.0..total);
    let mut dist = radius;
    for (d, w) in weights.iter().enumerate() {
        if pick < *w {
            dist = d;
            break;
        }
        pick -= w;
    }
    // Choose `dist` distinct coordinates to flip (partial Fisher-Yates).
    let mut idx: Vec<usize> = (0..m).collect();
    let mut mask = region.center.clone();
    for i in 0..dist {
        let j = rng.random_range(i..m);
        idx.swap(i, j);
        mask = mask.flipped(idx[i]);
    }
    mask
}

/// Greedy steepest-ascent hill climbing inside the trust region.
///
/// The first restart starts at the center; the rest start at uniform masks
/// inside the ball. Each step flips the single bit with the largest strict
/// acquisition increase that stays inside the region. Acquisition values are
/// memoized across restarts, and the best `(mask, value)` over all restarts
/// is returned together with the full search trace.
pub fn hill_climb_traced<F>(acq: F, region: &TrustRegion, cfg: &SearchConfig) -> SearchOutcome
where
    F: Fn(&SubsetMask) -> f64,
{
    let m = region.center.dim();
    let mut memo: HashMap<SubsetMask, f64> = HashMap::new();
    let score = |mask: &SubsetMask, memo: &mut HashMap<SubsetMask, f64>| -> f64 {
        if let Some(&v) = memo.get(mask) {
            return v;
        }
        let v = acq(mask);
        memo.insert(mask.clone(), v);
        v
    };

    let mut best: Option<(SubsetMask, f64)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng: ChaCha12Rng = rng::stream(cfg.rng_seed, &[tag::SEARCH, restart as u64]);
        let mut current = if restart == 0 {
            region.center.clone()
        } else {
            sample_in_ball(region, &mut rng)
        };
        let mut current_value = score(&current, &mut memo);
        for _ in 0..cfg.max_steps.max(1) {
            let mut step: Option<(usize, f64)> = None;
            for j in 0..m {
                let neighbor = current.flipped(j);
                if !region.contains(&neighbor).unwrap_or(false) {
                    continue;
                }
                let v = score(&neighbor, &mut memo);
                if v > current_value && step.is_none_or(|(_, sv)| v > sv) {
                    step = Some((j, v));
                }
            }
            match step {
                Some((j, v)) => {
                    current = current.flipped(j);
                    current_value = v;
                }
                None => break,
            }
        }
        if best.as_ref().is_none_or(|(_, bv)| current_value > *bv) {
            best = Some((current, current_value));
        }
    }

    let (best_mask, best_value) = best.expect("at least one restart ran");
    let mut trace: Vec<(SubsetMask, f64)> = memo.into_iter().collect();
    trace.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.bits().cmp(b.0.bits()))
    });
    SearchOutcome {
        best_mask,
        best_value,
        trace,
    }
}

/// Best `(mask, value)` found by [`hill_climb_traced`].
pub fn hill_climb<F>(acq: F, region: &TrustRegion, cfg: &SearchConfig) -> (SubsetMask, f64)
where
    F: Fn(&SubsetMask) -> f64,
{
    let out = hill_climb_traced(acq, region, cfg);
    (out.best_mask, out.best_value)
}
