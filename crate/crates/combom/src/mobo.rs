//! Bi-objective hypervolume geometry and the expected-hypervolume-improvement
//! acquisitions (EHVI and its noisy variant) built on GP posteriors.
//!
//! Everything here works in maximization space `(acc, -ece)` against a fixed
//! reference point; the default reference corresponds to accuracy 0% and
//! calibration error 100%.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::core::{ParetoFront, SubsetMask};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::surrogate::{GpModel, PosteriorPrediction};

/// Lower-left corner of the hypervolume computation, maximization space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefPoint {
    pub y: [f64; 2],
}

impl RefPoint {
    pub fn new(y1: f64, y2: f64) -> Self {
        Self { y: [y1, y2] }
    }

    /// Reference in `(acc, ece)` units.
    pub fn from_acc_ece(acc: f64, ece: f64) -> Self {
        Self { y: [acc, -ece] }
    }
}

impl Default for RefPoint {
    /// Accuracy 0%, ECE 100%.
    fn default() -> Self {
        Self { y: [0.0, -1.0] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionMode {
    Ehvi,
    Nehvi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// Posterior draws per Monte Carlo estimate.
    pub mc_samples: usize,
    pub rng_seed: u64,
    pub mode: AcquisitionMode,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            mc_samples: 128,
            rng_seed: 0,
            mode: AcquisitionMode::Nehvi,
        }
    }
}

/// Compensated (Kahan) accumulator so that MC averages of near-identical
/// terms stay exact to a few ulps regardless of the sample count.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Area of the union of boxes `[ref, p]` over the non-dominated, in-bounds
/// subset of `points`.
pub fn hypervolume_2d(points: &[[f64; 2]], ref_point: &RefPoint) -> Result<f64> {
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFinite {
                context: "hypervolume point",
            });
        }
    }
    Ok(SortedFront::build(points, ref_point).hypervolume())
}

/// Leave-one-out hypervolume contribution of every front point, in front
/// order: `HV(front) - HV(front \ {p})`.
pub fn hv_contributions(front: &ParetoFront, ref_point: &RefPoint) -> Result<Vec<f64>> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    let pairs = front.max_pairs();
    let total = hypervolume_2d(&pairs, ref_point)?;
    let mut out = Vec::with_capacity(pairs.len());
    for i in 0..pairs.len() {
        let mut rest = pairs.clone();
        rest.remove(i);
        let without = hypervolume_2d(&rest, ref_point)?;
        out.push((total - without).max(0.0));
    }
    Ok(out)
}

/// Hypervolume improvement of a candidate over a front; zero whenever the
/// candidate is dominated or out of bounds. Non-finite candidates score zero.
pub fn hvi(candidate: [f64; 2], front: &ParetoFront, ref_point: &RefPoint) -> f64 {
    SortedFront::build(&front.max_pairs(), ref_point).hvi(candidate)
}

/// A clipped, non-dominated front sorted by descending first coordinate,
/// with its hypervolume cached. The workhorse behind the MC acquisitions.
#[derive(Clone, Debug)]
pub struct SortedFront {
    /// Descending y1, ascending y2.
    pairs: Vec<[f64; 2]>,
    ref_point: RefPoint,
    hv: f64,
}

impl SortedFront {
    pub fn build(points: &[[f64; 2]], ref_point: &RefPoint) -> Self {
        let r = ref_point.y;
        let mut pairs: Vec<[f64; 2]> = points
            .iter()
            .copied()
            .filter(|p| p[0].is_finite() && p[1].is_finite() && p[0] > r[0] && p[1] > r[1])
            .collect();
        pairs.retain({
            let all = pairs.clone();
            move |p| {
                !all.iter()
                    .any(|q| q[0] >= p[0] && q[1] >= p[1] && (q[0] > p[0] || q[1] > p[1]))
            }
        });
        pairs.sort_by(|a, b| b[0].partial_cmp(&a[0]).expect("finite"));
        pairs.dedup();
        let mut hv = 0.0;
        let mut prev_y2 = r[1];
        for p in &pairs {
            hv += (p[0] - r[0]) * (p[1] - prev_y2);
            prev_y2 = p[1];
        }
        Self {
            pairs,
            ref_point: *ref_point,
            hv,
        }
    }

    pub fn hypervolume(&self) -> f64 {
        self.hv
    }

    /// Single-pass hypervolume improvement: staircase of the front with the
    /// candidate merged in, minus the cached staircase.
    pub fn hvi(&self, c: [f64; 2]) -> f64 {
        let r = self.ref_point.y;
        if !c[0].is_finite() || !c[1].is_finite() || c[0] <= r[0] || c[1] <= r[1] {
            return 0.0;
        }
        if self
            .pairs
            .iter()
            .any(|p| p[0] >= c[0] && p[1] >= c[1])
        {
            return 0.0;
        }
        let mut hv = 0.0;
        let mut prev_y2 = r[1];
        let mut inserted = false;
        for p in &self.pairs {
            if !inserted && c[0] >= p[0] {
                hv += (c[0] - r[0]) * (c[1] - prev_y2);
                prev_y2 = c[1];
                inserted = true;
            }
            // Skip front points the candidate dominates.
            if inserted && p[0] <= c[0] && p[1] <= c[1] {
                continue;
            }
            hv += (p[0] - r[0]) * (p[1] - prev_y2);
            prev_y2 = p[1];
        }
        if !inserted {
            hv += (c[0] - r[0]) * (c[1] - prev_y2);
        }
        (hv - self.hv).max(0.0)
    }
}

/// Monte Carlo EHVI under independent normal marginals for the two
/// objectives. Deterministic given `cfg.rng_seed`.
pub fn ehvi(
    pred_acc: &PosteriorPrediction,
    pred_ece: &PosteriorPrediction,
    front: &ParetoFront,
    ref_point: &RefPoint,
    cfg: &AcquisitionConfig,
) -> Result<f64> {
    if pred_acc.variance < 0.0 || pred_ece.variance < 0.0 {
        return Err(Error::InvalidParameter(
            "negative predictive variance; clamp before calling ehvi".into(),
        ));
    }
    let sorted = SortedFront::build(&front.max_pairs(), ref_point);
    let std1 = pred_acc.variance.sqrt();
    let std2 = pred_ece.variance.sqrt();
    let mut rng = rng::stream(cfg.rng_seed, &[tag::ACQUISITION, 0]);
    let mut acc = KahanSum::default();
    for _ in 0..cfg.mc_samples.max(1) {
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        let f = [pred_acc.mean + std1 * u1, pred_ece.mean + std2 * u2];
        acc.add(sorted.hvi(f));
    }
    Ok(acc.sum / cfg.mc_samples.max(1) as f64)
}

/// Covariance diagonals below this are treated as exactly deterministic, so
/// noiseless models pin their draws to the posterior mean.
const DEGENERATE_COV: f64 = 1e-14;

const CHOLESKY_JITTERS: [f64; 5] = [1e-12, 1e-10, 1e-8, 1e-6, 1e-4];

/// Per-objective state for conditioning one candidate on a joint draw at the
/// observed masks.
struct ObjectiveDraws {
    /// Cholesky factor of the posterior covariance at the observed masks;
    /// `None` when that covariance is numerically zero.
    chol: Option<Cholesky<f64, Dyn>>,
    /// Base standard-normal draws, one vector per MC sample.
    base: Vec<DVector<f64>>,
    /// Drawn objective values at the observed masks, one vector per sample.
    values: Vec<DVector<f64>>,
    /// Noise-free kernel matrix among the observed masks.
    prior_kernel: DMatrix<f64>,
}

impl ObjectiveDraws {
    fn sample(
        model: &GpModel,
        observed: &[SubsetMask],
        mc_samples: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let n = observed.len();
        let (mean, mut cov) = model.joint_posterior(observed)?;
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
            cov[(i, i)] = cov[(i, i)].max(0.0);
        }
        let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);

        let chol = if max_diag < DEGENERATE_COV {
            None
        } else {
            let mut found = None;
            for jitter in CHOLESKY_JITTERS {
                let mut try_cov = cov.clone();
                for i in 0..n {
                    try_cov[(i, i)] += jitter;
                }
                if let Some(c) = Cholesky::new(try_cov) {
                    found = Some(c);
                    break;
                }
            }
            Some(found.ok_or_else(|| {
                Error::Factorization("posterior covariance is not positive definite".into())
            })?)
        };

        let mut base = Vec::with_capacity(mc_samples);
        let mut values = Vec::with_capacity(mc_samples);
        for _ in 0..mc_samples {
            let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = match &chol {
                Some(c) => &mean + c.l() * &u,
                None => mean.clone(),
            };
            base.push(u);
            values.push(v);
        }

        let mut prior_kernel = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = crate::surrogate::hamming_kernel(&observed[i], &observed[j], model.params())?;
                prior_kernel[(i, j)] = k;
                prior_kernel[(j, i)] = k;
            }
        }

        Ok(Self {
            chol,
            base,
            values,
            prior_kernel,
        })
    }

    /// Conditioning weights for a candidate: posterior prediction, the
    /// projection of the candidate onto the base draws, and the residual
    /// conditional variance.
    fn condition(&self, model: &GpModel, z: &SubsetMask) -> Result<Conditioned> {
        let post = model.posterior(z)?;
        let k_z = model.kernel_vec(z)?;
        let w = model.solve_regularized(&k_z);
        let mean = model.params().mean_const + k_z.dot(model.alpha());
        debug_assert!((mean - post.mean).abs() < 1e-9);
        match &self.chol {
            None => Ok(Conditioned {
                mean: post.mean,
                proj: None,
                cond_std: post.variance.sqrt(),
            }),
            Some(chol) => {
                // Posterior covariance between f(observed) and f(z).
                let sigma_xz = &k_z - &self.prior_kernel * &w;
                let g = chol.solve(&sigma_xz);
                let proj = chol.l().transpose() * &g;
                let cond_var = (post.variance - sigma_xz.dot(&g)).max(0.0);
                Ok(Conditioned {
                    mean: post.mean,
                    proj: Some(proj),
                    cond_std: cond_var.sqrt(),
                })
            }
        }
    }
}

struct Conditioned {
    mean: f64,
    proj: Option<DVector<f64>>,
    cond_std: f64,
}

impl Conditioned {
    fn mean_for_draw(&self, base: &DVector<f64>) -> f64 {
        match &self.proj {
            Some(h) => self.mean + h.dot(base),
            None => self.mean,
        }
    }
}

/// Noisy EHVI estimator: marginalizes the uncertainty over the true Pareto
/// front by redrawing the objective values at every observed mask per MC
/// sample and scoring the candidate against each drawn front.
///
/// Construction cost is paid once per model pair; `evaluate` is cheap enough
/// to sit inside the hill-climbing hot loop. Deterministic given the config
/// seed; candidate draws derive from `(rng_seed, candidate bits)` so parallel
/// candidate evaluation never shares a stream.
pub struct NehviSampler<'m> {
    model_acc: &'m GpModel,
    model_ece: &'m GpModel,
    draws_acc: ObjectiveDraws,
    draws_ece: ObjectiveDraws,
    fronts: Vec<SortedFront>,
    rng_seed: u64,
    mc_samples: usize,
}

impl<'m> NehviSampler<'m> {
    pub fn new(
        model_acc: &'m GpModel,
        model_ece: &'m GpModel,
        observed: &[SubsetMask],
        ref_point: &RefPoint,
        cfg: &AcquisitionConfig,
    ) -> Result<Self> {
        if model_acc.train_masks() != observed || model_ece.train_masks() != observed {
            return Err(Error::InvalidParameter(
                "nehvi requires both models trained on the observed masks".into(),
            ));
        }
        let mc_samples = cfg.mc_samples.max(1);
        let mut rng = rng::stream(cfg.rng_seed, &[tag::ACQUISITION, 1]);
        let draws_acc = ObjectiveDraws::sample(model_acc, observed, mc_samples, &mut rng)?;
        let draws_ece = ObjectiveDraws::sample(model_ece, observed, mc_samples, &mut rng)?;

        let fronts = (0..mc_samples)
            .map(|s| {
                let pairs: Vec<[f64; 2]> = (0..observed.len())
                    .map(|i| [draws_acc.values[s][i], draws_ece.values[s][i]])
                    .collect();
                SortedFront::build(&pairs, ref_point)
            })
            .collect();

        Ok(Self {
            model_acc,
            model_ece,
            draws_acc,
            draws_ece,
            fronts,
            rng_seed: cfg.rng_seed,
            mc_samples,
        })
    }

    /// Average hypervolume improvement of the candidate across the drawn
    /// fronts.
    pub fn evaluate(&self, candidate: &SubsetMask) -> Result<f64> {
        let cond_acc = self.draws_acc.condition(self.model_acc, candidate)?;
        let cond_ece = self.draws_ece.condition(self.model_ece, candidate)?;

        let mut rng =
            rng::stream_for_bytes(self.rng_seed, &[tag::ACQUISITION, 2], candidate.to_bitstring().as_bytes());
        let mut acc = KahanSum::default();
        for s in 0..self.mc_samples {
            let w1: f64 = rng.sample(StandardNormal);
            let w2: f64 = rng.sample(StandardNormal);
            let f = [
                cond_acc.mean_for_draw(&self.draws_acc.base[s]) + cond_acc.cond_std * w1,
                cond_ece.mean_for_draw(&self.draws_ece.base[s]) + cond_ece.cond_std * w2,
            ];
            acc.add(self.fronts[s].hvi(f));
        }
        Ok(acc.sum / self.mc_samples as f64)
    }
}

/// One-shot NEHVI of a single candidate; campaigns reuse a [`NehviSampler`]
/// across the whole acquisition optimization instead.
pub fn nehvi(
    model_acc: &GpModel,
    model_ece: &GpModel,
    observed: &[SubsetMask],
    candidate: &SubsetMask,
    ref_point: &RefPoint,
    cfg: &AcquisitionConfig,
) -> Result<f64> {
    NehviSampler::new(model_acc, model_ece, observed, ref_point, cfg)?.evaluate(candidate)
}
