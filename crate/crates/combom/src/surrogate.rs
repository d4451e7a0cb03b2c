//! Gaussian-process surrogate over binary masks with an exponentiated
//! Hamming-distance kernel and per-dimension (ARD) lengthscales.
//!
//! One independent model is fitted per objective on maximization-form
//! targets. Hyperparameters maximize the log marginal likelihood via Adam on
//! `(log lengthscales, log output_scale, log noise_var, mean_const)` with
//! multiple restarts; targets are standardized to zero mean and unit variance
//! during the fit and predictions are mapped back to original units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::core::SubsetMask;
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Diagonal jitter added before factorization regardless of the learned
/// noise, guarding rank deficiency from duplicate masks.
pub const JITTER: f64 = 1e-8;

/// Box bounds for the hyperparameter search (applied to standardized targets).
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_VAR_BOUNDS: (f64, f64) = (1e-6, 1.0);
pub const OUTPUT_SCALE_BOUNDS: (f64, f64) = (1e-4, 1e4);

/// Kernel hyperparameters plus the constant mean and observation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub output_scale: f64,
    pub mean_const: f64,
    pub noise_var: f64,
}

impl KernelParams {
    /// Uniform lengthscales, unit amplitude, zero mean, zero noise.
    pub fn isotropic(m: usize, lengthscale: f64) -> Self {
        Self {
            lengthscales: vec![lengthscale; m],
            output_scale: 1.0,
            mean_const: 0.0,
            noise_var: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().any(|&l| !l.is_finite() || l <= 0.0) {
            return Err(Error::InvalidParameter("lengthscales must be positive".into()));
        }
        if !self.output_scale.is_finite() || self.output_scale <= 0.0 {
            return Err(Error::InvalidParameter("output_scale must be positive".into()));
        }
        if self.noise_var < 0.0 || !self.noise_var.is_finite() {
            return Err(Error::InvalidParameter("noise_var must be non-negative".into()));
        }
        if !self.mean_const.is_finite() {
            return Err(Error::NonFinite { context: "mean_const" });
        }
        Ok(())
    }
}

/// Exponentiated Hamming kernel:
/// `output_scale * exp(-sum_j 1[z_j != z'_j] / l_j)`.
pub fn hamming_kernel(a: &SubsetMask, b: &SubsetMask, p: &KernelParams) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if p.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: p.dim(),
        });
    }
    let mut dist = 0.0;
    for j in 0..a.dim() {
        if a.get(j) != b.get(j) {
            dist += 1.0 / p.lengthscales[j];
        }
    }
    Ok(p.output_scale * (-dist).exp())
}

/// Posterior predictive at one mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorPrediction {
    pub mean: f64,
    /// Clamped to be non-negative.
    pub variance: f64,
}

/// Controls for hyperparameter fitting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of optimizer starts (the default-parameter start counts as one).
    pub restarts: usize,
    /// Adam iterations per start.
    pub max_iters: usize,
    pub seed: u64,
    /// Previous fit to warm-start from, replacing the default first start.
    #[serde(skip)]
    pub warm_start: Option<KernelParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 80,
            seed: 0,
            warm_start: None,
        }
    }
}

/// Fitted Gaussian process for one objective.
///
/// Immutable once constructed; queries never mutate shared state, so a model
/// can be read from many workers while its sibling objective refits.
#[derive(Clone, Debug)]
pub struct GpModel {
    params: KernelParams,
    train_masks: Vec<SubsetMask>,
    train_targets: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `(K + noise I + jitter I)^-1 (o - mean)`.
    alpha: DVector<f64>,
    lml: f64,
    degenerate: bool,
}

impl GpModel {
    /// Build a model with fixed hyperparameters (no optimization).
    pub fn with_params(
        masks: &[SubsetMask],
        targets: &[f64],
        params: KernelParams,
    ) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidParameter("training set must be non-empty".into()));
        }
        if masks.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: masks.len(),
                got: targets.len(),
            });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { context: "training target" });
        }
        params.validate()?;
        let m = masks[0].dim();
        if params.dim() != m || masks.iter().any(|z| z.dim() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: params.dim() });
        }

        let n = masks.len();
        let mut reg = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = hamming_kernel(&masks[i], &masks[j], &params)?;
                reg[(i, j)] = k;
                reg[(j, i)] = k;
            }
            reg[(i, i)] += params.noise_var + JITTER;
        }
        let chol = Cholesky::new(reg).ok_or_else(|| {
            Error::Factorization("kernel matrix is not positive definite".into())
        })?;
        let targets = DVector::from_column_slice(targets);
        let resid = &targets - DVector::from_element(n, params.mean_const);
        let alpha = chol.solve(&resid);

        let mut log_det = 0.0;
        for i in 0..n {
            log_det += chol.l_dirty()[(i, i)].ln();
        }
        let lml = -0.5 * resid.dot(&alpha)
            - log_det
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

        Ok(Self {
            params,
            train_masks: masks.to_vec(),
            train_targets: targets,
            chol,
            alpha,
            lml,
            degenerate: false,
        })
    }

    /// Fit hyperparameters by maximizing the log marginal likelihood.
    ///
    /// Requires at least two distinct masks. Identical targets short-circuit
    /// to a degenerate model pinned at the common value.
    pub fn fit(masks: &[SubsetMask], targets: &[f64], cfg: &FitConfig) -> Result<Self> {
        if masks.len() < 2 {
            return Err(Error::InvalidParameter(
                "fit requires at least 2 training points".into(),
            ));
        }
        let distinct = {
            let mut seen: Vec<&SubsetMask> = Vec::new();
            for z in masks {
                if !seen.contains(&z) {
                    seen.push(z);
                }
            }
            seen.len()
        };
        if distinct < 2 {
            return Err(Error::InvalidParameter(
                "fit requires at least 2 distinct masks".into(),
            ));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { context: "training target" });
        }
        let m = masks[0].dim();
        let n = masks.len() as f64;

        let t_mean = targets.iter().sum::<f64>() / n;
        let t_var = targets.iter().map(|t| (t - t_mean).powi(2)).sum::<f64>() / n;
        let t_std = t_var.sqrt();

        if t_std < 1e-12 {
            // Constant data: nothing to learn from the covariance structure.
            let params = KernelParams {
                lengthscales: vec![m as f64 / 2.0; m],
                output_scale: OUTPUT_SCALE_BOUNDS.0,
                mean_const: t_mean,
                noise_var: NOISE_VAR_BOUNDS.0,
            };
            let mut model = Self::with_params(masks, targets, params)?;
            model.degenerate = true;
            return Ok(model);
        }

        let std_targets: Vec<f64> = targets.iter().map(|t| (t - t_mean) / t_std).collect();
        let std_vec = DVector::from_column_slice(&std_targets);

        let default_theta = Theta::default_for(m);
        let mut best: Option<(f64, Theta)> = None;
        let mut rng = rng::stream(cfg.seed, &[tag::FIT]);
        for restart in 0..cfg.restarts.max(1) {
            let theta0 = if restart == 0 {
                match &cfg.warm_start {
                    Some(p) => Theta::from_params_standardized(p, t_mean, t_std),
                    None => default_theta.clone(),
                }
            } else if restart == 1 && cfg.warm_start.is_some() {
                // Keep the default start in the pool even when warm-starting.
                default_theta.clone()
            } else {
                Theta::random(m, &mut rng)
            };
            let (lml, theta) = adam_maximize(masks, &std_vec, theta0, cfg.max_iters);
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, theta));
            }
        }
        // Guarantee the fit never ends below the default starting point.
        if let Ok((lml0, _)) = lml_and_grad(masks, &std_vec, &default_theta) {
            if best.as_ref().is_none_or(|(b, _)| lml0 > *b) {
                best = Some((lml0, default_theta));
            }
        }

        let (_, theta) = best.ok_or_else(|| {
            Error::Factorization("no hyperparameter start produced a valid factorization".into())
        })?;
        Self::with_params(masks, targets, theta.to_params_original(t_mean, t_std))
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn train_masks(&self) -> &[SubsetMask] {
        &self.train_masks
    }

    pub fn train_targets(&self) -> Vec<f64> {
        self.train_targets.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.train_masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_masks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Flagged when the training targets were all identical.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Reconstruct the regularized kernel matrix from the stored factor.
    pub fn reconstructed_kernel_matrix(&self) -> DMatrix<f64> {
        let l = self.chol.l();
        &l * l.transpose()
    }

    pub(crate) fn kernel_vec(&self, z: &SubsetMask) -> Result<DVector<f64>> {
        let mut k = DVector::zeros(self.train_masks.len());
        for (i, x) in self.train_masks.iter().enumerate() {
            k[i] = hamming_kernel(z, x, &self.params)?;
        }
        Ok(k)
    }

    /// Solve `(K + noise I + jitter I) x = v` with the cached factorization.
    pub(crate) fn solve_regularized(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    pub(crate) fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Exact posterior predictive at `z`.
    pub fn posterior(&self, z: &SubsetMask) -> Result<PosteriorPrediction> {
        let k = self.kernel_vec(z)?;
        let mean = self.params.mean_const + k.dot(&self.alpha);
        let solved = self.chol.solve(&k);
        let variance = (self.params.output_scale - k.dot(&solved)).max(0.0);
        Ok(PosteriorPrediction { mean, variance })
    }

    /// Joint posterior over a set of points: mean vector and full covariance.
    pub fn joint_posterior(&self, points: &[SubsetMask]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let q = points.len();
        let n = self.train_masks.len();
        let mut cross = DMatrix::<f64>::zeros(q, n);
        for (r, z) in points.iter().enumerate() {
            for (c, x) in self.train_masks.iter().enumerate() {
                cross[(r, c)] = hamming_kernel(z, x, &self.params)?;
            }
        }
        let mut prior = DMatrix::<f64>::zeros(q, q);
        for r in 0..q {
            for c in 0..=r {
                let k = hamming_kernel(&points[r], &points[c], &self.params)?;
                prior[(r, c)] = k;
                prior[(c, r)] = k;
            }
        }
        let mean = DVector::from_element(q, self.params.mean_const) + &cross * &self.alpha;
        let solved = self.chol.solve(&cross.transpose());
        let cov = prior - &cross * solved;
        Ok((mean, cov))
    }

    /// Posterior covariance between `f(points)` and `f(z)`.
    pub fn posterior_cross_cov(
        &self,
        points: &[SubsetMask],
        z: &SubsetMask,
    ) -> Result<DVector<f64>> {
        let k_z = self.kernel_vec(z)?;
        let solved = self.chol.solve(&k_z);
        let mut out = DVector::zeros(points.len());
        for (r, p) in points.iter().enumerate() {
            let prior = hamming_kernel(p, z, &self.params)?;
            let k_p = self.kernel_vec(p)?;
            out[r] = prior - k_p.dot(&solved);
        }
        Ok(out)
    }

    /// Debug dump of the fitted hyperparameters.
    pub fn hyperparameters_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lengthscales": self.params.lengthscales,
            "output_scale": self.params.output_scale,
            "mean_const": self.params.mean_const,
            "noise_var": self.params.noise_var,
            "log_marginal_likelihood": self.lml,
        })
    }
}

/// Optimization variable: log lengthscales, log output scale, log noise
/// variance, and the (untransformed) mean constant.
#[derive(Clone, Debug)]
struct Theta {
    log_ls: Vec<f64>,
    log_s2: f64,
    log_n2: f64,
    mean: f64,
}

impl Theta {
    fn default_for(m: usize) -> Self {
        Self {
            log_ls: vec![(m as f64 / 2.0).ln(); m],
            log_s2: 0.0,
            log_n2: (0.01f64).ln(),
            mean: 0.0,
        }
    }

    fn random<R: Rng>(m: usize, rng: &mut R) -> Self {
        let lo = (m as f64 / 8.0).max(LENGTHSCALE_BOUNDS.0).ln();
        let hi = (4.0 * m as f64).min(LENGTHSCALE_BOUNDS.1).ln();
        Self {
            log_ls: (0..m).map(|_| rng.random_range(lo..=hi)).collect(),
            log_s2: rng.random_range((0.1f64).ln()..=(2.0f64).ln()),
            log_n2: rng.random_range((1e-4f64).ln()..=(0.1f64).ln()),
            mean: rng.random_range(-0.5..=0.5),
        }
    }

    fn from_params_standardized(p: &KernelParams, t_mean: f64, t_std: f64) -> Self {
        let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        Self {
            log_ls: p
                .lengthscales
                .iter()
                .map(|&l| clamp(l, LENGTHSCALE_BOUNDS).ln())
                .collect(),
            log_s2: clamp(p.output_scale / (t_std * t_std), OUTPUT_SCALE_BOUNDS).ln(),
            log_n2: clamp(p.noise_var / (t_std * t_std), NOISE_VAR_BOUNDS).ln(),
            mean: (p.mean_const - t_mean) / t_std,
        }
    }

    fn to_params_original(&self, t_mean: f64, t_std: f64) -> KernelParams {
        KernelParams {
            lengthscales: self.log_ls.iter().map(|l| l.exp()).collect(),
            output_scale: self.log_s2.exp() * t_std * t_std,
            mean_const: t_mean + t_std * self.mean,
            noise_var: self.log_n2.exp() * t_std * t_std,
        }
    }

    fn project(&mut self) {
        for l in &mut self.log_ls {
            *l = l.clamp(LENGTHSCALE_BOUNDS.0.ln(), LENGTHSCALE_BOUNDS.1.ln());
        }
        self.log_s2 = self
            .log_s2
            .clamp(OUTPUT_SCALE_BOUNDS.0.ln(), OUTPUT_SCALE_BOUNDS.1.ln());
        self.log_n2 = self
            .log_n2
            .clamp(NOISE_VAR_BOUNDS.0.ln(), NOISE_VAR_BOUNDS.1.ln());
        self.mean = self.mean.clamp(-10.0, 10.0);
    }

    fn as_vec(&self) -> Vec<f64> {
        let mut v = self.log_ls.clone();
        v.push(self.log_s2);
        v.push(self.log_n2);
        v.push(self.mean);
        v
    }

    fn from_vec(v: &[f64], m: usize) -> Self {
        Self {
            log_ls: v[..m].to_vec(),
            log_s2: v[m],
            log_n2: v[m + 1],
            mean: v[m + 2],
        }
    }
}

/// Log marginal likelihood of standardized targets plus its analytic
/// gradient with respect to the `Theta` coordinates.
fn lml_and_grad(
    masks: &[SubsetMask],
    targets: &DVector<f64>,
    theta: &Theta,
) -> Result<(f64, Vec<f64>)> {
    let n = masks.len();
    let m = masks[0].dim();
    let s2 = theta.log_s2.exp();
    let n2 = theta.log_n2.exp();
    let ls: Vec<f64> = theta.log_ls.iter().map(|l| l.exp()).collect();

    // Noise-free kernel and the regularized matrix.
    let mut kh = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        kh[(i, i)] = s2;
        for j in 0..i {
            let mut dist = 0.0;
            for ((a, b), l) in masks[i].bits().iter().zip(masks[j].bits()).zip(&ls) {
                if a != b {
                    dist += 1.0 / l;
                }
            }
            let k = s2 * (-dist).exp();
            kh[(i, j)] = k;
            kh[(j, i)] = k;
        }
    }
    let mut reg = kh.clone();
    for i in 0..n {
        reg[(i, i)] += n2 + JITTER;
    }
    let chol = Cholesky::new(reg).ok_or_else(|| {
        Error::Factorization("kernel matrix is not positive definite".into())
    })?;
    let resid = targets - DVector::from_element(n, theta.mean);
    let alpha = chol.solve(&resid);
    let mut log_det = 0.0;
    for i in 0..n {
        log_det += chol.l_dirty()[(i, i)].ln();
    }
    let lml = -0.5 * resid.dot(&alpha)
        - log_det
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    let inv = chol.inverse();

    // d LML / d theta_p = 0.5 * tr((alpha alpha^T - K^-1) dK/dtheta_p).
    let mut grad_ls = vec![0.0; m];
    let mut grad_s2 = 0.0;
    for i in 0..n {
        let wii = alpha[i] * alpha[i] - inv[(i, i)];
        grad_s2 += 0.5 * wii * kh[(i, i)];
        for j in 0..i {
            let w = alpha[i] * alpha[j] - inv[(i, j)];
            let wk = w * kh[(i, j)];
            grad_s2 += wk;
            for d in 0..m {
                if masks[i].get(d) != masks[j].get(d) {
                    grad_ls[d] += wk / ls[d];
                }
            }
        }
    }
    let mut grad_n2 = 0.0;
    for i in 0..n {
        grad_n2 += 0.5 * n2 * (alpha[i] * alpha[i] - inv[(i, i)]);
    }
    let grad_mean = alpha.sum();

    let mut grad = grad_ls;
    grad.push(grad_s2);
    grad.push(grad_n2);
    grad.push(grad_mean);
    Ok((lml, grad))
}

/// Adam ascent on the log marginal likelihood with box projection.
/// Returns the best point seen, which is at least as good as the start.
fn adam_maximize(
    masks: &[SubsetMask],
    targets: &DVector<f64>,
    theta0: Theta,
    max_iters: usize,
) -> (f64, Theta) {
    let m = masks[0].dim();
    let dim = m + 3;
    let (lr, b1, b2, eps) = (0.08, 0.9, 0.999, 1e-8);

    let mut theta = theta0;
    theta.project();
    let mut best = match lml_and_grad(masks, targets, &theta) {
        Ok((lml, _)) => (lml, theta.clone()),
        Err(_) => (f64::NEG_INFINITY, theta.clone()),
    };

    let mut mom = vec![0.0; dim];
    let mut vel = vec![0.0; dim];
    let mut stall = 0usize;
    for t in 1..=max_iters {
        let (lml, grad) = match lml_and_grad(masks, targets, &theta) {
            Ok(v) => v,
            Err(_) => break,
        };
        if lml > best.0 {
            if lml - best.0 < 1e-9 * (1.0 + best.0.abs()) {
                stall += 1;
            } else {
                stall = 0;
            }
            best = (lml, theta.clone());
        } else {
            stall += 1;
        }
        if stall >= 8 || grad.iter().all(|g| g.abs() < 1e-7) {
            break;
        }
        let mut v = theta.as_vec();
        for i in 0..dim {
            mom[i] = b1 * mom[i] + (1.0 - b1) * grad[i];
            vel[i] = b2 * vel[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = mom[i] / (1.0 - b1.powi(t as i32));
            let v_hat = vel[i] / (1.0 - b2.powi(t as i32));
            v[i] += lr * m_hat / (v_hat.sqrt() + eps);
        }
        theta = Theta::from_vec(&v, m);
        theta.project();
    }
    best
}
