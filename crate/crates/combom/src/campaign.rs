//! Campaign orchestration: random initialization, the BO loop (fit both GPs,
//! maximize the acquisition in the trust region, evaluate, update the front),
//! append-only persistence, resume, and hypervolume-evolution reporting.
//!
//! Every random decision derives from `(seed, iteration, purpose)`, so an
//! interrupted campaign resumes onto exactly the log an uninterrupted run
//! would have produced.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acqopt::{self, SearchConfig, TrustRegion};
use crate::baselines::{self, GaConfig, SaConfig};
use crate::core::{pareto_front, ObjectiveValue, Observation, ParetoFront, SubsetMask};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::mobo::{ehvi, AcquisitionConfig, AcquisitionMode, NehviSampler, RefPoint};
use crate::problems::Problem;
use crate::rng::{self, tag};
use crate::surrogate::{FitConfig, GpModel, KernelParams};

const STATE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Combom,
    Rs,
    Ga,
    Sa,
    Hc,
    FixedMask,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "combom" => Strategy::Combom,
            "rs" => Strategy::Rs,
            "ga" => Strategy::Ga,
            "sa" => Strategy::Sa,
            "hc" => Strategy::Hc,
            "fixed-mask" => Strategy::FixedMask,
            other => {
                return Err(Error::Config(format!(
                    "unknown strategy {other:?}; expected combom|rs|ga|sa|hc|fixed-mask"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRegionConfig {
    /// Initial Hamming radius; defaults to m/4.
    pub radius_init: Option<usize>,
    pub radius_min: usize,
    /// Defaults to m.
    pub radius_max: Option<usize>,
    pub restarts: usize,
    /// Greedy steps per restart; defaults to 4m.
    pub max_steps: Option<usize>,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            radius_init: None,
            radius_min: 1,
            radius_max: None,
            restarts: 10,
            max_steps: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    /// Starts for the first (cold) fit of a campaign.
    pub restarts: usize,
    /// Starts for warm fits later in the loop (warm + default + fresh).
    pub warm_restarts: usize,
    pub max_iters: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            restarts: 5,
            warm_restarts: 3,
            max_iters: 80,
        }
    }
}

/// Full campaign configuration. Defaults follow the pool-of-32 setup:
/// 20 initial points, 200 total evaluations, seeds {0, 1, 2}, reference
/// point at accuracy 0% / ECE 100%.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub m: usize,
    pub t0: usize,
    pub t_max: usize,
    pub seeds: Vec<u64>,
    pub strategy: Strategy,
    pub ref_point: RefPoint,
    pub eval: EvalConfig,
    pub acquisition: AcquisitionConfig,
    pub trust_region: TrustRegionConfig,
    pub fit: FitSettings,
    pub ga: GaConfig,
    pub sa: SaConfig,
    /// Bitstring for the fixed-mask strategy.
    pub fixed_mask: Option<String>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            m: 32,
            t0: 20,
            t_max: 200,
            seeds: vec![0, 1, 2],
            strategy: Strategy::Combom,
            ref_point: RefPoint::default(),
            eval: EvalConfig::default(),
            acquisition: AcquisitionConfig::default(),
            trust_region: TrustRegionConfig::default(),
            fit: FitSettings::default(),
            ga: GaConfig::default(),
            sa: SaConfig::default(),
            fixed_mask: None,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.t0 == 0 || self.t0 > self.t_max {
            return Err(Error::Config(format!(
                "need 1 <= t0 <= t_max, got t0 {} and t_max {}",
                self.t0, self.t_max
            )));
        }
        let radius = self.radius_init();
        let radius_max = self.radius_max();
        if self.trust_region.radius_min < 1
            || self.trust_region.radius_min > radius
            || radius > radius_max
            || radius_max > self.m
        {
            return Err(Error::Config("inconsistent trust-region radii".into()));
        }
        if self.strategy == Strategy::FixedMask {
            match &self.fixed_mask {
                None => return Err(Error::Config("fixed-mask strategy needs fixed_mask".into())),
                Some(s) => {
                    let mask = SubsetMask::from_bitstring(s)
                        .map_err(|e| Error::Config(format!("bad fixed_mask: {e}")))?;
                    if mask.dim() != self.m {
                        return Err(Error::Config(format!(
                            "fixed_mask has {} bits, campaign m is {}",
                            mask.dim(),
                            self.m
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn radius_init(&self) -> usize {
        self.trust_region.radius_init.unwrap_or((self.m / 4).max(1))
    }

    pub fn radius_max(&self) -> usize {
        self.trust_region.radius_max.unwrap_or(self.m)
    }

    pub fn max_steps(&self) -> usize {
        self.trust_region.max_steps.unwrap_or(4 * self.m)
    }

    /// Stable digest of everything that defines the campaign's trajectory.
    pub fn fingerprint(&self) -> String {
        let identity = serde_json::json!({
            "m": self.m,
            "t0": self.t0,
            "t_max": self.t_max,
            "strategy": self.strategy,
            "ref_point": self.ref_point,
            "acquisition": self.acquisition,
            "trust_region": self.trust_region,
            "fit": self.fit,
            "ga": self.ga,
            "sa": self.sa,
            "fixed_mask": self.fixed_mask,
            "n_bins": self.eval.n_bins,
            "n_samples": self.eval.sampling.n_samples,
        });
        hex::encode(Sha256::digest(serde_json::to_vec(&identity).expect("serializes")))
    }

    /// Load from TOML or JSON by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: CampaignConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One JSONL log line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogLine {
    pub iteration: u64,
    pub mask: String,
    pub acc: f64,
    pub ece: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

impl LogLine {
    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            iteration: obs.iteration,
            mask: obs.mask.to_bitstring(),
            acc: obs.value.acc(),
            ece: obs.value.ece(),
            seed: obs.seed,
            wall_ms: obs.wall_ms,
        }
    }

    pub fn into_observation(self) -> Result<Observation> {
        Ok(Observation::new(
            SubsetMask::from_bitstring(&self.mask)?,
            ObjectiveValue::from_acc_ece(self.acc, self.ece)?,
            self.iteration,
            self.seed,
            self.wall_ms,
        ))
    }
}

/// Parse an observation log from JSONL text, validating every line.
pub fn parse_log(text: &str) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(line).map_err(|e| Error::Dataset {
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        out.push(parsed.into_observation().map_err(|e| Error::Dataset {
            line: lineno + 1,
            detail: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<Vec<Observation>> {
    parse_log(&std::fs::read_to_string(path)?)
}

fn write_log(path: &Path, log: &[Observation]) -> Result<()> {
    let mut text = String::new();
    for obs in log {
        text.push_str(&serde_json::to_string(&LogLine::from_observation(obs))?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn append_log_line(path: &Path, obs: &Observation) -> Result<()> {
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(&LogLine::from_observation(obs))?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

/// Serialized trust region.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct TrustRegionState {
    center: String,
    radius: usize,
    success_count: u32,
    failure_count: u32,
    radius_min: usize,
    radius_max: usize,
}

impl TrustRegionState {
    fn from_region(r: &TrustRegion) -> Self {
        Self {
            center: r.center.to_bitstring(),
            radius: r.radius,
            success_count: r.success_count,
            failure_count: r.failure_count,
            radius_min: r.radius_min,
            radius_max: r.radius_max,
        }
    }

    fn into_region(self) -> Result<TrustRegion> {
        Ok(TrustRegion {
            center: SubsetMask::from_bitstring(&self.center)?,
            radius: self.radius,
            success_count: self.success_count,
            failure_count: self.failure_count,
            radius_min: self.radius_min,
            radius_max: self.radius_max,
        })
    }
}

/// Resumable campaign state. The RNG needs no raw state here: every stream
/// is a pure function of `(seed, iteration, purpose)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema_version: u32,
    pub seed: u64,
    pub m: usize,
    pub strategy: Strategy,
    pub config_fingerprint: String,
    pub iterations_done: u64,
    pub completed: bool,
    trust_region: Option<TrustRegionState>,
    warm_acc: Option<KernelParams>,
    warm_ece: Option<KernelParams>,
    /// Digests of the most recent fitted hyperparameters, for diagnostics.
    pub model_fingerprints: Option<[String; 2]>,
}

impl CampaignState {
    pub fn load(path: &Path) -> Result<Self> {
        let state: CampaignState = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if state.schema_version != STATE_SCHEMA_VERSION {
            return Err(Error::Resume(format!(
                "state schema {} unsupported (expected {STATE_SCHEMA_VERSION})",
                state.schema_version
            )));
        }
        Ok(state)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn params_fingerprint(p: &KernelParams) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(p).expect("serializes")))[..16].to_string()
}

/// Where a persistent run keeps its artifacts.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub log: PathBuf,
    pub state: PathBuf,
}

impl RunPaths {
    /// `<dir>/<strategy>_seed<seed>.jsonl` and `.state.json`.
    pub fn in_dir(dir: &Path, strategy: Strategy, seed: u64) -> Self {
        let tag = match strategy {
            Strategy::Combom => "combom",
            Strategy::Rs => "rs",
            Strategy::Ga => "ga",
            Strategy::Sa => "sa",
            Strategy::Hc => "hc",
            Strategy::FixedMask => "fixed-mask",
        };
        Self {
            log: dir.join(format!("{tag}_seed{seed}.jsonl")),
            state: dir.join(format!("{tag}_seed{seed}.state.json")),
        }
    }
}

#[derive(Debug)]
pub struct CampaignOutcome {
    pub log: Vec<Observation>,
    pub front: ParetoFront,
}

/// Run a campaign from scratch. With `paths`, every iteration is flushed to
/// the log before the next begins and the state file tracks progress; an
/// evaluation failure halts with a resumable state file.
pub fn run_campaign(
    cfg: &CampaignConfig,
    seed: u64,
    problem: &dyn Problem,
    paths: Option<&RunPaths>,
) -> Result<CampaignOutcome> {
    cfg.validate()?;
    if problem.dim() != cfg.m {
        return Err(Error::Config(format!(
            "problem dimension {} does not match campaign m {}",
            problem.dim(),
            cfg.m
        )));
    }
    if let Some(paths) = paths {
        // Fresh run: start clean.
        let _ = std::fs::remove_file(&paths.log);
        let _ = std::fs::remove_file(&paths.state);
    }
    run_from(cfg, seed, problem, paths, Vec::new(), None, None)
}

/// Resume a halted or interrupted campaign from its state file. A completed
/// campaign is a no-op returning the stored results.
pub fn resume_campaign(
    state_path: &Path,
    cfg: &CampaignConfig,
    seed: u64,
    problem: &dyn Problem,
    paths: &RunPaths,
) -> Result<CampaignOutcome> {
    cfg.validate()?;
    let state = CampaignState::load(state_path)?;
    if state.seed != seed {
        return Err(Error::Resume(format!(
            "state was written for seed {}, asked to resume seed {seed}",
            state.seed
        )));
    }
    if state.m != cfg.m || state.strategy != cfg.strategy {
        return Err(Error::Resume(
            "state does not match the campaign's m/strategy".into(),
        ));
    }
    if state.config_fingerprint != cfg.fingerprint() {
        return Err(Error::Resume("configuration changed since the state was written".into()));
    }
    let mut log = read_log(&paths.log)?;
    if state.completed {
        let front = pareto_front(&log)?;
        return Ok(CampaignOutcome { log, front });
    }
    let done = state.iterations_done as usize;
    if log.len() < done {
        return Err(Error::Resume(format!(
            "log has {} lines but state claims {done} iterations",
            log.len()
        )));
    }
    if log.len() > done {
        // The run died between the log flush and the state write; replay the
        // tail iteration deterministically.
        log.truncate(done);
        write_log(&paths.log, &log)?;
    }
    let region = state.trust_region.clone().map(|t| t.into_region()).transpose()?;
    let warm = match (state.warm_acc.clone(), state.warm_ece.clone()) {
        (Some(a), Some(e)) => Some((a, e)),
        _ => None,
    };
    run_from(cfg, seed, problem, Some(paths), log, region, warm)
}

struct Persistence<'a> {
    cfg: &'a CampaignConfig,
    seed: u64,
    paths: Option<&'a RunPaths>,
}

impl Persistence<'_> {
    fn flush_iteration(
        &self,
        obs: &Observation,
        region: Option<&TrustRegion>,
        warm: Option<&(KernelParams, KernelParams)>,
        iterations_done: u64,
        completed: bool,
    ) -> Result<()> {
        let Some(paths) = self.paths else { return Ok(()) };
        append_log_line(&paths.log, obs)?;
        self.write_state(region, warm, iterations_done, completed)
    }

    fn write_state(
        &self,
        region: Option<&TrustRegion>,
        warm: Option<&(KernelParams, KernelParams)>,
        iterations_done: u64,
        completed: bool,
    ) -> Result<()> {
        let Some(paths) = self.paths else { return Ok(()) };
        let state = CampaignState {
            schema_version: STATE_SCHEMA_VERSION,
            seed: self.seed,
            m: self.cfg.m,
            strategy: self.cfg.strategy,
            config_fingerprint: self.cfg.fingerprint(),
            iterations_done,
            completed,
            trust_region: region.map(TrustRegionState::from_region),
            warm_acc: warm.map(|(a, _)| a.clone()),
            warm_ece: warm.map(|(_, e)| e.clone()),
            model_fingerprints: warm
                .map(|(a, e)| [params_fingerprint(a), params_fingerprint(e)]),
        };
        state.save(&paths.state)
    }
}

fn run_from(
    cfg: &CampaignConfig,
    seed: u64,
    problem: &dyn Problem,
    paths: Option<&RunPaths>,
    existing_log: Vec<Observation>,
    region: Option<TrustRegion>,
    warm: Option<(KernelParams, KernelParams)>,
) -> Result<CampaignOutcome> {
    let persist = Persistence { cfg, seed, paths };
    match cfg.strategy {
        Strategy::Combom => {
            run_combom(cfg, seed, problem, &persist, existing_log, region, warm)
        }
        Strategy::FixedMask => run_fixed_mask(cfg, seed, problem, &persist, existing_log),
        Strategy::Rs | Strategy::Ga | Strategy::Sa | Strategy::Hc => {
            run_baseline(cfg, seed, problem, &persist, existing_log)
        }
    }
}

/// Evaluate one mask at a given iteration, wrapping failures into a halted,
/// resumable error when the run is persistent.
fn evaluate_at(
    problem: &dyn Problem,
    seed: u64,
    iteration: u64,
    mask: &SubsetMask,
    persist: &Persistence<'_>,
    region: Option<&TrustRegion>,
    warm: Option<&(KernelParams, KernelParams)>,
) -> Result<Observation> {
    let mut eval_rng = rng::stream(seed, &[tag::EVAL_NOISE, iteration]);
    match problem.evaluate(mask, &mut eval_rng) {
        Ok(eval) => Ok(Observation::new(
            mask.clone(),
            eval.value,
            iteration,
            seed,
            eval.wall_ms,
        )),
        Err(e) => {
            persist.write_state(region, warm, iteration, false)?;
            match persist.paths {
                Some(paths) => Err(Error::Halted {
                    iteration,
                    state_path: paths.state.display().to_string(),
                    source: Box::new(e),
                }),
                None => Err(e),
            }
        }
    }
}

fn draw_initial_mask(
    cfg: &CampaignConfig,
    seed: u64,
    iteration: u64,
    log: &[Observation],
) -> Result<SubsetMask> {
    let mut rng = rng::stream(seed, &[tag::INIT_MASK, iteration]);
    let mut mask = SubsetMask::random(cfg.m, &mut rng)?;
    for _ in 0..100 {
        if !log.iter().any(|o| o.mask == mask) {
            break;
        }
        mask = SubsetMask::random(cfg.m, &mut rng)?;
    }
    Ok(mask)
}

fn run_combom(
    cfg: &CampaignConfig,
    seed: u64,
    problem: &dyn Problem,
    persist: &Persistence<'_>,
    mut log: Vec<Observation>,
    mut region: Option<TrustRegion>,
    mut warm: Option<(KernelParams, KernelParams)>,
) -> Result<CampaignOutcome> {
    // Random initialization phase.
    while log.len() < cfg.t0 {
        let n = log.len() as u64;
        let mask = draw_initial_mask(cfg, seed, n, &log)?;
        let obs = evaluate_at(problem, seed, n, &mask, persist, region.as_ref(), warm.as_ref())?;
        log.push(obs);
        persist.flush_iteration(
            log.last().expect("just pushed"),
            region.as_ref(),
            warm.as_ref(),
            log.len() as u64,
            false,
        )?;
    }

    // BO loop.
    while log.len() < cfg.t_max {
        let n = log.len() as u64;
        let masks: Vec<SubsetMask> = log.iter().map(|o| o.mask.clone()).collect();
        let acc_targets: Vec<f64> = log.iter().map(|o| o.value.max_pair()[0]).collect();
        let ece_targets: Vec<f64> = log.iter().map(|o| o.value.max_pair()[1]).collect();

        let fit_seed = rng::stream(seed, &[tag::FIT, n]).next_u64();
        let fit_cfg = |warm_params: Option<KernelParams>| FitConfig {
            restarts: if warm_params.is_some() {
                cfg.fit.warm_restarts
            } else {
                cfg.fit.restarts
            },
            max_iters: cfg.fit.max_iters,
            seed: fit_seed,
            warm_start: warm_params,
        };
        let model_acc = GpModel::fit(
            &masks,
            &acc_targets,
            &fit_cfg(warm.as_ref().map(|(a, _)| a.clone())),
        )?;
        let model_ece = GpModel::fit(
            &masks,
            &ece_targets,
            &fit_cfg(warm.as_ref().map(|(_, e)| e.clone())),
        )?;
        // Committed only after the evaluation succeeds, so a halted state
        // still warm-starts this iteration's refit from the previous fit.
        let warm_next = Some((model_acc.params().clone(), model_ece.params().clone()));

        let front = pareto_front(&log)?;
        let center = acqopt::select_center(&front, &cfg.ref_point)?;
        let mut current_region = match region.take() {
            Some(r) => r.recentered(center),
            None => TrustRegion::new(
                center,
                cfg.radius_init(),
                cfg.trust_region.radius_min,
                cfg.radius_max(),
            )?,
        };

        let acq_seed = rng::stream(seed, &[tag::ACQUISITION, n]).next_u64();
        let acq_cfg = AcquisitionConfig {
            mc_samples: cfg.acquisition.mc_samples,
            rng_seed: acq_seed,
            mode: cfg.acquisition.mode,
        };
        let search_cfg = SearchConfig {
            restarts: cfg.trust_region.restarts,
            max_steps: cfg.max_steps(),
            rng_seed: acq_seed,
        };

        let outcome = match cfg.acquisition.mode {
            AcquisitionMode::Nehvi => {
                let sampler =
                    NehviSampler::new(&model_acc, &model_ece, &masks, &cfg.ref_point, &acq_cfg)?;
                acqopt::hill_climb_traced(
                    |z| sampler.evaluate(z).unwrap_or(0.0),
                    &current_region,
                    &search_cfg,
                )
            }
            AcquisitionMode::Ehvi => acqopt::hill_climb_traced(
                |z| {
                    let pa = model_acc.posterior(z);
                    let pe = model_ece.posterior(z);
                    match (pa, pe) {
                        (Ok(pa), Ok(pe)) => {
                            ehvi(&pa, &pe, &front, &cfg.ref_point, &acq_cfg).unwrap_or(0.0)
                        }
                        _ => 0.0,
                    }
                },
                &current_region,
                &search_cfg,
            ),
        };

        // Avoid burning budget on an already-evaluated mask when the trace
        // offers a distinct alternative; duplicates are legitimate under
        // observation noise if nothing else is available.
        let already = |z: &SubsetMask| log.iter().any(|o| &o.mask == z);
        let candidate = if already(&outcome.best_mask) {
            outcome
                .trace
                .iter()
                .map(|(z, _)| z)
                .find(|z| !already(z))
                .cloned()
                .unwrap_or(outcome.best_mask)
        } else {
            outcome.best_mask
        };

        let obs = evaluate_at(
            problem,
            seed,
            n,
            &candidate,
            persist,
            Some(&current_region),
            warm.as_ref(),
        )?;
        warm = warm_next;
        log.push(obs);
        let new_front = pareto_front(&log)?;
        let improved = new_front
            .points()
            .iter()
            .any(|o| o.iteration == n);
        current_region = acqopt::update_region(&current_region, improved);
        region = Some(current_region);

        persist.flush_iteration(
            log.last().expect("just pushed"),
            region.as_ref(),
            warm.as_ref(),
            log.len() as u64,
            false,
        )?;
    }

    persist.write_state(region.as_ref(), warm.as_ref(), log.len() as u64, true)?;
    let front = pareto_front(&log)?;
    Ok(CampaignOutcome { log, front })
}

fn run_fixed_mask(
    cfg: &CampaignConfig,
    seed: u64,
    problem: &dyn Problem,
    persist: &Persistence<'_>,
    mut log: Vec<Observation>,
) -> Result<CampaignOutcome> {
    let mask = SubsetMask::from_bitstring(
        cfg.fixed_mask.as_ref().expect("validated fixed_mask"),
    )?;
    while log.len() < cfg.t_max {
        let n = log.len() as u64;
        let obs = evaluate_at(problem, seed, n, &mask, persist, None, None)?;
        log.push(obs);
        persist.flush_iteration(log.last().expect("just pushed"), None, None, log.len() as u64, false)?;
    }
    persist.write_state(None, None, log.len() as u64, true)?;
    let front = pareto_front(&log)?;
    Ok(CampaignOutcome { log, front })
}

fn run_baseline(
    cfg: &CampaignConfig,
    seed: u64,
    problem: &dyn Problem,
    persist: &Persistence<'_>,
    existing_log: Vec<Observation>,
) -> Result<CampaignOutcome> {
    // Baselines are deterministic given (seed, problem, config), so a resumed
    // run recomputes the full trajectory and verifies the stored prefix.
    let log = match cfg.strategy {
        Strategy::Rs => baselines::random_search(problem, cfg.t_max, seed)?,
        Strategy::Ga => baselines::genetic_algorithm(problem, cfg.t_max, seed, &cfg.ga)?,
        Strategy::Sa => baselines::simulated_annealing(problem, cfg.t_max, seed, &cfg.sa)?,
        Strategy::Hc => baselines::scalarized_hill_climbing(problem, cfg.t_max, seed)?.log,
        _ => unreachable!("dispatched above"),
    };
    for (stored, fresh) in existing_log.iter().zip(&log) {
        if stored.mask != fresh.mask || stored.iteration != fresh.iteration {
            return Err(Error::Resume(
                "stored baseline log does not match deterministic replay".into(),
            ));
        }
    }
    if let Some(paths) = persist.paths {
        write_log(&paths.log, &log)?;
    }
    persist.write_state(None, None, log.len() as u64, true)?;
    let front = pareto_front(&log)?;
    Ok(CampaignOutcome { log, front })
}

/// Best-observed-hypervolume trajectory: entry `n` is the hypervolume of the
/// Pareto front of the first `n` observations, labeled by that observation's
/// iteration. Non-decreasing by construction of the front.
pub fn hypervolume_evolution(
    log: &[Observation],
    ref_point: &RefPoint,
) -> Result<Vec<(u64, f64)>> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut out = Vec::with_capacity(log.len());
    for n in 1..=log.len() {
        let front = pareto_front(&log[..n])?;
        let hv = crate::mobo::hypervolume_2d(&front.max_pairs(), ref_point)?;
        out.push((log[n - 1].iteration, hv));
    }
    Ok(out)
}
