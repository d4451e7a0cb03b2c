//! Run-file configuration: the campaign settings plus the problem they run
//! against, loadable from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::CampaignConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, ExemplarPool, LlmProblem};
use crate::llm::{self, load_instances, HttpTransport, ResponseCache, SamplingBackend};
use crate::problems::{Problem, SyntheticFamily, SyntheticProblem};

/// Problem section of a run file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemConfig {
    Synthetic {
        family: SyntheticFamily,
        #[serde(default)]
        sigma: f64,
        #[serde(default)]
        seed: u64,
    },
    Llm {
        /// JSONL exemplar pool; its length is the campaign's m.
        pool: PathBuf,
        /// Single-record JSONL with the reserved format exemplar.
        format_exemplar: PathBuf,
        /// JSONL validation set.
        valset: PathBuf,
        /// Cache directory; falls back to the cache-dir env var.
        #[serde(default)]
        cache_dir: Option<PathBuf>,
        /// Replay (offline) mode; falls back to the replay env var.
        #[serde(default)]
        replay: Option<bool>,
        /// Endpoint base URL; falls back to the base-url env var.
        #[serde(default)]
        base_url: Option<String>,
        /// Whether the endpoint accepts n-completion requests.
        #[serde(default = "default_true")]
        supports_n: bool,
        /// Whether to pass top_k as an extension field.
        #[serde(default = "default_true")]
        send_top_k: bool,
    },
}

fn default_true() -> bool {
    true
}

/// A full run file: `[campaign]` plus `[problem]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunFile {
    pub campaign: CampaignConfig,
    pub problem: ProblemConfig,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: RunFile = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
        };
        file.campaign.validate()?;
        Ok(file)
    }

    /// Resolve paths in the problem section relative to the run file.
    pub fn anchor_paths(&mut self, base: &Path) {
        if let ProblemConfig::Llm {
            pool,
            format_exemplar,
            valset,
            cache_dir,
            ..
        } = &mut self.problem
        {
            for p in [pool, format_exemplar, valset]
                .into_iter()
                .chain(cache_dir.iter_mut())
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

/// A constructed problem ready to run.
pub enum BuiltProblem {
    Synthetic(Box<SyntheticProblem>),
    Llm(Box<LlmProblem>),
}

impl BuiltProblem {
    pub fn as_problem(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Synthetic(p) => p.as_ref(),
            BuiltProblem::Llm(p) => p.as_ref(),
        }
    }

    pub fn as_llm(&self) -> Option<&LlmProblem> {
        match self {
            BuiltProblem::Llm(p) => Some(p),
            BuiltProblem::Synthetic(_) => None,
        }
    }
}

impl ProblemConfig {
    /// Build the problem. Synthetic problems take their dimension from the
    /// campaign; LLM problems take it from the pool file.
    pub fn build(&self, eval: &EvalConfig, m: usize) -> Result<BuiltProblem> {
        match self {
            ProblemConfig::Synthetic { family, sigma, seed } => Ok(BuiltProblem::Synthetic(
                Box::new(SyntheticProblem::new(*family, m, *seed, *sigma)?),
            )),
            ProblemConfig::Llm {
                pool,
                format_exemplar,
                valset,
                cache_dir,
                replay,
                base_url,
                supports_n,
                send_top_k,
            } => {
                let pool_instances = load_instances(pool)?;
                if pool_instances.len() != m {
                    return Err(Error::Config(format!(
                        "pool {} has {} exemplars, campaign m is {m}",
                        pool.display(),
                        pool_instances.len()
                    )));
                }
                let format_records = load_instances(format_exemplar)?;
                let format_exemplar = format_records.into_iter().next().ok_or_else(|| {
                    Error::Config("format exemplar file is empty".into())
                })?;
                let valset = load_instances(valset)?;
                if valset.is_empty() {
                    return Err(Error::EmptyValidationSet);
                }

                let cache_dir = cache_dir
                    .clone()
                    .or_else(|| std::env::var(llm::env::CACHE_DIR).ok().map(PathBuf::from))
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "no cache directory configured (set cache_dir or {})",
                            llm::env::CACHE_DIR
                        ))
                    })?;
                let cache = ResponseCache::new(cache_dir);

                let replay = replay.unwrap_or_else(|| {
                    std::env::var(llm::env::REPLAY)
                        .map(|v| v == "1" || v.eq_ignore_ascii_case("true"))
                        .unwrap_or(false)
                });
                let backend = if replay {
                    SamplingBackend::replay(cache)
                } else {
                    let base_url = base_url
                        .clone()
                        .or_else(|| std::env::var(llm::env::BASE_URL).ok())
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "no endpoint configured (set base_url or {})",
                                llm::env::BASE_URL
                            ))
                        })?;
                    let api_key = std::env::var(llm::env::API_KEY).ok();
                    let mut transport = HttpTransport::new(base_url, api_key);
                    transport.send_top_k = *send_top_k;
                    SamplingBackend::live(cache, Box::new(transport), *supports_n)
                };

                Ok(BuiltProblem::Llm(Box::new(LlmProblem {
                    valset,
                    pool: ExemplarPool {
                        pool: pool_instances,
                        format_exemplar,
                    },
                    backend,
                    cfg: eval.clone(),
                })))
            }
        }
    }
}

/// Committed replay fixture: masks with their recorded metrics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayFixture {
    pub entries: Vec<ReplayExpectation>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayExpectation {
    pub mask: String,
    pub acc: f64,
    pub ece: f64,
}

impl ReplayFixture {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
