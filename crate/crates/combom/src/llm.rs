//! Prompt construction, sampling backend, persistent response cache, and a
//! deterministic replay mode.
//!
//! Cache keys are per sample (the sample index is part of the digest), so the
//! sample count can change without invalidating earlier entries. The cache
//! directory is the source of truth: one JSON file per key, written via
//! temp-file rename so a crash never leaves a torn entry.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const OPTION_LETTERS: [char; 10] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J'];

/// Sampling controls sent to the endpoint. Defaults: temperature 0.7,
/// top-p 0.8, top-k 20, 16 samples, 64 max tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub n_samples: usize,
    pub max_tokens: u32,
    pub model_name: String,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.8,
            top_k: 20,
            n_samples: 16,
            max_tokens: 64,
            model_name: String::new(),
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(Error::InvalidParameter("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidParameter("top_p must be in (0, 1]".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// One multiple-choice instance; also the exemplar record format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    /// Ground-truth option letter.
    pub answer: char,
}

impl Instance {
    pub fn validate(&self) -> Result<()> {
        if self.options.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "instance {}: no options",
                self.id
            )));
        }
        if self.options.len() > 10 {
            return Err(Error::TooManyOptions {
                got: self.options.len(),
            });
        }
        let max = OPTION_LETTERS[self.options.len() - 1];
        if !self.answer.is_ascii_uppercase() || self.answer < 'A' || self.answer > max {
            return Err(Error::InvalidParameter(format!(
                "instance {}: answer {:?} outside A..={max}",
                self.id, self.answer
            )));
        }
        Ok(())
    }
}

/// Parse a JSONL dataset of instances, validating every record.
pub fn parse_instances(text: &str) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(line).map_err(|e| Error::Dataset {
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        inst.validate().map_err(|e| Error::Dataset {
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    parse_instances(&std::fs::read_to_string(path)?)
}

fn render_block(question: &str, options: &[String]) -> Result<String> {
    if options.len() > 10 {
        return Err(Error::TooManyOptions { got: options.len() });
    }
    let mut block = String::new();
    block.push_str("Question:\n");
    block.push_str(question);
    block.push_str("\nOptions:\n");
    for (i, option) in options.iter().enumerate() {
        block.push_str(&format!("{}. {}\n", OPTION_LETTERS[i], option));
    }
    block.push_str("The answer is:");
    Ok(block)
}

/// Render the full prompt: instruction sentence with the domain substituted,
/// the reserved format exemplar, the selected exemplars in pool order, then
/// the query block ending in "The answer is:".
pub fn render_prompt(
    question: &str,
    options: &[String],
    exemplars: &[&Instance],
    format_exemplar: &Instance,
    domain: &str,
) -> Result<String> {
    let mut prompt = format!(
        "The following are multiple choice questions (with examples) about {domain}. \
         When you provide the answer to the last question, please use the option letter \
         without any modification, and provide the answer directly, with no formatting, \
         no bolding, and no markup. For example, (A). The final answer must only be the \
         letter corresponding to the correct answer.\n\n"
    );
    for exemplar in std::iter::once(format_exemplar).chain(exemplars.iter().copied()) {
        prompt.push_str(&render_block(&exemplar.question, &exemplar.options)?);
        prompt.push_str(&format!(" ({})\n\n", exemplar.answer));
    }
    prompt.push_str(&render_block(question, options)?);
    Ok(prompt)
}

/// Extracted answer label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnswerLabel {
    Option(char),
    Invalid,
}

impl fmt::Display for AnswerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerLabel::Option(c) => write!(f, "{c}"),
            AnswerLabel::Invalid => write!(f, "INVALID"),
        }
    }
}

/// Scan the final non-empty line for the first option letter A-J written as
/// `(X)`, `X.`, `X)`, or a bare `X` followed only by non-alphanumerics.
/// Total and deterministic; unparseable completions map to `Invalid`.
pub fn extract_answer(completion: &str) -> AnswerLabel {
    let Some(line) = completion.lines().rev().find(|l| !l.trim().is_empty()) else {
        return AnswerLabel::Invalid;
    };
    let chars: Vec<char> = line.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !(c.is_ascii_uppercase() && ('A'..='J').contains(&c)) {
            continue;
        }
        if i > 0 && chars[i - 1].is_alphanumeric() {
            continue;
        }
        match chars.get(i + 1) {
            Some(')') | Some('.') => return AnswerLabel::Option(c),
            next => {
                let bare_tail = next.is_none()
                    || chars[i + 1..].iter().all(|t| !t.is_alphanumeric());
                if bare_tail {
                    return AnswerLabel::Option(c);
                }
            }
        }
    }
    AnswerLabel::Invalid
}

/// Content-addressed cache key over everything that determines a completion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheKeyFields {
    pub model_name: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub max_tokens: u32,
    pub sample_index: usize,
}

impl CacheKeyFields {
    pub fn new(prompt: &str, params: &SamplingParams, sample_index: usize) -> Self {
        Self {
            model_name: params.model_name.clone(),
            prompt: prompt.to_string(),
            temperature: params.temperature,
            top_p: params.top_p,
            top_k: params.top_k,
            max_tokens: params.max_tokens,
            sample_index,
        }
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("key fields serialize");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// On-disk cache entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key_fields: CacheKeyFields,
    pub completion_text: String,
    pub created_at: u64,
}

/// One file per key under `<dir>/<first two digest hex chars>/<digest>.json`.
#[derive(Clone, Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(&digest[..2]).join(format!("{digest}.json"))
    }

    pub fn read(&self, fields: &CacheKeyFields) -> Result<Option<String>> {
        let path = self.path_for(&fields.digest());
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let entry: CacheEntry = serde_json::from_str(&text)?;
                Ok(Some(entry.completion_text))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn write(&self, fields: &CacheKeyFields, completion_text: &str) -> Result<()> {
        let digest = fields.digest();
        let path = self.path_for(&digest);
        std::fs::create_dir_all(path.parent().expect("cache path has parent"))?;
        let entry = CacheEntry {
            key_fields: fields.clone(),
            completion_text: completion_text.to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(&entry)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// A chat-completions request: the prompt plus effective sampling controls.
#[derive(Clone, Debug)]
pub struct ChatRequest {
    pub prompt: String,
    pub params: SamplingParams,
    /// Completions requested in this call.
    pub n: usize,
}

/// Transport behind the live backend; swapped out in tests.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>>;
}

/// OpenAI-compatible chat-completions client over HTTP.
pub struct HttpTransport {
    base_url: String,
    api_key: Option<String>,
    /// Pass top_k as an extension field; servers that reject it should have
    /// this disabled.
    pub send_top_k: bool,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key,
            send_top_k: true,
            client: reqwest::blocking::Client::new(),
        }
    }
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let mut body = serde_json::json!({
            "model": request.params.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "n": request.n,
            "max_tokens": request.params.max_tokens,
        });
        if self.send_top_k {
            body["top_k"] = serde_json::json!(request.params.top_k);
        }
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::EndpointExhausted {
            attempts: 1,
            detail: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::EndpointExhausted {
                attempts: 1,
                detail: format!("HTTP {status}"),
            });
        }
        let parsed: ChatCompletionResponse =
            resp.json().map_err(|e| Error::EndpointExhausted {
                attempts: 1,
                detail: format!("bad response body: {e}"),
            })?;
        Ok(parsed
            .choices
            .into_iter()
            .map(|c| c.message.content)
            .collect())
    }
}

/// Where completions come from.
pub enum BackendMode {
    /// Every sample must already be cached; a miss is an error.
    Replay,
    Live {
        transport: Box<dyn ChatTransport>,
        /// Whether a fresh prompt may fetch all samples in one n-completions
        /// call. Partial misses are always fetched one request per sample so
        /// the per-sample keys stay stable.
        supports_n: bool,
        max_attempts: u32,
        /// Base backoff between retries.
        backoff: std::time::Duration,
    },
}

/// Cache-backed sampling backend.
///
/// Misses are fetched under a lock with a cache re-check, so concurrent
/// callers asking for the same key produce at most one endpoint request.
pub struct SamplingBackend {
    cache: ResponseCache,
    mode: BackendMode,
    requests: AtomicU64,
    fetch_lock: std::sync::Mutex<()>,
}

impl SamplingBackend {
    pub fn replay(cache: ResponseCache) -> Self {
        Self {
            cache,
            mode: BackendMode::Replay,
            requests: AtomicU64::new(0),
            fetch_lock: std::sync::Mutex::new(()),
        }
    }

    pub fn live(cache: ResponseCache, transport: Box<dyn ChatTransport>, supports_n: bool) -> Self {
        Self {
            cache,
            mode: BackendMode::Live {
                transport,
                supports_n,
                max_attempts: 3,
                backoff: std::time::Duration::from_millis(250),
            },
            requests: AtomicU64::new(0),
            fetch_lock: std::sync::Mutex::new(()),
        }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Network requests issued so far; replay mode never increments it.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn call_with_retries(
        &self,
        transport: &dyn ChatTransport,
        max_attempts: u32,
        backoff: std::time::Duration,
        request: &ChatRequest,
    ) -> Result<Vec<String>> {
        let mut last = String::new();
        for attempt in 0..max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(backoff * 2u32.pow(attempt - 1));
            }
            self.requests.fetch_add(1, Ordering::SeqCst);
            match transport.complete(request) {
                Ok(texts) => return Ok(texts),
                Err(e) => last = e.to_string(),
            }
        }
        Err(Error::EndpointExhausted {
            attempts: max_attempts,
            detail: last,
        })
    }

    /// Return exactly `params.n_samples` completions for the prompt.
    pub fn sample_completions(&self, prompt: &str, params: &SamplingParams) -> Result<Vec<String>> {
        params.validate()?;
        let m = params.n_samples;
        let mut completions: Vec<Option<String>> = Vec::with_capacity(m);
        let mut missing: Vec<usize> = Vec::new();
        for index in 0..m {
            let fields = CacheKeyFields::new(prompt, params, index);
            match self.cache.read(&fields)? {
                Some(text) => completions.push(Some(text)),
                None => {
                    completions.push(None);
                    missing.push(index);
                }
            }
        }
        if missing.is_empty() {
            return Ok(completions.into_iter().map(|c| c.expect("all hits")).collect());
        }
        match &self.mode {
            BackendMode::Replay => {
                let fields = CacheKeyFields::new(prompt, params, missing[0]);
                Err(Error::ReplayMiss {
                    key: fields.digest(),
                })
            }
            BackendMode::Live {
                transport,
                supports_n,
                max_attempts,
                backoff,
            } => {
                let _fetch = self.fetch_lock.lock().expect("fetch lock");
                // Another caller may have filled the keys while we waited.
                missing.retain(|&index| {
                    let fields = CacheKeyFields::new(prompt, params, index);
                    match self.cache.read(&fields) {
                        Ok(Some(text)) => {
                            completions[index] = Some(text);
                            false
                        }
                        _ => true,
                    }
                });
                if missing.is_empty() {
                    return Ok(completions
                        .into_iter()
                        .map(|c| c.expect("filled all samples"))
                        .collect());
                }
                if *supports_n && missing.len() == m {
                    let request = ChatRequest {
                        prompt: prompt.to_string(),
                        params: params.clone(),
                        n: m,
                    };
                    let texts =
                        self.call_with_retries(transport.as_ref(), *max_attempts, *backoff, &request)?;
                    if texts.len() < m {
                        return Err(Error::EndpointExhausted {
                            attempts: *max_attempts,
                            detail: format!("endpoint returned {} of {m} completions", texts.len()),
                        });
                    }
                    for (index, text) in texts.iter().take(m).enumerate() {
                        let fields = CacheKeyFields::new(prompt, params, index);
                        self.cache.write(&fields, text)?;
                        completions[index] = Some(text.clone());
                    }
                } else {
                    for &index in &missing {
                        let request = ChatRequest {
                            prompt: prompt.to_string(),
                            params: params.clone(),
                            n: 1,
                        };
                        let texts = self.call_with_retries(
                            transport.as_ref(),
                            *max_attempts,
                            *backoff,
                            &request,
                        )?;
                        let text = texts.into_iter().next().ok_or_else(|| {
                            Error::EndpointExhausted {
                                attempts: *max_attempts,
                                detail: "endpoint returned zero completions".into(),
                            }
                        })?;
                        let fields = CacheKeyFields::new(prompt, params, index);
                        self.cache.write(&fields, &text)?;
                        completions[index] = Some(text);
                    }
                }
                Ok(completions
                    .into_iter()
                    .map(|c| c.expect("filled all samples"))
                    .collect())
            }
        }
    }
}

/// Environment variable names for endpoint configuration.
pub mod env {
    pub const BASE_URL: &str = "COMBOM_BASE_URL";
    pub const API_KEY: &str = "COMBOM_API_KEY";
    pub const CACHE_DIR: &str = "COMBOM_CACHE_DIR";
    pub const REPLAY: &str = "COMBOM_REPLAY";
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    fn instance(id: &str, question: &str, options: &[&str], answer: char) -> Instance {
        Instance {
            id: id.into(),
            question: question.into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            answer,
        }
    }

    fn format_exemplar() -> Instance {
        instance("fmt", "What is 1 + 1?", &["1", "2", "3", "4"], 'B')
    }

    #[test]
    fn prompt_is_deterministic_and_ends_with_answer_cue() {
        let fmt = format_exemplar();
        let e1 = instance("e1", "What is 2 + 2?", &["3", "4"], 'B');
        let e2 = instance("e2", "What is 3 * 3?", &["9", "12"], 'A');
        let options = vec!["10".to_string(), "11".to_string()];
        let a = render_prompt("What is 5 + 5?", &options, &[&e1, &e2], &fmt, "arithmetic").unwrap();
        let b = render_prompt("What is 5 + 5?", &options, &[&e1, &e2], &fmt, "arithmetic").unwrap();
        assert_eq!(a, b);
        assert!(a.ends_with("The answer is:"));
        assert!(a.starts_with("The following are multiple choice questions (with examples) about arithmetic."));
        // Exemplars appear after the format exemplar, in the given order.
        let fmt_pos = a.find("What is 1 + 1?").unwrap();
        let e1_pos = a.find("What is 2 + 2?").unwrap();
        let e2_pos = a.find("What is 3 * 3?").unwrap();
        let q_pos = a.find("What is 5 + 5?").unwrap();
        assert!(fmt_pos < e1_pos && e1_pos < e2_pos && e2_pos < q_pos);
    }

    #[test]
    fn prompt_zero_exemplars_keeps_format_exemplar_only() {
        let fmt = format_exemplar();
        let options = vec!["x".to_string()];
        let prompt = render_prompt("Q?", &options, &[], &fmt, "tests").unwrap();
        assert!(prompt.contains("What is 1 + 1?"));
        assert_eq!(prompt.matches("Question:").count(), 2);
    }

    #[test]
    fn prompt_rejects_more_than_ten_options() {
        let fmt = format_exemplar();
        let options: Vec<String> = (0..11).map(|i| i.to_string()).collect();
        assert!(matches!(
            render_prompt("Q?", &options, &[], &fmt, "tests"),
            Err(Error::TooManyOptions { got: 11 })
        ));
    }

    #[test]
    fn extract_answer_examples() {
        assert_eq!(extract_answer("(A)"), AnswerLabel::Option('A'));
        assert_eq!(extract_answer("The answer is: C"), AnswerLabel::Option('C'));
        assert_eq!(extract_answer("I am not sure."), AnswerLabel::Invalid);
        assert_eq!(extract_answer("B."), AnswerLabel::Option('B'));
        assert_eq!(extract_answer("D) because it fits"), AnswerLabel::Option('D'));
        assert_eq!(extract_answer("thinking...\n\n (J) "), AnswerLabel::Option('J'));
        assert_eq!(extract_answer("the answer is K"), AnswerLabel::Invalid);
        assert_eq!(extract_answer(""), AnswerLabel::Invalid);
        assert_eq!(extract_answer("Answer: A"), AnswerLabel::Option('A'));
        // 'I' embedded in a sentence is not a bare answer.
        assert_eq!(extract_answer("I think it could be anything"), AnswerLabel::Invalid);
        // ...but a trailing standalone letter is.
        assert_eq!(extract_answer("my final answer: I"), AnswerLabel::Option('I'));
    }

    #[test]
    fn cache_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let params = SamplingParams::default();
        let fields = CacheKeyFields::new("prompt text", &params, 3);
        assert!(cache.read(&fields).unwrap().is_none());
        let text = "The answer is: (C)\nwith trailing\tbytes";
        cache.write(&fields, text).unwrap();
        assert_eq!(cache.read(&fields).unwrap().as_deref(), Some(text));
    }

    #[test]
    fn cache_keys_separate_every_field() {
        let params = SamplingParams::default();
        let base = CacheKeyFields::new("p", &params, 0);
        let mut other = base.clone();
        other.sample_index = 1;
        assert_ne!(base.digest(), other.digest());
        let mut other = base.clone();
        other.temperature = 0.71;
        assert_ne!(base.digest(), other.digest());
        let mut other = base.clone();
        other.prompt = "q".into();
        assert_ne!(base.digest(), other.digest());
        assert_eq!(base.digest(), CacheKeyFields::new("p", &params, 0).digest());
    }

    struct ScriptedTransport {
        responses: Mutex<Vec<Vec<String>>>,
    }

    impl ChatTransport for ScriptedTransport {
        fn complete(&self, request: &ChatRequest) -> Result<Vec<String>> {
            let mut lock = self.responses.lock().unwrap();
            if lock.is_empty() {
                // Default scripted answer: one completion per requested n.
                return Ok((0..request.n).map(|i| format!("({})", OPTION_LETTERS[i % 4])).collect());
            }
            Ok(lock.remove(0))
        }
    }

    #[test]
    fn replay_mode_serves_cached_samples_in_order_and_errors_on_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let params = SamplingParams {
            n_samples: 4,
            ..SamplingParams::default()
        };
        for i in 0..4 {
            let fields = CacheKeyFields::new("p", &params, i);
            cache.write(&fields, &format!("completion {i}")).unwrap();
        }
        let backend = SamplingBackend::replay(ResponseCache::new(dir.path()));
        let texts = backend.sample_completions("p", &params).unwrap();
        assert_eq!(texts, vec!["completion 0", "completion 1", "completion 2", "completion 3"]);
        assert_eq!(backend.request_count(), 0);

        let params = SamplingParams {
            n_samples: 5,
            ..params
        };
        let err = backend.sample_completions("p", &params).unwrap_err();
        match err {
            Error::ReplayMiss { key } => {
                assert_eq!(key, CacheKeyFields::new("p", &params, 4).digest());
            }
            other => panic!("expected ReplayMiss, got {other}"),
        }
    }

    #[test]
    fn live_mode_counts_requests_and_writes_through() {
        let dir = tempfile::tempdir().unwrap();
        let params = SamplingParams {
            n_samples: 16,
            ..SamplingParams::default()
        };
        // Pre-seed 10 of 16 samples.
        {
            let cache = ResponseCache::new(dir.path());
            for i in 0..10 {
                let fields = CacheKeyFields::new("p", &params, i);
                cache.write(&fields, &format!("cached {i}")).unwrap();
            }
        }
        let transport = ScriptedTransport {
            responses: Mutex::new(vec![]),
        };
        let backend = SamplingBackend::live(
            ResponseCache::new(dir.path()),
            Box::new(transport),
            true,
        );
        let texts = backend.sample_completions("p", &params).unwrap();
        assert_eq!(texts.len(), 16);
        // Partial misses go one request per missing sample.
        assert_eq!(backend.request_count(), 6);

        // Second identical call: all cached, zero extra requests.
        let again = backend.sample_completions("p", &params).unwrap();
        assert_eq!(again, texts);
        assert_eq!(backend.request_count(), 6);
    }

    #[test]
    fn live_mode_uses_single_call_for_fresh_prompt_when_supported() {
        let dir = tempfile::tempdir().unwrap();
        let params = SamplingParams {
            n_samples: 8,
            ..SamplingParams::default()
        };
        let transport = ScriptedTransport {
            responses: Mutex::new(vec![(0..8).map(|i| format!("fresh {i}")).collect()]),
        };
        let backend = SamplingBackend::live(
            ResponseCache::new(dir.path()),
            Box::new(transport),
            true,
        );
        let texts = backend.sample_completions("fresh prompt", &params).unwrap();
        assert_eq!(texts[0], "fresh 0");
        assert_eq!(backend.request_count(), 1);

        // Without n-support the same fresh fetch costs one request per sample.
        let dir2 = tempfile::tempdir().unwrap();
        let backend = SamplingBackend::live(
            ResponseCache::new(dir2.path()),
            Box::new(ScriptedTransport {
                responses: Mutex::new(vec![]),
            }),
            false,
        );
        let texts = backend.sample_completions("fresh prompt", &params).unwrap();
        assert_eq!(texts.len(), 8);
        assert_eq!(backend.request_count(), 8);
    }

    struct FailingTransport;

    impl ChatTransport for FailingTransport {
        fn complete(&self, _request: &ChatRequest) -> Result<Vec<String>> {
            Err(Error::EndpointExhausted {
                attempts: 1,
                detail: "HTTP 503".into(),
            })
        }
    }

    #[test]
    fn live_mode_reports_exhausted_retries() {
        let dir = tempfile::tempdir().unwrap();
        let mut backend = SamplingBackend::live(
            ResponseCache::new(dir.path()),
            Box::new(FailingTransport),
            true,
        );
        if let BackendMode::Live { backoff, .. } = &mut backend.mode {
            *backoff = std::time::Duration::from_millis(1);
        }
        let params = SamplingParams {
            n_samples: 2,
            ..SamplingParams::default()
        };
        let err = backend.sample_completions("p", &params).unwrap_err();
        match err {
            Error::EndpointExhausted { attempts, detail } => {
                assert_eq!(attempts, 3);
                assert!(detail.contains("503"));
            }
            other => panic!("unexpected error {other}"),
        }
        assert_eq!(backend.request_count(), 3);
    }

    #[test]
    fn concurrent_same_key_requests_are_deduplicated() {
        let dir = tempfile::tempdir().unwrap();
        let params = SamplingParams {
            n_samples: 4,
            ..SamplingParams::default()
        };
        let backend = std::sync::Arc::new(SamplingBackend::live(
            ResponseCache::new(dir.path()),
            Box::new(ScriptedTransport {
                responses: Mutex::new(vec![]),
            }),
            true,
        ));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let backend = backend.clone();
                let params = params.clone();
                std::thread::spawn(move || backend.sample_completions("same prompt", &params).unwrap())
            })
            .collect();
        let results: Vec<Vec<String>> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for r in &results[1..] {
            assert_eq!(r, &results[0]);
        }
        // The endpoint saw one request despite four concurrent callers.
        assert_eq!(backend.request_count(), 1);
    }

    #[test]
    fn dataset_parsing_validates_records() {
        let good = r#"{"id":"q1","question":"Q?","options":["a","b"],"answer":"B"}"#;
        let parsed = parse_instances(good).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].answer, 'B');

        let bad_answer = r#"{"id":"q1","question":"Q?","options":["a","b"],"answer":"C"}"#;
        assert!(parse_instances(bad_answer).is_err());
        let bad_json = "{not json}";
        assert!(parse_instances(bad_json).is_err());
        let too_many = serde_json::json!({
            "id": "q1",
            "question": "Q?",
            "options": (0..11).map(|i| i.to_string()).collect::<Vec<_>>(),
            "answer": "A",
        });
        assert!(parse_instances(&too_many.to_string()).is_err());
    }
}
