//! Chat backends: an OpenAI-compatible HTTP endpoint and the local simulator,
//! behind a shared file cache, retry policy and bounded-parallel batch runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ocean_core::extraction::ExtractionRules;
use ocean_core::inventory::Inventory;
use ocean_core::prompting::{ChatMessage, PromptBundle};
use ocean_core::simulator::{estimate_latent, simulate_direct_answer, simulate_item_answer, SimProfile};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus_io::write_atomic;

/// Environment variable holding the bearer credential for remote backends.
pub const CREDENTIAL_ENV: &str = "OCEAN_API_KEY";

/// Completions between two progress log lines in [`run_batch`].
pub const PROGRESS_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Simulator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    /// Seconds.
    pub request_timeout: f64,
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// First backoff ceiling in seconds; doubles per attempt.
    pub retry_base: f64,
    /// Simulator parameters; ignored by remote backends.
    pub sim: SimProfile,
    /// Distinguishes repeated administrations of the same prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
}

impl BackendConfig {
    pub fn simulator(model_name: impl Into<String>, sim: SimProfile) -> Self {
        BackendConfig {
            kind: BackendKind::Simulator,
            endpoint_url: None,
            model_name: model_name.into(),
            temperature: 0.0,
            max_retries: 3,
            request_timeout: 60.0,
            max_in_flight: 8,
            cache_dir: None,
            retry_base: 1.0,
            sim,
            nonce: None,
        }
    }

    pub fn remote(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Remote,
            endpoint_url: Some(endpoint_url.into()),
            ..BackendConfig::simulator(model_name, SimProfile::default())
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if self.kind == BackendKind::Remote && self.endpoint_url.as_deref().is_none_or(str::is_empty) {
            return bad("remote backend requires an endpoint url");
        }
        if self.model_name.is_empty() {
            return bad("model name is empty");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be >= 1");
        }
        if !(self.request_timeout.is_finite() && self.request_timeout > 0.0) {
            return bad("request timeout must be positive");
        }
        if !(self.retry_base.is_finite() && self.retry_base >= 0.0) {
            return bad("retry base must be >= 0");
        }
        if self.kind == BackendKind::Simulator && !self.sim.is_valid() {
            return bad("simulator needs noise_sd >= 0 and refusal_rate in [0, 1]");
        }
        Ok(())
    }

    /// Copy of this configuration for administration `index` of a repeated run.
    /// Index 0 keeps the plain configuration so its cache entries are shared.
    pub fn for_try(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.nonce = (index > 0).then(|| format!("try{index}"));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub model_name: String,
    pub cached: bool,
    /// Seconds.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "error")]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {code}: {body_excerpt}")]
    HttpStatus { code: u16, body_excerpt: String },
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("environment variable {var} is not set")]
    MissingCredential { var: String },
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl GatewayError {
    /// Whether a retry may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::Transport { .. } => true,
            GatewayError::HttpStatus { code, .. } => *code == 408 || *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Something that turns a prompt into raw text.
pub trait Backend: Send + Sync {
    fn call(&self, bundle: &PromptBundle) -> Result<String, GatewayError>;

    /// Extra cache-key material beyond messages, model and temperature.
    fn cache_variant(&self, bundle: &PromptBundle) -> String;
}

/// OpenAI-compatible `POST {endpoint}/chat/completions`.
pub struct RemoteBackend {
    agent: ureq::Agent,
    url: String,
    model_name: String,
    temperature: f64,
    credential: String,
    nonce: Option<String>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

const EXCERPT_CHARS: usize = 200;

impl RemoteBackend {
    pub fn new(config: &BackendConfig, credential: String) -> Result<Self, GatewayError> {
        let endpoint = config
            .endpoint_url
            .as_deref()
            .ok_or_else(|| GatewayError::InvalidConfig("remote backend requires an endpoint url".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend {
            agent,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            credential,
            nonce: config.nonce.clone(),
        })
    }
}

fn transport(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => GatewayError::Timeout,
        other => GatewayError::Transport { message: other.to_string() },
    }
}

/// Reads `choices[0].message.content`; a null content is an empty completion.
pub fn parse_chat_response(body: &str) -> Result<String, GatewayError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = v
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    match content {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Null => Ok(String::new()),
        _ => Err(GatewayError::MalformedResponse("content is not a string".into())),
    }
}

impl Backend for RemoteBackend {
    fn call(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        let req = ChatRequest { model: &self.model_name, messages: &bundle.messages, temperature: self.temperature };
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.credential))
            .send_json(&req)
            .map_err(transport)?;
        let code = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&code) {
            return Err(GatewayError::HttpStatus { code, body_excerpt: body.chars().take(EXCERPT_CHARS).collect() });
        }
        parse_chat_response(&body)
    }

    fn cache_variant(&self, _bundle: &PromptBundle) -> String {
        self.nonce.clone().unwrap_or_default()
    }
}

/// Local stand-in that answers from cue tags embedded in the dialogue.
pub struct SimulatorBackend {
    profile: SimProfile,
    nonce: Option<String>,
    inventory: Inventory,
    rules: ExtractionRules,
}

impl SimulatorBackend {
    pub fn new(profile: SimProfile, nonce: Option<String>) -> Self {
        SimulatorBackend {
            profile,
            nonce,
            inventory: Inventory::bfi2().expect("bundled key verifies"),
            rules: ExtractionRules::default(),
        }
    }

    fn salt(&self, bundle: &PromptBundle) -> String {
        match &self.nonce {
            Some(n) => format!("{}#{n}", bundle.session_id),
            None => bundle.session_id.clone(),
        }
    }
}

impl Backend for SimulatorBackend {
    fn call(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        let (latent, cues) = estimate_latent(bundle.messages.iter().map(|m| m.content.as_str()), &self.rules);
        let salt = self.salt(bundle);
        match bundle.item_index {
            Some(idx) => {
                let item = self
                    .inventory
                    .item(idx)
                    .ok_or_else(|| GatewayError::InvalidConfig(format!("item {idx} is not in the inventory")))?;
                Ok(simulate_item_answer(item, &latent, cues, &self.profile, &salt))
            }
            None => Ok(simulate_direct_answer(&latent, cues, &self.profile, &salt)),
        }
    }

    fn cache_variant(&self, bundle: &PromptBundle) -> String {
        let p = &self.profile;
        format!(
            "sim:noise={}:refusal={}:length={}:seed={}:salt={}",
            p.noise_sd,
            p.refusal_rate,
            p.length_noise,
            p.seed,
            self.salt(bundle)
        )
    }
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    messages: &'a [ChatMessage],
    model: &'a str,
    temperature: f64,
    variant: &'a str,
}

/// SHA-256 over the canonical JSON of messages, model, temperature and variant.
pub fn cache_key(messages: &[ChatMessage], model: &str, temperature: f64, variant: &str) -> String {
    let json = serde_json::to_vec(&KeyMaterial { messages, model, temperature, variant }).expect("key serializes");
    hex::encode(Sha256::digest(&json))
}

/// Stored completion, one file per key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model_name: String,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
#[error("cache entry {path} is corrupt: {reason}")]
pub struct CacheCorrupt {
    pub path: PathBuf,
    pub reason: String,
}

/// Content-addressed completion cache under one directory.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheRecord>, CacheCorrupt> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CacheCorrupt { path, reason: e.to_string() }),
        };
        let rec: CacheRecord =
            serde_json::from_slice(&bytes).map_err(|e| CacheCorrupt { path: path.clone(), reason: e.to_string() })?;
        if rec.key != key {
            return Err(CacheCorrupt { path, reason: "stored key does not match file name".into() });
        }
        Ok(Some(rec))
    }

    pub fn put(&self, rec: &CacheRecord) -> std::io::Result<()> {
        let bytes = serde_json::to_vec(rec).expect("record serializes");
        write_atomic(&self.path_for(&rec.key), &bytes)
    }
}

/// Counters shared by all calls through one gateway.
#[derive(Debug, Default)]
pub struct GatewayStats {
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    cache_warnings: AtomicUsize,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
}

impl GatewayStats {
    /// Backend invocations, retries included.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    /// Corrupt cache entries that were replaced by a live call.
    pub fn cache_warnings(&self) -> usize {
        self.cache_warnings.load(Ordering::SeqCst)
    }

    /// Largest number of simultaneously pending backend calls seen.
    pub fn in_flight_high_water(&self) -> usize {
        self.high_water.load(Ordering::SeqCst)
    }
}

/// One configured backend plus cache and retry policy.
pub struct Gateway {
    config: BackendConfig,
    backend: Box<dyn Backend>,
    cache: Option<Cache>,
    stats: GatewayStats,
}

impl Gateway {
    /// Builds the backend named by `config`. Remote backends read the
    /// credential from [`CREDENTIAL_ENV`] here, before any network activity.
    pub fn new(config: BackendConfig) -> Result<Self, GatewayError> {
        let credential = std::env::var(CREDENTIAL_ENV).ok().filter(|k| !k.is_empty());
        Self::with_credential(config, credential)
    }

    pub fn with_credential(config: BackendConfig, credential: Option<String>) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend: Box<dyn Backend> = match config.kind {
            BackendKind::Remote => {
                let key = credential.ok_or_else(|| GatewayError::MissingCredential { var: CREDENTIAL_ENV.into() })?;
                Box::new(RemoteBackend::new(&config, key)?)
            }
            BackendKind::Simulator => Box::new(SimulatorBackend::new(config.sim, config.nonce.clone())),
        };
        Ok(Self::with_backend(config, backend))
    }

    /// Uses a caller-supplied backend; the config still drives caching and retries.
    pub fn with_backend(config: BackendConfig, backend: Box<dyn Backend>) -> Self {
        let cache = config.cache_dir.clone().map(Cache::new);
        Gateway { config, backend, cache, stats: GatewayStats::default() }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn stats(&self) -> &GatewayStats {
        &self.stats
    }

    pub fn key_for(&self, bundle: &PromptBundle) -> String {
        cache_key(
            &bundle.messages,
            &self.config.model_name,
            self.config.temperature,
            &self.backend.cache_variant(bundle),
        )
    }

    /// Returns the cached completion if present, otherwise calls the backend
    /// with retries and stores the result.
    pub fn complete(&self, bundle: &PromptBundle) -> Result<Completion, GatewayError> {
        let start = Instant::now();
        let key = self.cache.as_ref().map(|_| self.key_for(bundle));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            match cache.get(key) {
                Ok(Some(rec)) => {
                    self.stats.cache_hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(Completion {
                        text: rec.text,
                        model_name: rec.model_name,
                        cached: true,
                        latency: start.elapsed().as_secs_f64(),
                    });
                }
                Ok(None) => {}
                Err(e) => {
                    self.stats.cache_warnings.fetch_add(1, Ordering::SeqCst);
                    log::warn!("{e}; calling the backend instead");
                }
            }
        }
        let text = self.call_with_retry(bundle)?;
        if let (Some(cache), Some(key)) = (&self.cache, key) {
            let rec = CacheRecord { key, model_name: self.config.model_name.clone(), text: text.clone() };
            if let Err(e) = cache.put(&rec) {
                log::warn!("could not write cache entry {}: {e}", rec.key);
            }
        }
        Ok(Completion {
            text,
            model_name: self.config.model_name.clone(),
            cached: false,
            latency: start.elapsed().as_secs_f64(),
        })
    }

    fn call_once(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        self.stats.backend_calls.fetch_add(1, Ordering::SeqCst);
        let now = self.stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.stats.high_water.fetch_max(now, Ordering::SeqCst);
        let out = self.backend.call(bundle);
        self.stats.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn call_with_retry(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        let mut attempt = 0u32;
        loop {
            match self.call_once(bundle) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    let delay = backoff_delay(self.config.retry_base, attempt, &mut rand::rng());
                    log::debug!("attempt {} failed ({e}); retrying in {delay:.3}s", attempt + 1);
                    std::thread::sleep(Duration::from_secs_f64(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Full-jitter exponential backoff: uniform in `[0, base * 2^attempt]` seconds.
pub fn backoff_delay<R: Rng>(base: f64, attempt: u32, rng: &mut R) -> f64 {
    let ceiling = base * 2f64.powi(attempt.min(30) as i32);
    if ceiling <= 0.0 {
        0.0
    } else {
        rng.random_range(0.0..=ceiling)
    }
}

/// Runs all bundles with at most `max_in_flight` concurrent calls. Results are
/// in input order; failures occupy their slot without stopping the batch.
pub fn run_batch(gateway: &Gateway, bundles: &[PromptBundle]) -> Vec<Result<Completion, GatewayError>> {
    let n = bundles.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = gateway.config.max_in_flight.min(n);
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Completion, GatewayError>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = gateway.complete(&bundles[i]);
                slots.lock().expect("slot lock")[i] = Some(result);
                let finished = done.fetch_add(1, Ordering::SeqCst) + 1;
                if finished.is_multiple_of(PROGRESS_EVERY) || finished == n {
                    log::info!("{}: {finished}/{n} completions", gateway.config.model_name);
                }
            });
        }
    });
    slots.into_inner().expect("slot lock").into_iter().map(|r| r.expect("every slot filled")).collect()
}
