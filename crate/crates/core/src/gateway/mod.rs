//! Respondent backends.
//!
//! [`Gateway`] turns a [`RenderedPrompt`] into raw reply text, consulting a
//! content-addressed cache first, and [`collect_responses`] fans a whole
//! population out over a bounded worker pool, producing one
//! [`ResponseRecord`] per persona and probe in a deterministic order.

mod cache;
mod limiter;
mod parse;
mod remote;
pub mod synthetic;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{cache_key, ResponseCache};
pub use limiter::TokenBucket;
pub use parse::parse_rating;
pub use synthetic::{synthetic_mean, synthetic_respond, SyntheticRespondentParams};

use crate::country::Language;
use crate::error::{Error, Result};
use crate::persona::Persona;
use crate::prompt::{render_all_probes, CatalogSet, ProbeKind, RenderedPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff after the `attempt`-th failure (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub system_prompt: Option<String>,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub retry: RetryPolicy,
    /// Requests per second; zero or negative disables limiting.
    pub rate_limit_rps: f64,
    pub burst: u32,
    pub timeout_secs: u64,
    /// Maximum in-flight requests.
    pub concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    /// Largest tolerated fraction of terminally failed probes.
    pub failure_threshold: f64,
    pub synthetic: Option<SyntheticRespondentParams>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Synthetic,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo-1106".into(),
            temperature: 1.0,
            max_tokens: 4,
            system_prompt: None,
            api_key_env: "OPENAI_API_KEY".into(),
            retry: RetryPolicy::default(),
            rate_limit_rps: 5.0,
            burst: 5,
            timeout_secs: 60,
            concurrency: 8,
            cache_dir: None,
            failure_threshold: 0.05,
            synthetic: None,
        }
    }
}

impl BackendConfig {
    pub fn synthetic(params: SyntheticRespondentParams) -> Self {
        Self {
            kind: BackendKind::Synthetic,
            rate_limit_rps: 0.0,
            synthetic: Some(params),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::Config("retry.max_attempts must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(Error::Config("failure_threshold must lie in [0, 1]".into()));
        }
        match (&self.kind, &self.synthetic) {
            (BackendKind::Synthetic, None) => {
                Err(Error::Config("synthetic backend requires synthetic parameters".into()))
            }
            (BackendKind::Synthetic, Some(p)) => p.validate(),
            (BackendKind::Remote, _) => Ok(()),
        }
    }

    /// Short, stable description recorded on every response so a run can
    /// be audited after the fact.
    pub fn fingerprint(&self) -> String {
        match self.kind {
            BackendKind::Remote => {
                let system = self
                    .system_prompt
                    .as_deref()
                    .map(|s| hex::encode(&Sha256::digest(s.as_bytes())[..6]))
                    .unwrap_or_else(|| "none".into());
                format!(
                    "remote;endpoint={};model={};temperature={};max_tokens={};system={}",
                    self.endpoint, self.model, self.temperature, self.max_tokens, system
                )
            }
            BackendKind::Synthetic => {
                let params = serde_json::to_vec(&self.synthetic).expect("params serialize");
                format!("synthetic;params={}", hex::encode(&Sha256::digest(&params)[..8]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub persona_id: String,
    pub probe: ProbeKind,
    pub rating: u8,
    pub language_code: Language,
    pub masked: bool,
    pub backend: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeFailure {
    pub persona_id: String,
    pub probe: ProbeKind,
    pub reason: String,
}

/// Prompting conditions for one persona.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAssignment {
    pub language: Language,
    pub masked: bool,
}

/// Per-persona prompting conditions, keyed by persona id.
pub type CollectionPlan = BTreeMap<String, PromptAssignment>;

#[derive(Debug, Clone, Default)]
pub struct Collection {
    pub records: Vec<ResponseRecord>,
    pub failures: Vec<ProbeFailure>,
}

enum Backend {
    Remote(remote::RemoteClient),
    Synthetic(SyntheticRespondentParams),
}

pub struct Gateway {
    config: BackendConfig,
    fingerprint: String,
    backend: Backend,
    cache: Option<ResponseCache>,
    limiter: TokenBucket,
    backend_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let backend = match config.kind {
            BackendKind::Remote => Backend::Remote(remote::RemoteClient::new(&config)?),
            BackendKind::Synthetic => Backend::Synthetic(config.synthetic.clone().expect("validated")),
        };
        let cache = config.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
        Ok(Self {
            fingerprint: config.fingerprint(),
            limiter: TokenBucket::new(config.rate_limit_rps, config.burst),
            config,
            backend,
            cache,
            backend_calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Calls that reached the backend (cache misses).
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::Relaxed)
    }

    /// Cache key: backend fingerprint (model and sampling parameters),
    /// persona, probe and the full prompt text.
    pub fn cache_key(&self, prompt: &RenderedPrompt) -> String {
        cache_key(&[&self.fingerprint, &prompt.persona_id, prompt.probe.key(), &prompt.text])
    }

    pub fn complete(&self, prompt: &RenderedPrompt) -> Result<String> {
        let key = self.cache_key(prompt);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key)? {
                return Ok(hit);
            }
        }
        self.backend_calls.fetch_add(1, Ordering::Relaxed);
        let text = match &self.backend {
            Backend::Remote(client) => {
                self.limiter.acquire();
                client.complete(&prompt.text, self.config.system_prompt.as_deref())?
            }
            Backend::Synthetic(params) => synthetic::synthetic_rating(
                &prompt.persona_id,
                &prompt.disclosed,
                prompt.probe,
                prompt.language_code,
                params,
            )
            .to_string(),
        };
        if let Some(cache) = &self.cache {
            cache.put(&key, &text)?;
        }
        Ok(text)
    }

    /// Render and answer all five probes for every persona in `plan`.
    pub fn collect(&self, personas: &[Persona], catalogs: &CatalogSet, plan: &CollectionPlan) -> Result<Collection> {
        // Configuration problems surface before any request is sent.
        for persona in personas {
            let assignment = plan
                .get(&persona.id)
                .ok_or_else(|| Error::Config(format!("plan has no entry for persona {}", persona.id)))?;
            if !catalogs.contains_key(&assignment.language) {
                return Err(Error::Config(format!("no catalog loaded for language {}", assignment.language)));
            }
        }

        let mut jobs = Vec::with_capacity(personas.len() * ProbeKind::ALL.len());
        let mut failures = Vec::new();
        for persona in personas {
            let assignment = plan[&persona.id];
            match render_all_probes(persona, &catalogs[&assignment.language], assignment.masked) {
                Ok(prompts) => jobs.extend(prompts),
                Err(e) => {
                    log::warn!("persona {}: {e}", persona.id);
                    failures.extend(ProbeKind::ALL.map(|probe| ProbeFailure {
                        persona_id: persona.id.clone(),
                        probe,
                        reason: e.to_string(),
                    }));
                }
            }
        }

        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(usize, Result<ResponseRecord, String>)>> = Mutex::new(Vec::with_capacity(jobs.len()));
        let workers = self.config.concurrency.min(jobs.len()).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    let Some(prompt) = jobs.get(idx) else { break };
                    let outcome = self
                        .complete(prompt)
                        .and_then(|raw| parse_rating(&raw).map(|rating| (raw, rating)))
                        .map(|(raw, rating)| ResponseRecord {
                            persona_id: prompt.persona_id.clone(),
                            probe: prompt.probe,
                            rating,
                            language_code: prompt.language_code,
                            masked: prompt.masked,
                            backend: self.fingerprint.clone(),
                            raw,
                        })
                        .map_err(|e| e.to_string());
                    results.lock().expect("results poisoned").push((idx, outcome));
                });
            }
        });

        let mut results = results.into_inner().expect("results poisoned");
        results.sort_unstable_by_key(|(idx, _)| *idx);
        let mut records = Vec::with_capacity(results.len());
        for (idx, outcome) in results {
            match outcome {
                Ok(record) => records.push(record),
                Err(reason) => {
                    let prompt = &jobs[idx];
                    log::warn!("persona {} probe {}: {reason}", prompt.persona_id, prompt.probe);
                    failures.push(ProbeFailure {
                        persona_id: prompt.persona_id.clone(),
                        probe: prompt.probe,
                        reason,
                    });
                }
            }
        }
        records.sort_by(|a, b| (&a.persona_id, a.probe).cmp(&(&b.persona_id, b.probe)));
        failures.sort_by(|a, b| (&a.persona_id, a.probe).cmp(&(&b.persona_id, b.probe)));

        let total = personas.len() * ProbeKind::ALL.len();
        if total > 0 && failures.len() as f64 / total as f64 > self.config.failure_threshold {
            return Err(Error::TooManyFailures {
                failed: failures.len(),
                total,
                threshold: self.config.failure_threshold,
            });
        }
        Ok(Collection { records, failures })
    }
}

/// One-shot completion; builds a gateway for `config`.
pub fn complete(prompt: &RenderedPrompt, config: &BackendConfig) -> Result<String> {
    Gateway::new(config.clone())?.complete(prompt)
}

pub fn collect_responses(
    personas: &[Persona],
    catalogs: &CatalogSet,
    plan: &CollectionPlan,
    config: &BackendConfig,
) -> Result<Collection> {
    Gateway::new(config.clone())?.collect(personas, catalogs, plan)
}

pub fn write_records<W: Write>(records: &[ResponseRecord], mut out: W) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_records(records: &[ResponseRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_records(records, std::io::BufWriter::new(file))
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ResponseRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ResponseRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        if !(1..=7).contains(&record.rating) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("rating {} outside 1..=7", record.rating),
            });
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let policy = RetryPolicy {
            max_attempts: 10,
            initial_backoff_ms: 100,
            max_backoff_ms: 1000,
        };
        assert_eq!(policy.backoff(1), Duration::from_millis(100));
        assert_eq!(policy.backoff(2), Duration::from_millis(200));
        assert_eq!(policy.backoff(4), Duration::from_millis(800));
        assert_eq!(policy.backoff(5), Duration::from_millis(1000));
        assert_eq!(policy.backoff(80), Duration::from_millis(1000));
    }

    #[test]
    fn config_validation() {
        let mut c = BackendConfig::synthetic(SyntheticRespondentParams::constant(4.0));
        c.validate().unwrap();
        c.temperature = -0.1;
        assert!(c.validate().is_err());
        let mut c = BackendConfig::synthetic(SyntheticRespondentParams::constant(4.0));
        c.retry.max_attempts = 0;
        assert!(c.validate().is_err());
        let c = BackendConfig {
            synthetic: None,
            ..BackendConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_credential_is_a_config_error() {
        let c = BackendConfig {
            kind: BackendKind::Remote,
            api_key_env: "CULTURAL_FIDELITY_TEST_UNSET_KEY".into(),
            ..BackendConfig::default()
        };
        assert!(matches!(Gateway::new(c), Err(Error::Config(_))));
    }

    #[test]
    fn fingerprint_records_sampling_parameters() {
        let c = BackendConfig {
            kind: BackendKind::Remote,
            ..BackendConfig::default()
        };
        let fp = c.fingerprint();
        assert!(fp.contains("model=gpt-3.5-turbo-1106"));
        assert!(fp.contains("temperature=1"));
    }
}
