//! Backend dispatch: each review is annotated by `W` virtual workers, one
//! seed-differentiated completion request per worker.
//!
//! Backends are pluggable behind [`ChatBackend`]; the HTTP client talks to a
//! local chat-completion server, and the mock backend generates responses as
//! a pure function of (prompt, seed) so the whole pipeline runs
//! bit-reproducibly without model weights.

mod http;
mod mock;

pub use http::HttpBackend;
pub use mock::{MockBackend, MockSpec};

use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Connection and sampling parameters for a chat-completion backend.
/// Fields left out of a config file take the defaults below.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Sampling temperature; 0.2 keeps the workers moderately diverse while
    /// staying consistent.
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub backoff_ms: u64,
    /// Global bound on in-flight HTTP requests across all workers.
    pub concurrency: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "default".into(),
            temperature: 0.2,
            max_tokens: 512,
            timeout_secs: 120,
            max_attempts: 3,
            backoff_ms: 250,
            concurrency: 4,
        }
    }
}

impl BackendConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts.max(1),
            backoff_ms: self.backoff_ms,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 250,
        }
    }
}

/// The seeds defining the virtual workers. Worker `w` (1-based) runs with
/// `seeds[w-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerPlan {
    seeds: Vec<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("worker plan needs at least one seed")]
    Empty,
    #[error("worker seeds must be pairwise distinct (seed {0} repeats)")]
    DuplicateSeed(u64),
}

impl WorkerPlan {
    pub fn new(seeds: Vec<u64>) -> Result<Self, PlanError> {
        if seeds.is_empty() {
            return Err(PlanError::Empty);
        }
        for (i, s) in seeds.iter().enumerate() {
            if seeds[..i].contains(s) {
                return Err(PlanError::DuplicateSeed(*s));
            }
        }
        Ok(WorkerPlan { seeds })
    }

    /// The default five-worker plan, seeds 1 through 5.
    pub fn default_five() -> Self {
        WorkerPlan {
            seeds: (1..=5).collect(),
        }
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn worker_count(&self) -> usize {
        self.seeds.len()
    }
}

/// Terminal status of one worker request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseStatus {
    Ok,
    BackendError,
    Timeout,
}

/// One worker's raw completion, with enough bookkeeping to audit retries and
/// to report per-review timing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawWorkerResponse {
    pub worker_index: u32,
    pub seed: u64,
    pub raw: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub status: ResponseStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl RawWorkerResponse {
    pub fn is_ok(&self) -> bool {
        self.status == ResponseStatus::Ok
    }
}

/// One line of the audit log: a worker response tagged with its review.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub review_id: String,
    #[serde(flatten)]
    pub response: RawWorkerResponse,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A chat-completion backend issuing one completion per call.
///
/// Implementations must be shareable across threads; the worker runner calls
/// `complete` concurrently.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError>;
}

/// Issues a single worker's request, retrying per policy on transport
/// errors, and records total latency and the attempt count.
///
/// Failures never escape as errors: they are carried in the response status
/// so a batch can proceed with the surviving workers.
pub fn annotate_once(
    backend: &dyn ChatBackend,
    retry: &RetryPolicy,
    prompt: &str,
    worker_index: u32,
    seed: u64,
) -> RawWorkerResponse {
    let start = Instant::now();
    let max_attempts = retry.max_attempts.max(1);
    let mut attempts = 0;
    loop {
        attempts += 1;
        match backend.complete(prompt, seed) {
            Ok(raw) if raw.trim().is_empty() => {
                // An empty completion is a model failure, and retrying a
                // seeded request reproduces it, so fail fast.
                return RawWorkerResponse {
                    worker_index,
                    seed,
                    raw: String::new(),
                    latency_ms: start.elapsed().as_millis() as u64,
                    attempts,
                    status: ResponseStatus::BackendError,
                    error: Some("empty completion".into()),
                };
            }
            Ok(raw) => {
                return RawWorkerResponse {
                    worker_index,
                    seed,
                    raw,
                    latency_ms: start.elapsed().as_millis() as u64,
                    attempts,
                    status: ResponseStatus::Ok,
                    error: None,
                };
            }
            Err(err) => {
                if attempts < max_attempts {
                    std::thread::sleep(std::time::Duration::from_millis(
                        retry.backoff_ms * u64::from(attempts),
                    ));
                    continue;
                }
                let status = match err {
                    BackendError::Timeout(_) => ResponseStatus::Timeout,
                    _ => ResponseStatus::BackendError,
                };
                return RawWorkerResponse {
                    worker_index,
                    seed,
                    raw: String::new(),
                    latency_ms: start.elapsed().as_millis() as u64,
                    attempts,
                    status,
                    error: Some(err.to_string()),
                };
            }
        }
    }
}

/// Runs the full worker plan for one prompt.
///
/// Requests execute concurrently (the backend enforces its own in-flight
/// bound), but the returned list is always ordered by worker index, never by
/// completion order.
pub fn run_workers(
    backend: &dyn ChatBackend,
    retry: &RetryPolicy,
    prompt: &str,
    plan: &WorkerPlan,
) -> Vec<RawWorkerResponse> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .seeds
            .iter()
            .enumerate()
            .map(|(i, &seed)| {
                scope.spawn(move || annotate_once(backend, retry, prompt, i as u32 + 1, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Counting semaphore bounding in-flight backend requests.
pub(crate) struct Semaphore {
    permits: std::sync::Mutex<usize>,
    available: std::sync::Condvar,
}

impl Semaphore {
    pub(crate) fn new(permits: usize) -> Self {
        Semaphore {
            permits: std::sync::Mutex::new(permits.max(1)),
            available: std::sync::Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub(crate) struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}
