//! Run configuration: a JSON file with one key tree per pipeline concern,
//! overridable by command-line flags (flags win over the environment, the
//! environment over file values).

use absa::domain::AspectSet;
use absa::inference::{BackendConfig, WorkerPlan};
use absa::ingest::TagFilter;
use absa::prompt::{OneShotExample, PromptTemplate, DEFAULT_CONTEXT_BUDGET};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const BACKEND_URL_ENV: &str = "ABSA_BACKEND_URL";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub workers: WorkersSection,
    /// Aspect catalog file; the bundled 14-aspect restaurant catalog when
    /// absent.
    #[serde(default)]
    pub aspects_file: Option<PathBuf>,
    #[serde(default)]
    pub template_file: Option<PathBuf>,
    #[serde(default)]
    pub example_file: Option<PathBuf>,
    #[serde(default = "default_context_budget")]
    pub context_budget: usize,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub sample: SampleSection,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub regress: RegressSection,
    /// Review-level parallelism for the annotate stage.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Skip already-annotated reviews on rerun.
    #[serde(default = "default_true")]
    pub resume: bool,
}

fn default_context_budget() -> usize {
    DEFAULT_CONTEXT_BUDGET
}

fn default_jobs() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    #[serde(flatten)]
    pub config: BackendConfig,
    /// Response-shape mix for the mock backend.
    #[serde(default)]
    pub mock: MockRates,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::Mock,
            config: BackendConfig::default(),
            mock: MockRates::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRates {
    #[serde(default)]
    pub prose_rate: f64,
    #[serde(default)]
    pub fenced_rate: f64,
    #[serde(default)]
    pub malformed_rate: f64,
    #[serde(default)]
    pub empty_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkersSection {
    pub seeds: Vec<u64>,
}

impl Default for WorkersSection {
    fn default() -> Self {
        WorkersSection {
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub reviews_file: PathBuf,
    #[serde(default)]
    pub business_file: Option<PathBuf>,
    #[serde(default)]
    pub include_tags: Vec<String>,
    #[serde(default)]
    pub exclude_tags: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub n: usize,
    pub seed: u64,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection { n: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_baseline_seed")]
    pub baseline_seed: u64,
}

fn default_baseline_seed() -> u64 {
    101
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            baseline_seed: default_baseline_seed(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressSection {
    #[serde(default)]
    pub y2_mode: Y2Mode,
}

/// Whether the second model reuses the first model's selected support or
/// reruns selection on its own response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Y2Mode {
    #[default]
    ReuseSupport,
    Reselect,
}

/// Flag-level overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub backend_url: Option<String>,
    pub sample_seed: Option<u64>,
    pub resume: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("config {} is not valid", path.display()))?;

        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            if !url.is_empty() {
                config.backend.config.endpoint = url;
            }
        }
        if let Some(url) = &overrides.backend_url {
            config.backend.config.endpoint = url.clone();
        }
        if let Some(dir) = &overrides.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(jobs) = overrides.jobs {
            config.jobs = jobs;
        }
        if let Some(seed) = overrides.sample_seed {
            config.sample.seed = seed;
        }
        if let Some(resume) = overrides.resume {
            config.resume = resume;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        WorkerPlan::new(self.workers.seeds.clone())?;
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        for (label, path) in [
            ("aspects_file", &self.aspects_file),
            ("template_file", &self.template_file),
            ("example_file", &self.example_file),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    bail!("{label} {} does not exist", path.display());
                }
            }
        }
        Ok(())
    }

    pub fn worker_plan(&self) -> WorkerPlan {
        WorkerPlan::new(self.workers.seeds.clone()).expect("validated at load")
    }

    pub fn tag_filter(&self) -> TagFilter {
        TagFilter {
            include: self.corpus.include_tags.clone(),
            exclude: self.corpus.exclude_tags.clone(),
        }
    }

    pub fn load_aspects(&self) -> Result<AspectSet> {
        match &self.aspects_file {
            None => Ok(AspectSet::default_restaurant()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read aspects {}", path.display()))?;
                AspectSet::from_json(&text)
                    .with_context(|| format!("aspects {} invalid", path.display()))
            }
        }
    }

    pub fn load_template(&self) -> Result<PromptTemplate> {
        match &self.template_file {
            None => Ok(PromptTemplate::bundled()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read template {}", path.display()))?;
                Ok(PromptTemplate::new(text))
            }
        }
    }

    pub fn load_example(&self) -> Result<OneShotExample> {
        match &self.example_file {
            None => Ok(OneShotExample::bundled()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read example {}", path.display()))?;
                OneShotExample::from_json(&text)
                    .with_context(|| format!("example {} invalid", path.display()))
            }
        }
    }

    /// Canonical serialized form used for the manifest's config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
