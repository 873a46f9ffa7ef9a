//! Pipeline stages behind the CLI subcommands. Every stage is a pure
//! function of (input files, config): outputs land in the run directory and
//! the manifest records input/output digests on completion.

pub mod annotate;
pub mod evaluate;
pub mod ingest;
pub mod regress;
pub mod report;
pub mod vote;

use absa::domain::WorkerAnnotation;
use absa::extract::{Defect, ParseStatus};
use anyhow::{Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// Errors split by exit code: usage/config problems exit 1, fatal I/O or
/// backend trouble exits 2.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Fatal(anyhow::Error),
}

impl CliError {
    pub fn usage(err: impl Into<anyhow::Error>) -> Self {
        CliError::Usage(err.into())
    }

    pub fn fatal(err: impl Into<anyhow::Error>) -> Self {
        CliError::Fatal(err.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Fatal(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(e) | CliError::Fatal(e) => format!("{e:#}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// File layout of one run directory.
pub struct OutPaths {
    dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: &Path) -> Self {
        OutPaths {
            dir: dir.to_path_buf(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn sampled(&self) -> PathBuf {
        self.dir.join("sampled.jsonl")
    }

    pub fn stats_json(&self) -> PathBuf {
        self.dir.join("corpus_stats.json")
    }

    pub fn stats_txt(&self) -> PathBuf {
        self.dir.join("corpus_stats.txt")
    }

    pub fn audit(&self) -> PathBuf {
        self.dir.join("audit.jsonl")
    }

    pub fn annotations(&self) -> PathBuf {
        self.dir.join("annotations.jsonl")
    }

    pub fn failures(&self) -> PathBuf {
        self.dir.join("failures.jsonl")
    }

    pub fn voted_jsonl(&self) -> PathBuf {
        self.dir.join("voted.jsonl")
    }

    pub fn voted_csv(&self) -> PathBuf {
        self.dir.join("voted.csv")
    }

    pub fn eval_json(&self) -> PathBuf {
        self.dir.join("eval_report.json")
    }

    pub fn eval_txt(&self) -> PathBuf {
        self.dir.join("eval_report.txt")
    }

    pub fn eval_csv(&self) -> PathBuf {
        self.dir.join("eval_pairs.csv")
    }

    pub fn regress_json(&self) -> PathBuf {
        self.dir.join("regress_report.json")
    }

    pub fn regress_txt(&self) -> PathBuf {
        self.dir.join("regress_report.txt")
    }

    pub fn report_txt(&self) -> PathBuf {
        self.dir.join("report.txt")
    }
}

/// One line of the per-worker annotations file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub review_id: String,
    #[serde(flatten)]
    pub worker: WorkerAnnotation,
    pub status: ParseStatus,
    #[serde(default)]
    pub defects: Vec<Defect>,
}

pub fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Ok(());
    }
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut items = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .with_context(|| format!("{}:{} is corrupt", path.display(), lineno + 1))?;
        items.push(item);
    }
    Ok(items)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

/// A stage's mandatory input file; a missing one means the previous stage
/// has not run in this output directory.
pub fn require_input(path: &Path, produced_by: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::fatal(anyhow::anyhow!(
            "{} not found; run `absa {produced_by}` into this output directory first",
            path.display()
        )))
    }
}
