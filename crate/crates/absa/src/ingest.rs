//! Corpus loading, per-user sampling, and summary statistics.
//!
//! Input is line-delimited JSON, one review per line, with a parallel
//! business file mapping business ids to category tags. Large public dumps
//! contain noise, so malformed lines are counted and skipped rather than
//! aborting the load; the load only fails if more than half the lines are
//! bad.

use crate::domain::ReviewRecord;
use crate::prompt::TokenCounter;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("write failed: {0}")]
    WriteIo(#[from] io::Error),
    #[error("{malformed} of {total} lines are malformed; input does not look like a review dump")]
    CorpusFormat { malformed: usize, total: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("requested {requested} users but the corpus has only {available}")]
    InsufficientUsers { requested: usize, available: usize },
    #[error("duplicate review_id {0:?} in corpus")]
    DuplicateReviewId(String),
}

/// An immutable set of reviews with unique review ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<ReviewRecord>,
    pub source: String,
}

impl Corpus {
    pub fn new(records: Vec<ReviewRecord>, source: impl Into<String>) -> Result<Self, IngestError> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if !seen.insert(r.review_id.as_str()) {
                return Err(IngestError::DuplicateReviewId(r.review_id.clone()));
            }
        }
        Ok(Corpus {
            records,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Category include/exclude lists. A review passes when its business carries
/// at least one included tag (or the include list is empty) and none of the
/// excluded tags; any excluded tag wins over any included one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TagFilter {
    #[serde(default)]
    pub include: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl TagFilter {
    fn passes(&self, tags: &[String]) -> bool {
        if self.exclude.iter().any(|t| tags.contains(t)) {
            return false;
        }
        self.include.is_empty() || self.include.iter().any(|t| tags.contains(t))
    }

    fn is_trivial(&self) -> bool {
        self.include.is_empty() && self.exclude.is_empty()
    }
}

#[derive(Deserialize)]
struct BusinessLine {
    business_id: String,
    #[serde(default)]
    categories: Categories,
}

/// Business dumps carry categories either as a comma-separated string or as
/// a JSON array; accept both.
#[derive(Deserialize, Default)]
#[serde(untagged)]
enum Categories {
    #[default]
    Missing,
    Text(Option<String>),
    List(Vec<String>),
}

impl Categories {
    fn into_tags(self) -> Vec<String> {
        match self {
            Categories::Missing | Categories::Text(None) => Vec::new(),
            Categories::Text(Some(s)) => s
                .split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect(),
            Categories::List(tags) => tags,
        }
    }
}

/// Reads the business file into a business_id -> tags map. Malformed lines
/// are skipped.
pub fn load_business_tags(path: &Path) -> Result<HashMap<String, Vec<String>>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut map = HashMap::new();
    for line in io::BufReader::new(file).lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(parsed) = serde_json::from_str::<BusinessLine>(&line) {
            map.insert(parsed.business_id, parsed.categories.into_tags());
        }
    }
    Ok(map)
}

/// What happened during a load, alongside the corpus itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub lines: usize,
    pub malformed: usize,
    pub excluded_by_tags: usize,
    pub duplicate_ids: usize,
}

/// Loads reviews from a line-delimited JSON file, applying the tag filter
/// through the business map when one is supplied.
pub fn load_reviews(
    path: &Path,
    business_tags: Option<&HashMap<String, Vec<String>>>,
    filter: &TagFilter,
) -> Result<(Corpus, LoadStats), IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let no_tags: Vec<String> = Vec::new();
    let mut records = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    let mut stats = LoadStats {
        lines: 0,
        malformed: 0,
        excluded_by_tags: 0,
        duplicate_ids: 0,
    };

    for line in io::BufReader::new(file).lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let record: ReviewRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                stats.malformed += 1;
                continue;
            }
        };
        if record.text.is_empty() {
            stats.malformed += 1;
            continue;
        }
        if !filter.is_trivial() {
            let tags = business_tags
                .and_then(|m| m.get(&record.business_id))
                .unwrap_or(&no_tags);
            if !filter.passes(tags) {
                stats.excluded_by_tags += 1;
                continue;
            }
        }
        if !seen_ids.insert(record.review_id.clone()) {
            stats.duplicate_ids += 1;
            continue;
        }
        records.push(record);
    }

    if stats.lines > 0 && stats.malformed * 2 > stats.lines {
        return Err(IngestError::CorpusFormat {
            malformed: stats.malformed,
            total: stats.lines,
        });
    }
    if stats.lines == 0 {
        log::warn!("{} is empty; loaded a zero-record corpus", path.display());
    }

    let corpus = Corpus::new(records, path.display().to_string())?;
    Ok((corpus, stats))
}

/// Draws `n` users and keeps one review for each.
///
/// When a user reviewed the same business several times, only the most
/// recent review stays in the pool (date ties break toward the larger
/// review_id); the kept review is then drawn uniformly from the user's pool.
/// The result is a pure function of (corpus, n, seed) and is ordered by
/// user_id.
pub fn sample_one_per_user(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, IngestError> {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    if corpus.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }

    // user -> business -> most recent review.
    let mut per_user: BTreeMap<&str, BTreeMap<&str, &ReviewRecord>> = BTreeMap::new();
    for record in &corpus.records {
        let slot = per_user
            .entry(&record.user_id)
            .or_default()
            .entry(&record.business_id);
        match slot {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(record);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let held = o.get();
                let newer = (record.posted_at.as_str(), record.review_id.as_str())
                    > (held.posted_at.as_str(), held.review_id.as_str());
                if newer {
                    o.insert(record);
                }
            }
        }
    }

    let users: Vec<&str> = per_user.keys().copied().collect();
    if n > users.len() {
        return Err(IngestError::InsufficientUsers {
            requested: n,
            available: users.len(),
        });
    }

    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut shuffled = users;
    shuffled.shuffle(&mut rng);
    let mut chosen: Vec<&str> = shuffled.into_iter().take(n).collect();
    chosen.sort_unstable();

    let mut records = Vec::with_capacity(n);
    for user in chosen {
        let pool: Vec<&ReviewRecord> = per_user[user].values().copied().collect();
        let pick = rng.random_range(0..pool.len());
        records.push(pool[pick].clone());
    }

    Corpus::new(
        records,
        format!("{} (sampled n={n} seed={seed})", corpus.source),
    )
}

/// Mean, population standard deviation, min, and max of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStat {
    fn over(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        SummaryStat {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Corpus-level descriptive statistics over text lengths and star ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n: usize,
    pub chars: SummaryStat,
    pub tokens: SummaryStat,
    pub stars: SummaryStat,
}

/// Computes descriptive statistics, counting tokens with the injected
/// counter.
pub fn corpus_stats(
    corpus: &Corpus,
    counter: &dyn TokenCounter,
) -> Result<CorpusStats, IngestError> {
    if corpus.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let chars: Vec<f64> = corpus
        .records
        .iter()
        .map(|r| r.text.chars().count() as f64)
        .collect();
    let tokens: Vec<f64> = corpus
        .records
        .iter()
        .map(|r| counter.count(&r.text) as f64)
        .collect();
    let stars: Vec<f64> = corpus.records.iter().map(|r| f64::from(r.stars)).collect();
    Ok(CorpusStats {
        n: corpus.len(),
        chars: SummaryStat::over(&chars),
        tokens: SummaryStat::over(&tokens),
        stars: SummaryStat::over(&stars),
    })
}

/// Persists a corpus as line-delimited JSON with the input field names.
pub fn write_corpus_jsonl<W: Write>(out: W, corpus: &Corpus) -> Result<(), IngestError> {
    let mut out = io::BufWriter::new(out);
    for record in &corpus.records {
        serde_json::to_writer(&mut out, record).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a corpus we wrote ourselves; unlike [`load_reviews`] this is strict.
pub fn read_corpus_jsonl<R: BufRead>(input: R, source: &str) -> Result<Corpus, IngestError> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReviewRecord = serde_json::from_str(&line).map_err(io::Error::other)?;
        records.push(record);
    }
    Corpus::new(records, source)
}
