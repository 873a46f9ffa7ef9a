//! Two-stage median majority voting over worker annotations.
//!
//! Stage one votes on whether an aspect is mentioned at all (median of the
//! binary mention indicators). Stage two votes on the polarity, taking the
//! median over only the nonzero values. The final sentiment is the product
//! of the two, so an aspect voted "not mentioned" ends at 0 even when the
//! minority that mentioned it was positive.
//!
//! Medians over even-length lists use the lower of the two middle elements,
//! which keeps every voted value inside the integer label set.

use crate::domain::{AspectSet, VotedAnnotation, WorkerAnnotation};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

#[derive(Debug, thiserror::Error)]
pub enum VoteError {
    #[error("median of an empty list is undefined")]
    EmptyInput,
    #[error("no usable workers for this review")]
    AllWorkersFailed,
    #[error("worker {worker_index} has {got} values but the aspect set has {expected}")]
    LengthMismatch {
        worker_index: u32,
        got: usize,
        expected: usize,
    },
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("write failed: {0}")]
    Io(#[from] io::Error),
}

/// Lower median: sorts the values and returns the middle element, or the
/// lower of the two middle elements when the count is even.
pub fn median_lower<T: Ord + Copy>(values: &[T]) -> Result<T, VoteError> {
    if values.is_empty() {
        return Err(VoteError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Aggregates the workers' vectors into one voted annotation.
///
/// Parse-failed workers must already be excluded; voting proceeds with
/// whatever subset remains, down to a single worker, and records how many
/// were used.
pub fn vote(
    workers: &[WorkerAnnotation],
    aspects: &AspectSet,
) -> Result<VotedAnnotation, VoteError> {
    if workers.is_empty() {
        return Err(VoteError::AllWorkersFailed);
    }
    for w in workers {
        if w.values.len() != aspects.len() {
            return Err(VoteError::LengthMismatch {
                worker_index: w.worker_index,
                got: w.values.len(),
                expected: aspects.len(),
            });
        }
    }

    let k_count = aspects.len();
    let mut mention = Vec::with_capacity(k_count);
    let mut value = Vec::with_capacity(k_count);
    let mut sentiment = Vec::with_capacity(k_count);

    for k in 0..k_count {
        let mentions: Vec<u8> = workers.iter().map(|w| w.mention(k)).collect();
        let m = median_lower(&mentions)?;

        let nonzero: Vec<u8> = workers
            .iter()
            .map(|w| w.values[k].get())
            .filter(|&v| v != 0)
            .collect();
        let v = if nonzero.is_empty() {
            0
        } else {
            median_lower(&nonzero)?
        };

        mention.push(m);
        value.push(v);
        sentiment.push(m * v);
    }

    Ok(VotedAnnotation {
        mention,
        value,
        sentiment,
        worker_count_used: workers.len(),
    })
}

/// One line of the voted-annotations JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotedRecord {
    pub review_id: String,
    #[serde(flatten)]
    pub voted: VotedAnnotation,
}

/// Writes voted records as line-delimited JSON.
pub fn write_voted_jsonl<W: io::Write>(out: W, records: &[VotedRecord]) -> Result<(), VoteError> {
    let mut out = io::BufWriter::new(out);
    for rec in records {
        serde_json::to_writer(&mut out, rec).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a voted-annotations JSONL file back.
pub fn read_voted_jsonl<R: io::BufRead>(input: R) -> Result<Vec<VotedRecord>, VoteError> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VotedRecord = serde_json::from_str(&line).map_err(io::Error::other)?;
        records.push(rec);
    }
    Ok(records)
}

/// Writes the voted sentiments as CSV: one row per review, one column per
/// aspect (the `s^k` values), for downstream statistics.
pub fn write_voted_csv<W: io::Write>(
    out: W,
    aspects: &AspectSet,
    records: &[VotedRecord],
) -> Result<(), VoteError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["review_id".to_string()];
    header.extend(aspects.names().map(str::to_string));
    wtr.write_record(&header)?;
    for rec in records {
        let mut row = vec![rec.review_id.clone()];
        row.extend(rec.voted.sentiment.iter().map(u8::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_sentiment, AspectDef};

    fn aspect_set(names: &[&str]) -> AspectSet {
        let aspects = names
            .iter()
            .map(|n| AspectDef {
                name: (*n).to_string(),
                description: format!("{n} description"),
            })
            .collect();
        AspectSet::new(aspects, 0).unwrap()
    }

    fn worker(idx: u32, values: &[u8]) -> WorkerAnnotation {
        WorkerAnnotation::new(
            idx,
            u64::from(idx),
            values
                .iter()
                .map(|&v| validate_sentiment(i64::from(v)).unwrap())
                .collect(),
        )
    }

    /// Column order used by the five-worker worked example: rating, price,
    /// menu, dishes, dessert, clean, atmosphere, congestion, noise,
    /// enjoyment, attitude, child, couple, access.
    fn golden_aspects() -> AspectSet {
        aspect_set(&[
            "rating",
            "price",
            "menu",
            "dishes",
            "dessert",
            "clean",
            "atmosphere",
            "congestion",
            "noise",
            "enjoyment",
            "attitude",
            "child",
            "couple",
            "access",
        ])
    }

    pub(crate) fn golden_workers() -> Vec<WorkerAnnotation> {
        vec![
            worker(1, &[4, 0, 2, 3, 0, 0, 4, 0, 0, 0, 5, 0, 0, 1]),
            worker(2, &[4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 2, 3, 1]),
            worker(3, &[4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 2, 3, 1]),
            worker(4, &[4, 0, 3, 3, 0, 0, 4, 1, 1, 4, 5, 2, 4, 5]),
            worker(5, &[4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 0, 0, 1]),
        ]
    }

    #[test]
    fn median_lower_examples() {
        assert_eq!(median_lower(&[0u8, 0, 0, 1, 0]).unwrap(), 0);
        assert_eq!(median_lower(&[2u8, 3, 3, 3, 3]).unwrap(), 3);
        assert_eq!(median_lower(&[3u8, 4]).unwrap(), 3);
        assert_eq!(median_lower(&[7u8]).unwrap(), 7);
        assert!(matches!(
            median_lower::<u8>(&[]),
            Err(VoteError::EmptyInput)
        ));
    }

    #[test]
    fn five_worker_golden_vote() {
        let voted = vote(&golden_workers(), &golden_aspects()).unwrap();
        assert_eq!(
            voted.mention,
            vec![1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 1, 1, 1]
        );
        assert_eq!(voted.value, vec![4, 0, 3, 3, 0, 0, 4, 1, 1, 4, 5, 2, 3, 1]);
        assert_eq!(
            voted.sentiment,
            vec![4, 0, 3, 3, 0, 0, 4, 0, 0, 4, 5, 2, 3, 1]
        );
        assert_eq!(voted.worker_count_used, 5);
        voted.check().unwrap();
    }

    #[test]
    fn minority_mention_is_suppressed() {
        // One worker out of five mentions the aspect: the mention vote is 0,
        // the nonzero polarity median is 1, and the sentiment ends at 0.
        let aspects = aspect_set(&["congestion"]);
        let workers = vec![
            worker(1, &[0]),
            worker(2, &[0]),
            worker(3, &[0]),
            worker(4, &[1]),
            worker(5, &[0]),
        ];
        let voted = vote(&workers, &aspects).unwrap();
        assert_eq!(voted.mention, vec![0]);
        assert_eq!(voted.value, vec![1]);
        assert_eq!(voted.sentiment, vec![0]);
    }

    #[test]
    fn identical_workers_vote_to_themselves() {
        let aspects = aspect_set(&["a", "b", "c"]);
        let workers: Vec<_> = (1..=5).map(|i| worker(i, &[0, 3, 5])).collect();
        let voted = vote(&workers, &aspects).unwrap();
        assert_eq!(voted.mention, vec![0, 1, 1]);
        assert_eq!(voted.sentiment, vec![0, 3, 5]);
    }

    #[test]
    fn zero_workers_is_an_error() {
        let aspects = aspect_set(&["a"]);
        assert!(matches!(
            vote(&[], &aspects),
            Err(VoteError::AllWorkersFailed)
        ));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let aspects = aspect_set(&["a", "b"]);
        let workers = vec![worker(1, &[1])];
        assert!(matches!(
            vote(&workers, &aspects),
            Err(VoteError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_worker_vote_is_identity_with_derived_mention() {
        let aspects = aspect_set(&["a", "b"]);
        let voted = vote(&[worker(1, &[0, 4])], &aspects).unwrap();
        assert_eq!(voted.mention, vec![0, 1]);
        assert_eq!(voted.sentiment, vec![0, 4]);
        assert_eq!(voted.worker_count_used, 1);
    }

    #[test]
    fn majority_mention_matches_all_32_patterns() {
        // With five workers the mention vote must equal strict majority; check
        // every possible mention pattern exhaustively.
        let aspects = aspect_set(&["a"]);
        for pattern in 0u32..32 {
            let workers: Vec<_> = (0..5)
                .map(|w| {
                    let mentioned = (pattern >> w) & 1 == 1;
                    worker(w + 1, &[if mentioned { 3 } else { 0 }])
                })
                .collect();
            let voted = vote(&workers, &aspects).unwrap();
            let count = pattern.count_ones();
            let expected = u8::from(count > 2);
            assert_eq!(voted.mention[0], expected, "pattern {pattern:05b}");
        }
    }

    #[test]
    fn voted_jsonl_and_csv_round_trip() {
        let aspects = aspect_set(&["a", "b"]);
        let records = vec![
            VotedRecord {
                review_id: "r1".into(),
                voted: vote(&[worker(1, &[0, 4])], &aspects).unwrap(),
            },
            VotedRecord {
                review_id: "r2".into(),
                voted: vote(&[worker(1, &[2, 2])], &aspects).unwrap(),
            },
        ];

        let mut jsonl = Vec::new();
        write_voted_jsonl(&mut jsonl, &records).unwrap();
        let back = read_voted_jsonl(io::BufReader::new(&jsonl[..])).unwrap();
        assert_eq!(back, records);

        let mut csv_out = Vec::new();
        write_voted_csv(&mut csv_out, &aspects, &records).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "review_id,a,b");
        assert_eq!(lines.next().unwrap(), "r1,0,4");
        assert_eq!(lines.next().unwrap(), "r2,2,2");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_workers(max_w: usize, k: usize) -> impl Strategy<Value = Vec<WorkerAnnotation>> {
            proptest::collection::vec(proptest::collection::vec(0u8..=5, k), 1..=max_w).prop_map(
                |rows| {
                    rows.into_iter()
                        .enumerate()
                        .map(|(i, row)| worker(i as u32 + 1, &row))
                        .collect()
                },
            )
        }

        proptest! {
            #[test]
            fn permutation_invariance(
                workers in arb_workers(7, 5),
                seed in any::<u64>(),
            ) {
                let aspects = aspect_set(&["a", "b", "c", "d", "e"]);
                let base = vote(&workers, &aspects).unwrap();

                let mut shuffled = workers.clone();
                // Deterministic Fisher-Yates driven by the proptest seed.
                let mut state = seed | 1;
                for i in (1..shuffled.len()).rev() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let j = (state >> 33) as usize % (i + 1);
                    shuffled.swap(i, j);
                }
                let permuted = vote(&shuffled, &aspects).unwrap();
                prop_assert_eq!(base, permuted);
            }

            #[test]
            fn range_and_suppression(workers in arb_workers(7, 5)) {
                let aspects = aspect_set(&["a", "b", "c", "d", "e"]);
                let voted = vote(&workers, &aspects).unwrap();
                for k in 0..5 {
                    prop_assert!(voted.mention[k] <= 1);
                    prop_assert!(voted.value[k] <= 5);
                    prop_assert!(voted.sentiment[k] <= 5);
                    prop_assert_eq!(voted.sentiment[k], voted.mention[k] * voted.value[k]);
                    if voted.mention[k] == 0 {
                        prop_assert_eq!(voted.sentiment[k], 0);
                    }
                }
            }

            #[test]
            fn consensus(value in 0u8..=5, w in 1usize..=7) {
                let aspects = aspect_set(&["a"]);
                let workers: Vec<_> = (0..w).map(|i| worker(i as u32 + 1, &[value])).collect();
                let voted = vote(&workers, &aspects).unwrap();
                prop_assert_eq!(voted.sentiment[0], value);
            }

            #[test]
            fn conditional_monotonicity(
                workers in arb_workers(7, 3),
                widx in any::<proptest::sample::Index>(),
                kidx in 0usize..3,
                bump in 1u8..=4,
            ) {
                let aspects = aspect_set(&["a", "b", "c"]);
                let w = widx.index(workers.len());
                let current = workers[w].values[kidx].get();
                prop_assume!((1..5).contains(&current));
                let bumped_value = (current + bump).min(5);

                let before = vote(&workers, &aspects).unwrap();
                let mut bumped = workers.clone();
                bumped[w].values[kidx] = validate_sentiment(i64::from(bumped_value)).unwrap();
                let after = vote(&bumped, &aspects).unwrap();

                // Mention pattern is unchanged (nonzero stays nonzero), so the
                // polarity vote can only move up.
                prop_assert!(after.value[kidx] >= before.value[kidx]);
                prop_assert!(after.sentiment[kidx] >= before.sentiment[kidx]);
            }
        }
    }
}
