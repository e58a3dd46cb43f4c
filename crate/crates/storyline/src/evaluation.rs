//! Timeline-generation scoring: a predicted clustering is reduced to a
//! timeline of representative documents, which is scored against gold
//! clusters by coverage (recall) and first-member credit (precision).
//! Adjusted Rand index covers synthetic experiments where full planted
//! labels exist.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocumentStore;
use crate::model::Partition;
use crate::sampler::Assignment;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold clusters are empty")]
    EmptyGold,
    #[error("document {id} appears in gold clusters {first} and {second}")]
    OverlappingGold {
        id: String,
        first: String,
        second: String,
    },
    #[error("gold cluster {id} has non-positive weight {weight}")]
    BadWeight { id: String, weight: f64 },
    #[error("gold cluster id {0} appears twice")]
    DuplicateCluster(String),
    #[error("timeline repeats document {0}")]
    DuplicateTimelineEntry(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One gold cluster: an id, a positive importance weight, and its member
/// document ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldCluster {
    pub cluster: String,
    pub weight: f64,
    pub members: Vec<String>,
}

/// The full gold standard; members are disjoint across clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldClusters {
    clusters: Vec<GoldCluster>,
    /// document id -> index into `clusters`
    member_of: HashMap<String, usize>,
}

impl GoldClusters {
    pub fn new(clusters: Vec<GoldCluster>) -> Result<GoldClusters, EvalError> {
        if clusters.is_empty() {
            return Err(EvalError::EmptyGold);
        }
        let mut seen_ids = HashSet::new();
        let mut member_of: HashMap<String, usize> = HashMap::new();
        for (k, c) in clusters.iter().enumerate() {
            // Also rejects NaN and infinite weights.
            let usable = c.weight.is_finite() && c.weight > 0.0;
            if !usable {
                return Err(EvalError::BadWeight {
                    id: c.cluster.clone(),
                    weight: c.weight,
                });
            }
            if !seen_ids.insert(c.cluster.clone()) {
                return Err(EvalError::DuplicateCluster(c.cluster.clone()));
            }
            for m in &c.members {
                if let Some(&prev) = member_of.get(m) {
                    return Err(EvalError::OverlappingGold {
                        id: m.clone(),
                        first: clusters[prev].cluster.clone(),
                        second: c.cluster.clone(),
                    });
                }
                member_of.insert(m.clone(), k);
            }
        }
        Ok(GoldClusters {
            clusters,
            member_of,
        })
    }

    /// Parses the JSON-lines gold format, one cluster per line:
    /// `{"cluster": string, "weight": number, "members": [ids]}`.
    pub fn from_reader<B: BufRead>(reader: B) -> Result<GoldClusters, EvalError> {
        let mut clusters = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let c: GoldCluster = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            clusters.push(c);
        }
        GoldClusters::new(clusters)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[GoldCluster] {
        &self.clusters
    }

    /// Index of the gold cluster containing a document, if any.
    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.member_of.get(id).copied()
    }

    /// All member ids across clusters.
    pub fn member_ids(&self) -> impl Iterator<Item = &str> {
        self.clusters.iter().flat_map(|c| c.members.iter().map(String::as_str))
    }
}

/// Ordered, duplicate-free list of returned document ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Timeline {
    entries: Vec<String>,
}

impl Timeline {
    pub fn new(entries: Vec<String>) -> Result<Timeline, EvalError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.clone()) {
                return Err(EvalError::DuplicateTimelineEntry(e.clone()));
            }
        }
        Ok(Timeline { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

/// Cluster-level retrieval scores, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Metrics<R: Real> {
    pub recall: R,
    pub weighted_recall: R,
    pub precision: R,
    pub f1: R,
    pub weighted_f1: R,
}

fn harmonic<R: Real>(p: R, r: R) -> R {
    if p + r > R::zero() {
        real::<R>(2.0) * p * r / (p + r)
    } else {
        R::zero()
    }
}

/// One representative per predicted cluster: the member earliest by
/// (timestamp, id), in timeline order of those keys.
pub fn select_representatives(assignments: &[Assignment], store: &DocumentStore) -> Timeline {
    let mut best: BTreeMap<usize, (i64, &str)> = BTreeMap::new();
    for a in assignments {
        let idx = store
            .index_of(&a.id)
            .expect("assignment references a stored document");
        let key = (store.timestamp(idx), a.id.as_str());
        match best.get(&a.cluster) {
            Some(&cur) if cur <= key => {}
            _ => {
                best.insert(a.cluster, key);
            }
        }
    }
    let mut reps: Vec<(i64, &str)> = best.into_values().collect();
    reps.sort_unstable();
    Timeline {
        entries: reps.into_iter().map(|(_, id)| id.to_string()).collect(),
    }
}

/// Scores a timeline against gold clusters.
///
/// A gold cluster is covered when at least one member appears in the
/// timeline; recall is the covered fraction (weighted recall weights the
/// fractions by cluster weight). A timeline entry earns credit when it
/// is the first entry from its gold cluster; later members are
/// redundant, and entries in no gold cluster earn nothing. Precision is
/// credited entries over timeline length. An empty timeline scores zero
/// across the board.
pub fn score<R: Real>(timeline: &Timeline, gold: &GoldClusters) -> Result<Metrics<R>, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    if timeline.is_empty() {
        let z = R::zero();
        return Ok(Metrics {
            recall: z,
            weighted_recall: z,
            precision: z,
            f1: z,
            weighted_f1: z,
        });
    }
    let mut covered = vec![false; gold.len()];
    let mut credited = 0usize;
    for id in timeline.entries() {
        if let Some(k) = gold.cluster_of(id) {
            if !covered[k] {
                covered[k] = true;
                credited += 1;
            }
        }
    }
    let covered_count = covered.iter().filter(|&&c| c).count();
    let total_weight: f64 = gold.clusters().iter().map(|c| c.weight).sum();
    let covered_weight: f64 = gold
        .clusters()
        .iter()
        .zip(&covered)
        .filter(|(_, &c)| c)
        .map(|(c, _)| c.weight)
        .sum();

    let recall = real::<R>(covered_count as f64) / real(gold.len() as f64);
    let weighted_recall = real::<R>(covered_weight) / real(total_weight);
    let precision = real::<R>(credited as f64) / real(timeline.len() as f64);
    Ok(Metrics {
        recall,
        weighted_recall,
        precision,
        f1: harmonic(precision, recall),
        weighted_f1: harmonic(precision, weighted_recall),
    })
}

/// Standard adjusted Rand index from the pair-counting contingency
/// table. 1 for identical partitions, near 0 for independent ones; both
/// partitions must label the same 0..n documents.
pub fn adjusted_rand_index<R: Real>(predicted: &Partition, truth: &Partition) -> R {
    assert_eq!(
        predicted.len(),
        truth.len(),
        "partitions must cover the same documents"
    );
    let n = predicted.len();
    if n == 0 {
        return R::one();
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut row: HashMap<usize, u64> = HashMap::new();
    let mut col: HashMap<usize, u64> = HashMap::new();
    for i in 0..n {
        *table
            .entry((predicted.cluster_of(i), truth.cluster_of(i)))
            .or_insert(0) += 1;
        *row.entry(predicted.cluster_of(i)).or_insert(0) += 1;
        *col.entry(truth.cluster_of(i)).or_insert(0) += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) / 2;
    let sum_cells: u64 = table.values().map(|&v| choose2(v)).sum();
    let sum_rows: u64 = row.values().map(|&v| choose2(v)).sum();
    let sum_cols: u64 = col.values().map(|&v| choose2(v)).sum();
    let total = choose2(n as u64);

    let index = real::<R>(sum_cells as f64);
    let expected = real::<R>(sum_rows as f64) * real(sum_cols as f64) / real(total as f64);
    let max_index = (real::<R>(sum_rows as f64) + real(sum_cols as f64)) / real(2.0);
    if max_index == expected {
        // Degenerate agreement structure (e.g. both all-singletons):
        // no variation to correct for, and the partitions agree.
        return R::one();
    }
    (index - expected) / (max_index - expected)
}
