//! Planted-storyline corpus generation. Recovery experiments need
//! corpora with known cluster structure; these generators produce
//! timestamped documents with planted labels and matching gold-cluster
//! records, deterministically from a seed.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DocumentStore, RawRecord};
use crate::evaluation::GoldCluster;
use crate::model::Partition;

/// A generated corpus: raw records (unsorted; ingest orders them), the
/// planted cluster index of every document id, and gold clusters in the
/// evaluation format (one per planted storyline, weight 1).
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub records: Vec<RawRecord>,
    pub label_of: HashMap<String, usize>,
    pub gold: Vec<GoldCluster>,
}

impl PlantedCorpus {
    fn push(&mut self, id: String, timestamp: i64, tokens: Vec<String>, label: usize) {
        self.label_of.insert(id.clone(), label);
        while self.gold.len() <= label {
            self.gold.push(GoldCluster {
                cluster: format!("g{}", self.gold.len()),
                weight: 1.0,
                members: Vec::new(),
            });
        }
        self.gold[label].members.push(id.clone());
        self.records.push(RawRecord {
            id,
            timestamp,
            text: tokens.join(" "),
        });
    }
}

/// Burst-shaped storylines: each cluster draws its words from its own
/// disjoint vocabulary (plus an optional shared pool) and its timestamps
/// from a uniform spread around a per-cluster center.
#[derive(Debug, Clone)]
pub struct StorylineSpec {
    pub clusters: usize,
    pub docs_per_cluster: usize,
    /// Disjoint vocabulary size per cluster.
    pub words_per_cluster: usize,
    /// Extra vocabulary shared by every cluster; 0 for fully disjoint.
    pub shared_words: usize,
    /// Probability that a token comes from the shared pool.
    pub shared_fraction: f64,
    pub tokens_per_doc: usize,
    pub first_center: i64,
    /// Gap between consecutive cluster centers.
    pub center_gap: i64,
    /// Timestamps are uniform in [center - spread, center + spread].
    pub spread: i64,
    pub seed: u64,
}

impl Default for StorylineSpec {
    fn default() -> StorylineSpec {
        StorylineSpec {
            clusters: 3,
            docs_per_cluster: 30,
            words_per_cluster: 5,
            shared_words: 0,
            shared_fraction: 0.0,
            tokens_per_doc: 8,
            first_center: 0,
            center_gap: 864_000,
            spread: 43_200,
            seed: 42,
        }
    }
}

pub fn planted_storylines(spec: &StorylineSpec) -> PlantedCorpus {
    assert!(spec.clusters >= 1 && spec.docs_per_cluster >= 1);
    assert!(spec.words_per_cluster >= 1 && spec.tokens_per_doc >= 1);
    assert!((0.0..=1.0).contains(&spec.shared_fraction));
    assert!(spec.spread >= 0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = PlantedCorpus {
        records: Vec::new(),
        label_of: HashMap::new(),
        gold: Vec::new(),
    };
    let mut serial = 0usize;
    for k in 0..spec.clusters {
        let center = spec.first_center + (k as i64) * spec.center_gap;
        for _ in 0..spec.docs_per_cluster {
            let offset = if spec.spread == 0 {
                0
            } else {
                rng.random_range(-spec.spread..=spec.spread)
            };
            let tokens = draw_tokens(&mut rng, spec, k);
            out.push(format!("d{serial:05}"), center + offset, tokens, k);
            serial += 1;
        }
    }
    out
}

fn draw_tokens(rng: &mut ChaCha8Rng, spec: &StorylineSpec, cluster: usize) -> Vec<String> {
    (0..spec.tokens_per_doc)
        .map(|_| {
            if spec.shared_words > 0 && rng.random::<f64>() < spec.shared_fraction {
                format!("sharedw{}", rng.random_range(0..spec.shared_words))
            } else {
                format!("c{cluster}w{}", rng.random_range(0..spec.words_per_cluster))
            }
        })
        .collect()
}

/// A stationary stream: documents at a fixed arrival spacing, with the
/// topic rotating through disjoint vocabularies every `burst_len`
/// documents. Arrival rate and per-document cost drivers are constant
/// over the whole stream, which is what cost-trend measurements need.
#[derive(Debug, Clone)]
pub struct RotatingStreamSpec {
    pub docs: usize,
    pub burst_len: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub tokens_per_doc: usize,
    /// Time between consecutive arrivals.
    pub spacing: i64,
    pub seed: u64,
}

impl Default for RotatingStreamSpec {
    fn default() -> RotatingStreamSpec {
        RotatingStreamSpec {
            docs: 2000,
            burst_len: 25,
            topics: 8,
            words_per_topic: 5,
            tokens_per_doc: 6,
            spacing: 60,
            seed: 42,
        }
    }
}

pub fn rotating_bursts(spec: &RotatingStreamSpec) -> PlantedCorpus {
    assert!(spec.docs >= 1 && spec.burst_len >= 1 && spec.topics >= 1);
    assert!(spec.words_per_topic >= 1 && spec.tokens_per_doc >= 1);
    assert!(spec.spacing >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = PlantedCorpus {
        records: Vec::new(),
        label_of: HashMap::new(),
        gold: Vec::new(),
    };
    for i in 0..spec.docs {
        // Each burst is its own planted cluster even when its topic
        // vocabulary recurs later: storylines are episodes, not topics.
        let burst = i / spec.burst_len;
        let topic = burst % spec.topics;
        let tokens: Vec<String> = (0..spec.tokens_per_doc)
            .map(|_| format!("t{topic}w{}", rng.random_range(0..spec.words_per_topic)))
            .collect();
        out.push(
            format!("d{i:06}"),
            (i as i64) * spec.spacing,
            tokens,
            burst,
        );
    }
    out
}

/// Planted labels in store order, as a partition comparable with an
/// inferred one. Panics if a stored document has no planted label.
pub fn planted_partition(store: &DocumentStore, label_of: &HashMap<String, usize>) -> Partition {
    let ids: Vec<usize> = (0..store.len())
        .map(|i| {
            *label_of
                .get(store.doc(i).id())
                .expect("every stored document has a planted label")
        })
        .collect();
    Partition::from_cluster_ids(ids)
}
