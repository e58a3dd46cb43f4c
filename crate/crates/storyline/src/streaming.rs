//! Fixed-lag online inference: documents arrive in timestamp order, only
//! links of documents within a trailing time window of the newest
//! arrival are resampled, and links older than the window freeze
//! permanently.
//!
//! Freezing keeps per-arrival cost bounded by the window population
//! rather than the stream length. Candidate link targets are restricted
//! to the window as well, so a resampled document can only reach frozen
//! documents indirectly, through frozen third-party links into the
//! window. Cluster statistics still count frozen members, so likelihoods
//! always see whole clusters.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Document, DocumentStore};
use crate::model::{CandidateMode, FollowerGraph, Hyperparams};
use crate::sampler::{ClusteringResult, SamplerState, TraceRow};
use crate::scalar::Real;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("{0}")]
    Corpus(#[from] CorpusError),
    #[error("document {id} uses word id {word} outside the vocabulary of size {vocab_size}")]
    UnknownWord {
        id: String,
        word: u32,
        vocab_size: usize,
    },
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    CheckpointVersion { found: u32 },
    #[error("checkpoint is internally inconsistent: {0}")]
    CheckpointCorrupt(String),
}

/// Settings for one stream: the lag window, the per-arrival resampling
/// budget, and the annealing schedule applied within each arrival's
/// budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StreamConfig<R: Real> {
    /// Trailing window in timestamp units; documents older than
    /// `newest - window_lag` freeze. None disables freezing entirely.
    pub window_lag: Option<i64>,
    /// Gibbs passes over the window per pushed document.
    pub budget: usize,
    /// Annealing temperature on the tail of each per-push budget.
    pub temperature: R,
    /// Fraction of the budget completed before annealing starts.
    pub anneal_start_fraction: f64,
    pub seed: u64,
}

impl<R: Real> Default for StreamConfig<R> {
    fn default() -> StreamConfig<R> {
        StreamConfig {
            window_lag: Some(432_000),
            budget: 500,
            temperature: crate::scalar::real(2.0),
            anneal_start_fraction: 0.8,
            seed: 0,
        }
    }
}

impl<R: Real> StreamConfig<R> {
    pub fn validate(&self) {
        if let Some(lag) = self.window_lag {
            assert!(lag >= 0, "window lag must be non-negative");
        }
        assert!(self.temperature >= R::one(), "temperature must be >= 1");
        assert!(
            (0.0..=1.0).contains(&self.anneal_start_fraction),
            "anneal start fraction must lie in [0, 1]"
        );
    }

    /// Inverse temperature at a 0-based position within one push's
    /// budget. Position 0 also tempers the arrival's initial link draw.
    fn inverse_temperature_at(&self, position: usize) -> R {
        let start = self.anneal_start_fraction * self.budget as f64;
        if (position as f64) >= start {
            R::one() / self.temperature
        } else {
            R::one()
        }
    }
}

/// Wall-clock record of one arrival, for cost-trend monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushRecord {
    /// 0-based arrival index.
    pub index: u64,
    pub seconds: f64,
    /// Window population after this push (resampled documents).
    pub window_len: usize,
    pub num_clusters: usize,
}

/// Online inference state: the growing document store, the sampler over
/// it, and the freeze bookkeeping.
#[derive(Debug, Clone)]
pub struct StreamState<R: Real> {
    store: DocumentStore,
    vocab_size: usize,
    config: StreamConfig<R>,
    sampler: SamplerState<R>,
    /// Documents before this index have frozen links.
    frozen_boundary: usize,
    /// Link values recorded the moment each document froze, index-aligned
    /// with `0..frozen_boundary`. These must equal the final links.
    frozen_links: Vec<usize>,
    push_count: u64,
    timings: Vec<PushRecord>,
    total_seconds: f64,
}

impl<R: Real> StreamState<R> {
    pub fn new(vocab_size: usize, hyper: Hyperparams<R>, config: StreamConfig<R>) -> StreamState<R> {
        config.validate();
        let store = DocumentStore::new();
        let sampler = SamplerState::new(
            &store,
            vocab_size,
            hyper,
            CandidateMode::WindowFrom(0),
            config.seed,
        );
        StreamState {
            store,
            vocab_size,
            config,
            sampler,
            frozen_boundary: 0,
            frozen_links: Vec::new(),
            push_count: 0,
            timings: Vec::new(),
            total_seconds: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn store(&self) -> &DocumentStore {
        &self.store
    }

    pub fn config(&self) -> &StreamConfig<R> {
        &self.config
    }

    pub fn hyper(&self) -> &Hyperparams<R> {
        self.sampler.hyper()
    }

    pub fn graph(&self) -> &FollowerGraph {
        self.sampler.graph()
    }

    pub fn num_clusters(&self) -> usize {
        self.sampler.num_clusters()
    }

    pub fn frozen_boundary(&self) -> usize {
        self.frozen_boundary
    }

    /// Snapshot of each frozen document's link taken at freeze time.
    pub fn frozen_links(&self) -> &[usize] {
        &self.frozen_links
    }

    pub fn push_count(&self) -> u64 {
        self.push_count
    }

    pub fn timings(&self) -> &[PushRecord] {
        &self.timings
    }

    /// Panics if any frozen link differs from its freeze-time snapshot.
    pub fn assert_frozen_immutable(&self) {
        for (j, &snap) in self.frozen_links.iter().enumerate() {
            assert_eq!(
                self.sampler.graph().link(j),
                snap,
                "frozen link of document {j} changed after freezing"
            );
        }
    }

    /// Adds one document and runs the per-arrival resampling budget over
    /// the window. Timestamps must be non-decreasing across pushes.
    pub fn push_document(&mut self, doc: Document) -> Result<(), StreamError> {
        for &(w, _) in doc.counts() {
            if (w as usize) >= self.vocab_size {
                return Err(StreamError::UnknownWord {
                    id: doc.id().to_string(),
                    word: w,
                    vocab_size: self.vocab_size,
                });
            }
        }
        let started = Instant::now();
        let i = self.store.push_monotone(doc)?;
        self.sampler.append_self_linked(&self.store);

        let t_new = self.store.timestamp(i);
        let boundary = match self.config.window_lag {
            Some(lag) => self
                .store
                .first_index_at_or_after(t_new.saturating_sub(lag))
                .max(self.frozen_boundary),
            None => 0,
        };
        for j in self.frozen_boundary..boundary {
            self.frozen_links.push(self.sampler.graph().link(j));
        }
        self.frozen_boundary = boundary;
        self.sampler.set_mode(CandidateMode::WindowFrom(boundary));

        // The arrival's initial link is drawn from the same conditional
        // the budget loop uses, at the schedule's starting temperature.
        self.sampler
            .resample_link(&self.store, i, self.config.inverse_temperature_at(0));
        let n = self.store.len();
        for position in 0..self.config.budget {
            let inv_t = self.config.inverse_temperature_at(position);
            for j in boundary..n {
                self.sampler.resample_link(&self.store, j, inv_t);
            }
        }

        let seconds = started.elapsed().as_secs_f64();
        self.total_seconds += seconds;
        self.timings.push(PushRecord {
            index: self.push_count,
            seconds,
            window_len: n - boundary,
            num_clusters: self.sampler.num_clusters(),
        });
        self.push_count += 1;
        Ok(())
    }

    /// Freezes everything and reports the final clustering. The single
    /// trace row scores the final state with unrestricted candidates so
    /// the value is comparable with offline runs.
    pub fn finalize(mut self) -> ClusteringResult<R> {
        for j in self.frozen_boundary..self.store.len() {
            self.frozen_links.push(self.sampler.graph().link(j));
        }
        self.frozen_boundary = self.store.len();
        if self.store.is_empty() {
            return ClusteringResult::empty(*self.sampler.hyper(), self.config.seed);
        }
        self.sampler.set_mode(CandidateMode::All);
        let joint = self.sampler.joint_log_prob(&self.store);
        let hyper = *self.sampler.hyper();
        let partition = crate::model::components(self.sampler.graph());
        let assignments = (0..self.store.len())
            .map(|i| crate::sampler::Assignment {
                id: self.store.doc(i).id().to_string(),
                cluster: partition.cluster_of(i),
                link: Some(self.store.doc(self.sampler.graph().link(i)).id().to_string()),
            })
            .collect();
        ClusteringResult {
            assignments,
            hyper,
            seed: self.config.seed,
            num_clusters: self.sampler.num_clusters(),
            trace: vec![TraceRow {
                iteration: self.push_count as usize,
                joint_log_prob: joint,
                alpha: hyper.alpha,
                decay_scale: hyper.decay_scale,
                eta: hyper.eta,
                num_clusters: self.sampler.num_clusters(),
            }],
            elapsed_seconds: self.total_seconds,
        }
    }

    /// Serializable snapshot of everything needed to resume the stream.
    pub fn checkpoint(&self) -> Checkpoint<R> {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            hyper: *self.sampler.hyper(),
            vocab_size: self.vocab_size,
            docs: self.store.docs().to_vec(),
            links: self.sampler.graph().links().to_vec(),
            frozen_boundary: self.frozen_boundary,
            frozen_links: self.frozen_links.clone(),
            push_count: self.push_count,
            rng: self.sampler.rng().clone(),
        }
    }

    /// Rebuilds a stream from a checkpoint. Derived state (clusters,
    /// in-links, partition labels) is recomputed from the stored links
    /// and validated.
    pub fn from_checkpoint(cp: Checkpoint<R>) -> Result<StreamState<R>, StreamError> {
        if cp.version != CHECKPOINT_VERSION {
            return Err(StreamError::CheckpointVersion { found: cp.version });
        }
        cp.config.validate();
        let n = cp.docs.len();
        if cp.links.len() != n {
            return Err(StreamError::CheckpointCorrupt(format!(
                "{} links for {} documents",
                cp.links.len(),
                n
            )));
        }
        if cp.frozen_boundary > n || cp.frozen_links.len() != cp.frozen_boundary {
            return Err(StreamError::CheckpointCorrupt(format!(
                "frozen boundary {} with {} snapshots over {} documents",
                cp.frozen_boundary,
                cp.frozen_links.len(),
                n
            )));
        }
        for (j, (&snap, &live)) in cp.frozen_links.iter().zip(&cp.links).enumerate() {
            if snap != live {
                return Err(StreamError::CheckpointCorrupt(format!(
                    "frozen snapshot of document {j} disagrees with its link"
                )));
            }
        }
        let mut store = DocumentStore::new();
        for doc in cp.docs {
            for &(w, _) in doc.counts() {
                if (w as usize) >= cp.vocab_size {
                    return Err(StreamError::UnknownWord {
                        id: doc.id().to_string(),
                        word: w,
                        vocab_size: cp.vocab_size,
                    });
                }
            }
            store.push_monotone(doc)?;
        }
        for (i, &j) in cp.links.iter().enumerate() {
            if j >= n {
                return Err(StreamError::CheckpointCorrupt(format!(
                    "link of document {i} points at {j}, past the store"
                )));
            }
        }
        let sampler = SamplerState::from_graph(
            &store,
            cp.vocab_size,
            cp.hyper,
            CandidateMode::WindowFrom(cp.frozen_boundary),
            FollowerGraph::from_links(cp.links),
            cp.rng,
        );
        Ok(StreamState {
            store,
            vocab_size: cp.vocab_size,
            config: cp.config,
            sampler,
            frozen_boundary: cp.frozen_boundary,
            frozen_links: cp.frozen_links,
            push_count: cp.push_count,
            timings: Vec::new(),
            total_seconds: 0.0,
        })
    }
}

/// Versioned JSON-serializable snapshot of a [`StreamState`]. The format
/// stores the raw inputs (documents, links, RNG state) and freeze
/// bookkeeping; everything else is derived on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<R: Real> {
    pub version: u32,
    pub config: StreamConfig<R>,
    pub hyper: Hyperparams<R>,
    pub vocab_size: usize,
    pub docs: Vec<Document>,
    pub links: Vec<usize>,
    pub frozen_boundary: usize,
    pub frozen_links: Vec<usize>,
    pub push_count: u64,
    pub rng: ChaCha8Rng,
}
