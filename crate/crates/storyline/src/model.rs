//! Generative core: the time-decayed link prior, the collapsed
//! Dirichlet-Multinomial word likelihood, and the partition implied by
//! follower links.
//!
//! Every document i carries one outgoing link c_i. Linking to itself
//! (weight `alpha`) seeds a new storyline; linking to another document
//! (weight decaying exponentially in the time gap) joins storylines.
//! The clustering is the set of connected components of the undirected
//! link graph. Words in a cluster share one multinomial with a symmetric
//! Dirichlet prior, integrated out in closed form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DocumentStore, WordId};
use crate::math::ln_gamma_ratio;
use crate::scalar::{real, real_of_count, Real};

/// The three scalar knobs of the model: self-link mass, decay time scale
/// in seconds, and the Dirichlet concentration of the word model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Hyperparams<R: Real> {
    /// Self-link mass; larger values favor more storylines.
    pub alpha: R,
    /// Time scale of the link decay, in the timestamp unit (seconds).
    pub decay_scale: R,
    /// Symmetric Dirichlet concentration of the per-cluster word model.
    pub eta: R,
}

impl<R: Real> Hyperparams<R> {
    pub fn new(alpha: R, decay_scale: R, eta: R) -> Hyperparams<R> {
        assert!(
            alpha > R::zero() && decay_scale > R::zero() && eta > R::zero(),
            "hyperparameters must be strictly positive"
        );
        Hyperparams {
            alpha,
            decay_scale,
            eta,
        }
    }

    /// Unit self-link mass, one-day decay scale, fallback concentration.
    pub fn standard() -> Hyperparams<R> {
        Hyperparams::new(R::one(), real(86_400.0), real(0.1))
    }
}

/// Exponential decay of link affinity with the time gap: `exp(-|Δt|/a)`.
///
/// Symmetric in its time arguments; an infinite scale makes the prior
/// flat (weight 1 for every pair).
pub fn distance_decay<R: Real>(t_i: i64, t_j: i64, decay_scale: R) -> R {
    let gap: R = real_of_count(t_i.abs_diff(t_j));
    (-(gap / decay_scale)).exp()
}

/// Unnormalized prior weight for document `i` linking to `j`: `alpha` for
/// the self-link, otherwise the time decay. Normalization over the
/// candidate set is the caller's job.
pub fn link_prior_weight<R: Real>(
    store: &DocumentStore,
    i: usize,
    j: usize,
    hyper: &Hyperparams<R>,
) -> R {
    if i == j {
        hyper.alpha
    } else {
        distance_decay(store.timestamp(i), store.timestamp(j), hyper.decay_scale)
    }
}

/// One outgoing link per document; self-links allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerGraph {
    links: Vec<usize>,
}

impl FollowerGraph {
    /// Every document its own storyline.
    pub fn self_links(n: usize) -> FollowerGraph {
        FollowerGraph {
            links: (0..n).collect(),
        }
    }

    pub fn from_links(links: Vec<usize>) -> FollowerGraph {
        let n = links.len();
        assert!(
            links.iter().all(|&j| j < n),
            "link target out of range"
        );
        FollowerGraph { links }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn link(&self, i: usize) -> usize {
        self.links[i]
    }

    pub fn set_link(&mut self, i: usize, j: usize) {
        assert!(j < self.links.len(), "link target out of range");
        self.links[i] = j;
    }

    /// Appends a new document linked to itself; returns its index.
    pub fn push_self_link(&mut self) -> usize {
        let i = self.links.len();
        self.links.push(i);
        i
    }

    pub fn links(&self) -> &[usize] {
        &self.links
    }
}

/// Cluster label per document. Labels are each cluster's smallest member
/// index, so they are stable across runs and relabelings of the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    cluster_ids: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    pub fn from_cluster_ids(cluster_ids: Vec<usize>) -> Partition {
        let mut distinct: Vec<usize> = cluster_ids.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Partition {
            cluster_ids,
            num_clusters: distinct.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_ids.is_empty()
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_ids[i]
    }

    pub fn cluster_ids(&self) -> &[usize] {
        &self.cluster_ids
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }
}

/// Connected components of the undirected link graph.
///
/// Deterministic: each cluster is labeled by its smallest member index.
pub fn components(graph: &FollowerGraph) -> Partition {
    let n = graph.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for i in 0..n {
        let ri = find(&mut parent, i);
        let rj = find(&mut parent, graph.link(i));
        if ri != rj {
            // Attach the larger root under the smaller so every final
            // root is its component's minimum index.
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            parent[hi] = lo;
        }
    }

    let mut cluster_ids = vec![0usize; n];
    let mut num_clusters = 0;
    for (i, id) in cluster_ids.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        if r == i {
            num_clusters += 1;
        }
        *id = r;
    }
    Partition {
        cluster_ids,
        num_clusters,
    }
}

/// Word-count sufficient statistics of one cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterStats {
    counts: BTreeMap<WordId, u32>,
    total: u64,
    size: usize,
}

impl ClusterStats {
    pub fn new() -> ClusterStats {
        ClusterStats::default()
    }

    pub fn from_doc(doc: &Document) -> ClusterStats {
        let mut stats = ClusterStats::new();
        stats.add_doc(doc);
        stats
    }

    pub fn add_doc(&mut self, doc: &Document) {
        for &(w, c) in doc.counts() {
            *self.counts.entry(w).or_insert(0) += c;
        }
        self.total += doc.total() as u64;
        self.size += 1;
    }

    pub fn remove_doc(&mut self, doc: &Document) {
        for &(w, c) in doc.counts() {
            let slot = self
                .counts
                .get_mut(&w)
                .expect("removing counts that were never added");
            *slot = slot.checked_sub(c).expect("cluster word count underflow");
            if *slot == 0 {
                self.counts.remove(&w);
            }
        }
        self.total = self
            .total
            .checked_sub(doc.total() as u64)
            .expect("cluster total underflow");
        self.size = self.size.checked_sub(1).expect("cluster size underflow");
    }

    pub fn absorb(&mut self, other: &ClusterStats) {
        for (w, c) in other.iter() {
            *self.counts.entry(w).or_insert(0) += c;
        }
        self.total += other.total;
        self.size += other.size;
    }

    pub fn subtract(&mut self, other: &ClusterStats) {
        for (w, c) in other.iter() {
            let slot = self
                .counts
                .get_mut(&w)
                .expect("subtracting counts that were never added");
            *slot = slot.checked_sub(c).expect("cluster word count underflow");
            if *slot == 0 {
                self.counts.remove(&w);
            }
        }
        self.total = self
            .total
            .checked_sub(other.total)
            .expect("cluster total underflow");
        self.size = self
            .size
            .checked_sub(other.size)
            .expect("cluster size underflow");
    }

    /// Number of member documents.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Total token count over members.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct words with nonzero count.
    pub fn distinct_words(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, w: WordId) -> u32 {
        self.counts.get(&w).copied().unwrap_or(0)
    }

    /// Counts in ascending word-id order.
    pub fn iter(&self) -> impl Iterator<Item = (WordId, u32)> + '_ {
        self.counts.iter().map(|(&w, &c)| (w, c))
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }
}

/// Log marginal likelihood of a cluster's words with the shared
/// multinomial integrated out under a symmetric Dirichlet prior:
/// `lnΓ(Vη) − lnΓ(Vη + total) + Σ_w [lnΓ(η + n_w) − lnΓ(η)]`.
///
/// An empty cluster scores 0 (probability 1 of no data).
pub fn dcm_log_likelihood<R: Real>(stats: &ClusterStats, vocab_size: usize, eta: R) -> R {
    dcm_log_likelihood_counts(stats.iter().map(|(_, c)| c), stats.total(), vocab_size, eta)
}

/// [`dcm_log_likelihood`] over raw counts, so single documents can be
/// scored without building stats.
pub fn dcm_log_likelihood_counts<R: Real>(
    counts: impl Iterator<Item = u32>,
    total: u64,
    vocab_size: usize,
    eta: R,
) -> R {
    if total == 0 {
        return R::zero();
    }
    let v_eta = real_of_count::<R>(vocab_size as u64) * eta;
    let mut acc = -ln_gamma_ratio(v_eta, total);
    for c in counts {
        acc += ln_gamma_ratio(eta, c as u64);
    }
    acc
}

/// Log change in total likelihood from merging two disjoint clusters:
/// `dcm(A ∪ B) − dcm(A) − dcm(B)`.
///
/// Only words present in BOTH clusters contribute gamma terms (plus the
/// total-count normalizers), which is what makes cluster-granularity
/// resampling cheap. The computation is exactly symmetric: each shared
/// word enters through the min and max of its two counts, totals through
/// their min and max, and the shared words are visited in ascending id
/// order regardless of argument order.
pub fn merge_log_ratio<R: Real>(
    a: &ClusterStats,
    b: &ClusterStats,
    vocab_size: usize,
    eta: R,
) -> R {
    if a.total() == 0 || b.total() == 0 {
        return R::zero();
    }
    let v_eta = real_of_count::<R>(vocab_size as u64) * eta;
    let (t_min, t_max) = if a.total() <= b.total() {
        (a.total(), b.total())
    } else {
        (b.total(), a.total())
    };
    let mut acc = ln_gamma_ratio(v_eta, t_min)
        - ln_gamma_ratio(v_eta + real_of_count::<R>(t_max), t_min);

    // Iterate the cluster with fewer distinct words, probing the other.
    let (small, large) = if a.distinct_words() <= b.distinct_words() {
        (a, b)
    } else {
        (b, a)
    };
    for (w, c_small) in small.iter() {
        let c_large = large.count(w);
        if c_large == 0 {
            continue;
        }
        let (c_min, c_max) = if c_small <= c_large {
            (c_small, c_large)
        } else {
            (c_large, c_small)
        };
        acc = acc + ln_gamma_ratio(eta + real_of_count::<R>(c_max as u64), c_min as u64)
            - ln_gamma_ratio(eta, c_min as u64);
    }
    acc
}

/// Which documents may serve as link targets for a given document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateMode {
    /// Every other document (batch inference).
    All,
    /// Only earlier store positions. With a flat decay this reduces the
    /// link prior to the classic sequential seating process, which is
    /// what the distribution-level tests enumerate against.
    Sequential,
    /// Only store positions at or after the bound (fixed-lag window).
    WindowFrom(usize),
}

/// Half-open store-index range that can carry nonzero prior weight for
/// document `i` (the range may include `i` itself; callers skip it).
///
/// The range is clipped to where the decay is representable: far enough
/// out the weight underflows to exactly zero, so clipped-off candidates
/// contribute nothing to any normalizer and the clipping is
/// behavior-preserving rather than an approximation.
pub fn candidate_range<R: Real>(
    store: &DocumentStore,
    i: usize,
    mode: CandidateMode,
    decay_scale: R,
) -> (usize, usize) {
    let n = store.len();
    let t = store.timestamp(i);
    let band = underflow_band(decay_scale);
    // Casts saturate, so infinite or overflowing bands clip to the ends.
    let lo_t = (t as f64 - band) as i64;
    let hi_t = (t as f64 + band) as i64;
    let mut lo = store.first_index_at_or_after(lo_t);
    let mut hi = if hi_t == i64::MAX {
        n
    } else {
        store.first_index_at_or_after(hi_t.saturating_add(1))
    };
    match mode {
        CandidateMode::All => {}
        CandidateMode::Sequential => hi = hi.min(i),
        CandidateMode::WindowFrom(bound) => lo = lo.max(bound),
    }
    (lo, hi.max(lo))
}

/// Time gap beyond which `exp(-gap/scale)` is exactly zero in `R`,
/// padded to stay conservative (never excludes a nonzero weight).
fn underflow_band<R: Real>(decay_scale: R) -> f64 {
    let tiny = R::min_positive_value() * R::epsilon();
    let cut = 2.0 - tiny.to_f64().map(f64::ln).unwrap_or(f64::NEG_INFINITY);
    decay_scale.to_f64().unwrap_or(f64::INFINITY) * cut + 1.0
}

/// Log joint probability of a full link configuration: the normalized
/// link prior summed over documents plus the collapsed word likelihood
/// summed over clusters. The prior normalizer for document `i` is
/// `alpha + Σ_{j ≠ i in candidates(i)} decay(i, j)`.
pub fn joint_log_prob<R: Real>(
    store: &DocumentStore,
    graph: &FollowerGraph,
    vocab_size: usize,
    hyper: &Hyperparams<R>,
    mode: CandidateMode,
) -> R {
    assert_eq!(store.len(), graph.len(), "graph must cover the store");
    let mut acc = R::zero();
    for i in 0..store.len() {
        let (lo, hi) = candidate_range(store, i, mode, hyper.decay_scale);
        let mut z = hyper.alpha;
        for j in lo..hi {
            if j != i {
                z += distance_decay(
                    store.timestamp(i),
                    store.timestamp(j),
                    hyper.decay_scale,
                );
            }
        }
        let w = link_prior_weight(store, i, graph.link(i), hyper);
        acc = acc + w.ln() - z.ln();
    }

    let partition = components(graph);
    let mut stats: BTreeMap<usize, ClusterStats> = BTreeMap::new();
    for i in 0..store.len() {
        stats
            .entry(partition.cluster_of(i))
            .or_default()
            .add_doc(store.doc(i));
    }
    for cluster in stats.values() {
        acc += dcm_log_likelihood(cluster, vocab_size, hyper.eta);
    }
    acc
}

/// Posterior mean word distribution of a cluster:
/// `(n_w + η) / (total + Vη)`. An empty cluster is uniform.
pub fn cluster_topic_estimate<R: Real>(stats: &ClusterStats, vocab_size: usize, eta: R) -> Vec<R> {
    let denom = real_of_count::<R>(stats.total()) + real_of_count::<R>(vocab_size as u64) * eta;
    (0..vocab_size)
        .map(|w| (real_of_count::<R>(stats.count(w as WordId) as u64) + eta) / denom)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, RawRecord};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn doc(id: &str, t: i64, word_ids: &[WordId]) -> Document {
        Document::from_word_ids(id, t, word_ids)
    }

    fn store_at(times: &[i64]) -> DocumentStore {
        let records = times
            .iter()
            .enumerate()
            .map(|(i, &t)| RawRecord {
                id: format!("d{i:03}"),
                timestamp: t,
                text: String::new(),
            })
            .collect();
        ingest(records).unwrap().store
    }

    #[test]
    fn decay_at_known_gaps() {
        assert_eq!(distance_decay::<f64>(7, 7, 100.0), 1.0);
        assert_relative_eq!(
            distance_decay::<f64>(0, 100, 100.0),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            distance_decay::<f64>(0, 300, 100.0),
            (-3.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn decay_is_symmetric_and_flat_at_infinite_scale() {
        assert_eq!(
            distance_decay::<f64>(3, 900, 7.0),
            distance_decay::<f64>(900, 3, 7.0)
        );
        assert_eq!(distance_decay::<f64>(0, 1 << 40, f64::INFINITY), 1.0);
    }

    #[test]
    fn prior_weight_self_link_is_alpha() {
        let store = store_at(&[0, 100]);
        let hyper = Hyperparams::new(0.5, 100.0, 1.0);
        assert_eq!(link_prior_weight(&store, 0, 0, &hyper), 0.5);
        assert_relative_eq!(
            link_prior_weight(&store, 0, 1, &hyper),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dcm_empty_cluster_is_zero() {
        assert_eq!(dcm_log_likelihood::<f64>(&ClusterStats::new(), 5, 0.3), 0.0);
    }

    #[test]
    fn dcm_hand_values_two_word_vocab() {
        // One token out of two equally likely words: probability 1/2.
        let one = ClusterStats::from_doc(&doc("a", 0, &[0]));
        assert_relative_eq!(
            dcm_log_likelihood::<f64>(&one, 2, 1.0),
            -(2.0f64.ln()),
            max_relative = 1e-12
        );
        // One of each word: Γ(2)/Γ(4) · Γ(2)Γ(2) = 1/6.
        let pair = ClusterStats::from_doc(&doc("a", 0, &[0, 1]));
        assert_relative_eq!(
            dcm_log_likelihood::<f64>(&pair, 2, 1.0),
            -(6.0f64.ln()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dcm_single_word_vocab_is_exactly_zero() {
        // With V = 1 the only word soaks up all the mass; the normalizer
        // and the word term must cancel exactly, not just approximately.
        for &n in &[1usize, 3, 16, 17, 40] {
            let ids = vec![0u32; n];
            let stats = ClusterStats::from_doc(&doc("a", 0, &ids));
            assert_eq!(dcm_log_likelihood::<f64>(&stats, 1, 0.37), 0.0);
        }
    }

    #[test]
    fn dcm_sums_to_one_over_all_count_vectors() {
        // V=2, total=3: Σ over count vectors of multinomial(counts) ·
        // exp(dcm) must be 1 (the DCM is a distribution over bags).
        let eta = 0.7f64;
        let mut sum = 0.0;
        for k in 0..=3u32 {
            let ids: Vec<WordId> = std::iter::repeat_n(0, k as usize)
                .chain(std::iter::repeat_n(1, (3 - k) as usize))
                .collect();
            let stats = ClusterStats::from_doc(&doc("a", 0, &ids));
            let coeff = match k {
                0 | 3 => 1.0,
                _ => 3.0,
            };
            sum += coeff * dcm_log_likelihood(&stats, 2, eta).exp();
        }
        assert_relative_eq!(sum, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn merge_with_empty_side_is_zero() {
        let a = ClusterStats::from_doc(&doc("a", 0, &[0, 1, 1]));
        assert_eq!(merge_log_ratio::<f64>(&a, &ClusterStats::new(), 3, 0.5), 0.0);
        assert_eq!(merge_log_ratio::<f64>(&ClusterStats::new(), &a, 3, 0.5), 0.0);
    }

    #[test]
    fn merge_hand_value_two_singletons() {
        // A holds word 0, B holds word 1, V=2, η=1:
        // dcm(A∪B) − dcm(A) − dcm(B) = −ln6 − 2·(−ln2) = ln(2/3).
        let a = ClusterStats::from_doc(&doc("a", 0, &[0]));
        let b = ClusterStats::from_doc(&doc("b", 0, &[1]));
        assert_relative_eq!(
            merge_log_ratio::<f64>(&a, &b, 2, 1.0),
            (2.0f64 / 3.0).ln(),
            max_relative = 1e-12
        );
    }

    fn arbitrary_stats(max_word: u32) -> impl Strategy<Value = ClusterStats> {
        proptest::collection::btree_map(0..max_word, 1..6u32, 0..12).prop_map(|m| {
            let ids: Vec<WordId> = m
                .iter()
                .flat_map(|(&w, &c)| std::iter::repeat_n(w, c as usize))
                .collect();
            ClusterStats::from_doc(&Document::from_word_ids("t", 0, &ids))
        })
    }

    proptest! {
        #[test]
        fn merge_is_exactly_symmetric(
            a in arbitrary_stats(40),
            b in arbitrary_stats(40),
        ) {
            let ab = merge_log_ratio::<f64>(&a, &b, 50, 0.25);
            let ba = merge_log_ratio::<f64>(&b, &a, 50, 0.25);
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn merge_matches_naive_three_term_difference(
            a in arbitrary_stats(50),
            b in arbitrary_stats(50),
        ) {
            let eta = 0.4f64;
            let v = 50;
            let mut union = a.clone();
            union.absorb(&b);
            let naive = dcm_log_likelihood(&union, v, eta)
                - dcm_log_likelihood(&a, v, eta)
                - dcm_log_likelihood(&b, v, eta);
            let fast = merge_log_ratio(&a, &b, v, eta);
            prop_assert!((fast - naive).abs() < 1e-8, "fast {} vs naive {}", fast, naive);
        }
    }

    #[test]
    fn stats_add_remove_round_trips() {
        let d1 = doc("a", 0, &[0, 0, 2]);
        let d2 = doc("b", 0, &[2, 3]);
        let mut stats = ClusterStats::from_doc(&d1);
        stats.add_doc(&d2);
        assert_eq!(stats.size(), 2);
        assert_eq!(stats.total(), 5);
        assert_eq!(stats.count(2), 2);
        stats.remove_doc(&d1);
        assert_eq!(stats, ClusterStats::from_doc(&d2));
        stats.remove_doc(&d2);
        assert!(stats.is_empty());
        assert_eq!(stats, ClusterStats::new());
    }

    #[test]
    fn components_all_self_links() {
        let p = components(&FollowerGraph::self_links(4));
        assert_eq!(p.cluster_ids(), &[0, 1, 2, 3]);
        assert_eq!(p.num_clusters(), 4);
    }

    #[test]
    fn components_chain_and_singleton() {
        let p = components(&FollowerGraph::from_links(vec![0, 0, 1, 3]));
        assert_eq!(p.cluster_ids(), &[0, 0, 0, 3]);
        assert_eq!(p.num_clusters(), 2);
    }

    #[test]
    fn components_two_cycle_is_one_cluster() {
        let p = components(&FollowerGraph::from_links(vec![1, 0]));
        assert_eq!(p.cluster_ids(), &[0, 0]);
        assert_eq!(p.num_clusters(), 1);
    }

    #[test]
    fn components_ignore_link_direction() {
        let forward = components(&FollowerGraph::from_links(vec![1, 1, 2]));
        let backward = components(&FollowerGraph::from_links(vec![0, 0, 2]));
        assert_eq!(forward, backward);
    }

    #[test]
    fn joint_single_doc_is_likelihood_only() {
        let records = vec![RawRecord {
            id: "a".into(),
            timestamp: 0,
            text: "x y".into(),
        }];
        let out = ingest(records).unwrap();
        let hyper = Hyperparams::new(1.0, 100.0, 1.0);
        let graph = FollowerGraph::self_links(1);
        let joint = joint_log_prob(&out.store, &graph, 2, &hyper, CandidateMode::All);
        let stats = ClusterStats::from_doc(out.store.doc(0));
        assert_eq!(joint, dcm_log_likelihood(&stats, 2, 1.0));
    }

    #[test]
    fn joint_two_self_linked_docs_by_hand() {
        // Δt = a, α = 1: each doc picks self with probability
        // 1/(1 + e^{-1}); likelihood adds two singleton terms.
        let records = vec![
            RawRecord {
                id: "a".into(),
                timestamp: 0,
                text: "x".into(),
            },
            RawRecord {
                id: "b".into(),
                timestamp: 100,
                text: "y".into(),
            },
        ];
        let out = ingest(records).unwrap();
        let hyper = Hyperparams::new(1.0, 100.0, 1.0);
        let graph = FollowerGraph::self_links(2);
        let joint = joint_log_prob(&out.store, &graph, 2, &hyper, CandidateMode::All);
        let prior = 2.0 * (1.0 / (1.0 + (-1.0f64).exp())).ln();
        let like = 2.0 * -(2.0f64.ln());
        assert_relative_eq!(joint, prior + like, max_relative = 1e-12);
    }

    #[test]
    fn topic_estimate_examples() {
        let uniform = cluster_topic_estimate::<f64>(&ClusterStats::new(), 4, 0.5);
        assert_eq!(uniform, vec![0.25; 4]);
        let stats = ClusterStats::from_doc(&doc("a", 0, &[0]));
        let est = cluster_topic_estimate::<f64>(&stats, 2, 1.0);
        assert_relative_eq!(est[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(est[1], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(est.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn candidate_range_clips_only_underflowed_weights() {
        // Scale 1 s: the decay hits exact zero somewhere past 745 s.
        let store = store_at(&[0, 700, 10_000]);
        let (lo, hi) = candidate_range(&store, 0, CandidateMode::All, 1.0f64);
        assert_eq!((lo, hi), (0, 2));
        // The clipped candidate really does carry zero weight...
        assert_eq!(distance_decay::<f64>(0, 10_000, 1.0), 0.0);
        // ...while the retained far to one is subnormal but nonzero.
        assert!(distance_decay::<f64>(0, 700, 1.0) > 0.0);
    }

    #[test]
    fn candidate_range_respects_modes() {
        let store = store_at(&[0, 10, 20, 30]);
        let scale = 1e6f64;
        assert_eq!(candidate_range(&store, 2, CandidateMode::All, scale), (0, 4));
        assert_eq!(
            candidate_range(&store, 2, CandidateMode::Sequential, scale),
            (0, 2)
        );
        assert_eq!(
            candidate_range(&store, 2, CandidateMode::WindowFrom(1), scale),
            (1, 4)
        );
    }

    proptest! {
        #[test]
        fn joint_is_finite_for_valid_states(
            links in proptest::collection::vec(0..4usize, 4),
            times in proptest::collection::vec(0..1000i64, 4),
        ) {
            let records: Vec<RawRecord> = times
                .iter()
                .enumerate()
                .map(|(i, &t)| RawRecord {
                    id: format!("d{i}"),
                    timestamp: t,
                    text: "w x".into(),
                })
                .collect();
            let out = ingest(records).unwrap();
            let hyper = Hyperparams::new(0.8f64, 500.0, 0.5);
            let graph = FollowerGraph::from_links(links);
            let joint = joint_log_prob(
                &out.store,
                &graph,
                out.vocabulary.len(),
                &hyper,
                CandidateMode::All,
            );
            prop_assert!(joint.is_finite());
        }
    }
}
