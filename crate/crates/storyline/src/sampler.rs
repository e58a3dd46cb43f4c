//! Collapsed Gibbs inference over follower links, offline, plus the
//! finite-mixture baseline that ignores time.
//!
//! One resampling move cuts a document's outgoing link (splitting its
//! cluster if that disconnects it), then picks a new target. Outcomes are
//! enumerated at CLUSTER granularity: joining cluster k is weighted by
//! the total prior mass of k's candidate members times the likelihood
//! ratio of merging the two clusters, and the self-link is weighted by
//! alpha. The likelihood is constant across members of one cluster, so a
//! concrete target inside the chosen cluster is then drawn from prior
//! weights alone. Annealing raises outcome weights to an inverse
//! temperature before normalization.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentStore;
use crate::hyper::{gradient_step, HyperUpdateConfig};
use crate::math::normalize_log_weights;
use crate::model::{
    candidate_range, components, distance_decay, joint_log_prob, merge_log_ratio, CandidateMode,
    ClusterStats, FollowerGraph, Hyperparams, Partition,
};
use crate::scalar::{real, Real};

/// Iteration schedule shared by the offline sampler and the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SamplerConfig<R: Real> {
    /// Full Gibbs sweeps over the corpus.
    pub iterations: usize,
    /// Annealing temperature applied on the schedule tail; 1 disables
    /// annealing in effect.
    pub temperature: R,
    /// Fraction of iterations completed before annealing starts.
    pub anneal_start_fraction: f64,
    /// Interleaved gradient updates of alpha and the decay scale; None
    /// keeps hyperparameters fixed.
    pub hyper_update: Option<HyperUpdateConfig<R>>,
    pub seed: u64,
    /// Record a per-iteration trace row (joint log probability and
    /// hyperparameter values). Costs one extra prior scan per iteration.
    pub record_trace: bool,
}

impl<R: Real> Default for SamplerConfig<R> {
    fn default() -> SamplerConfig<R> {
        SamplerConfig {
            iterations: 500,
            temperature: real(2.0),
            anneal_start_fraction: 0.8,
            hyper_update: None,
            seed: 0,
            record_trace: true,
        }
    }
}

impl<R: Real> SamplerConfig<R> {
    pub fn validate(&self) {
        assert!(self.temperature >= R::one(), "temperature must be >= 1");
        assert!(
            (0.0..=1.0).contains(&self.anneal_start_fraction),
            "anneal start fraction must lie in [0, 1]"
        );
        if let Some(h) = &self.hyper_update {
            h.validate();
        }
    }

    /// Inverse temperature for a 0-based iteration index: 1 on the head
    /// of the schedule, 1/temperature from `anneal_start_fraction` on.
    pub fn inverse_temperature_at(&self, iteration: usize) -> R {
        let start = self.anneal_start_fraction * self.iterations as f64;
        if (iteration as f64) >= start {
            R::one() / self.temperature
        } else {
            R::one()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ClusterEntry {
    stats: ClusterStats,
    /// Member indices, ascending.
    members: Vec<usize>,
}

/// Mutable Gibbs state over a fixed document store: the link graph, the
/// partition it induces, and per-cluster word statistics, all maintained
/// incrementally.
///
/// The store itself is not owned; every operation takes it by reference
/// so the state stays cheap to clone and snapshot.
#[derive(Debug, Clone)]
pub struct SamplerState<R: Real> {
    vocab_size: usize,
    hyper: Hyperparams<R>,
    mode: CandidateMode,
    graph: FollowerGraph,
    /// For each document, the sorted list of documents linking TO it
    /// (self-links excluded). Together with the out-link this gives the
    /// undirected adjacency used for split detection.
    in_links: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
    clusters: BTreeMap<usize, ClusterEntry>,
    rng: ChaCha8Rng,
    iteration: usize,
    // Scratch buffers, reused across resampling moves.
    visited: Vec<u64>,
    visit_stamp: u64,
    mass: Vec<R>,
    mass_stamp: Vec<u64>,
    touch_stamp: u64,
    touched: Vec<usize>,
}

impl<R: Real> SamplerState<R> {
    /// Fresh state with every document linked to itself.
    pub fn new(
        store: &DocumentStore,
        vocab_size: usize,
        hyper: Hyperparams<R>,
        mode: CandidateMode,
        seed: u64,
    ) -> SamplerState<R> {
        Self::from_graph(
            store,
            vocab_size,
            hyper,
            mode,
            FollowerGraph::self_links(store.len()),
            ChaCha8Rng::seed_from_u64(seed),
        )
    }

    /// State rebuilt around an existing link configuration (checkpoint
    /// restore); all derived structures are recomputed from scratch.
    pub fn from_graph(
        store: &DocumentStore,
        vocab_size: usize,
        hyper: Hyperparams<R>,
        mode: CandidateMode,
        graph: FollowerGraph,
        rng: ChaCha8Rng,
    ) -> SamplerState<R> {
        let n = store.len();
        assert_eq!(graph.len(), n, "graph must cover the store");
        let mut in_links: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let j = graph.link(i);
            if j != i {
                in_links[j].push(i);
            }
        }
        // Push order is ascending in i, so each list is already sorted.
        let partition = components(&graph);
        let mut clusters: BTreeMap<usize, ClusterEntry> = BTreeMap::new();
        for i in 0..n {
            let entry = clusters
                .entry(partition.cluster_of(i))
                .or_insert_with(|| ClusterEntry {
                    stats: ClusterStats::new(),
                    members: Vec::new(),
                });
            entry.stats.add_doc(store.doc(i));
            entry.members.push(i);
        }
        SamplerState {
            vocab_size,
            hyper,
            mode,
            graph,
            in_links,
            cluster_of: partition.cluster_ids().to_vec(),
            clusters,
            rng,
            iteration: 0,
            visited: vec![0; n],
            visit_stamp: 0,
            mass: vec![R::zero(); n],
            mass_stamp: vec![0; n],
            touch_stamp: 0,
            touched: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn graph(&self) -> &FollowerGraph {
        &self.graph
    }

    pub fn hyper(&self) -> &Hyperparams<R> {
        &self.hyper
    }

    pub fn set_hyper(&mut self, hyper: Hyperparams<R>) {
        self.hyper = hyper;
    }

    pub fn mode(&self) -> CandidateMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: CandidateMode) {
        self.mode = mode;
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_stats(&self, cluster_id: usize) -> Option<&ClusterStats> {
        self.clusters.get(&cluster_id).map(|e| &e.stats)
    }

    pub fn partition(&self) -> Partition {
        Partition::from_cluster_ids(self.cluster_of.clone())
    }

    /// Appends a document (already pushed onto the store) as a fresh
    /// self-linked singleton.
    pub fn append_self_linked(&mut self, store: &DocumentStore) -> usize {
        assert_eq!(
            store.len(),
            self.graph.len() + 1,
            "store must have exactly one new document"
        );
        let i = self.graph.push_self_link();
        self.in_links.push(Vec::new());
        self.cluster_of.push(i);
        self.clusters.insert(
            i,
            ClusterEntry {
                stats: ClusterStats::from_doc(store.doc(i)),
                members: vec![i],
            },
        );
        self.visited.push(0);
        self.mass.push(R::zero());
        self.mass_stamp.push(0);
        i
    }

    /// Documents reachable from `start` over undirected links, sorted.
    fn collect_component(&mut self, start: usize) -> Vec<usize> {
        self.visit_stamp += 1;
        let stamp = self.visit_stamp;
        let visited = &mut self.visited;
        let graph = &self.graph;
        let in_links = &self.in_links;
        let mut out = vec![start];
        visited[start] = stamp;
        let mut head = 0;
        while head < out.len() {
            let x = out[head];
            head += 1;
            let l = graph.link(x);
            if l != x && visited[l] != stamp {
                visited[l] = stamp;
                out.push(l);
            }
            for &y in &in_links[x] {
                if visited[y] != stamp {
                    visited[y] = stamp;
                    out.push(y);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Cuts `i`'s outgoing link, splitting its cluster if the cut
    /// disconnects it. Afterwards `i` is self-linked and its cluster is
    /// exactly the documents still reachable from it.
    fn detach(&mut self, store: &DocumentStore, i: usize) {
        let old = self.graph.link(i);
        if old == i {
            return;
        }
        self.graph.set_link(i, i);
        remove_sorted(&mut self.in_links[old], i);

        let side = self.collect_component(i);
        let old_id = self.cluster_of[i];
        let old_len = self.clusters[&old_id].members.len();
        if side.len() == old_len {
            // Another path still connects i to its old cluster.
            return;
        }

        let mut side_stats = ClusterStats::new();
        for &x in &side {
            side_stats.add_doc(store.doc(x));
        }
        let entry = self.clusters.get_mut(&old_id).expect("cluster exists");
        entry.stats.subtract(&side_stats);
        entry.members = diff_sorted(&entry.members, &side);
        let remaining_min = entry.members[0];
        if remaining_min != old_id {
            let entry = self.clusters.remove(&old_id).expect("cluster exists");
            for &x in &entry.members {
                self.cluster_of[x] = remaining_min;
            }
            self.clusters.insert(remaining_min, entry);
        }
        let side_min = side[0];
        for &x in &side {
            self.cluster_of[x] = side_min;
        }
        self.clusters.insert(
            side_min,
            ClusterEntry {
                stats: side_stats,
                members: side,
            },
        );
    }

    /// Sets `i`'s link to `j`, merging clusters if they differ. `i` must
    /// currently be self-linked (detached).
    fn attach(&mut self, i: usize, j: usize) {
        debug_assert_eq!(self.graph.link(i), i, "attach requires a detached document");
        if i == j {
            return;
        }
        self.graph.set_link(i, j);
        insert_sorted(&mut self.in_links[j], i);
        let ci = self.cluster_of[i];
        let cj = self.cluster_of[j];
        if ci == cj {
            return;
        }
        let (keep, gone) = if ci < cj { (ci, cj) } else { (cj, ci) };
        let gone_entry = self.clusters.remove(&gone).expect("cluster exists");
        for &x in &gone_entry.members {
            self.cluster_of[x] = keep;
        }
        let keep_entry = self.clusters.get_mut(&keep).expect("cluster exists");
        keep_entry.stats.absorb(&gone_entry.stats);
        keep_entry.members = union_sorted(&keep_entry.members, &gone_entry.members);
    }

    /// Per-cluster prior masses reachable from `i`, ascending by cluster
    /// id, computed over the candidate range. Must be called after
    /// detach so cluster labels are current.
    fn cluster_prior_masses(&mut self, store: &DocumentStore, i: usize) -> Vec<(usize, R)> {
        let (lo, hi) = candidate_range(store, i, self.mode, self.hyper.decay_scale);
        self.touch_stamp += 1;
        let stamp = self.touch_stamp;
        self.touched.clear();
        for j in lo..hi {
            if j == i {
                continue;
            }
            let w = distance_decay(store.timestamp(i), store.timestamp(j), self.hyper.decay_scale);
            let k = self.cluster_of[j];
            if self.mass_stamp[k] != stamp {
                self.mass_stamp[k] = stamp;
                self.mass[k] = w;
                self.touched.push(k);
            } else {
                self.mass[k] += w;
            }
        }
        self.touched.sort_unstable();
        self.touched.iter().map(|&k| (k, self.mass[k])).collect()
    }

    /// Annealed outcome log-weights for a detached document: one entry
    /// per cluster with candidate mass (ascending id), then the
    /// self-link. Zero-mass clusters keep weight 0 (log -inf).
    fn outcome_log_weights(
        &mut self,
        store: &DocumentStore,
        i: usize,
        inverse_temperature: R,
    ) -> (Vec<(usize, R)>, Vec<R>) {
        let masses = self.cluster_prior_masses(store, i);
        let own = self.cluster_of[i];
        let own_stats = &self.clusters[&own].stats;
        let mut log_weights = Vec::with_capacity(masses.len() + 1);
        for &(k, mass) in &masses {
            let mut lw = mass.ln();
            if k != own {
                lw += merge_log_ratio(
                    own_stats,
                    &self.clusters[&k].stats,
                    self.vocab_size,
                    self.hyper.eta,
                );
            }
            log_weights.push(lw * inverse_temperature);
        }
        log_weights.push(self.hyper.alpha.ln() * inverse_temperature);
        (masses, log_weights)
    }

    /// Resamples document `i`'s link from its full conditional, tempered
    /// by `inverse_temperature` (1 = exact Gibbs).
    pub fn resample_link(&mut self, store: &DocumentStore, i: usize, inverse_temperature: R) {
        self.detach(store, i);
        let (masses, log_weights) = self.outcome_log_weights(store, i, inverse_temperature);
        let probs = normalize_log_weights(&log_weights);

        let mut u: R = real(self.rng.random::<f64>());
        let mut choice = probs.len() - 1;
        for (idx, &p) in probs.iter().enumerate() {
            if u < p {
                choice = idx;
                break;
            }
            u -= p;
        }

        if choice == masses.len() {
            // Self-link: detach already left i self-linked.
            return;
        }
        let (cluster, mass) = masses[choice];
        let target = self.draw_target_in_cluster(store, i, cluster, mass);
        self.attach(i, target);
    }

    /// Draws a concrete target inside the chosen cluster proportional to
    /// prior weights. The accumulation order matches the mass
    /// computation exactly, so the threshold never overshoots the total.
    fn draw_target_in_cluster(
        &mut self,
        store: &DocumentStore,
        i: usize,
        cluster: usize,
        mass: R,
    ) -> usize {
        let (lo, hi) = candidate_range(store, i, self.mode, self.hyper.decay_scale);
        let threshold = real::<R>(self.rng.random::<f64>()) * mass;
        let mut acc = R::zero();
        let mut fallback = None;
        for j in lo..hi {
            if j == i || self.cluster_of[j] != cluster {
                continue;
            }
            let w = distance_decay(store.timestamp(i), store.timestamp(j), self.hyper.decay_scale);
            if w > R::zero() {
                fallback = Some(j);
            }
            acc += w;
            if acc > threshold {
                return j;
            }
        }
        fallback.expect("chosen cluster has positive candidate mass")
    }

    /// One full Gibbs pass in store order.
    pub fn sweep(&mut self, store: &DocumentStore, inverse_temperature: R) {
        for i in 0..store.len() {
            self.resample_link(store, i, inverse_temperature);
        }
        self.iteration += 1;
    }

    /// Probability of each outcome (clusters with candidate mass in
    /// ascending id order, then the self-link as `None`) if `i` were
    /// resampled now. Pure: works on a clone of the state.
    pub fn link_outcome_distribution(
        &self,
        store: &DocumentStore,
        i: usize,
        inverse_temperature: R,
    ) -> Vec<(Option<usize>, R)> {
        let mut probe = self.clone();
        probe.detach(store, i);
        let (masses, log_weights) = probe.outcome_log_weights(store, i, inverse_temperature);
        let probs = normalize_log_weights(&log_weights);
        masses
            .iter()
            .map(|&(k, _)| Some(k))
            .chain(std::iter::once(None))
            .zip(probs)
            .collect()
    }

    /// Probability that a resample of `i` would set its link to each
    /// concrete target (index = target). Pure.
    // The candidate window index drives three parallel lookups; an
    // iterator chain would hide the window bounds.
    #[allow(clippy::needless_range_loop)]
    pub fn link_target_distribution(
        &self,
        store: &DocumentStore,
        i: usize,
        inverse_temperature: R,
    ) -> Vec<R> {
        let mut probe = self.clone();
        probe.detach(store, i);
        let (masses, log_weights) = probe.outcome_log_weights(store, i, inverse_temperature);
        let probs = normalize_log_weights(&log_weights);
        let mut out = vec![R::zero(); store.len()];
        out[i] = probs[masses.len()];
        let (lo, hi) = candidate_range(store, i, probe.mode, probe.hyper.decay_scale);
        for (idx, &(k, mass)) in masses.iter().enumerate() {
            if mass <= R::zero() {
                continue;
            }
            for j in lo..hi {
                if j == i || probe.cluster_of[j] != k {
                    continue;
                }
                let w = distance_decay(
                    store.timestamp(i),
                    store.timestamp(j),
                    probe.hyper.decay_scale,
                );
                out[j] = probs[idx] * (w / mass);
            }
        }
        out
    }

    /// Joint log probability of the current state under this state's
    /// candidate mode.
    pub fn joint_log_prob(&self, store: &DocumentStore) -> R {
        joint_log_prob(store, &self.graph, self.vocab_size, &self.hyper, self.mode)
    }

    /// Recomputes every derived structure from the link graph and
    /// panics on any mismatch. Test and debugging aid.
    pub fn assert_consistent(&self, store: &DocumentStore) {
        let partition = components(&self.graph);
        let mut stats: BTreeMap<usize, ClusterEntry> = BTreeMap::new();
        for i in 0..store.len() {
            let entry = stats
                .entry(partition.cluster_of(i))
                .or_insert_with(|| ClusterEntry {
                    stats: ClusterStats::new(),
                    members: Vec::new(),
                });
            entry.stats.add_doc(store.doc(i));
            entry.members.push(i);
        }
        assert_eq!(
            self.cluster_of,
            partition.cluster_ids(),
            "cluster labels diverge from graph components"
        );
        assert_eq!(
            self.clusters, stats,
            "cluster stats diverge from recomputed member sums"
        );
        for (j, list) in self.in_links.iter().enumerate() {
            let expect: Vec<usize> = (0..store.len())
                .filter(|&i| i != j && self.graph.link(i) == j)
                .collect();
            assert_eq!(list, &expect, "in-links diverge for document {j}");
        }
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    match v.binary_search(&x) {
        Ok(_) => panic!("duplicate in-link"),
        Err(pos) => v.insert(pos, x),
    }
}

fn remove_sorted(v: &mut Vec<usize>, x: usize) {
    let pos = v.binary_search(&x).expect("in-link must exist");
    v.remove(pos);
}

fn diff_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len().saturating_sub(b.len()));
    let mut bi = 0;
    for &x in a {
        while bi < b.len() && b[bi] < x {
            bi += 1;
        }
        if bi < b.len() && b[bi] == x {
            continue;
        }
        out.push(x);
    }
    out
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ai, mut bi) = (0, 0);
    while ai < a.len() && bi < b.len() {
        if a[ai] < b[bi] {
            out.push(a[ai]);
            ai += 1;
        } else {
            out.push(b[bi]);
            bi += 1;
        }
    }
    out.extend_from_slice(&a[ai..]);
    out.extend_from_slice(&b[bi..]);
    out
}

/// Final cluster and link of one document, keyed by its id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub cluster: usize,
    /// Target document id; the document's own id for a self-link. The
    /// baseline model has no links and writes null.
    pub link: Option<String>,
}

/// One recorded iteration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceRow<R: Real> {
    pub iteration: usize,
    pub joint_log_prob: R,
    pub alpha: R,
    pub decay_scale: R,
    pub eta: R,
    pub num_clusters: usize,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClusteringResult<R: Real> {
    pub assignments: Vec<Assignment>,
    pub hyper: Hyperparams<R>,
    pub seed: u64,
    pub num_clusters: usize,
    pub trace: Vec<TraceRow<R>>,
    /// Wall-clock seconds spent sampling. Reported separately and never
    /// serialized into assignment files, which must be byte-identical
    /// across reruns with one seed.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl<R: Real> ClusteringResult<R> {
    pub fn empty(hyper: Hyperparams<R>, seed: u64) -> ClusteringResult<R> {
        ClusteringResult {
            assignments: Vec::new(),
            hyper,
            seed,
            num_clusters: 0,
            trace: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    /// One JSON object per document, in store order.
    pub fn write_assignments_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for a in &self.assignments {
            serde_json::to_writer(&mut out, a)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// CSV trace with one row per recorded iteration.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,joint_log_prob,alpha,a,eta,num_clusters")?;
        for row in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.iteration,
                row.joint_log_prob,
                row.alpha,
                row.decay_scale,
                row.eta,
                row.num_clusters
            )?;
        }
        Ok(())
    }
}

fn assignments_from_links(store: &DocumentStore, graph: &FollowerGraph) -> Vec<Assignment> {
    let partition = components(graph);
    (0..store.len())
        .map(|i| Assignment {
            id: store.doc(i).id().to_string(),
            cluster: partition.cluster_of(i),
            link: Some(store.doc(graph.link(i)).id().to_string()),
        })
        .collect()
}

/// Offline inference: initializes all links to self and runs the
/// configured number of sweeps, optionally interleaving hyperparameter
/// gradient steps. An empty store yields an empty result.
pub fn run_offline<R: Real>(
    store: &DocumentStore,
    vocab_size: usize,
    hyper: Hyperparams<R>,
    config: &SamplerConfig<R>,
) -> ClusteringResult<R> {
    config.validate();
    if store.is_empty() {
        return ClusteringResult::empty(hyper, config.seed);
    }
    let started = Instant::now();
    let mut state = SamplerState::new(store, vocab_size, hyper, CandidateMode::All, config.seed);
    let mut trace = Vec::new();
    for iteration in 0..config.iterations {
        let inv_t = config.inverse_temperature_at(iteration);
        state.sweep(store, inv_t);
        if let Some(h) = &config.hyper_update {
            if (iteration + 1) % h.every == 0 {
                let next = gradient_step(store, state.graph(), state.mode(), state.hyper(), h);
                state.set_hyper(next);
            }
        }
        if config.record_trace {
            trace.push(TraceRow {
                iteration,
                joint_log_prob: state.joint_log_prob(store),
                alpha: state.hyper().alpha,
                decay_scale: state.hyper().decay_scale,
                eta: state.hyper().eta,
                num_clusters: state.num_clusters(),
            });
        }
    }
    ClusteringResult {
        assignments: assignments_from_links(store, state.graph()),
        hyper: *state.hyper(),
        seed: config.seed,
        num_clusters: state.num_clusters(),
        trace,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Finite Dirichlet-Multinomial mixture baseline ignoring time: K
/// components, symmetric Dirichlet prior over mixture weights, collapsed
/// Gibbs over assignments with the same annealing schedule. Output
/// clusters are relabeled to their smallest member index; assignments
/// carry no links.
pub fn run_baseline<R: Real>(
    store: &DocumentStore,
    vocab_size: usize,
    eta: R,
    k: usize,
    dirichlet_param: R,
    config: &SamplerConfig<R>,
) -> ClusteringResult<R> {
    config.validate();
    assert!(k >= 1, "need at least one mixture component");
    assert!(dirichlet_param > R::zero(), "Dirichlet parameter must be positive");
    let hyper = Hyperparams::new(R::one(), R::one(), eta);
    if store.is_empty() {
        return ClusteringResult::empty(hyper, config.seed);
    }
    let started = Instant::now();
    let n = store.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let doc_stats: Vec<ClusterStats> = (0..n).map(|i| ClusterStats::from_doc(store.doc(i))).collect();

    let mut assign: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut comp: Vec<ClusterStats> = vec![ClusterStats::new(); k];
    for i in 0..n {
        comp[assign[i]].add_doc(store.doc(i));
    }

    let mut trace = Vec::new();
    for iteration in 0..config.iterations {
        let inv_t = config.inverse_temperature_at(iteration);
        for i in 0..n {
            comp[assign[i]].remove_doc(store.doc(i));
            let mut log_weights = Vec::with_capacity(k);
            for c in comp.iter() {
                let occupancy = real::<R>(c.size() as f64) + dirichlet_param;
                let lw = occupancy.ln() + merge_log_ratio(&doc_stats[i], c, vocab_size, eta);
                log_weights.push(lw * inv_t);
            }
            let probs = normalize_log_weights(&log_weights);
            let mut u: R = real(rng.random::<f64>());
            let mut choice = k - 1;
            for (idx, &p) in probs.iter().enumerate() {
                if u < p {
                    choice = idx;
                    break;
                }
                u -= p;
            }
            assign[i] = choice;
            comp[choice].add_doc(store.doc(i));
        }
        if config.record_trace {
            trace.push(TraceRow {
                iteration,
                joint_log_prob: baseline_log_posterior(&comp, vocab_size, eta, dirichlet_param),
                alpha: hyper.alpha,
                decay_scale: hyper.decay_scale,
                eta,
                num_clusters: comp.iter().filter(|c| !c.is_empty()).count(),
            });
        }
    }

    // Relabel components to the smallest member store index.
    let mut label: Vec<Option<usize>> = vec![None; k];
    for i in 0..n {
        if label[assign[i]].is_none() {
            label[assign[i]] = Some(i);
        }
    }
    let assignments: Vec<Assignment> = (0..n)
        .map(|i| Assignment {
            id: store.doc(i).id().to_string(),
            cluster: label[assign[i]].expect("occupied component has a label"),
            link: None,
        })
        .collect();
    ClusteringResult {
        assignments,
        hyper,
        seed: config.seed,
        num_clusters: comp.iter().filter(|c| !c.is_empty()).count(),
        trace,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Collapsed log posterior of a baseline state up to a constant: the
/// Dirichlet-Multinomial over component occupancies plus per-component
/// word likelihoods.
fn baseline_log_posterior<R: Real>(
    comp: &[ClusterStats],
    vocab_size: usize,
    eta: R,
    dirichlet_param: R,
) -> R {
    use crate::math::ln_gamma_ratio;
    use crate::model::dcm_log_likelihood;
    let k = comp.len();
    let n: usize = comp.iter().map(|c| c.size()).sum();
    let k_lambda = real::<R>(k as f64) * dirichlet_param;
    let mut acc = -ln_gamma_ratio(k_lambda, n as u64);
    for c in comp {
        acc += ln_gamma_ratio(dirichlet_param, c.size() as u64);
        acc += dcm_log_likelihood(c, vocab_size, eta);
    }
    acc
}
