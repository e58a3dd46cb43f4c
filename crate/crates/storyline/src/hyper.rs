//! Hyperparameter adaptation: gradient ascent on the link prior for the
//! self-link mass and the decay scale, interleaved with sampling, plus a
//! closed-form corpus heuristic for the Dirichlet concentration.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentStore, Vocabulary, WordId};
use crate::model::{candidate_range, CandidateMode, FollowerGraph, Hyperparams};
use crate::scalar::{real, real_of_count, Real};

/// Schedule and safety rails for the interleaved ascent steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HyperUpdateConfig<R: Real> {
    /// Ascent step on ln(alpha).
    pub step_log_alpha: R,
    /// Ascent step on ln(decay_scale).
    pub step_log_decay: R,
    /// Sweeps between consecutive gradient steps.
    pub every: usize,
    /// Per-coordinate cap on gradient magnitude.
    pub clip: R,
}

impl<R: Real> Default for HyperUpdateConfig<R> {
    fn default() -> HyperUpdateConfig<R> {
        HyperUpdateConfig {
            step_log_alpha: real(0.01),
            step_log_decay: real(0.01),
            every: 10,
            clip: real(10.0),
        }
    }
}

impl<R: Real> HyperUpdateConfig<R> {
    pub fn validate(&self) {
        assert!(
            self.step_log_alpha > R::zero() && self.step_log_decay > R::zero(),
            "step sizes must be positive"
        );
        assert!(self.every >= 1, "update period must be at least 1");
        assert!(self.clip > R::zero(), "gradient clip must be positive");
    }
}

/// Log probability of the current links under the normalized prior, with
/// its exact gradient in (ln alpha, ln decay_scale).
///
/// Working in log-parameterization keeps both parameters positive under
/// ascent and makes the finite-difference oracle a clean multiplicative
/// perturbation.
pub fn log_prior_and_gradient<R: Real>(
    store: &DocumentStore,
    graph: &FollowerGraph,
    mode: CandidateMode,
    alpha: R,
    decay_scale: R,
) -> (R, R, R) {
    let mut value = R::zero();
    let mut grad_alpha = R::zero();
    let mut grad_decay = R::zero();
    for i in 0..store.len() {
        let (lo, hi) = candidate_range(store, i, mode, decay_scale);
        let t_i = store.timestamp(i);
        let mut z = alpha;
        // Σ_j f(d_ij) · (Δt_ij / a): the normalizer's decay-scale
        // sensitivity, accumulated alongside the normalizer itself.
        let mut weighted_gap = R::zero();
        for j in lo..hi {
            if j == i {
                continue;
            }
            let gap_scaled =
                real_of_count::<R>(t_i.abs_diff(store.timestamp(j))) / decay_scale;
            let f = (-gap_scaled).exp();
            z += f;
            weighted_gap += f * gap_scaled;
        }
        let c = graph.link(i);
        if c == i {
            value = value + alpha.ln() - z.ln();
            grad_alpha += R::one();
        } else {
            let gap_scaled =
                real_of_count::<R>(t_i.abs_diff(store.timestamp(c))) / decay_scale;
            value = value - gap_scaled - z.ln();
            grad_decay += gap_scaled;
        }
        grad_alpha -= alpha / z;
        grad_decay -= weighted_gap / z;
    }
    (value, grad_alpha, grad_decay)
}

/// One clipped ascent step on (ln alpha, ln decay_scale). The Dirichlet
/// concentration is left untouched, and the partition is never modified;
/// only future sampling probabilities change.
pub fn gradient_step<R: Real>(
    store: &DocumentStore,
    graph: &FollowerGraph,
    mode: CandidateMode,
    hyper: &Hyperparams<R>,
    config: &HyperUpdateConfig<R>,
) -> Hyperparams<R> {
    let (_, g_alpha, g_decay) =
        log_prior_and_gradient(store, graph, mode, hyper.alpha, hyper.decay_scale);
    let clip = |g: R| g.max(-config.clip).min(config.clip);
    Hyperparams {
        alpha: hyper.alpha * (config.step_log_alpha * clip(g_alpha)).exp(),
        decay_scale: hyper.decay_scale * (config.step_log_decay * clip(g_decay)).exp(),
        eta: hyper.eta,
    }
}

/// Corpus heuristic for the Dirichlet concentration:
/// `((K − 1)/2) / |Σ_{singleton words k} ln p_k|`, where K is the number
/// of words occurring exactly once and p is the corpus unigram
/// distribution. The sum of logs is negative, so its absolute value is
/// taken to keep the concentration positive; the result is floored at
/// 1e-4. Corpora with fewer than two singleton words fall back to 0.1.
pub fn estimate_eta<R: Real>(vocab: &Vocabulary) -> R {
    let fallback = real::<R>(0.1);
    let k = vocab.singleton_count();
    if k <= 1 {
        warn!(
            "concentration heuristic needs at least two singleton words \
             (found {k}); falling back to eta = 0.1"
        );
        return fallback;
    }
    let unigram: Vec<R> = vocab.unigram();
    let mut sum_log = R::zero();
    for (w, p) in unigram.iter().enumerate() {
        if vocab.count(w as WordId) == 1 {
            sum_log += p.ln();
        }
    }
    let eta = real::<R>((k - 1) as f64 / 2.0) / sum_log.abs();
    eta.max(real(1e-4))
}
