//! End-to-end recovery: generate a planted corpus, ingest it, infer
//! storylines offline and online, and score the results against the
//! planted structure.

use storyline::corpus::ingest;
use storyline::evaluation::{
    adjusted_rand_index, score, select_representatives, GoldClusters, Metrics,
};
use storyline::hyper::estimate_eta;
use storyline::model::Hyperparams;
use storyline::sampler::{run_baseline, run_offline, SamplerConfig};
use storyline::streaming::{StreamConfig, StreamState};
use storyline::synth::{planted_partition, planted_storylines, StorylineSpec};

fn fast_spec() -> StorylineSpec {
    StorylineSpec {
        clusters: 3,
        docs_per_cluster: 20,
        words_per_cluster: 5,
        tokens_per_doc: 8,
        first_center: 0,
        center_gap: 36_000,
        spread: 1_800,
        seed: 5,
        ..StorylineSpec::default()
    }
}

#[test]
fn offline_fit_recovers_planted_storylines() {
    let corpus = planted_storylines(&fast_spec());
    let ingested = ingest(corpus.records.clone()).unwrap();
    let eta: f64 = estimate_eta(&ingested.vocabulary);
    let hyper = Hyperparams::new(1.0, 3_600.0, eta);
    let config = SamplerConfig {
        iterations: 100,
        // Keep the final state an equilibrium draw: the flattening tail
        // would deliberately re-randomize a few links.
        anneal_start_fraction: 1.0,
        seed: 11,
        record_trace: true,
        ..SamplerConfig::default()
    };
    let result = run_offline(&ingested.store, ingested.vocabulary.len(), hyper, &config);

    let truth = planted_partition(&ingested.store, &corpus.label_of);
    let predicted = storyline::model::Partition::from_cluster_ids(
        result.assignments.iter().map(|a| a.cluster).collect(),
    );
    let ari: f64 = adjusted_rand_index(&predicted, &truth);
    assert!(ari >= 0.9, "offline ARI {ari} below 0.9");

    // Joint log probability never hits a non-finite value, and the
    // final state scores far above the all-singletons start.
    assert!(result.trace.iter().all(|r| r.joint_log_prob.is_finite()));
    let initial: f64 = storyline::model::joint_log_prob(
        &ingested.store,
        &storyline::model::FollowerGraph::self_links(ingested.store.len()),
        ingested.vocabulary.len(),
        &hyper,
        storyline::model::CandidateMode::All,
    );
    let last = result.trace.last().unwrap().joint_log_prob;
    assert!(last > initial, "final joint {last} not above initial {initial}");

    // The timeline of representatives covers every planted storyline.
    let timeline = select_representatives(&result.assignments, &ingested.store);
    let gold = GoldClusters::new(corpus.gold.clone()).unwrap();
    let metrics: Metrics<f64> = score(&timeline, &gold).unwrap();
    assert_eq!(metrics.recall, 1.0, "every storyline covered");
    assert!(metrics.precision >= 0.9, "precision {}", metrics.precision);
}

#[test]
fn streamed_fit_recovers_planted_storylines() {
    let corpus = planted_storylines(&fast_spec());
    let ingested = ingest(corpus.records.clone()).unwrap();
    let eta: f64 = estimate_eta(&ingested.vocabulary);
    let config = StreamConfig {
        window_lag: Some(18_000),
        budget: 40,
        seed: 11,
        ..StreamConfig::default()
    };
    let mut state = StreamState::new(
        ingested.vocabulary.len(),
        Hyperparams::new(1.0, 3_600.0, eta),
        config,
    );
    for doc in ingested.store.docs() {
        state.push_document(doc.clone()).unwrap();
    }
    state.assert_frozen_immutable();
    let result = state.finalize();

    let truth = planted_partition(&ingested.store, &corpus.label_of);
    let predicted = storyline::model::Partition::from_cluster_ids(
        result.assignments.iter().map(|a| a.cluster).collect(),
    );
    let ari: f64 = adjusted_rand_index(&predicted, &truth);
    assert!(ari >= 0.85, "streamed ARI {ari} below 0.85");
}

#[test]
fn baseline_with_matching_k_separates_disjoint_storylines() {
    let corpus = planted_storylines(&StorylineSpec {
        clusters: 2,
        docs_per_cluster: 15,
        seed: 3,
        ..fast_spec()
    });
    let ingested = ingest(corpus.records.clone()).unwrap();
    let config = SamplerConfig {
        iterations: 80,
        seed: 19,
        ..SamplerConfig::default()
    };
    let result = run_baseline(&ingested.store, ingested.vocabulary.len(), 0.2, 2, 0.5, &config);
    let truth = planted_partition(&ingested.store, &corpus.label_of);
    let predicted = storyline::model::Partition::from_cluster_ids(
        result.assignments.iter().map(|a| a.cluster).collect(),
    );
    let ari: f64 = adjusted_rand_index(&predicted, &truth);
    assert!(ari >= 0.9, "baseline ARI {ari} below 0.9");
}
