//! Integration tests for the training, evaluation, sweep, checkpoint and
//! scoring surfaces over synthetic corpora.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fewtweet_core::corpus::{generate_synthetic_corpus, Corpus, SyntheticSpec};
use fewtweet_core::harness::{
    checkpoint_config_text, evaluate, evaluate_episodes, k_shot_sweep, load_checkpoint,
    save_checkpoint, score_candidates, train, validation_episodes, write_aggregate_csv,
    write_scores_tsv, write_seed_rows_csv, HarnessError, TrainConfig, TrainContext,
    SAMPLER_SEED_SALT, VAL_SEED_SALT,
};
use fewtweet_core::heads::{episode_forward, HeadKind};
use fewtweet_core::sampler::{Episode, EpisodeSampler, Regime, SamplerConfig};

fn small_world(seed: u64) -> Corpus {
    let spec = SyntheticSpec {
        n_events: 4,
        topic_vocab_per_event: 25,
        shared_vocab: 60,
        tweets_per_event: 60,
        topic_token_prob: 0.8,
        min_len: 4,
        max_len: 9,
        anchor_hashtag_prob: 0.5,
        seed,
    };
    generate_synthetic_corpus(&spec)
}

fn tiny_config() -> TrainConfig {
    let mut config = TrainConfig::desk();
    config.head = HeadKind::Prototypical;
    config.regime = Regime::EventVsAll;
    config.k_shot = 2;
    config.epochs = 1;
    config.episodes_per_epoch = 10;
    config.val_episodes = 40;
    config.seeds = vec![1];
    config
}

fn tiny_ctx(config: &TrainConfig, world: &Corpus) -> TrainContext {
    TrainContext::from_corpora(config, world.clone(), None, world.clone(), None, BTreeMap::new())
}

#[test]
fn train_smoke_returns_one_curve_point_per_epoch() {
    let world = small_world(21);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 5).unwrap();
    assert_eq!(model.curve.len(), 1);
    assert!(model.curve[0].is_finite());
    assert!(model.params.all_finite());
}

#[test]
fn same_seed_trains_bit_identical_parameters() {
    let world = small_world(22);
    let mut config = tiny_config();
    config.episodes_per_epoch = 50;
    let ctx = tiny_ctx(&config, &world);
    let a = train(&ctx, &config, 7).unwrap();
    let b = train(&ctx, &config, 7).unwrap();
    for (pa, pb) in a.params.params().iter().zip(b.params.params()) {
        assert_eq!(pa.value.values(), pb.value.values());
    }
    let c = train(&ctx, &config, 8).unwrap();
    assert_ne!(
        a.params.embedding.value.values(),
        c.params.embedding.value.values(),
        "different seeds should train different parameters"
    );
}

#[test]
fn training_reduces_the_epoch_loss_on_separable_data() {
    // Separable world with distinct topics; prototypical head, 2 epochs.
    let spec = SyntheticSpec {
        n_events: 4,
        topic_vocab_per_event: 30,
        shared_vocab: 80,
        tweets_per_event: 100,
        topic_token_prob: 0.9,
        min_len: 5,
        max_len: 10,
        anchor_hashtag_prob: 0.0,
        seed: 23,
    };
    let world = generate_synthetic_corpus(&spec);
    let mut config = tiny_config();
    config.k_shot = 5;
    config.epochs = 2;
    config.episodes_per_epoch = 1000;
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 1).unwrap();
    assert!(
        model.curve[1] < model.curve[0],
        "expected the mean loss to fall: {:?}",
        model.curve
    );
}

#[test]
fn validation_stream_is_independent_of_the_training_stream() {
    let world = small_world(24);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let seed = 3u64;

    // Derive both streams the way the harness does and compare the episode
    // id tuples; on a synthetic corpus they must not overlap.
    let sampler_config = SamplerConfig {
        regime: config.regime,
        k_shot: config.k_shot,
        one_way: config.head.one_way(),
        pos_query_prob: config.pos_query_prob,
        anchor_map: BTreeMap::new(),
    };
    let sampler = EpisodeSampler::new(&world, None, sampler_config).unwrap();
    let mut train_rng = ChaCha8Rng::seed_from_u64(seed ^ SAMPLER_SEED_SALT);
    let train_eps = sampler.sample_many(50, &mut train_rng).unwrap();

    let val_eps = validation_episodes(&ctx, &config, seed).unwrap();
    assert_eq!(val_eps.len(), config.val_episodes);
    assert_ne!(SAMPLER_SEED_SALT, VAL_SEED_SALT);

    let tuple = |e: &Episode| -> Vec<String> {
        e.pos_supports
            .iter()
            .chain(&e.neg_supports)
            .map(|t| t.id.clone())
            .chain([e.query.id.clone()])
            .collect()
    };
    let val_tuples: Vec<Vec<String>> = val_eps.iter().map(tuple).collect();
    for e in &train_eps {
        assert!(!val_tuples.contains(&tuple(e)), "training episode re-appeared in validation");
    }
}

#[test]
fn evaluation_matches_an_independent_confusion_recount() {
    let world = small_world(25);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 2).unwrap();
    let episodes = validation_episodes(&ctx, &config, 2).unwrap();
    let counts = evaluate_episodes(
        &model.params,
        &model.encoder_config,
        &ctx.vocab,
        config.head,
        &episodes,
    )
    .unwrap();

    // Independent tally: re-run the forward pass per episode and count by
    // hand, then compare every cell exactly.
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for ep in &episodes {
        let out =
            episode_forward(&model.params, &model.encoder_config, &ctx.vocab, config.head, ep)
                .unwrap();
        match (ep.query_positive, out.predicted_positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    assert_eq!((counts.tp, counts.fp, counts.fn_, counts.tn), (tp, fp, fn_, tn));
    assert_eq!(counts.total(), episodes.len());
}

#[test]
fn evaluating_an_empty_episode_set_is_an_error() {
    let world = small_world(26);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 1).unwrap();
    let err = evaluate_episodes(&model.params, &model.encoder_config, &ctx.vocab, config.head, &[])
        .unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
}

#[test]
fn sweep_produces_one_row_per_head_k_seed() {
    // 5 k values x 3 heads x 5 seeds = 75 training runs, 15 aggregated rows.
    let world = small_world(27);
    let mut config = tiny_config();
    config.episodes_per_epoch = 6;
    config.val_episodes = 10;
    config.seeds = vec![1, 2, 3, 4, 5];
    let ctx = tiny_ctx(&config, &world);
    let ks = [1usize, 2, 3, 5, 10];
    let cells = k_shot_sweep(&ctx, &config, &HeadKind::ALL, &ks).unwrap();
    assert_eq!(cells.len(), 15, "one aggregated row per (head, k)");
    let seed_rows: usize = cells.iter().map(|c| c.report.rows.len()).sum();
    assert_eq!(seed_rows, 75, "one seed row per training run");

    let mut per_seed = Vec::new();
    write_seed_rows_csv(&cells, &mut per_seed).unwrap();
    let per_seed = String::from_utf8(per_seed).unwrap();
    assert_eq!(per_seed.lines().count(), 76);
    assert!(per_seed.starts_with("head,regime,k,seed,precision,recall,f1,accuracy\n"));

    let mut agg = Vec::new();
    write_aggregate_csv(&cells, &mut agg).unwrap();
    let agg = String::from_utf8(agg).unwrap();
    assert_eq!(agg.lines().count(), 16);
    assert!(agg.contains("f1_mean,f1_std"));
}

#[test]
fn checkpoint_restores_an_equivalent_scoring_model() {
    let world = small_world(28);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 4).unwrap();

    let file = tempfile::NamedTempFile::new().unwrap();
    let text = checkpoint_config_text(&config, &ctx.vocab);
    save_checkpoint(&model.params, &text, file.path()).unwrap();
    let (restored_config, vocab, params) = load_checkpoint(file.path()).unwrap().restore().unwrap();
    assert_eq!(restored_config.head, config.head);
    assert_eq!(vocab.size(), ctx.vocab.size());

    // The restored model evaluates identically to the in-memory one.
    let episodes = validation_episodes(&ctx, &config, 4).unwrap();
    let a = evaluate_episodes(&model.params, &model.encoder_config, &ctx.vocab, config.head, &episodes)
        .unwrap();
    let enc_config = restored_config.encoder_config(vocab.size(), 0);
    let b = evaluate_episodes(&params, &enc_config, &vocab, config.head, &episodes).unwrap();
    assert_eq!((a.tp, a.fp, a.fn_, a.tn), (b.tp, b.fp, b.fn_, b.tn));
}

#[test]
fn evaluate_returns_metrics_with_the_config_fingerprint() {
    let world = small_world(29);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 1).unwrap();
    let row = evaluate(&model, &ctx, &config).unwrap();
    assert_eq!(row.fingerprint, config.fingerprint());
    assert_eq!(row.counts.total(), config.val_episodes);
    assert!(row.f1 >= 0.0 && row.f1 <= 1.0);
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct ScoreFixture {
    ctx: TrainContext,
    model: fewtweet_core::harness::TrainedModel,
    config: TrainConfig,
}

fn score_fixture() -> ScoreFixture {
    let world = small_world(30);
    let config = tiny_config();
    let ctx = tiny_ctx(&config, &world);
    let model = train(&ctx, &config, 3).unwrap();
    ScoreFixture { ctx, model, config }
}

#[test]
fn a_candidate_identical_to_a_support_ranks_first() {
    let fx = score_fixture();
    let world = &fx.ctx.train_pos;
    let ev0: Vec<_> = world.event_tweets("ev0").iter().map(|&i| world.tweets[i].clone()).collect();
    let ev1: Vec<_> = world.event_tweets("ev1").iter().map(|&i| world.tweets[i].clone()).collect();
    let pos = ev0[..5].to_vec();
    let neg = ev1[..5].to_vec();
    // candidates: one tweet equal to a positive support plus unrelated ones
    let mut candidates = ev1[10..18].to_vec();
    candidates.push(pos[0].clone());
    let scored = score_candidates(
        &fx.model.params,
        &fx.model.encoder_config,
        &fx.ctx.vocab,
        HeadKind::Matching,
        &pos,
        &neg,
        &candidates,
    )
    .unwrap();
    assert_eq!(scored[0].id, pos[0].id, "the support duplicate should rank first");
    assert!(scored[0].p_pos > 0.5);
}

#[test]
fn one_way_scoring_needs_no_negative_supports() {
    let fx = score_fixture();
    let world = &fx.ctx.train_pos;
    let ev0: Vec<_> = world.event_tweets("ev0").iter().map(|&i| world.tweets[i].clone()).collect();
    let candidates: Vec<_> =
        world.event_tweets("ev2").iter().map(|&i| world.tweets[i].clone()).take(6).collect();
    let scored = score_candidates(
        &fx.model.params,
        &fx.model.encoder_config,
        &fx.ctx.vocab,
        HeadKind::OnewayPrototypical,
        &ev0[..4],
        &[],
        &candidates,
    )
    .unwrap();
    assert_eq!(scored.len(), 6);

    // two-way heads reject the missing negative set
    let err = score_candidates(
        &fx.model.params,
        &fx.model.encoder_config,
        &fx.ctx.vocab,
        HeadKind::Prototypical,
        &ev0[..4],
        &[],
        &candidates,
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::MissingNegativeSupports { .. }));
}

#[test]
fn scores_agree_with_the_episode_forward_path() {
    let fx = score_fixture();
    let world = &fx.ctx.train_pos;
    let tw = |event: &str, i: usize| -> fewtweet_core::Tweet {
        world.tweets[world.event_tweets(event)[i]].clone()
    };
    let pos = vec![tw("ev0", 0), tw("ev0", 1)];
    let neg = vec![tw("ev1", 0), tw("ev1", 1)];
    let candidates = vec![tw("ev0", 5), tw("ev2", 0), tw("ev3", 3)];

    for head in HeadKind::ALL {
        let neg_for_head: Vec<_> = if head.one_way() { Vec::new() } else { neg.clone() };
        let scored = score_candidates(
            &fx.model.params,
            &fx.model.encoder_config,
            &fx.ctx.vocab,
            head,
            &pos,
            &neg_for_head,
            &candidates,
        )
        .unwrap();
        for candidate in &candidates {
            let episode = Episode {
                pos_supports: pos.clone(),
                neg_supports: neg_for_head.clone(),
                query: candidate.clone(),
                query_positive: true,
                anchor: None,
            };
            let out = episode_forward(
                &fx.model.params,
                &fx.model.encoder_config,
                &fx.ctx.vocab,
                head,
                &episode,
            )
            .unwrap();
            let row = scored.iter().find(|s| s.id == candidate.id).unwrap();
            assert!(
                (row.p_pos - out.scores.p_pos as f64).abs() <= 1e-9,
                "{}: scoring path {} vs episode path {}",
                head.as_str(),
                row.p_pos,
                out.scores.p_pos
            );
        }
    }
}

#[test]
fn ranking_is_invariant_under_candidate_permutation() {
    let fx = score_fixture();
    let world = &fx.ctx.train_pos;
    let ev0: Vec<_> = world.event_tweets("ev0").iter().map(|&i| world.tweets[i].clone()).collect();
    let neg: Vec<_> = world.event_tweets("ev1").iter().map(|&i| world.tweets[i].clone()).collect();
    let mut candidates: Vec<_> =
        world.event_tweets("ev2").iter().map(|&i| world.tweets[i].clone()).take(12).collect();

    let rank = |cands: &[fewtweet_core::Tweet]| -> Vec<String> {
        score_candidates(
            &fx.model.params,
            &fx.model.encoder_config,
            &fx.ctx.vocab,
            HeadKind::Prototypical,
            &ev0[..3],
            &neg[..3],
            cands,
        )
        .unwrap()
        .into_iter()
        .map(|s| s.id)
        .collect()
    };
    let forward = rank(&candidates);
    candidates.reverse();
    let reversed = rank(&candidates);
    assert_eq!(forward, reversed);
}

#[test]
fn empty_candidates_write_a_header_only_tsv() {
    let scored: Vec<fewtweet_core::harness::ScoredCandidate> = Vec::new();
    let mut out = Vec::new();
    write_scores_tsv(&scored, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "id\tp_pos\tlabel\n");
}

#[test]
fn score_output_is_sorted_and_labeled() {
    let fx = score_fixture();
    let world = &fx.ctx.train_pos;
    let ev0: Vec<_> = world.event_tweets("ev0").iter().map(|&i| world.tweets[i].clone()).collect();
    let neg: Vec<_> = world.event_tweets("ev1").iter().map(|&i| world.tweets[i].clone()).collect();
    let candidates: Vec<_> = world
        .event_tweets("ev0")
        .iter()
        .skip(8)
        .take(4)
        .chain(world.event_tweets("ev3").iter().take(4))
        .map(|&i| world.tweets[i].clone())
        .collect();
    let scored = score_candidates(
        &fx.model.params,
        &fx.model.encoder_config,
        &fx.ctx.vocab,
        HeadKind::Prototypical,
        &ev0[..4],
        &neg[..4],
        &candidates,
    )
    .unwrap();
    for pair in scored.windows(2) {
        assert!(pair[0].p_pos >= pair[1].p_pos);
    }
    let mut out = Vec::new();
    write_scores_tsv(&scored, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), candidates.len() + 1);
    assert!(text.lines().skip(1).all(|l| l.ends_with("positive") || l.ends_with("negative")));
    let _ = &fx.config;
}
