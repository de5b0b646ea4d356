//! Training runs, multi-seed evaluation, and k-shot sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_vocabulary, load_corpus, Corpus, CorpusSchema, Split, Vocabulary};
use crate::encoder::{init_encoder, EncoderConfig, EncoderParams};
use crate::heads::{episode_train_step, HeadKind};
use crate::numeric::{adam_step, AdamState};
use crate::sampler::{load_anchor_map, Episode, EpisodeSampler, Regime, SamplerConfig};

use super::config::TrainConfig;
use super::metrics::{aggregate_seeds, evaluate_episodes, MetricReport, SeedMetrics};
use super::HarnessError;

// Stream salts keep the sampling, dropout and validation rng streams of one
// seed independent of each other while leaving the seed a single knob. The
// validation stream seed is the training seed xor a fixed constant; the
// constants are part of the reproducibility contract.
pub const SAMPLER_SEED_SALT: u64 = 0x45505f53414d50;
pub const DROPOUT_SEED_SALT: u64 = 0x45505f44524f50;
pub const VAL_SEED_SALT: u64 = 0x45505f56414c31;

/// Loaded corpora plus the vocabulary shared by all seeds of a run.
#[derive(Debug, Clone)]
pub struct TrainContext {
    pub train_pos: Corpus,
    pub train_neg: Option<Corpus>,
    pub val_pos: Corpus,
    pub val_neg: Option<Corpus>,
    pub vocab: Vocabulary,
    pub anchor_map: BTreeMap<String, String>,
}

impl TrainContext {
    /// Load corpora from the paths in `config`. The positive corpus paths
    /// are split-filtered (`train` rows for training, `val` for validation,
    /// `any` for both), so one file can carry both roles.
    pub fn load(config: &TrainConfig) -> Result<TrainContext, HarnessError> {
        config.validate()?;
        let train_pos = load_corpus(&config.train_pos, &CorpusSchema::with_filter(Split::Train))?;
        let val_pos = load_corpus(&config.val_pos, &CorpusSchema::with_filter(Split::Val))?;
        let train_neg = config
            .train_neg
            .as_ref()
            .map(|p| load_corpus(p, &CorpusSchema::with_filter(Split::Train)))
            .transpose()?;
        let val_neg = config
            .val_neg
            .as_ref()
            .map(|p| load_corpus(p, &CorpusSchema::with_filter(Split::Val)))
            .transpose()?;
        let anchor_map = match &config.anchor_map {
            Some(path) => load_anchor_map(path)?,
            None => BTreeMap::new(),
        };
        Ok(TrainContext::from_corpora(config, train_pos, train_neg, val_pos, val_neg, anchor_map))
    }

    /// Assemble a context from corpora already in memory. The vocabulary is
    /// built over the training corpora only.
    pub fn from_corpora(
        config: &TrainConfig,
        train_pos: Corpus,
        train_neg: Option<Corpus>,
        val_pos: Corpus,
        val_neg: Option<Corpus>,
        anchor_map: BTreeMap<String, String>,
    ) -> TrainContext {
        let mut sources: Vec<&Corpus> = vec![&train_pos];
        if let Some(neg) = &train_neg {
            sources.push(neg);
        }
        let vocab = build_vocabulary(&sources, config.min_freq, config.max_vocab);
        TrainContext { train_pos, train_neg, val_pos, val_neg, vocab, anchor_map }
    }

    fn sampler_config(&self, config: &TrainConfig) -> SamplerConfig {
        SamplerConfig {
            regime: config.regime,
            k_shot: config.k_shot,
            one_way: config.head.one_way(),
            pos_query_prob: config.pos_query_prob,
            anchor_map: self.anchor_map.clone(),
        }
    }
}

/// Result of one `(config, seed)` training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub seed: u64,
    pub encoder_config: EncoderConfig,
    pub params: EncoderParams<f32>,
    /// Mean episode loss per epoch.
    pub curve: Vec<f64>,
}

/// Train one model. One episode per optimizer step, fresh episodes sampled
/// from the seeded stream every epoch. Deterministic given `(config, seed)`.
pub fn train(ctx: &TrainContext, config: &TrainConfig, seed: u64) -> Result<TrainedModel, HarnessError> {
    config.validate()?;
    let enc_config = config.encoder_config(ctx.vocab.size(), seed);
    enc_config.validate().map_err(HarnessError::Config)?;
    let mut params: EncoderParams<f32> = init_encoder(&enc_config);
    let sampler = EpisodeSampler::new(&ctx.train_pos, ctx.train_neg.as_ref(), ctx.sampler_config(config))?;

    let mut sample_rng = ChaCha8Rng::seed_from_u64(seed ^ SAMPLER_SEED_SALT);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed ^ DROPOUT_SEED_SALT);
    let mut adam = AdamState::new(&params.params(), config.learning_rate)
        .with_betas(config.beta1, config.beta2, config.epsilon);

    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0f64;
        for _ in 0..config.episodes_per_epoch {
            let episode = sampler.sample(&mut sample_rng)?;
            let out = episode_train_step(
                &mut params,
                &enc_config,
                &ctx.vocab,
                config.head,
                &episode,
                &mut dropout_rng,
            )?;
            adam_step(&mut params.params_mut(), &mut adam);
            loss_sum += out.loss as f64;
        }
        if !params.all_finite() {
            return Err(HarnessError::Config(format!(
                "parameters became non-finite in epoch {} (seed {seed}); lower the learning rate",
                epoch + 1
            )));
        }
        curve.push(loss_sum / config.episodes_per_epoch as f64);
    }
    Ok(TrainedModel { seed, encoder_config: enc_config, params, curve })
}

/// Validation episodes for a seed, drawn from a stream derived with a fixed
/// salt so it never overlaps the training stream.
pub fn validation_episodes(
    ctx: &TrainContext,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<Episode>, HarnessError> {
    let sampler = EpisodeSampler::new(&ctx.val_pos, ctx.val_neg.as_ref(), ctx.sampler_config(config))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ VAL_SEED_SALT);
    Ok(sampler.sample_many(config.val_episodes, &mut rng)?)
}

/// Evaluate a trained model on freshly sampled validation episodes.
pub fn evaluate(
    model: &TrainedModel,
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<SeedMetrics, HarnessError> {
    let episodes = validation_episodes(ctx, config, model.seed)?;
    let counts =
        evaluate_episodes(&model.params, &model.encoder_config, &ctx.vocab, config.head, &episodes)?;
    Ok(SeedMetrics::from_counts(model.seed, counts, config.fingerprint()))
}

/// Train and evaluate every configured seed.
pub fn train_all_seeds(
    ctx: &TrainContext,
    config: &TrainConfig,
) -> Result<(Vec<TrainedModel>, MetricReport), HarnessError> {
    let mut models = Vec::with_capacity(config.seeds.len());
    let mut rows = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let model = train(ctx, config, seed)?;
        rows.push(evaluate(&model, ctx, config)?);
        models.push(model);
    }
    let report = aggregate_seeds(&rows)?;
    Ok((models, report))
}

/// One `(head, k)` cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub head: HeadKind,
    pub regime: Regime,
    pub k: usize,
    pub report: MetricReport,
}

/// Train and evaluate every `(head, k, seed)` combination and aggregate the
/// seeds of each cell.
pub fn k_shot_sweep(
    ctx: &TrainContext,
    base: &TrainConfig,
    heads: &[HeadKind],
    ks: &[usize],
) -> Result<Vec<SweepCell>, HarnessError> {
    let mut cells = Vec::with_capacity(heads.len() * ks.len());
    for &head in heads {
        for &k in ks {
            let mut config = base.clone();
            config.head = head;
            config.k_shot = k;
            let (_, report) = train_all_seeds(ctx, &config)?;
            cells.push(SweepCell { head, regime: config.regime, k, report });
        }
    }
    Ok(cells)
}

/// Per-seed results CSV: `head,regime,k,seed,precision,recall,f1,accuracy`.
pub fn write_seed_rows_csv<W: Write>(cells: &[SweepCell], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "head,regime,k,seed,precision,recall,f1,accuracy")?;
    for cell in cells {
        for row in &cell.report.rows {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                cell.head.as_str(),
                cell.regime.as_str(),
                cell.k,
                row.seed,
                row.precision,
                row.recall,
                row.f1,
                row.accuracy
            )?;
        }
    }
    Ok(())
}

/// Aggregated results CSV with mean and standard deviation per metric.
pub fn write_aggregate_csv<W: Write>(cells: &[SweepCell], w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "head,regime,k,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,accuracy_mean,accuracy_std"
    )?;
    for cell in cells {
        let (m, s) = (&cell.report.mean, &cell.report.std);
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            cell.head.as_str(),
            cell.regime.as_str(),
            cell.k,
            m.precision,
            s.precision,
            m.recall,
            s.recall,
            m.f1,
            s.f1,
            m.accuracy,
            s.accuracy
        )?;
    }
    Ok(())
}
