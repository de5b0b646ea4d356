//! Command-line front end: synthetic corpus generation, training,
//! evaluation, k-shot sweeps, and triage scoring.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fewtweet_core::corpus::{
    generate_synthetic_corpus, load_corpus, synthetic_anchor_map, write_corpus_tsv, Corpus,
    CorpusSchema, Split, SyntheticSpec, Tweet,
};
use fewtweet_core::harness::{
    aggregate_seeds, checkpoint_config_text, evaluate, k_shot_sweep, load_checkpoint,
    save_checkpoint, score_candidates, train, write_aggregate_csv, write_scores_tsv,
    write_seed_rows_csv, SweepCell, TrainConfig, TrainContext, TrainedModel,
};
use fewtweet_core::heads::HeadKind;
use fewtweet_core::sampler::load_anchor_map;

#[derive(Parser)]
#[command(
    name = "fewtweet",
    version,
    about = "Few-shot tweet triage: train and run matching, prototypical and one-way prototypical classifiers over a convolutional sentence encoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus TSV with known event structure.
    Synth(SynthArgs),
    /// Train one configuration across its seeds and write checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint on freshly sampled validation episodes.
    Eval(EvalArgs),
    /// Train and evaluate a (head x k) grid and write results CSVs.
    Sweep(SweepArgs),
    /// Rank candidate tweets against support tweets using a checkpoint.
    Score(ScoreArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Foreground events (event ids ev0, ev1, ...).
    #[arg(long, default_value_t = 4)]
    events: usize,
    /// How many of the foreground events get split=val (the last ones).
    #[arg(long, default_value_t = 0)]
    val_events: usize,
    /// Extra background events relabeled to the non-event id with split=any.
    #[arg(long, default_value_t = 0)]
    background_events: usize,
    #[arg(long, default_value_t = 120)]
    tweets_per_event: usize,
    #[arg(long, default_value_t = 40)]
    topic_vocab: usize,
    #[arg(long, default_value_t = 120)]
    shared_vocab: usize,
    /// Probability that a token comes from the event topic vocabulary.
    #[arg(long, default_value_t = 0.8)]
    topic_prob: f64,
    /// Probability that a tweet carries its event's anchor hashtag.
    #[arg(long, default_value_t = 0.5)]
    anchor_prob: f64,
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    #[arg(long, default_value_t = 12)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output corpus TSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write an anchor map TSV for the foreground events.
    #[arg(long)]
    anchor_map_out: Option<PathBuf>,
}

/// Options shared by `train` and `sweep`. Precedence: profile, then
/// `--config` file, then explicit flags.
#[derive(Args)]
struct RunOpts {
    /// Base profile: `desk` (small, CI-friendly) or `full` (the complete protocol).
    #[arg(long, default_value = "desk")]
    profile: String,
    /// Key-value config file applied on top of the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long, short = 'k')]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    val_episodes: Option<usize>,
    /// Comma-separated seed list, e.g. `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    /// Single seed shorthand (overrides --seeds).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_pos: Option<PathBuf>,
    #[arg(long)]
    val_pos: Option<PathBuf>,
    #[arg(long)]
    train_neg: Option<PathBuf>,
    #[arg(long)]
    val_neg: Option<PathBuf>,
    #[arg(long)]
    anchor_map: Option<PathBuf>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Comma-separated filter widths, e.g. `3,4,5`.
    #[arg(long)]
    filter_widths: Option<String>,
    #[arg(long)]
    feature_maps: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    min_freq: Option<usize>,
    #[arg(long)]
    max_vocab: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    pos_query_prob: Option<f64>,
}

impl RunOpts {
    fn build_config(&self) -> Result<TrainConfig> {
        let mut config = match self.profile.as_str() {
            "desk" => TrainConfig::desk(),
            "full" => TrainConfig::default(),
            other => bail!("unknown profile {other:?} (want desk or full)"),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            config.apply_kv_text(&text)?;
        }
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                config.apply(key, &v)?;
            }
            Ok(())
        };
        set("head", self.head.clone())?;
        set("regime", self.regime.clone())?;
        set("k_shot", self.k.map(|v| v.to_string()))?;
        set("epochs", self.epochs.map(|v| v.to_string()))?;
        set("episodes_per_epoch", self.episodes.map(|v| v.to_string()))?;
        set("val_episodes", self.val_episodes.map(|v| v.to_string()))?;
        set("seeds", self.seeds.clone())?;
        set("seeds", self.seed.map(|v| v.to_string()))?;
        set("train_pos", self.train_pos.as_ref().map(|p| p.display().to_string()))?;
        set("val_pos", self.val_pos.as_ref().map(|p| p.display().to_string()))?;
        set("train_neg", self.train_neg.as_ref().map(|p| p.display().to_string()))?;
        set("val_neg", self.val_neg.as_ref().map(|p| p.display().to_string()))?;
        set("anchor_map", self.anchor_map.as_ref().map(|p| p.display().to_string()))?;
        set("embedding_dim", self.embedding_dim.map(|v| v.to_string()))?;
        set("filter_widths", self.filter_widths.clone())?;
        set("feature_maps", self.feature_maps.map(|v| v.to_string()))?;
        set("dropout", self.dropout.map(|v| v.to_string()))?;
        set("max_len", self.max_len.map(|v| v.to_string()))?;
        set("min_freq", self.min_freq.map(|v| v.to_string()))?;
        set("max_vocab", self.max_vocab.map(|v| v.to_string()))?;
        set("learning_rate", self.learning_rate.map(|v| v.to_string()))?;
        set("pos_query_prob", self.pos_query_prob.map(|v| v.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    opts: RunOpts,
    /// Output directory for checkpoints, curves and metrics.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Override the validation corpora or protocol stored in the checkpoint.
    #[arg(long)]
    val_pos: Option<PathBuf>,
    #[arg(long)]
    val_neg: Option<PathBuf>,
    #[arg(long)]
    anchor_map: Option<PathBuf>,
    #[arg(long)]
    val_episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional metrics CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    opts: RunOpts,
    /// Comma-separated support counts, e.g. `1,2,3,5,10`.
    #[arg(long, default_value = "1,2,3,5,10")]
    ks: String,
    /// Comma-separated heads to sweep (default: all three).
    #[arg(long)]
    heads: Option<String>,
    /// Output directory for results.csv and results_agg.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Positive support tweets (corpus TSV).
    #[arg(long)]
    supports: PathBuf,
    /// Negative support tweets; required by the two-way heads.
    #[arg(long)]
    neg_supports: Option<PathBuf>,
    /// Candidate tweets to rank (corpus TSV).
    #[arg(long)]
    candidates: PathBuf,
    /// Override the head stored in the checkpoint.
    #[arg(long)]
    head: Option<String>,
    /// Output TSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Score(args) => run_score(args),
    }
}

fn run_synth(args: SynthArgs) -> Result<()> {
    if args.val_events > args.events {
        bail!("--val-events cannot exceed --events");
    }
    let spec = SyntheticSpec {
        n_events: args.events + args.background_events,
        topic_vocab_per_event: args.topic_vocab,
        shared_vocab: args.shared_vocab,
        tweets_per_event: args.tweets_per_event,
        topic_token_prob: args.topic_prob,
        min_len: args.min_len,
        max_len: args.max_len,
        anchor_hashtag_prob: args.anchor_prob,
        seed: args.seed,
    };
    spec.validate().map_err(|e| anyhow::anyhow!(e))?;
    let corpus = generate_synthetic_corpus(&spec);

    // Background events become the non-event bucket.
    let background = |event: &str| -> bool {
        event
            .strip_prefix("ev")
            .and_then(|s| s.parse::<usize>().ok())
            .is_some_and(|k| k >= args.events)
    };
    let tweets: Vec<Tweet> = corpus
        .tweets
        .into_iter()
        .map(|mut t| {
            if background(&t.event_id) {
                t.event_id = fewtweet_core::corpus::NON_EVENT.to_string();
            }
            t
        })
        .collect();
    let corpus = Corpus::from_tweets(tweets);

    let first_val = args.events - args.val_events;
    write_corpus_tsv(&corpus, &args.out, |event| {
        match event.strip_prefix("ev").and_then(|s| s.parse::<usize>().ok()) {
            Some(k) if k < first_val => Split::Train,
            Some(_) => Split::Val,
            None => Split::Any,
        }
    })?;
    println!(
        "wrote {} tweets ({} foreground events) to {}",
        corpus.len(),
        args.events,
        args.out.display()
    );

    if let Some(path) = &args.anchor_map_out {
        let mut f = fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        for (event, tag) in synthetic_anchor_map(args.events) {
            writeln!(f, "{event}\t{tag}")?;
        }
        println!("wrote anchor map to {}", path.display());
    }
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let config = args.opts.build_config()?;
    fs::create_dir_all(&args.out)?;
    let ctx = TrainContext::load(&config)?;
    println!(
        "training {} / {} / k={} on {} train tweets (vocab {})",
        config.head.as_str(),
        config.regime.as_str(),
        config.k_shot,
        ctx.train_pos.len(),
        ctx.vocab.size()
    );

    let mut rows = Vec::new();
    let config_text = checkpoint_config_text(&config, &ctx.vocab);
    for &seed in &config.seeds {
        let model = train(&ctx, &config, seed)?;
        let ckpt_path = args.out.join(format!("checkpoint_seed{seed}.fstc"));
        save_checkpoint(&model.params, &config_text, &ckpt_path)?;

        let mut curve = fs::File::create(args.out.join(format!("curve_seed{seed}.csv")))?;
        writeln!(curve, "epoch,mean_loss")?;
        for (i, loss) in model.curve.iter().enumerate() {
            writeln!(curve, "{},{:.6}", i + 1, loss)?;
        }

        let metrics = evaluate(&model, &ctx, &config)?;
        println!(
            "  seed {seed}: F1 {:.4}  P {:.4}  R {:.4}  acc {:.4}  (checkpoint {})",
            metrics.f1,
            metrics.precision,
            metrics.recall,
            metrics.accuracy,
            ckpt_path.display()
        );
        rows.push(metrics);
    }
    let report = aggregate_seeds(&rows)?;
    let cell = SweepCell { head: config.head, regime: config.regime, k: config.k_shot, report };

    let mut seed_csv = fs::File::create(args.out.join("metrics.csv"))?;
    write_seed_rows_csv(std::slice::from_ref(&cell), &mut seed_csv)?;
    let mut agg_csv = fs::File::create(args.out.join("metrics_agg.csv"))?;
    write_aggregate_csv(std::slice::from_ref(&cell), &mut agg_csv)?;
    println!(
        "mean F1 {:.4} (std {:.4}) over {} seeds; results in {}",
        cell.report.mean.f1,
        cell.report.std.f1,
        cell.report.rows.len(),
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let (mut config, vocab, params) = load_checkpoint(&args.checkpoint)?.restore()?;
    if let Some(p) = &args.val_pos {
        config.val_pos = p.clone();
    }
    if let Some(p) = &args.val_neg {
        config.val_neg = Some(p.clone());
    }
    if let Some(p) = &args.anchor_map {
        config.anchor_map = Some(p.clone());
    }
    if let Some(n) = args.val_episodes {
        config.val_episodes = n;
    }
    let seed = args.seed.unwrap_or_else(|| config.seeds.first().copied().unwrap_or(1));

    let val_pos = load_corpus(&config.val_pos, &CorpusSchema::with_filter(Split::Val))?;
    let val_neg = config
        .val_neg
        .as_ref()
        .map(|p| load_corpus(p, &CorpusSchema::with_filter(Split::Val)))
        .transpose()?;
    let anchor_map = match &config.anchor_map {
        Some(path) => load_anchor_map(path)?,
        None => BTreeMap::new(),
    };
    let encoder_config = config.encoder_config(vocab.size(), 0);
    let ctx = TrainContext {
        train_pos: Corpus::default(),
        train_neg: None,
        val_pos,
        val_neg,
        vocab,
        anchor_map,
    };
    let model = TrainedModel { seed, encoder_config, params, curve: Vec::new() };
    let metrics = evaluate(&model, &ctx, &config)?;
    println!(
        "{} / {} / k={} seed {}: F1 {:.4}  P {:.4}  R {:.4}  acc {:.4}  ({} episodes)",
        config.head.as_str(),
        config.regime.as_str(),
        config.k_shot,
        seed,
        metrics.f1,
        metrics.precision,
        metrics.recall,
        metrics.accuracy,
        config.val_episodes
    );
    if let Some(path) = &args.out {
        let report = aggregate_seeds(std::slice::from_ref(&metrics))?;
        let cell = SweepCell { head: config.head, regime: config.regime, k: config.k_shot, report };
        let mut f = fs::File::create(path)?;
        write_seed_rows_csv(std::slice::from_ref(&cell), &mut f)?;
        println!("metrics written to {}", path.display());
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let config = args.opts.build_config()?;
    let ks: Vec<usize> = args
        .ks
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("bad --ks value"))
        .collect::<Result<_>>()?;
    let heads: Vec<HeadKind> = match &args.heads {
        None => HeadKind::ALL.to_vec(),
        Some(spec) => spec
            .split(',')
            .map(|s| HeadKind::parse(s.trim()).with_context(|| format!("unknown head {s:?}")))
            .collect::<Result<_>>()?,
    };
    fs::create_dir_all(&args.out)?;
    let ctx = TrainContext::load(&config)?;
    println!(
        "sweeping {} heads x {} support counts x {} seeds ({} runs)",
        heads.len(),
        ks.len(),
        config.seeds.len(),
        heads.len() * ks.len() * config.seeds.len()
    );
    let cells = k_shot_sweep(&ctx, &config, &heads, &ks)?;
    for cell in &cells {
        println!(
            "  {} k={:2}: F1 {:.4} (std {:.4})",
            cell.head.as_str(),
            cell.k,
            cell.report.mean.f1,
            cell.report.std.f1
        );
    }
    let mut seed_csv = fs::File::create(args.out.join("results.csv"))?;
    write_seed_rows_csv(&cells, &mut seed_csv)?;
    let mut agg_csv = fs::File::create(args.out.join("results_agg.csv"))?;
    write_aggregate_csv(&cells, &mut agg_csv)?;
    println!("results written to {}", args.out.display());
    Ok(())
}

fn run_score(args: ScoreArgs) -> Result<()> {
    let (config, vocab, params) = load_checkpoint(&args.checkpoint)?.restore()?;
    let head = match &args.head {
        Some(s) => HeadKind::parse(s).with_context(|| format!("unknown head {s:?}"))?,
        None => config.head,
    };
    let schema = CorpusSchema::default();
    let supports = load_corpus(&args.supports, &schema)?;
    let neg_supports = args
        .neg_supports
        .as_ref()
        .map(|p| load_corpus(p, &schema))
        .transpose()?;
    let candidates = load_corpus(&args.candidates, &schema)?;

    let encoder_config = config.encoder_config(vocab.size(), 0);
    let scored = score_candidates(
        &params,
        &encoder_config,
        &vocab,
        head,
        &supports.tweets,
        neg_supports.as_ref().map_or(&[], |c| c.tweets.as_slice()),
        &candidates.tweets,
    )?;
    match &args.out {
        Some(path) => {
            let mut f = fs::File::create(path)?;
            write_scores_tsv(&scored, &mut f)?;
            println!(
                "{} candidates scored with the {} head -> {}",
                scored.len(),
                head.as_str(),
                path.display()
            );
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            // A closed pipe (e.g. `| head`) is not an error for a writer.
            if let Err(e) = write_scores_tsv(&scored, &mut stdout) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}
