//! Run configuration and its key-value text form.
//!
//! The same `key = value` text serves three places: `--config` files, the
//! config block embedded in checkpoints, and the fingerprint that ties
//! per-seed metric rows to one configuration.

use std::path::PathBuf;

use crate::encoder::EncoderConfig;
use crate::heads::HeadKind;
use crate::sampler::Regime;

use super::HarnessError;

/// Everything a training run needs apart from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub head: HeadKind,
    pub regime: Regime,
    pub k_shot: usize,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub val_episodes: usize,
    pub seeds: Vec<u64>,
    pub pos_query_prob: f64,
    pub min_freq: usize,
    pub max_vocab: Option<usize>,
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub feature_maps: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub train_pos: PathBuf,
    pub val_pos: PathBuf,
    pub train_neg: Option<PathBuf>,
    pub val_neg: Option<PathBuf>,
    pub anchor_map: Option<PathBuf>,
}

impl Default for TrainConfig {
    /// The full experimental protocol: 12,800 episodes over 20 epochs, 6,400
    /// validation episodes, five seeds, the standard encoder geometry.
    fn default() -> Self {
        TrainConfig {
            head: HeadKind::Prototypical,
            regime: Regime::EventVsAll,
            k_shot: 10,
            epochs: 20,
            episodes_per_epoch: 12_800,
            val_episodes: 6_400,
            seeds: vec![1, 2, 3, 4, 5],
            pos_query_prob: 0.5,
            min_freq: 2,
            max_vocab: None,
            embedding_dim: 300,
            filter_widths: vec![3, 4, 5],
            feature_maps: 100,
            dropout: 0.5,
            max_len: 40,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            train_pos: PathBuf::new(),
            val_pos: PathBuf::new(),
            train_neg: None,
            val_neg: None,
            anchor_map: None,
        }
    }
}

impl TrainConfig {
    /// Desk-scale profile: small encoder, 2 epochs of 2,000 episodes, 1,000
    /// validation episodes, three seeds. Fast enough to gate CI on a single
    /// CPU core.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            episodes_per_epoch: 2_000,
            val_episodes: 1_000,
            seeds: vec![1, 2, 3],
            max_vocab: Some(5_000),
            embedding_dim: 32,
            filter_widths: vec![2, 3],
            feature_maps: 16,
            dropout: 0.3,
            max_len: 16,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = [
            ("k_shot", self.k_shot),
            ("epochs", self.epochs),
            ("episodes_per_epoch", self.episodes_per_epoch),
            ("val_episodes", self.val_episodes),
            ("min_freq", self.min_freq),
            ("embedding_dim", self.embedding_dim),
            ("feature_maps", self.feature_maps),
            ("max_len", self.max_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(HarnessError::Config(format!("{name} must be positive")));
            }
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("need at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(HarnessError::Config("seeds must be distinct".into()));
        }
        if !(self.pos_query_prob > 0.0 && self.pos_query_prob < 1.0) {
            return Err(HarnessError::Config("pos_query_prob must lie strictly in (0, 1)".into()));
        }
        if self.regime == Regime::EventVsEvent && self.anchor_map.is_none() {
            return Err(HarnessError::Config(
                "event-vs-event needs an anchor_map file".into(),
            ));
        }
        Ok(())
    }

    /// Encoder configuration for a given vocabulary size and run seed.
    pub fn encoder_config(&self, vocab_size: usize, seed: u64) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            embedding_dim: self.embedding_dim,
            filter_widths: self.filter_widths.clone(),
            feature_maps: self.feature_maps,
            dropout: self.dropout,
            max_len: self.max_len,
            seed,
        }
    }

    /// Canonical key-value text, one `key = value` line per field.
    pub fn to_kv_text(&self) -> String {
        let opt_path = |p: &Option<PathBuf>| match p {
            Some(p) => p.display().to_string(),
            None => "none".to_string(),
        };
        let list = |xs: &[usize]| xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let seeds = self.seeds.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "head = {}\nregime = {}\nk_shot = {}\nepochs = {}\nepisodes_per_epoch = {}\n\
             val_episodes = {}\nseeds = {}\npos_query_prob = {}\nmin_freq = {}\nmax_vocab = {}\n\
             embedding_dim = {}\nfilter_widths = {}\nfeature_maps = {}\ndropout = {}\nmax_len = {}\n\
             learning_rate = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\ntrain_pos = {}\nval_pos = {}\n\
             train_neg = {}\nval_neg = {}\nanchor_map = {}\n",
            self.head.as_str(),
            self.regime.as_str(),
            self.k_shot,
            self.epochs,
            self.episodes_per_epoch,
            self.val_episodes,
            seeds,
            self.pos_query_prob,
            self.min_freq,
            self.max_vocab.map_or("none".to_string(), |v| v.to_string()),
            self.embedding_dim,
            list(&self.filter_widths),
            self.feature_maps,
            self.dropout,
            self.max_len,
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.train_pos.display(),
            self.val_pos.display(),
            opt_path(&self.train_neg),
            opt_path(&self.val_neg),
            opt_path(&self.anchor_map),
        )
    }

    /// Identifies a configuration independent of its seed list; per-seed
    /// metric rows with different fingerprints must not be aggregated.
    pub fn fingerprint(&self) -> String {
        self.to_kv_text()
            .lines()
            .filter(|l| !l.starts_with("seeds "))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Apply one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let bad = |what: &str| HarnessError::Config(format!("bad value {value:?} for {what}"));
        let parse_usize = |v: &str, what: &str| v.parse::<usize>().map_err(|_| bad(what));
        let parse_f64 = |v: &str, what: &str| v.parse::<f64>().map_err(|_| bad(what));
        let opt_path = |v: &str| if v == "none" { None } else { Some(PathBuf::from(v)) };
        match key {
            "head" => self.head = HeadKind::parse(value).ok_or_else(|| bad("head"))?,
            "regime" => self.regime = Regime::parse(value).ok_or_else(|| bad("regime"))?,
            "k_shot" => self.k_shot = parse_usize(value, key)?,
            "epochs" => self.epochs = parse_usize(value, key)?,
            "episodes_per_epoch" => self.episodes_per_epoch = parse_usize(value, key)?,
            "val_episodes" => self.val_episodes = parse_usize(value, key)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|v| v.trim().parse::<u64>().map_err(|_| bad("seeds")))
                    .collect::<Result<_, _>>()?;
            }
            "pos_query_prob" => self.pos_query_prob = parse_f64(value, key)?,
            "min_freq" => self.min_freq = parse_usize(value, key)?,
            "max_vocab" => {
                self.max_vocab = if value == "none" { None } else { Some(parse_usize(value, key)?) }
            }
            "embedding_dim" => self.embedding_dim = parse_usize(value, key)?,
            "filter_widths" => {
                self.filter_widths = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(|_| bad("filter_widths")))
                    .collect::<Result<_, _>>()?;
            }
            "feature_maps" => self.feature_maps = parse_usize(value, key)?,
            "dropout" => self.dropout = parse_f64(value, key)?,
            "max_len" => self.max_len = parse_usize(value, key)?,
            "learning_rate" => self.learning_rate = parse_f64(value, key)?,
            "beta1" => self.beta1 = parse_f64(value, key)?,
            "beta2" => self.beta2 = parse_f64(value, key)?,
            "epsilon" => self.epsilon = parse_f64(value, key)?,
            "train_pos" => self.train_pos = PathBuf::from(value),
            "val_pos" => self.val_pos = PathBuf::from(value),
            "train_neg" => self.train_neg = opt_path(value),
            "val_neg" => self.val_neg = opt_path(value),
            "anchor_map" => self.anchor_map = opt_path(value),
            other => return Err(HarnessError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse key-value text on top of `self`. Lines are `key = value`;
    /// blank lines and `#` comments are ignored.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!("config line {}: expected `key = value`", i + 1)));
            };
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<TrainConfig, HarnessError> {
        let mut config = TrainConfig::default();
        config.apply_kv_text(text)?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_the_full_protocol() {
        let config = TrainConfig::default();
        assert_eq!(config.epochs, 20);
        assert_eq!(config.episodes_per_epoch, 12_800);
        assert_eq!(config.val_episodes, 6_400);
        assert_eq!(config.seeds.len(), 5);
        assert_eq!(config.embedding_dim, 300);
        assert_eq!(config.filter_widths, vec![3, 4, 5]);
        assert_eq!(config.feature_maps, 100);
        assert_eq!(config.dropout, 0.5);
        assert_eq!(config.learning_rate, 1e-3);
        assert_eq!((config.beta1, config.beta2, config.epsilon), (0.9, 0.999, 1e-8));
    }

    #[test]
    fn kv_text_round_trips() {
        let mut config = TrainConfig::desk();
        config.head = HeadKind::Matching;
        config.regime = Regime::EventVsAll;
        config.train_pos = PathBuf::from("/data/pos.tsv");
        config.val_pos = PathBuf::from("/data/pos.tsv");
        config.val_neg = Some(PathBuf::from("/data/neg.tsv"));
        let text = config.to_kv_text();
        let back = TrainConfig::from_kv_text(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn fingerprint_ignores_seeds_only() {
        let mut a = TrainConfig::desk();
        let mut b = a.clone();
        b.seeds = vec![7, 8];
        assert_eq!(a.fingerprint(), b.fingerprint());
        a.k_shot = 3;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut config = TrainConfig::desk();
        assert!(config.apply("warp_factor", "9").is_err());
        assert!(config.apply("k_shot", "many").is_err());
        assert!(config.apply_kv_text("k_shot := 3").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let mut config = TrainConfig::desk();
        config.apply_kv_text("# comment\n\nk_shot = 7\n").unwrap();
        assert_eq!(config.k_shot, 7);
    }

    #[test]
    fn event_vs_event_requires_an_anchor_map() {
        let mut config = TrainConfig::desk();
        config.regime = Regime::EventVsEvent;
        assert!(config.validate().is_err());
        config.anchor_map = Some(PathBuf::from("anchors.tsv"));
        assert!(config.validate().is_ok());
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let mut config = TrainConfig::desk();
        config.seeds = vec![1, 1];
        assert!(config.validate().is_err());
    }
}
