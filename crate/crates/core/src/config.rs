//! Experiment configuration and its flat `key = value` text form.
//!
//! ```text
//! # comments start with '#'
//! n_contexts = 10
//! lambda = 1000
//! train_frac = 4/5
//! ```
//!
//! Unknown keys are rejected; missing keys keep their defaults. The canonical
//! rendering lists every key in declaration order and is what the config
//! fingerprint hashes.

use sha2::{Digest, Sha256};

use crate::data::{Segmentation, TrainFraction};
use crate::error::{CelError, Result};
use crate::nn::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormalizerScope {
    /// Min/max over the whole series.
    Global,
    /// Min/max over the first context's span only; later contexts may leave [0, 1].
    FirstContext,
}

impl NormalizerScope {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizerScope::Global => "global",
            NormalizerScope::FirstContext => "first_context",
        }
    }
}

impl std::str::FromStr for NormalizerScope {
    type Err = CelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(NormalizerScope::Global),
            "first_context" => Ok(NormalizerScope::FirstContext),
            other => Err(CelError::Config(format!(
                "unknown normalizer_scope `{other}` (expected global or first_context)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_contexts: usize,
    pub window: usize,
    pub seq_len: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda: f64,
    pub epochs_per_context: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub clip_norm: f64,
    pub train_frac: TrainFraction,
    pub normalizer_scope: NormalizerScope,
    /// Reshuffle training windows every epoch.
    pub shuffle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_contexts: 10,
            window: 12,
            seq_len: 1,
            hidden_dim: 32,
            batch_size: 32,
            lr: 0.01,
            lambda: 1000.0,
            epochs_per_context: 100,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            clip_norm: 5.0,
            train_frac: TrainFraction::default(),
            normalizer_scope: NormalizerScope::Global,
            shuffle: true,
        }
    }
}

pub const CONFIG_KEYS: [&str; 14] = [
    "n_contexts",
    "window",
    "seq_len",
    "hidden_dim",
    "batch_size",
    "lr",
    "lambda",
    "epochs_per_context",
    "seed",
    "optimizer",
    "clip_norm",
    "train_frac",
    "normalizer_scope",
    "shuffle",
];

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CelError::Config(format!("cannot parse `{value}` for key `{key}`")))
}

impl ExperimentConfig {
    pub fn segmentation(&self) -> Segmentation {
        Segmentation {
            n_contexts: self.n_contexts,
            train_frac: self.train_frac,
            window: self.window,
            seq_len: self.seq_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_contexts", self.n_contexts),
            ("window", self.window),
            ("seq_len", self.seq_len),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("epochs_per_context", self.epochs_per_context),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(CelError::Config(format!("{key} must be >= 1")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CelError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(CelError::Config(format!(
                "clip_norm must be positive, got {}",
                self.clip_norm
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CelError::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        TrainFraction::new(self.train_frac.num, self.train_frac.den)?;
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_contexts" => self.n_contexts = parse_field(key, value)?,
            "window" => self.window = parse_field(key, value)?,
            "seq_len" => self.seq_len = parse_field(key, value)?,
            "hidden_dim" => self.hidden_dim = parse_field(key, value)?,
            "batch_size" => self.batch_size = parse_field(key, value)?,
            "lr" => self.lr = parse_field(key, value)?,
            "lambda" => self.lambda = parse_field(key, value)?,
            "epochs_per_context" => self.epochs_per_context = parse_field(key, value)?,
            "seed" => self.seed = parse_field(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "clip_norm" => self.clip_norm = parse_field(key, value)?,
            "train_frac" => self.train_frac = value.parse()?,
            "normalizer_scope" => self.normalizer_scope = value.parse()?,
            "shuffle" => self.shuffle = parse_field(key, value)?,
            other => return Err(CelError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Canonical `(key, value)` pairs in declaration order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        CONFIG_KEYS
            .iter()
            .map(|&key| {
                let value = match key {
                    "n_contexts" => self.n_contexts.to_string(),
                    "window" => self.window.to_string(),
                    "seq_len" => self.seq_len.to_string(),
                    "hidden_dim" => self.hidden_dim.to_string(),
                    "batch_size" => self.batch_size.to_string(),
                    "lr" => format!("{:?}", self.lr),
                    "lambda" => format!("{:?}", self.lambda),
                    "epochs_per_context" => self.epochs_per_context.to_string(),
                    "seed" => self.seed.to_string(),
                    "optimizer" => self.optimizer.as_str().to_string(),
                    "clip_norm" => format!("{:?}", self.clip_norm),
                    "train_frac" => self.train_frac.to_string(),
                    "normalizer_scope" => self.normalizer_scope.as_str().to_string(),
                    "shuffle" => self.shuffle.to_string(),
                    _ => unreachable!(),
                };
                (key, value)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CelError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CelError::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| CelError::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hyperparameters() {
        let c = ExperimentConfig::default();
        assert_eq!(c.lr, 0.01);
        assert_eq!(c.hidden_dim, 32);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.lambda, 1000.0);
        assert_eq!(c.window, 12);
        assert_eq!(c.clip_norm, 5.0);
        assert_eq!(c.train_frac, TrainFraction { num: 4, den: 5 });
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.lr = 0.003;
        c.optimizer = OptimizerKind::Sgd;
        c.normalizer_scope = NormalizerScope::FirstContext;
        c.train_frac = TrainFraction::new(3, 4).unwrap();
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_partial_files() {
        let c = ExperimentConfig::from_text("# header\n\nseed = 42   # trailing\nlambda=0\n").unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.hidden_dim, 32);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_text("bogus = 1").is_err());
        assert!(ExperimentConfig::from_text("seed = x").is_err());
        assert!(ExperimentConfig::from_text("seed = 1\nseed = 2").is_err());
        assert!(ExperimentConfig::from_text("lr = 0").is_err());
        assert!(ExperimentConfig::from_text("lambda = -1").is_err());
        assert!(ExperimentConfig::from_text("no equals sign").is_err());
        assert!(ExperimentConfig::from_text("optimizer = rmsprop").is_err());
    }

    #[test]
    fn fingerprint_tracks_every_field() {
        let base = ExperimentConfig::default();
        let fp = base.fingerprint();
        assert_eq!(fp, ExperimentConfig::default().fingerprint());
        assert_eq!(fp.len(), 64);
        let variants = [
            ("n_contexts", "9"),
            ("window", "11"),
            ("seq_len", "2"),
            ("hidden_dim", "16"),
            ("batch_size", "8"),
            ("lr", "0.02"),
            ("lambda", "999"),
            ("epochs_per_context", "5"),
            ("seed", "1"),
            ("optimizer", "sgd"),
            ("clip_norm", "1"),
            ("train_frac", "3/4"),
            ("normalizer_scope", "first_context"),
            ("shuffle", "false"),
        ];
        assert_eq!(variants.len(), CONFIG_KEYS.len());
        let mut seen = std::collections::HashSet::new();
        seen.insert(fp);
        for (k, v) in variants {
            let mut c = base.clone();
            c.set(k, v).unwrap();
            assert!(seen.insert(c.fingerprint()), "{k} did not change the fingerprint");
        }
    }
}
