//! Training hyperparameters and the flat `key = value` file that carries them.
//!
//! Defaults follow the published SAP setup (margin 0.2, MS-loss α = 2, β = 50,
//! ε = 1, batch 512, one epoch, learning rate 2e-5, names truncated to 25
//! characters). The encoder dimensions default to values sized for the
//! character n-gram reference encoder.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Slack λ in the hard-triplet mining inequality.
    pub margin_lambda: f64,
    /// Temperature on the negative-pair term of the MS loss.
    pub alpha: f64,
    /// Temperature on the positive-pair term of the MS loss.
    pub beta: f64,
    /// Offset subtracted from every similarity in the MS loss.
    pub epsilon: f64,
    pub batch_size: usize,
    pub names_per_class: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub max_name_chars: usize,
    pub embed_dim: usize,
    pub ngram_order: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin_lambda: 0.2,
            alpha: 2.0,
            beta: 50.0,
            epsilon: 1.0,
            batch_size: 512,
            names_per_class: 2,
            learning_rate: 2e-5,
            epochs: 1,
            max_name_chars: 25,
            embed_dim: 64,
            ngram_order: 3,
            vocab_size: 1 << 16,
            seed: 42,
        }
    }
}

const KEYS: [&str; 13] = [
    "margin_lambda",
    "alpha",
    "beta",
    "epsilon",
    "batch_size",
    "names_per_class",
    "learning_rate",
    "epochs",
    "max_name_chars",
    "embed_dim",
    "ngram_order",
    "vocab_size",
    "seed",
];

impl TrainConfig {
    /// Checks every field constraint, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.margin_lambda.is_finite() && self.margin_lambda >= 0.0) {
            return bad(format!("margin_lambda must be >= 0, got {}", self.margin_lambda));
        }
        for (key, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("learning_rate", self.learning_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{key} must be > 0, got {v}"));
            }
        }
        if !self.epsilon.is_finite() {
            return bad(format!("epsilon must be finite, got {}", self.epsilon));
        }
        for (key, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_name_chars", self.max_name_chars),
            ("embed_dim", self.embed_dim),
            ("ngram_order", self.ngram_order),
            ("vocab_size", self.vocab_size),
        ] {
            if v == 0 {
                return bad(format!("{key} must be positive"));
            }
        }
        if self.vocab_size > u32::MAX as usize || self.embed_dim > u32::MAX as usize {
            return bad("vocab_size and embed_dim must fit in 32 bits".into());
        }
        if self.names_per_class < 2 {
            return bad(format!(
                "names_per_class must be >= 2, got {}",
                self.names_per_class
            ));
        }
        if self.batch_size % self.names_per_class != 0 {
            return bad(format!(
                "batch_size {} is not a multiple of names_per_class {}",
                self.batch_size, self.names_per_class
            ));
        }
        Ok(())
    }

    /// Parses config text; values override the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            config
                .set(key, value)
                .map_err(|message| err(message))?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("cannot parse value {value:?} for key {key}"))
        }
        match key {
            "margin_lambda" => self.margin_lambda = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "names_per_class" => self.names_per_class = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "max_name_chars" => self.max_name_chars = num(key, value)?,
            "embed_dim" => self.embed_dim = num(key, value)?,
            "ngram_order" => self.ngram_order = num(key, value)?,
            "vocab_size" => self.vocab_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Renders every key in a fixed order. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "margin_lambda" => self.margin_lambda.to_string(),
                "alpha" => self.alpha.to_string(),
                "beta" => self.beta.to_string(),
                "epsilon" => self.epsilon.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "names_per_class" => self.names_per_class.to_string(),
                "learning_rate" => self.learning_rate.to_string(),
                "epochs" => self.epochs.to_string(),
                "max_name_chars" => self.max_name_chars.to_string(),
                "embed_dim" => self.embed_dim.to_string(),
                "ngram_order" => self.ngram_order.to_string(),
                "vocab_size" => self.vocab_size.to_string(),
                "seed" => self.seed.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Reads a config file. Missing keys keep their defaults; unknown keys are
/// rejected.
pub fn load_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    TrainConfig::parse(&text)
}

pub fn write_config(path: impl AsRef<Path>, config: &TrainConfig) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), config.to_config_string().as_bytes())
}
