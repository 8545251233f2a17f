use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{DEFAULT_DROPOUT, DEFAULT_HIDDEN};

/// Training hyperparameters.
///
/// Round-trips through a plain `key = value` text file; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hinge margin `m`.
    pub margin: f64,
    /// Weight of the in-batch ranking penalty in the regression loss.
    pub lambda_rank: f64,
    /// Decoupled weight decay.
    pub l2: f64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub max_epochs: usize,
    /// Items per step (regression) or pairs per step (comparative).
    pub batch_size: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.5,
            lambda_rank: 0.1,
            l2: 1e-4,
            lr_max: 1e-3,
            lr_min: 1e-5,
            max_epochs: 200,
            batch_size: 64,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: DEFAULT_DROPOUT,
        }
    }
}

const KEYS: [&str; 12] = [
    "margin",
    "lambda_rank",
    "l2",
    "lr_max",
    "lr_min",
    "max_epochs",
    "batch_size",
    "patience",
    "validation_fraction",
    "seed",
    "hidden",
    "dropout",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.margin > 0.0) {
            return bad(format!("margin must be positive, got {}", self.margin));
        }
        if !(self.lambda_rank >= 0.0) {
            return bad(format!("lambda_rank must be non-negative, got {}", self.lambda_rank));
        }
        if !(self.l2 >= 0.0) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return bad(format!(
                "need 0 <= lr_min <= lr_max, got {} / {}",
                self.lr_min, self.lr_max
            ));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("max_epochs, batch_size and patience must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be a nonempty list of positive counts".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let values = [
            self.margin.to_string(),
            self.lambda_rank.to_string(),
            self.l2.to_string(),
            self.lr_max.to_string(),
            self.lr_min.to_string(),
            self.max_epochs.to_string(),
            self.batch_size.to_string(),
            self.patience.to_string(),
            self.validation_fraction.to_string(),
            self.seed.to_string(),
            hidden.join(","),
            self.dropout.to_string(),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Starts from the defaults and applies each `key = value` line.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |message: String| Error::MalformedLine {
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| malformed(format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(malformed)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_config_string()).map_err(|e| Error::io(path, e))
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        match key {
            "margin" => self.margin = parse(key, value)?,
            "lambda_rank" => self.lambda_rank = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "lr_max" => self.lr_max = parse(key, value)?,
            "lr_min" => self.lr_min = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|w| parse::<usize>(key, w.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "dropout" => self.dropout = parse(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.margin, 1.5);
        assert_eq!(cfg.hidden, vec![1024, 512, 256]);
    }

    #[test]
    fn comments_and_partial_files() {
        let cfg = TrainConfig::from_config_str("# desk run\nmargin = 1.0  # equation form\nhidden=8, 4\n").unwrap();
        assert_eq!(cfg.margin, 1.0);
        assert_eq!(cfg.hidden, vec![8, 4]);
        assert_eq!(cfg.batch_size, 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            TrainConfig::from_config_str("foo = 1"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(TrainConfig::from_config_str("margin = -1").is_err());
        assert!(TrainConfig::from_config_str("\nlr_min = 0.1\nlr_max = 0.01").is_err());
        assert!(TrainConfig::from_config_str("patience = 0").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(
            margin in 0.01f64..10.0,
            lambda in 0.0f64..2.0,
            l2 in 0.0f64..1e-2,
            lr in 1e-6f64..1e-1,
            epochs in 1usize..500,
            batch in 1usize..512,
            seed in any::<u64>(),
            hidden in proptest::collection::vec(1usize..2048, 1..5),
            dropout in 0.0f64..0.9,
        ) {
            let cfg = TrainConfig {
                margin,
                lambda_rank: lambda,
                l2,
                lr_max: lr,
                lr_min: lr / 10.0,
                max_epochs: epochs,
                batch_size: batch,
                patience: 3,
                validation_fraction: 0.2,
                seed,
                hidden,
                dropout,
            };
            prop_assert_eq!(TrainConfig::from_config_str(&cfg.to_config_string()).unwrap(), cfg);
        }
    }
}
