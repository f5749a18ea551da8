use std::fmt::Write as _;
use std::str::FromStr;

use super::ModelError;

/// The seed used throughout when none is given.
pub const DEFAULT_SEED: u64 = 3435;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Plain SGD with gradient-norm clipping and plateau halving.
    Sgd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(ModelError::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub dropout: f64,
    pub seed: u64,
    pub train_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; 0 disables clipping.
    pub max_grad_norm: f64,
    /// Learning-rate multiplier applied when a loss window fails to improve.
    pub lr_decay: f64,
    /// Steps per plateau-detection window.
    pub plateau_window: usize,
    /// Uniform init range `[-param_init, param_init]`.
    pub param_init: f64,
    pub beam_width: usize,
    pub max_decode_len: usize,
    /// Record the batch loss every this many steps.
    pub log_interval: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 64,
            hidden_dim: 128,
            encoder_layers: 2,
            decoder_layers: 2,
            dropout: 0.3,
            seed: DEFAULT_SEED,
            train_steps: 5000,
            batch_size: 64,
            learning_rate: 1.0,
            optimizer: Optimizer::Sgd,
            max_grad_norm: 5.0,
            lr_decay: 0.5,
            plateau_window: 250,
            param_init: 0.1,
            beam_width: 5,
            max_decode_len: 100,
            log_interval: 50,
        }
    }
}

/// Attention is always general (bilinear) global attention; recorded in model files.
pub const ATTENTION: &str = "general-global";

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("batch_size", self.batch_size),
            ("beam_width", self.beam_width),
            ("max_decode_len", self.max_decode_len),
            ("plateau_window", self.plateau_window),
            ("log_interval", self.log_interval),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout must be in [0,1), got {}", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(ModelError::Config("lr_decay must be in (0,1]".into()));
        }
        if self.max_grad_norm.is_nan() || self.max_grad_norm < 0.0 || self.param_init.is_nan() || self.param_init <= 0.0 {
            return Err(ModelError::Config("max_grad_norm >= 0 and param_init > 0 required".into()));
        }
        Ok(())
    }

    /// `key=value` lines, one per field.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "embedding_dim={}", self.embedding_dim);
        let _ = writeln!(s, "hidden_dim={}", self.hidden_dim);
        let _ = writeln!(s, "encoder_layers={}", self.encoder_layers);
        let _ = writeln!(s, "encoder_bidirectional=true");
        let _ = writeln!(s, "decoder_layers={}", self.decoder_layers);
        let _ = writeln!(s, "attention={ATTENTION}");
        let _ = writeln!(s, "dropout={:?}", self.dropout);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "train_steps={}", self.train_steps);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "learning_rate={:?}", self.learning_rate);
        let _ = writeln!(s, "optimizer={}", self.optimizer.name());
        let _ = writeln!(s, "max_grad_norm={:?}", self.max_grad_norm);
        let _ = writeln!(s, "lr_decay={:?}", self.lr_decay);
        let _ = writeln!(s, "plateau_window={}", self.plateau_window);
        let _ = writeln!(s, "param_init={:?}", self.param_init);
        let _ = writeln!(s, "beam_width={}", self.beam_width);
        let _ = writeln!(s, "max_decode_len={}", self.max_decode_len);
        let _ = writeln!(s, "log_interval={}", self.log_interval);
        s
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ModelError> {
            v.parse().map_err(|_| ModelError::Config(format!("bad value {v:?} for {key}")))
        }
        match key {
            "embedding_dim" => self.embedding_dim = num(key, value)?,
            "hidden_dim" => self.hidden_dim = num(key, value)?,
            "encoder_layers" => self.encoder_layers = num(key, value)?,
            "decoder_layers" => self.decoder_layers = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "train_steps" => self.train_steps = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "max_grad_norm" => self.max_grad_norm = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "plateau_window" => self.plateau_window = num(key, value)?,
            "param_init" => self.param_init = num(key, value)?,
            "beam_width" => self.beam_width = num(key, value)?,
            "max_decode_len" => self.max_decode_len = num(key, value)?,
            "log_interval" => self.log_interval = num(key, value)?,
            "encoder_bidirectional" if value == "true" => {}
            "attention" if value == ATTENTION => {}
            other => {
                return Err(ModelError::Config(format!("unsupported setting {other}={value}")))
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ModelConfig { dropout: 0.25, optimizer: Optimizer::Adam, ..Default::default() };
        c.learning_rate = 0.002;
        let mut back = ModelConfig { hidden_dim: 1, ..Default::default() };
        for line in c.to_text().lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.set(k, v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        assert_eq!(c.seed, 3435);
        assert_eq!((c.encoder_layers, c.decoder_layers, c.beam_width), (2, 2, 5));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ModelConfig { dropout: 1.0, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { hidden_dim: 0, ..Default::default() }.validate().is_err());
        let mut c = ModelConfig::default();
        assert!(c.set("attention", "dot").is_err());
        assert!(c.set("encoder_bidirectional", "false").is_err());
    }
}
