//! Character-level encoder–decoder normalizer.
//!
//! A two-layer bi-directional LSTM encodes the dialect characters of a
//! chunk; a two-layer LSTM decoder with input feeding and general global
//! attention (`score = h_t^T W_a H_j`) emits the standard spelling. The
//! decoder starts from a learned linear map of the final encoder states.
//! Gradients are hand-derived; see `network.rs`.

mod config;
mod decode;
mod io;
pub mod linalg;
mod network;
mod params;
mod train;
mod vocab;

use thiserror::Error;

use crate::chunker::{from_char_sequence, to_char_sequence, windows, ChunkConfig};

pub use config::{ModelConfig, Optimizer, ATTENTION, DEFAULT_SEED};
pub use decode::{beam_decode, beam_decode_ids, greedy_decode_ids};
pub use io::{load_model, read_model, save_model, write_model, MODEL_HEADER};
pub use params::{BridgeParams, LstmParams, Params};
pub use train::{teacher_forced_loss, train_model, TrainReport};
pub use vocab::{Vocabulary, BOS, EOS, NUM_SPECIALS, PAD, UNK};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("no training examples")]
    NoExamples,
    #[error("empty source sequence")]
    EmptySource,
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error("non-finite parameters after step {0}")]
    NonFiniteParams(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    Format(String),
}

/// A trained normalizer: parameters plus everything needed to apply them.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: Params,
    pub chunk_size: usize,
}

impl NormalizerModel {
    /// A freshly initialised (untrained) model.
    pub fn new(config: ModelConfig, vocab: Vocabulary, chunk_size: usize) -> Result<Self, ModelError> {
        config.validate()?;
        let params = Params::init(&config, vocab.len());
        Ok(NormalizerModel { config, vocab, params, chunk_size })
    }

    /// Decodes one chunk of dialect characters.
    pub fn translate(&self, source: &[char]) -> Vec<char> {
        beam_decode(self, source, self.config.beam_width)
    }
}

/// Top-layer encoder states, one `2 * hidden_dim` vector (forward ‖
/// backward) per source position.
pub fn encode(params: &Params, source_ids: &[usize]) -> Result<Vec<Vec<f64>>, ModelError> {
    if source_ids.is_empty() {
        return Err(ModelError::EmptySource);
    }
    Ok(network::encode_single(params, source_ids))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionResult {
    pub context: Vec<f64>,
    pub weights: Vec<f64>,
    /// `tanh(W_c [context ‖ h_t])`
    pub attentional_state: Vec<f64>,
}

/// Global general attention of one decoder state over encoder states.
pub fn attention_context(params: &Params, decoder_state: &[f64], encoder_states: &[Vec<f64>]) -> AttentionResult {
    let width = 2 * params.hidden();
    let enc = network::EncoderOutput {
        states: encoder_states.iter().flatten().copied().collect(),
        lens: vec![encoder_states.len()],
        max_len: encoder_states.len(),
        width,
        finals: Vec::new(),
    };
    let out = network::attention_forward(params, decoder_state, &enc);
    let weights = out.weights.clone();
    let mut context = vec![0.0; width];
    for (w, h) in weights.iter().zip(encoder_states) {
        context.iter_mut().zip(h).for_each(|(c, v)| *c += w * v);
    }
    AttentionResult { context, weights, attentional_state: out.attn_h }
}

/// Dropout applied with masks drawn from a fixed seed, so repeated calls
/// see identical masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeededDropout {
    pub p: f64,
    pub seed: u64,
}

fn run_loss(
    params: &Params,
    src: &[Vec<usize>],
    tgt: &[Vec<usize>],
    dropout: Option<SeededDropout>,
    grad: Option<(&mut Params, f64)>,
) -> f64 {
    let batch = network::Batch { src: src.to_vec(), tgt: tgt.to_vec() };
    let mut rng: rand_chacha::ChaCha8Rng = rand::SeedableRng::seed_from_u64(dropout.map_or(0, |d| d.seed));
    let d = dropout.map(|d| network::Dropout { p: d.p, rng: &mut rng });
    network::batch_loss(params, &batch, d, grad)
}

/// Summed teacher-forced cross-entropy (nats) of target id sequences given
/// source id sequences; every target is scored with a final EOS.
pub fn sequence_loss(params: &Params, src: &[Vec<usize>], tgt: &[Vec<usize>], dropout: Option<SeededDropout>) -> f64 {
    run_loss(params, src, tgt, dropout, None)
}

/// [`sequence_loss`] together with its gradient for every parameter.
pub fn sequence_loss_gradient(
    params: &Params,
    src: &[Vec<usize>],
    tgt: &[Vec<usize>],
    dropout: Option<SeededDropout>,
) -> (f64, Params) {
    let mut grad = params.zeros_like();
    let loss = run_loss(params, src, tgt, dropout, Some((&mut grad, 1.0)));
    (loss, grad)
}

/// Chunks `dialect_tokens` by the model's chunk size, translates each chunk
/// and splits the output back into words. Characters the model has never
/// seen are fed as UNK; `_` is removed from input tokens.
pub fn normalize_tokens<S: AsRef<str>>(model: &NormalizerModel, dialect_tokens: &[S]) -> Vec<String> {
    let tokens: Vec<String> = dialect_tokens
        .iter()
        .map(|t| t.as_ref().chars().filter(|c| *c != crate::chunker::BOUNDARY && !c.is_whitespace()).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect();
    let k = model.chunk_size.max(1);
    let mut out = Vec::new();
    for (start, end) in windows(tokens.len(), ChunkConfig::new(k)) {
        let symbols = to_char_sequence(&tokens[start..end]).expect("tokens sanitised above");
        out.extend(from_char_sequence(&model.translate(&symbols)));
    }
    out
}
