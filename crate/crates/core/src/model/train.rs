use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Optimizer};
use super::network::{batch_loss, Batch, Dropout};
use super::params::Params;
use super::vocab::Vocabulary;
use super::{ModelError, NormalizerModel};
use crate::chunker::ChunkExample;

// independent streams derived from the single seed
const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub steps_run: usize,
    /// Mean per-symbol cross-entropy (nats) over the full training set,
    /// teacher forced, without dropout, under the final parameters.
    pub final_training_loss: f64,
    /// `(step, batch loss)` every `log_interval` steps.
    pub loss_curve: Vec<(usize, f64)>,
    pub final_learning_rate: f64,
}

fn to_batch(vocab: &Vocabulary, examples: &[&ChunkExample]) -> Batch {
    Batch {
        src: examples.iter().map(|e| vocab.encode(&e.source)).collect(),
        tgt: examples.iter().map(|e| vocab.encode(&e.target)).collect(),
    }
}

/// Mean per-symbol teacher-forced cross-entropy of `examples`.
pub fn teacher_forced_loss(model: &NormalizerModel, examples: &[ChunkExample]) -> f64 {
    let mut total = 0.0;
    let mut symbols = 0usize;
    for chunk in examples.chunks(model.config.batch_size.max(1)) {
        let refs: Vec<&ChunkExample> = chunk.iter().collect();
        let batch = to_batch(&model.vocab, &refs);
        symbols += batch.num_symbols();
        total += batch_loss(&model.params, &batch, None, None);
    }
    if symbols == 0 {
        0.0
    } else {
        total / symbols as f64
    }
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(params: &mut Params, grads: &Params, lr: f64, adam: &mut Option<Adam>) {
    match adam {
        None => {
            for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                p.data.iter_mut().zip(&g.data).for_each(|(w, d)| *w -= lr * d);
            }
        }
        Some(state) => {
            state.t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(state.t);
            let c2 = 1.0 - ADAM_BETA2.powi(state.t);
            let tensors = params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
            for ((p, g), (m, v)) in tensors {
                for i in 0..p.data.len() {
                    let d = g.data[i];
                    m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * d;
                    v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * d * d;
                    let mh = m.data[i] / c1;
                    let vh = v.data[i] / c2;
                    p.data[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Teacher-forced training on `examples`. Initialisation, batch order and
/// dropout masks all derive from `config.seed`, so two runs with the same
/// inputs produce identical parameters.
pub fn train_model(
    examples: &[ChunkExample],
    config: &ModelConfig,
) -> Result<(NormalizerModel, TrainReport), ModelError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(ModelError::NoExamples);
    }
    let vocab = Vocabulary::build(examples);
    let chunk_size = examples.iter().map(|e| e.k).max().unwrap_or(1);
    let mut model = NormalizerModel::new(config.clone(), vocab, chunk_size)?;

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut order_rng);
    let mut cursor = 0;

    let mut adam = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam => Some(Adam {
            m: model.params.zeros_like(),
            v: model.params.zeros_like(),
            t: 0,
        }),
    };
    let mut lr = config.learning_rate;
    let mut grads = model.params.zeros_like();
    let mut loss_curve = Vec::new();
    let mut window_sum = 0.0;
    let mut window_len = 0usize;
    let mut best_window = f64::INFINITY;

    for step in 1..=config.train_steps {
        let mut picked = Vec::with_capacity(config.batch_size);
        while picked.len() < config.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            picked.push(&examples[order[cursor]]);
            cursor += 1;
        }
        let batch = to_batch(&model.vocab, &picked);
        let n = batch.num_symbols() as f64;

        grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        let dropout = (config.dropout > 0.0).then_some(Dropout { p: config.dropout, rng: &mut drop_rng });
        let loss = batch_loss(&model.params, &batch, dropout, Some((&mut grads, 1.0 / n))) / n;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { step, loss });
        }

        if config.max_grad_norm > 0.0 {
            let norm = grads.norm();
            if norm > config.max_grad_norm {
                let s = config.max_grad_norm / norm;
                grads.tensors_mut().into_iter().for_each(|t| t.data.iter_mut().for_each(|v| *v *= s));
            }
        }
        apply_update(&mut model.params, &grads, lr, &mut adam);
        if !model.params.is_finite() {
            return Err(ModelError::NonFiniteParams(step));
        }

        window_sum += loss;
        window_len += 1;
        if window_len == config.plateau_window {
            let mean = window_sum / window_len as f64;
            if mean >= best_window {
                lr *= config.lr_decay;
            } else {
                best_window = mean;
            }
            window_sum = 0.0;
            window_len = 0;
        }
        if step % config.log_interval == 0 {
            loss_curve.push((step, loss));
        }
    }

    let final_training_loss = teacher_forced_loss(&model, examples);
    let report = TrainReport {
        steps_run: config.train_steps,
        final_training_loss,
        loss_curve,
        final_learning_rate: lr,
    };
    Ok((model, report))
}
