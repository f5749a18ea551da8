use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::linalg::Mat;

/// One LSTM layer. Gate blocks are laid out `[input, forget, cell, output]`
/// along the column axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `input_dim x 4h`
    pub w_x: Mat,
    /// `h x 4h`
    pub w_h: Mat,
    /// `1 x 4h`
    pub b: Mat,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Mat::zeros(input_dim, 4 * hidden),
            w_h: Mat::zeros(hidden, 4 * hidden),
            b: Mat::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.rows
    }
}

/// Linear map from concatenated final encoder states to one decoder layer's
/// initial `(h, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeParams {
    /// `2h x h`
    pub w_h: Mat,
    pub b_h: Mat,
    pub w_c: Mat,
    pub b_c: Mat,
}

/// Every weight tensor of the encoder–attention–decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `V x e`
    pub src_embed: Mat,
    /// `V x e`
    pub tgt_embed: Mat,
    pub enc_fwd: Vec<LstmParams>,
    pub enc_bwd: Vec<LstmParams>,
    pub bridge: Vec<BridgeParams>,
    /// Decoder layer 0 takes `[embedding, previous attentional state]`.
    pub dec: Vec<LstmParams>,
    /// `W_a`, `h x 2h`: score `h_t^T W_a H_j`.
    pub attn_w: Mat,
    /// `W_c`, `3h x h`: attentional state `tanh([context, h_t] W_c)`.
    pub combine_w: Mat,
    /// `h x V`
    pub out_w: Mat,
    /// `1 x V`
    pub out_b: Mat,
}

impl Params {
    pub fn zeros(config: &ModelConfig, vocab_size: usize) -> Self {
        let (e, h) = (config.embedding_dim, config.hidden_dim);
        let enc_layer = |l: usize| LstmParams::zeros(if l == 0 { e } else { 2 * h }, h);
        Params {
            src_embed: Mat::zeros(vocab_size, e),
            tgt_embed: Mat::zeros(vocab_size, e),
            enc_fwd: (0..config.encoder_layers).map(enc_layer).collect(),
            enc_bwd: (0..config.encoder_layers).map(enc_layer).collect(),
            bridge: (0..config.decoder_layers)
                .map(|_| BridgeParams {
                    w_h: Mat::zeros(2 * h, h),
                    b_h: Mat::zeros(1, h),
                    w_c: Mat::zeros(2 * h, h),
                    b_c: Mat::zeros(1, h),
                })
                .collect(),
            dec: (0..config.decoder_layers)
                .map(|l| LstmParams::zeros(if l == 0 { e + h } else { h }, h))
                .collect(),
            attn_w: Mat::zeros(h, 2 * h),
            combine_w: Mat::zeros(3 * h, h),
            out_w: Mat::zeros(h, vocab_size),
            out_b: Mat::zeros(1, vocab_size),
        }
    }

    /// Uniform `[-param_init, param_init]` initialisation from `config.seed`.
    pub fn init(config: &ModelConfig, vocab_size: usize) -> Self {
        let mut p = Params::zeros(config, vocab_size);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = config.param_init;
        for t in p.tensors_mut() {
            for v in t.data.iter_mut() {
                *v = rng.gen_range(-r..r);
            }
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.attn_w.rows
    }

    pub fn embedding_dim(&self) -> usize {
        self.src_embed.cols
    }

    pub fn vocab_size(&self) -> usize {
        self.out_b.cols
    }

    /// Stable tensor names, in the same order as [`Params::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["src_embed".to_string(), "tgt_embed".to_string()];
        for (dir, layers) in [("fwd", &self.enc_fwd), ("bwd", &self.enc_bwd)] {
            for l in 0..layers.len() {
                for part in ["w_x", "w_h", "b"] {
                    names.push(format!("encoder.{dir}.{l}.{part}"));
                }
            }
        }
        for l in 0..self.bridge.len() {
            for part in ["w_h", "b_h", "w_c", "b_c"] {
                names.push(format!("bridge.{l}.{part}"));
            }
        }
        for l in 0..self.dec.len() {
            for part in ["w_x", "w_h", "b"] {
                names.push(format!("decoder.{l}.{part}"));
            }
        }
        names.extend(["attn_w", "combine_w", "out_w", "out_b"].map(String::from));
        names
    }

    pub fn tensors(&self) -> Vec<&Mat> {
        let mut v = vec![&self.src_embed, &self.tgt_embed];
        for layers in [&self.enc_fwd, &self.enc_bwd] {
            for l in layers {
                v.extend([&l.w_x, &l.w_h, &l.b]);
            }
        }
        for b in &self.bridge {
            v.extend([&b.w_h, &b.b_h, &b.w_c, &b.b_c]);
        }
        for l in &self.dec {
            v.extend([&l.w_x, &l.w_h, &l.b]);
        }
        v.extend([&self.attn_w, &self.combine_w, &self.out_w, &self.out_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = vec![&mut self.src_embed, &mut self.tgt_embed];
        for layers in [&mut self.enc_fwd, &mut self.enc_bwd] {
            for l in layers.iter_mut() {
                v.extend([&mut l.w_x, &mut l.w_h, &mut l.b]);
            }
        }
        for b in self.bridge.iter_mut() {
            v.extend([&mut b.w_h, &mut b.b_h, &mut b.w_c, &mut b.b_c]);
        }
        for l in self.dec.iter_mut() {
            v.extend([&mut l.w_x, &mut l.w_h, &mut l.b]);
        }
        v.extend([&mut self.attn_w, &mut self.combine_w, &mut self.out_w, &mut self.out_b]);
        v
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.sum_sq()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_config() {
        let c = ModelConfig { embedding_dim: 3, hidden_dim: 5, ..Default::default() };
        let p = Params::zeros(&c, 10);
        assert_eq!(p.enc_fwd[0].w_x.rows, 3);
        assert_eq!(p.enc_fwd[1].w_x.rows, 10);
        assert_eq!(p.dec[0].w_x.rows, 8);
        assert_eq!(p.dec[1].w_x.rows, 5);
        assert_eq!((p.attn_w.rows, p.attn_w.cols), (5, 10));
        assert_eq!((p.combine_w.rows, p.combine_w.cols), (15, 5));
        assert_eq!(p.tensor_names().len(), p.tensors().len());
    }

    #[test]
    fn init_is_seeded() {
        let c = ModelConfig { embedding_dim: 3, hidden_dim: 4, ..Default::default() };
        assert_eq!(Params::init(&c, 6), Params::init(&c, 6));
        let other = ModelConfig { seed: 1, ..c.clone() };
        assert_ne!(Params::init(&c, 6), Params::init(&other, 6));
        assert!(Params::init(&c, 6).tensors().iter().all(|t| t.data.iter().all(|v| v.abs() <= 0.1)));
    }
}
