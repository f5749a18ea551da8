//! Forward and backward passes of the bi-directional LSTM encoder, the
//! bridge, the input-feeding LSTM decoder with general global attention, and
//! the output softmax.
//!
//! All batched tensors are row-major with one row per example. Encoder
//! sequences are padded at the end; padded steps hold the previous state so
//! the final state of every row is its state after its last real symbol.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{
    add_bias, colsum_acc, concat_cols, dot, matmul, matmul_acc, matmul_t, outer_acc, sigmoid,
    softmax_in_place, split_cols,
};
use super::params::{LstmParams, Params};
use super::vocab::{BOS, EOS, PAD};

/// Inverted dropout: kept units are scaled by `1/(1-p)`.
pub(crate) struct Dropout<'a> {
    pub p: f64,
    pub rng: &'a mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn mask(&mut self, n: usize) -> Vec<f64> {
        let scale = 1.0 / (1.0 - self.p);
        (0..n)
            .map(|_| if self.rng.gen::<f64>() < self.p { 0.0 } else { scale })
            .collect()
    }
}

fn maybe_mask(dropout: &mut Option<Dropout<'_>>, n: usize) -> Option<Vec<f64>> {
    match dropout {
        Some(d) if d.p > 0.0 => Some(d.mask(n)),
        _ => None,
    }
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
    }
}

/// Saved activations of one batched LSTM step.
pub(crate) struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`, `B x 4h`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    active: Option<Vec<bool>>,
}

pub(crate) fn lstm_step(
    p: &LstmParams,
    x: Vec<f64>,
    h_prev: &[f64],
    c_prev: &[f64],
    bsz: usize,
    active: Option<Vec<bool>>,
) -> LstmStep {
    let hd = p.hidden();
    let mut z = matmul(&x, bsz, &p.w_x);
    matmul_acc(h_prev, bsz, &p.w_h, &mut z);
    add_bias(&mut z, bsz, &p.b);
    let mut h = vec![0.0; bsz * hd];
    let mut c = vec![0.0; bsz * hd];
    let mut tanh_c = vec![0.0; bsz * hd];
    for b in 0..bsz {
        let rows = b * hd..(b + 1) * hd;
        if active.as_ref().is_some_and(|a| !a[b]) {
            h[rows.clone()].copy_from_slice(&h_prev[rows.clone()]);
            c[rows.clone()].copy_from_slice(&c_prev[rows]);
            continue;
        }
        let zr = &mut z[b * 4 * hd..(b + 1) * 4 * hd];
        for k in 0..hd {
            let i = sigmoid(zr[k]);
            let f = sigmoid(zr[hd + k]);
            let g = zr[2 * hd + k].tanh();
            let o = sigmoid(zr[3 * hd + k]);
            zr[k] = i;
            zr[hd + k] = f;
            zr[2 * hd + k] = g;
            zr[3 * hd + k] = o;
            let cv = f * c_prev[b * hd + k] + i * g;
            let tc = cv.tanh();
            c[b * hd + k] = cv;
            tanh_c[b * hd + k] = tc;
            h[b * hd + k] = o * tc;
        }
    }
    LstmStep {
        x,
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: z,
        tanh_c,
        h,
        c,
        active,
    }
}

/// Returns `(dx, dh_prev, dc_prev)` and accumulates parameter gradients.
pub(crate) fn lstm_step_backward(
    p: &LstmParams,
    s: &LstmStep,
    dh: &[f64],
    dc: &[f64],
    bsz: usize,
    grad: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = p.hidden();
    let mut dz = vec![0.0; bsz * 4 * hd];
    let mut dc_prev = vec![0.0; bsz * hd];
    for b in 0..bsz {
        if s.active.as_ref().is_some_and(|a| !a[b]) {
            dc_prev[b * hd..(b + 1) * hd].copy_from_slice(&dc[b * hd..(b + 1) * hd]);
            continue;
        }
        let g = &s.gates[b * 4 * hd..(b + 1) * 4 * hd];
        let dzr = &mut dz[b * 4 * hd..(b + 1) * 4 * hd];
        for k in 0..hd {
            let idx = b * hd + k;
            let (i, f, gg, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
            let tc = s.tanh_c[idx];
            let d_o = dh[idx] * tc;
            let dcc = dc[idx] + dh[idx] * o * (1.0 - tc * tc);
            let di = dcc * gg;
            let dg = dcc * i;
            let df = dcc * s.c_prev[idx];
            dc_prev[idx] = dcc * f;
            dzr[k] = di * i * (1.0 - i);
            dzr[hd + k] = df * f * (1.0 - f);
            dzr[2 * hd + k] = dg * (1.0 - gg * gg);
            dzr[3 * hd + k] = d_o * o * (1.0 - o);
        }
    }
    outer_acc(&s.x, &dz, bsz, &mut grad.w_x);
    outer_acc(&s.h_prev, &dz, bsz, &mut grad.w_h);
    colsum_acc(&dz, bsz, &mut grad.b);
    let dx = matmul_t(&dz, bsz, &p.w_x);
    let mut dh_prev = matmul_t(&dz, bsz, &p.w_h);
    if let Some(active) = &s.active {
        for b in (0..bsz).filter(|&b| !active[b]) {
            dh_prev[b * hd..(b + 1) * hd].copy_from_slice(&dh[b * hd..(b + 1) * hd]);
        }
    }
    (dx, dh_prev, dc_prev)
}

/// Final `(h, c)` of both directions of one encoder layer, each `B x h`.
#[derive(Debug, Clone)]
pub(crate) struct LayerFinals {
    pub h_fwd: Vec<f64>,
    pub c_fwd: Vec<f64>,
    pub h_bwd: Vec<f64>,
    pub c_bwd: Vec<f64>,
}

/// Top-layer encoder states, example-major `B x T x 2h` (zero padded).
#[derive(Debug, Clone)]
pub(crate) struct EncoderOutput {
    pub states: Vec<f64>,
    pub lens: Vec<usize>,
    pub max_len: usize,
    pub width: usize,
    pub finals: Vec<LayerFinals>,
}

impl EncoderOutput {
    pub fn bsz(&self) -> usize {
        self.lens.len()
    }

    pub fn state(&self, b: usize, t: usize) -> &[f64] {
        let off = (b * self.max_len + t) * self.width;
        &self.states[off..off + self.width]
    }

    /// Copies example 0 into `n` identical rows (for beam search).
    pub fn replicate(&self, n: usize) -> EncoderOutput {
        let per = self.max_len * self.width;
        let rep = |v: &[f64], w: usize| -> Vec<f64> { v[..w].repeat(n) };
        let hd = self.width / 2;
        EncoderOutput {
            states: rep(&self.states, per),
            lens: vec![self.lens[0]; n],
            max_len: self.max_len,
            width: self.width,
            finals: self
                .finals
                .iter()
                .map(|f| LayerFinals {
                    h_fwd: rep(&f.h_fwd, hd),
                    c_fwd: rep(&f.c_fwd, hd),
                    h_bwd: rep(&f.h_bwd, hd),
                    c_bwd: rep(&f.c_bwd, hd),
                })
                .collect(),
        }
    }
}

struct BiLayerCache {
    fwd: Vec<LstmStep>,
    bwd: Vec<LstmStep>,
    /// Dropout mask on this layer's input (layers above the first only).
    input_mask: Option<Vec<Vec<f64>>>,
}

pub(crate) struct EncoderCache {
    src: Vec<Vec<usize>>,
    layers: Vec<BiLayerCache>,
}

/// Reverses each row's first `lens[b]` time steps; padded steps become zero.
fn reverse_per_row(xs: &[Vec<f64>], lens: &[usize], width: usize) -> Vec<Vec<f64>> {
    let t_max = xs.len();
    let mut out = vec![vec![0.0; lens.len() * width]; t_max];
    for (b, &len) in lens.iter().enumerate() {
        for t in 0..len {
            out[t][b * width..(b + 1) * width].copy_from_slice(&xs[len - 1 - t][b * width..(b + 1) * width]);
        }
    }
    out
}

fn run_direction(p: &LstmParams, inputs: Vec<Vec<f64>>, lens: &[usize]) -> Vec<LstmStep> {
    let bsz = lens.len();
    let hd = p.hidden();
    let mut h = vec![0.0; bsz * hd];
    let mut c = vec![0.0; bsz * hd];
    let mut steps = Vec::with_capacity(inputs.len());
    for (t, x) in inputs.into_iter().enumerate() {
        let active: Vec<bool> = lens.iter().map(|&l| t < l).collect();
        let s = lstm_step(p, x, &h, &c, bsz, Some(active));
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        steps.push(s);
    }
    steps
}

pub(crate) fn encoder_forward(
    params: &Params,
    src: &[Vec<usize>],
    mut dropout: Option<Dropout<'_>>,
) -> (EncoderOutput, EncoderCache) {
    let bsz = src.len();
    let lens: Vec<usize> = src.iter().map(Vec::len).collect();
    let t_max = lens.iter().copied().max().unwrap_or(0);
    let e = params.embedding_dim();
    let hd = params.hidden();

    let mut inputs: Vec<Vec<f64>> = (0..t_max)
        .map(|t| {
            let mut x = vec![0.0; bsz * e];
            for (b, ids) in src.iter().enumerate() {
                let id = ids.get(t).copied().unwrap_or(PAD);
                x[b * e..(b + 1) * e].copy_from_slice(params.src_embed.row(id));
            }
            x
        })
        .collect();

    let mut layers = Vec::with_capacity(params.enc_fwd.len());
    let mut finals = Vec::with_capacity(params.enc_fwd.len());
    for (l, (pf, pb)) in params.enc_fwd.iter().zip(&params.enc_bwd).enumerate() {
        let input_mask = if l > 0 && dropout.as_ref().is_some_and(|d| d.p > 0.0) {
            let masks: Vec<Vec<f64>> = inputs
                .iter_mut()
                .map(|x| {
                    let m = maybe_mask(&mut dropout, x.len());
                    apply_mask(x, &m);
                    m.expect("dropout active")
                })
                .collect();
            Some(masks)
        } else {
            None
        };
        let width = inputs.first().map_or(0, |x| x.len() / bsz.max(1));
        let reversed = reverse_per_row(&inputs, &lens, width);
        let fwd = run_direction(pf, inputs, &lens);
        let bwd = run_direction(pb, reversed, &lens);

        let bwd_h: Vec<Vec<f64>> = bwd.iter().map(|s| s.h.clone()).collect();
        let bwd_h = reverse_per_row(&bwd_h, &lens, hd);
        inputs = (0..t_max)
            .map(|t| concat_cols(&fwd[t].h, hd, &bwd_h[t], hd, bsz))
            .collect();
        let last = |steps: &[LstmStep], sel: fn(&LstmStep) -> &Vec<f64>| {
            steps.last().map_or_else(|| vec![0.0; bsz * hd], |s| sel(s).clone())
        };
        finals.push(LayerFinals {
            h_fwd: last(&fwd, |s| &s.h),
            c_fwd: last(&fwd, |s| &s.c),
            h_bwd: last(&bwd, |s| &s.h),
            c_bwd: last(&bwd, |s| &s.c),
        });
        layers.push(BiLayerCache { fwd, bwd, input_mask });
    }

    let width = 2 * hd;
    let mut states = vec![0.0; bsz * t_max * width];
    for (b, &len) in lens.iter().enumerate() {
        for t in 0..len {
            let off = (b * t_max + t) * width;
            states[off..off + width].copy_from_slice(&inputs[t][b * width..(b + 1) * width]);
        }
    }
    (
        EncoderOutput { states, lens: lens.clone(), max_len: t_max, width, finals },
        EncoderCache { src: src.to_vec(), layers },
    )
}

/// `d_states` is example-major like [`EncoderOutput::states`]; `d_finals`
/// holds gradients w.r.t. each layer's final states.
pub(crate) fn encoder_backward(
    params: &Params,
    cache: &EncoderCache,
    d_states: &[f64],
    d_finals: &[LayerFinals],
    grad: &mut Params,
) {
    let bsz = cache.src.len();
    let lens: Vec<usize> = cache.src.iter().map(Vec::len).collect();
    let t_max = lens.iter().copied().max().unwrap_or(0);
    let hd = params.hidden();
    let width = 2 * hd;

    // to time-major
    let mut d_out: Vec<Vec<f64>> = (0..t_max)
        .map(|t| {
            let mut row = vec![0.0; bsz * width];
            for (b, &len) in lens.iter().enumerate() {
                if t < len {
                    let off = (b * t_max + t) * width;
                    row[b * width..(b + 1) * width].copy_from_slice(&d_states[off..off + width]);
                }
            }
            row
        })
        .collect();

    for l in (0..params.enc_fwd.len()).rev() {
        let lc = &cache.layers[l];
        let (pf, pb) = (&params.enc_fwd[l], &params.enc_bwd[l]);
        let mut d_fwd = Vec::with_capacity(t_max);
        let mut d_bwd = Vec::with_capacity(t_max);
        for row in &d_out {
            let (f, b) = split_cols(row, hd, hd, bsz);
            d_fwd.push(f);
            d_bwd.push(b);
        }
        let d_bwd_rev = reverse_per_row(&d_bwd, &lens, hd);
        let fin = &d_finals[l];

        let run_back = |p: &LstmParams, steps: &[LstmStep], d: &[Vec<f64>], dh0: &[f64], dc0: &[f64], g: &mut LstmParams| {
            let mut dh_next = dh0.to_vec();
            let mut dc_next = dc0.to_vec();
            let mut dxs = vec![Vec::new(); steps.len()];
            for t in (0..steps.len()).rev() {
                let dh: Vec<f64> = d[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let (dx, dhp, dcp) = lstm_step_backward(p, &steps[t], &dh, &dc_next, bsz, g);
                dxs[t] = dx;
                dh_next = dhp;
                dc_next = dcp;
            }
            dxs
        };
        let dx_f = run_back(pf, &lc.fwd, &d_fwd, &fin.h_fwd, &fin.c_fwd, &mut grad.enc_fwd[l]);
        let dx_b_rev = run_back(pb, &lc.bwd, &d_bwd_rev, &fin.h_bwd, &fin.c_bwd, &mut grad.enc_bwd[l]);
        let in_width = pf.w_x.rows;
        let dx_b = reverse_per_row(&dx_b_rev, &lens, in_width);
        let mut dx: Vec<Vec<f64>> = dx_f
            .into_iter()
            .zip(dx_b)
            .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + y).collect())
            .collect();

        if l > 0 {
            if let Some(masks) = &lc.input_mask {
                for (row, m) in dx.iter_mut().zip(masks) {
                    row.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                }
            }
            d_out = dx;
        } else {
            let e = params.embedding_dim();
            for (t, row) in dx.iter().enumerate() {
                for (b, ids) in cache.src.iter().enumerate() {
                    if t < ids.len() {
                        let g = grad.src_embed.row_mut(ids[t]);
                        g.iter_mut().zip(&row[b * e..(b + 1) * e]).for_each(|(a, v)| *a += v);
                    }
                }
            }
        }
    }
}

/// Recurrent state of the decoder stack plus the input-feeding vector.
#[derive(Debug, Clone)]
pub(crate) struct DecoderState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub feed: Vec<f64>,
    pub bsz: usize,
}

impl DecoderState {
    /// Gathers rows `idx` into a new state.
    pub fn select(&self, idx: &[usize], hd: usize) -> DecoderState {
        let gather = |v: &Vec<f64>| -> Vec<f64> {
            idx.iter().flat_map(|&i| v[i * hd..(i + 1) * hd].iter().copied()).collect()
        };
        DecoderState {
            h: self.h.iter().map(gather).collect(),
            c: self.c.iter().map(gather).collect(),
            feed: gather(&self.feed),
            bsz: idx.len(),
        }
    }
}

pub(crate) struct BridgeCache {
    s_h: Vec<Vec<f64>>,
    s_c: Vec<Vec<f64>>,
}

fn bridge_source(l: usize, n_enc: usize) -> usize {
    l.min(n_enc - 1)
}

pub(crate) fn bridge_forward(params: &Params, enc: &EncoderOutput) -> (DecoderState, BridgeCache) {
    let bsz = enc.bsz();
    let hd = params.hidden();
    let mut cache = BridgeCache { s_h: Vec::new(), s_c: Vec::new() };
    let mut state = DecoderState { h: Vec::new(), c: Vec::new(), feed: vec![0.0; bsz * hd], bsz };
    for (l, bp) in params.bridge.iter().enumerate() {
        let f = &enc.finals[bridge_source(l, enc.finals.len())];
        let s_h = concat_cols(&f.h_fwd, hd, &f.h_bwd, hd, bsz);
        let s_c = concat_cols(&f.c_fwd, hd, &f.c_bwd, hd, bsz);
        let mut h0 = matmul(&s_h, bsz, &bp.w_h);
        add_bias(&mut h0, bsz, &bp.b_h);
        let mut c0 = matmul(&s_c, bsz, &bp.w_c);
        add_bias(&mut c0, bsz, &bp.b_c);
        state.h.push(h0);
        state.c.push(c0);
        cache.s_h.push(s_h);
        cache.s_c.push(s_c);
    }
    (state, cache)
}

fn bridge_backward(
    params: &Params,
    cache: &BridgeCache,
    dh0: &[Vec<f64>],
    dc0: &[Vec<f64>],
    bsz: usize,
    grad: &mut Params,
) -> Vec<LayerFinals> {
    let hd = params.hidden();
    let n_enc = params.enc_fwd.len();
    let mut finals: Vec<LayerFinals> = (0..n_enc)
        .map(|_| LayerFinals {
            h_fwd: vec![0.0; bsz * hd],
            c_fwd: vec![0.0; bsz * hd],
            h_bwd: vec![0.0; bsz * hd],
            c_bwd: vec![0.0; bsz * hd],
        })
        .collect();
    for (l, bp) in params.bridge.iter().enumerate() {
        let g = &mut grad.bridge[l];
        outer_acc(&cache.s_h[l], &dh0[l], bsz, &mut g.w_h);
        colsum_acc(&dh0[l], bsz, &mut g.b_h);
        outer_acc(&cache.s_c[l], &dc0[l], bsz, &mut g.w_c);
        colsum_acc(&dc0[l], bsz, &mut g.b_c);
        let (dhf, dhb) = split_cols(&matmul_t(&dh0[l], bsz, &bp.w_h), hd, hd, bsz);
        let (dcf, dcb) = split_cols(&matmul_t(&dc0[l], bsz, &bp.w_c), hd, hd, bsz);
        let f = &mut finals[bridge_source(l, n_enc)];
        for (dst, src) in [(&mut f.h_fwd, dhf), (&mut f.h_bwd, dhb), (&mut f.c_fwd, dcf), (&mut f.c_bwd, dcb)] {
            dst.iter_mut().zip(src).for_each(|(a, v)| *a += v);
        }
    }
    finals
}

/// Attention of a batch of decoder states over the encoder states.
pub(crate) struct AttentionOut {
    /// `h_t W_a`, `B x 2h`.
    q: Vec<f64>,
    /// `B x T`, zero beyond each row's length.
    pub weights: Vec<f64>,
    /// `[context, h_t]`, `B x 3h`.
    cat: Vec<f64>,
    /// `tanh([context, h_t] W_c)`, `B x h`.
    pub attn_h: Vec<f64>,
}

pub(crate) fn attention_forward(params: &Params, h_top: &[f64], enc: &EncoderOutput) -> AttentionOut {
    let bsz = enc.bsz();
    let hd = params.hidden();
    let w = enc.width;
    let t_max = enc.max_len;
    let q = matmul(h_top, bsz, &params.attn_w);
    let mut weights = vec![0.0; bsz * t_max];
    let mut ctx = vec![0.0; bsz * w];
    for b in 0..bsz {
        let len = enc.lens[b];
        let qb = &q[b * w..(b + 1) * w];
        let a = &mut weights[b * t_max..b * t_max + len];
        for (j, s) in a.iter_mut().enumerate() {
            *s = dot(qb, enc.state(b, j));
        }
        softmax_in_place(a);
        let cb = &mut ctx[b * w..(b + 1) * w];
        for (j, &aj) in a.iter().enumerate() {
            cb.iter_mut().zip(enc.state(b, j)).for_each(|(c, hv)| *c += aj * hv);
        }
    }
    let cat = concat_cols(&ctx, w, h_top, hd, bsz);
    let mut attn_h = matmul(&cat, bsz, &params.combine_w);
    attn_h.iter_mut().for_each(|v| *v = v.tanh());
    AttentionOut { q, weights, cat, attn_h }
}

/// Returns `d h_top`; accumulates into `d_enc` (example-major) and `grad`.
fn attention_backward(
    params: &Params,
    a: &AttentionOut,
    d_attn_h: &[f64],
    h_top: &[f64],
    enc: &EncoderOutput,
    d_enc: &mut [f64],
    grad: &mut Params,
) -> Vec<f64> {
    let bsz = enc.bsz();
    let hd = params.hidden();
    let w = enc.width;
    let t_max = enc.max_len;
    let dz: Vec<f64> = d_attn_h
        .iter()
        .zip(&a.attn_h)
        .map(|(d, y)| d * (1.0 - y * y))
        .collect();
    outer_acc(&a.cat, &dz, bsz, &mut grad.combine_w);
    let dcat = matmul_t(&dz, bsz, &params.combine_w);
    let (dctx, mut dh) = split_cols(&dcat, w, hd, bsz);

    let mut dq = vec![0.0; bsz * w];
    for b in 0..bsz {
        let len = enc.lens[b];
        let wts = &a.weights[b * t_max..b * t_max + len];
        let dcb = &dctx[b * w..(b + 1) * w];
        let qb = &a.q[b * w..(b + 1) * w];
        let da: Vec<f64> = (0..len).map(|j| dot(dcb, enc.state(b, j))).collect();
        let mean: f64 = wts.iter().zip(&da).map(|(x, y)| x * y).sum();
        let dqb = &mut dq[b * w..(b + 1) * w];
        for j in 0..len {
            let ds = wts[j] * (da[j] - mean);
            let hj = enc.state(b, j);
            dqb.iter_mut().zip(hj).for_each(|(d, hv)| *d += ds * hv);
            let off = (b * t_max + j) * w;
            let dhj = &mut d_enc[off..off + w];
            for k in 0..w {
                dhj[k] += wts[j] * dcb[k] + ds * qb[k];
            }
        }
    }
    outer_acc(h_top, &dq, bsz, &mut grad.attn_w);
    let dh_q = matmul_t(&dq, bsz, &params.attn_w);
    dh.iter_mut().zip(dh_q).for_each(|(a, v)| *a += v);
    dh
}

pub(crate) struct DecoderStepCache {
    input_ids: Vec<usize>,
    layers: Vec<LstmStep>,
    /// Dropout masks on the inputs of layers above the first.
    inter_masks: Vec<Option<Vec<f64>>>,
    attn: AttentionOut,
    out_mask: Option<Vec<f64>>,
    /// Attentional state after dropout; feeds the output layer and the next step.
    pub feed: Vec<f64>,
    /// `B x V`
    pub logits: Vec<f64>,
}

#[cfg(test)]
impl DecoderStepCache {
    pub fn attention_weights(&self) -> &[f64] {
        &self.attn.weights
    }
}

pub(crate) fn decoder_step(
    params: &Params,
    enc: &EncoderOutput,
    state: &DecoderState,
    input_ids: &[usize],
    dropout: &mut Option<Dropout<'_>>,
) -> (DecoderState, DecoderStepCache) {
    let bsz = state.bsz;
    let hd = params.hidden();
    let e = params.embedding_dim();
    let mut emb = vec![0.0; bsz * e];
    for (b, &id) in input_ids.iter().enumerate() {
        emb[b * e..(b + 1) * e].copy_from_slice(params.tgt_embed.row(id));
    }
    let mut x = concat_cols(&emb, e, &state.feed, hd, bsz);
    let mut layers = Vec::with_capacity(params.dec.len());
    let mut inter_masks = Vec::with_capacity(params.dec.len());
    let mut new_state = DecoderState { h: Vec::new(), c: Vec::new(), feed: Vec::new(), bsz };
    for (l, p) in params.dec.iter().enumerate() {
        if l > 0 {
            let m = maybe_mask(dropout, x.len());
            apply_mask(&mut x, &m);
            inter_masks.push(m);
        } else {
            inter_masks.push(None);
        }
        let s = lstm_step(p, x, &state.h[l], &state.c[l], bsz, None);
        x = s.h.clone();
        new_state.h.push(s.h.clone());
        new_state.c.push(s.c.clone());
        layers.push(s);
    }
    let h_top = layers.last().expect("at least one decoder layer").h.clone();
    let attn = attention_forward(params, &h_top, enc);
    let mut feed = attn.attn_h.clone();
    let out_mask = maybe_mask(dropout, feed.len());
    apply_mask(&mut feed, &out_mask);
    let mut logits = matmul(&feed, bsz, &params.out_w);
    add_bias(&mut logits, bsz, &params.out_b);
    new_state.feed.clone_from(&feed);
    (
        new_state,
        DecoderStepCache { input_ids: input_ids.to_vec(), layers, inter_masks, attn, out_mask, feed, logits },
    )
}

/// A teacher-forcing batch: symbol ids without BOS/EOS.
#[derive(Debug, Clone)]
pub(crate) struct Batch {
    pub src: Vec<Vec<usize>>,
    pub tgt: Vec<Vec<usize>>,
}

impl Batch {
    /// Gold symbols including the final EOS.
    pub fn num_symbols(&self) -> usize {
        self.tgt.iter().map(|t| t.len() + 1).sum()
    }
}

/// Summed cross-entropy (nats) over every gold symbol in the batch. When
/// `grad` is given, gradients of `loss_sum * grad_scale` are accumulated.
pub(crate) fn batch_loss(
    params: &Params,
    batch: &Batch,
    mut dropout: Option<Dropout<'_>>,
    grad: Option<(&mut Params, f64)>,
) -> f64 {
    let bsz = batch.src.len();
    let hd = params.hidden();
    let vsz = params.vocab_size();
    let mut enc_drop = dropout.as_mut().map(|d| Dropout { p: d.p, rng: &mut *d.rng });
    let (enc, enc_cache) = encoder_forward(params, &batch.src, enc_drop.take());
    let (mut state, bridge_cache) = bridge_forward(params, &enc);

    let steps = batch.tgt.iter().map(|t| t.len() + 1).max().unwrap_or(0);
    let mut caches = Vec::with_capacity(steps);
    let mut loss = 0.0;
    let mut dlogits_all: Vec<Vec<f64>> = Vec::with_capacity(steps);
    for t in 0..steps {
        let input: Vec<usize> = batch
            .tgt
            .iter()
            .map(|y| if t == 0 { BOS } else { y.get(t - 1).copied().unwrap_or(PAD) })
            .collect();
        let (next, cache) = decoder_step(params, &enc, &state, &input, &mut dropout);
        let mut probs = cache.logits.clone();
        let mut dlogits = vec![0.0; bsz * vsz];
        for (b, y) in batch.tgt.iter().enumerate() {
            if t > y.len() {
                continue;
            }
            let gold = if t == y.len() { EOS } else { y[t] };
            let row = &mut probs[b * vsz..(b + 1) * vsz];
            softmax_in_place(row);
            loss -= row[gold].ln();
            if let Some((_, scale)) = &grad {
                let d = &mut dlogits[b * vsz..(b + 1) * vsz];
                for (k, p) in row.iter().enumerate() {
                    d[k] = scale * (p - if k == gold { 1.0 } else { 0.0 });
                }
            }
        }
        dlogits_all.push(dlogits);
        caches.push(cache);
        state = next;
    }

    let Some((grad, _)) = grad else {
        return loss;
    };

    let n_dec = params.dec.len();
    let mut d_enc = vec![0.0; enc.states.len()];
    let mut dh_next: Vec<Vec<f64>> = vec![vec![0.0; bsz * hd]; n_dec];
    let mut dc_next: Vec<Vec<f64>> = vec![vec![0.0; bsz * hd]; n_dec];
    let mut d_feed_next = vec![0.0; bsz * hd];
    let e = params.embedding_dim();
    for t in (0..steps).rev() {
        let c = &caches[t];
        let dlogits = &dlogits_all[t];
        outer_acc(&c.feed, dlogits, bsz, &mut grad.out_w);
        colsum_acc(dlogits, bsz, &mut grad.out_b);
        let mut d_feed = matmul_t(dlogits, bsz, &params.out_w);
        d_feed.iter_mut().zip(&d_feed_next).for_each(|(a, v)| *a += v);
        apply_mask(&mut d_feed, &c.out_mask);
        let h_top = &c.layers[n_dec - 1].h;
        let mut d_above = attention_backward(params, &c.attn, &d_feed, h_top, &enc, &mut d_enc, grad);
        for l in (0..n_dec).rev() {
            let dh: Vec<f64> = d_above.iter().zip(&dh_next[l]).map(|(a, b)| a + b).collect();
            let (mut dx, dhp, dcp) =
                lstm_step_backward(&params.dec[l], &c.layers[l], &dh, &dc_next[l], bsz, &mut grad.dec[l]);
            dh_next[l] = dhp;
            dc_next[l] = dcp;
            if l > 0 {
                apply_mask(&mut dx, &c.inter_masks[l]);
                d_above = dx;
            } else {
                let (demb, dfeed) = split_cols(&dx, e, hd, bsz);
                for (b, &id) in c.input_ids.iter().enumerate() {
                    let g = grad.tgt_embed.row_mut(id);
                    g.iter_mut().zip(&demb[b * e..(b + 1) * e]).for_each(|(a, v)| *a += v);
                }
                d_feed_next = dfeed;
            }
        }
    }
    let d_finals = bridge_backward(params, &bridge_cache, &dh_next, &dc_next, bsz, grad);
    encoder_backward(params, &enc_cache, &d_enc, &d_finals, grad);
    loss
}

/// Per-position top-layer encoder states of one sequence, each `2h` wide.
pub(crate) fn encode_single(params: &Params, ids: &[usize]) -> Vec<Vec<f64>> {
    let (enc, _) = encoder_forward(params, &[ids.to_vec()], None);
    (0..ids.len()).map(|t| enc.state(0, t).to_vec()).collect()
}
