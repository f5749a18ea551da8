use super::network::{bridge_forward, decoder_step, encoder_forward, DecoderState};
use super::params::Params;
use super::vocab::{BOS, EOS, PAD, UNK};
use super::NormalizerModel;

/// Log-softmax of one logit row with the non-emittable specials masked.
fn log_probs(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    for id in [BOS, PAD, UNK] {
        if id < out.len() {
            out[id] = f64::NEG_INFINITY;
        }
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + out.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    out.iter_mut().for_each(|v| *v -= lse);
    out
}

/// Argmax rollout: the beam-width-1 reference.
pub fn greedy_decode_ids(params: &Params, source_ids: &[usize], max_len: usize) -> Vec<usize> {
    if source_ids.is_empty() {
        return Vec::new();
    }
    let (enc, _) = encoder_forward(params, &[source_ids.to_vec()], None);
    let (mut state, _) = bridge_forward(params, &enc);
    let mut out = Vec::new();
    let mut prev = BOS;
    for _ in 0..max_len {
        let (next, cache) = decoder_step(params, &enc, &state, &[prev], &mut None);
        let lp = log_probs(&cache.logits);
        let mut best = 0;
        for (k, v) in lp.iter().enumerate() {
            if *v > lp[best] {
                best = k;
            }
        }
        if best == EOS {
            break;
        }
        out.push(best);
        prev = best;
        state = next;
    }
    out
}

struct Hyp {
    tokens: Vec<usize>,
    score: f64,
}

/// Beam search over symbol ids. Each step keeps the `beam_width` best
/// extensions by cumulative log-probability; extensions ending in EOS are
/// moved to the finished list. Search stops once `beam_width` hypotheses
/// have finished, none remain live, or `max_len` symbols have been emitted.
/// The winner maximises log-probability divided by length, where the length
/// counts the EOS when one was emitted.
pub fn beam_decode_ids(params: &Params, source_ids: &[usize], beam_width: usize, max_len: usize) -> Vec<usize> {
    if source_ids.is_empty() || max_len == 0 {
        return Vec::new();
    }
    let width = beam_width.max(1);
    let hd = params.hidden();
    let (enc1, _) = encoder_forward(params, &[source_ids.to_vec()], None);
    let (mut state, _): (DecoderState, _) = bridge_forward(params, &enc1);
    let mut live = vec![Hyp { tokens: Vec::new(), score: 0.0 }];
    let mut finished: Vec<(Vec<usize>, f64, usize)> = Vec::new();
    let mut enc = enc1.clone();

    for _ in 0..max_len {
        if enc.bsz() != live.len() {
            enc = enc1.replicate(live.len());
        }
        let inputs: Vec<usize> = live.iter().map(|h| h.tokens.last().copied().unwrap_or(BOS)).collect();
        let (next, cache) = decoder_step(params, &enc, &state, &inputs, &mut None);
        let vsz = params.vocab_size();
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (b, hyp) in live.iter().enumerate() {
            let lp = log_probs(&cache.logits[b * vsz..(b + 1) * vsz]);
            for (k, v) in lp.into_iter().enumerate() {
                if v.is_finite() {
                    cands.push((hyp.score + v, b, k));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(width);

        let mut new_live = Vec::new();
        let mut parents = Vec::new();
        for (score, b, k) in cands {
            let mut tokens = live[b].tokens.clone();
            if k == EOS {
                let len = tokens.len() + 1;
                finished.push((tokens, score, len));
            } else {
                tokens.push(k);
                new_live.push(Hyp { tokens, score });
                parents.push(b);
            }
        }
        live = new_live;
        if finished.len() >= width || live.is_empty() {
            break;
        }
        state = next.select(&parents, hd);
    }
    for h in live {
        let len = h.tokens.len().max(1);
        finished.push((h.tokens, h.score, len));
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    for (tokens, score, len) in finished {
        let norm = score / len as f64;
        if best.as_ref().is_none_or(|(_, s)| norm > *s) {
            best = Some((tokens, norm));
        }
    }
    best.map(|(t, _)| t).unwrap_or_default()
}

/// Translates one chunk of characters; unknown characters are fed as UNK.
pub fn beam_decode(model: &NormalizerModel, source: &[char], beam_width: usize) -> Vec<char> {
    let ids = model.vocab.encode(source);
    let out = beam_decode_ids(&model.params, &ids, beam_width, model.config.max_decode_len);
    model.vocab.decode(&out)
}
