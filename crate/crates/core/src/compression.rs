//! Attention-based sequence-to-sequence sentence compressor.
//!
//! A Bi-LSTM reads the source sentence; an LSTM decoder with input feeding
//! attends over the source states with additive attention,
//! `score_j = v . tanh(W_enc h_j + W_dec s_t + b)`, and predicts the next
//! target token over the shared vocabulary. Its teacher-forced likelihood
//! scores how well a document sentence explains a summary sentence.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocabulary, BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::extractive::TrainConfig;
use crate::labeling::CompressionPair;
use crate::numerics::{
    adam_step, clip_global_norm, init_uniform, lstm_step, run_bilstm, AdamState, Checkpoint, Graph,
    Lstm, ParamId, ParamStore, Rng, Tensor, Var,
};

pub const MODEL_NAME: &str = "compression";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl CompressionConfig {
    pub fn new(vocab_size: usize, hidden: usize) -> Self {
        CompressionConfig {
            vocab_size,
            emb_dim: hidden,
            hidden,
            dropout: 0.3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompressionModel {
    pub config: CompressionConfig,
    pub params: ParamStore,
    embed: ParamId,
    enc_fwd: Lstm,
    enc_bwd: Lstm,
    init_w: ParamId,
    init_b: ParamId,
    decoder: Lstm,
    att_enc: ParamId,
    att_dec: ParamId,
    att_b: ParamId,
    att_v: ParamId,
    comb_w: ParamId,
    comb_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

/// Per-step outputs of one teacher-forced pass.
pub struct TeacherForced {
    pub log_probs: Vec<Var>,
    pub attention: Vec<Var>,
    /// Gold token predicted at each step (target tokens then EOS).
    pub gold: Vec<usize>,
}

struct Encoded {
    states: Var,
    projected: Var,
    s0: Var,
}

struct Bound {
    enc_fwd: crate::numerics::LstmVars,
    enc_bwd: crate::numerics::LstmVars,
    init_w: Var,
    init_b: Var,
    decoder: crate::numerics::LstmVars,
    att_enc: Var,
    att_dec: Var,
    att_b: Var,
    att_v: Var,
    comb_w: Var,
    comb_b: Var,
    out_w: Var,
    out_b: Var,
}

impl CompressionModel {
    pub fn new(config: CompressionConfig, rng: &mut Rng) -> Result<Self> {
        let (v, e, d) = (config.vocab_size, config.emb_dim, config.hidden);
        if v == 0 || e == 0 || d == 0 {
            return Err(Error::Config("compression sizes must be positive".into()));
        }
        let mut s = ParamStore::new();
        let embed = s.add("compression.embed", init_uniform(&[v, e], e, rng))?;
        let enc_fwd = Lstm::new(&mut s, "compression.enc_fwd", e, d, rng)?;
        let enc_bwd = Lstm::new(&mut s, "compression.enc_bwd", e, d, rng)?;
        let init_w = s.add("compression.init_w", init_uniform(&[d, 2 * d], 2 * d, rng))?;
        let init_b = s.add("compression.init_b", Tensor::zeros(&[d]))?;
        let decoder = Lstm::new(&mut s, "compression.decoder", e + 2 * d, d, rng)?;
        let att_enc = s.add("compression.att_enc", init_uniform(&[2 * d, d], d, rng))?;
        let att_dec = s.add("compression.att_dec", init_uniform(&[d, d], d, rng))?;
        let att_b = s.add("compression.att_b", Tensor::zeros(&[d]))?;
        let att_v = s.add("compression.att_v", init_uniform(&[d], d, rng))?;
        let comb_w = s.add("compression.comb_w", init_uniform(&[d, 3 * d], 3 * d, rng))?;
        let comb_b = s.add("compression.comb_b", Tensor::zeros(&[d]))?;
        let out_w = s.add("compression.out_w", init_uniform(&[v, d], d, rng))?;
        let out_b = s.add("compression.out_b", Tensor::zeros(&[v]))?;
        Ok(CompressionModel {
            config,
            params: s,
            embed,
            enc_fwd,
            enc_bwd,
            init_w,
            init_b,
            decoder,
            att_enc,
            att_dec,
            att_b,
            att_v,
            comb_w,
            comb_b,
            out_w,
            out_b,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let config: CompressionConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Error::Checkpoint(format!("compression config: {e}")))?;
        let mut model = CompressionModel::new(config, &mut crate::numerics::seeded_rng(0))?;
        model.params.copy_values_from(&ckpt.params).map_err(|e| {
            Error::Checkpoint(format!("checkpoint does not fit the compression layout: {e}"))
        })?;
        Ok(model)
    }

    pub fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    /// Output projection weight and bias.
    pub fn output_ids(&self) -> (ParamId, ParamId) {
        (self.out_w, self.out_b)
    }

    fn bind(&self, g: &mut Graph) -> Bound {
        let s = &self.params;
        Bound {
            enc_fwd: self.enc_fwd.bind(g, s),
            enc_bwd: self.enc_bwd.bind(g, s),
            init_w: g.param(s, self.init_w),
            init_b: g.param(s, self.init_b),
            decoder: self.decoder.bind(g, s),
            att_enc: g.param(s, self.att_enc),
            att_dec: g.param(s, self.att_dec),
            att_b: g.param(s, self.att_b),
            att_v: g.param(s, self.att_v),
            comb_w: g.param(s, self.comb_w),
            comb_b: g.param(s, self.comb_b),
            out_w: g.param(s, self.out_w),
            out_b: g.param(s, self.out_b),
        }
    }

    fn lookup(&self, g: &mut Graph, id: usize) -> Result<Var> {
        if id >= self.config.vocab_size {
            return Err(Error::Data(format!(
                "token id {id} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        g.embedding_lookup(&self.params, self.embed, id)
    }

    fn encode(&self, g: &mut Graph, b: &Bound, source: &[usize], rng: &mut Rng) -> Result<Encoded> {
        if source.is_empty() {
            return Err(Error::Data("empty source sentence".into()));
        }
        let inputs = source
            .iter()
            .map(|&id| self.lookup(g, id))
            .collect::<Result<Vec<_>>>()?;
        let states = run_bilstm(g, &b.enc_fwd, &b.enc_bwd, &inputs)?;
        let states: Vec<Var> = states
            .into_iter()
            .map(|h| g.dropout(h, self.config.dropout, rng))
            .collect();
        let states = g.stack(&states)?;
        let projected = g.matmul(states, b.att_enc)?;
        let mean = g.mean_over_axis(states, 0)?;
        let s0 = g.matvec(b.init_w, mean)?;
        let s0 = g.add(s0, b.init_b)?;
        let s0 = g.tanh(s0);
        Ok(Encoded {
            states,
            projected,
            s0,
        })
    }

    /// One decoder step: returns (log-probabilities over the vocabulary,
    /// attention weights, new state, new cell, new context).
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        g: &mut Graph,
        b: &Bound,
        enc: &Encoded,
        prev_token: usize,
        state: (Var, Var, Var),
        rng: &mut Rng,
    ) -> Result<(Var, Var, (Var, Var, Var))> {
        let (h, c, ctx) = state;
        let emb = self.lookup(g, prev_token)?;
        let x = g.concat(&[emb, ctx])?;
        let (h, c) = lstm_step(g, &b.decoder, x, h, c)?;
        let q = g.matvec(b.att_dec, h)?;
        let q = g.add(q, b.att_b)?;
        let e = g.add_row(enc.projected, q)?;
        let e = g.tanh(e);
        let scores = g.matvec(e, b.att_v)?;
        let attention = g.softmax(scores)?;
        let ctx = g.vecmat(attention, enc.states)?;
        let hc = g.concat(&[h, ctx])?;
        let comb = g.matvec(b.comb_w, hc)?;
        let comb = g.add(comb, b.comb_b)?;
        let comb = g.tanh(comb);
        let comb = g.dropout(comb, self.config.dropout, rng);
        let logits = g.matvec(b.out_w, comb)?;
        let logits = g.add(logits, b.out_b)?;
        let log_probs = g.log_softmax(logits)?;
        Ok((log_probs, attention, (h, c, ctx)))
    }

    /// Teacher-forced pass over `target` followed by EOS.
    pub fn teacher_forced(
        &self,
        g: &mut Graph,
        source: &Sentence,
        target: &Sentence,
        rng: &mut Rng,
    ) -> Result<TeacherForced> {
        let src = source.ids_or_err()?;
        let tgt = target.ids_or_err()?;
        if tgt.is_empty() {
            return Err(Error::Data("empty target sentence".into()));
        }
        let b = self.bind(g);
        let enc = self.encode(g, &b, src, rng)?;
        let c0 = g.constant(Tensor::zeros(&[self.config.hidden]));
        let ctx0 = g.constant(Tensor::zeros(&[2 * self.config.hidden]));
        let mut state = (enc.s0, c0, ctx0);
        let gold: Vec<usize> = tgt.iter().copied().chain(std::iter::once(EOS)).collect();
        let mut prev = BOS;
        let mut log_probs = Vec::with_capacity(gold.len());
        let mut attention = Vec::with_capacity(gold.len());
        for &y in &gold {
            let (lp, att, next) = self.step(g, &b, &enc, prev, state, rng)?;
            log_probs.push(lp);
            attention.push(att);
            state = next;
            prev = y;
        }
        Ok(TeacherForced {
            log_probs,
            attention,
            gold,
        })
    }

    /// Summed token log-likelihood as a graph scalar, plus the token count
    /// (target length + 1 for EOS).
    pub fn log_likelihood(
        &self,
        g: &mut Graph,
        source: &Sentence,
        target: &Sentence,
        rng: &mut Rng,
    ) -> Result<(Var, usize)> {
        let tf = self.teacher_forced(g, source, target, rng)?;
        let picked = tf
            .log_probs
            .iter()
            .zip(&tf.gold)
            .map(|(&lp, &y)| g.pick(lp, y))
            .collect::<Result<Vec<_>>>()?;
        let all = g.concat(&picked)?;
        Ok((g.sum(all), tf.gold.len()))
    }

    /// `log p(target | source)` with dropout off, and the number of scored tokens.
    pub fn seq2seq_logprob(&self, source: &Sentence, target: &Sentence) -> Result<(f64, usize)> {
        let mut g = Graph::new(false);
        let mut rng = crate::numerics::seeded_rng(0);
        let (ll, count) = self.log_likelihood(&mut g, source, target, &mut rng)?;
        Ok((g.value(ll).item(), count))
    }

    /// Length-normalized likelihood `exp(log p(target | source) / count)`, in (0, 1].
    pub fn s_score(&self, source: &Sentence, target: &Sentence) -> Result<f64> {
        let (total, count) = self.seq2seq_logprob(source, target)?;
        Ok((total / count as f64).exp())
    }

    /// Raw sequence probability `p(target | source)`, the unnormalized ablation.
    pub fn raw_probability(&self, source: &Sentence, target: &Sentence) -> Result<f64> {
        Ok(self.seq2seq_logprob(source, target)?.0.exp())
    }

    /// Argmax decoding until EOS or `max_len` tokens. PAD and BOS are never
    /// emitted, and EOS is not allowed as the first token so the output is
    /// never empty.
    pub fn decode_greedy(&self, source: &Sentence, max_len: usize, vocab: &Vocabulary) -> Result<Sentence> {
        let ids = self.decode_greedy_ids(source, max_len)?;
        Sentence::new(vocab.decode(&ids)).map(|s| s.with_ids(vocab))
    }

    pub fn decode_greedy_ids(&self, source: &Sentence, max_len: usize) -> Result<Vec<usize>> {
        let src = source.ids_or_err()?;
        let mut g = Graph::new(false);
        let mut rng = crate::numerics::seeded_rng(0);
        let b = self.bind(&mut g);
        let enc = self.encode(&mut g, &b, src, &mut rng)?;
        let c0 = g.constant(Tensor::zeros(&[self.config.hidden]));
        let ctx0 = g.constant(Tensor::zeros(&[2 * self.config.hidden]));
        let mut state = (enc.s0, c0, ctx0);
        let mut prev = BOS;
        let mut out = Vec::new();
        while out.len() < max_len.max(1) {
            let (lp, _, next) = self.step(&mut g, &b, &enc, prev, state, &mut rng)?;
            state = next;
            let lp = g.value(lp).data();
            let mut best: Option<usize> = None;
            for (tok, &v) in lp.iter().enumerate() {
                if tok == PAD || tok == BOS || (tok == EOS && out.is_empty()) {
                    continue;
                }
                if best.is_none_or(|b| v > lp[b]) {
                    best = Some(tok);
                }
            }
            let tok = best.ok_or_else(|| Error::Data("vocabulary has no emittable token".into()))?;
            if tok == EOS {
                break;
            }
            out.push(tok);
            prev = tok;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionEpoch {
    pub epoch: usize,
    pub train_perplexity: f64,
    pub valid_perplexity: Option<f64>,
}

pub struct TrainedCompression {
    pub model: CompressionModel,
    pub metrics: Vec<CompressionEpoch>,
    pub best_epoch: usize,
}

/// Per-token perplexity `exp(-sum log p / tokens)` with dropout off.
pub fn perplexity(model: &CompressionModel, pairs: &[CompressionPair]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in pairs {
        let (lp, n) = model.seq2seq_logprob(&p.source, &p.target)?;
        total += lp;
        count += n;
    }
    Ok((-total / count.max(1) as f64).exp())
}

/// Teacher-forced cross-entropy training with Adam and gradient clipping.
/// Keeps the epoch with the lowest validation perplexity when a validation
/// set is given, otherwise the last epoch.
pub fn train_compression(
    mut model: CompressionModel,
    pairs: &[CompressionPair],
    valid: Option<&[CompressionPair]>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&CompressionEpoch),
) -> Result<TrainedCompression> {
    if pairs.is_empty() {
        return Err(Error::Data("cannot train the compression model on zero pairs".into()));
    }
    let mut rng = crate::numerics::seeded_rng(cfg.seed);
    let mut adam = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut best: Option<(f64, ParamStore, usize)> = None;
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut nll = 0.0;
        let mut tokens = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            model.params.zero_grad();
            let batch_tokens: usize = chunk.iter().map(|&i| pairs[i].target.len() + 1).sum();
            for &i in chunk {
                let mut g = Graph::new(true);
                let (ll, n) = model.log_likelihood(&mut g, &pairs[i].source, &pairs[i].target, &mut rng)?;
                let loss = g.scale(ll, -1.0 / batch_tokens as f64);
                g.backward(loss)?.accumulate_into(&mut model.params);
                nll -= g.value(ll).item();
                tokens += n;
            }
            clip_global_norm(&mut [&mut model.params], cfg.clip);
            adam_step(&mut model.params, &mut adam, &cfg.adam)?;
        }
        let valid_perplexity = match valid {
            Some(v) if !v.is_empty() => Some(perplexity(&model, v)?),
            _ => None,
        };
        let m = CompressionEpoch {
            epoch,
            train_perplexity: (nll / tokens.max(1) as f64).exp(),
            valid_perplexity,
        };
        on_epoch(&m);
        let score = valid_perplexity.unwrap_or(f64::NEG_INFINITY);
        if valid_perplexity.is_none() || best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, model.params.clone(), epoch));
        }
        metrics.push(m);
    }
    let best_epoch = match best {
        Some((_, params, epoch)) => {
            model.params.copy_values_from(&params)?;
            epoch
        }
        None => 0,
    };
    Ok(TrainedCompression {
        model,
        metrics,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    fn vocab(n: usize) -> Vocabulary {
        let tokens: Vec<(String, usize)> = (4..n).map(|i| (format!("w{i}"), 1)).collect();
        let json = serde_json::json!({"specials": crate::corpus::SPECIAL_TOKENS, "tokens": tokens});
        Vocabulary::from_json(&json.to_string()).unwrap()
    }

    fn sent(v: &Vocabulary, ids: &[usize]) -> Sentence {
        Sentence::new(ids.iter().map(|i| format!("w{i}"))).unwrap().with_ids(v)
    }

    fn model(v: usize, d: usize) -> CompressionModel {
        let mut cfg = CompressionConfig::new(v, d);
        cfg.dropout = 0.0;
        CompressionModel::new(cfg, &mut seeded_rng(4)).unwrap()
    }

    #[test]
    fn logprob_nonpositive_and_counts_eos() {
        let v = vocab(20);
        let m = model(20, 6);
        let (lp, n) = m.seq2seq_logprob(&sent(&v, &[4, 5, 6]), &sent(&v, &[7, 8])).unwrap();
        assert!(lp <= 0.0);
        assert_eq!(n, 3);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let v = vocab(100);
        let mut m = model(100, 6);
        let (w, b) = m.output_ids();
        m.params.value_mut(w).fill(0.0);
        m.params.value_mut(b).fill(0.0);
        let (lp, n) = m.seq2seq_logprob(&sent(&v, &[4, 9]), &sent(&v, &[10, 11, 12])).unwrap();
        assert!((lp / n as f64 + (100f64).ln()).abs() < 1e-12);
        let s = m.s_score(&sent(&v, &[4]), &sent(&v, &[50])).unwrap();
        assert!((s - 0.01).abs() < 1e-12);
        let s_long = m.s_score(&sent(&v, &[4]), &sent(&v, &[50, 51, 52, 53, 54])).unwrap();
        assert!((s - s_long).abs() < 1e-12);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let v = vocab(20);
        let m = model(20, 5);
        let mut g = Graph::new(false);
        let tf = m
            .teacher_forced(&mut g, &sent(&v, &[4, 5, 6, 7]), &sent(&v, &[8, 9]), &mut seeded_rng(0))
            .unwrap();
        assert_eq!(tf.attention.len(), 3);
        for a in tf.attention {
            let s: f64 = g.value(a).data().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn greedy_respects_cap_and_never_emits_pad() {
        let v = vocab(20);
        let m = model(20, 5);
        let one = m.decode_greedy_ids(&sent(&v, &[4, 5]), 1).unwrap();
        assert_eq!(one.len(), 1);
        let many = m.decode_greedy_ids(&sent(&v, &[4, 5]), 8).unwrap();
        assert!(!many.is_empty() && many.len() <= 8);
        assert!(many.iter().all(|&t| t != PAD && t != BOS && t != EOS));
        assert_eq!(many, m.decode_greedy_ids(&sent(&v, &[4, 5]), 8).unwrap());
    }

    #[test]
    fn empty_pairs_refused() {
        assert!(train_compression(model(10, 4), &[], None, &TrainConfig::default(), |_| {}).is_err());
    }
}
