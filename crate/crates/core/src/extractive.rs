//! Hierarchical sentence labeller: a word-level Bi-LSTM with mean pooling
//! encodes each sentence, a sentence-level Bi-LSTM contextualizes them, and an
//! LSTM decoder emits one True/False distribution per sentence while reading
//! the previous label through a label embedding.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Record, Sentence, UNK};
use crate::error::{Error, Result};
use crate::labeling::LabelSequence;
use crate::numerics::{
    adam_step, clip_global_norm, init_uniform, run_bilstm, AdamConfig, AdamState, Checkpoint,
    Graph, Lstm, LstmVars, ParamId, ParamStore, Rng, Tensor, Var,
};
use crate::rouge::rouge_mean;

pub const MODEL_NAME: &str = "extractive";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractiveConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub word_dropout: f64,
}

impl ExtractiveConfig {
    pub fn new(vocab_size: usize, hidden: usize) -> Self {
        ExtractiveConfig {
            vocab_size,
            emb_dim: hidden,
            hidden,
            dropout: 0.3,
            word_dropout: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtractiveModel {
    pub config: ExtractiveConfig,
    pub params: ParamStore,
    /// Set once the weights come from supervised training or a checkpoint.
    pub pretrained: bool,
    embed: ParamId,
    sent_fwd: Lstm,
    sent_bwd: Lstm,
    proj_w: ParamId,
    proj_b: ParamId,
    doc_fwd: Lstm,
    doc_bwd: Lstm,
    decoder: Lstm,
    label_emb: ParamId,
    out: ParamId,
}

/// Parameter handles bound into one graph.
pub struct Bound {
    sent_fwd: LstmVars,
    sent_bwd: LstmVars,
    proj_w: Var,
    proj_b: Var,
    doc_fwd: LstmVars,
    doc_bwd: LstmVars,
    decoder: LstmVars,
    label_emb: Var,
    out: Var,
}

/// Mean-pooled sentence vectors `v_i` (width 2d) and contextual vectors `h^E_i` (width 2d).
pub struct EncodedDocument {
    pub sentence_vectors: Vec<Var>,
    pub context: Vec<Var>,
}

/// Where the decoder's previous-label input comes from.
#[derive(Clone, Copy, Debug)]
pub enum Feed<'a> {
    Teacher(&'a LabelSequence),
    Greedy,
    Sample,
}

#[derive(Clone, Copy, Debug)]
pub struct DecodeStep {
    /// Decoder hidden state `h^D_i` before output dropout.
    pub hidden: Var,
    pub logits: Var,
    pub log_probs: Var,
    /// Label fed forward from this step (teacher, argmax or sampled value).
    pub label: usize,
}

impl DecodeStep {
    pub fn p_true(&self, g: &Graph) -> f64 {
        g.value(self.log_probs).data()[1].exp()
    }
}

impl ExtractiveModel {
    pub fn new(config: ExtractiveConfig, rng: &mut Rng) -> Result<Self> {
        let (v, e, d) = (config.vocab_size, config.emb_dim, config.hidden);
        if v == 0 || e == 0 || d == 0 {
            return Err(Error::Config("extractive sizes must be positive".into()));
        }
        let mut s = ParamStore::new();
        let embed = s.add("extractive.embed", init_uniform(&[v, e], e, rng))?;
        let sent_fwd = Lstm::new(&mut s, "extractive.sent_fwd", e, d, rng)?;
        let sent_bwd = Lstm::new(&mut s, "extractive.sent_bwd", e, d, rng)?;
        let proj_w = s.add("extractive.proj_w", init_uniform(&[d, 2 * d], 2 * d, rng))?;
        let proj_b = s.add("extractive.proj_b", Tensor::zeros(&[d]))?;
        let doc_fwd = Lstm::new(&mut s, "extractive.doc_fwd", d, d, rng)?;
        let doc_bwd = Lstm::new(&mut s, "extractive.doc_bwd", d, d, rng)?;
        let decoder = Lstm::new(&mut s, "extractive.decoder", 3 * d, d, rng)?;
        let label_emb = s.add("extractive.label_emb", init_uniform(&[d, 2], 2, rng))?;
        let out = s.add("extractive.out", init_uniform(&[2, d], d, rng))?;
        Ok(ExtractiveModel {
            config,
            params: s,
            pretrained: false,
            embed,
            sent_fwd,
            sent_bwd,
            proj_w,
            proj_b,
            doc_fwd,
            doc_bwd,
            decoder,
            label_emb,
            out,
        })
    }

    /// Rebuilds a model around parameters loaded from a checkpoint. The
    /// parameter layout must match what [`ExtractiveModel::new`] creates.
    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let config: ExtractiveConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Error::Checkpoint(format!("extractive config: {e}")))?;
        let mut template = ExtractiveModel::new(config, &mut crate::numerics::seeded_rng(0))?;
        template.params.copy_values_from(&ckpt.params).map_err(|e| {
            Error::Checkpoint(format!("checkpoint does not fit the extractive layout: {e}"))
        })?;
        template.pretrained = true;
        Ok(template)
    }

    pub fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    pub fn embed_id(&self) -> ParamId {
        self.embed
    }

    pub fn out_id(&self) -> ParamId {
        self.out
    }

    pub fn label_emb_id(&self) -> ParamId {
        self.label_emb
    }

    pub fn decoder_cell(&self) -> Lstm {
        self.decoder
    }

    pub fn sentence_cells(&self) -> (Lstm, Lstm) {
        (self.sent_fwd, self.sent_bwd)
    }

    /// Overwrites embedding rows with externally supplied vectors (for example
    /// pretrained word vectors). Returns how many rows were set.
    pub fn set_word_vectors<'a>(
        &mut self,
        vocab: &crate::corpus::Vocabulary,
        vectors: impl IntoIterator<Item = (&'a str, &'a [f64])>,
    ) -> Result<usize> {
        let dim = self.config.emb_dim;
        let mut set = 0;
        for (tok, vec) in vectors {
            if vec.len() != dim {
                return Err(Error::shape("set_word_vectors", &[dim], &[vec.len()]));
            }
            if !vocab.contains(tok) {
                continue;
            }
            let row = vocab.id(tok);
            let table = self.params.value_mut(self.embed);
            table.data_mut()[row * dim..(row + 1) * dim].copy_from_slice(vec);
            set += 1;
        }
        Ok(set)
    }

    pub fn bind(&self, g: &mut Graph) -> Bound {
        let s = &self.params;
        Bound {
            sent_fwd: self.sent_fwd.bind(g, s),
            sent_bwd: self.sent_bwd.bind(g, s),
            proj_w: g.param(s, self.proj_w),
            proj_b: g.param(s, self.proj_b),
            doc_fwd: self.doc_fwd.bind(g, s),
            doc_bwd: self.doc_bwd.bind(g, s),
            decoder: self.decoder.bind(g, s),
            label_emb: g.param(s, self.label_emb),
            out: g.param(s, self.out),
        }
    }

    /// `v_i`: the mean of the word-level Bi-LSTM states of one sentence.
    pub fn encode_sentence(
        &self,
        g: &mut Graph,
        b: &Bound,
        sentence: &Sentence,
        rng: &mut Rng,
    ) -> Result<Var> {
        let ids = sentence.ids_or_err()?;
        if ids.is_empty() {
            return Err(Error::Data("cannot encode an empty sentence".into()));
        }
        let mut inputs = Vec::with_capacity(ids.len());
        for &id in ids {
            let id = if g.training() && rng.gen::<f64>() < self.config.word_dropout {
                UNK
            } else {
                id
            };
            if id >= self.config.vocab_size {
                return Err(Error::Data(format!(
                    "token id {id} outside vocabulary of {}",
                    self.config.vocab_size
                )));
            }
            inputs.push(g.embedding_lookup(&self.params, self.embed, id)?);
        }
        let states = run_bilstm(g, &b.sent_fwd, &b.sent_bwd, &inputs)?;
        let states: Vec<Var> = states
            .into_iter()
            .map(|h| g.dropout(h, self.config.dropout, rng))
            .collect();
        let stacked = g.stack(&states)?;
        g.mean_over_axis(stacked, 0)
    }

    /// Projects each `v_i` to width d and runs the sentence-level Bi-LSTM.
    pub fn encode_document(
        &self,
        g: &mut Graph,
        b: &Bound,
        doc: &Document,
        rng: &mut Rng,
    ) -> Result<EncodedDocument> {
        if doc.sentences.is_empty() {
            return Err(Error::Data(format!("document {:?} has no sentences", doc.id)));
        }
        let mut sentence_vectors = Vec::with_capacity(doc.len());
        let mut projected = Vec::with_capacity(doc.len());
        for s in &doc.sentences {
            let v = self.encode_sentence(g, b, s, rng)?;
            let p = g.matvec(b.proj_w, v)?;
            let p = g.add(p, b.proj_b)?;
            sentence_vectors.push(v);
            projected.push(p);
        }
        let context = run_bilstm(g, &b.doc_fwd, &b.doc_bwd, &projected)?;
        let context = context
            .into_iter()
            .map(|h| g.dropout(h, self.config.dropout, rng))
            .collect();
        Ok(EncodedDocument {
            sentence_vectors,
            context,
        })
    }

    /// Runs the label decoder over an encoded document. The start label is 0.
    pub fn decode_labels(
        &self,
        g: &mut Graph,
        b: &Bound,
        enc: &EncodedDocument,
        feed: Feed<'_>,
        rng: &mut Rng,
    ) -> Result<Vec<DecodeStep>> {
        let n = enc.context.len();
        if let Feed::Teacher(labels) = feed {
            if labels.len() != n {
                return Err(Error::Data(format!(
                    "teacher labels have length {} but the document has {n} sentences",
                    labels.len()
                )));
            }
        }
        let one_hot = [
            g.constant(Tensor::vector(vec![1.0, 0.0])),
            g.constant(Tensor::vector(vec![0.0, 1.0])),
        ];
        let (mut h, mut c) = self.decoder.zero_state(g);
        let mut prev = 0usize;
        let mut steps = Vec::with_capacity(n);
        for (i, &ctx) in enc.context.iter().enumerate() {
            let label_vec = g.matvec(b.label_emb, one_hot[prev])?;
            let x = g.concat(&[label_vec, ctx])?;
            (h, c) = crate::numerics::lstm_step(g, &b.decoder, x, h, c)?;
            let h_out = g.dropout(h, self.config.dropout, rng);
            let logits = g.matvec(b.out, h_out)?;
            let log_probs = g.log_softmax(logits)?;
            let label = match feed {
                Feed::Teacher(labels) => labels.get(i),
                Feed::Greedy => {
                    let lp = g.value(log_probs).data();
                    usize::from(lp[1] > lp[0])
                }
                Feed::Sample => {
                    let p_true = g.value(log_probs).data()[1].exp();
                    usize::from(rng.gen::<f64>() < p_true)
                }
            };
            steps.push(DecodeStep {
                hidden: h,
                logits,
                log_probs,
                label,
            });
            prev = label;
        }
        Ok(steps)
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        doc: &Document,
        feed: Feed<'_>,
        rng: &mut Rng,
    ) -> Result<(EncodedDocument, Vec<DecodeStep>)> {
        let b = self.bind(g);
        let enc = self.encode_document(g, &b, doc, rng)?;
        let steps = self.decode_labels(g, &b, &enc, feed, rng)?;
        Ok((enc, steps))
    }

    /// Teacher-forced negative log-likelihood of `labels`.
    pub fn nll(
        &self,
        g: &mut Graph,
        doc: &Document,
        labels: &LabelSequence,
        rng: &mut Rng,
    ) -> Result<(Var, Vec<DecodeStep>)> {
        let (_, steps) = self.forward(g, doc, Feed::Teacher(labels), rng)?;
        let picked = steps
            .iter()
            .enumerate()
            .map(|(i, s)| g.pick(s.log_probs, labels.get(i)))
            .collect::<Result<Vec<_>>>()?;
        let all = g.concat(&picked)?;
        let total = g.sum(all);
        Ok((g.scale(total, -1.0), steps))
    }

    /// Greedy-fed inference with dropout off: `p(y_i = True)` for every sentence.
    pub fn sentence_probabilities(&self, doc: &Document) -> Result<Vec<f64>> {
        let mut g = Graph::new(false);
        let mut rng = crate::numerics::seeded_rng(0);
        let (_, steps) = self.forward(&mut g, doc, Feed::Greedy, &mut rng)?;
        Ok(steps.iter().map(|s| s.p_true(&g)).collect())
    }

    /// The `k` most probable sentences, returned in document order together
    /// with every sentence's probability.
    pub fn select_top_k(&self, doc: &Document, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let probs = self.sentence_probabilities(doc)?;
        Ok((rank_top_k(&probs, k), probs))
    }
}

/// Indices of the `min(k, n)` highest scores (ties to the lower index), sorted
/// ascending.
pub fn rank_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k.min(scores.len()));
    order.sort_unstable();
    order
}

pub fn summary_sentences(doc: &Document, picked: &[usize]) -> Vec<Sentence> {
    picked.iter().map(|&i| doc.sentences[i].clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub clip: f64,
    /// Summary length used when scoring the validation set.
    pub top_k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            clip: 5.0,
            top_k: 3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_rouge: Option<f64>,
}

pub struct TrainedExtractive {
    pub model: ExtractiveModel,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

/// Teacher-forced label accuracy with dropout off.
pub fn label_accuracy(model: &ExtractiveModel, records: &[Record], labels: &[LabelSequence]) -> Result<f64> {
    let mut right = 0usize;
    let mut total = 0usize;
    let mut rng = crate::numerics::seeded_rng(0);
    for (r, l) in records.iter().zip(labels) {
        let mut g = Graph::new(false);
        let (_, steps) = model.forward(&mut g, &r.document, Feed::Teacher(l), &mut rng)?;
        for (i, s) in steps.iter().enumerate() {
            let lp = g.value(s.log_probs).data();
            right += usize::from(usize::from(lp[1] > lp[0]) == l.get(i));
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { right as f64 / total as f64 })
}

/// Mean ROUGE (R-1/R-2 F1 average) of top-k extracts against the gold summaries.
pub fn mean_rouge_top_k(model: &ExtractiveModel, records: &[Record], k: usize) -> Result<f64> {
    let mut scores = Vec::with_capacity(records.len());
    for r in records {
        let (picked, _) = model.select_top_k(&r.document, k)?;
        scores.push(rouge_mean(&summary_sentences(&r.document, &picked), &r.summary.sentences));
    }
    Ok(scores.iter().sum::<f64>() / scores.len().max(1) as f64)
}

/// Supervised training on oracle labels with Adam and global-norm clipping.
/// With a validation set, the epoch with the highest validation ROUGE wins;
/// otherwise the last epoch is kept.
pub fn train_extractive(
    mut model: ExtractiveModel,
    train: &[Record],
    labels: &[LabelSequence],
    valid: Option<&[Record]>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedExtractive> {
    if train.is_empty() {
        return Err(Error::Data("cannot train on an empty corpus".into()));
    }
    if labels.len() != train.len() {
        return Err(Error::Data(format!(
            "{} label sequences for {} training documents",
            labels.len(),
            train.len()
        )));
    }
    for (r, l) in train.iter().zip(labels) {
        if l.len() != r.document.len() {
            return Err(Error::Data(format!(
                "labels for {:?} have length {} but the document has {} sentences",
                r.id(),
                l.len(),
                r.document.len()
            )));
        }
    }
    let mut rng = crate::numerics::seeded_rng(cfg.seed);
    let mut adam = AdamState::new(&model.params);
    let mut best: Option<(f64, ParamStore, usize)> = None;
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut loss_sum = 0.0;
        let mut sentences = 0usize;
        for chunk in order.chunks(batch) {
            model.params.zero_grad();
            for &i in chunk {
                let mut g = Graph::new(true);
                let (loss, _) = model.nll(&mut g, &train[i].document, &labels[i], &mut rng)?;
                let scaled = g.scale(loss, 1.0 / chunk.len() as f64);
                g.backward(scaled)?.accumulate_into(&mut model.params);
                loss_sum += g.value(loss).item();
                sentences += train[i].document.len();
            }
            clip_global_norm(&mut [&mut model.params], cfg.clip);
            adam_step(&mut model.params, &mut adam, &cfg.adam)?;
        }
        model.pretrained = true;
        let train_accuracy = label_accuracy(&model, train, labels)?;
        let valid_rouge = match valid {
            Some(v) if !v.is_empty() => Some(mean_rouge_top_k(&model, v, cfg.top_k)?),
            _ => None,
        };
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / sentences.max(1) as f64,
            train_accuracy,
            valid_rouge,
        };
        on_epoch(&m);
        let score = valid_rouge.unwrap_or(f64::INFINITY);
        if valid_rouge.is_none() || best.as_ref().is_none_or(|(s, _, _)| score > *s) {
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
    Ok(TrainedExtractive {
        model,
        metrics,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::numerics::seeded_rng;

    pub(crate) fn tiny_doc(n: usize, vocab: usize, seed: u64) -> Document {
        let mut rng = seeded_rng(seed);
        let sentences = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..5);
                let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(4..vocab)).collect();
                let mut s = Sentence::new(ids.iter().map(|i| format!("w{i}"))).unwrap();
                s = s.with_ids(&vocab_of(vocab));
                s
            })
            .collect();
        Document {
            id: format!("doc{seed}"),
            sentences,
        }
    }

    pub(crate) fn vocab_of(n: usize) -> Vocabulary {
        let tokens: Vec<String> = (4..n).map(|i| format!("w{i}")).collect();
        let json = serde_json::json!({
            "specials": crate::corpus::SPECIAL_TOKENS,
            "tokens": tokens.iter().map(|t| (t.clone(), 1)).collect::<Vec<_>>(),
        });
        Vocabulary::from_json(&json.to_string()).unwrap()
    }

    fn model(vocab: usize, d: usize, seed: u64) -> ExtractiveModel {
        let mut cfg = ExtractiveConfig::new(vocab, d);
        cfg.dropout = 0.0;
        cfg.word_dropout = 0.0;
        ExtractiveModel::new(cfg, &mut seeded_rng(seed)).unwrap()
    }

    #[test]
    fn single_token_sentence_is_its_own_state() {
        let m = model(12, 4, 1);
        let doc = tiny_doc(1, 12, 2);
        let s = Sentence::new(["w5"]).unwrap().with_ids(&vocab_of(12));
        let mut g = Graph::new(false);
        let b = m.bind(&mut g);
        let mut rng = seeded_rng(0);
        let v = m.encode_sentence(&mut g, &b, &s, &mut rng).unwrap();
        let x = g.embedding_lookup(&m.params, m.embed, 5).unwrap();
        let states = run_bilstm(&mut g, &b.sent_fwd, &b.sent_bwd, &[x]).unwrap();
        assert_eq!(g.value(v), g.value(states[0]));
        assert_eq!(g.value(v).shape(), [8]);
        drop(doc);
    }

    #[test]
    fn zero_lstm_weights_give_zero_sentence_vector() {
        let mut m = model(12, 4, 1);
        for p in m.params.iter_mut() {
            if p.name.contains("sent_") {
                p.value.fill(0.0);
            }
        }
        let s = Sentence::new(["w5", "w7", "w9"]).unwrap().with_ids(&vocab_of(12));
        let mut g = Graph::new(false);
        let b = m.bind(&mut g);
        let v = m.encode_sentence(&mut g, &b, &s, &mut seeded_rng(0)).unwrap();
        assert!(g.value(v).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn token_order_matters() {
        let m = model(12, 4, 3);
        let voc = vocab_of(12);
        let a = Sentence::new(["w4", "w5", "w6"]).unwrap().with_ids(&voc);
        let b2 = Sentence::new(["w6", "w4", "w5"]).unwrap().with_ids(&voc);
        let mut g = Graph::new(false);
        let b = m.bind(&mut g);
        let va = m.encode_sentence(&mut g, &b, &a, &mut seeded_rng(0)).unwrap();
        let vb = m.encode_sentence(&mut g, &b, &b2, &mut seeded_rng(0)).unwrap();
        assert_ne!(g.value(va), g.value(vb));
    }

    #[test]
    fn document_shapes() {
        let m = model(12, 8, 4);
        let doc = tiny_doc(4, 12, 5);
        let mut g = Graph::new(false);
        let b = m.bind(&mut g);
        let enc = m.encode_document(&mut g, &b, &doc, &mut seeded_rng(0)).unwrap();
        assert_eq!(enc.context.len(), 4);
        assert!(enc.context.iter().all(|&v| g.value(v).shape() == [16]));
        let single = tiny_doc(1, 12, 6);
        let enc = m.encode_document(&mut g, &b, &single, &mut seeded_rng(0)).unwrap();
        assert_eq!(enc.context.len(), 1);
    }

    #[test]
    fn distributions_normalized_and_uniform_when_out_is_zero() {
        let mut m = model(12, 4, 7);
        let doc = tiny_doc(5, 12, 8);
        let probs = m.sentence_probabilities(&doc).unwrap();
        assert_eq!(probs.len(), 5);
        let mut g = Graph::new(false);
        let (_, steps) = m.forward(&mut g, &doc, Feed::Greedy, &mut seeded_rng(0)).unwrap();
        for s in &steps {
            let sum: f64 = g.value(s.log_probs).data().iter().map(|x| x.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
        let out = m.out;
        m.params.value_mut(out).fill(0.0);
        for p in m.sentence_probabilities(&doc).unwrap() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn previous_label_changes_next_distribution() {
        let m = model(12, 4, 9);
        let doc = tiny_doc(3, 12, 10);
        let p2 = |first: u8| {
            let labels = LabelSequence(vec![first, 0, 0]);
            let mut g = Graph::new(false);
            let (_, steps) = m
                .forward(&mut g, &doc, Feed::Teacher(&labels), &mut seeded_rng(0))
                .unwrap();
            steps[1].p_true(&g)
        };
        assert_ne!(p2(0), p2(1));
    }

    #[test]
    fn teacher_length_mismatch_is_an_error() {
        let m = model(12, 4, 9);
        let doc = tiny_doc(3, 12, 10);
        let mut g = Graph::new(false);
        let labels = LabelSequence(vec![0, 1]);
        assert!(m.forward(&mut g, &doc, Feed::Teacher(&labels), &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn top_k_rules() {
        assert_eq!(rank_top_k(&[0.9, 0.1, 0.8, 0.7], 3), vec![0, 2, 3]);
        assert_eq!(rank_top_k(&[0.2, 0.4], 3), vec![0, 1]);
        assert_eq!(rank_top_k(&[0.5, 0.5, 0.5], 2), vec![0, 1]);
        assert_eq!(rank_top_k(&[0.1, 0.5, 0.5], 1), vec![1]);
    }

    #[test]
    fn inference_is_deterministic() {
        let m = model(12, 4, 11);
        let doc = tiny_doc(6, 12, 12);
        assert_eq!(m.select_top_k(&doc, 3).unwrap(), m.select_top_k(&doc, 3).unwrap());
    }

    #[test]
    fn empty_corpus_refused() {
        let m = model(12, 4, 11);
        assert!(train_extractive(m, &[], &[], None, &TrainConfig::default(), |_| {}).is_err());
    }
}
