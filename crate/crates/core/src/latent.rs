//! Latent-variable training of the extractive model.
//!
//! Sentence labels are sampled from the extractive decoder, the sampled
//! extraction is scored against the gold summary with the frozen compression
//! model, and the policy is updated with REINFORCE using a per-step linear
//! baseline on the decoder state.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::compression::CompressionModel;
use crate::corpus::{Document, Record, Sentence, SummarySet};
use crate::error::{Error, Result};
use crate::extractive::{DecodeStep, ExtractiveModel, Feed};
use crate::labeling::LabelSequence;
use crate::numerics::{
    clip_global_norm, sgd_step, Graph, ParamId, ParamStore, Rng, Tensor, Var,
};

/// Largest document [`exhaustive_expectation`] will enumerate.
pub const MAX_ENUMERATION_SENTENCES: usize = 12;

/// Scores how well a candidate sentence explains a summary sentence, in (0, 1].
pub trait SentenceScorer {
    fn score(&self, candidate: &Sentence, summary: &Sentence) -> Result<f64>;
}

impl SentenceScorer for CompressionModel {
    fn score(&self, candidate: &Sentence, summary: &Sentence) -> Result<f64> {
        self.s_score(candidate, summary)
    }
}

/// Raw sequence probability instead of the length-normalized score.
pub struct Unnormalized<'a>(pub &'a CompressionModel);

impl SentenceScorer for Unnormalized<'_> {
    fn score(&self, candidate: &Sentence, summary: &Sentence) -> Result<f64> {
        self.0.raw_probability(candidate, summary)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RewardBreakdown {
    /// `s_matrix[k][l]`: score of extracted sentence k against summary sentence l.
    pub s_matrix: Vec<Vec<f64>>,
    pub r_p: f64,
    pub r_r: f64,
    pub r: f64,
    pub alpha: f64,
}

impl RewardBreakdown {
    /// `r_p` averages each extracted sentence's best score, `r_r` averages each
    /// summary sentence's best score, and `r = alpha r_p + (1 - alpha) r_r`.
    /// An empty extraction earns zero.
    pub fn from_scores(s_matrix: Vec<Vec<f64>>, alpha: f64) -> Self {
        let rows = s_matrix.len();
        let cols = s_matrix.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return RewardBreakdown {
                s_matrix,
                r_p: 0.0,
                r_r: 0.0,
                r: 0.0,
                alpha,
            };
        }
        let r_p = s_matrix
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / rows as f64;
        let r_r = (0..cols)
            .map(|l| s_matrix.iter().map(|row| row[l]).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / cols as f64;
        RewardBreakdown {
            s_matrix,
            r_p,
            r_r,
            r: alpha * r_p + (1.0 - alpha) * r_r,
            alpha,
        }
    }
}

/// Scores every extracted sentence against every summary sentence.
pub fn reward(
    scorer: &dyn SentenceScorer,
    extracted: &[Sentence],
    summary: &SummarySet,
    alpha: f64,
) -> Result<RewardBreakdown> {
    if summary.sentences.is_empty() {
        return Err(Error::Data("reward needs a non-empty summary".into()));
    }
    let s = extracted
        .iter()
        .map(|c| {
            summary
                .sentences
                .iter()
                .map(|h| scorer.score(c, h))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RewardBreakdown::from_scores(s, alpha))
}

/// Scores of every document sentence against every summary sentence. With a
/// frozen scorer the reward of any extraction is a lookup into this table.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn compute(scorer: &dyn SentenceScorer, doc: &Document, summary: &SummarySet) -> Result<Self> {
        if summary.sentences.is_empty() {
            return Err(Error::Data(format!("document {:?} has an empty summary", doc.id)));
        }
        let scores = doc
            .sentences
            .iter()
            .map(|c| {
                summary
                    .sentences
                    .iter()
                    .map(|h| scorer.score(c, h))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreTable { scores })
    }

    pub fn reward(&self, selected: &[usize], alpha: f64) -> RewardBreakdown {
        RewardBreakdown::from_scores(selected.iter().map(|&i| self.scores[i].clone()).collect(), alpha)
    }

    pub fn reward_of(&self, z: &LabelSequence, alpha: f64) -> RewardBreakdown {
        self.reward(&z.selected(), alpha)
    }
}

/// Linear regressor `b_i = w . h^D_i + bias` predicting the reward.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub params: ParamStore,
    weight: ParamId,
    bias: ParamId,
}

impl Baseline {
    pub fn new(hidden: usize) -> Result<Self> {
        let mut params = ParamStore::new();
        let weight = params.add("baseline.weight", Tensor::zeros(&[hidden]))?;
        let bias = params.add("baseline.bias", Tensor::scalar(0.0))?;
        Ok(Baseline {
            params,
            weight,
            bias,
        })
    }

    pub fn ids(&self) -> (ParamId, ParamId) {
        (self.weight, self.bias)
    }

    /// Prediction from a decoder state. The state is detached, so the
    /// regression loss never reaches the policy.
    pub fn predict(&self, g: &mut Graph, hidden: Var) -> Result<Var> {
        let h = g.detach(hidden);
        let w = g.param(&self.params, self.weight);
        let b = g.param(&self.params, self.bias);
        let wh = g.dot(w, h)?;
        g.add(wh, b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledExtraction {
    pub z: LabelSequence,
    /// `log p(z_i | z_<i)` of each sampled value.
    pub logprobs: Vec<f64>,
    pub selected: Vec<usize>,
}

fn sampled_from(g: &Graph, steps: &[DecodeStep]) -> SampledExtraction {
    let z = LabelSequence(steps.iter().map(|s| s.label as u8).collect());
    let logprobs = steps
        .iter()
        .map(|s| g.value(s.log_probs).data()[s.label])
        .collect();
    SampledExtraction {
        selected: z.selected(),
        z,
        logprobs,
    }
}

/// Ancestral sample of one label sequence, each sampled label fed back as the
/// decoder's previous-label input. Dropout is off.
pub fn sample_labels(model: &ExtractiveModel, doc: &Document, rng: &mut Rng) -> Result<SampledExtraction> {
    let mut g = Graph::new(false);
    let (_, steps) = model.forward(&mut g, doc, Feed::Sample, rng)?;
    Ok(sampled_from(&g, &steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentConfig {
    pub epochs: usize,
    pub lr: f64,
    pub alpha: f64,
    pub clip: f64,
    /// Samples averaged per update; 1 is plain single-sample REINFORCE.
    pub samples: usize,
    /// Keep dropout active in the policy while sampling for an update.
    pub policy_dropout: bool,
    /// Use the length-normalized compression score (otherwise raw probability).
    pub normalized: bool,
    pub seed: u64,
}

impl Default for LatentConfig {
    fn default() -> Self {
        LatentConfig {
            epochs: 5,
            lr: 0.01,
            alpha: 0.5,
            clip: 5.0,
            samples: 1,
            policy_dropout: true,
            normalized: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub sample: SampledExtraction,
    pub reward: RewardBreakdown,
    pub surrogate: f64,
    pub baseline_mse: f64,
    pub baselines: Vec<f64>,
}

/// One REINFORCE update's gradients for a single document.
///
/// Draws `samples` label sequences (one by default). For each, the policy
/// surrogate is `-sum_i (R - b_i) log p(z_i | z_<i)` with `b_i` treated as a
/// constant, and the baseline is regressed onto `R` by mean squared error.
/// Gradients are averaged over samples and added to `model.params` and, when
/// present, `baseline.params`. No optimizer step is taken.
pub fn reinforce_step(
    model: &mut ExtractiveModel,
    mut baseline: Option<&mut Baseline>,
    doc: &Document,
    table: &ScoreTable,
    cfg: &LatentConfig,
    rng: &mut Rng,
) -> Result<StepOutcome> {
    let samples = cfg.samples.max(1);
    let mut last = None;
    for _ in 0..samples {
        let mut g = Graph::new(cfg.policy_dropout);
        let (_, steps) = model.forward(&mut g, doc, Feed::Sample, rng)?;
        let sample = sampled_from(&g, &steps);
        let reward = table.reward(&sample.selected, cfg.alpha);
        let r = reward.r;

        let mut terms = Vec::with_capacity(steps.len());
        let mut baselines = Vec::with_capacity(steps.len());
        let mut sq_errs = Vec::with_capacity(steps.len());
        for s in &steps {
            let b = match baseline.as_deref() {
                Some(bl) => Some(bl.predict(&mut g, s.hidden)?),
                None => None,
            };
            let b_value = b.map_or(0.0, |b| g.value(b).item());
            baselines.push(b_value);
            let lp = g.pick(s.log_probs, s.label)?;
            terms.push(g.scale(lp, -(r - b_value)));
            if let Some(b) = b {
                let target = g.constant(Tensor::scalar(r));
                let err = g.sub(b, target)?;
                sq_errs.push(g.mul(err, err)?);
            }
        }
        let all = g.concat(&terms)?;
        let surrogate = g.sum(all);
        let (loss, mse) = if sq_errs.is_empty() {
            (surrogate, None)
        } else {
            let errs = g.concat(&sq_errs)?;
            let total = g.sum(errs);
            let mse = g.scale(total, 1.0 / steps.len() as f64);
            (g.add(surrogate, mse)?, Some(mse))
        };
        let loss = g.scale(loss, 1.0 / samples as f64);
        let adj = g.backward(loss)?;
        adj.accumulate_into(&mut model.params);
        if let Some(bl) = baseline.as_deref_mut() {
            adj.accumulate_into(&mut bl.params);
        }
        last = Some(StepOutcome {
            surrogate: g.value(surrogate).item(),
            baseline_mse: mse.map_or(0.0, |m| g.value(m).item()),
            sample,
            reward,
            baselines,
        });
    }
    Ok(last.expect("at least one sample"))
}

#[derive(Clone, Debug)]
pub struct ExactExpectation {
    pub expected_reward: f64,
    /// Gradient of the expected reward, flattened in parameter order.
    pub gradient: Vec<f64>,
    /// Every label sequence with its probability and reward.
    pub outcomes: Vec<(LabelSequence, f64, f64)>,
}

fn all_sequences(n: usize) -> impl Iterator<Item = LabelSequence> {
    (0u32..(1 << n)).map(move |bits| LabelSequence((0..n).map(|i| ((bits >> i) & 1) as u8).collect()))
}

/// Gradient plus every label sequence with its probability.
pub type Enumeration = (Vec<f64>, Vec<(LabelSequence, f64)>);

/// Enumerates all label sequences with dropout off. For each sequence `z`,
/// `weight(z, p(z), graph, steps)` returns per-step weights `w_i`; the
/// returned gradient is `sum_z sum_i w_i grad log p(z_i | z_<i)`.
pub fn enumerate_score_function<F>(
    model: &ExtractiveModel,
    doc: &Document,
    mut weight: F,
) -> Result<Enumeration>
where
    F: FnMut(&LabelSequence, f64, &mut Graph, &[DecodeStep]) -> Result<Vec<f64>>,
{
    let n = doc.len();
    if n > MAX_ENUMERATION_SENTENCES {
        return Err(Error::Data(format!(
            "refusing to enumerate 2^{n} label sequences (limit {MAX_ENUMERATION_SENTENCES} sentences)"
        )));
    }
    let mut params = model.clone();
    params.params.zero_grad();
    let mut rng = crate::numerics::seeded_rng(0);
    let mut probs = Vec::with_capacity(1 << n);
    for z in all_sequences(n) {
        let mut g = Graph::new(false);
        let (_, steps) = params.forward(&mut g, doc, Feed::Teacher(&z), &mut rng)?;
        let logp: f64 = steps
            .iter()
            .map(|s| g.value(s.log_probs).data()[s.label])
            .sum();
        let p = logp.exp();
        let w = weight(&z, p, &mut g, &steps)?;
        let mut terms = Vec::with_capacity(n);
        for (s, wi) in steps.iter().zip(w) {
            let lp = g.pick(s.log_probs, s.label)?;
            terms.push(g.scale(lp, wi));
        }
        let all = g.concat(&terms)?;
        let total = g.sum(all);
        g.backward(total)?.accumulate_into(&mut params.params);
        probs.push((z, p));
    }
    Ok((params.params.flat_grads(), probs))
}

/// Exact `E[R]` and `grad E[R] = sum_z p(z) R(z) grad log p(z)` by enumerating
/// all `2^n` label sequences. Dropout is off. Refuses documents longer than
/// [`MAX_ENUMERATION_SENTENCES`].
pub fn exhaustive_expectation(
    model: &ExtractiveModel,
    doc: &Document,
    table: &ScoreTable,
    alpha: f64,
) -> Result<ExactExpectation> {
    let mut rewards = Vec::new();
    let (gradient, probs) = enumerate_score_function(model, doc, |z, p, _, steps| {
        let r = table.reward_of(z, alpha).r;
        rewards.push(r);
        Ok(vec![p * r; steps.len()])
    })?;
    let outcomes: Vec<(LabelSequence, f64, f64)> = probs
        .into_iter()
        .zip(rewards)
        .map(|((z, p), r)| (z, p, r))
        .collect();
    let expected_reward = outcomes.iter().map(|(_, p, r)| p * r).sum();
    Ok(ExactExpectation {
        expected_reward,
        gradient,
        outcomes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardLogRow {
    pub epoch: usize,
    pub doc_id: String,
    pub r_p: f64,
    pub r_r: f64,
    pub r: f64,
    pub baseline_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentEpoch {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_r_p: f64,
    pub mean_r_r: f64,
    pub mean_baseline_mse: f64,
}

pub struct TrainedLatent {
    pub model: ExtractiveModel,
    pub baseline: Baseline,
    pub epochs: Vec<LatentEpoch>,
    pub log: Vec<RewardLogRow>,
}

/// Precomputes score tables for every record with a frozen scorer.
pub fn score_tables(scorer: &dyn SentenceScorer, records: &[Record]) -> Result<Vec<ScoreTable>> {
    records
        .iter()
        .map(|r| ScoreTable::compute(scorer, &r.document, &r.summary))
        .collect()
}

/// REINFORCE fine-tuning of a pretrained extractive model with SGD, one
/// update per document.
pub fn train_latent(
    mut model: ExtractiveModel,
    records: &[Record],
    scorer: &CompressionModel,
    cfg: &LatentConfig,
    mut on_epoch: impl FnMut(&LatentEpoch),
) -> Result<TrainedLatent> {
    if !model.pretrained {
        return Err(Error::Checkpoint(
            "latent training needs a pretrained extractive model; random initialization is refused"
                .into(),
        ));
    }
    if records.is_empty() {
        return Err(Error::Data("cannot train on an empty corpus".into()));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::Config(format!("alpha {} outside [0, 1]", cfg.alpha)));
    }
    let tables = if cfg.normalized {
        score_tables(scorer, records)?
    } else {
        score_tables(&Unnormalized(scorer), records)?
    };
    let mut baseline = Baseline::new(model.config.hidden)?;
    let mut rng = crate::numerics::seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut log = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut rows = Vec::with_capacity(records.len());
        for &i in &order {
            model.params.zero_grad();
            baseline.params.zero_grad();
            let out = reinforce_step(
                &mut model,
                Some(&mut baseline),
                &records[i].document,
                &tables[i],
                cfg,
                &mut rng,
            )?;
            clip_global_norm(&mut [&mut model.params, &mut baseline.params], cfg.clip);
            sgd_step(&mut model.params, cfg.lr)?;
            sgd_step(&mut baseline.params, cfg.lr)?;
            rows.push(RewardLogRow {
                epoch,
                doc_id: records[i].id().to_string(),
                r_p: out.reward.r_p,
                r_r: out.reward.r_r,
                r: out.reward.r,
                baseline_mse: out.baseline_mse,
            });
        }
        let n = rows.len() as f64;
        let e = LatentEpoch {
            epoch,
            mean_reward: rows.iter().map(|r| r.r).sum::<f64>() / n,
            mean_r_p: rows.iter().map(|r| r.r_p).sum::<f64>() / n,
            mean_r_r: rows.iter().map(|r| r.r_r).sum::<f64>() / n,
            mean_baseline_mse: rows.iter().map(|r| r.baseline_mse).sum::<f64>() / n,
        };
        on_epoch(&e);
        epochs.push(e);
        log.extend(rows);
    }
    Ok(TrainedLatent {
        model,
        baseline,
        epochs,
        log,
    })
}
