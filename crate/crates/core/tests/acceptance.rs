//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line (written
//! straight to stderr so it shows without `--nocapture`) and then asserts.

mod common;

use std::collections::HashMap;
use std::io::Write as _;

use latsum::corpus::{Sentence, SummarySet};
use latsum::extractive::{Feed, ExtractiveConfig, ExtractiveModel};
use latsum::labeling::LabelSequence;
use latsum::latent::{self, Baseline, LatentConfig, RewardBreakdown, ScoreTable, SentenceScorer};
use latsum::numerics::{check_gradients, seeded_rng, Graph, Tensor};
use latsum::rouge::{rouge_l, rouge_n};
use rand::Rng as _;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    let line = format!(
        "acceptance {id} {name}: {} ({detail})\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{}", line.trim_end());
}

// ---------------------------------------------------------------- criterion 1

fn grams(sents: &[Vec<String>], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for s in sents {
        if s.len() >= n {
            for i in 0..=s.len() - n {
                out.push(s[i..i + n].to_vec());
            }
        }
    }
    out
}

/// Multiset intersection by repeatedly removing matched elements.
fn brute_rouge_n(cand: &[Vec<String>], refr: &[Vec<String>], n: usize) -> (f64, f64, f64) {
    let c = grams(cand, n);
    let mut pool = grams(refr, n);
    let ref_total = pool.len();
    let mut hit = 0usize;
    for g in &c {
        if let Some(pos) = pool.iter().position(|x| x == g) {
            pool.swap_remove(pos);
            hit += 1;
        }
    }
    prf(hit, c.len(), ref_total)
}

fn prf(hit: usize, c: usize, r: usize) -> (f64, f64, f64) {
    let p = if c == 0 { 0.0 } else { hit as f64 / c as f64 };
    let rc = if r == 0 { 0.0 } else { hit as f64 / r as f64 };
    let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
    (p, rc, f)
}

/// Longest common subsequence by trying every subsequence of the shorter side.
fn brute_lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let is_subseq = |sub: &[&String]| {
        let mut it = long.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&String> = (0..short.len()).filter(|i| mask >> i & 1 == 1).map(|i| &short[i]).collect();
        if is_subseq(&sub) {
            best = k;
        }
    }
    best
}

fn random_side(rng: &mut latsum::numerics::Rng) -> Vec<Vec<String>> {
    let vocab = rng.gen_range(1..=8);
    let total = rng.gen_range(1..=12);
    let parts = rng.gen_range(1..=total.min(3));
    let mut lens = vec![1; parts];
    for _ in parts..total {
        let k = rng.gen_range(0..parts);
        lens[k] += 1;
    }
    lens.iter()
        .map(|&l| (0..l).map(|_| format!("t{}", rng.gen_range(0..vocab))).collect())
        .collect()
}

#[test]
fn criterion_1_rouge_matches_brute_force() {
    let mut rng = seeded_rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (c, r) = (random_side(&mut rng), random_side(&mut rng));
        let cs: Vec<Sentence> = c.iter().map(|s| Sentence::new(s.clone()).unwrap()).collect();
        let rs: Vec<Sentence> = r.iter().map(|s| Sentence::new(s.clone()).unwrap()).collect();
        for n in [1, 2] {
            let got = rouge_n(&cs, &rs, n);
            let (p, rc, f) = brute_rouge_n(&c, &r, n);
            worst = worst.max((got.precision - p).abs()).max((got.recall - rc).abs()).max((got.f1 - f).abs());
        }
        let cat = |x: &[Vec<String>]| x.concat();
        let (ca, ra) = (cat(&c), cat(&r));
        let got = rouge_l(&cs, &rs);
        let (p, rc, f) = prf(brute_lcs(&ca, &ra), ca.len(), ra.len());
        worst = worst.max((got.precision - p).abs()).max((got.recall - rc).abs()).max((got.f1 - f).abs());
    }
    verdict(1, "rouge oracle equivalence", worst <= 1e-12, &format!("500 cases, max deviation {worst:.1e}"));
}

// ---------------------------------------------------------------- criterion 2

const GRAD_TOL: f64 = 1e-4;
const MIN_COORDS: usize = 200;

#[test]
fn criterion_2_gradient_checks() {
    let v = common::vocab(12);
    let mut rng = seeded_rng(5);
    let doc = common::random_doc(&mut rng, &v, 4, 4);
    let labels = LabelSequence(vec![1, 0, 1, 1]);
    let mut results = Vec::new();

    // Extractive NLL with dropout and word dropout active under a fixed mask seed.
    let mut ext = common::extractive(v.len(), 5, 1);
    let template = ext.clone();
    let report = check_gradients(&mut ext.params, 400, 1e-5, &mut seeded_rng(1), |g, store| {
        let mut m = template.clone();
        m.params = store.clone();
        let (loss, _) = m.nll(g, &doc, &labels, &mut seeded_rng(77))?;
        Ok(loss)
    })
    .unwrap();
    results.push(("extractive nll", report));

    // Compression cross-entropy, dropout active.
    let mut comp = common::compression(v.len(), 4, 2);
    let ctemplate = comp.clone();
    let src = doc.sentences[0].clone();
    let tgt = doc.sentences[1].clone();
    let report = check_gradients(&mut comp.params, 400, 1e-5, &mut seeded_rng(2), |g, store| {
        let mut m = ctemplate.clone();
        m.params = store.clone();
        let (ll, _) = m.log_likelihood(g, &src, &tgt, &mut seeded_rng(78))?;
        Ok(g.scale(ll, -1.0))
    })
    .unwrap();
    results.push(("compression cross-entropy", report));

    // Baseline regression on decoder-sized states; wide enough for 200+ coordinates.
    let width = 255;
    let mut bl = Baseline::new(width).unwrap();
    let (w, b) = bl.ids();
    *bl.params.value_mut(w) = latsum::numerics::init_uniform(&[width], width, &mut rng);
    bl.params.value_mut(b).data_mut()[0] = 0.1;
    let states: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let target = 0.37;
    let bl_template = bl.clone();
    let report = check_gradients(&mut bl.params, 400, 1e-5, &mut seeded_rng(3), |g, store| {
        let mut m = bl_template.clone();
        m.params = store.clone();
        let mut errs = Vec::new();
        for s in &states {
            let h = g.constant(Tensor::vector(s.clone()));
            let p = m.predict(g, h)?;
            let t = g.constant(Tensor::scalar(target));
            let e = g.sub(p, t)?;
            errs.push(g.mul(e, e)?);
        }
        let all = g.concat(&errs)?;
        let total = g.sum(all);
        Ok(g.scale(total, 1.0 / states.len() as f64))
    })
    .unwrap();
    results.push(("baseline mse", report));

    // REINFORCE surrogate for a fixed sampled sequence, reward and baselines.
    let mut pol = common::extractive(v.len(), 5, 3);
    let sample = latent::sample_labels(&pol, &doc, &mut seeded_rng(4)).unwrap();
    let r = 0.61;
    let baselines = [0.2, 0.7, 0.55, 0.4];
    let ptemplate = pol.clone();
    let report = check_gradients(&mut pol.params, 400, 1e-5, &mut seeded_rng(4), |g, store| {
        let mut m = ptemplate.clone();
        m.params = store.clone();
        let (_, steps) = m.forward(g, &doc, Feed::Teacher(&sample.z), &mut seeded_rng(79))?;
        let mut terms = Vec::new();
        for (s, bi) in steps.iter().zip(baselines) {
            let lp = g.pick(s.log_probs, s.label)?;
            terms.push(g.scale(lp, -(r - bi)));
        }
        let all = g.concat(&terms)?;
        Ok(g.sum(all))
    })
    .unwrap();
    results.push(("reinforce surrogate", report));

    let ok = results
        .iter()
        .all(|(_, rep)| rep.coordinates >= MIN_COORDS && rep.passes(GRAD_TOL));
    let detail = results
        .iter()
        .map(|(n, rep)| format!("{n}: {} coords, max rel err {:.1e}", rep.coordinates, rep.max_rel_error))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(2, "gradient checks", ok, &detail);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_reinforce_matches_exact_expectation() {
    let v = common::vocab(20);
    let mut rng = seeded_rng(31);
    let doc = common::random_doc(&mut rng, &v, 6, 5);
    let summary = common::random_summary(&mut rng, &v, 2, 5);
    let scorer = common::compression(v.len(), 4, 32);
    let table = ScoreTable::compute(&scorer, &doc, &summary).unwrap();
    let mut model = common::extractive(v.len(), 4, 33);
    model.pretrained = true;
    let exact = latent::exhaustive_expectation(&model, &doc, &table, 0.5).unwrap();

    let cfg = LatentConfig {
        policy_dropout: false,
        ..LatentConfig::default()
    };
    let n = 50_000;
    let mut sample_rng = seeded_rng(34);
    model.params.zero_grad();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let out = latent::reinforce_step(&mut model, None, &doc, &table, &cfg, &mut sample_rng).unwrap();
        sum += out.reward.r;
        sum_sq += out.reward.r * out.reward.r;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    // The surrogate gradient is -R grad log p, so negate to estimate grad E[R].
    let mc: Vec<f64> = model.params.flat_grads().iter().map(|g| -g / n as f64).collect();
    let dot: f64 = mc.iter().zip(&exact.gradient).map(|(a, b)| a * b).sum();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let cosine = dot / (norm(&mc) * norm(&exact.gradient));
    let z = (mean - exact.expected_reward).abs() / se;
    verdict(
        3,
        "reinforce exactness",
        z <= 3.0 && cosine > 0.99,
        &format!(
            "E[R] exact {:.6} vs MC {:.6} ({z:.2} SE), gradient cosine {cosine:.4}",
            exact.expected_reward, mean
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

/// Looks up scores by the text of the candidate and summary sentences.
struct Lookup(HashMap<(String, String), f64>);

impl SentenceScorer for Lookup {
    fn score(&self, c: &Sentence, h: &Sentence) -> latsum::Result<f64> {
        Ok(self.0[&(c.text(), h.text())])
    }
}

fn oracle_reward(s: &[Vec<f64>], alpha: f64) -> (f64, f64, f64) {
    let k = s.len() as f64;
    let l = s[0].len();
    let mut rp = 0.0;
    for row in s {
        let mut m = row[0];
        for &x in row {
            if x > m {
                m = x;
            }
        }
        rp += m;
    }
    let mut rr = 0.0;
    for j in 0..l {
        let mut m = s[0][j];
        for row in s {
            if row[j] > m {
                m = row[j];
            }
        }
        rr += m;
    }
    let (rp, rr) = (rp / k, rr / l as f64);
    (rp, rr, alpha * rp + (1.0 - alpha) * rr)
}

#[test]
fn criterion_4_reward_algebra() {
    let sent = |w: &str| Sentence::new([w]).unwrap();
    let mut table = HashMap::new();
    for (c, row) in [("c0", [0.2, 0.8]), ("c1", [0.6, 0.4])] {
        for (h, v) in ["h0", "h1"].iter().zip(row) {
            table.insert((c.to_string(), h.to_string()), v);
        }
    }
    let summary = SummarySet {
        sentences: vec![sent("h0"), sent("h1")],
    };
    let hand = latent::reward(&Lookup(table), &[sent("c0"), sent("c1")], &summary, 0.5).unwrap();
    let hand_ok = hand.r_p == 0.7 && hand.r_r == 0.7 && hand.r == 0.7;

    let mut rng = seeded_rng(44);
    let mut bounds_ok = true;
    let mut endpoints_ok = true;
    let mut max_dev = 0.0f64;
    for _ in 0..10_000 {
        let (k, l) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let s: Vec<Vec<f64>> = (0..k).map(|_| (0..l).map(|_| rng.gen::<f64>()).collect()).collect();
        let alpha = rng.gen::<f64>();
        let got = RewardBreakdown::from_scores(s.clone(), alpha);
        let (rp, rr, r) = oracle_reward(&s, alpha);
        max_dev = max_dev.max((got.r_p - rp).abs()).max((got.r_r - rr).abs()).max((got.r - r).abs());
        bounds_ok &= (0.0..=1.0).contains(&got.r);
        let one = RewardBreakdown::from_scores(s.clone(), 1.0);
        let zero = RewardBreakdown::from_scores(s, 0.0);
        endpoints_ok &= one.r == one.r_p && zero.r == zero.r_r;
    }
    verdict(
        4,
        "reward algebra",
        hand_ok && bounds_ok && endpoints_ok && max_dev <= 1e-12,
        &format!(
            "hand example r_p={} r_r={} r={}; 10^4 fuzzed: bounds {bounds_ok}, endpoints {endpoints_ok}, max dev {max_dev:.1e}",
            hand.r_p, hand.r_r, hand.r
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_capacity_overfits() {
    use latsum::compression::{perplexity, train_compression, CompressionConfig, CompressionModel};
    use latsum::corpus::{build_vocab, load_corpus, Split};
    use latsum::extractive::{label_accuracy, train_extractive, TrainConfig};
    use latsum::labeling::{compression_pairs, oracle_labels};
    use latsum::numerics::AdamConfig;

    let corpus = load_corpus(&common::toy_dir().join("train.jsonl"), Split::Train).unwrap();
    let vocab = build_vocab(&corpus.records, 1).unwrap();
    let records: Vec<_> = corpus.records[..32].iter().map(|r| r.encoded(&vocab)).collect();
    let labels: Vec<LabelSequence> = records
        .iter()
        .map(|r| oracle_labels(&r.document, &r.summary, 3))
        .collect();

    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let model = ExtractiveModel::new(ExtractiveConfig::new(vocab.len(), 16), &mut seeded_rng(1)).unwrap();
    let trained = train_extractive(model, &records, &labels, None, &cfg, |_| {}).unwrap();
    let acc = label_accuracy(&trained.model, &records, &labels).unwrap();

    let pairs: Vec<_> = records
        .iter()
        .flat_map(|r| compression_pairs(&r.document, &r.summary))
        .take(16)
        .collect();
    // Memorization check: dropout off, one pair per update.
    let mut cc = CompressionConfig::new(vocab.len(), 32);
    cc.dropout = 0.0;
    let ccfg = TrainConfig {
        epochs: 150,
        batch_size: 1,
        adam: AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let comp = CompressionModel::new(cc, &mut seeded_rng(2)).unwrap();
    let trained = train_compression(comp, &pairs, None, &ccfg, |_| {}).unwrap();
    let ppl = perplexity(&trained.model, &pairs).unwrap();
    verdict(
        5,
        "capacity overfits",
        acc >= 0.99 && ppl < 1.1 && pairs.len() == 16,
        &format!("extractive label accuracy {acc:.4} on 32 docs; compression perplexity {ppl:.4} on {} pairs", pairs.len()),
    );
}

// ---------------------------------------------------------------- criteria 6 and 7

fn test_rouge_mean(run: &common::PipelineRun, ckpt: &str) -> f64 {
    use latsum::corpus::{load_corpus, Split, Vocabulary};
    let vocab = Vocabulary::load(&run.path("vocab.json")).unwrap();
    let test = load_corpus(&common::toy_dir().join("test.jsonl"), Split::Test)
        .unwrap()
        .encoded(&vocab);
    let model = latsum::cli::load_extractive(&run.path(ckpt), &vocab).unwrap();
    latsum::extractive::mean_rouge_top_k(&model, &test.records, 3).unwrap()
}

#[test]
fn criterion_6_latent_training_improves_reward_without_hurting_rouge() {
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in [1, 2, 3] {
        let dir = tempfile::tempdir().unwrap();
        let run = common::run_pipeline(dir.path(), seed);
        let rewards = common::epoch_rewards(&run.path("reward_trace.jsonl"));
        let (first, last) = (rewards[0], *rewards.last().unwrap());
        let ext = test_rouge_mean(&run, "extract.ckpt");
        let lat = test_rouge_mean(&run, "latent.ckpt");
        ok &= last >= first && lat >= ext - 0.005;
        detail.push(format!(
            "seed {seed}: reward {first:.4} -> {last:.4}, rouge_mean extract {ext:.4} latent {lat:.4}"
        ));
    }
    verdict(6, "latent improvement", ok, &detail.join("; "));
}

#[test]
fn criterion_7_pipeline_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = common::run_pipeline(a.path(), 7);
    let rb = common::run_pipeline(b.path(), 7);
    let mut differing = Vec::new();
    for (fa, fb) in ra.files.iter().zip(&rb.files) {
        if std::fs::read(fa).unwrap() != std::fs::read(fb).unwrap() {
            differing.push(fa.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let reports_equal = ra.reports == rb.reports;
    verdict(
        7,
        "determinism",
        differing.is_empty() && reports_equal,
        &format!(
            "{} stage outputs compared, differing: {:?}, stage reports equal: {reports_equal}",
            ra.files.len(),
            differing
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_s_score_is_mean_token_probability() {
    let v = common::vocab(16);
    let mut rng = seeded_rng(88);
    let mut max_dev = 0.0f64;
    let mut in_range = true;
    for case in 0..1000 {
        let model = common::compression(v.len(), rng.gen_range(2..=6), case);
        let src = common::random_sentence(&mut rng, &v, 6);
        let tgt = common::random_sentence(&mut rng, &v, 6);
        let s = model.s_score(&src, &tgt).unwrap();
        in_range &= s > 0.0 && s <= 1.0;

        let mut g = Graph::new(false);
        let tf = model.teacher_forced(&mut g, &src, &tgt, &mut seeded_rng(0)).unwrap();
        let mut total = 0.0;
        for (lp, &y) in tf.log_probs.iter().zip(&tf.gold) {
            let probs: Vec<f64> = g.value(*lp).data().iter().map(|x| x.exp()).collect();
            let z: f64 = probs.iter().sum();
            total += (probs[y] / z).ln();
        }
        let recomputed = (total / tf.gold.len() as f64).exp();
        max_dev = max_dev.max((s - recomputed).abs());
    }
    verdict(
        8,
        "normalized sentence score",
        max_dev <= 1e-9 && in_range,
        &format!("10^3 fuzzed pairs, max deviation {max_dev:.1e}, all in (0,1]: {in_range}"),
    );
}

