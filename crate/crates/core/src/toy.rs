//! Synthetic document/summary corpus built from sentence templates.
//!
//! Each document mixes two or three "event" sentences with filler. Every
//! summary sentence is a shortened event sentence, so the gold extraction is
//! known, but event sentences can sit anywhere in the document and fillers
//! reuse event vocabulary, so position alone or word overlap alone is not a
//! perfect signal.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::corpus::RawRecord;
use crate::numerics::seeded_rng;

const AGENTS: &[&str] = &[
    "the council", "the mayor", "the union", "the court", "the company", "the school board",
    "the police", "the minister",
];
const ACTIONS: &[(&str, &str)] = &[
    ("approved", "a new bridge"),
    ("rejected", "the budget"),
    ("announced", "a hiring freeze"),
    ("blocked", "the merger"),
    ("opened", "an inquiry"),
    ("signed", "the trade deal"),
    ("cancelled", "the festival"),
    ("raised", "the fuel tax"),
];
const PLACES: &[&str] = &["riverton", "lakeside", "northfield", "eastport", "hillcrest"];
const WHEN: &[&str] = &["on monday", "on friday", "late last night", "this morning"];
const FILLER: &[&str] = &[
    "residents said the weather was mild",
    "traffic was slow near the station",
    "a local bakery sold out of bread",
    "the weekend market drew a small crowd",
    "several shops closed early",
    "a reporter asked about parking",
    "the library extended its hours",
    "critics said little had changed",
    "the river rose after heavy rain",
    "officials declined to comment further",
];
const DISTRACTOR: &[&str] = &[
    "{agent} met in {place} as usual",
    "people in {place} discussed {object}",
    "{agent} has spoken about {object} before",
];

/// Number of documents in each bundled split.
pub const TOY_SIZES: [(&str, usize); 3] = [("train", 50), ("valid", 10), ("test", 10)];

fn event(rng: &mut impl rand::Rng) -> (String, String, &'static str, &'static str) {
    let agent = AGENTS.choose(rng).unwrap();
    let (verb, object) = ACTIONS.choose(rng).unwrap();
    let place = PLACES.choose(rng).unwrap();
    let when = WHEN.choose(rng).unwrap();
    let long = format!("{agent} in {place} {verb} {object} {when}.");
    let short = format!("{agent} {verb} {object}.");
    (long, short, agent, object)
}

/// Generates `n` records with ids `{prefix}-{i}`. Deterministic in `seed`.
pub fn generate(prefix: &str, n: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|i| {
            let n_events = rng.gen_range(2..=3);
            let n_filler = rng.gen_range(2..=4);
            let mut events = Vec::new();
            for _ in 0..n_events {
                events.push(event(&mut rng));
            }
            let mut others: Vec<String> = FILLER
                .choose_multiple(&mut rng, n_filler)
                .map(|s| format!("{s}."))
                .collect();
            if rng.gen_bool(0.5) {
                let (_, _, agent, object) = &events[0];
                let place = PLACES.choose(&mut rng).unwrap();
                let t = DISTRACTOR.choose(&mut rng).unwrap();
                others.push(format!(
                    "{}.",
                    t.replace("{agent}", agent)
                        .replace("{object}", object)
                        .replace("{place}", place)
                ));
            }
            // Events favour the front of the document without owning it.
            let total = events.len() + others.len();
            let mut slots: Vec<usize> = (0..total).collect();
            slots.sort_by_key(|&s| s + rng.gen_range(0..total));
            let mut sentences = vec![String::new(); total];
            for (k, (long, _, _, _)) in events.iter().enumerate() {
                sentences[slots[k]] = long.clone();
            }
            let mut rest = others.into_iter();
            for s in sentences.iter_mut().filter(|s| s.is_empty()) {
                *s = rest.next().unwrap();
            }
            let mut order: Vec<usize> = (0..events.len()).collect();
            order.sort_by_key(|&k| slots[k]);
            RawRecord {
                id: format!("{prefix}-{i:03}"),
                document: sentences,
                summary: order.into_iter().map(|k| events[k].1.clone()).collect(),
            }
        })
        .collect()
}

/// The three bundled splits, seeded from `seed`.
pub fn toy_splits(seed: u64) -> Vec<(&'static str, Vec<RawRecord>)> {
    TOY_SIZES
        .iter()
        .enumerate()
        .map(|(k, &(name, n))| (name, generate(name, n, seed.wrapping_mul(31).wrapping_add(k as u64))))
        .collect()
}
