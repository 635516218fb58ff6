//! Per-template downsampling that flattens answer and structure
//! distributions.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rayon::prelude::*;

use crate::question::TemplateId;
use crate::record::ExampleRecord;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BalanceKey {
    pub template: TemplateId,
    pub answer: String,
    /// (node count, depth) of the source subgraph.
    pub structure: (usize, usize),
    pub has_alternate: bool,
}

/// Question texts that occur with at least two different answers.
pub fn alternate_questions(records: &[ExampleRecord]) -> BTreeSet<String> {
    let mut answers: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        answers.entry(&r.question).or_default().insert(r.answer.to_string());
    }
    answers
        .into_iter()
        .filter(|(_, a)| a.len() >= 2)
        .map(|(q, _)| q.to_string())
        .collect()
}

pub fn balance_keys(records: &[ExampleRecord]) -> Vec<BalanceKey> {
    let alt = alternate_questions(records);
    records
        .iter()
        .map(|r| BalanceKey {
            template: r.template,
            answer: r.answer.to_string(),
            structure: r.structure(),
            has_alternate: alt.contains(&r.question),
        })
        .collect()
}

/// Retains `floor(N/T)` records per template. Within a template, records
/// whose question has another answer elsewhere come first; the rest are
/// picked one at a time, taking the least frequent answer so far and then
/// the least frequent structure among records with that answer, ties broken
/// by the seeded stream. The output is sorted by id and every record is an
/// unmodified input.
pub fn balance(records: &[ExampleRecord], seed: u64) -> Vec<ExampleRecord> {
    let mut owned = records.to_vec();
    owned.sort_by_cached_key(|r| (r.id.clone(), r.to_json_line()));
    let keys = balance_keys(&owned);

    let mut groups: BTreeMap<TemplateId, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.template).or_default().push(i);
    }
    if groups.is_empty() {
        return Vec::new();
    }
    let s = owned.len() / groups.len();

    let kept: Vec<Vec<usize>> = groups
        .par_iter()
        .map(|(t, members)| select(members, &keys, s, seed, *t))
        .collect();
    let mut kept: Vec<usize> = kept.into_iter().flatten().collect();
    kept.sort_unstable();
    kept.into_iter().map(|i| owned[i].clone()).collect()
}

fn select(members: &[usize], keys: &[BalanceKey], s: usize, seed: u64, t: TemplateId) -> Vec<usize> {
    let mut rng = stream(seed, &format!("balance/{}", t.name()));
    let (mut flagged, mut pool): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| keys[i].has_alternate);
    if flagged.len() > s {
        flagged.shuffle(&mut rng);
        flagged.truncate(s);
        flagged.sort_unstable();
    }
    let mut out = flagged;
    let mut answers: BTreeMap<&str, usize> = BTreeMap::new();
    let mut shapes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &i in &out {
        *answers.entry(&keys[i].answer).or_default() += 1;
        *shapes.entry(keys[i].structure).or_default() += 1;
    }
    while out.len() < s && !pool.is_empty() {
        let available: BTreeSet<&str> = pool.iter().map(|&i| keys[i].answer.as_str()).collect();
        let least = available.iter().map(|a| answers.get(a).copied().unwrap_or(0)).min().unwrap();
        let tied: Vec<&str> = available
            .into_iter()
            .filter(|a| answers.get(a).copied().unwrap_or(0) == least)
            .collect();
        let answer = *tied.choose(&mut rng).unwrap();

        let with_answer: Vec<usize> = (0..pool.len()).filter(|&p| keys[pool[p]].answer == answer).collect();
        let least = with_answer
            .iter()
            .map(|&p| shapes.get(&keys[pool[p]].structure).copied().unwrap_or(0))
            .min()
            .unwrap();
        let tied: Vec<usize> = with_answer
            .into_iter()
            .filter(|&p| shapes.get(&keys[pool[p]].structure).copied().unwrap_or(0) == least)
            .collect();
        let p = *tied.choose(&mut rng).unwrap();
        let i = pool.remove(p);
        *answers.entry(&keys[i].answer).or_default() += 1;
        *shapes.entry(keys[i].structure).or_default() += 1;
        out.push(i);
    }
    out
}

/// Largest share of a single answer among records of template `t`.
pub fn max_answer_share(records: &[ExampleRecord], t: TemplateId) -> f64 {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut n = 0;
    for r in records.iter().filter(|r| r.template == t) {
        *counts.entry(r.answer.to_string()).or_default() += 1;
        n += 1;
    }
    match counts.values().max() {
        Some(&m) => m as f64 / n as f64,
        None => 0.0,
    }
}
