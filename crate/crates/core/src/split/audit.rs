//! Exhaustive re-check of a split, independent of how it was built.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{anonymized, Holdout, SplitMode, SplitSpec};
use crate::record::ExampleRecord;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub mode: String,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub filtered: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_property_count: Option<usize>,
    #[serde(default)]
    pub held_out_programs: Vec<String>,
    #[serde(default)]
    pub held_out_pairs: Vec<(String, String)>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub violations: Vec<String>,
    pub passed: bool,
}

impl SplitReport {
    pub fn holdout(&self) -> Holdout {
        Holdout {
            programs: self.held_out_programs.clone(),
            pairs: self.held_out_pairs.clone(),
        }
    }
}

fn names(r: &ExampleRecord) -> BTreeSet<&str> {
    let mut out = BTreeSet::new();
    for s in r.program.all_steps() {
        for (i, a) in s.args.iter().enumerate() {
            match a {
                crate::program::Arg::Literal(l) if crate::program::is_node_literal(s.op, i) => {
                    out.insert(l.as_str());
                }
                crate::program::Arg::Modifier { name, .. } => {
                    out.insert(name.as_str());
                }
                _ => {}
            }
        }
    }
    out
}

pub fn verify_split(
    train: &[ExampleRecord],
    dev: &[ExampleRecord],
    test: &[ExampleRecord],
    spec: &SplitSpec,
    holdout: &Holdout,
    filtered: usize,
) -> SplitReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let eval: Vec<&ExampleRecord> = dev.iter().chain(test).collect();

    let train_images: BTreeSet<&str> = train.iter().flat_map(|r| r.images.iter().map(String::as_str)).collect();
    for r in &eval {
        for i in &r.images {
            if train_images.contains(i.as_str()) {
                violations.push(format!("image {i} of eval record {} also appears in train", r.id));
            }
        }
    }
    let dev_questions: BTreeSet<&str> = dev.iter().map(|r| r.question.as_str()).collect();
    for r in test {
        if dev_questions.contains(r.question.as_str()) {
            violations.push(format!("question of test record {} also appears in dev", r.id));
        }
    }

    let mut train_property_count = None;
    match spec.mode {
        SplitMode::Iid => {}
        SplitMode::ZeroShotIntersection | SplitMode::ZeroShotSingle | SplitMode::ZeroShotUnion | SplitMode::FewShot => {
            let train_hits: Vec<&ExampleRecord> =
                train.par_iter().filter(|r| spec.predicate(r)).collect::<Vec<_>>();
            for r in eval.iter().filter(|r| !spec.predicate(r)) {
                violations.push(format!("eval record {} lacks the property", r.id));
            }
            if spec.mode == SplitMode::FewShot {
                train_property_count = Some(train_hits.len());
                if train_hits.len() > spec.m {
                    violations.push(format!(
                        "train holds {} property records, more than M = {}",
                        train_hits.len(),
                        spec.m
                    ));
                } else if train_hits.len() < spec.m {
                    warnings.push(format!("train holds {} property records, fewer than M = {}", train_hits.len(), spec.m));
                }
            } else {
                for r in train_hits {
                    violations.push(format!("train record {} has the property", r.id));
                }
            }
        }
        SplitMode::Program => {
            let held: BTreeSet<&str> = holdout.programs.iter().map(String::as_str).collect();
            let eval_programs: BTreeSet<String> = eval.iter().map(|r| anonymized(r)).collect();
            for r in train {
                let p = anonymized(r);
                if eval_programs.contains(&p) || held.contains(p.as_str()) {
                    violations.push(format!("train record {} uses a held-out program", r.id));
                }
            }
            for r in &eval {
                if !held.contains(anonymized(r).as_str()) {
                    violations.push(format!("eval record {} uses a program that is not held out", r.id));
                }
            }
        }
        SplitMode::Lexical => {
            if holdout.pairs.len() != spec.pair_count {
                violations.push(format!("{} pairs held out, expected {}", holdout.pairs.len(), spec.pair_count));
            }
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in train {
                let n = names(r);
                for (a, b) in &holdout.pairs {
                    if n.contains(a.as_str()) && n.contains(b.as_str()) {
                        violations.push(format!("train record {} contains held-out pair ({a}, {b})", r.id));
                    }
                }
                for t in holdout.pairs.iter().flat_map(|(a, b)| [a, b]) {
                    if n.contains(t.as_str()) {
                        *counts.entry(t.as_str()).or_default() += 1;
                    }
                }
            }
            let terms: BTreeSet<&str> = holdout.pairs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
            for t in terms {
                let c = counts.get(t).copied().unwrap_or(0);
                if c < spec.min_term_count {
                    violations.push(format!("term {t} appears {c} times in train, fewer than {}", spec.min_term_count));
                }
            }
            for r in &eval {
                let n = names(r);
                if !holdout.pairs.iter().any(|(a, b)| n.contains(a.as_str()) && n.contains(b.as_str())) {
                    violations.push(format!("eval record {} contains no held-out pair", r.id));
                }
            }
        }
    }
    if spec.mode.arity() > 0 && eval.is_empty() {
        warnings.push("evaluation side is empty".into());
    }

    SplitReport {
        mode: spec.mode.to_string(),
        train: train.len(),
        dev: dev.len(),
        test: test.len(),
        filtered,
        train_property_count,
        held_out_programs: holdout.programs.clone(),
        held_out_pairs: holdout.pairs.clone(),
        passed: violations.is_empty(),
        warnings,
        violations,
    }
}
