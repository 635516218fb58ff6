//! Compositional train/eval splits and their audits.

mod audit;
mod property;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{verify_split, SplitReport};
pub use property::{has_property, quantifier_has_complex_scope, AnswerKind, Property, PropertyError, TagFamily};

use crate::program::anonymize;
use crate::record::ExampleRecord;
use crate::rng::{stable_hash, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Iid,
    ZeroShotIntersection,
    ZeroShotSingle,
    ZeroShotUnion,
    FewShot,
    Program,
    Lexical,
}

impl SplitMode {
    pub const ALL: [SplitMode; 7] = [
        SplitMode::Iid,
        SplitMode::ZeroShotIntersection,
        SplitMode::ZeroShotSingle,
        SplitMode::ZeroShotUnion,
        SplitMode::FewShot,
        SplitMode::Program,
        SplitMode::Lexical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SplitMode::Iid => "iid",
            SplitMode::ZeroShotIntersection => "zero-shot-intersection",
            SplitMode::ZeroShotSingle => "zero-shot-single",
            SplitMode::ZeroShotUnion => "zero-shot-union",
            SplitMode::FewShot => "few-shot",
            SplitMode::Program => "program",
            SplitMode::Lexical => "lexical",
        }
    }

    /// Number of properties the mode takes.
    pub fn arity(self) -> usize {
        match self {
            SplitMode::ZeroShotIntersection | SplitMode::ZeroShotUnion => 2,
            SplitMode::ZeroShotSingle | SplitMode::FewShot => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("{mode} takes {need} properties, got {got}")]
    Arity { mode: SplitMode, need: usize, got: usize },
    #[error("ratio must lie strictly between 0 and 1, got {0}")]
    Ratio(f64),
    #[error("pair_count must be at least 1")]
    PairCount,
    #[error("lexical split unsatisfiable: {0}")]
    Unsatisfiable(String),
}

/// Everything a split needs. Defaults: ratio 0.2, M 0, 65 pairs with 50
/// occurrences each, eval fraction 0.2, seed 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub properties: Vec<Property>,
    pub m: usize,
    pub ratio: f64,
    pub pair_count: usize,
    pub min_term_count: usize,
    pub seed: u64,
    /// Share of source images assigned to evaluation when a single input
    /// must be partitioned.
    pub eval_fraction: f64,
}

impl SplitSpec {
    pub fn new(mode: SplitMode) -> Self {
        SplitSpec {
            mode,
            properties: Vec::new(),
            m: 0,
            ratio: 0.2,
            pair_count: 65,
            min_term_count: 50,
            seed: 0,
            eval_fraction: 0.2,
        }
    }

    pub fn with_properties(mut self, props: &[&str]) -> Result<Self, PropertyError> {
        self.properties = props.iter().map(|p| p.parse()).collect::<Result<_, _>>()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let need = self.mode.arity();
        if self.properties.len() != need {
            return Err(SplitError::Arity {
                mode: self.mode,
                need,
                got: self.properties.len(),
            });
        }
        if self.mode == SplitMode::Program && !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(SplitError::Ratio(self.ratio));
        }
        if self.mode == SplitMode::Lexical && self.pair_count == 0 {
            return Err(SplitError::PairCount);
        }
        Ok(())
    }

    /// The held-out predicate of property-based modes.
    pub fn predicate(&self, r: &ExampleRecord) -> bool {
        let p = &self.properties;
        match self.mode {
            SplitMode::ZeroShotIntersection => has_property(r, &p[0]) && has_property(r, &p[1]),
            SplitMode::ZeroShotUnion => has_property(r, &p[0]) || has_property(r, &p[1]),
            SplitMode::ZeroShotSingle | SplitMode::FewShot => has_property(r, &p[0]),
            _ => false,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Properties are
    /// comma-separated.
    pub fn parse(text: &str) -> Result<Self, SplitError> {
        let mut spec: Option<SplitSpec> = None;
        let mut pending: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| SplitError::Spec { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "mode" {
                let mode = SplitMode::ALL
                    .into_iter()
                    .find(|m| m.name() == v)
                    .ok_or_else(|| bad(format!("unknown mode {v:?}")))?;
                spec = Some(SplitSpec::new(mode));
            } else {
                pending.push((i + 1, k.to_string(), v.to_string()));
            }
        }
        let mut spec = spec.ok_or(SplitError::Spec {
            line: 0,
            message: "missing mode".into(),
        })?;
        for (line, k, v) in pending {
            let bad = |message: String| SplitError::Spec { line, message };
            let num = |v: &str| v.parse::<usize>().map_err(|e| bad(format!("{k}: {e}")));
            match k.as_str() {
                "properties" => {
                    spec.properties = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<Property>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<_, _>>()?;
                }
                "m" | "M" => spec.m = num(&v)?,
                "ratio" => spec.ratio = v.parse().map_err(|e| bad(format!("ratio: {e}")))?,
                "pair_count" => spec.pair_count = num(&v)?,
                "min_term_count" => spec.min_term_count = num(&v)?,
                "seed" => spec.seed = v.parse().map_err(|e| bad(format!("seed: {e}")))?,
                "eval_fraction" => spec.eval_fraction = v.parse().map_err(|e| bad(format!("eval_fraction: {e}")))?,
                _ => return Err(bad(format!("unknown key {k:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let props: Vec<String> = self.properties.iter().map(|p| p.to_string()).collect();
        format!(
            "mode = {}\nproperties = {}\nm = {}\nratio = {}\npair_count = {}\nmin_term_count = {}\nseed = {}\neval_fraction = {}\n",
            self.mode,
            props.join(", "),
            self.m,
            self.ratio,
            self.pair_count,
            self.min_term_count,
            self.seed,
            self.eval_fraction
        )
    }
}

impl FromStr for SplitSpec {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitSpec::parse(s)
    }
}

/// Records drawn from training-source and evaluation-source scenes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BasePartition {
    pub train: Vec<ExampleRecord>,
    pub eval: Vec<ExampleRecord>,
    /// Records dropped because their images straddle both sides.
    pub filtered: usize,
}

fn eval_image(image: &str, fraction: f64, seed: u64) -> bool {
    (stable_hash(&format!("{seed}/{image}")) as f64 / u64::MAX as f64) < fraction
}

/// Sides images by hashing; a record follows its source image and is dropped
/// when any other image lands on the opposite side.
pub fn partition_by_images(records: &[ExampleRecord], eval_fraction: f64, seed: u64) -> BasePartition {
    let mut out = BasePartition::default();
    for r in records {
        let side = eval_image(&r.properties.source_image, eval_fraction, seed);
        if r.images.iter().any(|i| eval_image(i, eval_fraction, seed) != side) {
            out.filtered += 1;
        } else if side {
            out.eval.push(r.clone());
        } else {
            out.train.push(r.clone());
        }
    }
    out
}

/// Held-out material that the audit needs besides the records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holdout {
    pub programs: Vec<String>,
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitOutput {
    pub train: Vec<ExampleRecord>,
    pub dev: Vec<ExampleRecord>,
    pub test: Vec<ExampleRecord>,
    pub filtered: usize,
    pub holdout: Holdout,
    pub warnings: Vec<String>,
}

impl SplitOutput {
    pub fn eval(&self) -> impl Iterator<Item = &ExampleRecord> {
        self.dev.iter().chain(&self.test)
    }
}

fn sorted(mut v: Vec<ExampleRecord>) -> Vec<ExampleRecord> {
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// Dev if the question hash is even, test otherwise; equal texts always land
/// together.
pub fn dev_test(eval: Vec<ExampleRecord>) -> (Vec<ExampleRecord>, Vec<ExampleRecord>) {
    eval.into_iter().partition(|r| stable_hash(&r.question) % 2 == 0)
}

/// Unordered pairs of distinct names used by a program.
fn literal_pairs(r: &ExampleRecord) -> BTreeSet<(String, String)> {
    let names: BTreeSet<&str> = r.program.node_literals().into_iter().collect();
    let names: Vec<&str> = names.into_iter().collect();
    let mut out = BTreeSet::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            out.insert((a.to_string(), b.to_string()));
        }
    }
    out
}

pub fn contains_pair(r: &ExampleRecord, pair: &(String, String)) -> bool {
    let names = r.program.node_literals();
    names.contains(&pair.0.as_str()) && names.contains(&pair.1.as_str())
}

pub fn anonymized(r: &ExampleRecord) -> String {
    anonymize(&r.program).to_string()
}

const LEXICAL_RETRIES: usize = 32;

pub fn build_split(base: &BasePartition, spec: &SplitSpec) -> Result<SplitOutput, SplitError> {
    spec.validate()?;
    let mut rng = stream(spec.seed, &format!("split/{}", spec.mode));
    let train_in = sorted(base.train.clone());
    let eval_in = sorted(base.eval.clone());
    let mut out = SplitOutput {
        filtered: base.filtered,
        ..SplitOutput::default()
    };
    let (train, eval): (Vec<ExampleRecord>, Vec<ExampleRecord>) = match spec.mode {
        SplitMode::Iid => (train_in, eval_in),
        SplitMode::ZeroShotIntersection | SplitMode::ZeroShotSingle | SplitMode::ZeroShotUnion => {
            let train = train_in.into_iter().filter(|r| !spec.predicate(r)).collect();
            let eval: Vec<_> = eval_in.into_iter().filter(|r| spec.predicate(r)).collect();
            (train, eval)
        }
        SplitMode::FewShot => {
            let (with, mut train): (Vec<_>, Vec<_>) = train_in.into_iter().partition(|r| spec.predicate(r));
            if spec.m > with.len() {
                out.warnings.push(format!(
                    "only {} training records have the property, fewer than M = {}",
                    with.len(),
                    spec.m
                ));
            }
            train.extend(with.choose_multiple(&mut rng, spec.m.min(with.len())).cloned());
            let eval: Vec<_> = eval_in.into_iter().filter(|r| spec.predicate(r)).collect();
            (sorted(train), eval)
        }
        SplitMode::Program => {
            let programs: BTreeSet<String> = train_in.iter().chain(&eval_in).map(anonymized).collect();
            let mut programs: Vec<String> = programs.into_iter().collect();
            let n = programs.len();
            programs.shuffle(&mut rng);
            let k = if n < 2 {
                n
            } else {
                ((spec.ratio * n as f64).round() as usize).clamp(1, n - 1)
            };
            let held: BTreeSet<String> = programs.into_iter().take(k).collect();
            let train = train_in.into_iter().filter(|r| !held.contains(&anonymized(r))).collect();
            let eval = eval_in.into_iter().filter(|r| held.contains(&anonymized(r))).collect();
            out.holdout.programs = held.into_iter().collect();
            (train, eval)
        }
        SplitMode::Lexical => {
            let pairs = choose_pairs(&train_in, &eval_in, spec, &mut rng)?;
            let train = train_in
                .into_iter()
                .filter(|r| !pairs.iter().any(|p| contains_pair(r, p)))
                .collect();
            let eval = eval_in.into_iter().filter(|r| pairs.iter().any(|p| contains_pair(r, p))).collect();
            out.holdout.pairs = pairs;
            (train, eval)
        }
    };
    if spec.mode.arity() > 0 && eval.is_empty() {
        out.warnings.push("no evaluation record has the property".into());
    }
    let (dev, test) = dev_test(eval);
    out.train = train;
    out.dev = dev;
    out.test = test;
    Ok(out)
}

fn choose_pairs<R: rand::Rng>(
    train: &[ExampleRecord],
    eval: &[ExampleRecord],
    spec: &SplitSpec,
    rng: &mut R,
) -> Result<Vec<(String, String)>, SplitError> {
    let candidates: BTreeSet<(String, String)> = eval.iter().flat_map(literal_pairs).collect();
    let mut candidates: Vec<(String, String)> = candidates.into_iter().collect();
    let names: Vec<BTreeSet<&str>> = train.iter().map(|r| r.program.node_literals().into_iter().collect()).collect();

    let satisfied = |held: &[(String, String)]| {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for n in &names {
            if held.iter().any(|(a, b)| n.contains(a.as_str()) && n.contains(b.as_str())) {
                continue;
            }
            for (a, b) in held {
                for t in [a, b] {
                    if n.contains(t.as_str()) {
                        *counts.entry(t.as_str()).or_default() += 1;
                    }
                }
            }
        }
        held.iter()
            .all(|(a, b)| [a, b].iter().all(|t| counts.get(t.as_str()).copied().unwrap_or(0) >= spec.min_term_count))
    };

    let mut best = 0;
    for _ in 0..LEXICAL_RETRIES {
        candidates.shuffle(rng);
        let mut held: Vec<(String, String)> = Vec::new();
        for c in &candidates {
            held.push(c.clone());
            if !satisfied(&held) {
                held.pop();
            }
            if held.len() == spec.pair_count {
                held.sort();
                return Ok(held);
            }
        }
        best = best.max(held.len());
    }
    Err(SplitError::Unsatisfiable(format!(
        "at most {best} of {} pairs keep every held-out term at least {} times in train ({} co-occurring pairs in eval)",
        spec.pair_count,
        spec.min_term_count,
        candidates.len()
    )))
}
