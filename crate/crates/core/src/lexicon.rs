//! Word lists that drive substitution filtering and realization: the mutual
//! exclusion lexicon, attribute categories and irregular plurals.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subgraph::NodeKind;

/// Substitutions are allowed only above this score.
pub const EXCLUSION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("line {line}: expected {expected} tab-separated fields")]
    Fields { line: usize, expected: usize },
    #[error("line {line}: unknown node type \"{kind}\"")]
    Kind { line: usize, kind: String },
    #[error("line {line}: score \"{score}\" is not a number in [0, 1]")]
    Score { line: usize, score: String },
    #[error("line {line}: {kind} pair ({a}, {b}) conflicts with its mirrored entry")]
    Asymmetric {
        line: usize,
        kind: &'static str,
        a: String,
        b: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    Object,
    Attribute,
    Relation,
}

impl LexiconKind {
    /// Rel-mod nodes share the relation table.
    pub fn of(node: NodeKind) -> Self {
        match node {
            NodeKind::Object => LexiconKind::Object,
            NodeKind::Attribute => LexiconKind::Attribute,
            NodeKind::Relation | NodeKind::Modifier => LexiconKind::Relation,
        }
    }

    fn name(self) -> &'static str {
        match self {
            LexiconKind::Object => "object",
            LexiconKind::Attribute => "attribute",
            LexiconKind::Relation => "relation",
        }
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Directed score that two names cannot describe the same thing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MutualExclusionLexicon {
    entries: HashMap<(LexiconKind, String, String), f64>,
}

impl MutualExclusionLexicon {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The shipped table for the fixture vocabulary.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/exclusivity.tsv")).expect("builtin lexicon parses")
    }

    /// Parses `type<TAB>x1<TAB>x2<TAB>score` rows.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Self::default();
        for (line, row) in data_lines(text) {
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != 4 {
                return Err(LexiconError::Fields { line, expected: 4 });
            }
            let kind = match fields[0] {
                "object" | "noun" => LexiconKind::Object,
                "attribute" => LexiconKind::Attribute,
                "relation" => LexiconKind::Relation,
                other => {
                    return Err(LexiconError::Kind {
                        line,
                        kind: other.to_string(),
                    })
                }
            };
            let score: f64 = fields[3]
                .trim()
                .parse()
                .ok()
                .filter(|s: &f64| (0.0..=1.0).contains(s))
                .ok_or_else(|| LexiconError::Score {
                    line,
                    score: fields[3].to_string(),
                })?;
            lex.insert(kind, fields[1], fields[2], score)
                .map_err(|(a, b)| LexiconError::Asymmetric {
                    line,
                    kind: kind.name(),
                    a,
                    b,
                })?;
        }
        Ok(lex)
    }

    /// Object and attribute pairs are stored in both directions.
    pub fn insert(&mut self, kind: LexiconKind, a: &str, b: &str, score: f64) -> Result<(), (String, String)> {
        if a == b {
            return Ok(());
        }
        if kind != LexiconKind::Relation {
            let mirror = (kind, b.to_string(), a.to_string());
            if let Some(&old) = self.entries.get(&mirror) {
                if old != score && self.entries.contains_key(&(kind, a.to_string(), b.to_string())) {
                    return Err((a.to_string(), b.to_string()));
                }
            }
            self.entries.insert(mirror, score);
        }
        self.entries.insert((kind, a.to_string(), b.to_string()), score);
        Ok(())
    }

    pub fn score(&self, kind: LexiconKind, from: &str, to: &str) -> f64 {
        if from == to {
            return 0.0;
        }
        self.entries
            .get(&(kind, from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn allows(&self, kind: LexiconKind, from: &str, to: &str) -> bool {
        self.score(kind, from, to) > EXCLUSION_THRESHOLD
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Maps attribute values to categories such as color or material.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCategories {
    by_value: BTreeMap<String, String>,
}

impl AttributeCategories {
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/categories.tsv")).expect("builtin categories parse")
    }

    /// Parses `value<TAB>category` rows.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut by_value = BTreeMap::new();
        for (line, row) in data_lines(text) {
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != 2 {
                return Err(LexiconError::Fields { line, expected: 2 });
            }
            by_value.insert(fields[0].to_string(), fields[1].to_string());
        }
        Ok(AttributeCategories { by_value })
    }

    pub fn category(&self, value: &str) -> Option<&str> {
        self.by_value.get(value).map(String::as_str)
    }

    pub fn insert(&mut self, value: impl Into<String>, category: impl Into<String>) {
        self.by_value.insert(value.into(), category.into());
    }
}

/// Irregular plural forms; everything else takes "s" or "es".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluralTable {
    irregular: BTreeMap<String, String>,
}

impl PluralTable {
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/plurals.tsv")).expect("builtin plurals parse")
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut irregular = BTreeMap::new();
        for (line, row) in data_lines(text) {
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != 2 {
                return Err(LexiconError::Fields { line, expected: 2 });
            }
            irregular.insert(fields[0].to_string(), fields[1].to_string());
        }
        Ok(PluralTable { irregular })
    }

    /// Pluralizes the last word of a possibly multi-word noun.
    pub fn pluralize(&self, noun: &str) -> String {
        if let Some(p) = self.irregular.get(noun) {
            return p.clone();
        }
        let (head, last) = match noun.rsplit_once(' ') {
            Some((h, l)) => (Some(h), l),
            None => (None, noun),
        };
        let plural = match self.irregular.get(last) {
            Some(p) => p.clone(),
            None if ["s", "x", "z", "ch", "sh"].iter().any(|s| last.ends_with(s)) => format!("{last}es"),
            None => format!("{last}s"),
        };
        match head {
            Some(h) => format!("{h} {plural}"),
            None => plural,
        }
    }
}
