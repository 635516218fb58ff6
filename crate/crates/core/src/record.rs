//! Example records and their JSONL form.
//!
//! A file may start with a header line `{"header": {...}}` carrying the
//! configuration that produced it; readers skip it.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{Answer, Program};
use crate::question::TemplateId;
use crate::subgraph::Subgraph;

/// How a template slot was filled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum SlotValue {
    /// Description of the source subgraph or part of it.
    Subgraph(String),
    /// Description of a subgraph taken from a distractor.
    Foreign(String),
    /// Closed-class word.
    Word(String),
}

impl SlotValue {
    pub fn text(&self) -> &str {
        match self {
            SlotValue::Subgraph(s) | SlotValue::Foreign(s) | SlotValue::Word(s) => s,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_image: String,
    pub size: usize,
    pub depth: usize,
    #[serde(default)]
    pub slots: BTreeMap<String, SlotValue>,
    /// Operator-category tags of the program, sorted.
    #[serde(default)]
    pub tags: Vec<String>,
    /// Images drawn as containing the subgraph; every other image was drawn
    /// as a distractor.
    #[serde(default)]
    pub positives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub question: String,
    pub images: Vec<String>,
    pub answer: Answer,
    pub program: Program,
    pub template: TemplateId,
    pub subgraph: Subgraph,
    pub properties: Provenance,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: serde_json::Value,
}

/// Records of a JSONL stream plus its header, if any.
pub fn read_records<R: BufRead>(reader: R) -> Result<(Option<serde_json::Value>, Vec<ExampleRecord>), RecordError> {
    let mut header = None;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"header\"") {
            let h: HeaderLine = serde_json::from_str(&line).map_err(|e| RecordError::Parse {
                line: 1,
                message: e.to_string(),
            })?;
            header = Some(h.header);
            continue;
        }
        let r: ExampleRecord = serde_json::from_str(&line).map_err(|e| RecordError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok((header, out))
}

pub fn parse_records(text: &str) -> Result<Vec<ExampleRecord>, RecordError> {
    read_records(text.as_bytes()).map(|(_, r)| r)
}

pub fn write_records<W: Write>(
    mut w: W,
    header: Option<&serde_json::Value>,
    records: &[ExampleRecord],
) -> std::io::Result<()> {
    if let Some(h) = header {
        let line = serde_json::to_string(&HeaderLine { header: h.clone() }).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    for r in records {
        writeln!(w, "{}", r.to_json_line())?;
    }
    Ok(())
}

impl ExampleRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    /// (node count, depth) of the source subgraph.
    pub fn structure(&self) -> (usize, usize) {
        (self.properties.size, self.properties.depth)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.properties.tags.iter().any(|t| t == tag)
    }
}
