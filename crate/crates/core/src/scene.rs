//! Scene graphs: per-image objects, attribute values and directed relations.
//!
//! Scenes are read from newline-delimited JSON, one scene per line. Every
//! record is validated on the way in so the rest of the crate can assume
//! unique object ids and resolvable relation targets.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("line {line}: malformed scene record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: scene {image_id}: unknown object reference \"{id}\"")]
    DanglingReference {
        line: usize,
        image_id: String,
        id: String,
    },
    #[error("line {line}: scene {image_id}: {message}")]
    Invalid {
        line: usize,
        image_id: String,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SceneError {
    /// 1-based input line the error refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            SceneError::Malformed { line, .. }
            | SceneError::DanglingReference { line, .. }
            | SceneError::Invalid { line, .. } => Some(*line),
            SceneError::Io(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modifier {
    pub name: String,
    #[serde(rename = "object")]
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub name: String,
    #[serde(rename = "object")]
    pub target: String,
    #[serde(default)]
    pub modifiers: Vec<Modifier>,
}

impl RelationEdge {
    pub fn modifier(&self, name: &str) -> Option<&Modifier> {
        self.modifiers.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub relations: Vec<RelationEdge>,
}

impl ObjectNode {
    pub fn has_attribute(&self, value: &str) -> bool {
        self.attributes.iter().any(|a| a == value)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawScene", into = "RawScene")]
pub struct SceneGraph {
    image_id: String,
    objects: Vec<ObjectNode>,
    #[serde(skip)]
    by_id: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawScene {
    image_id: String,
    #[serde(default)]
    objects: Vec<ObjectNode>,
}

impl TryFrom<RawScene> for SceneGraph {
    type Error = String;

    fn try_from(raw: RawScene) -> Result<Self, String> {
        SceneGraph::new(raw.image_id, raw.objects).map_err(|e| e.to_string())
    }
}

impl From<SceneGraph> for RawScene {
    fn from(scene: SceneGraph) -> Self {
        RawScene {
            image_id: scene.image_id,
            objects: scene.objects,
        }
    }
}

impl PartialEq for SceneGraph {
    fn eq(&self, other: &Self) -> bool {
        self.image_id == other.image_id && self.objects == other.objects
    }
}

/// Violation of a scene invariant, before it is tied to an input line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneViolation {
    #[error("unknown object reference \"{0}\"")]
    Dangling(String),
    #[error("duplicate object id \"{0}\"")]
    DuplicateId(String),
    #[error("object \"{0}\" has an empty name")]
    EmptyName(String),
    #[error("object \"{id}\" lists attribute \"{value}\" twice")]
    DuplicateAttribute { id: String, value: String },
    #[error("relation \"{relation}\" on object \"{id}\" repeats modifier \"{modifier}\"")]
    DuplicateModifier {
        id: String,
        relation: String,
        modifier: String,
    },
}

impl SceneGraph {
    pub fn new(image_id: impl Into<String>, objects: Vec<ObjectNode>) -> Result<Self, SceneViolation> {
        let mut by_id = HashMap::with_capacity(objects.len());
        for (i, o) in objects.iter().enumerate() {
            if by_id.insert(o.id.clone(), i).is_some() {
                return Err(SceneViolation::DuplicateId(o.id.clone()));
            }
        }
        for o in &objects {
            if o.name.is_empty() {
                return Err(SceneViolation::EmptyName(o.id.clone()));
            }
            let mut seen = HashSet::new();
            for a in &o.attributes {
                if !seen.insert(a.as_str()) {
                    return Err(SceneViolation::DuplicateAttribute {
                        id: o.id.clone(),
                        value: a.clone(),
                    });
                }
            }
            for r in &o.relations {
                if !by_id.contains_key(&r.target) {
                    return Err(SceneViolation::Dangling(r.target.clone()));
                }
                let mut mods = HashSet::new();
                for m in &r.modifiers {
                    if !by_id.contains_key(&m.target) {
                        return Err(SceneViolation::Dangling(m.target.clone()));
                    }
                    if !mods.insert(m.name.as_str()) {
                        return Err(SceneViolation::DuplicateModifier {
                            id: o.id.clone(),
                            relation: r.name.clone(),
                            modifier: m.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(SceneGraph {
            image_id: image_id.into(),
            objects,
            by_id,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn objects(&self) -> &[ObjectNode] {
        &self.objects
    }

    pub fn object(&self, index: usize) -> &ObjectNode {
        &self.objects[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn relation_count(&self) -> usize {
        self.objects.iter().map(|o| o.relations.len()).sum()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }
}

/// Reads Scene JSONL. Blank lines are skipped; input order is preserved.
pub fn parse_scene_graphs<R: BufRead>(reader: R) -> Result<Vec<SceneGraph>, SceneError> {
    let mut scenes = Vec::new();
    let mut seen_images = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawScene = serde_json::from_str(&line).map_err(|e| SceneError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let image_id = raw.image_id.clone();
        let scene = SceneGraph::new(raw.image_id, raw.objects).map_err(|v| match v {
            SceneViolation::Dangling(id) => SceneError::DanglingReference {
                line: line_no,
                image_id: image_id.clone(),
                id,
            },
            other => SceneError::Invalid {
                line: line_no,
                image_id: image_id.clone(),
                message: other.to_string(),
            },
        })?;
        if !seen_images.insert(image_id.clone()) {
            return Err(SceneError::Invalid {
                line: line_no,
                image_id,
                message: "duplicate image id".into(),
            });
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

pub fn parse_scene_str(text: &str) -> Result<Vec<SceneGraph>, SceneError> {
    parse_scene_graphs(text.as_bytes())
}
