//! Positive and distractor images for a subgraph.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::decompose::simple_pieces;
use crate::distance::{align, Substitution};
use crate::index::MaskedIndex;
use crate::lexicon::MutualExclusionLexicon;
use crate::matching::{contains, EnumerationLimits};
use crate::scene::SceneGraph;
use crate::subgraph::Subgraph;

/// Scenes plus their masked index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    scenes: Vec<SceneGraph>,
    index: MaskedIndex,
    #[serde(skip)]
    by_image: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(scenes: Vec<SceneGraph>, limits: EnumerationLimits) -> Self {
        let index = MaskedIndex::build(&scenes, limits);
        Self::from_parts(scenes, index)
    }

    pub fn from_parts(scenes: Vec<SceneGraph>, index: MaskedIndex) -> Self {
        let by_image = scenes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.image_id().to_string(), i))
            .collect();
        Corpus {
            scenes,
            index,
            by_image,
        }
    }

    /// Restores the image lookup after deserialization.
    pub fn reindexed(self) -> Self {
        Self::from_parts(self.scenes, self.index)
    }

    pub fn scenes(&self) -> &[SceneGraph] {
        &self.scenes
    }

    pub fn scene(&self, i: usize) -> &SceneGraph {
        &self.scenes[i]
    }

    pub fn index(&self) -> &MaskedIndex {
        &self.index
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.by_image.get(image_id).copied()
    }

    pub fn scene_by_id(&self, image_id: &str) -> Option<&SceneGraph> {
        self.position(image_id).map(|i| &self.scenes[i])
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

/// Decides whether an image may serve as a distractor for a simple piece.
///
/// Scene graphs are incomplete, so a learned verifier could also reject
/// images where the piece is likely present but unannotated (for example a
/// classifier over image features with per-node-type thresholds). The
/// default trusts the annotation.
pub trait AbsenceVerifier: Sync {
    fn verify_absent(&self, piece: &Subgraph, scene: &SceneGraph) -> bool;
}

/// Absent iff exact matching finds no assignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactVerifier;

impl AbsenceVerifier for ExactVerifier {
    fn verify_absent(&self, piece: &Subgraph, scene: &SceneGraph) -> bool {
        !contains(piece, scene)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistractorCandidate {
    pub image_id: String,
    pub scene: usize,
    pub witness: Subgraph,
    pub distance: usize,
    pub substitutions: Vec<Substitution>,
    /// `mapping[p]` is the witness position aligned with position `p` of g.
    pub mapping: Vec<usize>,
}

/// Images containing `g`, except `source`, by image id.
pub fn find_positive_images(g: &Subgraph, corpus: &Corpus, source: Option<&str>) -> Vec<String> {
    let scenes: Vec<usize> = if g.object_count() <= corpus.index.limits.max_objects {
        corpus.index.exact(g).into_iter().collect()
    } else {
        (0..corpus.len()).collect()
    };
    let mut out: Vec<String> = scenes
        .into_iter()
        .map(|i| &corpus.scenes[i])
        .filter(|s| Some(s.image_id()) != source && contains(g, s))
        .map(|s| s.image_id().to_string())
        .collect();
    out.sort();
    out
}

/// Images holding a witness at distance 1 or 2 that do not contain `g`.
///
/// Besides the hard ground-truth exclusion, every simple piece of `g` that
/// touches a substituted node must be confirmed absent by the verifier.
/// Pieces untouched by the substitution appear in the witness itself.
pub fn find_distractor_images(
    g: &Subgraph,
    corpus: &Corpus,
    lex: &MutualExclusionLexicon,
    verifier: &dyn AbsenceVerifier,
    source: Option<&str>,
) -> Vec<DistractorCandidate> {
    let pairs: Vec<(usize, usize)> = if g.object_count() <= corpus.index.limits.max_objects {
        corpus.index.near(g)
    } else {
        (0..corpus.len())
            .flat_map(|s| (0..corpus.index.subgraphs(s).len()).map(move |i| (s, i)))
            .collect()
    };
    let mut by_scene: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (s, i) in pairs {
        by_scene.entry(s).or_default().push(i);
    }
    let pieces = simple_pieces(g);
    let mut out = Vec::new();
    for (s, subs) in by_scene {
        let scene = &corpus.scenes[s];
        if Some(scene.image_id()) == source {
            continue;
        }
        let mut found = Vec::new();
        for i in subs {
            let witness = &corpus.index.subgraphs(s)[i];
            let Some(al) = align(g, witness, lex) else { continue };
            if !(1..=2).contains(&al.distance) {
                continue;
            }
            found.push(DistractorCandidate {
                image_id: scene.image_id().to_string(),
                scene: s,
                witness: witness.clone(),
                distance: al.distance,
                substitutions: al.substitutions,
                mapping: al.mapping,
            });
        }
        if found.is_empty() || contains(g, scene) {
            continue;
        }
        found.retain(|c| {
            pieces
                .iter()
                .filter(|p| c.substitutions.iter().any(|sub| p.covers.contains(&sub.position)))
                .all(|p| verifier.verify_absent(&p.subgraph, scene))
        });
        out.extend(found);
    }
    out.sort_by(|a, b| {
        (a.distance, &a.image_id, a.witness.canonical()).cmp(&(b.distance, &b.image_id, b.witness.canonical()))
    });
    out
}

/// Positives and distractors for one subgraph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mined {
    pub positives: Vec<String>,
    pub distractors: Vec<DistractorCandidate>,
}

impl Mined {
    /// Distinct distractor images, in candidate order.
    pub fn distractor_images(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.distractors {
            if !out.contains(&c.image_id.as_str()) {
                out.push(&c.image_id);
            }
        }
        out
    }
}

pub fn mine(
    g: &Subgraph,
    corpus: &Corpus,
    lex: &MutualExclusionLexicon,
    verifier: &dyn AbsenceVerifier,
    source: Option<&str>,
) -> Mined {
    Mined {
        positives: find_positive_images(g, corpus, source),
        distractors: find_distractor_images(g, corpus, lex, verifier, source),
    }
}
