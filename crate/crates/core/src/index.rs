//! Inverted index from masked canonical keys to enumerated subgraphs.
//!
//! Each enumerated subgraph is filed under its exact key and under every key
//! obtained by replacing one or two node names with a wildcard. The wildcard
//! keeps its syntactic slot (object, attribute, relation or rel-mod), so it is
//! type-tagged. Two graphs at substitution distance d <= 2 share the key that
//! masks the substituted positions, which makes probing with the query's own
//! masks a complete candidate generator.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matching::{enumerate_subgraphs, EnumerationLimits};
use crate::rng::stable_hash;
use crate::scene::SceneGraph;
use crate::subgraph::Subgraph;

/// Largest number of masked positions per key.
pub const MAX_MASKED: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexEntry {
    pub scene: u32,
    pub subgraph: u32,
    /// Masked positions in the entry's own subgraph; unused slots are `u8::MAX`.
    pub mask: [u8; MAX_MASKED],
}

impl IndexEntry {
    pub fn masked_positions(&self) -> Vec<usize> {
        self.mask.iter().filter(|&&p| p != u8::MAX).map(|&p| p as usize).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskedIndex {
    pub limits: EnumerationLimits,
    subgraphs: Vec<Vec<Subgraph>>,
    #[serde(with = "key_table")]
    keys: HashMap<u64, Vec<IndexEntry>>,
}

/// Every mask of size 0, 1 and 2 over `n` positions.
pub fn masks(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for i in 0..n {
        out.push(vec![i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(vec![i, j]);
        }
    }
    out
}

fn key_hash(g: &Subgraph, mask: &[usize]) -> u64 {
    stable_hash(&g.masked_key(mask))
}

impl MaskedIndex {
    pub fn build(scenes: &[SceneGraph], limits: EnumerationLimits) -> Self {
        let per_scene: Vec<(Vec<Subgraph>, Vec<(u64, IndexEntry)>)> = scenes
            .par_iter()
            .enumerate()
            .map(|(si, scene)| {
                let subs = enumerate_subgraphs(scene, limits);
                let mut keys = Vec::new();
                for (gi, g) in subs.iter().enumerate() {
                    for m in masks(g.node_count()) {
                        let mut slot = [u8::MAX; MAX_MASKED];
                        for (k, &p) in m.iter().enumerate() {
                            slot[k] = p as u8;
                        }
                        keys.push((
                            key_hash(g, &m),
                            IndexEntry {
                                scene: si as u32,
                                subgraph: gi as u32,
                                mask: slot,
                            },
                        ));
                    }
                }
                (subs, keys)
            })
            .collect();
        let mut index = MaskedIndex {
            limits,
            subgraphs: Vec::with_capacity(scenes.len()),
            keys: HashMap::new(),
        };
        for (subs, keys) in per_scene {
            index.subgraphs.push(subs);
            for (k, e) in keys {
                index.keys.entry(k).or_default().push(e);
            }
        }
        index
    }

    pub fn scene_count(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Enumerated subgraphs of one scene, in canonical order.
    pub fn subgraphs(&self, scene: usize) -> &[Subgraph] {
        &self.subgraphs[scene]
    }

    pub fn entry_subgraph(&self, e: &IndexEntry) -> &Subgraph {
        &self.subgraphs[e.scene as usize][e.subgraph as usize]
    }

    /// Entries filed under a masked key text (see [`Subgraph::masked_key`]).
    pub fn lookup(&self, key: &str) -> &[IndexEntry] {
        self.keys.get(&stable_hash(key)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Scenes whose enumeration contains `g` exactly.
    pub fn exact(&self, g: &Subgraph) -> BTreeSet<usize> {
        self.keys
            .get(&key_hash(g, &[]))
            .into_iter()
            .flatten()
            .filter(|e| e.mask[0] == u8::MAX && self.entry_subgraph(e) == g)
            .map(|e| e.scene as usize)
            .collect()
    }

    /// Distinct (scene, subgraph) pairs sharing a 1- or 2-masked key with `g`.
    /// This is a superset of every witness at distance 1 or 2.
    pub fn near(&self, g: &Subgraph) -> Vec<(usize, usize)> {
        let mut out = BTreeSet::new();
        for m in masks(g.node_count()).into_iter().filter(|m| !m.is_empty()) {
            if let Some(entries) = self.keys.get(&key_hash(g, &m)) {
                for e in entries {
                    if e.masked_positions().len() == m.len() {
                        out.insert((e.scene as usize, e.subgraph as usize));
                    }
                }
            }
        }
        out.into_iter().collect()
    }
}

mod key_table {
    use std::collections::HashMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::IndexEntry;

    pub fn serialize<S: Serializer>(map: &HashMap<u64, Vec<IndexEntry>>, s: S) -> Result<S::Ok, S::Error> {
        let mut rows: Vec<(&u64, &Vec<IndexEntry>)> = map.iter().collect();
        rows.sort_by_key(|r| *r.0);
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<HashMap<u64, Vec<IndexEntry>>, D::Error> {
        let rows: Vec<(u64, Vec<IndexEntry>)> = Vec::deserialize(d)?;
        Ok(rows.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scene_str;

    const F1: &str = include_str!("../tests/fixtures/f1.jsonl");

    #[test]
    fn wildcard_probe_finds_both_men() {
        let scenes = parse_scene_str(F1).unwrap();
        let index = MaskedIndex::build(&scenes, EnumerationLimits { max_objects: 3 });
        let g = Subgraph::parse("<man(wearing<jeans>)>").unwrap();
        let hits: BTreeSet<String> = index
            .lookup(&g.masked_key(&[2]))
            .iter()
            .map(|e| format!("{}:{}", scenes[e.scene as usize].image_id(), index.entry_subgraph(e)))
            .collect();
        assert_eq!(
            hits,
            BTreeSet::from(["img1:<man(wearing<jeans>)>".to_string(), "img2:<man(wearing<shorts>)>".to_string()])
        );
    }

    #[test]
    fn empty_corpus() {
        let index = MaskedIndex::build(&[], EnumerationLimits::default());
        assert!(index.is_empty());
        assert_eq!(index.scene_count(), 0);
    }

    #[test]
    fn exact_lookup_and_round_trip() {
        let scenes = parse_scene_str(F1).unwrap();
        let index = MaskedIndex::build(&scenes, EnumerationLimits::default());
        let g = Subgraph::parse("<book(on<table[wood]>)>").unwrap();
        assert_eq!(index.exact(&g), BTreeSet::from([2]));
        let json = serde_json::to_string(&index).unwrap();
        let back: MaskedIndex = serde_json::from_str(&json).unwrap();
        assert_eq!(back, index);
    }

    #[test]
    fn mask_counts() {
        assert_eq!(masks(4).len(), 1 + 4 + 6);
    }
}
