//! Substitution-only edit distance between subgraphs.
//!
//! Two subgraphs are comparable when some type- and shape-preserving
//! isomorphism maps one onto the other. The cost of an isomorphism is the
//! number of aligned nodes whose names differ; each differing pair must be
//! allowed by the mutual exclusion lexicon, read from the first graph's name
//! to the second's.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::lexicon::{LexiconKind, MutualExclusionLexicon};
use crate::subgraph::{NodeKind, PatternObject, RelationPattern, Subgraph};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Substitution {
    /// Preorder position in the first graph.
    pub position: usize,
    /// Aligned position in the second graph.
    pub other_position: usize,
    pub kind: NodeKind,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub distance: usize,
    /// `mapping[p]` is the position in the second graph aligned with `p`.
    pub mapping: Vec<usize>,
    pub substitutions: Vec<Substitution>,
}

/// Minimum substitution count, or `None` when the graphs are incomparable.
pub fn edit_distance(g1: &Subgraph, g2: &Subgraph, lex: &MutualExclusionLexicon) -> Option<usize> {
    align(g1, g2, lex).map(|a| a.distance)
}

/// The cheapest isomorphism. Ties go to the first one in child order.
pub fn align(g1: &Subgraph, g2: &Subgraph, lex: &MutualExclusionLexicon) -> Option<Alignment> {
    if g1.node_count() != g2.node_count() {
        return None;
    }
    let mut pairs = Vec::with_capacity(g1.node_count());
    let distance = object(g1.root(), 0, g2.root(), 0, lex, &mut pairs)?;
    pairs.sort_unstable();
    let mapping: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let n1 = g1.nodes();
    let n2 = g2.nodes();
    let substitutions = pairs
        .iter()
        .filter(|(a, b)| n1[*a].name != n2[*b].name)
        .map(|&(a, b)| Substitution {
            position: a,
            other_position: b,
            kind: n1[a].kind,
            from: n1[a].name.to_string(),
            to: n2[b].name.to_string(),
        })
        .collect();
    Some(Alignment {
        distance,
        mapping,
        substitutions,
    })
}

fn label(kind: LexiconKind, a: &str, b: &str, lex: &MutualExclusionLexicon) -> Option<usize> {
    if a == b {
        Some(0)
    } else if lex.allows(kind, a, b) {
        Some(1)
    } else {
        None
    }
}

fn object_size(o: &PatternObject) -> usize {
    1 + usize::from(o.attribute.is_some()) + o.relations.iter().map(relation_size).sum::<usize>()
}

fn relation_size(r: &RelationPattern) -> usize {
    1 + object_size(&r.target) + r.modifiers.iter().map(|m| 1 + object_size(&m.target)).sum::<usize>()
}

fn object(
    a: &PatternObject,
    pa: usize,
    b: &PatternObject,
    pb: usize,
    lex: &MutualExclusionLexicon,
    out: &mut Vec<(usize, usize)>,
) -> Option<usize> {
    if a.attribute.is_some() != b.attribute.is_some() || a.relations.len() != b.relations.len() {
        return None;
    }
    let mut cost = label(LexiconKind::Object, &a.name, &b.name, lex)?;
    out.push((pa, pb));
    if let (Some(x), Some(y)) = (&a.attribute, &b.attribute) {
        cost += label(LexiconKind::Attribute, x, y, lex)?;
        out.push((pa + 1, pb + 1));
    }
    let start_a = pa + 1 + usize::from(a.attribute.is_some());
    let start_b = pb + 1 + usize::from(b.attribute.is_some());
    let offsets = |rels: &[RelationPattern], start: usize| {
        rels.iter()
            .scan(start, |p, r| {
                let here = *p;
                *p += relation_size(r);
                Some(here)
            })
            .collect::<Vec<_>>()
    };
    let oa = offsets(&a.relations, start_a);
    let ob = offsets(&b.relations, start_b);
    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    for perm in (0..b.relations.len()).permutations(b.relations.len()) {
        let mut local = Vec::new();
        let mut total = 0;
        let mut ok = true;
        for (i, &j) in perm.iter().enumerate() {
            match relation(&a.relations[i], oa[i], &b.relations[j], ob[j], lex, &mut local) {
                Some(c) => total += c,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && best.as_ref().is_none_or(|(c, _)| total < *c) {
            best = Some((total, local));
        }
    }
    let (c, local) = best?;
    out.extend(local);
    Some(cost + c)
}

fn relation(
    a: &RelationPattern,
    pa: usize,
    b: &RelationPattern,
    pb: usize,
    lex: &MutualExclusionLexicon,
    out: &mut Vec<(usize, usize)>,
) -> Option<usize> {
    if a.modifiers.len() != b.modifiers.len() {
        return None;
    }
    let mut local = Vec::new();
    let mut cost = label(LexiconKind::Relation, &a.name, &b.name, lex)?;
    local.push((pa, pb));
    cost += object(&a.target, pa + 1, &b.target, pb + 1, lex, &mut local)?;
    let offsets = |r: &RelationPattern, start: usize| {
        r.modifiers
            .iter()
            .scan(start + 1 + object_size(&r.target), |p, m| {
                let here = *p;
                *p += 1 + object_size(&m.target);
                Some(here)
            })
            .collect::<Vec<_>>()
    };
    let oa = offsets(a, pa);
    let ob = offsets(b, pb);
    let n = a.modifiers.len();
    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    for perm in (0..n).permutations(n) {
        let mut m_local = Vec::new();
        let mut total = 0;
        let mut ok = true;
        for (i, &j) in perm.iter().enumerate() {
            let (ma, mb) = (&a.modifiers[i], &b.modifiers[j]);
            let step = label(LexiconKind::Relation, &ma.name, &mb.name, lex).and_then(|c| {
                m_local.push((oa[i], ob[j]));
                object(&ma.target, oa[i] + 1, &mb.target, ob[j] + 1, lex, &mut m_local).map(|t| c + t)
            });
            match step {
                Some(c) => total += c,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && best.as_ref().is_none_or(|(c, _)| total < *c) {
            best = Some((total, m_local));
        }
    }
    let (c, m_local) = best?;
    out.extend(local);
    out.extend(m_local);
    Some(cost + c)
}
