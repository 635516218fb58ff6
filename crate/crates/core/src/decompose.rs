//! Decomposition of a subgraph into simple pieces: at most two objects, one
//! relation and one attribute. Absence of a subgraph in an image is checked
//! piece by piece.

use std::collections::BTreeSet;

use crate::subgraph::{NodeKind, PatternObject, Subgraph};

/// A simple piece and the positions of the source subgraph it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplePiece {
    pub subgraph: Subgraph,
    pub covers: BTreeSet<usize>,
}

/// Pieces with their coverage, one per relation (two when both endpoints
/// carry attributes) plus one per relation modifier.
///
/// A rel-mod cannot stand without its relation's target, so the piece for a
/// modifier carries three objects: subject, relation target and modifier
/// target. It is the only kind of piece that exceeds two objects.
pub fn simple_pieces(g: &Subgraph) -> Vec<SimplePiece> {
    let nodes = g.nodes();
    if g.relation_count() == 0 {
        return vec![SimplePiece {
            subgraph: g.clone(),
            covers: (0..nodes.len()).collect(),
        }];
    }
    let attribute_of = |obj: usize| {
        nodes
            .iter()
            .enumerate()
            .find(|(_, n)| n.kind == NodeKind::Attribute && n.parent == Some(obj))
            .map(|(i, n)| (i, n.name.to_string()))
    };
    let target_of = |parent: usize| {
        nodes
            .iter()
            .enumerate()
            .find(|(_, n)| n.kind == NodeKind::Object && n.parent == Some(parent))
            .map(|(i, _)| i)
            .expect("relation and rel-mod nodes have a target")
    };

    let mut out: Vec<SimplePiece> = Vec::new();
    let mut push = |piece: SimplePiece| {
        if !out.contains(&piece) {
            out.push(piece);
        }
    };
    for (rp, rel) in nodes.iter().enumerate() {
        if rel.kind != NodeKind::Relation {
            continue;
        }
        let sp = rel.parent.expect("relation has a subject");
        let tp = target_of(rp);
        let subject = nodes[sp].name;
        let target = nodes[tp].name;
        let sa = attribute_of(sp);
        let ta = attribute_of(tp);
        let build = |s_attr: Option<&(usize, String)>, t_attr: Option<&(usize, String)>| {
            let mut s = PatternObject::new(subject);
            s.attribute = s_attr.map(|a| a.1.clone());
            let mut t = PatternObject::new(target);
            t.attribute = t_attr.map(|a| a.1.clone());
            let mut covers = BTreeSet::from([sp, rp, tp]);
            covers.extend(s_attr.map(|a| a.0));
            covers.extend(t_attr.map(|a| a.0));
            SimplePiece {
                subgraph: Subgraph::new_unchecked(s.rel(rel.name, t)),
                covers,
            }
        };
        match (&sa, &ta) {
            (Some(_), Some(_)) => {
                push(build(sa.as_ref(), None));
                push(build(None, ta.as_ref()));
            }
            _ => push(build(sa.as_ref(), ta.as_ref())),
        }
        for (mp, m) in nodes.iter().enumerate() {
            if m.kind != NodeKind::Modifier || m.parent != Some(rp) {
                continue;
            }
            let up = target_of(mp);
            let ua = attribute_of(up);
            let mut u = PatternObject::new(nodes[up].name);
            u.attribute = ua.as_ref().map(|a| a.1.clone());
            let mut covers = BTreeSet::from([sp, rp, tp, mp, up]);
            covers.extend(ua.as_ref().map(|a| a.0));
            let piece = PatternObject::new(subject).rel_with(rel.name, PatternObject::new(target), m.name, u);
            push(SimplePiece {
                subgraph: Subgraph::new_unchecked(piece),
                covers,
            });
        }
    }
    out
}

/// The distinct simple pieces of `g`, in canonical text order.
pub fn decompose_simple(g: &Subgraph) -> Vec<Subgraph> {
    let mut seen: Vec<Subgraph> = simple_pieces(g).into_iter().map(|p| p.subgraph).collect();
    seen.sort_by_key(Subgraph::canonical);
    seen.dedup();
    seen
}

pub fn is_simple(g: &Subgraph) -> bool {
    g.object_count() <= 2 && g.relation_count() <= 1 && g.attribute_count() <= 1
}
