//! Subgraph containment and exhaustive subgraph enumeration over one scene.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scene::SceneGraph;
use crate::subgraph::{ModifierPattern, PatternObject, RelationPattern, Subgraph, MAX_RELATION_DEPTH, MAX_RELATIONS_PER_OBJECT};

/// Witness of containment: pattern object positions mapped to object ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub objects: Vec<(usize, String)>,
}

impl Assignment {
    pub fn root(&self) -> &str {
        &self.objects[0].1
    }
}

enum Step<'a> {
    Root {
        pattern: &'a PatternObject,
    },
    RelationTarget {
        parent: usize,
        relation: usize,
        name: &'a str,
        pattern: &'a PatternObject,
    },
    ModifierTarget {
        relation: usize,
        name: &'a str,
        pattern: &'a PatternObject,
    },
}

impl Step<'_> {
    fn pattern(&self) -> &PatternObject {
        match self {
            Step::Root { pattern } | Step::RelationTarget { pattern, .. } | Step::ModifierTarget { pattern, .. } => {
                pattern
            }
        }
    }
}

/// Object nodes in preorder, each with the edge it hangs from. Slots index
/// the preorder object list; relation slots index relation nodes.
struct Plan<'a> {
    steps: Vec<Step<'a>>,
    positions: Vec<usize>,
    relations: usize,
}

fn plan(g: &Subgraph) -> Plan<'_> {
    fn visit<'a>(o: &'a PatternObject, pos: &mut usize, plan: &mut Plan<'a>, me: usize) {
        *pos += 1 + usize::from(o.attribute.is_some());
        for r in &o.relations {
            let rel = plan.relations;
            plan.relations += 1;
            *pos += 1;
            let slot = plan.steps.len();
            plan.positions.push(*pos);
            plan.steps.push(Step::RelationTarget {
                parent: me,
                relation: rel,
                name: &r.name,
                pattern: &r.target,
            });
            visit(&r.target, pos, plan, slot);
            for m in &r.modifiers {
                *pos += 1;
                let slot = plan.steps.len();
                plan.positions.push(*pos);
                plan.steps.push(Step::ModifierTarget {
                    relation: rel,
                    name: &m.name,
                    pattern: &m.target,
                });
                visit(&m.target, pos, plan, slot);
            }
        }
    }
    let mut p = Plan {
        steps: vec![Step::Root { pattern: g.root() }],
        positions: vec![0],
        relations: 0,
    };
    let mut pos = 0;
    visit(g.root(), &mut pos, &mut p, 0);
    p
}

fn node_fits(scene: &SceneGraph, obj: usize, p: &PatternObject) -> bool {
    let o = scene.object(obj);
    o.name == p.name && p.attribute.as_ref().is_none_or(|a| o.has_attribute(a))
}

struct Search<'a> {
    scene: &'a SceneGraph,
    plan: Plan<'a>,
    objects: Vec<usize>,
    edges: Vec<(usize, usize)>,
    used: Vec<bool>,
}

impl Search<'_> {
    /// Visits every complete injective assignment; stops early when `f`
    /// returns false.
    fn run(&mut self, slot: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if slot == self.plan.steps.len() {
            return f(&self.objects);
        }
        let candidates: Vec<(usize, Option<(usize, usize)>)> = match &self.plan.steps[slot] {
            Step::Root { .. } => (0..self.scene.len()).map(|i| (i, None)).collect(),
            Step::RelationTarget { parent, name, .. } => {
                let subject = self.objects[*parent];
                self.scene
                    .object(subject)
                    .relations
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.name == *name)
                    .filter_map(|(ei, e)| self.scene.index_of(&e.target).map(|t| (t, Some((subject, ei)))))
                    .collect()
            }
            Step::ModifierTarget { relation, name, .. } => {
                let (subject, ei) = self.edges[*relation];
                let edge = &self.scene.object(subject).relations[ei];
                edge.modifier(name)
                    .and_then(|m| self.scene.index_of(&m.target))
                    .map(|t| vec![(t, None)])
                    .unwrap_or_default()
            }
        };
        let relation = match &self.plan.steps[slot] {
            Step::RelationTarget { relation, .. } => Some(*relation),
            _ => None,
        };
        for (obj, edge) in candidates {
            if self.used[obj] || !node_fits(self.scene, obj, self.plan.steps[slot].pattern()) {
                continue;
            }
            self.used[obj] = true;
            self.objects.push(obj);
            if let (Some(r), Some(e)) = (relation, edge) {
                self.edges[r] = e;
            }
            let go_on = self.run(slot + 1, f);
            self.objects.pop();
            self.used[obj] = false;
            if !go_on {
                return false;
            }
        }
        true
    }
}

fn search<'a>(g: &'a Subgraph, scene: &'a SceneGraph) -> Search<'a> {
    let plan = plan(g);
    let rels = plan.relations;
    Search {
        scene,
        plan,
        objects: Vec::new(),
        edges: vec![(0, 0); rels],
        used: vec![false; scene.len()],
    }
}

/// All injective assignments of `g`'s objects into `scene`.
pub fn match_subgraph(g: &Subgraph, scene: &SceneGraph) -> Vec<Assignment> {
    let mut s = search(g, scene);
    let positions = s.plan.positions.clone();
    let mut out = Vec::new();
    s.run(0, &mut |objs| {
        out.push(Assignment {
            objects: positions
                .iter()
                .zip(objs)
                .map(|(p, &o)| (*p, scene.object(o).id.clone()))
                .collect(),
        });
        true
    });
    out
}

pub fn contains(g: &Subgraph, scene: &SceneGraph) -> bool {
    let mut s = search(g, scene);
    let mut found = false;
    s.run(0, &mut |_| {
        found = true;
        false
    });
    found
}

/// Distinct scene objects the root can map to, in scene order.
pub fn root_matches(g: &Subgraph, scene: &SceneGraph) -> Vec<usize> {
    let mut s = search(g, scene);
    let mut roots = std::collections::BTreeSet::new();
    s.run(0, &mut |objs| {
        roots.insert(objs[0]);
        true
    });
    roots.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub max_objects: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits { max_objects: 4 }
    }
}

type Grown = (PatternObject, Vec<usize>);

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| !b.contains(x))
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

/// Every pattern rooted at `obj` that uses no object in `above`, at most
/// `cap` objects, and relation depth at most `depth_left`.
fn grow(scene: &SceneGraph, obj: usize, depth_left: usize, above: &[usize], cap: usize, memo: &mut BTreeMap<(usize, usize, Vec<usize>, usize), Vec<Grown>>) -> Vec<Grown> {
    let key = (obj, depth_left, above.to_vec(), cap);
    if let Some(hit) = memo.get(&key) {
        return hit.clone();
    }
    let node = scene.object(obj);
    let mut with_me = above.to_vec();
    with_me.push(obj);

    // Options per outgoing edge: the relation pattern and the objects it uses.
    let mut per_edge: Vec<Vec<(RelationPattern, Vec<usize>)>> = Vec::new();
    if depth_left > 0 && cap > 1 {
        for edge in &node.relations {
            let Some(t) = scene.index_of(&edge.target) else { continue };
            if with_me.contains(&t) {
                per_edge.push(Vec::new());
                continue;
            }
            let mut options: Vec<(RelationPattern, Vec<usize>)> = Vec::new();
            for (target, used) in grow(scene, t, depth_left - 1, &with_me, cap - 1, memo) {
                options.push((
                    RelationPattern {
                        name: edge.name.clone(),
                        target,
                        modifiers: Vec::new(),
                    },
                    used,
                ));
            }
            for m in &edge.modifiers {
                let Some(mt) = scene.index_of(&m.target) else { continue };
                if with_me.contains(&mt) {
                    continue;
                }
                let mut extended = Vec::new();
                for (rel, used) in &options {
                    if used.contains(&mt) || used.len() >= cap - 1 {
                        continue;
                    }
                    let mut blocked = with_me.clone();
                    blocked.extend_from_slice(used);
                    for (mtarget, mused) in grow(scene, mt, depth_left - 1, &blocked, cap - 1 - used.len(), memo) {
                        let mut r = rel.clone();
                        r.modifiers.push(ModifierPattern {
                            name: m.name.clone(),
                            target: mtarget,
                        });
                        extended.push((r, union(used, &mused)));
                    }
                }
                options.extend(extended);
            }
            per_edge.push(options);
        }
    }

    let mut relation_sets: Vec<(Vec<RelationPattern>, Vec<usize>)> = vec![(Vec::new(), Vec::new())];
    for (i, a) in per_edge.iter().enumerate() {
        for (ra, ua) in a {
            relation_sets.push((vec![ra.clone()], ua.clone()));
        }
        if MAX_RELATIONS_PER_OBJECT >= 2 {
            for b in per_edge.iter().skip(i + 1) {
                for (ra, ua) in a {
                    for (rb, ub) in b {
                        if disjoint(ua, ub) && ua.len() + ub.len() < cap {
                            relation_sets.push((vec![ra.clone(), rb.clone()], union(ua, ub)));
                        }
                    }
                }
            }
        }
    }

    let attrs: Vec<Option<String>> = std::iter::once(None)
        .chain(node.attributes.iter().cloned().map(Some))
        .collect();
    let mut out = Vec::new();
    for attribute in &attrs {
        for (relations, used) in &relation_sets {
            let mut objs = vec![obj];
            objs.extend_from_slice(used);
            out.push((
                PatternObject {
                    name: node.name.clone(),
                    attribute: attribute.clone(),
                    relations: relations.clone(),
                },
                objs,
            ));
        }
    }
    memo.insert(key, out.clone());
    out
}

/// Every valid subgraph contained in `scene` with at most
/// `limits.max_objects` object nodes, deduplicated, in canonical text order.
pub fn enumerate_subgraphs(scene: &SceneGraph, limits: EnumerationLimits) -> Vec<Subgraph> {
    if limits.max_objects == 0 {
        return Vec::new();
    }
    let mut memo = BTreeMap::new();
    let mut found: BTreeMap<String, Subgraph> = BTreeMap::new();
    for obj in 0..scene.len() {
        for (pattern, _) in grow(scene, obj, MAX_RELATION_DEPTH, &[], limits.max_objects, &mut memo) {
            let g = Subgraph::new_unchecked(pattern);
            found.entry(g.canonical()).or_insert(g);
        }
    }
    found.into_values().collect()
}
