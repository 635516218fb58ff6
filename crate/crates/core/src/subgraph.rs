//! Rooted pattern graphs over scene-graph node types.
//!
//! A pattern is a tree: an object may carry at most one attribute and at
//! most two relations, every relation points at exactly one object and may
//! carry relation modifiers, each pointing at exactly one object. Paths from
//! the root cross at most two relation nodes.
//!
//! Patterns are kept in canonical order (children sorted by their rendered
//! text), so the canonical text is an isomorphism invariant and preorder node
//! positions are stable.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAX_RELATIONS_PER_OBJECT: usize = 2;
pub const MAX_RELATION_DEPTH: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternObject {
    pub name: String,
    pub attribute: Option<String>,
    pub relations: Vec<RelationPattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationPattern {
    pub name: String,
    pub target: PatternObject,
    pub modifiers: Vec<ModifierPattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModifierPattern {
    pub name: String,
    pub target: PatternObject,
}

impl PatternObject {
    pub fn new(name: impl Into<String>) -> Self {
        PatternObject {
            name: name.into(),
            attribute: None,
            relations: Vec::new(),
        }
    }

    pub fn attr(mut self, value: impl Into<String>) -> Self {
        self.attribute = Some(value.into());
        self
    }

    pub fn rel(mut self, name: impl Into<String>, target: PatternObject) -> Self {
        self.relations.push(RelationPattern {
            name: name.into(),
            target,
            modifiers: Vec::new(),
        });
        self
    }

    /// Adds a relation carrying one modifier.
    pub fn rel_with(
        mut self,
        name: impl Into<String>,
        target: PatternObject,
        modifier: impl Into<String>,
        modifier_target: PatternObject,
    ) -> Self {
        self.relations.push(RelationPattern {
            name: name.into(),
            target,
            modifiers: vec![ModifierPattern {
                name: modifier.into(),
                target: modifier_target,
            }],
        });
        self
    }

    fn canonicalize(&mut self) {
        for r in &mut self.relations {
            r.target.canonicalize();
            for m in &mut r.modifiers {
                m.target.canonicalize();
            }
            r.modifiers.sort_by_cached_key(render_modifier);
        }
        self.relations.sort_by_cached_key(render_relation);
    }

    fn size(&self) -> usize {
        1 + usize::from(self.attribute.is_some()) + self.relations.iter().map(RelationPattern::size).sum::<usize>()
    }

    fn relation_depth(&self) -> usize {
        self.relations
            .iter()
            .map(|r| {
                let below = std::iter::once(&r.target)
                    .chain(r.modifiers.iter().map(|m| &m.target))
                    .map(PatternObject::relation_depth)
                    .max()
                    .unwrap_or(0);
                1 + below
            })
            .max()
            .unwrap_or(0)
    }

    fn objects(&self) -> usize {
        1 + self
            .relations
            .iter()
            .map(|r| r.target.objects() + r.modifiers.iter().map(|m| m.target.objects()).sum::<usize>())
            .sum::<usize>()
    }
}

impl RelationPattern {
    fn size(&self) -> usize {
        1 + self.target.size() + self.modifiers.iter().map(|m| 1 + m.target.size()).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Object,
    Attribute,
    Relation,
    Modifier,
}

impl NodeKind {
    pub fn tag(self) -> &'static str {
        match self {
            NodeKind::Object => "object",
            NodeKind::Attribute => "attribute",
            NodeKind::Relation => "relation",
            NodeKind::Modifier => "rel-mod",
        }
    }
}

/// One node of a pattern in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo<'a> {
    pub kind: NodeKind,
    pub name: &'a str,
    pub parent: Option<usize>,
}

/// A valid pattern in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subgraph {
    root: PatternObject,
}

impl Subgraph {
    /// Canonicalizes and validates.
    pub fn new(root: PatternObject) -> Result<Self, ValidityReport> {
        let report = validate_subgraph(&ShapeObject::from(&root));
        if !report.is_valid() {
            return Err(report);
        }
        Ok(Self::new_unchecked(root))
    }

    /// Canonicalizes without validating. Callers must construct valid shapes.
    pub(crate) fn new_unchecked(mut root: PatternObject) -> Self {
        root.canonicalize();
        Subgraph { root }
    }

    pub fn single(name: impl Into<String>) -> Self {
        Self::new_unchecked(PatternObject::new(name))
    }

    pub fn root(&self) -> &PatternObject {
        &self.root
    }

    pub fn into_root(self) -> PatternObject {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.root.size()
    }

    pub fn object_count(&self) -> usize {
        self.root.objects()
    }

    /// Largest number of relation nodes on a root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.root.relation_depth()
    }

    pub fn relation_count(&self) -> usize {
        self.nodes().iter().filter(|n| n.kind == NodeKind::Relation).count()
    }

    pub fn attribute_count(&self) -> usize {
        self.nodes().iter().filter(|n| n.kind == NodeKind::Attribute).count()
    }

    pub fn has_modifier(&self) -> bool {
        self.nodes().iter().any(|n| n.kind == NodeKind::Modifier)
    }

    /// Some object has two outgoing relations.
    pub fn has_v_shape(&self) -> bool {
        fn walk(o: &PatternObject) -> bool {
            o.relations.len() >= 2
                || o.relations.iter().any(|r| {
                    walk(&r.target) || r.modifiers.iter().any(|m| walk(&m.target))
                })
        }
        walk(&self.root)
    }

    /// A relation hangs below another relation.
    pub fn has_chain(&self) -> bool {
        self.depth() >= 2
    }

    /// Preorder: object, its attribute, then per relation the relation node,
    /// its target subtree, and each modifier followed by its target subtree.
    pub fn nodes(&self) -> Vec<NodeInfo<'_>> {
        fn visit<'a>(o: &'a PatternObject, parent: Option<usize>, out: &mut Vec<NodeInfo<'a>>) {
            let me = out.len();
            out.push(NodeInfo {
                kind: NodeKind::Object,
                name: &o.name,
                parent,
            });
            if let Some(a) = &o.attribute {
                out.push(NodeInfo {
                    kind: NodeKind::Attribute,
                    name: a,
                    parent: Some(me),
                });
            }
            for r in &o.relations {
                let rp = out.len();
                out.push(NodeInfo {
                    kind: NodeKind::Relation,
                    name: &r.name,
                    parent: Some(me),
                });
                visit(&r.target, Some(rp), out);
                for m in &r.modifiers {
                    let mp = out.len();
                    out.push(NodeInfo {
                        kind: NodeKind::Modifier,
                        name: &m.name,
                        parent: Some(rp),
                    });
                    visit(&m.target, Some(mp), out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.node_count());
        visit(&self.root, None, &mut out);
        out
    }

    /// Positions of the object nodes, in preorder.
    pub fn object_positions(&self) -> Vec<usize> {
        self.nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Object)
            .map(|(i, _)| i)
            .collect()
    }

    /// Every position in the subtree rooted at `pos`, including `pos`.
    pub fn subtree(&self, pos: usize) -> BTreeSet<usize> {
        let nodes = self.nodes();
        let mut out = BTreeSet::new();
        out.insert(pos);
        for (i, n) in nodes.iter().enumerate().skip(pos + 1) {
            match n.parent {
                Some(p) if out.contains(&p) => {
                    out.insert(i);
                }
                _ => {}
            }
        }
        out
    }

    pub fn root_attribute_position(&self) -> Option<usize> {
        self.root.attribute.as_ref().map(|_| 1)
    }

    /// Position of the i-th root relation node.
    pub fn root_relation_position(&self, i: usize) -> Option<usize> {
        let mut pos = 1 + usize::from(self.root.attribute.is_some());
        for (j, r) in self.root.relations.iter().enumerate() {
            if j == i {
                return Some(pos);
            }
            pos += r.size();
        }
        None
    }

    /// Drops masked nodes together with everything that depends on them. A
    /// masked object takes its incoming relation or modifier with it; the
    /// root cannot be removed.
    pub fn prune(&self, mask: &BTreeSet<usize>) -> Subgraph {
        fn walk(o: &PatternObject, pos: &mut usize, mask: &BTreeSet<usize>) -> PatternObject {
            *pos += 1;
            let mut out = PatternObject::new(o.name.clone());
            if let Some(a) = &o.attribute {
                if !mask.contains(pos) {
                    out.attribute = Some(a.clone());
                }
                *pos += 1;
            }
            for r in &o.relations {
                let rel_pos = *pos;
                *pos += 1;
                let target_pos = *pos;
                let target = walk(&r.target, pos, mask);
                let mut mods = Vec::new();
                for m in &r.modifiers {
                    let mod_pos = *pos;
                    *pos += 1;
                    let mt_pos = *pos;
                    let mt = walk(&m.target, pos, mask);
                    if !mask.contains(&mod_pos) && !mask.contains(&mt_pos) {
                        mods.push(ModifierPattern {
                            name: m.name.clone(),
                            target: mt,
                        });
                    }
                }
                if !mask.contains(&rel_pos) && !mask.contains(&target_pos) {
                    out.relations.push(RelationPattern {
                        name: r.name.clone(),
                        target,
                        modifiers: mods,
                    });
                }
            }
            out
        }
        let mut pos = 0;
        Subgraph::new_unchecked(walk(&self.root, &mut pos, mask))
    }

    /// Same shape with the name at `pos` replaced.
    pub fn with_name(&self, pos: usize, name: &str) -> Subgraph {
        self.map_names(|p, _, n| if p == pos { name.to_string() } else { n.to_string() })
    }

    /// Rebuilds the tree with every node name passed through `f(position,
    /// kind, name)`.
    pub fn map_names(&self, mut f: impl FnMut(usize, NodeKind, &str) -> String) -> Subgraph {
        fn walk(
            o: &PatternObject,
            pos: &mut usize,
            f: &mut dyn FnMut(usize, NodeKind, &str) -> String,
        ) -> PatternObject {
            let mut out = PatternObject::new(f(*pos, NodeKind::Object, &o.name));
            *pos += 1;
            if let Some(a) = &o.attribute {
                out.attribute = Some(f(*pos, NodeKind::Attribute, a));
                *pos += 1;
            }
            for r in &o.relations {
                let name = f(*pos, NodeKind::Relation, &r.name);
                *pos += 1;
                let target = walk(&r.target, pos, f);
                let mut modifiers = Vec::new();
                for m in &r.modifiers {
                    let mname = f(*pos, NodeKind::Modifier, &m.name);
                    *pos += 1;
                    modifiers.push(ModifierPattern {
                        name: mname,
                        target: walk(&m.target, pos, f),
                    });
                }
                out.relations.push(RelationPattern {
                    name,
                    target,
                    modifiers,
                });
            }
            out
        }
        let mut pos = 0;
        Subgraph::new_unchecked(walk(&self.root, &mut pos, &mut f))
    }

    /// Canonical text with the names at `wild` positions replaced by a
    /// wildcard. Children are re-sorted after masking, so two patterns that
    /// agree everywhere outside their masks produce the same key.
    pub fn masked_key(&self, wild: &[usize]) -> String {
        let mut pos = 0;
        render_masked(&self.root, &mut pos, wild)
    }

    pub fn canonical(&self) -> String {
        render_object(&self.root)
    }

    pub fn parse(text: &str) -> Result<Subgraph, SubgraphParseError> {
        let mut p = TextParser {
            chars: text.chars().collect(),
            at: 0,
        };
        let root = p.object()?;
        if p.at != p.chars.len() {
            return Err(p.error("trailing input"));
        }
        Subgraph::new(root).map_err(|r| SubgraphParseError {
            offset: 0,
            message: r.to_string(),
        })
    }
}

impl fmt::Display for Subgraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl Serialize for Subgraph {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for Subgraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Subgraph::parse(&text).map_err(serde::de::Error::custom)
    }
}

const SPECIAL: &[char] = &['<', '>', '[', ']', '(', ')', ',', '\\', '*'];

fn push_escaped(out: &mut String, name: &str) {
    for c in name.chars() {
        if SPECIAL.contains(&c) {
            out.push('\\');
        }
        out.push(c);
    }
}

fn render_object(o: &PatternObject) -> String {
    let mut out = String::from("<");
    push_escaped(&mut out, &o.name);
    if let Some(a) = &o.attribute {
        out.push('[');
        push_escaped(&mut out, a);
        out.push(']');
    }
    for r in &o.relations {
        out.push_str(&render_relation(r));
    }
    out.push('>');
    out
}

fn render_relation(r: &RelationPattern) -> String {
    let mut out = String::from("(");
    push_escaped(&mut out, &r.name);
    out.push_str(&render_object(&r.target));
    for m in &r.modifiers {
        out.push(',');
        out.push_str(&render_modifier(m));
    }
    out.push(')');
    out
}

fn render_modifier(m: &ModifierPattern) -> String {
    let mut out = String::new();
    push_escaped(&mut out, &m.name);
    out.push_str(&render_object(&m.target));
    out
}

fn push_label(out: &mut String, name: &str, pos: usize, wild: &[usize]) {
    if wild.contains(&pos) {
        out.push('*');
    } else {
        push_escaped(out, name);
    }
}

fn render_masked(o: &PatternObject, pos: &mut usize, wild: &[usize]) -> String {
    let mut out = String::from("<");
    push_label(&mut out, &o.name, *pos, wild);
    *pos += 1;
    if let Some(a) = &o.attribute {
        out.push('[');
        push_label(&mut out, a, *pos, wild);
        out.push(']');
        *pos += 1;
    }
    let mut rels = Vec::with_capacity(o.relations.len());
    for r in &o.relations {
        let mut s = String::from("(");
        push_label(&mut s, &r.name, *pos, wild);
        *pos += 1;
        s.push_str(&render_masked(&r.target, pos, wild));
        let mut mods = Vec::with_capacity(r.modifiers.len());
        for m in &r.modifiers {
            let mut ms = String::new();
            push_label(&mut ms, &m.name, *pos, wild);
            *pos += 1;
            ms.push_str(&render_masked(&m.target, pos, wild));
            mods.push(ms);
        }
        mods.sort();
        for m in mods {
            s.push(',');
            s.push_str(&m);
        }
        s.push(')');
        rels.push(s);
    }
    rels.sort();
    for r in rels {
        out.push_str(&r);
    }
    out.push('>');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("subgraph text at offset {offset}: {message}")]
pub struct SubgraphParseError {
    pub offset: usize,
    pub message: String,
}

struct TextParser {
    chars: Vec<char>,
    at: usize,
}

impl TextParser {
    fn error(&self, message: &str) -> SubgraphParseError {
        SubgraphParseError {
            offset: self.at,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), SubgraphParseError> {
        if self.peek() == Some(c) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn name(&mut self) -> Result<String, SubgraphParseError> {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c == '\\' {
                self.at += 1;
                let esc = self.peek().ok_or_else(|| self.error("dangling escape"))?;
                out.push(esc);
                self.at += 1;
            } else if SPECIAL.contains(&c) {
                break;
            } else {
                out.push(c);
                self.at += 1;
            }
        }
        if out.is_empty() {
            return Err(self.error("empty name"));
        }
        Ok(out)
    }

    fn object(&mut self) -> Result<PatternObject, SubgraphParseError> {
        self.expect('<')?;
        let mut o = PatternObject::new(self.name()?);
        if self.peek() == Some('[') {
            self.at += 1;
            o.attribute = Some(self.name()?);
            self.expect(']')?;
        }
        while self.peek() == Some('(') {
            self.at += 1;
            let name = self.name()?;
            let target = self.object()?;
            let mut modifiers = Vec::new();
            while self.peek() == Some(',') {
                self.at += 1;
                let mname = self.name()?;
                modifiers.push(ModifierPattern {
                    name: mname,
                    target: self.object()?,
                });
            }
            self.expect(')')?;
            o.relations.push(RelationPattern {
                name,
                target,
                modifiers,
            });
        }
        self.expect('>')?;
        Ok(o)
    }
}

// ---------------------------------------------------------------------------
// Validation over loosely shaped candidates.

/// A candidate pattern that may break the structural rules: any number of
/// attributes, relation targets and modifier targets.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShapeObject {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub relations: Vec<ShapeRelation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShapeRelation {
    pub name: String,
    #[serde(default)]
    pub targets: Vec<ShapeObject>,
    #[serde(default)]
    pub modifiers: Vec<ShapeModifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShapeModifier {
    pub name: String,
    #[serde(default)]
    pub targets: Vec<ShapeObject>,
}

impl From<&PatternObject> for ShapeObject {
    fn from(o: &PatternObject) -> Self {
        ShapeObject {
            name: o.name.clone(),
            attributes: o.attribute.iter().cloned().collect(),
            relations: o
                .relations
                .iter()
                .map(|r| ShapeRelation {
                    name: r.name.clone(),
                    targets: vec![ShapeObject::from(&r.target)],
                    modifiers: r
                        .modifiers
                        .iter()
                        .map(|m| ShapeModifier {
                            name: m.name.clone(),
                            targets: vec![ShapeObject::from(&m.target)],
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl ShapeObject {
    /// Converts a candidate that passes validation.
    pub fn to_subgraph(&self) -> Result<Subgraph, ValidityReport> {
        let report = validate_subgraph(self);
        if !report.is_valid() {
            return Err(report);
        }
        fn conv(o: &ShapeObject) -> PatternObject {
            PatternObject {
                name: o.name.clone(),
                attribute: o.attributes.first().cloned(),
                relations: o
                    .relations
                    .iter()
                    .map(|r| RelationPattern {
                        name: r.name.clone(),
                        target: conv(&r.targets[0]),
                        modifiers: r
                            .modifiers
                            .iter()
                            .map(|m| ModifierPattern {
                                name: m.name.clone(),
                                target: conv(&m.targets[0]),
                            })
                            .collect(),
                    })
                    .collect(),
            }
        }
        Ok(Subgraph::new_unchecked(conv(self)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeRule {
    EmptyName,
    RelationFanOut,
    AttributeCount,
    SingleTarget,
    DuplicateModifier,
    RelationDepth,
}

impl fmt::Display for ShapeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeRule::EmptyName => "every node needs a nonempty name",
            ShapeRule::RelationFanOut => "an object has at most 2 relations",
            ShapeRule::AttributeCount => "an object has at most 1 attribute",
            ShapeRule::SingleTarget => "a relation or rel-mod points at exactly one object",
            ShapeRule::DuplicateModifier => "a relation has at most one rel-mod per name",
            ShapeRule::RelationDepth => "a root-to-leaf path crosses at most 2 relations",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: ShapeRule,
    /// Name of the offending node.
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violation: Option<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }

    pub fn rule(&self) -> Option<ShapeRule> {
        self.violation.as_ref().map(|v| v.rule)
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => f.write_str("valid"),
            Some(v) => write!(f, "invalid at \"{}\": {}", v.node, v.rule),
        }
    }
}

/// Checks the structural rules in preorder and reports the first violation.
pub fn validate_subgraph(candidate: &ShapeObject) -> ValidityReport {
    fn check(o: &ShapeObject, relations_above: usize) -> Option<Violation> {
        let fail = |rule, node: &str| {
            Some(Violation {
                rule,
                node: node.to_string(),
            })
        };
        if o.name.is_empty() || o.attributes.iter().any(String::is_empty) {
            return fail(ShapeRule::EmptyName, &o.name);
        }
        if o.relations.len() > MAX_RELATIONS_PER_OBJECT {
            return fail(ShapeRule::RelationFanOut, &o.name);
        }
        if o.attributes.len() > 1 {
            return fail(ShapeRule::AttributeCount, &o.name);
        }
        for r in &o.relations {
            if r.name.is_empty() {
                return fail(ShapeRule::EmptyName, &o.name);
            }
            if r.targets.len() != 1 {
                return fail(ShapeRule::SingleTarget, &r.name);
            }
            if relations_above + 1 > MAX_RELATION_DEPTH {
                return fail(ShapeRule::RelationDepth, &r.name);
            }
            let mut names = BTreeSet::new();
            for m in &r.modifiers {
                if m.name.is_empty() {
                    return fail(ShapeRule::EmptyName, &r.name);
                }
                if m.targets.len() != 1 {
                    return fail(ShapeRule::SingleTarget, &m.name);
                }
                if !names.insert(m.name.as_str()) {
                    return fail(ShapeRule::DuplicateModifier, &m.name);
                }
            }
            if let Some(v) = check(&r.targets[0], relations_above + 1) {
                return Some(v);
            }
            for m in &r.modifiers {
                if let Some(v) = check(&m.targets[0], relations_above + 1) {
                    return Some(v);
                }
            }
        }
        None
    }
    ValidityReport {
        violation: check(candidate, 0),
    }
}
