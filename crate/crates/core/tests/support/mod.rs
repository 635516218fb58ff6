//! Fixtures, generators and brute-force reference implementations shared by
//! the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vqsynth::lexicon::{AttributeCategories, LexiconKind, MutualExclusionLexicon};
use vqsynth::program::{execute, parse_program, Answer, Arg, Operator, Program, Ref, Step, SubProgram, Value};
use vqsynth::question::{derive_tags, TemplateId};
use vqsynth::record::{ExampleRecord, Provenance};
use vqsynth::scene::{parse_scene_str, Modifier, ObjectNode, RelationEdge};
use vqsynth::subgraph::{NodeKind, PatternObject, Subgraph};
use vqsynth::SceneGraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const F1: &str = include_str!("../fixtures/f1.jsonl");
pub const SAMPLE_PROGRAM: &str = include_str!("../fixtures/sample_program.txt");

pub fn f1() -> Vec<SceneGraph> {
    parse_scene_str(F1).unwrap()
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// The dedicated corpus of a template, `tests/fixtures/templates/<Name>.jsonl`.
pub fn template_fixture(t: TemplateId) -> Vec<SceneGraph> {
    let path = fixture_dir().join("templates").join(format!("{}.jsonl", t.name()));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scene_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Random scenes

pub const NOUNS: [&str; 12] = [
    "man", "woman", "boy", "dog", "cat", "horse", "table", "cup", "book", "bottle", "shirt", "hat",
];
pub const ATTRIBUTES: [&[&str]; 5] = [
    &["black", "white", "brown", "red", "blue"],
    &["wood", "metal", "plastic"],
    &["standing", "sitting"],
    &["large", "small"],
    &["tall", "short"],
];
pub const CATEGORIES: [&str; 5] = ["color", "material", "pose", "size", "height"];
pub const RELATIONS: [&str; 6] = ["on", "holding", "wearing", "near", "next to", "riding"];
pub const MODIFIERS: [&str; 2] = ["with", "using"];

#[derive(Debug, Clone, Copy)]
pub struct SceneShape {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Relations leaving one object.
    pub max_out: usize,
    pub relation_rate: f64,
    pub attribute_rate: f64,
    pub modifier_rate: f64,
    /// Allows two values of one category on an object.
    pub ambiguous_rate: f64,
    /// Draw names from the first `nouns` entries of `NOUNS`.
    pub nouns: usize,
}

impl SceneShape {
    /// Scenes for the executor comparison: up to 8 objects and a small
    /// vocabulary so that finds hit.
    pub fn oracle() -> Self {
        SceneShape {
            min_objects: 0,
            max_objects: 8,
            max_out: 2,
            relation_rate: 0.5,
            attribute_rate: 0.35,
            modifier_rate: 0.25,
            ambiguous_rate: 0.1,
            nouns: 5,
        }
    }

    /// Scenes for end-to-end generation.
    pub fn corpus() -> Self {
        SceneShape {
            min_objects: 2,
            max_objects: 5,
            max_out: 2,
            relation_rate: 0.45,
            attribute_rate: 0.3,
            modifier_rate: 0.1,
            ambiguous_rate: 0.0,
            nouns: 8,
        }
    }
}

pub fn random_scene<R: Rng>(rng: &mut R, image_id: &str, shape: &SceneShape) -> SceneGraph {
    let n = rng.random_range(shape.min_objects..=shape.max_objects);
    let ids: Vec<String> = (0..n).map(|i| format!("{image_id}-o{i}")).collect();
    let mut objects = Vec::with_capacity(n);
    for i in 0..n {
        let name = NOUNS[rng.random_range(0..shape.nouns)].to_string();
        let mut attributes: Vec<String> = Vec::new();
        for values in ATTRIBUTES {
            if rng.random_bool(shape.attribute_rate / 2.0) {
                attributes.push(values.choose(rng).unwrap().to_string());
                if rng.random_bool(shape.ambiguous_rate) {
                    let other = values.choose(rng).unwrap().to_string();
                    if !attributes.contains(&other) {
                        attributes.push(other);
                    }
                }
            }
        }
        let mut relations: Vec<RelationEdge> = Vec::new();
        if n > 1 {
            for _ in 0..shape.max_out {
                if !rng.random_bool(shape.relation_rate) {
                    continue;
                }
                let t = loop {
                    let t = rng.random_range(0..n);
                    if t != i {
                        break t;
                    }
                };
                let name = RELATIONS.choose(rng).unwrap().to_string();
                if relations.iter().any(|r| r.name == name && r.target == ids[t]) {
                    continue;
                }
                let mut modifiers = Vec::new();
                if n > 2 && rng.random_bool(shape.modifier_rate) {
                    let m = loop {
                        let m = rng.random_range(0..n);
                        if m != i && m != t {
                            break m;
                        }
                    };
                    modifiers.push(Modifier {
                        name: MODIFIERS.choose(rng).unwrap().to_string(),
                        target: ids[m].clone(),
                    });
                }
                relations.push(RelationEdge {
                    name,
                    target: ids[t].clone(),
                    modifiers,
                });
            }
        }
        objects.push(ObjectNode {
            id: ids[i].clone(),
            name,
            attributes,
            relations,
        });
    }
    SceneGraph::new(image_id, objects).unwrap()
}

/// Complete scenes: every object, attribute and relation is annotated, so
/// exact matching decides containment.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<SceneGraph> {
    let mut r = rng(seed);
    let shape = SceneShape::corpus();
    (0..n).map(|i| random_scene(&mut r, &format!("syn{i:03}"), &shape)).collect()
}

pub fn scenes_jsonl(scenes: &[SceneGraph]) -> String {
    scenes.iter().map(|s| s.to_json_line() + "\n").collect()
}

// ---------------------------------------------------------------------------
// Brute-force containment

fn object_fits(o: &ObjectNode, p: &PatternObject) -> bool {
    o.name == p.name && p.attribute.as_ref().is_none_or(|a| o.attributes.contains(a))
}

/// Pattern objects in preorder with the edges between them.
struct Flat<'a> {
    objects: Vec<&'a PatternObject>,
    /// (subject, relation name, target, modifiers as (name, target)).
    edges: Vec<(usize, &'a str, usize, Vec<(&'a str, usize)>)>,
}

fn flatten(root: &PatternObject) -> Flat<'_> {
    fn walk<'a>(o: &'a PatternObject, f: &mut Flat<'a>) -> usize {
        let me = f.objects.len();
        f.objects.push(o);
        for r in &o.relations {
            let t = walk(&r.target, f);
            let mods = r.modifiers.iter().map(|m| (m.name.as_str(), walk(&m.target, f))).collect();
            f.edges.push((me, r.name.as_str(), t, mods));
        }
        me
    }
    let mut f = Flat {
        objects: Vec::new(),
        edges: Vec::new(),
    };
    walk(root, &mut f);
    f
}

/// Tries every injective map from pattern objects to scene objects.
pub fn brute_contains(g: &Subgraph, scene: &SceneGraph) -> bool {
    brute_assignments(g, scene, true) > 0
}

/// Number of injective maps from pattern objects to scene objects that
/// satisfy every pattern constraint; with `first`, stops at one.
pub fn brute_assignments(g: &Subgraph, scene: &SceneGraph, first: bool) -> usize {
    let flat = flatten(g.root());
    let objs = scene.objects();
    let k = flat.objects.len();
    if k > objs.len() {
        return 0;
    }
    let mut assign = vec![0usize; k];
    fn rec(i: usize, assign: &mut Vec<usize>, flat: &Flat<'_>, objs: &[ObjectNode], first: bool) -> usize {
        if i == assign.len() {
            let ok = flat.edges.iter().all(|(s, name, t, mods)| {
                let subject = &objs[assign[*s]];
                subject.relations.iter().any(|e| {
                    e.name == *name
                        && e.target == objs[assign[*t]].id
                        && mods.iter().all(|(mn, mt)| {
                            e.modifiers.iter().any(|m| m.name == *mn && m.target == objs[assign[*mt]].id)
                        })
                })
            });
            return usize::from(ok);
        }
        let mut n = 0;
        for o in 0..objs.len() {
            if assign[..i].contains(&o) || !object_fits(&objs[o], flat.objects[i]) {
                continue;
            }
            assign[i] = o;
            n += rec(i + 1, assign, flat, objs, first);
            if first && n > 0 {
                break;
            }
        }
        n
    }
    rec(0, &mut assign, &flat, objs, first)
}

// ---------------------------------------------------------------------------
// Exhaustive edit distance

/// Minimum substitution cost over every bijection of nodes that preserves
/// node kinds and the parent relation, or `None` when there is none or every
/// one needs a substitution the lexicon forbids.
pub fn brute_edit_distance(g1: &Subgraph, g2: &Subgraph, lex: &MutualExclusionLexicon) -> Option<usize> {
    let a = g1.nodes();
    let b = g2.nodes();
    if a.len() != b.len() {
        return None;
    }
    let n = a.len();
    let mut best: Option<usize> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm over all n! bijections.
    let mut c = vec![0usize; n];
    let mut check = |perm: &[usize]| {
        let mut cost = 0;
        for i in 0..n {
            let j = perm[i];
            if a[i].kind != b[j].kind || a[i].parent.map(|p| perm[p]) != b[j].parent {
                return;
            }
            if a[i].name != b[j].name {
                let kind = match a[i].kind {
                    NodeKind::Object => LexiconKind::Object,
                    NodeKind::Attribute => LexiconKind::Attribute,
                    NodeKind::Relation | NodeKind::Modifier => LexiconKind::Relation,
                };
                if !lex.allows(kind, a[i].name, b[j].name) {
                    return;
                }
                cost += 1;
            }
        }
        if best.is_none_or(|b| cost < b) {
            best = Some(cost);
        }
    };
    check(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            check(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Vocabulary for distance pools: pairs the built-in lexicon marks as
/// compatible sit next to unrelated words.
const POOL_OBJECTS: [&str; 6] = ["man", "person", "dog", "animal", "table", "desk"];
const POOL_ATTRIBUTES: [&str; 4] = ["wood", "wooden", "black", "white"];
const POOL_RELATIONS: [&str; 3] = ["on", "near", "holding"];

fn random_object<R: Rng>(rng: &mut R, budget: &mut usize, depth: usize) -> PatternObject {
    *budget -= 1;
    let mut o = PatternObject::new(*POOL_OBJECTS.choose(rng).unwrap());
    if *budget > 0 && rng.random_bool(0.4) {
        *budget -= 1;
        o.attribute = Some(POOL_ATTRIBUTES.choose(rng).unwrap().to_string());
    }
    for _ in 0..2 {
        if depth < 2 && *budget >= 2 && rng.random_bool(0.6) {
            *budget -= 1;
            let name = *POOL_RELATIONS.choose(rng).unwrap();
            let target = random_object(rng, budget, depth + 1);
            if *budget >= 2 && rng.random_bool(0.25) {
                *budget -= 1;
                let m = random_object(rng, budget, depth + 1);
                o = o.rel_with(name, target, *MODIFIERS.choose(rng).unwrap(), m);
            } else {
                o = o.rel(name, target);
            }
        }
    }
    o
}

/// A valid pattern of at most `max_nodes` nodes.
pub fn random_subgraph<R: Rng>(rng: &mut R, max_nodes: usize) -> Subgraph {
    loop {
        let mut budget = rng.random_range(1..=max_nodes);
        if let Ok(g) = Subgraph::new(random_object(rng, &mut budget, 0)) {
            return g;
        }
    }
}

/// The same tree with each name replaced, with probability `rate`, by a
/// word of the same pool.
pub fn perturb<R: Rng>(rng: &mut R, g: &Subgraph, rate: f64) -> Subgraph {
    g.map_names(|_, kind, name| {
        if !rng.random_bool(rate) {
            return name.to_string();
        }
        let pool: &[&str] = match kind {
            NodeKind::Object => &POOL_OBJECTS,
            NodeKind::Attribute => &POOL_ATTRIBUTES,
            NodeKind::Relation => &POOL_RELATIONS,
            NodeKind::Modifier => &MODIFIERS,
        };
        pool.choose(rng).unwrap().to_string()
    })
}

// ---------------------------------------------------------------------------
// Random programs

const CHOICE_WORDS: [&str; 4] = ["left", "right", "yes", "no"];
const LOCALS: [&str; 5] = ["a", "b", "c", "d", "o"];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum T {
    Objects,
    Object,
    Groups,
    Images,
    Labels,
    Bool,
    Number,
    Label,
}

fn out_type(op: Operator) -> T {
    use Operator::*;
    match op {
        Find | FindAll | Filter | WithRelation | WithRelationObject => T::Objects,
        Count => T::Number,
        GroupByImages | KeepIfValuesCountEq | KeepIfValuesCountGt | KeepIfValuesCountLt => T::Groups,
        All | Some | None | VerifyAttribute | And | Or | Eq | Gt | Lt | Geq | Leq => T::Bool,
        QueryName | QueryAttribute | Choose => T::Label,
        Unique => T::Object,
        UniqueImages => T::Images,
        UniqueAttributeValues => T::Labels,
    }
}

struct ProgramGen<'a, R> {
    rng: &'a mut R,
    names: Vec<String>,
    types: Vec<T>,
}

impl<R: Rng> ProgramGen<'_, R> {
    /// A reference to an earlier step whose type is one of `want`, biased to
    /// recent steps.
    fn pick(&mut self, want: &[T]) -> Option<usize> {
        let fits: Vec<usize> = (0..self.types.len()).filter(|&i| want.contains(&self.types[i])).collect();
        if fits.is_empty() {
            return None;
        }
        if self.rng.random_bool(0.6) {
            return fits.last().copied();
        }
        fits.choose(self.rng).copied()
    }

    fn name(&mut self) -> String {
        if self.rng.random_bool(0.1) {
            return "unicorn".into();
        }
        self.names.choose(self.rng).cloned().unwrap_or_else(|| "dog".into())
    }

    fn attribute(&mut self) -> String {
        let values = ATTRIBUTES.choose(self.rng).unwrap();
        values.choose(self.rng).unwrap().to_string()
    }

    fn category(&mut self) -> String {
        CATEGORIES.choose(self.rng).unwrap().to_string()
    }

    fn relation(&mut self) -> String {
        RELATIONS[self.rng.random_range(0..3)].to_string()
    }

    fn sub(&mut self) -> SubProgram {
        let r = |s: &str| Arg::Ref(match s {
            "x" => Ref::Var,
            l => Ref::Local(LOCALS.iter().position(|x| *x == l).unwrap()),
        });
        let lit = |s: String| Arg::Literal(s);
        let step = |i: usize, op: Operator, args: Vec<Arg>| Step {
            label: if i == usize::MAX { "o".into() } else { LOCALS[i].into() },
            op,
            args,
        };
        let last = usize::MAX;
        let steps = match self.rng.random_range(0..5) {
            0 => vec![step(last, Operator::VerifyAttribute, vec![r("x"), lit(self.attribute())])],
            1 => vec![
                step(0, Operator::Find, vec![lit(self.name())]),
                step(1, Operator::WithRelation, vec![r("x"), r("a"), lit(self.relation())]),
                step(2, Operator::Count, vec![r("b")]),
                step(last, Operator::Gt, vec![r("c"), Arg::Number(0)]),
            ],
            2 => vec![
                step(0, Operator::Filter, vec![r("x"), lit(self.attribute())]),
                step(1, Operator::Count, vec![r("a")]),
                step(last, Operator::Eq, vec![r("b"), Arg::Number(1)]),
            ],
            3 => {
                let top = self.pick(&[T::Objects, T::Object]);
                let k = self.rng.random_range(0..3);
                let target = match top {
                    Some(j) => Arg::Ref(Ref::Step(j)),
                    None => r("x"),
                };
                vec![
                    step(0, Operator::WithRelationObject, vec![r("x"), target, lit(self.relation())]),
                    step(1, Operator::Count, vec![r("a")]),
                    step(last, Operator::Geq, vec![r("b"), Arg::Number(k)]),
                ]
            }
            _ => vec![
                step(0, Operator::Find, vec![lit(self.name())]),
                step(1, Operator::Unique, vec![r("a")]),
                step(2, Operator::QueryName, vec![r("b")]),
                step(3, Operator::QueryName, vec![r("x")]),
                step(last, Operator::Eq, vec![r("c"), r("d")]),
            ],
        };
        SubProgram { var: "x".into(), steps }
    }

    fn number_arg(&mut self) -> Arg {
        match self.pick(&[T::Number]) {
            Some(j) if self.rng.random_bool(0.5) => Arg::Ref(Ref::Step(j)),
            _ => Arg::Number(self.rng.random_range(0..4)),
        }
    }

    /// One step over the current prefix, or `None` when `op` cannot be fed.
    fn step(&mut self, op: Operator) -> Option<Vec<Arg>> {
        use Operator::*;
        let objs = [T::Objects, T::Object];
        let r = |j: usize| Arg::Ref(Ref::Step(j));
        Option::Some(match op {
            Find => vec![Arg::Literal(self.name())],
            FindAll => vec![],
            Filter => vec![r(self.pick(&objs)?), Arg::Literal(self.attribute())],
            Count => vec![r(self.pick(&[T::Objects, T::Object, T::Groups, T::Images, T::Labels])?)],
            WithRelation | WithRelationObject => {
                let a = self.pick(&objs)?;
                let b = self.pick(&objs)?;
                let mut args = vec![r(a), r(b), Arg::Literal(self.relation())];
                if self.rng.random_bool(0.3) {
                    let m = self.pick(&objs)?;
                    args.push(Arg::Modifier {
                        name: MODIFIERS.choose(self.rng).unwrap().to_string(),
                        target: Ref::Step(m),
                    });
                }
                args
            }
            GroupByImages => vec![r(self.pick(&objs)?)],
            KeepIfValuesCountEq | KeepIfValuesCountGt | KeepIfValuesCountLt => {
                vec![r(self.pick(&[T::Groups])?), Arg::Number(self.rng.random_range(0..4))]
            }
            All | Some | None => vec![r(self.pick(&objs)?), Arg::Sub(self.sub())],
            QueryName => vec![r(self.pick(&[T::Object])?)],
            Unique | UniqueImages => vec![r(self.pick(&objs)?)],
            QueryAttribute => vec![r(self.pick(&[T::Object])?), Arg::Literal(self.category())],
            VerifyAttribute => vec![r(self.pick(&[T::Object])?), Arg::Literal(self.attribute())],
            UniqueAttributeValues => vec![r(self.pick(&objs)?), Arg::Literal(self.category())],
            And | Or => vec![r(self.pick(&[T::Bool])?), r(self.pick(&[T::Bool])?)],
            Eq => {
                if self.rng.random_bool(0.5) {
                    let a = self.pick(&[T::Label])?;
                    let b = self.pick(&[T::Label])?;
                    vec![r(a), r(b)]
                } else {
                    vec![r(self.pick(&[T::Number])?), self.number_arg()]
                }
            }
            Gt | Lt | Geq | Leq => vec![r(self.pick(&[T::Number])?), self.number_arg()],
            Choose => vec![
                r(self.pick(&[T::Bool])?),
                Arg::Literal(CHOICE_WORDS[self.rng.random_range(0..2)].into()),
                Arg::Literal(CHOICE_WORDS[self.rng.random_range(2..4)].into()),
            ],
        })
    }
}

/// A valid program of at most `max_steps` top-level steps whose names come
/// mostly from `scenes`.
pub fn random_program<R: Rng>(rng: &mut R, scenes: &[SceneGraph], max_steps: usize) -> Program {
    use vqsynth::program::OPERATORS;
    let names: BTreeSet<String> = scenes.iter().flat_map(|s| s.objects().iter().map(|o| o.name.clone())).collect();
    let mut g = ProgramGen {
        rng,
        names: names.into_iter().collect(),
        types: Vec::new(),
    };
    let body = g.rng.random_range(1..max_steps);
    let mut steps: Vec<Step> = Vec::new();
    while steps.len() < body {
        let op = if steps.is_empty() || g.rng.random_bool(0.25) {
            [Operator::Find, Operator::FindAll][usize::from(g.rng.random_bool(0.15))]
        } else {
            *OPERATORS.choose(g.rng).unwrap()
        };
        if let Some(args) = g.step(op) {
            steps.push(Step {
                label: (steps.len() + 1).to_string(),
                op,
                args,
            });
            g.types.push(out_type(op));
        }
    }
    if !matches!(g.types.last(), Some(T::Bool | T::Number | T::Label)) {
        let last = steps.len() - 1;
        steps.push(Step {
            label: (steps.len() + 1).to_string(),
            op: Operator::Count,
            args: vec![Arg::Ref(Ref::Step(last))],
        });
    }
    Program::new(steps).expect("generated programs are well typed")
}

// ---------------------------------------------------------------------------
// Set-comprehension evaluator

type O = (usize, usize);

/// Values with order-free containers, for comparison with interpreter values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OValue {
    Objs(BTreeSet<O>),
    Obj(O),
    Groups(BTreeMap<usize, BTreeSet<O>>),
    Images(BTreeSet<String>),
    Labels(BTreeSet<String>),
    Bool(bool),
    Num(u64),
    Label(String),
}

pub fn normalize(v: &Value) -> OValue {
    let o = |r: &vqsynth::program::ObjRef| (r.scene, r.object);
    match v {
        Value::Objects(v) => OValue::Objs(v.iter().map(o).collect()),
        Value::Object(r) => OValue::Obj(o(r)),
        Value::Groups(g) => OValue::Groups(g.iter().map(|(s, v)| (*s, v.iter().map(o).collect())).collect()),
        Value::Images(v) => OValue::Images(v.iter().cloned().collect()),
        Value::Labels(v) => OValue::Labels(v.iter().cloned().collect()),
        Value::Bool(b) => OValue::Bool(*b),
        Value::Number(n) => OValue::Num(*n),
        Value::Label(l) => OValue::Label(l.clone()),
    }
}

pub fn answer_of(v: &OValue) -> Answer {
    match v {
        OValue::Bool(b) => Answer::Bool(*b),
        OValue::Num(n) => Answer::Number(*n),
        OValue::Label(l) => Answer::Label(l.clone()),
        other => panic!("not an answer: {other:?}"),
    }
}

pub struct Oracle<'a> {
    pub scenes: &'a [SceneGraph],
    pub categories: &'a AttributeCategories,
}

struct Frame<'a> {
    top: &'a [OValue],
    local: Option<(&'a [OValue], O)>,
}

impl Oracle<'_> {
    fn universe(&self) -> impl Iterator<Item = O> + '_ {
        self.scenes
            .iter()
            .enumerate()
            .flat_map(|(s, g)| (0..g.len()).map(move |i| (s, i)))
    }

    fn node(&self, o: O) -> &ObjectNode {
        self.scenes[o.0].object(o.1)
    }

    fn id_is(&self, scene: usize, id: &str, o: O) -> bool {
        o.0 == scene && self.node(o).id == id
    }

    fn get(&self, r: Ref, f: &Frame<'_>) -> OValue {
        match r {
            Ref::Step(j) => f.top[j].clone(),
            Ref::Local(j) => f.local.unwrap().0[j].clone(),
            Ref::Var => OValue::Obj(f.local.unwrap().1),
        }
    }

    fn arg(&self, a: &Arg, f: &Frame<'_>) -> OValue {
        match a {
            Arg::Ref(r) => self.get(*r, f),
            Arg::Number(n) => OValue::Num(*n),
            other => panic!("not a value argument: {other:?}"),
        }
    }

    fn set(&self, a: &Arg, f: &Frame<'_>) -> BTreeSet<O> {
        match self.arg(a, f) {
            OValue::Objs(s) => s,
            OValue::Obj(o) => BTreeSet::from([o]),
            other => panic!("not objects: {other:?}"),
        }
    }

    fn obj(&self, a: &Arg, f: &Frame<'_>) -> O {
        match self.arg(a, f) {
            OValue::Obj(o) => o,
            other => panic!("not an object: {other:?}"),
        }
    }

    fn num(&self, a: &Arg, f: &Frame<'_>) -> u64 {
        match self.arg(a, f) {
            OValue::Num(n) => n,
            other => panic!("not a number: {other:?}"),
        }
    }

    fn boolean(&self, a: &Arg, f: &Frame<'_>) -> bool {
        match self.arg(a, f) {
            OValue::Bool(b) => b,
            other => panic!("not a boolean: {other:?}"),
        }
    }

    fn values_of(&self, o: O, category: &str) -> BTreeSet<String> {
        self.node(o)
            .attributes
            .iter()
            .filter(|v| self.categories.category(v) == Some(category))
            .cloned()
            .collect()
    }

    /// Whether `x` has an edge `rel` to `y` carrying every modifier
    /// constraint.
    fn related(&self, x: O, y: O, rel: &str, mods: &[(String, BTreeSet<O>)]) -> bool {
        x.0 == y.0
            && self.node(x).relations.iter().any(|e| {
                e.name == rel
                    && self.id_is(x.0, &e.target, y)
                    && mods.iter().all(|(name, set)| {
                        set.iter().any(|&m| e.modifiers.iter().any(|em| em.name == *name && self.id_is(x.0, &em.target, m)))
                    })
            })
    }

    fn eval_step(&self, s: &Step, f: &Frame<'_>) -> Result<OValue, &'static str> {
        use Operator::*;
        let a = &s.args;
        let lit = |i: usize| match &a[i] {
            Arg::Literal(l) => l.as_str(),
            other => panic!("not a literal: {other:?}"),
        };
        Ok(match s.op {
            Find => OValue::Objs(self.universe().filter(|&o| self.node(o).name == lit(0)).collect()),
            FindAll => OValue::Objs(self.universe().collect()),
            Filter => OValue::Objs(
                self.set(&a[0], f)
                    .into_iter()
                    .filter(|&o| self.node(o).attributes.iter().any(|v| v == lit(1)))
                    .collect(),
            ),
            Count => OValue::Num(match self.arg(&a[0], f) {
                OValue::Objs(s) => s.len(),
                OValue::Obj(_) => 1,
                OValue::Groups(g) => g.len(),
                OValue::Images(s) | OValue::Labels(s) => s.len(),
                other => panic!("not countable: {other:?}"),
            } as u64),
            WithRelation | WithRelationObject => {
                let s1 = self.set(&a[0], f);
                let s2 = self.set(&a[1], f);
                let rel = lit(2);
                let mods: Vec<(String, BTreeSet<O>)> = a[3..]
                    .iter()
                    .map(|m| match m {
                        Arg::Modifier { name, target } => (name.clone(), self.set(&Arg::Ref(*target), f)),
                        other => panic!("not a modifier: {other:?}"),
                    })
                    .collect();
                OValue::Objs(if s.op == WithRelation {
                    s1.iter().copied().filter(|&x| s2.iter().any(|&y| self.related(x, y, rel, &mods))).collect()
                } else {
                    s2.iter().copied().filter(|&y| s1.iter().any(|&x| self.related(x, y, rel, &mods))).collect()
                })
            }
            GroupByImages => {
                let mut g: BTreeMap<usize, BTreeSet<O>> = BTreeMap::new();
                for o in self.set(&a[0], f) {
                    g.entry(o.0).or_default().insert(o);
                }
                OValue::Groups(g)
            }
            KeepIfValuesCountEq | KeepIfValuesCountGt | KeepIfValuesCountLt => {
                let OValue::Groups(g) = self.arg(&a[0], f) else { panic!("not groups") };
                let k = self.num(&a[1], f) as usize;
                OValue::Groups(
                    g.into_iter()
                        .filter(|(_, v)| match s.op {
                            KeepIfValuesCountEq => v.len() == k,
                            KeepIfValuesCountGt => v.len() > k,
                            _ => v.len() < k,
                        })
                        .collect(),
                )
            }
            All | Some | None => {
                let domain = self.set(&a[0], f);
                if domain.is_empty() {
                    return Err("presupposition failure");
                }
                let Arg::Sub(sub) = &a[1] else { panic!("not a sub-program") };
                let mut truths = Vec::new();
                for &o in &domain {
                    truths.push(self.eval_sub(sub, f.top, o)?);
                }
                OValue::Bool(match s.op {
                    All => truths.iter().all(|t| *t),
                    Some => truths.iter().any(|t| *t),
                    _ => !truths.iter().any(|t| *t),
                })
            }
            QueryName => OValue::Label(self.node(self.obj(&a[0], f)).name.clone()),
            Unique => {
                let s = self.set(&a[0], f);
                if s.len() != 1 {
                    return Err("cardinality error");
                }
                OValue::Obj(*s.iter().next().unwrap())
            }
            UniqueImages => OValue::Images(
                self.set(&a[0], f)
                    .iter()
                    .map(|o| self.scenes[o.0].image_id().to_string())
                    .collect(),
            ),
            QueryAttribute => {
                let v = self.values_of(self.obj(&a[0], f), lit(1));
                match v.len() {
                    0 => return Err("missing attribute"),
                    1 => OValue::Label(v.into_iter().next().unwrap()),
                    _ => return Err("ambiguous attribute"),
                }
            }
            VerifyAttribute => OValue::Bool(self.node(self.obj(&a[0], f)).attributes.iter().any(|v| v == lit(1))),
            UniqueAttributeValues => OValue::Labels(
                self.set(&a[0], f)
                    .into_iter()
                    .flat_map(|o| self.values_of(o, lit(1)))
                    .collect(),
            ),
            And => OValue::Bool(self.boolean(&a[0], f) & self.boolean(&a[1], f)),
            Or => OValue::Bool(self.boolean(&a[0], f) | self.boolean(&a[1], f)),
            Eq => OValue::Bool(self.arg(&a[0], f) == self.arg(&a[1], f)),
            Gt => OValue::Bool(self.num(&a[0], f) > self.num(&a[1], f)),
            Lt => OValue::Bool(self.num(&a[0], f) < self.num(&a[1], f)),
            Geq => OValue::Bool(self.num(&a[0], f) >= self.num(&a[1], f)),
            Leq => OValue::Bool(self.num(&a[0], f) <= self.num(&a[1], f)),
            Choose => OValue::Label(lit(if self.boolean(&a[0], f) { 1 } else { 2 }).to_string()),
        })
    }

    fn eval_sub(&self, sub: &SubProgram, top: &[OValue], var: O) -> Result<bool, &'static str> {
        let mut local: Vec<OValue> = Vec::new();
        for s in &sub.steps {
            let v = self.eval_step(
                s,
                &Frame {
                    top,
                    local: Some((&local, var)),
                },
            )?;
            local.push(v);
        }
        match local.last() {
            Some(OValue::Bool(b)) => Ok(*b),
            other => panic!("sub-program ends in {other:?}"),
        }
    }

    /// Every top-level value, or the class of the first error.
    pub fn trace(&self, p: &Program) -> Result<Vec<OValue>, &'static str> {
        let mut top: Vec<OValue> = Vec::new();
        for s in p.steps() {
            let v = self.eval_step(s, &Frame { top: &top, local: None })?;
            top.push(v);
        }
        Ok(top)
    }
}

// ---------------------------------------------------------------------------
// Synthetic records

/// Ten program shapes over nouns `n m p`, attributes `a b`, relation `r`
/// and number `k`, with the template they stand for.
const SHAPES: [(TemplateId, &str); 10] = [
    (TemplateId::Count, "1=Find(n); 2=Filter(@1, a); 3=Count(@2)"),
    (TemplateId::VerifyCount, "1=Find(n); 2=Find(m); 3=WithRelation(@1, @2, r); 4=Count(@3); 5=eq(@4, k)"),
    (TemplateId::VerifyAttr, "1=Find(n); 2=Find(m); 3=WithRelation(@1, @2, r); 4=Unique(@3); 5=VerifyAttribute(@4, a)"),
    (TemplateId::VerifyQuant, "1=Find(n); 2=All(@1, {x| o=VerifyAttribute(x, a)})"),
    (
        TemplateId::VerifyQuant,
        "1=Find(n); 2=Filter(@1, a); 3=Some(@2, {x| u=Find(m); v=WithRelation(x, @u, r); w=Count(@v); o=gt(@w, 0)})",
    ),
    (
        TemplateId::CountGroupBy,
        "1=Find(m); 2=Filter(@1, a); 3=Find(n); 4=WithRelation(@3, @2, r); 5=GroupByImages(@4); 6=KeepIfValuesCountEq(@5, k); 7=Count(@6)",
    ),
    (TemplateId::CompareCount, "1=Find(n); 2=Filter(@1, a); 3=Count(@2); 4=Find(n); 5=Filter(@4, b); 6=Count(@5); 7=lt(@3, @6)"),
    (TemplateId::QueryAttr, "1=Find(n); 2=Find(m); 3=WithRelation(@1, @2, r); 4=Unique(@3); 5=QueryAttribute(@4, color)"),
    (
        TemplateId::ChooseObject,
        "1=Find(n); 2=Find(m); 3=Find(p); 4=WithRelation(@1, @2, r, with=@3); 5=Count(@4); 6=gt(@5, 0); 7=Choose(@6, p, q)",
    ),
    (TemplateId::VerifyLogic, "1=Find(n); 2=Filter(@1, a); 3=Count(@2); 4=gt(@3, 0); 5=Find(m); 6=Count(@5); 7=gt(@6, 0); 8=And(@4, @7)"),
];

pub const SHAPE_COUNT: usize = SHAPES.len();

pub const RECORD_NOUNS: [&str; 8] = ["man", "woman", "dog", "cat", "table", "cup", "horse", "book"];
const RECORD_ATTRIBUTES: [&str; 6] = ["black", "white", "red", "wood", "tall", "small"];
const RECORD_RELATIONS: [&str; 3] = ["on", "near", "holding"];

fn fill(shape: &str, words: &BTreeMap<&str, String>) -> String {
    let mut out = String::new();
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        out.push_str(words.get(token.as_str()).map(String::as_str).unwrap_or(token));
        token.clear();
    };
    for ch in shape.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            token.push(ch);
        } else {
            flush(&mut token, &mut out);
            out.push(ch);
        }
    }
    flush(&mut token, &mut out);
    out
}

fn answer_for<R: Rng>(rng: &mut R, p: &Program, words: &BTreeMap<&str, String>) -> Answer {
    match p.output_type() {
        vqsynth::program::Type::Bool => Answer::Bool(rng.random_bool(0.5)),
        vqsynth::program::Type::Number => Answer::Number(rng.random_range(0..5)),
        _ => match p.steps().last().unwrap().op {
            Operator::Choose => Answer::Label(words[if rng.random_bool(0.5) { "p" } else { "q" }].clone()),
            _ => Answer::Label(["black", "white", "red"].choose(rng).unwrap().to_string()),
        },
    }
}

fn subgraph_for(shape: usize, words: &BTreeMap<&str, String>) -> Subgraph {
    let w = |k: &str| words[k].clone();
    let root = match shape {
        0 | 3 | 6 | 9 => PatternObject::new(w("n")).attr(w("a")),
        2 => PatternObject::new(w("n")).attr(w("a")).rel(w("r"), PatternObject::new(w("m"))),
        4 => PatternObject::new(w("n"))
            .attr(w("a"))
            .rel(w("r"), PatternObject::new(w("m")).rel("near", PatternObject::new(w("p")))),
        5 => PatternObject::new(w("n")).rel(w("r"), PatternObject::new(w("m")).attr(w("a"))),
        8 => PatternObject::new(w("n")).rel_with(w("r"), PatternObject::new(w("m")), "with", PatternObject::new(w("p"))),
        _ => PatternObject::new(w("n"))
            .rel(w("r"), PatternObject::new(w("m")))
            .rel("near", PatternObject::new(w("p"))),
    };
    Subgraph::new(root).unwrap()
}

/// A record of program shape `shape` over `images`, with random literals.
pub fn synthetic_record<R: Rng>(rng: &mut R, id: String, shape: usize, images: Vec<String>) -> ExampleRecord {
    let (template, text) = SHAPES[shape];
    let nouns: Vec<&str> = RECORD_NOUNS.choose_multiple(rng, 4).copied().collect();
    let attrs: Vec<&str> = RECORD_ATTRIBUTES.choose_multiple(rng, 2).copied().collect();
    let mut words: BTreeMap<&str, String> = BTreeMap::new();
    for (k, v) in ["n", "m", "p", "q"].into_iter().zip(&nouns) {
        words.insert(k, v.to_string());
    }
    words.insert("a", attrs[0].into());
    words.insert("b", attrs[1].into());
    words.insert("r", RECORD_RELATIONS.choose(rng).unwrap().to_string());
    words.insert("k", rng.random_range(1..4).to_string());
    let program = parse_program(&fill(text, &words)).expect("shapes parse");
    let subgraph = subgraph_for(shape, &words);
    let answer = answer_for(rng, &program, &words);
    let question = format!(
        "{} {} {} {} {} {}?",
        template.name(),
        words["n"],
        words["a"],
        words["r"],
        words["m"],
        words["k"]
    );
    ExampleRecord {
        id,
        question,
        answer,
        template,
        properties: Provenance {
            source_image: images[0].clone(),
            size: subgraph.node_count(),
            depth: subgraph.depth(),
            tags: derive_tags(&program).into_iter().collect(),
            positives: vec![images[0].clone()],
            ..Provenance::default()
        },
        images,
        program,
        subgraph,
    }
}

/// `n` records whose images come from `pool` (`{pool}{i}` for i < `pool_size`).
pub fn synthetic_records(n: usize, seed: u64, prefix: &str, pool: &str, pool_size: usize) -> Vec<ExampleRecord> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let k = r.random_range(1..=3);
            let images: Vec<String> = rand::seq::index::sample(&mut r, pool_size, k)
                .into_iter()
                .map(|j| format!("{pool}{j}"))
                .collect();
            let shape = r.random_range(0..SHAPES.len());
            synthetic_record(&mut r, format!("{prefix}{i:05}"), shape, images)
        })
        .collect()
}

/// A bare record for balancing: only template, answer, question, id and
/// structure matter.
pub fn balance_record(id: usize, template: TemplateId, question: String, answer: Answer, structure: (usize, usize)) -> ExampleRecord {
    let program = parse_program("1=Find(dog); 2=Count(@1)").unwrap();
    ExampleRecord {
        id: format!("b{id:06}"),
        question,
        images: vec![format!("img{}", id % 97)],
        answer,
        program,
        template,
        subgraph: Subgraph::single("dog"),
        properties: Provenance {
            source_image: format!("img{}", id % 97),
            size: structure.0,
            depth: structure.1,
            ..Provenance::default()
        },
    }
}

/// `per_template[t]` records for each template; answers drawn from four
/// values, except that `skewed` templates give 90% of their records the
/// answer "a0". A tenth of the questions repeat with another answer.
pub fn balance_batch(per_template: &[(TemplateId, usize)], skewed: &[TemplateId], seed: u64) -> Vec<ExampleRecord> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for &(t, n) in per_template {
        for j in 0..n {
            let answer = if skewed.contains(&t) && r.random_bool(0.9) {
                "a0".to_string()
            } else {
                format!("a{}", r.random_range(0..4))
            };
            let question = if j > 0 && r.random_bool(0.1) {
                format!("{} question {}", t.name(), r.random_range(0..j))
            } else {
                format!("{} question {j}", t.name())
            };
            let structure = (r.random_range(1..6), r.random_range(0..3));
            out.push(balance_record(out.len(), t, question, Answer::Label(answer), structure));
        }
    }
    out
}

/// One to four scenes of the oracle shape.
pub fn random_scenes<R: Rng>(rng: &mut R) -> Vec<SceneGraph> {
    let n = rng.random_range(1..=4);
    (0..n)
        .map(|i| random_scene(rng, &format!("im{i}"), &SceneShape::oracle()))
        .collect()
}

/// A sub-program over `x` and its negation.
pub fn sub_pair<R: Rng>(rng: &mut R) -> (String, String) {
    let attr = ATTRIBUTES.choose(rng).unwrap().choose(rng).unwrap();
    let rel = RELATIONS[rng.random_range(0..3)];
    let k = rng.random_range(0..3);
    match rng.random_range(0..3) {
        0 => (
            format!("{{x| o=VerifyAttribute(x, {attr})}}"),
            format!("{{x| a=Filter(x, {attr}); b=Count(@a); o=eq(@b, 0)}}"),
        ),
        1 => {
            let (op, neg) = [("gt", "leq"), ("geq", "lt"), ("lt", "geq"), ("leq", "gt")].choose(rng).copied().unwrap();
            let body = format!("a=FindAll(); b=WithRelation(x, @a, {rel}); c=Count(@b)");
            (format!("{{x| {body}; o={op}(@c, {k})}}"), format!("{{x| {body}; o={neg}(@c, {k})}}"))
        }
        _ => {
            let body = format!("a=FindAll(); b=WithRelationObject(@a, x, {rel}); c=Count(@b)");
            (format!("{{x| {body}; o=gt(@c, {k})}}"), format!("{{x| {body}; o=leq(@c, {k})}}"))
        }
    }
}

pub fn domain<R: Rng>(rng: &mut R, scenes: &[SceneGraph]) -> String {
    let names: Vec<&str> = scenes.iter().flat_map(|s| s.objects().iter().map(|o| o.name.as_str())).collect();
    let name = names.choose(rng).copied().unwrap_or("unicorn");
    match rng.random_range(0..3) {
        0 => format!("1=Find({name}); 2=FindAll(); 3=Filter(@1, {})", ATTRIBUTES[0].choose(rng).unwrap()),
        1 => format!("1=Find({name}); 2=FindAll(); 3=WithRelation(@1, @2, {})", RELATIONS[rng.random_range(0..3)]),
        _ => format!("1=Find({name}); 2=FindAll(); 3=WithRelationObject(@2, @1, {})", RELATIONS[rng.random_range(0..3)]),
    }
}

/// None = not Some and All = None of the negation on a random domain, or a
/// presupposition failure from all four when the domain is empty.
pub fn check_duality<R: Rng>(rng: &mut R) -> Result<(), String> {
    let scenes = random_scenes(rng);
    let prefix = domain(rng, &scenes);
    let (sub, neg) = sub_pair(rng);
    let run = |q: &str, s: &str| {
        let text = format!("{prefix}; 4={q}(@3, {s})");
        execute(&parse_program(&text).unwrap(), &scenes)
    };
    let results = [run("None", &sub), run("Some", &sub), run("All", &sub), run("None", &neg)];
    let count = execute(&parse_program(&format!("{prefix}; 4=Count(@3)")).unwrap(), &scenes);
    if count == Ok(Answer::Number(0)) {
        if results.iter().all(|r| r.as_ref().map_err(|e| e.class()) == Err("presupposition failure")) {
            return Ok(());
        }
        return Err(format!("{prefix} {sub}: empty domain gave {results:?}"));
    }
    let b: Vec<bool> = results
        .iter()
        .map(|r| match r {
            Ok(Answer::Bool(b)) => Ok(*b),
            other => Err(format!("{prefix} {sub}: {other:?}")),
        })
        .collect::<Result<_, _>>()?;
    if b[0] != !b[1] || b[2] != b[3] {
        return Err(format!("{prefix} {sub} / {neg}: {b:?}"));
    }
    Ok(())
}
