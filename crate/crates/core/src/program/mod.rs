//! Programs over multi-image scene-graph collections.
//!
//! A program is a list of operator steps. Arguments are literals (names,
//! attribute values, relation names, attribute categories), number literals,
//! backward references to earlier steps, relation-modifier constraints and
//! sub-programs bound to one object variable (quantifier scopes).

mod anonymize;
mod exec;
mod parse;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use anonymize::{anonymize, AnonymizedProgram, PLACEHOLDER};
pub use exec::{execute, ExecError, Executor, ObjRef, Value};
pub use parse::parse_program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    Find,
    FindAll,
    Filter,
    Count,
    WithRelation,
    WithRelationObject,
    GroupByImages,
    KeepIfValuesCountEq,
    KeepIfValuesCountGt,
    KeepIfValuesCountLt,
    All,
    Some,
    None,
    QueryName,
    Unique,
    UniqueImages,
    QueryAttribute,
    VerifyAttribute,
    UniqueAttributeValues,
    And,
    Or,
    Eq,
    Gt,
    Lt,
    Geq,
    Leq,
    Choose,
}

pub const OPERATORS: [Operator; 27] = [
    Operator::Find,
    Operator::FindAll,
    Operator::Filter,
    Operator::Count,
    Operator::WithRelation,
    Operator::WithRelationObject,
    Operator::GroupByImages,
    Operator::KeepIfValuesCountEq,
    Operator::KeepIfValuesCountGt,
    Operator::KeepIfValuesCountLt,
    Operator::All,
    Operator::Some,
    Operator::None,
    Operator::QueryName,
    Operator::Unique,
    Operator::UniqueImages,
    Operator::QueryAttribute,
    Operator::VerifyAttribute,
    Operator::UniqueAttributeValues,
    Operator::And,
    Operator::Or,
    Operator::Eq,
    Operator::Gt,
    Operator::Lt,
    Operator::Geq,
    Operator::Leq,
    Operator::Choose,
];

/// Kinds of argument an operator slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// An object set; a single object is promoted to a singleton.
    Objects,
    Object,
    Groups,
    /// Anything with a size: objects, groups, images or labels.
    Countable,
    Bool,
    /// A number or a label, by reference, or a number literal.
    Comparable,
    /// A number, by reference or literal.
    Numeric,
    /// A name, attribute value, relation name or category.
    Literal,
    /// A number literal.
    Size,
    Sub,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Find => "Find",
            Operator::FindAll => "FindAll",
            Operator::Filter => "Filter",
            Operator::Count => "Count",
            Operator::WithRelation => "WithRelation",
            Operator::WithRelationObject => "WithRelationObject",
            Operator::GroupByImages => "GroupByImages",
            Operator::KeepIfValuesCountEq => "KeepIfValuesCountEq",
            Operator::KeepIfValuesCountGt => "KeepIfValuesCountGt",
            Operator::KeepIfValuesCountLt => "KeepIfValuesCountLt",
            Operator::All => "All",
            Operator::Some => "Some",
            Operator::None => "None",
            Operator::QueryName => "QueryName",
            Operator::Unique => "Unique",
            Operator::UniqueImages => "UniqueImages",
            Operator::QueryAttribute => "QueryAttribute",
            Operator::VerifyAttribute => "VerifyAttribute",
            Operator::UniqueAttributeValues => "UniqueAttributeValues",
            Operator::And => "And",
            Operator::Or => "Or",
            Operator::Eq => "eq",
            Operator::Gt => "gt",
            Operator::Lt => "lt",
            Operator::Geq => "geq",
            Operator::Leq => "leq",
            Operator::Choose => "Choose",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        OPERATORS.iter().copied().find(|o| o.name() == name)
    }

    /// Fixed argument slots. Relation operators additionally take any number
    /// of trailing modifier constraints.
    pub fn slots(self) -> &'static [Slot] {
        use Slot::*;
        match self {
            Operator::Find => &[Literal],
            Operator::FindAll => &[],
            Operator::Filter => &[Objects, Literal],
            Operator::Count => &[Countable],
            Operator::WithRelation | Operator::WithRelationObject => &[Objects, Objects, Literal],
            Operator::GroupByImages => &[Objects],
            Operator::KeepIfValuesCountEq | Operator::KeepIfValuesCountGt | Operator::KeepIfValuesCountLt => {
                &[Groups, Size]
            }
            Operator::All | Operator::Some | Operator::None => &[Objects, Sub],
            Operator::QueryName => &[Object],
            Operator::Unique | Operator::UniqueImages => &[Objects],
            Operator::QueryAttribute => &[Object, Literal],
            Operator::VerifyAttribute => &[Object, Literal],
            Operator::UniqueAttributeValues => &[Objects, Literal],
            Operator::And | Operator::Or => &[Bool, Bool],
            Operator::Eq => &[Comparable, Comparable],
            Operator::Gt | Operator::Lt | Operator::Geq | Operator::Leq => &[Numeric, Numeric],
            Operator::Choose => &[Bool, Literal, Literal],
        }
    }

    pub fn takes_modifiers(self) -> bool {
        matches!(self, Operator::WithRelation | Operator::WithRelationObject)
    }

    pub fn output(self) -> Type {
        match self {
            Operator::Find
            | Operator::FindAll
            | Operator::Filter
            | Operator::WithRelation
            | Operator::WithRelationObject => Type::Objects,
            Operator::Count => Type::Number,
            Operator::GroupByImages
            | Operator::KeepIfValuesCountEq
            | Operator::KeepIfValuesCountGt
            | Operator::KeepIfValuesCountLt => Type::Groups,
            Operator::All
            | Operator::Some
            | Operator::None
            | Operator::VerifyAttribute
            | Operator::And
            | Operator::Or
            | Operator::Eq
            | Operator::Gt
            | Operator::Lt
            | Operator::Geq
            | Operator::Leq => Type::Bool,
            Operator::QueryName | Operator::QueryAttribute | Operator::Choose => Type::Label,
            Operator::Unique => Type::Object,
            Operator::UniqueImages => Type::Images,
            Operator::UniqueAttributeValues => Type::Labels,
        }
    }

    pub fn is_quantifier(self) -> bool {
        matches!(self, Operator::All | Operator::Some | Operator::None)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Operator::Eq | Operator::Gt | Operator::Lt | Operator::Geq | Operator::Leq)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Objects,
    Object,
    Groups,
    Images,
    Labels,
    Bool,
    Number,
    Label,
}

impl Type {
    pub fn accepted_by(self, slot: Slot) -> bool {
        match slot {
            Slot::Objects => matches!(self, Type::Objects | Type::Object),
            Slot::Object => self == Type::Object,
            Slot::Groups => self == Type::Groups,
            Slot::Countable => matches!(
                self,
                Type::Objects | Type::Object | Type::Groups | Type::Images | Type::Labels
            ),
            Slot::Bool => self == Type::Bool,
            Slot::Comparable => matches!(self, Type::Number | Type::Label),
            Slot::Numeric => self == Type::Number,
            Slot::Literal | Slot::Size | Slot::Sub => false,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Type::Objects => "objects",
            Type::Object => "object",
            Type::Groups => "groups",
            Type::Images => "images",
            Type::Labels => "labels",
            Type::Bool => "boolean",
            Type::Number => "number",
            Type::Label => "label",
        }
    }
}

/// A reference to an earlier value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ref {
    /// Top-level step, 0-based.
    Step(usize),
    /// Earlier step of the innermost sub-program, 0-based.
    Local(usize),
    /// The innermost sub-program's bound object.
    Var,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    Ref(Ref),
    Literal(String),
    Number(u64),
    Modifier { name: String, target: Ref },
    Sub(SubProgram),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    /// Top-level steps are labelled 1, 2, ...; sub-program steps carry free
    /// identifiers.
    pub label: String,
    pub op: Operator,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubProgram {
    pub var: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("step {step}: syntax error: {message}")]
    Syntax { step: usize, message: String },
    #[error("step {step}: unknown operator \"{name}\"")]
    UnknownOperator { step: usize, name: String },
    #[error("step {step}: {op} takes {expected} arguments, found {found}")]
    Arity {
        step: usize,
        op: Operator,
        expected: String,
        found: usize,
    },
    #[error("step {step}: reference @{target} does not point to an earlier step")]
    ForwardReference { step: usize, target: String },
    #[error("step {step}: unknown reference \"{target}\"")]
    UnknownReference { step: usize, target: String },
    #[error("step {step}: argument {argument} of {op} expects {expected}, found {found}")]
    TypeMismatch {
        step: usize,
        op: Operator,
        argument: usize,
        expected: String,
        found: String,
    },
    #[error("step {step}: expected label {expected}, found \"{found}\"")]
    Label { step: usize, expected: String, found: String },
    #[error("step {step}: a program must end in a boolean, number or label, not {found}")]
    FinalType { step: usize, found: &'static str },
    #[error("empty program")]
    Empty,
}

impl ProgramError {
    pub fn step(&self) -> Option<usize> {
        match self {
            ProgramError::Syntax { step, .. }
            | ProgramError::UnknownOperator { step, .. }
            | ProgramError::Arity { step, .. }
            | ProgramError::ForwardReference { step, .. }
            | ProgramError::UnknownReference { step, .. }
            | ProgramError::TypeMismatch { step, .. }
            | ProgramError::Label { step, .. }
            | ProgramError::FinalType { step, .. } => Some(*step),
            ProgramError::Empty => None,
        }
    }
}

impl Program {
    /// Checks references, arities and types, then wraps the steps.
    pub fn new(steps: Vec<Step>) -> Result<Program, ProgramError> {
        let p = Program { steps };
        p.check()?;
        Ok(p)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn output_type(&self) -> Type {
        self.steps.last().map(|s| s.op.output()).unwrap_or(Type::Bool)
    }

    /// Every step, sub-program steps included, in textual order.
    pub fn all_steps(&self) -> Vec<&Step> {
        fn walk<'a>(steps: &'a [Step], out: &mut Vec<&'a Step>) {
            for s in steps {
                out.push(s);
                for a in &s.args {
                    if let Arg::Sub(sub) = a {
                        walk(&sub.steps, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.steps, &mut out);
        out
    }

    /// Literal arguments that name nodes: objects, attribute values and
    /// relations. Attribute categories are structural and excluded.
    pub fn node_literals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for s in self.all_steps() {
            for (i, a) in s.args.iter().enumerate() {
                match a {
                    Arg::Literal(l) if is_node_literal(s.op, i) => out.push(l.as_str()),
                    Arg::Modifier { name, .. } => out.push(name.as_str()),
                    _ => {}
                }
            }
        }
        out
    }

    /// Top-level steps that the step at `index` depends on, itself included.
    pub fn dependency_closure(&self, index: usize) -> Vec<usize> {
        let mut keep = vec![false; self.steps.len()];
        keep[index] = true;
        for i in (0..=index).rev() {
            if !keep[i] {
                continue;
            }
            for r in step_refs(&self.steps[i]) {
                keep[r] = true;
            }
        }
        (0..=index).filter(|&i| keep[i]).collect()
    }

    fn check(&self) -> Result<(), ProgramError> {
        if self.steps.is_empty() {
            return Err(ProgramError::Empty);
        }
        let mut types = Vec::with_capacity(self.steps.len());
        for (i, s) in self.steps.iter().enumerate() {
            let step_no = i + 1;
            if s.label != step_no.to_string() {
                return Err(ProgramError::Label {
                    step: step_no,
                    expected: step_no.to_string(),
                    found: s.label.clone(),
                });
            }
            let t = check_step(s, step_no, &types, None)?;
            types.push(t);
        }
        let t = *types.last().expect("nonempty");
        if !matches!(t, Type::Bool | Type::Number | Type::Label) {
            return Err(ProgramError::FinalType {
                step: self.steps.len(),
                found: t.name(),
            });
        }
        Ok(())
    }
}

/// Whether argument `i` of `op` is a node name rather than a category.
pub fn is_node_literal(op: Operator, i: usize) -> bool {
    !matches!(op, Operator::QueryAttribute | Operator::UniqueAttributeValues) || i != 1
}

/// Top-level steps referenced anywhere inside `s`, sub-programs included.
fn step_refs(s: &Step) -> Vec<usize> {
    let mut out = Vec::new();
    for a in &s.args {
        match a {
            Arg::Ref(Ref::Step(j)) | Arg::Modifier { target: Ref::Step(j), .. } => out.push(*j),
            Arg::Sub(sub) => {
                for t in &sub.steps {
                    out.extend(step_refs(t));
                }
            }
            _ => {}
        }
    }
    out
}

fn ref_type(r: Ref, top: &[Type], local: Option<&[Type]>) -> Option<Type> {
    match r {
        Ref::Step(j) => top.get(j).copied(),
        Ref::Local(j) => local.and_then(|l| l.get(j).copied()),
        Ref::Var => local.map(|_| Type::Object),
    }
}

fn check_step(s: &Step, step_no: usize, top: &[Type], local: Option<&[Type]>) -> Result<Type, ProgramError> {
    let slots = s.op.slots();
    let fixed = s.args.iter().take_while(|a| !matches!(a, Arg::Modifier { .. })).count();
    let arity_error = || ProgramError::Arity {
        step: step_no,
        op: s.op,
        expected: if s.op.takes_modifiers() {
            format!("{} or more", slots.len())
        } else {
            slots.len().to_string()
        },
        found: s.args.len(),
    };
    if fixed != slots.len() || (!s.op.takes_modifiers() && s.args.len() != slots.len()) {
        return Err(arity_error());
    }
    let mismatch = |argument: usize, expected: &str, found: &str| ProgramError::TypeMismatch {
        step: step_no,
        op: s.op,
        argument,
        expected: expected.to_string(),
        found: found.to_string(),
    };
    let mut comparable: Option<Type> = None;
    for (i, a) in s.args.iter().enumerate() {
        let slot = slots.get(i).copied();
        match (slot, a) {
            (None, Arg::Modifier { name, target }) => {
                if name.is_empty() {
                    return Err(mismatch(i + 1, "modifier name", "empty"));
                }
                let t = ref_type(*target, top, local).ok_or_else(|| bad_ref(step_no, *target))?;
                if !t.accepted_by(Slot::Objects) {
                    return Err(mismatch(i + 1, "objects", t.name()));
                }
            }
            (None, _) => return Err(arity_error()),
            (Some(Slot::Literal), Arg::Literal(_)) => {}
            (Some(Slot::Literal), other) => return Err(mismatch(i + 1, "literal", arg_kind(other))),
            (Some(Slot::Size), Arg::Number(_)) => {}
            (Some(Slot::Size), other) => return Err(mismatch(i + 1, "number literal", arg_kind(other))),
            (Some(Slot::Sub), Arg::Sub(sub)) => {
                let mut types = Vec::with_capacity(sub.steps.len());
                for t in &sub.steps {
                    types.push(check_step(t, step_no, top, Some(&types))?);
                }
                match types.last() {
                    Some(Type::Bool) => {}
                    Some(t) => return Err(mismatch(i + 1, "boolean sub-program", t.name())),
                    None => return Err(mismatch(i + 1, "boolean sub-program", "empty sub-program")),
                }
            }
            (Some(Slot::Sub), other) => return Err(mismatch(i + 1, "sub-program", arg_kind(other))),
            (Some(slot), Arg::Number(_)) if matches!(slot, Slot::Numeric | Slot::Comparable) => {
                if slot == Slot::Comparable {
                    if comparable.is_some_and(|c| c != Type::Number) {
                        return Err(mismatch(i + 1, comparable.unwrap().name(), "number"));
                    }
                    comparable = Some(Type::Number);
                }
            }
            (Some(slot), Arg::Ref(r)) => {
                let t = ref_type(*r, top, local).ok_or_else(|| bad_ref(step_no, *r))?;
                if !t.accepted_by(slot) {
                    return Err(mismatch(i + 1, slot_name(slot), t.name()));
                }
                if slot == Slot::Comparable {
                    if let Some(c) = comparable {
                        if c != t {
                            return Err(mismatch(i + 1, c.name(), t.name()));
                        }
                    }
                    comparable = Some(t);
                }
            }
            (Some(slot), other) => return Err(mismatch(i + 1, slot_name(slot), arg_kind(other))),
        }
    }
    Ok(s.op.output())
}

fn bad_ref(step: usize, r: Ref) -> ProgramError {
    ProgramError::UnknownReference {
        step,
        target: format!("{r:?}"),
    }
}

fn slot_name(slot: Slot) -> &'static str {
    match slot {
        Slot::Objects => "objects",
        Slot::Object => "object",
        Slot::Groups => "groups",
        Slot::Countable => "objects, groups, images or labels",
        Slot::Bool => "boolean",
        Slot::Comparable => "number or label",
        Slot::Numeric => "number",
        Slot::Literal => "literal",
        Slot::Size => "number literal",
        Slot::Sub => "sub-program",
    }
}

fn arg_kind(a: &Arg) -> &'static str {
    match a {
        Arg::Ref(_) => "reference",
        Arg::Literal(_) => "literal",
        Arg::Number(_) => "number",
        Arg::Modifier { .. } => "modifier",
        Arg::Sub(_) => "sub-program",
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&parse::serialize(self))
    }
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&parse::serialize(self))
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_program(&text).map_err(serde::de::Error::custom)
    }
}

/// The value of a complete program.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Bool(bool),
    Number(u64),
    Label(String),
}

impl Answer {
    /// Inverse of the rendering: "true"/"false", digits, or a label.
    pub fn parse(text: &str) -> Answer {
        match text {
            "true" => Answer::Bool(true),
            "false" => Answer::Bool(false),
            t if !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()) => match t.parse() {
                Ok(n) => Answer::Number(n),
                Err(_) => Answer::Label(t.to_string()),
            },
            t => Answer::Label(t.to_string()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Answer::Bool(_) => "bool",
            Answer::Number(_) => "number",
            Answer::Label(_) => "label",
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Bool(b) => write!(f, "{b}"),
            Answer::Number(n) => write!(f, "{n}"),
            Answer::Label(l) => f.write_str(l),
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Answer::parse(&String::deserialize(d)?))
    }
}
