//! Program interpreter.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::sync::OnceLock;

use thiserror::Error;

use super::{Answer, Arg, Operator, Program, Ref, Step, SubProgram};
use crate::lexicon::AttributeCategories;
use crate::scene::{ObjectNode, SceneGraph};

/// An object of one of the input scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjRef {
    pub scene: usize,
    pub object: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    /// Sorted, without duplicates.
    Objects(Vec<ObjRef>),
    Object(ObjRef),
    /// One group per scene with members, by scene.
    Groups(Vec<(usize, Vec<ObjRef>)>),
    Images(Vec<String>),
    Labels(Vec<String>),
    Bool(bool),
    Number(u64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("step {step}: cardinality error: Unique over {size} objects")]
    Cardinality { step: usize, size: usize },
    #[error("step {step}: presupposition failure: {op} over an empty set")]
    PresuppositionFailure { step: usize, op: Operator },
    #[error("step {step}: missing attribute: {object} has no {category}")]
    MissingAttribute {
        step: usize,
        object: String,
        category: String,
    },
    #[error("step {step}: ambiguous attribute: {object} has several {category} values")]
    AmbiguousAttribute {
        step: usize,
        object: String,
        category: String,
    },
    #[error("step {step}: type error at run time")]
    Type { step: usize },
}

impl ExecError {
    pub fn class(&self) -> &'static str {
        match self {
            ExecError::Cardinality { .. } => "cardinality error",
            ExecError::PresuppositionFailure { .. } => "presupposition failure",
            ExecError::MissingAttribute { .. } => "missing attribute",
            ExecError::AmbiguousAttribute { .. } => "ambiguous attribute",
            ExecError::Type { .. } => "type error",
        }
    }
}

pub struct Executor<'a> {
    categories: &'a AttributeCategories,
}

fn builtin_categories() -> &'static AttributeCategories {
    static C: OnceLock<AttributeCategories> = OnceLock::new();
    C.get_or_init(AttributeCategories::builtin)
}

/// Runs `p` with the shipped attribute categories.
pub fn execute<S: Borrow<SceneGraph>>(p: &Program, scenes: &[S]) -> Result<Answer, ExecError> {
    Executor::default().run(p, scenes)
}

impl Default for Executor<'static> {
    fn default() -> Self {
        Executor {
            categories: builtin_categories(),
        }
    }
}

struct Env<'e, S> {
    scenes: &'e [S],
    step: usize,
    top: &'e [Value],
    local: &'e [Value],
    var: Option<ObjRef>,
}

impl<S: Borrow<SceneGraph>> Env<'_, S> {
    fn node(&self, o: ObjRef) -> &ObjectNode {
        self.scenes[o.scene].borrow().object(o.object)
    }

    fn value(&self, r: Ref) -> Result<Value, ExecError> {
        let err = ExecError::Type { step: self.step };
        match r {
            Ref::Step(j) => self.top.get(j).cloned().ok_or(err),
            Ref::Local(j) => self.local.get(j).cloned().ok_or(err),
            Ref::Var => self.var.map(Value::Object).ok_or(err),
        }
    }

    fn arg(&self, a: &Arg) -> Result<Value, ExecError> {
        match a {
            Arg::Ref(r) => self.value(*r),
            Arg::Number(n) => Ok(Value::Number(*n)),
            _ => Err(ExecError::Type { step: self.step }),
        }
    }

    fn objects(&self, a: &Arg) -> Result<Vec<ObjRef>, ExecError> {
        match self.arg(a)? {
            Value::Objects(v) => Ok(v),
            Value::Object(o) => Ok(vec![o]),
            _ => Err(ExecError::Type { step: self.step }),
        }
    }

    fn object(&self, a: &Arg) -> Result<ObjRef, ExecError> {
        match self.arg(a)? {
            Value::Object(o) => Ok(o),
            _ => Err(ExecError::Type { step: self.step }),
        }
    }

    fn boolean(&self, a: &Arg) -> Result<bool, ExecError> {
        match self.arg(a)? {
            Value::Bool(b) => Ok(b),
            _ => Err(ExecError::Type { step: self.step }),
        }
    }

    fn number(&self, a: &Arg) -> Result<u64, ExecError> {
        match self.arg(a)? {
            Value::Number(n) => Ok(n),
            _ => Err(ExecError::Type { step: self.step }),
        }
    }

    fn literal<'a>(&self, a: &'a Arg) -> Result<&'a str, ExecError> {
        match a {
            Arg::Literal(l) => Ok(l),
            _ => Err(ExecError::Type { step: self.step }),
        }
    }

    fn all_objects(&self) -> impl Iterator<Item = ObjRef> + '_ {
        self.scenes.iter().enumerate().flat_map(|(s, scene)| {
            (0..scene.borrow().len()).map(move |o| ObjRef { scene: s, object: o })
        })
    }
}

impl<'a> Executor<'a> {
    pub fn new(categories: &'a AttributeCategories) -> Self {
        Executor { categories }
    }

    pub fn run<S: Borrow<SceneGraph>>(&self, p: &Program, scenes: &[S]) -> Result<Answer, ExecError> {
        let values = self.trace(p, scenes)?;
        let step = p.len();
        match values.last() {
            Some(Value::Bool(b)) => Ok(Answer::Bool(*b)),
            Some(Value::Number(n)) => Ok(Answer::Number(*n)),
            Some(Value::Label(l)) => Ok(Answer::Label(l.clone())),
            _ => Err(ExecError::Type { step }),
        }
    }

    /// Value of every top-level step.
    pub fn trace<S: Borrow<SceneGraph>>(&self, p: &Program, scenes: &[S]) -> Result<Vec<Value>, ExecError> {
        let mut values = Vec::with_capacity(p.len());
        for (i, s) in p.steps().iter().enumerate() {
            let env = Env {
                scenes,
                step: i + 1,
                top: &values,
                local: &[],
                var: None,
            };
            let v = self.step(s, &env)?;
            values.push(v);
        }
        Ok(values)
    }

    fn sub<S: Borrow<SceneGraph>>(&self, sub: &SubProgram, env: &Env<'_, S>, var: ObjRef) -> Result<bool, ExecError> {
        let mut local = Vec::with_capacity(sub.steps.len());
        for s in &sub.steps {
            let inner = Env {
                scenes: env.scenes,
                step: env.step,
                top: env.top,
                local: &local,
                var: Some(var),
            };
            let v = self.step(s, &inner)?;
            local.push(v);
        }
        match local.last() {
            Some(Value::Bool(b)) => Ok(*b),
            _ => Err(ExecError::Type { step: env.step }),
        }
    }

    fn category_values<S: Borrow<SceneGraph>>(&self, env: &Env<'_, S>, o: ObjRef, category: &str) -> Vec<String> {
        env.node(o)
            .attributes
            .iter()
            .filter(|a| self.categories.category(a) == Some(category))
            .cloned()
            .collect()
    }

    fn step<S: Borrow<SceneGraph>>(&self, s: &Step, env: &Env<'_, S>) -> Result<Value, ExecError> {
        let a = &s.args;
        let type_err = || ExecError::Type { step: env.step };
        Ok(match s.op {
            Operator::Find => {
                let name = env.literal(&a[0])?;
                Value::Objects(env.all_objects().filter(|&o| env.node(o).name == name).collect())
            }
            Operator::FindAll => Value::Objects(env.all_objects().collect()),
            Operator::Filter => {
                let value = env.literal(&a[1])?;
                let v = env.objects(&a[0])?;
                Value::Objects(v.into_iter().filter(|&o| env.node(o).has_attribute(value)).collect())
            }
            Operator::Count => Value::Number(match env.arg(&a[0])? {
                Value::Objects(v) => v.len(),
                Value::Object(_) => 1,
                Value::Groups(g) => g.len(),
                Value::Images(v) | Value::Labels(v) => v.len(),
                _ => return Err(type_err()),
            } as u64),
            Operator::WithRelation | Operator::WithRelationObject => {
                let subjects = env.objects(&a[0])?;
                let targets: BTreeSet<ObjRef> = env.objects(&a[1])?.into_iter().collect();
                let rel = env.literal(&a[2])?;
                let mut mods: Vec<(&str, BTreeSet<ObjRef>)> = Vec::new();
                for m in &a[3..] {
                    match m {
                        Arg::Modifier { name, target } => {
                            let set = match env.value(*target)? {
                                Value::Objects(v) => v.into_iter().collect(),
                                Value::Object(o) => BTreeSet::from([o]),
                                _ => return Err(type_err()),
                            };
                            mods.push((name, set));
                        }
                        _ => return Err(type_err()),
                    }
                }
                let mut out = BTreeSet::new();
                for &x in &subjects {
                    let scene = env.scenes[x.scene].borrow();
                    for edge in &env.node(x).relations {
                        if edge.name != rel {
                            continue;
                        }
                        let Some(t) = scene.index_of(&edge.target) else { continue };
                        let y = ObjRef {
                            scene: x.scene,
                            object: t,
                        };
                        if !targets.contains(&y) {
                            continue;
                        }
                        let mods_ok = mods.iter().all(|(name, set)| {
                            edge.modifier(name).is_some_and(|m| {
                                scene.index_of(&m.target).is_some_and(|mt| {
                                    set.contains(&ObjRef {
                                        scene: x.scene,
                                        object: mt,
                                    })
                                })
                            })
                        });
                        if mods_ok {
                            out.insert(if s.op == Operator::WithRelation { x } else { y });
                        }
                    }
                }
                Value::Objects(out.into_iter().collect())
            }
            Operator::GroupByImages => {
                let mut groups: Vec<(usize, Vec<ObjRef>)> = Vec::new();
                for o in env.objects(&a[0])? {
                    match groups.last_mut() {
                        Some((s, v)) if *s == o.scene => v.push(o),
                        _ => groups.push((o.scene, vec![o])),
                    }
                }
                Value::Groups(groups)
            }
            Operator::KeepIfValuesCountEq | Operator::KeepIfValuesCountGt | Operator::KeepIfValuesCountLt => {
                let Value::Groups(groups) = env.arg(&a[0])? else { return Err(type_err()) };
                let k = match &a[1] {
                    Arg::Number(n) => *n as usize,
                    _ => return Err(type_err()),
                };
                Value::Groups(
                    groups
                        .into_iter()
                        .filter(|(_, v)| match s.op {
                            Operator::KeepIfValuesCountEq => v.len() == k,
                            Operator::KeepIfValuesCountGt => v.len() > k,
                            _ => v.len() < k,
                        })
                        .collect(),
                )
            }
            Operator::All | Operator::Some | Operator::None => {
                let domain = env.objects(&a[0])?;
                let Arg::Sub(sub) = &a[1] else { return Err(type_err()) };
                if domain.is_empty() {
                    return Err(ExecError::PresuppositionFailure {
                        step: env.step,
                        op: s.op,
                    });
                }
                let mut hits = 0;
                for &o in &domain {
                    if self.sub(sub, env, o)? {
                        hits += 1;
                    }
                }
                Value::Bool(match s.op {
                    Operator::All => hits == domain.len(),
                    Operator::Some => hits > 0,
                    _ => hits == 0,
                })
            }
            Operator::QueryName => Value::Label(env.node(env.object(&a[0])?).name.clone()),
            Operator::Unique => {
                let v = env.objects(&a[0])?;
                if v.len() != 1 {
                    return Err(ExecError::Cardinality {
                        step: env.step,
                        size: v.len(),
                    });
                }
                Value::Object(v[0])
            }
            Operator::UniqueImages => {
                let mut seen = BTreeSet::new();
                let v = env.objects(&a[0])?;
                Value::Images(
                    v.into_iter()
                        .filter(|o| seen.insert(o.scene))
                        .map(|o| env.scenes[o.scene].borrow().image_id().to_string())
                        .collect(),
                )
            }
            Operator::QueryAttribute => {
                let o = env.object(&a[0])?;
                let category = env.literal(&a[1])?;
                let mut values = self.category_values(env, o, category);
                match values.len() {
                    1 => Value::Label(values.remove(0)),
                    0 => {
                        return Err(ExecError::MissingAttribute {
                            step: env.step,
                            object: env.node(o).id.clone(),
                            category: category.to_string(),
                        })
                    }
                    _ => {
                        return Err(ExecError::AmbiguousAttribute {
                            step: env.step,
                            object: env.node(o).id.clone(),
                            category: category.to_string(),
                        })
                    }
                }
            }
            Operator::VerifyAttribute => {
                let o = env.object(&a[0])?;
                Value::Bool(env.node(o).has_attribute(env.literal(&a[1])?))
            }
            Operator::UniqueAttributeValues => {
                let category = env.literal(&a[1])?;
                let mut out = BTreeSet::new();
                for o in env.objects(&a[0])? {
                    out.extend(self.category_values(env, o, category));
                }
                Value::Labels(out.into_iter().collect())
            }
            Operator::And => Value::Bool(env.boolean(&a[0])? && env.boolean(&a[1])?),
            Operator::Or => Value::Bool(env.boolean(&a[0])? || env.boolean(&a[1])?),
            Operator::Eq => Value::Bool(match (env.arg(&a[0])?, env.arg(&a[1])?) {
                (Value::Number(x), Value::Number(y)) => x == y,
                (Value::Label(x), Value::Label(y)) => x == y,
                _ => return Err(type_err()),
            }),
            Operator::Gt | Operator::Lt | Operator::Geq | Operator::Leq => {
                let x = env.number(&a[0])?;
                let y = env.number(&a[1])?;
                Value::Bool(match s.op {
                    Operator::Gt => x > y,
                    Operator::Lt => x < y,
                    Operator::Geq => x >= y,
                    _ => x <= y,
                })
            }
            Operator::Choose => {
                let b = env.boolean(&a[0])?;
                Value::Label(env.literal(&a[if b { 1 } else { 2 }])?.to_string())
            }
        })
    }
}
