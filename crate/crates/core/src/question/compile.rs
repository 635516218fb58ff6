//! Compiling patterns into program steps, and reading tags back off programs.

use std::collections::BTreeSet;

use crate::program::{Arg, Operator, Program, ProgramError, Ref, Step, SubProgram};
use crate::subgraph::PatternObject;

/// Appends steps and hands back references to them.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    steps: Vec<Step>,
    sub: bool,
}

pub fn lit(s: &str) -> Arg {
    Arg::Literal(s.to_string())
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder for the body of a quantifier; references are local, the bound
    /// object is [`Ref::Var`].
    pub fn sub() -> Self {
        ProgramBuilder {
            steps: Vec::new(),
            sub: true,
        }
    }

    pub fn push(&mut self, op: Operator, args: Vec<Arg>) -> Arg {
        let i = self.steps.len();
        let label = if self.sub { format!("s{}", i + 1) } else { (i + 1).to_string() };
        self.steps.push(Step { label, op, args });
        Arg::Ref(if self.sub { Ref::Local(i) } else { Ref::Step(i) })
    }

    /// Objects matching `o`: targets first, then the head noun, its
    /// attribute filter and one `WithRelation` per relation.
    pub fn objects(&mut self, o: &PatternObject) -> Arg {
        let mut rels = Vec::new();
        for r in &o.relations {
            let target = self.objects(&r.target);
            let mods: Vec<Arg> = r
                .modifiers
                .iter()
                .map(|m| {
                    let t = self.objects(&m.target);
                    let Arg::Ref(target) = t else { unreachable!() };
                    Arg::Modifier {
                        name: m.name.clone(),
                        target,
                    }
                })
                .collect();
            rels.push((&r.name, target, mods));
        }
        let mut cur = self.push(Operator::Find, vec![lit(&o.name)]);
        if let Some(a) = &o.attribute {
            cur = self.push(Operator::Filter, vec![cur, lit(a)]);
        }
        for (name, target, mods) in rels {
            let mut args = vec![cur, target, lit(name)];
            args.extend(mods);
            cur = self.push(Operator::WithRelation, args);
        }
        cur
    }

    /// `gt(Count(set), 0)`.
    pub fn exists(&mut self, set: Arg) -> Arg {
        let c = self.push(Operator::Count, vec![set]);
        self.push(Operator::Gt, vec![c, Arg::Number(0)])
    }

    pub fn into_sub(self, var: &str) -> SubProgram {
        SubProgram {
            var: var.to_string(),
            steps: self.steps,
        }
    }

    pub fn finish(self) -> Result<Program, ProgramError> {
        Program::new(self.steps)
    }
}

fn step_ref(a: &Arg) -> Option<usize> {
    match a {
        Arg::Ref(Ref::Step(j)) => Some(*j),
        _ => None,
    }
}

fn number(a: &Arg) -> Option<u64> {
    match a {
        Arg::Number(n) => Some(*n),
        _ => None,
    }
}

fn literal(a: &Arg) -> Option<&str> {
    match a {
        Arg::Literal(l) => Some(l),
        _ => None,
    }
}

/// Operator-category tags of a program: `Quant:all|some|no`, `GroupBy`,
/// `Logic:and|or`, `Attr`, `SameAttr:<category>`, `Compar:more|less|same`,
/// `Num:<k>` and `Count`.
pub fn derive_tags(p: &Program) -> BTreeSet<String> {
    let mut tags = BTreeSet::new();
    for s in p.all_steps() {
        match s.op {
            Operator::All => {
                tags.insert("Quant:all".to_string());
            }
            Operator::Some => {
                tags.insert("Quant:some".to_string());
            }
            Operator::None => {
                tags.insert("Quant:no".to_string());
            }
            Operator::GroupByImages => {
                tags.insert("GroupBy".to_string());
            }
            Operator::And => {
                tags.insert("Logic:and".to_string());
            }
            Operator::Or => {
                tags.insert("Logic:or".to_string());
            }
            Operator::Filter | Operator::VerifyAttribute | Operator::QueryAttribute => {
                tags.insert("Attr".to_string());
            }
            Operator::UniqueAttributeValues => {
                if let Some(c) = s.args.get(1).and_then(literal) {
                    tags.insert(format!("SameAttr:{c}"));
                }
            }
            _ => {}
        }
    }

    let steps = p.steps();
    let op_at = |a: &Arg| step_ref(a).map(|j| steps[j].op);
    let counts_labels = |j: usize| {
        steps[j].op == Operator::Count
            && step_ref(&steps[j].args[0]).is_some_and(|k| steps[k].op == Operator::UniqueAttributeValues)
    };
    for s in steps {
        match s.op {
            Operator::KeepIfValuesCountEq => {
                if let Some(k) = s.args.get(1).and_then(number) {
                    tags.insert(format!("Num:{k}"));
                }
            }
            Operator::KeepIfValuesCountGt => {
                if let Some(k) = s.args.get(1).and_then(number) {
                    tags.insert(format!("Num:{}", k + 1));
                }
            }
            Operator::KeepIfValuesCountLt => {
                if let Some(k) = s.args.get(1).and_then(number) {
                    if k > 0 {
                        tags.insert(format!("Num:{}", k - 1));
                    }
                }
            }
            op if op.is_comparison() => {
                let (a, b) = (&s.args[0], &s.args[1]);
                if op_at(a) == Some(Operator::Count) && op_at(b) == Some(Operator::Count) {
                    let word = match op {
                        Operator::Gt | Operator::Geq => "more",
                        Operator::Lt | Operator::Leq => "less",
                        _ => "same",
                    };
                    tags.insert(format!("Compar:{word}"));
                } else if op == Operator::Eq
                    && op_at(a) == Some(Operator::QueryAttribute)
                    && op_at(b) == Some(Operator::QueryAttribute)
                {
                    let cat = |x: &Arg| step_ref(x).and_then(|j| steps[j].args.get(1)).and_then(literal);
                    if let (Some(x), Some(y)) = (cat(a), cat(b)) {
                        if x == y {
                            tags.insert(format!("SameAttr:{x}"));
                        }
                    }
                } else if let (Some(j), Some(k)) = (step_ref(a), number(b)) {
                    let existence = op == Operator::Gt && k == 0;
                    if steps[j].op == Operator::Count && !existence && !counts_labels(j) {
                        tags.insert(format!("Num:{k}"));
                    }
                }
            }
            _ => {}
        }
    }

    for (j, s) in steps.iter().enumerate() {
        if s.op != Operator::Count || counts_labels(j) {
            continue;
        }
        let consumers: Vec<&Step> = steps
            .iter()
            .filter(|t| t.args.iter().any(|a| step_ref(a) == Some(j)))
            .collect();
        let only_existence = !consumers.is_empty()
            && consumers
                .iter()
                .all(|t| t.op == Operator::Gt && t.args.get(1).and_then(number) == Some(0));
        if !only_existence {
            tags.insert("Count".to_string());
            break;
        }
    }
    tags
}

/// For a program ending in `Choose(@b, first, second)`, two boolean
/// programs: `b` itself, and `b` with the option swapped for the other one.
/// The swap hits the latest step in `b`'s closure that names `first`.
pub fn option_programs(p: &Program) -> Option<[Program; 2]> {
    let last = p.steps().last()?;
    if last.op != Operator::Choose {
        return None;
    }
    let b = step_ref(&last.args[0])?;
    let first = literal(&last.args[1])?;
    let second = literal(&last.args[2])?;
    let prefix: Vec<Step> = p.steps()[..=b].to_vec();
    let closure = p.dependency_closure(b);
    let mut swapped = prefix.clone();
    let (si, ai) = closure.iter().rev().find_map(|&j| {
        swapped[j]
            .args
            .iter()
            .position(|a| literal(a) == Some(first))
            .map(|i| (j, i))
    })?;
    swapped[si].args[ai] = lit(second);
    Some([Program::new(prefix).ok()?, Program::new(swapped).ok()?])
}
