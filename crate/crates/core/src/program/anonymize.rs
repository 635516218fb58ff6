//! Programs with node names replaced by a placeholder.

use std::fmt;

use serde::{Serialize, Serializer};

use super::{is_node_literal, Arg, Program, Ref, Step, SubProgram};

pub const PLACEHOLDER: &str = "▢";

/// A program whose node literals are all [`PLACEHOLDER`]. Two programs with the
/// same structure over different names anonymize to equal values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnonymizedProgram(Program);

fn anon_step(s: &Step, label: String) -> Step {
    let args = s
        .args
        .iter()
        .enumerate()
        .map(|(i, a)| match a {
            Arg::Literal(_) if is_node_literal(s.op, i) => Arg::Literal(PLACEHOLDER.into()),
            Arg::Literal(l) => Arg::Literal(l.clone()),
            Arg::Modifier { target, .. } => Arg::Modifier {
                name: PLACEHOLDER.into(),
                target: *target,
            },
            Arg::Sub(sub) => Arg::Sub(SubProgram {
                var: "x".into(),
                steps: sub
                    .steps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| anon_step(t, (k + 1).to_string()))
                    .collect(),
            }),
            other => other.clone(),
        })
        .collect();
    Step { label, op: s.op, args }
}

pub fn anonymize(p: &Program) -> AnonymizedProgram {
    AnonymizedProgram(Program {
        steps: p.steps.iter().map(|s| anon_step(s, s.label.clone())).collect(),
    })
}

impl AnonymizedProgram {
    pub fn program(&self) -> &Program {
        &self.0
    }

    pub fn into_program(self) -> Program {
        self.0
    }
}

fn write_ref(f: &mut fmt::Formatter<'_>, r: Ref) -> fmt::Result {
    match r {
        Ref::Step(j) => write!(f, "@{}", j + 1),
        Ref::Local(k) => write!(f, "@.{}", k + 1),
        Ref::Var => f.write_str("x"),
    }
}

fn write_step(f: &mut fmt::Formatter<'_>, s: &Step) -> fmt::Result {
    write!(f, "{}(", s.op)?;
    for (i, a) in s.args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        match a {
            Arg::Ref(r) => write_ref(f, *r)?,
            Arg::Literal(l) => f.write_str(l)?,
            Arg::Number(n) => write!(f, "{n}")?,
            Arg::Modifier { name, target } => {
                write!(f, "{name}=")?;
                write_ref(f, *target)?;
            }
            Arg::Sub(sub) => {
                f.write_str("{x|")?;
                for (k, t) in sub.steps.iter().enumerate() {
                    if k > 0 {
                        f.write_str("; ")?;
                    }
                    write_step(f, t)?;
                }
                f.write_str("}")?;
            }
        }
    }
    f.write_str(")")
}

/// Compact form, e.g. `Find(▢); Filter(@1,▢); Count(@2)`.
impl fmt::Display for AnonymizedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write_step(f, s)?;
        }
        Ok(())
    }
}

impl Serialize for AnonymizedProgram {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
