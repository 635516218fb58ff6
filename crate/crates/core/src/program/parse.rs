//! Program text: one step per line (or `;`-separated), `i = Op(arg, ...)`,
//! references `@j`, modifier constraints `name=@j`, sub-programs
//! `{x| k = Op(...); out = Op(@k, ...)}`. Literals containing separators are
//! double-quoted.

use super::{Arg, Operator, Program, ProgramError, Ref, Slot, Step, SubProgram};

enum RawArg {
    Token { text: String, quoted: bool },
    Ref(String),
    Modifier { name: String, target: String },
    Sub { var: String, steps: Vec<RawStep> },
}

struct RawStep {
    label: String,
    op: String,
    args: Vec<RawArg>,
}

struct Lexer {
    chars: Vec<char>,
    at: usize,
    step: usize,
}

impl Lexer {
    fn err(&self, message: impl Into<String>) -> ProgramError {
        ProgramError::Syntax {
            step: self.step,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).copied()
    }

    fn spaces(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.at += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ProgramError> {
        self.spaces();
        if self.peek() == Some(c) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.err(format!(
                "expected '{c}', found {}",
                self.peek().map(|c| format!("'{c}'")).unwrap_or_else(|| "end of input".into())
            )))
        }
    }

    fn ident(&mut self) -> Result<String, ProgramError> {
        self.spaces();
        let start = self.at;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '.') {
            self.at += 1;
        }
        if start == self.at {
            return Err(self.err("expected an identifier"));
        }
        Ok(self.chars[start..self.at].iter().collect())
    }

    fn program(&mut self) -> Result<Vec<RawStep>, ProgramError> {
        let mut steps = Vec::new();
        loop {
            while matches!(self.peek(), Some(' ' | '\t' | '\r' | '\n' | ';')) {
                self.at += 1;
            }
            if self.peek().is_none() {
                return Ok(steps);
            }
            self.step = steps.len() + 1;
            steps.push(self.step_def()?);
            self.spaces();
            match self.peek() {
                None | Some('\n' | ';') => {}
                Some(c) => return Err(self.err(format!("unexpected '{c}' after step"))),
            }
        }
    }

    fn step_def(&mut self) -> Result<RawStep, ProgramError> {
        let label = self.ident()?;
        self.expect('=')?;
        let op = self.ident()?;
        self.expect('(')?;
        let mut args = Vec::new();
        self.spaces();
        if self.peek() == Some(')') {
            self.at += 1;
        } else {
            loop {
                args.push(self.arg()?);
                self.spaces();
                match self.peek() {
                    Some(',') => self.at += 1,
                    Some(')') => {
                        self.at += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')' in argument list")),
                }
            }
        }
        Ok(RawStep { label, op, args })
    }

    fn quoted(&mut self) -> Result<String, ProgramError> {
        self.at += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated quoted literal")),
                Some('"') => {
                    self.at += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.at += 1;
                    let c = self.peek().ok_or_else(|| self.err("dangling escape"))?;
                    out.push(c);
                    self.at += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.at += 1;
                }
            }
        }
    }

    fn arg(&mut self) -> Result<RawArg, ProgramError> {
        self.spaces();
        match self.peek() {
            Some('{') => {
                self.at += 1;
                let var = self.ident()?;
                self.expect('|')?;
                let mut steps = Vec::new();
                loop {
                    while matches!(self.peek(), Some(' ' | '\t' | '\r' | '\n' | ';')) {
                        self.at += 1;
                    }
                    if self.peek() == Some('}') {
                        self.at += 1;
                        break;
                    }
                    if self.peek().is_none() {
                        return Err(self.err("unterminated sub-program"));
                    }
                    steps.push(self.step_def()?);
                }
                Ok(RawArg::Sub { var, steps })
            }
            Some('@') => {
                self.at += 1;
                Ok(RawArg::Ref(self.ident()?))
            }
            _ => {
                let (text, quoted) = if self.peek() == Some('"') {
                    (self.quoted()?, true)
                } else {
                    let start = self.at;
                    while self.peek().is_some_and(|c| !",)}=;\n({\"@".contains(c)) {
                        self.at += 1;
                    }
                    if matches!(self.peek(), Some('(' | '{' | '"' | '@')) {
                        return Err(self.err("unexpected character in literal; quote it"));
                    }
                    let t: String = self.chars[start..self.at].iter().collect();
                    (t.trim().to_string(), false)
                };
                if !quoted && text.is_empty() {
                    return Err(self.err("empty argument"));
                }
                self.spaces();
                if self.peek() == Some('=') {
                    self.at += 1;
                    self.spaces();
                    let target = if self.peek() == Some('@') {
                        self.at += 1;
                        format!("@{}", self.ident()?)
                    } else {
                        self.ident()?
                    };
                    return Ok(RawArg::Modifier { name: text, target });
                }
                Ok(RawArg::Token { text, quoted })
            }
        }
    }
}

struct Scope<'a> {
    labels: &'a [String],
    var: &'a str,
}

fn resolve_ref(label: &str, step_no: usize, scope: Option<&Scope>, later_local: &[&str]) -> Result<Ref, ProgramError> {
    if let Some(sc) = scope {
        if let Some(i) = sc.labels.iter().rposition(|l| l == label) {
            return Ok(Ref::Local(i));
        }
    }
    if let Ok(n) = label.parse::<usize>() {
        if n >= 1 && n < step_no {
            return Ok(Ref::Step(n - 1));
        }
        if scope.is_none() || !later_local.contains(&label) {
            return Err(ProgramError::ForwardReference {
                step: step_no,
                target: label.to_string(),
            });
        }
    }
    if later_local.contains(&label) {
        return Err(ProgramError::ForwardReference {
            step: step_no,
            target: label.to_string(),
        });
    }
    Err(ProgramError::UnknownReference {
        step: step_no,
        target: label.to_string(),
    })
}

fn resolve_step(raw: RawStep, step_no: usize, scope: Option<&Scope>, later_local: &[&str]) -> Result<Step, ProgramError> {
    let op = Operator::from_name(&raw.op).ok_or_else(|| ProgramError::UnknownOperator {
        step: step_no,
        name: raw.op.clone(),
    })?;
    let slots = op.slots();
    let mut args = Vec::with_capacity(raw.args.len());
    for (i, a) in raw.args.into_iter().enumerate() {
        let slot = slots.get(i).copied();
        args.push(match a {
            RawArg::Ref(l) => Arg::Ref(resolve_ref(&l, step_no, scope, later_local)?),
            RawArg::Modifier { name, target } => {
                let target = match (target.strip_prefix('@'), scope) {
                    (Some(label), _) => resolve_ref(label, step_no, scope, later_local)?,
                    (None, Some(sc)) if target == sc.var => Ref::Var,
                    (None, _) => {
                        return Err(ProgramError::UnknownReference {
                            step: step_no,
                            target,
                        })
                    }
                };
                Arg::Modifier { name, target }
            }
            RawArg::Sub { var, steps } => {
                let all: Vec<String> = steps.iter().map(|s| s.label.clone()).collect();
                let mut out = Vec::with_capacity(steps.len());
                for (k, s) in steps.into_iter().enumerate() {
                    let later: Vec<&str> = all[k..].iter().map(String::as_str).collect();
                    let inner = Scope {
                        labels: &all[..k],
                        var: &var,
                    };
                    out.push(resolve_step(s, step_no, Some(&inner), &later)?);
                }
                Arg::Sub(SubProgram { var, steps: out })
            }
            RawArg::Token { text, quoted } => {
                let literal_slot = matches!(slot, Some(Slot::Literal));
                let number_slot = matches!(slot, Some(Slot::Size | Slot::Numeric | Slot::Comparable));
                match scope {
                    Some(sc) if !quoted && !literal_slot && text == sc.var => Arg::Ref(Ref::Var),
                    _ if !quoted && !literal_slot && (number_slot || slot.is_none()) => match text.parse::<u64>() {
                        Ok(n) => Arg::Number(n),
                        Err(_) => Arg::Literal(text),
                    },
                    _ => Arg::Literal(text),
                }
            }
        });
    }
    Ok(Step {
        label: raw.label,
        op,
        args,
    })
}

/// Parses and type-checks program text.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let mut lexer = Lexer {
        chars: text.chars().collect(),
        at: 0,
        step: 1,
    };
    let raw = lexer.program()?;
    let mut steps = Vec::with_capacity(raw.len());
    for (i, s) in raw.into_iter().enumerate() {
        steps.push(resolve_step(s, i + 1, None, &[])?);
    }
    Program::new(steps)
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.trim() != s
        || s.chars().any(|c| ",()}{=;\n\"@\\".contains(c))
}

pub(crate) fn literal(s: &str) -> String {
    if !needs_quotes(s) {
        return s.to_string();
    }
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn render_ref(r: Ref, local: Option<&SubProgram>) -> String {
    match r {
        Ref::Step(j) => format!("@{}", j + 1),
        Ref::Local(k) => format!("@{}", local.map(|s| s.steps[k].label.as_str()).unwrap_or("?")),
        Ref::Var => local.map(|s| s.var.clone()).unwrap_or_else(|| "x".into()),
    }
}

fn render_step(s: &Step, local: Option<&SubProgram>) -> String {
    let args: Vec<String> = s
        .args
        .iter()
        .map(|a| match a {
            Arg::Ref(r) => render_ref(*r, local),
            Arg::Literal(l) => literal(l),
            Arg::Number(n) => n.to_string(),
            Arg::Modifier { name, target } => format!("{}={}", literal(name), render_ref(*target, local)),
            Arg::Sub(sub) => {
                let inner: Vec<String> = sub.steps.iter().map(|t| render_step(t, Some(sub))).collect();
                format!("{{{}| {}}}", sub.var, inner.join("; "))
            }
        })
        .collect();
    format!("{} = {}({})", s.label, s.op.name(), args.join(", "))
}

/// Canonical text, one step per line, no trailing newline.
pub(crate) fn serialize(p: &Program) -> String {
    p.steps().iter().map(|s| render_step(s, None)).collect::<Vec<_>>().join("\n")
}
