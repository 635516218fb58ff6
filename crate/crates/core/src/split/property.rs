//! Binary properties of records.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::program::{Answer, Arg, Operator, Program, Ref};
use crate::question::{derive_tags, TemplateId};
use crate::record::ExampleRecord;

/// Tag families carried by programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TagFamily {
    Quant,
    Compar,
    GroupBy,
    Num,
    Attr,
    SameAttr,
    Logic,
    Count,
}

impl TagFamily {
    const ALL: [TagFamily; 8] = [
        TagFamily::Quant,
        TagFamily::Compar,
        TagFamily::GroupBy,
        TagFamily::Num,
        TagFamily::Attr,
        TagFamily::SameAttr,
        TagFamily::Logic,
        TagFamily::Count,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TagFamily::Quant => "Quant",
            TagFamily::Compar => "Compar",
            TagFamily::GroupBy => "GroupBy",
            TagFamily::Num => "Num",
            TagFamily::Attr => "Attr",
            TagFamily::SameAttr => "SameAttr",
            TagFamily::Logic => "Logic",
            TagFamily::Count => "Count",
        }
    }

    fn parse(s: &str) -> Option<TagFamily> {
        match s {
            "Group" => Some(TagFamily::GroupBy),
            _ => Self::ALL.into_iter().find(|f| f.name() == s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnswerKind {
    Bool,
    Num,
    Attr,
    Noun,
    Rel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    /// `Has-X`, or `Has-X-Y` with a lower-cased instance.
    Has(TagFamily, Option<String>),
    HasQuantCompScope,
    RelMod,
    VShape,
    Chain,
    Template(TemplateId),
    Ans(AnswerKind),
    Lexical(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown property {0:?}")]
pub struct PropertyError(pub String);

impl FromStr for Property {
    type Err = PropertyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PropertyError(s.to_string());
        match s {
            "Has-Quant-CompScope" => return Ok(Property::HasQuantCompScope),
            "RM" => return Ok(Property::RelMod),
            "V" => return Ok(Property::VShape),
            "C" => return Ok(Property::Chain),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("Has-") {
            let (family, instance) = match rest.split_once('-') {
                Some((f, i)) => (f, Some(i)),
                None => (rest, None),
            };
            let family = TagFamily::parse(family).ok_or_else(err)?;
            let instance = instance.map(|i| match (family, i) {
                (TagFamily::Quant, "None") => "no".to_string(),
                (TagFamily::Compar, "Same" | "SameNumber") => "same".to_string(),
                _ => i.to_lowercase(),
            });
            if matches!(family, TagFamily::GroupBy | TagFamily::Attr | TagFamily::Count) && instance.is_some() {
                return Err(err());
            }
            if family == TagFamily::Num && instance.as_deref().is_some_and(|i| i.parse::<u64>().is_err()) {
                return Err(err());
            }
            return Ok(Property::Has(family, instance));
        }
        if let Some(t) = s.strip_prefix("TPL-") {
            return TemplateId::from_name(t).map(Property::Template).ok_or_else(err);
        }
        if let Some(a) = s.strip_prefix("Ans-") {
            let kind = match a {
                "Bool" => AnswerKind::Bool,
                "Num" => AnswerKind::Num,
                "Attr" => AnswerKind::Attr,
                "Noun" => AnswerKind::Noun,
                "Rel" => AnswerKind::Rel,
                _ => return Err(err()),
            };
            return Ok(Property::Ans(kind));
        }
        if let Some(x) = s.strip_prefix("Lexical-") {
            if !x.is_empty() {
                return Ok(Property::Lexical(x.to_string()));
            }
        }
        Err(err())
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Has(family, None) => write!(f, "Has-{}", family.name()),
            Property::Has(family, Some(i)) => {
                let mut c = i.chars();
                let cap: String = c.next().into_iter().flat_map(char::to_uppercase).chain(c).collect();
                write!(f, "Has-{}-{cap}", family.name())
            }
            Property::HasQuantCompScope => f.write_str("Has-Quant-CompScope"),
            Property::RelMod => f.write_str("RM"),
            Property::VShape => f.write_str("V"),
            Property::Chain => f.write_str("C"),
            Property::Template(t) => write!(f, "TPL-{}", t.name()),
            Property::Ans(k) => write!(f, "Ans-{k:?}"),
            Property::Lexical(x) => write!(f, "Lexical-{x}"),
        }
    }
}

fn tags(r: &ExampleRecord) -> Vec<String> {
    if r.properties.tags.is_empty() {
        derive_tags(&r.program).into_iter().collect()
    } else {
        r.properties.tags.clone()
    }
}

/// Whether some quantifier's domain is narrowed by an attribute or a
/// relation.
pub fn quantifier_has_complex_scope(p: &Program) -> bool {
    let steps = p.steps();
    steps.iter().any(|s| {
        s.op.is_quantifier()
            && match s.args.first() {
                Some(Arg::Ref(Ref::Step(j))) => p.dependency_closure(*j).iter().any(|&k| {
                    matches!(
                        steps[k].op,
                        Operator::Filter | Operator::WithRelation | Operator::WithRelationObject
                    )
                }),
                _ => false,
            }
    })
}

fn answer_kind(r: &ExampleRecord) -> AnswerKind {
    match &r.answer {
        Answer::Bool(_) => AnswerKind::Bool,
        Answer::Number(_) => AnswerKind::Num,
        Answer::Label(_) => match r.template {
            TemplateId::QueryAttr | TemplateId::ChooseAttr => AnswerKind::Attr,
            TemplateId::ChooseRel => AnswerKind::Rel,
            _ => AnswerKind::Noun,
        },
    }
}

pub fn has_property(r: &ExampleRecord, p: &Property) -> bool {
    match p {
        Property::Has(family, instance) => {
            let name = family.name();
            tags(r).iter().any(|t| match (t.split_once(':'), instance) {
                (Some((f, _)), None) => f == name,
                (Some((f, i)), Some(want)) => f == name && i == want,
                (None, None) => t == name,
                (None, Some(_)) => false,
            })
        }
        Property::HasQuantCompScope => quantifier_has_complex_scope(&r.program),
        Property::RelMod => r.subgraph.has_modifier(),
        Property::VShape => r.subgraph.has_v_shape(),
        Property::Chain => r.subgraph.has_chain(),
        Property::Template(t) => r.template == *t,
        Property::Ans(k) => answer_kind(r) == *k,
        Property::Lexical(x) => r.subgraph.nodes().iter().any(|n| n.name == x.as_str()),
    }
}
