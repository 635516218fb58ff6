//! Question templates, their preconditions and instantiation.

mod build;
mod compile;
mod instantiate;
mod pair;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build, Built, Choices};
pub use compile::{derive_tags, lit, option_programs, ProgramBuilder};
pub use instantiate::Generator;
pub use pair::pair_alternate_answer;

use crate::miner::DistractorCandidate;
use crate::subgraph::{NodeKind, Subgraph};

macro_rules! templates {
    ($($v:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum TemplateId { $($v),* }

        impl TemplateId {
            pub const ALL: [TemplateId; 15] = [$(TemplateId::$v),*];

            pub fn name(self) -> &'static str {
                match self { $(TemplateId::$v => stringify!($v)),* }
            }
        }
    };
}

templates!(
    VerifyAttr,
    ChooseAttr,
    QueryAttr,
    CompareCount,
    Count,
    VerifyCount,
    CountGroupBy,
    VerifyCountGroupBy,
    VerifyLogic,
    VerifyQuant,
    VerifyQuantAttr,
    ChooseObject,
    QueryObject,
    VerifySameAttr,
    ChooseRel,
);

impl TemplateId {
    pub fn from_name(name: &str) -> Option<TemplateId> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn spec(self) -> &'static TemplateSpec {
        &SPECS[self as usize]
    }

    /// Shape of the answer, as counted in corpus statistics.
    pub fn answer_shape(self) -> AnswerShape {
        use TemplateId::*;
        match self {
            ChooseAttr | ChooseObject | ChooseRel => AnswerShape::Choice,
            Count | CountGroupBy => AnswerShape::HowMany,
            QueryAttr | QueryObject => AnswerShape::Open,
            _ => AnswerShape::TrueFalse,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerShape {
    TrueFalse,
    Choice,
    HowMany,
    Open,
}

/// What the subgraph must offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    RootAttribute,
    /// The root attribute belongs to a known category.
    CategorizedRootAttribute,
    /// A root relation without modifiers.
    PlainRootRelation,
    /// An object reached by a root relation or its modifier with nothing
    /// attached to it.
    BareTarget,
    /// A root attribute or root relation that can serve as quantifier scope.
    ScopePart,
    /// Source objects matching the root carry an attribute whose category
    /// differs from the root attribute's.
    CategorizedDomain,
}

/// Which distractors make the question worth asking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistractorRule {
    /// (no conditions)
    Unconstrained,
    /// At least one distractor supplies a second subgraph.
    Any,
    /// A distractor differs at the asked node and at one more node, and its
    /// image does not contain the referent.
    FocusAndElsewhere,
    /// A distractor's root attribute shares the root attribute's category
    /// while the rest of it differs.
    SameCategoryRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImagePolicy {
    /// Positives and distractors in an rng-chosen mix.
    Mixed,
    /// The source plus distractors.
    DistractorsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateSpec {
    pub id: TemplateId,
    pub support: &'static [Support],
    pub distractors: DistractorRule,
    pub images: ImagePolicy,
    pub min_images: usize,
}

use DistractorRule as D;
use ImagePolicy as I;
use Support as S;

pub const SPECS: [TemplateSpec; 15] = [
    TemplateSpec {
        id: TemplateId::VerifyAttr,
        support: &[S::RootAttribute],
        distractors: D::FocusAndElsewhere,
        images: I::DistractorsOnly,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::ChooseAttr,
        support: &[S::RootAttribute],
        distractors: D::FocusAndElsewhere,
        images: I::DistractorsOnly,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::QueryAttr,
        support: &[S::CategorizedRootAttribute],
        distractors: D::FocusAndElsewhere,
        images: I::DistractorsOnly,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::CompareCount,
        support: &[],
        distractors: D::Any,
        images: I::Mixed,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::Count,
        support: &[],
        distractors: D::Unconstrained,
        images: I::Mixed,
        min_images: 1,
    },
    TemplateSpec {
        id: TemplateId::VerifyCount,
        support: &[],
        distractors: D::Unconstrained,
        images: I::Mixed,
        min_images: 1,
    },
    TemplateSpec {
        id: TemplateId::CountGroupBy,
        support: &[],
        distractors: D::Unconstrained,
        images: I::Mixed,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::VerifyCountGroupBy,
        support: &[],
        distractors: D::Unconstrained,
        images: I::Mixed,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::VerifyLogic,
        support: &[],
        distractors: D::Any,
        images: I::Mixed,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::VerifyQuant,
        support: &[S::ScopePart],
        distractors: D::Unconstrained,
        images: I::Mixed,
        min_images: 1,
    },
    TemplateSpec {
        id: TemplateId::VerifyQuantAttr,
        support: &[S::CategorizedDomain],
        distractors: D::Unconstrained,
        images: I::Mixed,
        min_images: 1,
    },
    TemplateSpec {
        id: TemplateId::ChooseObject,
        support: &[S::BareTarget],
        distractors: D::FocusAndElsewhere,
        images: I::DistractorsOnly,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::QueryObject,
        support: &[S::PlainRootRelation],
        distractors: D::FocusAndElsewhere,
        images: I::DistractorsOnly,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::VerifySameAttr,
        support: &[S::CategorizedRootAttribute],
        distractors: D::SameCategoryRoot,
        images: I::DistractorsOnly,
        min_images: 2,
    },
    TemplateSpec {
        id: TemplateId::ChooseRel,
        support: &[S::PlainRootRelation],
        distractors: D::FocusAndElsewhere,
        images: I::DistractorsOnly,
        min_images: 2,
    },
];

/// "less", "more" or "same number".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Comparative {
    Less,
    #[default]
    More,
    SameNumber,
}

impl Comparative {
    pub const ALL: [Comparative; 3] = [Comparative::Less, Comparative::More, Comparative::SameNumber];

    pub fn word(self) -> &'static str {
        match self {
            Comparative::Less => "less",
            Comparative::More => "more",
            Comparative::SameNumber => "same number",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quantifier {
    #[default]
    All,
    Some,
    No,
}

impl Quantifier {
    pub const ALL: [Quantifier; 3] = [Quantifier::All, Quantifier::Some, Quantifier::No];

    pub fn word(self) -> &'static str {
        match self {
            Quantifier::All => "all",
            Quantifier::Some => "some",
            Quantifier::No => "no",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Logic {
    #[default]
    And,
    Or,
}

impl Logic {
    pub const ALL: [Logic; 2] = [Logic::And, Logic::Or];

    pub fn word(self) -> &'static str {
        match self {
            Logic::And => "and",
            Logic::Or => "or",
        }
    }
}

/// "at least", "at most" or "exactly".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountCompare {
    AtLeast,
    AtMost,
    #[default]
    Exactly,
}

impl CountCompare {
    pub const ALL: [CountCompare; 3] = [CountCompare::AtLeast, CountCompare::AtMost, CountCompare::Exactly];

    pub fn word(self) -> &'static str {
        match self {
            CountCompare::AtLeast => "at least",
            CountCompare::AtMost => "at most",
            CountCompare::Exactly => "exactly",
        }
    }

    pub fn holds(self, value: usize, k: usize) -> bool {
        match self {
            CountCompare::AtLeast => value >= k,
            CountCompare::AtMost => value <= k,
            CountCompare::Exactly => value == k,
        }
    }
}

/// Numbers offered in counting slots.
pub const NUMBERS: std::ops::RangeInclusive<u64> = 1..=5;

/// The node a question asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Focus {
    #[default]
    None,
    RootAttribute,
    /// Target object of the i-th root relation.
    RelationTarget(usize),
    /// Target object of modifier j of the i-th root relation.
    ModifierTarget(usize, usize),
    /// The i-th root relation node.
    Relation(usize),
}

impl Focus {
    fn modifier_position(g: &Subgraph, rel: usize, m: usize) -> Option<usize> {
        let rp = g.root_relation_position(rel)?;
        g.nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Modifier && n.parent == Some(rp))
            .map(|(i, _)| i)
            .nth(m)
    }

    /// Preorder position of the asked node.
    pub fn position(self, g: &Subgraph) -> Option<usize> {
        match self {
            Focus::None => None,
            Focus::RootAttribute => g.root_attribute_position(),
            Focus::RelationTarget(i) => g.root_relation_position(i).map(|p| p + 1),
            Focus::ModifierTarget(i, j) => Self::modifier_position(g, i, j).map(|p| p + 1),
            Focus::Relation(i) => g.root_relation_position(i),
        }
    }

    /// Positions removed from g to obtain the referent.
    pub fn removed(self, g: &Subgraph) -> BTreeSet<usize> {
        match self {
            Focus::None => BTreeSet::new(),
            Focus::RootAttribute => g.root_attribute_position().into_iter().collect(),
            Focus::RelationTarget(i) | Focus::Relation(i) => {
                g.root_relation_position(i).map(|p| g.subtree(p)).unwrap_or_default()
            }
            Focus::ModifierTarget(i, j) => Self::modifier_position(g, i, j).map(|p| g.subtree(p)).unwrap_or_default(),
        }
    }

    /// g without the asked part: the phrase the question refers through.
    pub fn referent(self, g: &Subgraph) -> Subgraph {
        g.prune(&self.removed(g))
    }

    /// Whether a distractor witness differs at the asked node and at least
    /// one node outside the asked part.
    pub fn differs_here_and_elsewhere(self, g: &Subgraph, d: &DistractorCandidate) -> bool {
        let Some(pos) = self.position(g) else { return false };
        let removed = self.removed(g);
        d.substitutions.iter().any(|s| s.position == pos)
            && d.substitutions.iter().any(|s| s.position != pos && !removed.contains(&s.position))
    }

    pub fn substitutes_here(self, g: &Subgraph, d: &DistractorCandidate) -> Option<String> {
        let pos = self.position(g)?;
        d.substitutions.iter().find(|s| s.position == pos).map(|s| s.to.clone())
    }
}

/// Outcome of a precondition check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreconditionReport {
    pub template: TemplateId,
    /// Asked nodes for which every condition holds.
    pub foci: Vec<Focus>,
    pub failures: Vec<String>,
}

impl PreconditionReport {
    pub fn passed(&self) -> bool {
        !self.foci.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Skip {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("not enough images: {have} < {need}")]
    Inventory { have: usize, need: usize },
    #[error("execution failed: {0}")]
    Execution(String),
    #[error("both or neither option holds")]
    Dishonest,
    #[error("degenerate question: {0}")]
    Degenerate(&'static str),
}

impl Skip {
    /// Short reason used when tallying skips.
    pub fn reason(&self) -> String {
        match self {
            Skip::Precondition(_) => "precondition".into(),
            Skip::Inventory { .. } => "inventory".into(),
            Skip::Execution(class) => format!("execution: {class}"),
            Skip::Dishonest => "choice honesty".into(),
            Skip::Degenerate(what) => format!("degenerate: {what}"),
        }
    }
}
