//! English noun phrases for subgraphs.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::lexicon::PluralTable;
use crate::subgraph::{PatternObject, RelationPattern, Subgraph};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescribeOptions {
    pub plural: bool,
    /// Preorder positions to leave out; dependents go with them.
    pub mask: BTreeSet<usize>,
}

impl DescribeOptions {
    pub fn singular() -> Self {
        Self::default()
    }

    pub fn plural() -> Self {
        DescribeOptions {
            plural: true,
            ..Self::default()
        }
    }

    pub fn masking(mut self, positions: impl IntoIterator<Item = usize>) -> Self {
        self.mask.extend(positions);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Realizer {
    plurals: PluralTable,
}

impl Realizer {
    pub fn new(plurals: PluralTable) -> Self {
        Realizer { plurals }
    }

    pub fn builtin() -> &'static Realizer {
        static R: OnceLock<Realizer> = OnceLock::new();
        R.get_or_init(|| Realizer::new(PluralTable::builtin()))
    }

    /// Nouns like "jeans" that take no indefinite article.
    pub fn plural_only(&self, noun: &str) -> bool {
        noun.ends_with('s') && self.pluralize(noun) == noun
    }

    pub fn pluralize(&self, noun: &str) -> String {
        self.plurals.pluralize(noun)
    }

    /// "[attribute] name that is REL a TARGET and is REL2 ..." without a
    /// leading article.
    pub fn describe(&self, g: &Subgraph, options: &DescribeOptions) -> String {
        let pruned;
        let g = if options.mask.is_empty() {
            g
        } else {
            pruned = g.prune(&options.mask);
            &pruned
        };
        self.phrase(g.root(), options.plural, 0)
    }

    /// Head noun with its attribute, nothing else. Multi-word attributes
    /// ("on fire") follow the noun.
    pub fn head(&self, o: &PatternObject, plural: bool) -> String {
        let name = if plural { self.pluralize(&o.name) } else { o.name.clone() };
        match &o.attribute {
            Some(a) if a.contains(' ') => format!("{name} {a}"),
            Some(a) => format!("{a} {name}"),
            None => name,
        }
    }

    fn phrase(&self, o: &PatternObject, plural: bool, depth: usize) -> String {
        let mut out = self.head(o, plural);
        let copula = if plural { "are" } else { "is" };
        for (i, r) in o.relations.iter().enumerate() {
            out.push_str(if i == 0 { " that " } else { " and " });
            out.push_str(copula);
            out.push(' ');
            out.push_str(&self.relation_phrase(r, depth));
        }
        out
    }

    /// "REL a TARGET [MOD a TARGET]".
    pub fn relation_phrase(&self, r: &RelationPattern, depth: usize) -> String {
        let mut out = format!("{} {}", r.name, self.object_phrase(&r.target, depth + 1));
        for m in &r.modifiers {
            out.push(' ');
            out.push_str(&m.name);
            out.push(' ');
            out.push_str(&self.object_phrase(&m.target, depth + 1));
        }
        out
    }

    /// Singular reference to a target; nested clauses are parenthesized.
    pub fn object_phrase(&self, o: &PatternObject, depth: usize) -> String {
        let phrase = self.phrase(o, false, depth);
        let inner = if self.plural_only(&o.name) { phrase } else { with_article(&phrase) };
        if o.relations.is_empty() {
            inner
        } else {
            format!("({inner})")
        }
    }
}

pub fn describe(g: &Subgraph, options: &DescribeOptions) -> String {
    Realizer::builtin().describe(g, options)
}

pub fn article(phrase: &str) -> &'static str {
    match phrase.chars().next() {
        Some(c) if "aeiouAEIOU".contains(c) => "an",
        _ => "a",
    }
}

pub fn with_article(phrase: &str) -> String {
    format!("{} {phrase}", article(phrase))
}

pub fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
