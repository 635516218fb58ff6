//! Surface text and program for a template once every slot is decided.

use std::collections::BTreeMap;

use super::{Comparative, CountCompare, Focus, Logic, ProgramBuilder, Quantifier, Skip, TemplateId};
use crate::program::{Arg, Operator, Program, Ref};
use crate::realize::{capitalize, DescribeOptions, Realizer};
use crate::record::SlotValue;
use crate::subgraph::{PatternObject, Subgraph};

use super::compile::lit;

/// Slot decisions taken before rendering. Fields a template does not use are
/// ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Choices {
    pub focus: Focus,
    pub decoy: Option<String>,
    /// Offer the decoy as the first option.
    pub decoy_first: bool,
    pub g2: Option<Subgraph>,
    pub category: Option<String>,
    pub compare: CountCompare,
    pub k: u64,
    pub outer_compare: CountCompare,
    pub outer_k: u64,
    pub comparative: Comparative,
    pub quantifier: Quantifier,
    pub logic: Logic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Built {
    pub question: String,
    pub program: Program,
    pub slots: BTreeMap<String, SlotValue>,
}

fn missing(what: &'static str) -> Skip {
    Skip::Degenerate(what)
}

fn keep_if(compare: CountCompare, k: u64) -> (Operator, u64) {
    match compare {
        CountCompare::AtLeast => (Operator::KeepIfValuesCountGt, k.saturating_sub(1)),
        CountCompare::AtMost => (Operator::KeepIfValuesCountLt, k + 1),
        CountCompare::Exactly => (Operator::KeepIfValuesCountEq, k),
    }
}

fn verify_op(compare: CountCompare) -> Operator {
    match compare {
        CountCompare::AtLeast => Operator::Geq,
        CountCompare::AtMost => Operator::Leq,
        CountCompare::Exactly => Operator::Eq,
    }
}

fn copula(k: u64) -> &'static str {
    if k == 1 {
        "is"
    } else {
        "are"
    }
}

struct Ctx<'a> {
    g: &'a Subgraph,
    c: &'a Choices,
    realizer: &'a Realizer,
    slots: BTreeMap<String, SlotValue>,
}

impl Ctx<'_> {
    fn desc(&self, g: &Subgraph, plural: bool) -> String {
        let opts = if plural { DescribeOptions::plural() } else { DescribeOptions::singular() };
        self.realizer.describe(g, &opts)
    }

    fn slot(&mut self, name: &str, value: SlotValue) {
        self.slots.insert(name.to_string(), value);
    }

    fn g2(&self) -> Result<&Subgraph, Skip> {
        self.c.g2.as_ref().ok_or(missing("second subgraph"))
    }

    fn decoy(&self) -> Result<&str, Skip> {
        self.c.decoy.as_deref().ok_or(missing("decoy"))
    }

    fn category(&self) -> Result<&str, Skip> {
        self.c.category.as_deref().ok_or(missing("category"))
    }

    fn options<'s>(&self, truth: &'s str, decoy: &'s str) -> (&'s str, &'s str) {
        if self.c.decoy_first {
            (decoy, truth)
        } else {
            (truth, decoy)
        }
    }

    fn root_attribute(&self) -> Result<String, Skip> {
        self.g.root().attribute.clone().ok_or(missing("root attribute"))
    }

    fn unique(b: &mut ProgramBuilder, g: &Subgraph) -> Arg {
        let set = b.objects(g.root());
        b.push(Operator::Unique, vec![set])
    }
}

pub fn build(t: TemplateId, g: &Subgraph, choices: &Choices, realizer: &Realizer) -> Result<Built, Skip> {
    let mut cx = Ctx {
        g,
        c: choices,
        realizer,
        slots: BTreeMap::new(),
    };
    let mut b = ProgramBuilder::new();
    let question = match t {
        TemplateId::VerifyAttr => {
            let attr = cx.root_attribute()?;
            let r = Focus::RootAttribute.referent(g);
            let rd = cx.desc(&r, false);
            let u = Ctx::unique(&mut b, &r);
            b.push(Operator::VerifyAttribute, vec![u, lit(&attr)]);
            cx.slot("G-NoAttribute", SlotValue::Subgraph(rd.clone()));
            cx.slot("Attribute", SlotValue::Subgraph(attr.clone()));
            format!("Is the {rd} {attr}?")
        }
        TemplateId::ChooseAttr => {
            let attr = cx.root_attribute()?;
            let decoy = cx.decoy()?.to_string();
            let (o1, o2) = cx.options(&attr, &decoy);
            let r = Focus::RootAttribute.referent(g);
            let rd = cx.desc(&r, false);
            let u = Ctx::unique(&mut b, &r);
            let v = b.push(Operator::VerifyAttribute, vec![u, lit(o1)]);
            b.push(Operator::Choose, vec![v, lit(o1), lit(o2)]);
            cx.slot("G-NoAttribute", SlotValue::Subgraph(rd.clone()));
            cx.slot("Attribute", SlotValue::Subgraph(attr.clone()));
            cx.slot("DecoyAttribute", SlotValue::Foreign(decoy.clone()));
            format!("Is the {rd} {o1} or {o2}?")
        }
        TemplateId::QueryAttr => {
            let cat = cx.category()?.to_string();
            let r = Focus::RootAttribute.referent(g);
            let rd = cx.desc(&r, false);
            let u = Ctx::unique(&mut b, &r);
            b.push(Operator::QueryAttribute, vec![u, lit(&cat)]);
            cx.slot("G-NoAttribute", SlotValue::Subgraph(rd.clone()));
            cx.slot("Category", SlotValue::Word(cat.clone()));
            format!("What is the {cat} of the {rd}?")
        }
        TemplateId::CompareCount => {
            let g2 = cx.g2()?.clone();
            let (gd, g2d) = (cx.desc(g, true), cx.desc(&g2, true));
            let a = b.objects(g.root());
            let ca = b.push(Operator::Count, vec![a]);
            let s2 = b.objects(g2.root());
            let cb = b.push(Operator::Count, vec![s2]);
            let op = match choices.comparative {
                Comparative::More => Operator::Gt,
                Comparative::Less => Operator::Lt,
                Comparative::SameNumber => Operator::Eq,
            };
            b.push(op, vec![ca, cb]);
            cx.slot("Comparative", SlotValue::Word(choices.comparative.word().into()));
            cx.slot("G", SlotValue::Subgraph(gd.clone()));
            cx.slot("G2", SlotValue::Foreign(g2d.clone()));
            match choices.comparative {
                Comparative::SameNumber => format!("There are the same number of {gd} as {g2d}"),
                c => format!("There are {} {gd} than {g2d}", c.word()),
            }
        }
        TemplateId::Count => {
            let d = cx.desc(g, true);
            let head = realizer.head(g.root(), true);
            let set = b.objects(g.root());
            b.push(Operator::Count, vec![set]);
            cx.slot("G", SlotValue::Subgraph(d.clone()));
            match d.strip_prefix(&format!("{head} that are ")) {
                Some(pred) => format!("How many {head} are {pred}?"),
                None => format!("How many {d} are there?"),
            }
        }
        TemplateId::VerifyCount => {
            let k = choices.k;
            let d = cx.desc(g, k != 1);
            let set = b.objects(g.root());
            let c = b.push(Operator::Count, vec![set]);
            b.push(verify_op(choices.compare), vec![c, Arg::Number(k)]);
            cx.slot("CountCompare", SlotValue::Word(choices.compare.word().into()));
            cx.slot("Number", SlotValue::Word(k.to_string()));
            cx.slot("G", SlotValue::Subgraph(d.clone()));
            format!("There {} {} {k} {d}", copula(k), choices.compare.word())
        }
        TemplateId::CountGroupBy | TemplateId::VerifyCountGroupBy => {
            let k = choices.k;
            let d = cx.desc(g, k != 1);
            let set = b.objects(g.root());
            let groups = b.push(Operator::GroupByImages, vec![set]);
            let (op, n) = keep_if(choices.compare, k);
            let kept = b.push(op, vec![groups, Arg::Number(n)]);
            let c = b.push(Operator::Count, vec![kept]);
            cx.slot("CountCompare", SlotValue::Word(choices.compare.word().into()));
            cx.slot("Number", SlotValue::Word(k.to_string()));
            cx.slot("G", SlotValue::Subgraph(d.clone()));
            let inner = format!("{} {k} {d}", choices.compare.word());
            if t == TemplateId::CountGroupBy {
                format!("How many images contain {inner}?")
            } else {
                let ok = choices.outer_k;
                b.push(verify_op(choices.outer_compare), vec![c, Arg::Number(ok)]);
                cx.slot("OuterCountCompare", SlotValue::Word(choices.outer_compare.word().into()));
                cx.slot("OuterNumber", SlotValue::Word(ok.to_string()));
                let images = if ok == 1 { "image that contains" } else { "images that contain" };
                format!("There {} {} {ok} {images} {inner}", copula(ok), choices.outer_compare.word())
            }
        }
        TemplateId::VerifyLogic => {
            let g2 = cx.g2()?.clone();
            let (gd, g2d) = (cx.desc(g, true), cx.desc(&g2, true));
            let a = b.objects(g.root());
            let ea = b.exists(a);
            let s2 = b.objects(g2.root());
            let eb = b.exists(s2);
            let op = match choices.logic {
                Logic::And => Operator::And,
                Logic::Or => Operator::Or,
            };
            b.push(op, vec![ea, eb]);
            cx.slot("Logic", SlotValue::Word(choices.logic.word().into()));
            cx.slot("G", SlotValue::Subgraph(gd.clone()));
            cx.slot("G2", SlotValue::Foreign(g2d.clone()));
            match choices.logic {
                Logic::And => format!("Are there both {gd} and {g2d}?"),
                Logic::Or => format!("Are there either {gd} or {g2d}?"),
            }
        }
        TemplateId::VerifyQuant => {
            let domain = choices.focus.referent(g);
            let dd = cx.desc(&domain, true);
            let set = b.objects(domain.root());
            let mut sb = ProgramBuilder::sub();
            let scope = match choices.focus {
                Focus::RootAttribute => {
                    let attr = cx.root_attribute()?;
                    sb.push(Operator::VerifyAttribute, vec![Arg::Ref(Ref::Var), lit(&attr)]);
                    attr
                }
                Focus::Relation(i) => {
                    let r = g.root().relations.get(i).ok_or(missing("scope relation"))?;
                    let target = sb.objects(&r.target);
                    let mut args = vec![Arg::Ref(Ref::Var), target, lit(&r.name)];
                    for m in &r.modifiers {
                        let Arg::Ref(mt) = sb.objects(&m.target) else { unreachable!() };
                        args.push(Arg::Modifier {
                            name: m.name.clone(),
                            target: mt,
                        });
                    }
                    let w = sb.push(Operator::WithRelation, args);
                    sb.exists(w);
                    realizer.relation_phrase(r, 0)
                }
                _ => return Err(missing("quantifier scope")),
            };
            let op = match choices.quantifier {
                Quantifier::All => Operator::All,
                Quantifier::Some => Operator::Some,
                Quantifier::No => Operator::None,
            };
            b.push(op, vec![set, Arg::Sub(sb.into_sub("x"))]);
            cx.slot("Quantifier", SlotValue::Word(choices.quantifier.word().into()));
            cx.slot("Domain", SlotValue::Subgraph(dd.clone()));
            cx.slot("Scope", SlotValue::Subgraph(scope.clone()));
            format!("{} {dd} are {scope}", capitalize(choices.quantifier.word()))
        }
        TemplateId::VerifyQuantAttr => {
            let cat = cx.category()?.to_string();
            let d = cx.desc(g, true);
            let set = b.objects(g.root());
            let v = b.push(Operator::UniqueAttributeValues, vec![set, lit(&cat)]);
            let c = b.push(Operator::Count, vec![v]);
            b.push(Operator::Eq, vec![c, Arg::Number(1)]);
            cx.slot("G", SlotValue::Subgraph(d.clone()));
            cx.slot("Category", SlotValue::Word(cat.clone()));
            format!("Do all {d} have the same {cat}?")
        }
        TemplateId::ChooseObject => {
            let decoy = cx.decoy()?.to_string();
            let r = choices.focus.referent(g);
            let rd = cx.desc(&r, false);
            let (i, j) = match choices.focus {
                Focus::RelationTarget(i) => (i, None),
                Focus::ModifierTarget(i, j) => (i, Some(j)),
                _ => return Err(missing("asked object")),
            };
            let rel = g.root().relations.get(i).ok_or(missing("asked relation"))?;
            let truth = match j {
                None => rel.target.name.clone(),
                Some(j) => rel.modifiers.get(j).ok_or(missing("asked modifier"))?.target.name.clone(),
            };
            let (o1, o2) = cx.options(&truth, &decoy);
            let u = Ctx::unique(&mut b, &r);
            let (rel_text, w) = match j {
                None => {
                    let f = b.push(Operator::Find, vec![lit(o1)]);
                    (rel.name.clone(), b.push(Operator::WithRelation, vec![u, f, lit(&rel.name)]))
                }
                Some(j) => {
                    let t = b.objects(&rel.target);
                    let mut args = vec![u, t, lit(&rel.name)];
                    for (k, m) in rel.modifiers.iter().enumerate() {
                        if k == j {
                            continue;
                        }
                        let Arg::Ref(mt) = b.objects(&m.target) else { unreachable!() };
                        args.push(Arg::Modifier {
                            name: m.name.clone(),
                            target: mt,
                        });
                    }
                    let Arg::Ref(f) = b.push(Operator::Find, vec![lit(o1)]) else { unreachable!() };
                    let mname = &rel.modifiers[j].name;
                    args.push(Arg::Modifier {
                        name: mname.clone(),
                        target: f,
                    });
                    (format!("{} it {mname}", rel.name), b.push(Operator::WithRelation, args))
                }
            };
            let e = b.exists(w);
            b.push(Operator::Choose, vec![e, lit(o1), lit(o2)]);
            cx.slot("G-Subject", SlotValue::Subgraph(rd.clone()));
            cx.slot("Rel", SlotValue::Subgraph(rel_text.clone()));
            cx.slot("Obj", SlotValue::Subgraph(truth.clone()));
            cx.slot("DecoyObj", SlotValue::Foreign(decoy.clone()));
            let bare = |n: &str| realizer.object_phrase(&PatternObject::new(n), 0);
            format!("The {rd} is {rel_text} {} or {}?", bare(o1), bare(o2))
        }
        TemplateId::QueryObject => {
            let Focus::RelationTarget(i) = choices.focus else { return Err(missing("asked object")) };
            let rel = g.root().relations.get(i).ok_or(missing("asked relation"))?;
            let r = choices.focus.referent(g);
            let rd = cx.desc(&r, false);
            let u = Ctx::unique(&mut b, &r);
            let all = b.push(Operator::FindAll, vec![]);
            let w = b.push(Operator::WithRelationObject, vec![u, all, lit(&rel.name)]);
            let t = b.push(Operator::Unique, vec![w]);
            b.push(Operator::QueryName, vec![t]);
            cx.slot("G-Subject", SlotValue::Subgraph(rd.clone()));
            cx.slot("Rel", SlotValue::Subgraph(rel.name.clone()));
            format!("What is the {rd} {}?", rel.name)
        }
        TemplateId::VerifySameAttr => {
            let cat = cx.category()?.to_string();
            let g2 = cx.g2()?.clone();
            let r1 = Focus::RootAttribute.referent(g);
            let r2 = Focus::RootAttribute.referent(&g2);
            if r1 == r2 {
                return Err(Skip::Degenerate("both referents coincide"));
            }
            let (d1, d2) = (cx.desc(&r1, false), cx.desc(&r2, false));
            let a = Ctx::unique(&mut b, &r1);
            let c = Ctx::unique(&mut b, &r2);
            let qa = b.push(Operator::QueryAttribute, vec![a, lit(&cat)]);
            let qc = b.push(Operator::QueryAttribute, vec![c, lit(&cat)]);
            b.push(Operator::Eq, vec![qa, qc]);
            cx.slot("G", SlotValue::Subgraph(d1.clone()));
            cx.slot("G2", SlotValue::Foreign(d2.clone()));
            cx.slot("Category", SlotValue::Word(cat.clone()));
            format!("Does the {d1} and the {d2} have the same {cat}?")
        }
        TemplateId::ChooseRel => {
            let Focus::Relation(i) = choices.focus else { return Err(missing("asked relation")) };
            let rel = g.root().relations.get(i).ok_or(missing("asked relation"))?;
            let decoy = cx.decoy()?.to_string();
            let (o1, o2) = cx.options(&rel.name, &decoy);
            let r = choices.focus.referent(g);
            let rd = cx.desc(&r, false);
            let u = Ctx::unique(&mut b, &r);
            let t = b.objects(&rel.target);
            let w = b.push(Operator::WithRelation, vec![u, t, lit(o1)]);
            let e = b.exists(w);
            b.push(Operator::Choose, vec![e, lit(o1), lit(o2)]);
            let td = realizer.object_phrase(&rel.target, 1);
            cx.slot("G-Subject", SlotValue::Subgraph(rd.clone()));
            cx.slot("Rel", SlotValue::Subgraph(rel.name.clone()));
            cx.slot("Obj", SlotValue::Subgraph(td.clone()));
            cx.slot("DecoyRel", SlotValue::Foreign(decoy.clone()));
            format!("Is the {rd} {o1} {td} or {o2} it?")
        }
    };
    let program = b.finish().map_err(|_| Skip::Degenerate("ill-typed program"))?;
    Ok(Built {
        question,
        program,
        slots: cx.slots,
    })
}
