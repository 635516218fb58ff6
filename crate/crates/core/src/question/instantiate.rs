//! Turning (subgraph, template) into a record: preconditions, slot choices,
//! image sampling and execution.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{
    build, option_programs, derive_tags, Choices, Comparative, CountCompare, DistractorRule, Focus, ImagePolicy,
    Logic, PreconditionReport, ProgramBuilder, Quantifier, Skip, Support, TemplateId, NUMBERS,
};
use crate::lexicon::AttributeCategories;
use crate::matching::{contains, root_matches};
use crate::miner::{Corpus, DistractorCandidate, Mined};
use crate::program::{Answer, Executor, Operator};
use crate::realize::Realizer;
use crate::record::{ExampleRecord, Provenance};
use crate::scene::SceneGraph;
use crate::subgraph::Subgraph;

/// Everything instantiation reads besides the subgraph and its mined images.
#[derive(Debug, Clone, Copy)]
pub struct Generator<'a> {
    pub corpus: &'a Corpus,
    pub categories: &'a AttributeCategories,
    pub realizer: &'a Realizer,
    pub max_images: usize,
}

impl<'a> Generator<'a> {
    pub fn new(corpus: &'a Corpus, categories: &'a AttributeCategories, realizer: &'a Realizer) -> Self {
        Generator {
            corpus,
            categories,
            realizer,
            max_images: 5,
        }
    }

    pub fn executor(&self) -> Executor<'a> {
        Executor::new(self.categories)
    }

    fn root_category(&self, g: &Subgraph) -> Option<&'a str> {
        g.root().attribute.as_deref().and_then(|a| self.categories.category(a))
    }

    /// Categories carried by source objects matching g, other than the root
    /// attribute's own.
    fn domain_categories(&self, g: &Subgraph, source: &SceneGraph) -> Vec<String> {
        let own = self.root_category(g);
        let mut cats = BTreeSet::new();
        for i in root_matches(g, source) {
            for a in &source.object(i).attributes {
                if let Some(c) = self.categories.category(a) {
                    if Some(c) != own {
                        cats.insert(c.to_string());
                    }
                }
            }
        }
        cats.into_iter().collect()
    }

    fn candidate_foci(&self, t: TemplateId, g: &Subgraph, source: &SceneGraph, failures: &mut Vec<String>) -> Vec<Focus> {
        let root = g.root();
        let mut foci = vec![Focus::None];
        for s in t.spec().support {
            foci = match s {
                Support::RootAttribute => {
                    if root.attribute.is_none() {
                        failures.push("root has no attribute".into());
                        vec![]
                    } else {
                        vec![Focus::RootAttribute]
                    }
                }
                Support::CategorizedRootAttribute => {
                    if self.root_category(g).is_none() {
                        failures.push("root attribute has no known category".into());
                        vec![]
                    } else {
                        vec![Focus::RootAttribute]
                    }
                }
                Support::PlainRootRelation => {
                    let out: Vec<Focus> = root
                        .relations
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.modifiers.is_empty())
                        .map(|(i, _)| {
                            if t == TemplateId::ChooseRel {
                                Focus::Relation(i)
                            } else {
                                Focus::RelationTarget(i)
                            }
                        })
                        .collect();
                    if out.is_empty() {
                        failures.push("no root relation without modifiers".into());
                    }
                    out
                }
                Support::BareTarget => {
                    let bare = |o: &crate::subgraph::PatternObject| o.attribute.is_none() && o.relations.is_empty();
                    let mut out = Vec::new();
                    for (i, r) in root.relations.iter().enumerate() {
                        if bare(&r.target) && r.modifiers.is_empty() {
                            out.push(Focus::RelationTarget(i));
                        }
                        for (j, m) in r.modifiers.iter().enumerate() {
                            if bare(&m.target) {
                                out.push(Focus::ModifierTarget(i, j));
                            }
                        }
                    }
                    if out.is_empty() {
                        failures.push("no bare relation or modifier target".into());
                    }
                    out
                }
                Support::ScopePart => {
                    let mut out = Vec::new();
                    if root.attribute.is_some() {
                        out.push(Focus::RootAttribute);
                    }
                    out.extend((0..root.relations.len()).map(Focus::Relation));
                    if out.is_empty() {
                        failures.push("root has neither attribute nor relation".into());
                    }
                    out
                }
                Support::CategorizedDomain => {
                    if self.domain_categories(g, source).is_empty() {
                        failures.push("matching source objects carry no further attribute category".into());
                        vec![]
                    } else {
                        foci
                    }
                }
            };
        }
        foci
    }

    /// Distractors an image-restricted template may show for `focus`.
    fn admissible<'m>(&self, t: TemplateId, g: &Subgraph, focus: Focus, mined: &'m Mined) -> Vec<&'m DistractorCandidate> {
        match t.spec().distractors {
            DistractorRule::Unconstrained | DistractorRule::Any => mined.distractors.iter().collect(),
            DistractorRule::FocusAndElsewhere => {
                let referent = focus.referent(g);
                mined
                    .distractors
                    .iter()
                    .filter(|d| focus.differs_here_and_elsewhere(g, d))
                    .filter(|d| !contains(&referent, self.corpus.scene(d.scene)))
                    .collect()
            }
            DistractorRule::SameCategoryRoot => {
                let Some(cat) = self.root_category(g) else { return vec![] };
                let referent = Focus::RootAttribute.referent(g);
                mined
                    .distractors
                    .iter()
                    .filter(|d| {
                        let wa = d.witness.root().attribute.as_deref();
                        wa.and_then(|a| self.categories.category(a)) == Some(cat)
                            && Focus::RootAttribute.referent(&d.witness) != referent
                    })
                    .collect()
            }
        }
    }

    pub fn check_preconditions(&self, t: TemplateId, g: &Subgraph, source: &SceneGraph, mined: &Mined) -> PreconditionReport {
        let mut failures = Vec::new();
        let mut foci = self.candidate_foci(t, g, source, &mut failures);
        let rule = t.spec().distractors;
        if rule != DistractorRule::Unconstrained {
            foci.retain(|&f| !self.admissible(t, g, f, mined).is_empty());
            if foci.is_empty() && failures.is_empty() {
                failures.push(match rule {
                    DistractorRule::Any => "no distractor".to_string(),
                    DistractorRule::FocusAndElsewhere => {
                        "no distractor differs at the asked node and elsewhere without showing the referent".to_string()
                    }
                    _ => "no distractor root shares the attribute category".to_string(),
                });
            }
        }
        if t.spec().images == ImagePolicy::DistractorsOnly {
            let need = t.spec().min_images.saturating_sub(1);
            foci.retain(|&f| {
                let images: BTreeSet<&str> = self.admissible(t, g, f, mined).iter().map(|d| d.image_id.as_str()).collect();
                images.len() >= need
            });
            if foci.is_empty() && failures.is_empty() {
                failures.push("too few distractor images".into());
            }
        }
        PreconditionReport {
            template: t,
            foci,
            failures,
        }
    }

    fn scenes(&self, ids: &[String]) -> Vec<&'a SceneGraph> {
        ids.iter()
            .map(|id| self.corpus.scene_by_id(id).expect("image ids come from the corpus"))
            .collect()
    }

    /// Objects matching g across `scenes`, as the executor counts them.
    fn count(&self, g: &Subgraph, scenes: &[&SceneGraph]) -> Result<u64, Skip> {
        let mut b = ProgramBuilder::new();
        let set = b.objects(g.root());
        b.push(Operator::Count, vec![set]);
        let p = b.finish().map_err(|_| Skip::Degenerate("ill-typed program"))?;
        match self.executor().run(&p, scenes) {
            Ok(Answer::Number(n)) => Ok(n),
            Ok(_) => Err(Skip::Degenerate("count")),
            Err(e) => Err(Skip::Execution(e.class().into())),
        }
    }

    pub fn instantiate<R: Rng>(
        &self,
        t: TemplateId,
        g: &Subgraph,
        source: &str,
        mined: &Mined,
        rng: &mut R,
    ) -> Result<ExampleRecord, Skip> {
        let source_scene = self.corpus.scene_by_id(source).ok_or(Skip::Degenerate("unknown source image"))?;
        let report = self.check_preconditions(t, g, source_scene, mined);
        if !report.passed() {
            return Err(Skip::Precondition(report.failures.join("; ")));
        }
        let focus = *report.foci.choose(rng).expect("foci are non-empty");
        let admissible = self.admissible(t, g, focus, mined);

        let mut choices = Choices {
            focus,
            decoy_first: rng.random_bool(0.5),
            comparative: *Comparative::ALL.choose(rng).unwrap(),
            quantifier: *Quantifier::ALL.choose(rng).unwrap(),
            logic: *Logic::ALL.choose(rng).unwrap(),
            compare: *CountCompare::ALL.choose(rng).unwrap(),
            outer_compare: *CountCompare::ALL.choose(rng).unwrap(),
            ..Choices::default()
        };
        let mut required: Vec<String> = vec![source.to_string()];

        match t {
            TemplateId::ChooseAttr | TemplateId::ChooseObject | TemplateId::ChooseRel => {
                let decoys: Vec<(&DistractorCandidate, String)> = mined
                    .distractors
                    .iter()
                    .filter_map(|d| focus.substitutes_here(g, d).map(|to| (d, to)))
                    .collect();
                let truth_category = match focus {
                    Focus::RootAttribute => self.root_category(g),
                    _ => None,
                };
                let rank = |d: &DistractorCandidate, to: &str| {
                    let foreign = truth_category.is_some() && self.categories.category(to) != truth_category;
                    (foreign, d.distance)
                };
                let best = decoys.iter().map(|(d, to)| rank(d, to)).min().ok_or(Skip::Degenerate("no decoy"))?;
                let names: BTreeSet<&str> =
                    decoys.iter().filter(|(d, to)| rank(d, to) == best).map(|(_, n)| n.as_str()).collect();
                let names: Vec<&str> = names.into_iter().collect();
                choices.decoy = Some(names.choose(rng).unwrap().to_string());
            }
            TemplateId::CompareCount | TemplateId::VerifyLogic | TemplateId::VerifySameAttr => {
                let d = admissible.choose(rng).ok_or(Skip::Degenerate("no second subgraph"))?;
                choices.g2 = Some(d.witness.clone());
                required.push(d.image_id.clone());
            }
            _ => {}
        }
        match t {
            TemplateId::QueryAttr | TemplateId::VerifySameAttr => {
                choices.category = self.root_category(g).map(str::to_string);
            }
            TemplateId::VerifyQuantAttr => {
                let cats = self.domain_categories(g, source_scene);
                choices.category = cats.choose(rng).cloned();
            }
            _ => {}
        }

        let images = self.sample_images(t, g, mined, &admissible, &required, rng)?;
        let scenes = self.scenes(&images);

        match t {
            TemplateId::VerifyCount => {
                let c = self.count(g, &scenes)?;
                choices.k = near(c, rng);
            }
            TemplateId::CountGroupBy | TemplateId::VerifyCountGroupBy => {
                let mut observed = BTreeSet::new();
                for s in &scenes {
                    let c = self.count(g, std::slice::from_ref(s))?;
                    if c > 0 {
                        observed.insert(c.clamp(*NUMBERS.start(), *NUMBERS.end()));
                    }
                }
                let observed: Vec<u64> = observed.into_iter().collect();
                choices.k = observed.choose(rng).copied().unwrap_or(1);
                if t == TemplateId::VerifyCountGroupBy {
                    let mut n = 0u64;
                    for s in &scenes {
                        let c = self.count(g, std::slice::from_ref(s))?;
                        if choices.compare.holds(c as usize, choices.k as usize) {
                            n += 1;
                        }
                    }
                    choices.outer_k = near(n, rng);
                }
            }
            _ => {}
        }

        let built = build(t, g, &choices, self.realizer)?;
        let answer = self.answer(&built.program, &scenes)?;
        let positives: BTreeSet<String> = images
            .iter()
            .filter(|i| i.as_str() == source || mined.positives.contains(i))
            .cloned()
            .collect();
        Ok(ExampleRecord {
            id: String::new(),
            question: built.question,
            images,
            answer,
            program: built.program,
            template: t,
            subgraph: g.clone(),
            properties: Provenance {
                source_image: source.to_string(),
                size: g.node_count(),
                depth: g.depth(),
                slots: built.slots,
                tags: Vec::new(),
                positives: positives.into_iter().collect(),
                alternate_of: None,
            },
        })
        .map(|mut r| {
            r.properties.tags = derive_tags(&r.program).into_iter().collect();
            r
        })
    }

    /// Executes and, for a choice, checks that exactly one option holds.
    pub fn answer(&self, p: &crate::program::Program, scenes: &[&SceneGraph]) -> Result<Answer, Skip> {
        let ex = self.executor();
        let answer = ex.run(p, scenes).map_err(|e| Skip::Execution(e.class().into()))?;
        if let Some(options) = option_programs(p) {
            let mut held = 0;
            for o in &options {
                match ex.run(o, scenes) {
                    Ok(Answer::Bool(true)) => held += 1,
                    Ok(_) => {}
                    Err(e) => return Err(Skip::Execution(e.class().into())),
                }
            }
            if held != 1 {
                return Err(Skip::Dishonest);
            }
        }
        Ok(answer)
    }

    /// Mixed templates top up with images that do not contain g at all.
    fn sample_images<R: Rng>(
        &self,
        t: TemplateId,
        g: &Subgraph,
        mined: &Mined,
        admissible: &[&DistractorCandidate],
        required: &[String],
        rng: &mut R,
    ) -> Result<Vec<String>, Skip> {
        let spec = t.spec();
        let target = self.max_images.max(spec.min_images);
        let mut images: Vec<String> = Vec::new();
        for r in required {
            if !images.contains(r) {
                images.push(r.clone());
            }
        }
        let mut distractors: Vec<String> = Vec::new();
        let pool: Vec<&str> = match spec.images {
            ImagePolicy::Mixed => mined.distractor_images(),
            ImagePolicy::DistractorsOnly => {
                let mut v: Vec<&str> = Vec::new();
                for d in admissible {
                    if !v.contains(&d.image_id.as_str()) {
                        v.push(&d.image_id);
                    }
                }
                v
            }
        };
        for d in pool {
            if !images.iter().any(|i| i == d) {
                distractors.push(d.to_string());
            }
        }
        distractors.shuffle(rng);
        let mut positives: Vec<String> = match spec.images {
            ImagePolicy::Mixed => mined.positives.iter().filter(|p| !images.contains(p)).cloned().collect(),
            ImagePolicy::DistractorsOnly => Vec::new(),
        };
        positives.shuffle(rng);

        let room = target.saturating_sub(images.len());
        let n_pos = rng.random_range(0..=positives.len().min(room));
        images.extend(positives.drain(..n_pos));
        let room = target.saturating_sub(images.len());
        images.extend(distractors.drain(..distractors.len().min(room)));
        let room = target.saturating_sub(images.len());
        images.extend(positives.drain(..positives.len().min(room)));
        if spec.images == ImagePolicy::Mixed && images.len() < target {
            let mut rest: Vec<usize> = (0..self.corpus.len()).collect();
            rest.shuffle(rng);
            for i in rest {
                if images.len() >= target {
                    break;
                }
                let scene = self.corpus.scene(i);
                let id = scene.image_id();
                if !images.iter().any(|x| x == id) && !mined.positives.iter().any(|x| x == id) && !contains(g, scene) {
                    images.push(id.to_string());
                }
            }
        }

        if images.len() < spec.min_images {
            return Err(Skip::Inventory {
                have: images.len(),
                need: spec.min_images,
            });
        }
        images.shuffle(rng);
        Ok(images)
    }
}

/// A number close to `c` within the offered range.
fn near<R: Rng>(c: u64, rng: &mut R) -> u64 {
    let lo = *NUMBERS.start();
    let hi = *NUMBERS.end();
    let options: Vec<u64> = [c.saturating_sub(1), c, c + 1]
        .into_iter()
        .filter(|k| (lo..=hi).contains(k))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    match options.choose(rng) {
        Some(k) => *k,
        None if c == 0 => lo,
        None => hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::MutualExclusionLexicon;
    use crate::matching::EnumerationLimits;
    use crate::miner::{mine, ExactVerifier};
    use crate::scene::parse_scene_str;
    use rand::SeedableRng;

    fn f1() -> Corpus {
        let scenes = parse_scene_str(include_str!("../../tests/fixtures/f1.jsonl")).unwrap();
        Corpus::new(scenes, EnumerationLimits::default())
    }

    #[test]
    fn near_stays_in_range() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for c in 0..10 {
            let k = near(c, &mut rng);
            assert!(NUMBERS.contains(&k));
            if (2..=4).contains(&c) {
                assert!(k.abs_diff(c) <= 1);
            }
        }
    }

    #[test]
    fn verify_attr_admits_only_images_without_referent() {
        let corpus = f1();
        let cats = AttributeCategories::builtin();
        let gen = Generator::new(&corpus, &cats, Realizer::builtin());
        let g = Subgraph::parse("<dog[black]>").unwrap();
        let mined = mine(&g, &corpus, &MutualExclusionLexicon::empty(), &ExactVerifier, Some("img1"));
        let report = gen.check_preconditions(TemplateId::VerifyAttr, &g, corpus.scene(0), &mined);
        assert_eq!(report.foci, vec![Focus::RootAttribute]);
        let images: Vec<&str> = gen
            .admissible(TemplateId::VerifyAttr, &g, Focus::RootAttribute, &mined)
            .iter()
            .map(|d| d.image_id.as_str())
            .collect();
        assert!(!images.contains(&"img2"));
        assert!(gen.check_preconditions(TemplateId::Count, &g, corpus.scene(0), &mined).passed());
        let g = Subgraph::parse("<dog>").unwrap();
        let report = gen.check_preconditions(TemplateId::VerifyAttr, &g, corpus.scene(0), &mined);
        assert!(!report.passed());
        assert_eq!(report.failures, vec!["root has no attribute".to_string()]);
    }

    #[test]
    fn count_on_f1() {
        let corpus = f1();
        let cats = AttributeCategories::builtin();
        let gen = Generator::new(&corpus, &cats, Realizer::builtin());
        let g = Subgraph::parse("<book(on<table[wood]>)>").unwrap();
        let mined = mine(&g, &corpus, &MutualExclusionLexicon::empty(), &ExactVerifier, Some("img3"));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = gen.instantiate(TemplateId::Count, &g, "img3", &mined, &mut rng).unwrap();
        assert_eq!(r.question, "How many books are on a wood table?");
        assert_eq!(r.answer, Answer::Number(2));
        assert_eq!(r.properties.positives, vec!["img3".to_string()]);
        assert!(r.has_tag("Count"));
    }
}
