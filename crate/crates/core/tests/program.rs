mod support;

use proptest::prelude::*;

use support::{Oracle, OValue};
use vqsynth::lexicon::AttributeCategories;
use vqsynth::program::{anonymize, execute, parse_program, Answer, Arg, Executor, Operator, Program, Ref, Step, SubProgram, Value};
use vqsynth::scene::ObjectNode;
use vqsynth::SceneGraph;

#[test]
fn sample_program_over_f1_counts_one_image() {
    let p = parse_program(support::SAMPLE_PROGRAM).unwrap();
    let ops: Vec<Operator> = p.steps().iter().map(|s| s.op).collect();
    assert_eq!(
        ops,
        [
            Operator::Find,
            Operator::Filter,
            Operator::Find,
            Operator::WithRelation,
            Operator::GroupByImages,
            Operator::KeepIfValuesCountEq,
            Operator::Count
        ]
    );
    assert_eq!(execute(&p, &support::f1()), Ok(Answer::Number(1)));
    assert_eq!(p.to_string(), support::SAMPLE_PROGRAM.trim_end());
    assert_eq!(
        anonymize(&p).to_string(),
        "Find(▢); Filter(@1,▢); Find(▢); WithRelation(@3,@2,▢); GroupByImages(@4); KeepIfValuesCountEq(@5,2); Count(@6)"
    );
}

#[test]
fn f1_dogs_are_not_all_black() {
    let p = parse_program("1=Find(dog); 2=All(@1, {x| o=VerifyAttribute(x, black)})").unwrap();
    assert_eq!(execute(&p, &support::f1()), Ok(Answer::Bool(false)));
}

#[test]
fn anonymization_forgets_nouns_only() {
    let a = parse_program("1=Find(dog); 2=Filter(@1, black); 3=Count(@2); 4=gt(@3, 2)").unwrap();
    let b = parse_program("1=Find(cat); 2=Filter(@1, white); 3=Count(@2); 4=gt(@3, 2)").unwrap();
    let c = parse_program("1=Find(cat); 2=Filter(@1, white); 3=Count(@2); 4=gt(@3, 3)").unwrap();
    assert_eq!(anonymize(&a), anonymize(&b));
    assert_ne!(anonymize(&a), anonymize(&c));
    let once = anonymize(&a).into_program();
    assert_eq!(anonymize(&once).into_program(), once);
}

#[test]
fn interpreter_agrees_with_set_comprehension() {
    let cats = AttributeCategories::builtin();
    let exec = Executor::new(&cats);
    let mut rng = support::rng(2024);
    for case in 0..500 {
        let scenes = support::random_scenes(&mut rng);
        let p = support::random_program(&mut rng, &scenes, 7);
        let oracle = Oracle {
            scenes: &scenes,
            categories: &cats,
        };
        let want = oracle.trace(&p);
        let got = exec.trace(&p, &scenes);
        match (&got, &want) {
            (Ok(g), Ok(w)) => {
                let g: Vec<OValue> = g.iter().map(support::normalize).collect();
                assert_eq!(&g, w, "case {case}: {p}");
            }
            (Err(e), Err(w)) => assert_eq!(e.class(), *w, "case {case}: {p}"),
            _ => panic!("case {case}: {p}: interpreter {got:?}, oracle {want:?}"),
        }
    }
}

#[test]
fn random_programs_round_trip_through_text() {
    let mut rng = support::rng(77);
    for _ in 0..300 {
        let scenes = support::random_scenes(&mut rng);
        let p = support::random_program(&mut rng, &scenes, 7);
        let text = p.to_string();
        let q = parse_program(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(q, p, "{text}");
        assert_eq!(q.to_string(), text);
    }
}

#[test]
fn filters_and_relations_never_grow_sets() {
    let cats = AttributeCategories::builtin();
    let exec = Executor::new(&cats);
    let mut rng = support::rng(5);
    let size = |v: &Value| match v {
        Value::Objects(v) => v.len(),
        Value::Object(_) => 1,
        _ => unreachable!(),
    };
    for _ in 0..400 {
        let scenes = support::random_scenes(&mut rng);
        let p = support::random_program(&mut rng, &scenes, 7);
        let Ok(trace) = exec.trace(&p, &scenes) else { continue };
        for (i, s) in p.steps().iter().enumerate() {
            let input = |k: usize| match &s.args[k] {
                Arg::Ref(Ref::Step(j)) => &trace[*j],
                _ => unreachable!(),
            };
            match s.op {
                Operator::Filter | Operator::WithRelation => assert!(size(&trace[i]) <= size(input(0)), "{p}"),
                Operator::WithRelationObject => assert!(size(&trace[i]) <= size(input(1)), "{p}"),
                Operator::GroupByImages => {
                    let Value::Groups(g) = &trace[i] else { unreachable!() };
                    assert_eq!(g.iter().map(|(_, v)| v.len()).sum::<usize>(), size(input(0)), "{p}");
                }
                _ => {}
            }
        }
    }
}

fn rename_scene(s: &SceneGraph, f: &impl Fn(&str) -> String) -> SceneGraph {
    let objects: Vec<ObjectNode> = s
        .objects()
        .iter()
        .map(|o| ObjectNode {
            name: f(&o.name),
            ..o.clone()
        })
        .collect();
    SceneGraph::new(s.image_id(), objects).unwrap()
}

fn rename_program(p: &Program, f: &impl Fn(&str) -> String) -> Program {
    fn step(s: &Step, f: &impl Fn(&str) -> String) -> Step {
        let mut s = s.clone();
        for (i, a) in s.args.iter_mut().enumerate() {
            match a {
                Arg::Literal(l) if s.op == Operator::Find && i == 0 => *l = f(l),
                Arg::Sub(sub) => {
                    *sub = SubProgram {
                        var: sub.var.clone(),
                        steps: sub.steps.iter().map(|t| step(t, f)).collect(),
                    }
                }
                _ => {}
            }
        }
        s
    }
    Program::new(p.steps().iter().map(|s| step(s, f)).collect()).unwrap()
}

#[test]
fn renaming_nouns_renames_answers_only() {
    let rename = |n: &str| {
        if support::NOUNS.contains(&n) {
            format!("{n}_x")
        } else {
            n.to_string()
        }
    };
    let mut rng = support::rng(9);
    for _ in 0..300 {
        let scenes = support::random_scenes(&mut rng);
        let p = support::random_program(&mut rng, &scenes, 7);
        let renamed: Vec<SceneGraph> = scenes.iter().map(|s| rename_scene(s, &rename)).collect();
        let q = rename_program(&p, &rename);
        let before = execute(&p, &scenes);
        let after = execute(&q, &renamed);
        let expected = before.map(|a| match a {
            Answer::Label(l) => Answer::Label(rename(&l)),
            other => other,
        });
        assert_eq!(after, expected, "{p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quantifiers_are_dual(seed in any::<u64>()) {
        let mut rng = support::rng(seed);
        if let Err(e) = support::check_duality(&mut rng) {
            return Err(TestCaseError::fail(e));
        }
    }

    #[test]
    fn execution_is_deterministic(seed in any::<u64>()) {
        let mut rng = support::rng(seed);
        let scenes = support::random_scenes(&mut rng);
        let p = support::random_program(&mut rng, &scenes, 7);
        prop_assert_eq!(execute(&p, &scenes), execute(&p, &scenes));
    }
}

#[test]
fn empty_domains_are_presupposition_failures() {
    for q in ["All", "Some", "None"] {
        let p = parse_program(&format!("1=Find(unicorn); 2={q}(@1, {{x| o=VerifyAttribute(x, black)}})")).unwrap();
        assert_eq!(execute(&p, &support::f1()).unwrap_err().class(), "presupposition failure");
    }
}
