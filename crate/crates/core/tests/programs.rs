use std::collections::BTreeMap;

use causim_core::dsl::{answer_vocabulary, parse_program, pretty, typecheck, Answer, Program};
use causim_core::questions::{
    enumerate_tasks, render_text, resolve_references, slot_bindings, SynonymTable, VerbClass,
};
use causim_core::seed::rng_for;
use causim_core::seed_key;
use causim_physics::{Color, ShapeKind, SizeKind};
use proptest::prelude::*;

type Attributes = (SizeKind, Color, ShapeKind);

fn attributes() -> impl Strategy<Value = Attributes> {
    (0..SizeKind::ALL.len(), 0..Color::ALL.len(), 0..ShapeKind::ALL.len())
        .prop_map(|(z, c, s)| (SizeKind::ALL[z], Color::ALL[c], ShapeKind::ALL[s]))
}

/// Two distinct attribute triples.
fn pair() -> impl Strategy<Value = [Attributes; 2]> {
    (attributes(), attributes()).prop_filter("distinct", |(a, b)| a != b).prop_map(|(a, b)| [a, b])
}

fn bound_programs(objects: &[Attributes]) -> Vec<(String, Program)> {
    enumerate_tasks()
        .into_iter()
        .map(|t| {
            let n = t.object_count();
            (t.id.clone(), t.program.substitute(&slot_bindings(&objects[..n])))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_programs_round_trip_through_text_and_json(objects in pair()) {
        for (id, p) in bound_programs(&objects) {
            prop_assert!(p.slots().is_empty(), "{id} keeps unbound slots");
            prop_assert!(typecheck(&p).is_ok(), "{id} fails to typecheck");
            let text = pretty(&p);
            prop_assert_eq!(&parse_program(&text).unwrap(), &p, "{} text:\n{}", id, text);
            let json = serde_json::to_string(&p.to_json()).unwrap();
            let back = Program::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
            prop_assert_eq!(&back, &p, "{} json", id);
        }
    }

    #[test]
    fn rendered_questions_resolve_to_their_objects(objects in pair(), seed in any::<u64>()) {
        let synonyms = SynonymTable::default();
        let mut rng = rng_for(&seed_key!["render", seed]);
        for t in enumerate_tasks() {
            let n = t.object_count();
            for text in &t.texts {
                let q = render_text(text, &objects[..n], t.verb, &synonyms, &mut rng).unwrap();
                // Some phrasings name the second object first.
                let mut found = resolve_references(&q);
                let mut bound = objects[..n].to_vec();
                found.sort();
                bound.sort();
                prop_assert_eq!(found, bound, "{}: {}", t.id, q);
            }
        }
    }

    #[test]
    fn answers_round_trip_through_json(i in 0usize..24) {
        let a = answer_vocabulary()[i];
        let back: Answer = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn forty_eight_templates_over_eleven_subcategories() {
    let tasks = enumerate_tasks();
    assert_eq!(tasks.len(), 48);
    let subs: std::collections::BTreeSet<_> = tasks.iter().map(|t| t.subcategory).collect();
    assert_eq!(subs.len(), 11);
    for t in &tasks {
        let causal = t.category == causim_core::questions::Category::Causal;
        if causal {
            assert!(t.program.uses_module("GetCounterfactEvents"), "{}", t.id);
        }
    }
}

/// Counts per synonym over 10⁴ renders of one token must sit within 3σ of
/// the binomial mean.
fn assert_uniform(text: &str, objects: &[Attributes], verb: Option<VerbClass>, words: &[&str]) {
    const N: usize = 10_000;
    let synonyms = SynonymTable::default();
    let mut rng = rng_for(&seed_key!["uniform", text]);
    let mut counts: BTreeMap<&str, usize> = words.iter().map(|w| (*w, 0)).collect();
    for _ in 0..N {
        let q = render_text(text, objects, verb, &synonyms, &mut rng).unwrap();
        let w = q.split_whitespace().nth(1).unwrap();
        let w = w.strip_suffix('s').filter(|stem| counts.contains_key(stem)).unwrap_or(w);
        *counts.get_mut(w).unwrap_or_else(|| panic!("unexpected word {w:?} in {q:?}")) += 1;
    }
    let p = 1.0 / words.len() as f64;
    let mean = N as f64 * p;
    let sigma = (N as f64 * p * (1.0 - p)).sqrt();
    for (w, c) in counts {
        assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{w}: {c} vs {mean:.0} ± {:.0}", 3.0 * sigma);
    }
}

#[test]
fn synonym_draws_are_uniform() {
    let obj = [(SizeKind::Small, Color::Red, ShapeKind::Cube)];
    assert_uniform("the <Z> x", &obj, None, &["small", "tiny"]);
    assert_uniform("the <S> x", &obj, None, &["cube", "square", "block"]);
    let ball = [(SizeKind::Large, Color::Red, ShapeKind::Circle)];
    assert_uniform("the <S> x", &ball, None, &["circle", "ball", "sphere"]);
    assert_uniform("it <verb> x", &obj, Some(VerbClass::Prevent), &["prevent", "keep", "hold", "block", "hinder"]);
    assert_uniform("it <verb> x", &obj, Some(VerbClass::Cause), &["cause", "stimulate", "trigger"]);
}

#[test]
fn empty_synonym_table_renders_base_words() {
    let obj = [(SizeKind::Small, Color::Yellow, ShapeKind::Cube), (SizeKind::Small, Color::Brown, ShapeKind::Circle)];
    let mut rng = rng_for(&seed_key!["base"]);
    let t = enumerate_tasks().into_iter().find(|t| t.id == "ca_prevent").unwrap();
    for text in &t.texts {
        let q = render_text(text, &obj, t.verb, &SynonymTable::empty(), &mut rng).unwrap();
        assert!(q.contains("small yellow cube") && q.contains("small brown circle") && q.contains("prevent"), "{q}");
    }
}
