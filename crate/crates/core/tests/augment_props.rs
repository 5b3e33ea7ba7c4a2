mod common;

use std::collections::HashSet;

use humer_core::augment::{
    apply_assignment, find_sites, generate_variants, hard_count, Assignment, AugmentOptions, Rule,
    TransformSite, VariantKind,
};
use humer_core::corpus::FunctionSample;
use humer_core::cparse::{parse_function, render};
use humer_core::minieval::{check_interpretable, equivalent};
use proptest::prelude::*;

#[test]
fn svg_probe_sites_and_variants() {
    let code = common::fixture("cve_2018_7751.c");
    let tree = parse_function(&code).unwrap();
    let sites = find_sites(&tree);
    let mut summary: Vec<(usize, usize, Vec<Rule>)> = sites
        .iter()
        .map(|s| (s.start_line, s.end_line, s.rules.clone()))
        .collect();
    summary.sort();
    assert_eq!(
        summary,
        vec![
            (5, 6, vec![Rule::R1]),
            (7, 13, vec![Rule::R4, Rule::R5]),
            (9, 10, vec![Rule::R1]),
            (11, 12, vec![Rule::R1]),
        ]
    );
    let variants = generate_variants(
        &FunctionSample::new("cve", code.clone(), 1),
        &AugmentOptions::default(),
    )
    .unwrap();
    let simple = variants
        .iter()
        .filter(|v| v.kind == VariantKind::Simple)
        .count();
    let hard = variants
        .iter()
        .filter(|v| v.kind == VariantKind::Hard)
        .count();
    assert_eq!((simple, hard), (5, 2));
    let original = render(&tree);
    let mut seen = HashSet::new();
    for (k, v) in variants.iter().enumerate() {
        assert_eq!(v.id, format!("cve#v{k}"));
        assert_eq!(v.label, 1);
        assert_ne!(v.code, original);
        assert!(seen.insert(v.code.clone()));
        let reparsed = parse_function(&v.code).unwrap();
        assert_eq!(render(&reparsed), v.code, "{}", v.id);
    }
}

/// Every one-rule-per-site combination, by plain recursion.
fn all_combinations(sites: &[TransformSite]) -> Vec<Vec<Assignment>> {
    let Some((first, rest)) = sites.split_first() else {
        return vec![Vec::new()];
    };
    let tails = all_combinations(rest);
    let mut out = Vec::new();
    for &rule in &first.rules {
        for tail in &tails {
            let mut a = vec![Assignment {
                path: first.path.clone(),
                rule,
            }];
            a.extend(tail.iter().cloned());
            out.push(a);
        }
    }
    out
}

fn program() -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(vec!["x = x + 1;", "y = y - x;", "r = r * 2;"])
        .prop_map(str::to_string);
    let body = leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|s| format!("if (x < y) {s}")),
            (inner.clone(), inner.clone())
                .prop_map(|(s, t)| format!("if (x > 0 && y > 0) {{ {s} {t} }}")),
            inner
                .clone()
                .prop_map(|s| format!("if (x == 1) {{ {s} }} else {{ r = 0; }}")),
            inner
                .clone()
                .prop_map(|s| format!("while (x < 5) {{ x = x + 1; {s} }}")),
            inner
                .clone()
                .prop_map(|s| format!("for (i = 0; i < 3; i++) {{ {s} }}")),
            prop::collection::vec(inner.clone(), 1..3).prop_map(|v| v.join(" ")),
        ]
    });
    body.prop_map(|b| {
        format!("int f(int x, int y)\n{{\n int r = 0;\n int i = 0;\n {b}\n return r + x + y;\n}}\n")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variant_counts_follow_site_rules(code in program()) {
        let tree = parse_function(&code).unwrap();
        let sites = find_sites(&tree);
        let combos = all_combinations(&sites);
        let expected_hard = if sites.is_empty() { 0 } else { combos.len() };
        prop_assert_eq!(hard_count(&sites), expected_hard);

        let opts = AugmentOptions { max_hard: usize::MAX, ..Default::default() };
        let variants = generate_variants(&FunctionSample::new("p", code.clone(), 0), &opts).unwrap();
        let simple_cap: usize = sites.iter().map(|s| s.rules.len()).sum();
        let mut distinct: HashSet<String> = HashSet::new();
        for a in combos.iter().filter(|_| !sites.is_empty()) {
            distinct.insert(render(&apply_assignment(&tree, a, &opts).unwrap()));
        }
        for s in &sites {
            for &rule in &s.rules {
                let a = [Assignment { path: s.path.clone(), rule }];
                distinct.insert(render(&apply_assignment(&tree, &a, &opts).unwrap()));
            }
        }
        prop_assert_eq!(variants.len(), distinct.len());
        prop_assert!(variants.len() <= simple_cap + expected_hard);
    }

    #[test]
    fn variants_preserve_behaviour(code in program()) {
        let tree = parse_function(&code).unwrap();
        let variants = generate_variants(&FunctionSample::new("p", code, 0), &AugmentOptions::default()).unwrap();
        for v in variants {
            let other = parse_function(&v.code).unwrap();
            let verdict = equivalent(&tree, &other, 30, 7).unwrap();
            prop_assert!(verdict.is_equivalent(), "{}\n{:?}", v.code, verdict);
        }
    }

    #[test]
    fn hard_cap_is_respected(code in program(), cap in 0usize..4) {
        let opts = AugmentOptions { max_hard: cap, ..Default::default() };
        let variants = generate_variants(&FunctionSample::new("p", code, 0), &opts).unwrap();
        prop_assert!(variants.iter().filter(|v| v.kind == VariantKind::Hard).count() <= cap);
    }
}

#[test]
fn fixture_variants_are_equivalent() {
    let mut checked = 0;
    for reverse in [false, true] {
        let opts = AugmentOptions {
            reverse_condition: reverse,
            ..Default::default()
        };
        for (name, code) in common::fixture_set("interp") {
            let tree = parse_function(&code).unwrap();
            check_interpretable(&tree).unwrap();
            let sample = FunctionSample::new(name.clone(), code, 0);
            for v in generate_variants(&sample, &opts).unwrap() {
                let verdict = equivalent(&tree, &parse_function(&v.code).unwrap(), 100, 1).unwrap();
                assert!(
                    verdict.is_equivalent(),
                    "{}:\n{}\n{verdict:?}",
                    v.id,
                    v.code
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "only {checked} variants");
}
