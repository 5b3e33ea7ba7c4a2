mod common;

use humer_core::cparse::{lex, parse_function, render, TokenKind};
use proptest::prelude::*;

fn every_fixture() -> Vec<(String, String)> {
    let mut v = vec![
        ("mi_golden.c".to_string(), common::fixture("mi_golden.c")),
        (
            "cve_2018_7751.c".to_string(),
            common::fixture("cve_2018_7751.c"),
        ),
    ];
    v.extend(common::fixture_set("corpus"));
    v.extend(common::fixture_set("interp"));
    v
}

#[test]
fn lexing_is_lossless() {
    for (name, code) in every_fixture() {
        let tokens = lex(&code).unwrap();
        let joined: String = tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(joined, code, "{name}");
    }
}

#[test]
fn render_reaches_a_fixpoint() {
    for (name, code) in every_fixture() {
        let once = render(&parse_function(&code).unwrap());
        let twice = render(&parse_function(&once).unwrap());
        assert_eq!(once, twice, "{name}");
    }
}

#[test]
fn render_keeps_significant_tokens_modulo_comments() {
    // rendering may add braces, so compare the sets of identifiers only
    for (name, code) in every_fixture() {
        let idents = |s: &str| {
            let mut v: Vec<String> = lex(s)
                .unwrap()
                .into_iter()
                .filter(|t| t.kind == TokenKind::Identifier)
                .map(|t| t.text)
                .collect();
            v.sort();
            v.dedup();
            v
        };
        let out = render(&parse_function(&code).unwrap());
        assert_eq!(idents(&code), idents(&out), "{name}");
    }
}

fn balanced() -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(vec![
        "x = 1;",
        "f(a);",
        "return y;",
        "a += b * 2;",
        "break;",
        "int k = 0;",
        ";",
    ])
    .prop_map(str::to_string);
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4)
                .prop_map(|v| format!("{{ {} }}", v.join(" "))),
            inner.clone().prop_map(|s| format!("if (a < b) {s}")),
            (inner.clone(), inner.clone()).prop_map(|(s, t)| format!("if (c) {s} else {t}")),
            inner.clone().prop_map(|s| format!("while (n--) {s}")),
            inner
                .clone()
                .prop_map(|s| format!("for (i = 0; i < n; i++) {s}")),
            inner.clone().prop_map(|s| format!("do {s} while (z);")),
        ]
    })
}

proptest! {
    #[test]
    fn balanced_bodies_parse_and_render_stably(body in balanced()) {
        let code = format!("int f(int a)\n{{\n{body}\n}}\n");
        let tree = parse_function(&code).unwrap();
        prop_assert!(tree.header.is_some());
        let once = render(&tree);
        let twice = render(&parse_function(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn lexing_arbitrary_text_is_lossless(code in "[a-z0-9 +*/=;(){}\\n<>!&|'\"-]{0,80}") {
        // unterminated literals and comments are the only lex failures
        let Ok(tokens) = lex(&code) else {
            prop_assert!(code.contains("/*") || code.contains('\'') || code.contains('"'));
            return Ok(());
        };
        let joined: String = tokens.iter().map(|t| t.text.as_str()).collect();
        prop_assert_eq!(joined, code);
    }

    #[test]
    fn unbalanced_input_is_rejected(body in balanced(), cut in 0usize..3) {
        let code = format!("int f(void) {{ {body} }}");
        let broken = match cut {
            0 => format!("{code} }}"),
            1 => format!("{code} )"),
            _ => code.replacen('{', "", 1),
        };
        prop_assert!(parse_function(&broken).is_err());
    }
}
