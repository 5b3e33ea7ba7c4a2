//! Semantics-preserving rewrites of control-flow statements.
//!
//! | rule | site | rewrite |
//! |------|------|---------|
//! | R1 | `if` without `else` | `if (C) { B } else { }` (or `if (!(C)) { } else B`) |
//! | R2 | `if (C1 && C2)` without `else` | `if (C1) { if (C2) B }` |
//! | R3 | `for` with a condition | `{ init; if (C) { do { B step; } while (C); } }` |
//! | R4 | `while` | `if (C) { do B while (C); }` |
//! | R5 | `while` | `while (1) { if (!(C)) { break; } B }` |
//!
//! A simple variant applies one rule at one site. A hard variant applies
//! one rule at every site; sites admitting several rules fan out into one
//! hard variant per choice.

use std::collections::HashSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::FunctionSample;
use crate::cparse::{parse_function, render, Expr, NodePath, Stmt, StmtKind, StmtTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5];
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSite {
    pub path: NodePath,
    /// Applicable rules in rule order.
    pub rules: Vec<Rule>,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Simple,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub path: NodePath,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub id: String,
    pub source_id: String,
    pub kind: VariantKind,
    pub assignment: Vec<Assignment>,
    pub code: String,
    pub label: u8,
}

impl Variant {
    pub fn to_sample(&self) -> FunctionSample {
        FunctionSample::new(self.id.clone(), self.code.clone(), self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentOptions {
    /// Use the reversed-condition form of R1.
    pub reverse_condition: bool,
    /// Upper bound on hard variants per sample.
    pub max_hard: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            reverse_condition: false,
            max_hard: 32,
        }
    }
}

fn has_continue_or_opaque(s: &Stmt) -> bool {
    let mut found = false;
    s.walk(&mut |n| {
        found |= matches!(n.kind, StmtKind::Continue | StmtKind::Opaque(_));
        for e in n.exprs() {
            e.walk(&mut |x| found |= x.is_opaque());
        }
    });
    found
}

/// Rules applicable at a single statement, in rule order.
pub fn applicable_rules(s: &Stmt) -> Vec<Rule> {
    match &s.kind {
        StmtKind::If {
            cond,
            otherwise: None,
            ..
        } if !cond.is_opaque() => {
            let mut rules = vec![Rule::R1];
            if matches!(cond.unparen(), Expr::Binary(op, _, _) if op == "&&") {
                rules.push(Rule::R2);
            }
            rules
        }
        StmtKind::For {
            cond: Some(cond),
            body,
            ..
        } if !cond.is_opaque() && !has_continue_or_opaque(body) => vec![Rule::R3],
        StmtKind::While { cond, .. } if !cond.is_opaque() => vec![Rule::R4, Rule::R5],
        _ => Vec::new(),
    }
}

fn collect_sites(s: &Stmt, path: &mut NodePath, out: &mut Vec<TransformSite>) {
    let rules = applicable_rules(s);
    if !rules.is_empty() {
        out.push(TransformSite {
            path: path.clone(),
            rules,
            start_line: s.span.start_line,
            end_line: s.span.end_line,
        });
    }
    for (i, c) in s.children().into_iter().enumerate() {
        path.push(i);
        collect_sites(c, path, out);
        path.pop();
    }
}

/// Transformation sites in source (pre-)order.
pub fn find_sites(tree: &StmtTree) -> Vec<TransformSite> {
    let mut out = Vec::new();
    collect_sites(&tree.root, &mut Vec::new(), &mut out);
    out
}

fn at_mut<'a>(s: &'a mut Stmt, path: &[usize]) -> Option<&'a mut Stmt> {
    match path.split_first() {
        None => Some(s),
        Some((&i, rest)) => s
            .children_mut()
            .into_iter()
            .nth(i)
            .and_then(|c| at_mut(c, rest)),
    }
}

fn not_applicable(rule: Rule, path: &[usize]) -> Error {
    Error::RuleNotApplicable {
        rule: rule.to_string(),
        site: format!("{path:?}"),
    }
}

/// Rewrites one statement. The caller has checked applicability.
fn rewrite(s: Stmt, rule: Rule, opts: &AugmentOptions) -> Stmt {
    let span = s.span;
    let kind = match (rule, s.kind) {
        (Rule::R1, StmtKind::If { cond, then, .. }) if opts.reverse_condition => StmtKind::If {
            cond: Expr::negated(cond),
            then: Box::new(Stmt::block(Vec::new())),
            otherwise: Some(then),
        },
        // Bracing the then-branch keeps a nested else-less `if` from
        // capturing the new `else`.
        (Rule::R1, StmtKind::If { cond, then, .. }) => StmtKind::If {
            cond,
            then: Box::new(then.into_block()),
            otherwise: Some(Box::new(Stmt::block(Vec::new()))),
        },
        (Rule::R2, StmtKind::If { cond, then, .. }) => {
            let Expr::Binary(_, c1, c2) = strip_parens(cond) else {
                unreachable!("checked conjunction")
            };
            let inner = Stmt::new(StmtKind::If {
                cond: *c2,
                then,
                otherwise: None,
            });
            StmtKind::If {
                cond: *c1,
                then: Box::new(Stmt::block(vec![inner])),
                otherwise: None,
            }
        }
        (
            Rule::R3,
            StmtKind::For {
                init,
                cond: Some(cond),
                step,
                body,
            },
        ) => {
            let mut loop_body = vec![*body];
            if let Some(step) = step {
                loop_body.push(Stmt::new(StmtKind::Expr(step)));
            }
            let do_while = Stmt::new(StmtKind::DoWhile {
                body: Box::new(Stmt::block(loop_body)),
                cond: cond.clone(),
            });
            let guard = Stmt::new(StmtKind::If {
                cond,
                then: Box::new(Stmt::block(vec![do_while])),
                otherwise: None,
            });
            let mut items = Vec::new();
            if let Some(init) = init {
                items.push(match init.kind {
                    StmtKind::Opaque(mut tokens) => {
                        tokens.push(";".to_string());
                        Stmt::new(StmtKind::Opaque(tokens))
                    }
                    _ => *init,
                });
            }
            items.push(guard);
            StmtKind::Block(items)
        }
        (Rule::R4, StmtKind::While { cond, body }) => {
            let do_while = Stmt::new(StmtKind::DoWhile {
                body: Box::new(body.into_block()),
                cond: cond.clone(),
            });
            StmtKind::If {
                cond,
                then: Box::new(Stmt::block(vec![do_while])),
                otherwise: None,
            }
        }
        (Rule::R5, StmtKind::While { cond, body }) => {
            let exit = Stmt::new(StmtKind::If {
                cond: Expr::negated(cond),
                then: Box::new(Stmt::block(vec![Stmt::new(StmtKind::Break)])),
                otherwise: None,
            });
            let mut items = vec![exit];
            match body.kind {
                StmtKind::Block(rest) => items.extend(rest),
                _ => items.push(*body),
            }
            StmtKind::While {
                cond: Expr::IntLit("1".to_string()),
                body: Box::new(Stmt::block(items)),
            }
        }
        (rule, kind) => unreachable!("{rule} checked against {kind:?}"),
    };
    Stmt { kind, span }
}

fn strip_parens(e: Expr) -> Expr {
    match e {
        Expr::Paren(inner) => strip_parens(*inner),
        e => e,
    }
}

fn apply_in_place(
    root: &mut Stmt,
    path: &[usize],
    rule: Rule,
    opts: &AugmentOptions,
) -> Result<()> {
    let node = at_mut(root, path).ok_or_else(|| not_applicable(rule, path))?;
    if !applicable_rules(node).contains(&rule) {
        return Err(not_applicable(rule, path));
    }
    let taken = std::mem::replace(node, Stmt::block(Vec::new()));
    *node = rewrite(taken, rule, opts);
    Ok(())
}

pub fn apply_rule(
    tree: &StmtTree,
    site: &TransformSite,
    rule: Rule,
    opts: &AugmentOptions,
) -> Result<StmtTree> {
    apply_assignment(
        tree,
        &[Assignment {
            path: site.path.clone(),
            rule,
        }],
        opts,
    )
}

/// Applies several rewrites at once. Deeper sites go first so the paths of
/// enclosing sites stay valid.
pub fn apply_assignment(
    tree: &StmtTree,
    assignment: &[Assignment],
    opts: &AugmentOptions,
) -> Result<StmtTree> {
    let mut order: Vec<&Assignment> = assignment.iter().collect();
    order.sort_by(|a, b| b.path.cmp(&a.path));
    let mut out = tree.clone();
    for a in order {
        apply_in_place(&mut out.root, &a.path, a.rule, opts)?;
    }
    Ok(out)
}

/// Rule choices per site for hard variants, odometer order, truncated to
/// `limit` combinations.
fn hard_choices(sites: &[TransformSite], limit: usize) -> Vec<Vec<Rule>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; sites.len()];
    loop {
        if out.len() == limit {
            break;
        }
        out.push(sites.iter().zip(&idx).map(|(s, &i)| s.rules[i]).collect());
        let mut k = sites.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sites[k].rules.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Number of hard combinations before truncation.
pub fn hard_count(sites: &[TransformSite]) -> usize {
    if sites.is_empty() {
        return 0;
    }
    sites.iter().map(|s| s.rules.len()).product()
}

pub fn generate_variants(sample: &FunctionSample, opts: &AugmentOptions) -> Result<Vec<Variant>> {
    let tree = parse_function(&sample.code)?;
    let sites = find_sites(&tree);
    let mut candidates: Vec<(VariantKind, Vec<Assignment>)> = Vec::new();
    for site in &sites {
        for &rule in &site.rules {
            candidates.push((
                VariantKind::Simple,
                vec![Assignment {
                    path: site.path.clone(),
                    rule,
                }],
            ));
        }
    }
    if !sites.is_empty() {
        let total = hard_count(&sites);
        if total > opts.max_hard {
            warn!(
                "{}: keeping {} of {total} hard variants",
                sample.id, opts.max_hard
            );
        }
        for choice in hard_choices(&sites, opts.max_hard) {
            let assignment = sites
                .iter()
                .zip(choice)
                .map(|(s, rule)| Assignment {
                    path: s.path.clone(),
                    rule,
                })
                .collect();
            candidates.push((VariantKind::Hard, assignment));
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (kind, assignment) in candidates {
        let code = render(&apply_assignment(&tree, &assignment, opts)?);
        if !seen.insert(code.clone()) {
            continue;
        }
        out.push(Variant {
            id: format!("{}#v{}", sample.id, out.len()),
            source_id: sample.id.clone(),
            kind,
            assignment,
            code,
            label: sample.label,
        });
    }
    Ok(out)
}

/// Variants for many samples, in input order. Samples that do not parse
/// are skipped with a warning.
pub fn augment_samples(samples: &[FunctionSample], opts: &AugmentOptions) -> Vec<Variant> {
    samples
        .par_iter()
        .map(|s| match generate_variants(s, opts) {
            Ok(v) => v,
            Err(e) => {
                warn!("skipping {}: {e}", s.id);
                Vec::new()
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cparse::render;

    fn one(code: &str, rule: Rule) -> String {
        let tree = parse_function(code).unwrap();
        let site = find_sites(&tree)
            .into_iter()
            .find(|s| s.rules.contains(&rule))
            .unwrap();
        render(&apply_rule(&tree, &site, rule, &AugmentOptions::default()).unwrap())
    }

    #[test]
    fn r5_schema() {
        assert_eq!(
            one("while (x>0){x=x-1;}", Rule::R5),
            "while (1) {\n    if (!(x > 0)) {\n        break;\n    }\n    x = x - 1;\n}\n"
        );
    }

    #[test]
    fn r2_keeps_operand_order() {
        assert_eq!(
            one("if (a && b) { f(); }", Rule::R2),
            "if (a) {\n    if (b) {\n        f();\n    }\n}\n"
        );
    }

    #[test]
    fn r1_forms() {
        assert_eq!(
            one("if (a) x = 1;", Rule::R1),
            "if (a) {\n    x = 1;\n} else { }\n"
        );
        let tree = parse_function("if (a) x = 1;").unwrap();
        let site = &find_sites(&tree)[0];
        let opts = AugmentOptions {
            reverse_condition: true,
            ..Default::default()
        };
        assert_eq!(
            render(&apply_rule(&tree, site, Rule::R1, &opts).unwrap()),
            "if (!(a)) { } else\n    x = 1;\n"
        );
    }

    #[test]
    fn r3_and_r4_schemas() {
        assert_eq!(
            one("for (i = 0; i < n; i++) s += i;", Rule::R3),
            "{\n    i = 0;\n    if (i < n) {\n        do {\n            s += i;\n            i++;\n        } while (i < n);\n    }\n}\n"
        );
        assert_eq!(
            one("while (x) x--;", Rule::R4),
            "if (x) {\n    do {\n        x--;\n    } while (x);\n}\n"
        );
    }

    #[test]
    fn site_predicates() {
        let sites = |c: &str| {
            find_sites(&parse_function(c).unwrap())
                .into_iter()
                .map(|s| s.rules)
                .collect::<Vec<_>>()
        };
        assert!(sites("int f(void) { int a = 1; return a; }").is_empty());
        assert_eq!(sites("if (a && b) { f(); }"), [vec![Rule::R1, Rule::R2]]);
        assert!(sites("if (a && b) x; else y;").is_empty());
        assert!(sites("for (;;) { }").is_empty());
        assert!(sites("for (i = 0; i < n; i++) { if (i) continue; }")
            .iter()
            .all(|r| r == &[Rule::R1]));
        assert_eq!(sites("while (x) { }"), [vec![Rule::R4, Rule::R5]]);
    }

    #[test]
    fn wrong_rule_is_rejected() {
        let tree = parse_function("if (a) x = 1;").unwrap();
        let site = &find_sites(&tree)[0];
        assert!(matches!(
            apply_rule(&tree, site, Rule::R4, &AugmentOptions::default()),
            Err(Error::RuleNotApplicable { .. })
        ));
    }

    #[test]
    fn single_if_dedups_to_one_variant() {
        let v = generate_variants(
            &FunctionSample::new("s", "if (a) { x = 1; }", 1),
            &AugmentOptions::default(),
        )
        .unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, VariantKind::Simple);
        assert_eq!(v[0].id, "s#v0");
        assert_eq!(v[0].label, 1);
    }

    #[test]
    fn nested_sites_compose() {
        let v = generate_variants(
            &FunctionSample::new(
                "n",
                "while (x > 0) { if (x > 5) { x = x - 2; } x = x - 1; }",
                0,
            ),
            &AugmentOptions::default(),
        )
        .unwrap();
        // simple: R4, R5, R1; hard: {R4,R1}, {R5,R1}
        assert_eq!(v.len(), 5);
        for var in &v {
            parse_function(&var.code).unwrap();
        }
    }

    #[test]
    fn hard_enumeration_is_capped() {
        let code = "while (a) { } while (b) { } while (c) { }";
        let opts = AugmentOptions {
            max_hard: 4,
            ..Default::default()
        };
        let v = generate_variants(&FunctionSample::new("w", code, 0), &opts).unwrap();
        assert_eq!(v.iter().filter(|x| x.kind == VariantKind::Hard).count(), 4);
        assert_eq!(
            v.iter().filter(|x| x.kind == VariantKind::Simple).count(),
            6
        );
    }
}
