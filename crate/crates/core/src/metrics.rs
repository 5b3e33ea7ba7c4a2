//! Code complexity metrics and the code-based difficulty score.
//!
//! Halstead classification: identifiers and literals are operands; keywords,
//! operators and punctuation are operators, except the delimiters `;`, `{`
//! and `}` which are not counted at all.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::FunctionSample;
use crate::cparse::{lex, parse_tokens, Expr, StmtKind, StmtTree, Token, TokenKind};
use crate::difficulty::{DifficultyScore, Strategy};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    /// Source lines of code (non-blank, non-comment).
    pub sloc: usize,
    pub cyclomatic: usize,
    pub halstead_volume: f64,
    pub maintainability_index: f64,
    /// `-maintainability_index`
    pub difficulty: f64,
}

/// Number of lines holding at least one token that is neither comment nor
/// whitespace.
pub fn sloc(tokens: &[Token]) -> usize {
    tokens
        .iter()
        .filter(|t| !t.kind.is_trivia())
        .map(|t| t.line)
        .collect::<BTreeSet<_>>()
        .len()
}

const OPAQUE_DECISIONS: &[&str] = &["case", "if", "while", "for", "&&", "||", "?"];

/// 1 + decision points: `if`, `while`, `do`-`while`, `for` with a
/// condition, `&&`, `||` and `?:`. Inside opaque runs (switch bodies,
/// unparsed expressions) the same decisions are counted by keyword and
/// operator token, plus one per `case` label.
pub fn cyclomatic(tree: &StmtTree) -> usize {
    let mut decisions = 0;
    tree.walk(&mut |s| match &s.kind {
        StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::DoWhile { .. } => decisions += 1,
        StmtKind::For { cond: Some(_), .. } => decisions += 1,
        StmtKind::Opaque(tokens) => {
            decisions += tokens
                .iter()
                .filter(|t| OPAQUE_DECISIONS.contains(&t.as_str()))
                .count()
        }
        _ => {}
    });
    tree.walk_exprs(&mut |e| match e {
        Expr::Binary(op, _, _) if op == "&&" || op == "||" => decisions += 1,
        Expr::Ternary(..) => decisions += 1,
        Expr::Opaque(tokens) => {
            decisions += tokens
                .iter()
                .filter(|t| matches!(t.as_str(), "&&" | "||" | "?"))
                .count()
        }
        _ => {}
    });
    1 + decisions
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalsteadCounts {
    pub distinct_operators: usize,
    pub distinct_operands: usize,
    pub total_operators: usize,
    pub total_operands: usize,
}

impl HalsteadCounts {
    pub fn length(&self) -> usize {
        self.total_operators + self.total_operands
    }

    pub fn vocabulary(&self) -> usize {
        self.distinct_operators + self.distinct_operands
    }

    /// `N * log2(vocabulary)`; zero when the vocabulary is below two.
    pub fn volume(&self) -> f64 {
        let n = self.length();
        let eta = self.vocabulary();
        if n == 0 || eta < 2 {
            0.0
        } else {
            n as f64 * (eta as f64).log2()
        }
    }
}

pub fn halstead_counts(tokens: &[Token]) -> HalsteadCounts {
    let mut operators = HashSet::new();
    let mut operands = HashSet::new();
    let (mut n1, mut n2) = (0, 0);
    for t in tokens {
        match t.kind {
            TokenKind::Comment | TokenKind::Whitespace => {}
            TokenKind::Identifier
            | TokenKind::IntLiteral
            | TokenKind::StringLiteral
            | TokenKind::CharLiteral => {
                n2 += 1;
                operands.insert(t.text.as_str());
            }
            TokenKind::Punctuation if matches!(t.text.as_str(), ";" | "{" | "}") => {}
            TokenKind::Keyword | TokenKind::Operator | TokenKind::Punctuation => {
                n1 += 1;
                operators.insert(t.text.as_str());
            }
        }
    }
    HalsteadCounts {
        distinct_operators: operators.len(),
        distinct_operands: operands.len(),
        total_operators: n1,
        total_operands: n2,
    }
}

pub fn halstead_volume(tokens: &[Token]) -> f64 {
    halstead_counts(tokens).volume()
}

/// `171 - 5.2 ln V - 0.23 G - 16.2 ln L`, with `V` and `L` floored at 1
/// so the logarithms stay finite.
pub fn maintainability_index(sloc: usize, cyclomatic: usize, volume: f64) -> f64 {
    let v = volume.max(1.0);
    let l = (sloc as f64).max(1.0);
    171.0 - 5.2 * v.ln() - 0.23 * cyclomatic as f64 - 16.2 * l.ln()
}

pub fn analyze(code: &str) -> Result<ComplexityReport> {
    let tokens = lex(code)?;
    let tree = parse_tokens(&tokens)?;
    let l = sloc(&tokens);
    let g = cyclomatic(&tree);
    let v = halstead_volume(&tokens);
    let mi = maintainability_index(l, g, v);
    Ok(ComplexityReport {
        sloc: l,
        cyclomatic: g,
        halstead_volume: v,
        maintainability_index: mi,
        difficulty: -mi,
    })
}

pub fn code_difficulty(sample: &FunctionSample) -> Result<DifficultyScore> {
    let report = analyze(&sample.code)?;
    Ok(DifficultyScore {
        sample_id: sample.id.clone(),
        value: report.difficulty,
        strategy: Strategy::Code,
        m: None,
    })
}

/// One line of the `metrics` JSONL output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub id: String,
    #[serde(rename = "L")]
    pub sloc: usize,
    #[serde(rename = "G")]
    pub cyclomatic: usize,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "MI")]
    pub mi: f64,
    pub difficulty: f64,
}

impl MetricsRecord {
    pub fn new(id: impl Into<String>, r: &ComplexityReport) -> Self {
        MetricsRecord {
            id: id.into(),
            sloc: r.sloc,
            cyclomatic: r.cyclomatic,
            volume: r.halstead_volume,
            mi: r.maintainability_index,
            difficulty: r.difficulty,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cparse::parse_function;

    fn cc(code: &str) -> usize {
        cyclomatic(&parse_function(code).unwrap())
    }

    #[test]
    fn sloc_skips_blank_and_comment_lines() {
        assert_eq!(sloc(&lex("x = 1;\n\n// note\n").unwrap()), 1);
        assert_eq!(sloc(&lex("int f(){\nreturn 0;\n}").unwrap()), 3);
        assert_eq!(sloc(&lex("a; /* trailing */\n/* a\n b */\n").unwrap()), 1);
    }

    #[test]
    fn cyclomatic_counts() {
        assert_eq!(cc("int f(void) { int a = 1; return a; }"), 1);
        assert_eq!(cc("if (a && b) { f(); }"), 3);
        assert_eq!(cc("for (;;) { } for (i = 0; i < n; i++) { }"), 2);
        assert_eq!(cc("do { x--; } while (x > 0 || y);"), 3);
        assert_eq!(cc("x = a ? b : c;"), 2);
        assert_eq!(
            cc("switch (x) { case 1: if (y) z = 1; break; case 2: break; default: break; }"),
            4
        );
    }

    #[test]
    fn halstead_hand_count() {
        let c = halstead_counts(&lex("a = a + 1").unwrap());
        assert_eq!(
            c,
            HalsteadCounts {
                distinct_operators: 2,
                distinct_operands: 2,
                total_operators: 2,
                total_operands: 3,
            }
        );
        assert_eq!(c.volume(), 10.0);
        assert_eq!(halstead_volume(&[]), 0.0);
        // delimiters are not operators
        assert_eq!(halstead_counts(&lex("{ ; }").unwrap()).length(), 0);
    }

    #[test]
    fn mi_values() {
        assert!((maintainability_index(1, 1, 1.0) - 170.77).abs() < 1e-12);
        let expected = 171.0 - 5.2 * 100f64.ln() - 2.3 - 16.2 * 63f64.ln();
        assert!((maintainability_index(63, 10, 100.0) - expected).abs() < 1e-12);
        assert!((maintainability_index(63, 10, 100.0) - 77.63).abs() < 0.01);
        // guards
        assert_eq!(maintainability_index(0, 1, 0.0), 170.77);
    }

    #[test]
    fn superset_is_harder() {
        let small = FunctionSample::new("b", "int f(int x) {\n  return x;\n}", 0);
        let big = FunctionSample::new(
            "a",
            "int f(int x) {\n  if (x > 0)\n    x = x * 2;\n  return x;\n}",
            0,
        );
        assert!(code_difficulty(&big).unwrap().value > code_difficulty(&small).unwrap().value);
        let again = code_difficulty(&small).unwrap();
        assert_eq!(again.value, code_difficulty(&small).unwrap().value);
        assert_eq!(again.strategy, Strategy::Code);
    }
}
