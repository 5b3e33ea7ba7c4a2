//! Deterministic interpreter for the integer subset of the statement tree,
//! used to check that rewritten functions behave like their source.
//!
//! Cost model: every executed simple statement (expression, declaration,
//! `break`, `continue`, `return`) costs one step, every evaluation of a
//! branch or loop condition costs one step, and a `for` loop's init and
//! each of its step expressions cost one step. Blocks are free.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cparse::{Expr, Stmt, StmtKind, StmtTree};

pub type Env = BTreeMap<String, i64>;

/// The tree uses constructs outside the interpretable subset.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("not interpretable: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuntimeError {
    Unbound(String),
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Completed { returned: Option<i64> },
    Error(RuntimeError),
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    /// Assignment events in execution order.
    pub events: Vec<(String, i64)>,
    pub env: Env,
    pub steps: u64,
    pub outcome: Outcome,
}

enum Stop {
    Runtime(RuntimeError),
    Budget,
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Option<i64>),
}

struct Machine {
    env: Env,
    events: Vec<(String, i64)>,
    steps: u64,
    budget: u64,
}

type Step<T> = std::result::Result<T, Stop>;

fn lvalue(e: &Expr) -> Option<&str> {
    match e.unparen() {
        Expr::Var(name) => Some(name),
        _ => None,
    }
}

fn truth(v: i64) -> i64 {
    i64::from(v != 0)
}

impl Machine {
    fn tick(&mut self) -> Step<()> {
        if self.steps >= self.budget {
            return Err(Stop::Budget);
        }
        self.steps += 1;
        Ok(())
    }

    fn assign(&mut self, name: &str, v: i64) {
        self.env.insert(name.to_string(), v);
        self.events.push((name.to_string(), v));
    }

    fn read(&self, name: &str) -> Step<i64> {
        self.env
            .get(name)
            .copied()
            .ok_or_else(|| Stop::Runtime(RuntimeError::Unbound(name.to_string())))
    }

    fn cond(&mut self, e: &Expr) -> Step<bool> {
        self.tick()?;
        Ok(self.eval(e)? != 0)
    }

    fn eval(&mut self, e: &Expr) -> Step<i64> {
        match e {
            Expr::IntLit(text) => Ok(parse_int(text).expect("checked literal")),
            Expr::Var(name) => self.read(name),
            Expr::Paren(inner) => self.eval(inner),
            Expr::Unary(op, inner) => match op.as_str() {
                "++" | "--" => {
                    let name = lvalue(inner).expect("checked lvalue");
                    let v = self.read(name)?;
                    let v = if op == "++" {
                        v.wrapping_add(1)
                    } else {
                        v.wrapping_sub(1)
                    };
                    self.assign(name, v);
                    Ok(v)
                }
                _ => {
                    let v = self.eval(inner)?;
                    Ok(match op.as_str() {
                        "-" => v.wrapping_neg(),
                        "+" => v,
                        "!" => i64::from(v == 0),
                        "~" => !v,
                        _ => unreachable!("checked unary operator"),
                    })
                }
            },
            Expr::Postfix(op, inner) => {
                let name = lvalue(inner).expect("checked lvalue");
                let v = self.read(name)?;
                let nv = if op == "++" {
                    v.wrapping_add(1)
                } else {
                    v.wrapping_sub(1)
                };
                self.assign(name, nv);
                Ok(v)
            }
            Expr::Binary(op, l, r) => self.binary(op, l, r),
            Expr::Ternary(c, t, f) => {
                if self.eval(c)? != 0 {
                    self.eval(t)
                } else {
                    self.eval(f)
                }
            }
            _ => unreachable!("checked expression kind"),
        }
    }

    fn binary(&mut self, op: &str, l: &Expr, r: &Expr) -> Step<i64> {
        match op {
            "&&" => {
                if self.eval(l)? == 0 {
                    return Ok(0);
                }
                Ok(truth(self.eval(r)?))
            }
            "||" => {
                if self.eval(l)? != 0 {
                    return Ok(1);
                }
                Ok(truth(self.eval(r)?))
            }
            "," => {
                self.eval(l)?;
                self.eval(r)
            }
            "=" => {
                let v = self.eval(r)?;
                self.assign(lvalue(l).expect("checked lvalue"), v);
                Ok(v)
            }
            _ if op.len() >= 2 && op.ends_with('=') && !matches!(op, "==" | "!=" | "<=" | ">=") => {
                let name = lvalue(l).expect("checked lvalue");
                let cur = self.read(name)?;
                let rhs = self.eval(r)?;
                let v = arith(&op[..op.len() - 1], cur, rhs)?;
                self.assign(name, v);
                Ok(v)
            }
            _ => {
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                arith(op, a, b)
            }
        }
    }

    fn exec(&mut self, s: &Stmt) -> Step<Flow> {
        match &s.kind {
            StmtKind::Block(items) => {
                for item in items {
                    match self.exec(item)? {
                        Flow::Normal => {}
                        other => return Ok(other),
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                if self.cond(cond)? {
                    self.exec(then)
                } else if let Some(e) = otherwise {
                    self.exec(e)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body } => {
                while self.cond(cond)? {
                    match self.exec(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::DoWhile { body, cond } => {
                loop {
                    match self.exec(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    if !self.cond(cond)? {
                        break;
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                if let Some(init) = init {
                    self.exec(init)?;
                }
                loop {
                    if let Some(c) = cond {
                        if !self.cond(c)? {
                            break;
                        }
                    }
                    match self.exec(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    if let Some(st) = step {
                        self.tick()?;
                        self.eval(st)?;
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Break => {
                self.tick()?;
                Ok(Flow::Break)
            }
            StmtKind::Continue => {
                self.tick()?;
                Ok(Flow::Continue)
            }
            StmtKind::Return(e) => {
                self.tick()?;
                let v = e.as_ref().map(|e| self.eval(e)).transpose()?;
                Ok(Flow::Return(v))
            }
            StmtKind::Expr(e) => {
                self.tick()?;
                self.eval(e)?;
                Ok(Flow::Normal)
            }
            StmtKind::Decl(d) => {
                self.tick()?;
                for item in &d.items {
                    match &item.init {
                        Some(init) => {
                            let v = self.eval(init)?;
                            self.assign(&item.name, v);
                        }
                        None => {
                            self.env.remove(&item.name);
                        }
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Opaque(_) => unreachable!("checked statement kind"),
        }
    }
}

fn arith(op: &str, a: i64, b: i64) -> Step<i64> {
    Ok(match op {
        "+" => a.wrapping_add(b),
        "-" => a.wrapping_sub(b),
        "*" => a.wrapping_mul(b),
        "/" | "%" if b == 0 => return Err(Stop::Runtime(RuntimeError::DivisionByZero)),
        "/" => a.wrapping_div(b),
        "%" => a.wrapping_rem(b),
        "<<" => a.wrapping_shl(b as u32),
        ">>" => a.wrapping_shr(b as u32),
        "&" => a & b,
        "|" => a | b,
        "^" => a ^ b,
        "<" => i64::from(a < b),
        "<=" => i64::from(a <= b),
        ">" => i64::from(a > b),
        ">=" => i64::from(a >= b),
        "==" => i64::from(a == b),
        "!=" => i64::from(a != b),
        _ => unreachable!("checked binary operator"),
    })
}

/// Decimal, hex or octal integer literal with optional `u`/`l` suffixes.
fn parse_int(text: &str) -> Option<i64> {
    let body = text.trim_end_matches(['u', 'U', 'l', 'L']);
    let (digits, radix) =
        if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
            (h, 16)
        } else if body.len() > 1 && body.starts_with('0') {
            (&body[1..], 8)
        } else {
            (body, 10)
        };
    u64::from_str_radix(digits, radix).ok().map(|v| v as i64)
}

const BINARY_OPS: &[&str] = &[
    "+", "-", "*", "/", "%", "<<", ">>", "&", "|", "^", "<", "<=", ">", ">=", "==", "!=", "&&",
    "||", ",", "=", "+=", "-=", "*=", "/=", "%=", "<<=", ">>=", "&=", "|=", "^=",
];

fn check_expr(e: &Expr) -> Result<(), EvalError> {
    let bad = |what: &str| Err(EvalError::Unsupported(what.to_string()));
    match e {
        Expr::IntLit(t) => match parse_int(t) {
            Some(_) => Ok(()),
            None => bad(&format!("literal {t}")),
        },
        Expr::Var(_) => Ok(()),
        Expr::Paren(inner) => check_expr(inner),
        Expr::Unary(op, inner) => match op.as_str() {
            "++" | "--" if lvalue(inner).is_some() => Ok(()),
            "-" | "+" | "!" | "~" => check_expr(inner),
            _ => bad(&format!("unary {op}")),
        },
        Expr::Postfix(_, inner) if lvalue(inner).is_some() => Ok(()),
        Expr::Binary(op, l, r) if BINARY_OPS.contains(&op.as_str()) => {
            let assigns = op.ends_with('=') && !matches!(op.as_str(), "==" | "!=" | "<=" | ">=");
            if assigns && lvalue(l).is_none() {
                return bad("assignment to a non-variable");
            }
            check_expr(l)?;
            check_expr(r)
        }
        Expr::Ternary(c, t, f) => {
            check_expr(c)?;
            check_expr(t)?;
            check_expr(f)
        }
        Expr::Call(..) => bad("function call"),
        other => bad(&format!("{other:?}")),
    }
}

/// Rejects trees outside the interpretable subset.
pub fn check_interpretable(tree: &StmtTree) -> Result<(), EvalError> {
    let mut result = Ok(());
    tree.walk(&mut |s| {
        if result.is_err() {
            return;
        }
        result = match &s.kind {
            StmtKind::Opaque(tokens) => Err(EvalError::Unsupported(format!(
                "opaque statement {}",
                tokens.join(" ")
            ))),
            StmtKind::Decl(d) if d.items.iter().any(|i| !i.is_scalar()) => {
                Err(EvalError::Unsupported("non-scalar declaration".into()))
            }
            _ => s.exprs().into_iter().try_for_each(check_expr),
        };
    });
    result
}

pub fn interpret(tree: &StmtTree, inputs: &Env, step_budget: u64) -> Result<Trace, EvalError> {
    check_interpretable(tree)?;
    let mut m = Machine {
        env: inputs.clone(),
        events: Vec::new(),
        steps: 0,
        budget: step_budget,
    };
    let outcome = match m.exec(&tree.root) {
        Ok(Flow::Return(v)) => Outcome::Completed { returned: v },
        Ok(_) => Outcome::Completed { returned: None },
        Err(Stop::Runtime(e)) => Outcome::Error(e),
        Err(Stop::Budget) => Outcome::BudgetExhausted,
    };
    Ok(Trace {
        events: m.events,
        env: m.env,
        steps: m.steps,
        outcome,
    })
}

/// Variables the tree uses without declaring them.
pub fn free_variables(tree: &StmtTree) -> BTreeSet<String> {
    let mut used = BTreeSet::new();
    let mut declared = BTreeSet::new();
    tree.walk(&mut |s| {
        if let StmtKind::Decl(d) = &s.kind {
            declared.extend(d.names().map(String::from));
        }
    });
    tree.walk_exprs(&mut |e| {
        if let Expr::Var(name) = e {
            used.insert(name.clone());
        }
    });
    used.difference(&declared).cloned().collect()
}

/// Values random environments draw from: small integers around zero plus
/// the extremes.
pub const INPUT_VALUES: &[i64] = &[-3, -2, -1, 0, 1, 2, 3, i64::MIN, i64::MAX];

pub fn random_envs(vars: &BTreeSet<String>, trials: usize, seed: u64) -> Vec<Env> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            vars.iter()
                .map(|v| {
                    (
                        v.clone(),
                        *INPUT_VALUES.choose(&mut rng).expect("non-empty"),
                    )
                })
                .collect()
        })
        .collect()
}

pub const DEFAULT_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Equivalent {
        trials: usize,
    },
    Diverged {
        witness: Env,
        left: Trace,
        right: Trace,
    },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. })
    }
}

/// Same observable behaviour, step counts aside. When both runs exhaust
/// their budgets the shorter event sequence must prefix the longer one.
fn traces_agree(a: &Trace, b: &Trace) -> bool {
    match (&a.outcome, &b.outcome) {
        (Outcome::BudgetExhausted, Outcome::BudgetExhausted) => {
            let n = a.events.len().min(b.events.len());
            a.events[..n] == b.events[..n]
        }
        _ => a.outcome == b.outcome && a.events == b.events && a.env == b.env,
    }
}

fn run_pair(t1: &StmtTree, t2: &StmtTree, env: &Env, budget: u64) -> (Trace, Trace) {
    let run = |t: &StmtTree, b: u64| interpret(t, env, b).expect("checked tree");
    let (a, b) = (run(t1, budget), run(t2, budget));
    let exhausted = |t: &Trace| t.outcome == Outcome::BudgetExhausted;
    if exhausted(&a) != exhausted(&b) {
        // One side may simply spend more steps per iteration.
        (run(t1, budget * 8), run(t2, budget * 8))
    } else {
        (a, b)
    }
}

pub fn equivalent(
    t1: &StmtTree,
    t2: &StmtTree,
    trials: usize,
    seed: u64,
) -> Result<Verdict, EvalError> {
    equivalent_with_budget(t1, t2, trials, seed, DEFAULT_BUDGET)
}

pub fn equivalent_with_budget(
    t1: &StmtTree,
    t2: &StmtTree,
    trials: usize,
    seed: u64,
    budget: u64,
) -> Result<Verdict, EvalError> {
    check_interpretable(t1)?;
    check_interpretable(t2)?;
    let vars: BTreeSet<String> = free_variables(t1)
        .union(&free_variables(t2))
        .cloned()
        .collect();
    let envs = random_envs(&vars, trials, seed);
    let first_bad = envs
        .par_iter()
        .map(|env| {
            let (a, b) = run_pair(t1, t2, env, budget);
            (!traces_agree(&a, &b)).then(|| (env.clone(), a, b))
        })
        .find_first(Option::is_some)
        .flatten();
    Ok(match first_bad {
        None => Verdict::Equivalent { trials },
        Some((witness, left, right)) => Verdict::Diverged {
            witness,
            left,
            right,
        },
    })
}
