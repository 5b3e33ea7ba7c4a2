//! Statement-level parser with an opaque fallback.
//!
//! Control flow (`if`, `while`, `do`, `for`, `break`, `continue`, `return`,
//! blocks) is structured; declarations and expression statements are parsed
//! when they fit a small grammar; everything else becomes an opaque balanced
//! token run. Parsing only fails on unbalanced brackets.

use thiserror::Error;

use super::ast::{is_directive_text, Decl, Declarator, Expr, Span, Stmt, StmtKind, StmtTree};
use super::lexer::{lex, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("line {line}: unmatched {found:?}")]
    Unmatched { line: usize, found: String },
    #[error("line {line}: {open:?} is never closed")]
    Unclosed { line: usize, open: String },
}

/// A significant token. Preprocessor directives collapse into one `Sig`
/// holding the verbatim directive text.
#[derive(Debug, Clone)]
struct Sig {
    text: String,
    kind: TokenKind,
    line: usize,
    end_line: usize,
}

impl Sig {
    fn is(&self, s: &str) -> bool {
        self.text == s && !self.is_directive()
    }

    fn is_directive(&self) -> bool {
        is_directive_text(&self.text)
    }
}

fn significant(tokens: &[Token]) -> Vec<Sig> {
    let mut out: Vec<Sig> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind.is_trivia() {
            i += 1;
            continue;
        }
        let line_start = out.last().is_none_or(|p| p.end_line < t.line);
        if t.text == "#" && line_start {
            // directive: runs to the first newline not escaped by a backslash
            let start = i;
            let mut j = i + 1;
            while j < tokens.len() {
                let tj = &tokens[j];
                if tj.kind == TokenKind::Whitespace && tj.text.contains('\n') {
                    let escaped = tokens[j - 1].text == "\\"
                        && !tj
                            .text
                            .split('\n')
                            .next()
                            .unwrap_or("")
                            .contains(|c: char| !c.is_whitespace());
                    if !escaped {
                        break;
                    }
                }
                j += 1;
            }
            let raw: String = tokens[start..j].iter().map(|t| t.text.as_str()).collect();
            let raw = raw.trim_end().to_string();
            let end_line = t.line + raw.matches('\n').count();
            out.push(Sig {
                text: raw,
                kind: TokenKind::Punctuation,
                line: t.line,
                end_line,
            });
            i = j;
            continue;
        }
        out.push(Sig {
            text: t.text.clone(),
            kind: t.kind,
            line: t.line,
            end_line: t.end_line(),
        });
        i += 1;
    }
    out
}

fn check_balance(sigs: &[Sig]) -> Result<(), ParseError> {
    let mut stack: Vec<&Sig> = Vec::new();
    for s in sigs {
        if s.is_directive() || s.kind != TokenKind::Punctuation {
            continue;
        }
        match s.text.as_str() {
            "(" | "[" | "{" => stack.push(s),
            ")" | "]" | "}" => {
                let want = match s.text.as_str() {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some(open) if open.text == want => {}
                    _ => {
                        return Err(ParseError::Unmatched {
                            line: s.line,
                            found: s.text.clone(),
                        })
                    }
                }
            }
            _ => {}
        }
    }
    match stack.pop() {
        Some(open) => Err(ParseError::Unclosed {
            line: open.line,
            open: open.text.clone(),
        }),
        None => Ok(()),
    }
}

/// Parses one function definition, or a bare list of statements.
pub fn parse_function(code: &str) -> Result<StmtTree, ParseError> {
    let tokens = lex(code)?;
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[Token]) -> Result<StmtTree, ParseError> {
    let sigs = significant(tokens);
    check_balance(&sigs)?;
    let mut p = Parser {
        toks: &sigs,
        pos: 0,
    };
    if let Some(brace) = p.function_body_start() {
        let header = sigs[..brace].iter().map(|s| s.text.clone()).collect();
        p.pos = brace;
        let root = p.parse_stmt();
        return Ok(StmtTree {
            header: Some(header),
            root,
        });
    }
    let mut items = Vec::new();
    while p.pos < sigs.len() {
        items.push(p.parse_stmt());
    }
    let span = p.span(0, sigs.len());
    Ok(StmtTree {
        header: None,
        root: Stmt {
            kind: StmtKind::Block(items),
            span,
        },
    })
}

const CONTROL_WORDS: &[&str] = &[
    "if", "else", "while", "for", "do", "switch", "return", "case", "default", "goto",
];

const BASE_TYPES: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "_Complex",
];

const QUALIFIERS: &[&str] = &[
    "const",
    "volatile",
    "static",
    "extern",
    "register",
    "auto",
    "inline",
    "restrict",
    "_Atomic",
    "_Thread_local",
];

struct Parser<'a> {
    toks: &'a [Sig],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Sig> {
        self.toks.get(self.pos)
    }

    fn peek_is(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is(s))
    }

    fn at_is(&self, i: usize, s: &str) -> bool {
        self.toks.get(i).is_some_and(|t| t.is(s))
    }

    fn span(&self, start: usize, end: usize) -> Span {
        if start >= end || start >= self.toks.len() {
            let line = self
                .toks
                .get(start.min(self.toks.len().saturating_sub(1)))
                .map_or(1, |t| t.line);
            return Span {
                start,
                end: start.max(end),
                start_line: line,
                end_line: line,
            };
        }
        Span {
            start,
            end,
            start_line: self.toks[start].line,
            end_line: self.toks[end - 1].end_line,
        }
    }

    fn stmt(&self, kind: StmtKind, start: usize) -> Stmt {
        Stmt {
            kind,
            span: self.span(start, self.pos),
        }
    }

    /// Index just past the bracket group opened at `open`.
    fn skip_group(&self, open: usize) -> usize {
        let mut depth = 0usize;
        let mut i = open;
        while i < self.toks.len() {
            let t = &self.toks[i];
            if !t.is_directive() && t.kind == TokenKind::Punctuation {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        depth -= 1;
                        if depth == 0 {
                            return i + 1;
                        }
                    }
                    _ => {}
                }
            }
            i += 1;
        }
        self.toks.len()
    }

    /// Detects `header { body }` spanning the whole input and returns the
    /// index of the opening brace.
    fn function_body_start(&self) -> Option<usize> {
        let mut i = 0;
        while i < self.toks.len() {
            let t = &self.toks[i];
            if t.is_directive() || t.is(";") || t.is("=") {
                return None;
            }
            if t.is("(") || t.is("[") {
                i = self.skip_group(i);
                continue;
            }
            if t.is("{") {
                let ok = i > 0
                    && self.toks[i - 1].is(")")
                    && !CONTROL_WORDS.contains(&self.toks[0].text.as_str())
                    && self.skip_group(i) == self.toks.len();
                return ok.then_some(i);
            }
            i += 1;
        }
        None
    }

    fn texts(&self, start: usize, end: usize) -> Vec<String> {
        self.toks[start..end]
            .iter()
            .map(|t| t.text.clone())
            .collect()
    }

    fn opaque(&self, start: usize) -> Stmt {
        self.stmt(StmtKind::Opaque(self.texts(start, self.pos)), start)
    }

    pub fn parse_stmt(&mut self) -> Stmt {
        let start = self.pos;
        let Some(t) = self.peek() else {
            return self.stmt(StmtKind::Block(Vec::new()), start);
        };
        if t.is_directive() {
            self.pos += 1;
            return self.opaque(start);
        }
        let structured = match t.text.as_str() {
            "{" => Some(self.parse_block()),
            "if" => self.parse_if(),
            "while" => self.parse_while(),
            "do" => self.parse_do(),
            "for" => self.parse_for(),
            "break" | "continue" if self.at_is(self.pos + 1, ";") => {
                let kind = if t.text == "break" {
                    StmtKind::Break
                } else {
                    StmtKind::Continue
                };
                self.pos += 2;
                Some(self.stmt(kind, start))
            }
            "return" => self.parse_return(),
            "switch" => {
                self.pos += 1;
                if self.peek_is("(") {
                    self.pos = self.skip_group(self.pos);
                    if self.pos < self.toks.len() {
                        self.parse_stmt();
                    }
                }
                Some(self.opaque(start))
            }
            "case" | "default" => {
                while self.pos < self.toks.len() && !self.peek_is(":") {
                    if self.peek_is("(") || self.peek_is("[") {
                        self.pos = self.skip_group(self.pos);
                    } else if self.peek_is("}") {
                        break;
                    } else {
                        self.pos += 1;
                    }
                }
                if self.peek_is(":") {
                    self.pos += 1;
                }
                Some(self.opaque(start))
            }
            _ if t.kind == TokenKind::Identifier && self.at_is(self.pos + 1, ":") => {
                self.pos += 2;
                Some(self.opaque(start))
            }
            _ => None,
        };
        match structured {
            Some(s) => s,
            None => {
                self.pos = start;
                self.parse_simple()
            }
        }
    }

    fn parse_block(&mut self) -> Stmt {
        let start = self.pos;
        self.pos += 1; // {
        let mut items = Vec::new();
        while self.pos < self.toks.len() && !self.peek_is("}") {
            items.push(self.parse_stmt());
        }
        self.pos += 1; // }
        self.stmt(StmtKind::Block(items), start)
    }

    /// Parses `( expr )` starting at an open paren. The condition becomes
    /// `Expr::Opaque` when it does not fit the expression grammar.
    fn parse_paren_cond(&mut self) -> Option<Expr> {
        if !self.peek_is("(") {
            return None;
        }
        let close = self.skip_group(self.pos) - 1;
        let inner = &self.toks[self.pos + 1..close];
        self.pos = close + 1;
        Some(parse_expr_or_opaque(inner, true))
    }

    /// A nested statement; `None` if the input ends first.
    fn parse_sub(&mut self) -> Option<Stmt> {
        if self.pos >= self.toks.len() || self.peek_is("}") {
            None
        } else {
            Some(self.parse_stmt())
        }
    }

    fn parse_if(&mut self) -> Option<Stmt> {
        let start = self.pos;
        self.pos += 1;
        let cond = self.parse_paren_cond()?;
        let then = self.parse_sub()?;
        let otherwise = if self.peek_is("else") {
            self.pos += 1;
            Some(Box::new(self.parse_sub()?))
        } else {
            None
        };
        Some(self.stmt(
            StmtKind::If {
                cond,
                then: Box::new(then),
                otherwise,
            },
            start,
        ))
    }

    fn parse_while(&mut self) -> Option<Stmt> {
        let start = self.pos;
        self.pos += 1;
        let cond = self.parse_paren_cond()?;
        let body = self.parse_sub()?;
        Some(self.stmt(
            StmtKind::While {
                cond,
                body: Box::new(body),
            },
            start,
        ))
    }

    fn parse_do(&mut self) -> Option<Stmt> {
        let start = self.pos;
        self.pos += 1;
        let body = self.parse_sub()?;
        if !self.peek_is("while") {
            return None;
        }
        self.pos += 1;
        let cond = self.parse_paren_cond()?;
        if !self.peek_is(";") {
            return None;
        }
        self.pos += 1;
        Some(self.stmt(
            StmtKind::DoWhile {
                body: Box::new(body),
                cond,
            },
            start,
        ))
    }

    fn parse_for(&mut self) -> Option<Stmt> {
        let start = self.pos;
        self.pos += 1;
        if !self.peek_is("(") {
            return None;
        }
        let close = self.skip_group(self.pos) - 1;
        let inner_start = self.pos + 1;
        // split the header on top-level semicolons
        let mut parts = Vec::new();
        let mut seg = inner_start;
        let mut i = inner_start;
        while i < close {
            if self.toks[i].is("(") || self.toks[i].is("[") || self.toks[i].is("{") {
                i = self.skip_group(i);
                continue;
            }
            if self.toks[i].is(";") {
                parts.push((seg, i));
                seg = i + 1;
            }
            i += 1;
        }
        parts.push((seg, close));
        if parts.len() != 3 {
            return None;
        }
        let (is, ie) = parts[0];
        let init = (is < ie).then(|| {
            let kind = classify_simple(&self.toks[is..ie])
                .unwrap_or_else(|| StmtKind::Opaque(self.texts(is, ie)));
            Box::new(Stmt {
                kind,
                span: self.span(is, ie),
            })
        });
        let part_expr =
            |(s, e): (usize, usize)| (s < e).then(|| parse_expr_or_opaque(&self.toks[s..e], true));
        let cond = part_expr(parts[1]);
        let step = part_expr(parts[2]);
        self.pos = close + 1;
        let body = self.parse_sub()?;
        Some(self.stmt(
            StmtKind::For {
                init,
                cond,
                step,
                body: Box::new(body),
            },
            start,
        ))
    }

    fn parse_return(&mut self) -> Option<Stmt> {
        let start = self.pos;
        let end = self.simple_extent(start + 1);
        if !self.at_is(end - 1, ";") {
            return None;
        }
        let expr = (end - 1 > start + 1)
            .then(|| parse_expr_or_opaque(&self.toks[start + 1..end - 1], true));
        self.pos = end;
        Some(self.stmt(StmtKind::Return(expr), start))
    }

    /// End (exclusive) of a simple statement starting at `from`: through the
    /// first top-level `;`, or through a brace group that directly follows
    /// `)` (macro-style blocks), or up to an enclosing `}`.
    fn simple_extent(&self, from: usize) -> usize {
        let mut i = from;
        let mut saw_assign = false;
        while i < self.toks.len() {
            let t = &self.toks[i];
            if t.is_directive() {
                return i.max(from + 1).min(self.toks.len());
            }
            if t.is(";") {
                return i + 1;
            }
            if t.is("}") {
                return i.max(from + 1);
            }
            if t.is("=") {
                saw_assign = true;
            }
            if t.is("{") {
                let end = self.skip_group(i);
                if !saw_assign && i > from && self.toks[i - 1].is(")") {
                    return end;
                }
                i = end;
                continue;
            }
            if t.is("(") || t.is("[") {
                i = self.skip_group(i);
                continue;
            }
            i += 1;
        }
        self.toks.len()
    }

    fn parse_simple(&mut self) -> Stmt {
        let start = self.pos;
        let end = self.simple_extent(start);
        self.pos = end;
        let run = &self.toks[start..end];
        let kind = match run.split_last() {
            Some((last, body)) if last.is(";") && !body.is_empty() => {
                classify_simple(body).unwrap_or_else(|| StmtKind::Opaque(self.texts(start, end)))
            }
            _ => StmtKind::Opaque(self.texts(start, end)),
        };
        self.stmt(kind, start)
    }
}

/// Declaration or expression statement from a run without its `;`.
fn classify_simple(run: &[Sig]) -> Option<StmtKind> {
    if let Some(d) = parse_decl(run) {
        return Some(StmtKind::Decl(d));
    }
    if run
        .first()
        .is_some_and(|t| t.kind == TokenKind::Keyword && t.text != "sizeof")
    {
        return None;
    }
    parse_expr(run, true).map(StmtKind::Expr)
}

fn parse_decl(run: &[Sig]) -> Option<Decl> {
    let mut i = 0;
    let mut ty = Vec::new();
    let mut have_base = false;
    while i < run.len() {
        let t = &run[i];
        let txt = t.text.as_str();
        if t.kind == TokenKind::Keyword && BASE_TYPES.contains(&txt) {
            have_base = true;
        } else if t.kind == TokenKind::Keyword && QUALIFIERS.contains(&txt) {
        } else if t.kind == TokenKind::Keyword && matches!(txt, "struct" | "union" | "enum") {
            let name = run.get(i + 1)?;
            if name.kind != TokenKind::Identifier {
                return None;
            }
            ty.push(t.text.clone());
            ty.push(name.text.clone());
            have_base = true;
            i += 2;
            continue;
        } else if t.kind == TokenKind::Identifier
            && !have_base
            && run
                .get(i + 1)
                .is_some_and(|n| n.kind == TokenKind::Identifier || n.is("*"))
        {
            have_base = true;
        } else {
            break;
        }
        ty.push(t.text.clone());
        i += 1;
    }
    if !have_base || i >= run.len() {
        return None;
    }
    let mut items = Vec::new();
    loop {
        let mut pointer = Vec::new();
        while i < run.len()
            && (run[i].is("*")
                || (!pointer.is_empty()
                    && matches!(run[i].text.as_str(), "const" | "volatile" | "restrict")))
        {
            pointer.push(run[i].text.clone());
            i += 1;
        }
        let name = run.get(i)?;
        if name.kind != TokenKind::Identifier {
            return None;
        }
        i += 1;
        let mut array = Vec::new();
        while i < run.len() && run[i].is("[") {
            let close = group_end(run, i)?;
            array.extend(run[i..close].iter().map(|t| t.text.clone()));
            i = close;
        }
        let mut init = None;
        if i < run.len() && run[i].is("=") {
            i += 1;
            let mut j = i;
            while j < run.len() && !run[j].is(",") {
                if run[j].is("(") || run[j].is("[") || run[j].is("{") {
                    j = group_end(run, j)?;
                } else {
                    j += 1;
                }
            }
            if j == i {
                return None;
            }
            init = Some(parse_expr_or_opaque(&run[i..j], false));
            i = j;
        }
        items.push(Declarator {
            pointer,
            name: name.text.clone(),
            array,
            init,
        });
        if i == run.len() {
            break;
        }
        if !run[i].is(",") {
            return None;
        }
        i += 1;
    }
    Some(Decl { ty, items })
}

/// Index past the bracket group opened at `open` within `run`.
fn group_end(run: &[Sig], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (k, t) in run.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Punctuation || t.is_directive() {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(k + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_expr_or_opaque(run: &[Sig], allow_comma: bool) -> Expr {
    parse_expr(run, allow_comma)
        .unwrap_or_else(|| Expr::Opaque(run.iter().map(|t| t.text.clone()).collect()))
}

fn parse_expr(run: &[Sig], allow_comma: bool) -> Option<Expr> {
    if run.is_empty() || run.iter().any(Sig::is_directive) {
        return None;
    }
    let mut p = ExprParser { toks: run, pos: 0 };
    let e = if allow_comma {
        p.comma()?
    } else {
        p.assignment()?
    };
    (p.pos == run.len()).then_some(e)
}

/// Binary levels from loosest to tightest (below ternary).
const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^"],
    &["&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["<<", ">>"],
    &["+", "-"],
    &["*", "/", "%"],
];

struct ExprParser<'a> {
    toks: &'a [Sig],
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&'a Sig> {
        self.toks.get(self.pos)
    }

    fn peek_op(&self) -> Option<&'a str> {
        self.peek()
            .filter(|t| matches!(t.kind, TokenKind::Operator | TokenKind::Punctuation))
            .map(|t| t.text.as_str())
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek_op() == Some(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn comma(&mut self) -> Option<Expr> {
        let mut lhs = self.assignment()?;
        while self.eat(",") {
            let rhs = self.assignment()?;
            lhs = Expr::binary(",", lhs, rhs);
        }
        Some(lhs)
    }

    fn assignment(&mut self) -> Option<Expr> {
        let lhs = self.ternary()?;
        if let Some(op) = self.peek_op() {
            if super::ast::ASSIGN_OPS.contains(&op) {
                self.pos += 1;
                let rhs = self.assignment()?;
                return Some(Expr::binary(op, lhs, rhs));
            }
        }
        Some(lhs)
    }

    fn ternary(&mut self) -> Option<Expr> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let then = self.comma()?;
            if !self.eat(":") {
                return None;
            }
            let otherwise = self.assignment()?;
            return Some(Expr::Ternary(
                Box::new(cond),
                Box::new(then),
                Box::new(otherwise),
            ));
        }
        Some(cond)
    }

    fn binary(&mut self, level: usize) -> Option<Expr> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self
            .peek_op()
            .filter(|op| BINARY_LEVELS[level].contains(op))
        {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<Expr> {
        let t = self.peek()?;
        if t.kind == TokenKind::Operator
            && matches!(
                t.text.as_str(),
                "!" | "~" | "-" | "+" | "*" | "&" | "++" | "--"
            )
        {
            self.pos += 1;
            let e = self.unary()?;
            return Some(Expr::Unary(t.text.clone(), Box::new(e)));
        }
        if t.kind == TokenKind::Keyword && t.text == "sizeof" {
            let start = self.pos;
            self.pos += 1;
            if self.peek_op() == Some("(") {
                let close = group_end(self.toks, self.pos)?;
                if let Some(inner) = parse_expr(&self.toks[self.pos + 1..close - 1], true) {
                    self.pos = close;
                    return Some(Expr::Unary(
                        "sizeof".to_string(),
                        Box::new(Expr::Paren(Box::new(inner))),
                    ));
                }
                self.pos = close;
                return Some(Expr::Opaque(
                    self.toks[start..close]
                        .iter()
                        .map(|t| t.text.clone())
                        .collect(),
                ));
            }
            let e = self.unary()?;
            return Some(Expr::Unary("sizeof".to_string(), Box::new(e)));
        }
        if t.is("(") {
            if let Some(e) = self.try_cast() {
                return Some(e);
            }
        }
        self.postfix()
    }

    /// `(type) operand`, recognized when the parenthesized tokens are type
    /// words optionally followed by stars.
    fn try_cast(&mut self) -> Option<Expr> {
        let open = self.pos;
        let close = group_end(self.toks, open)?;
        let inner = &self.toks[open + 1..close - 1];
        if inner.is_empty() {
            return None;
        }
        let stars = inner.iter().rev().take_while(|t| t.is("*")).count();
        let words = &inner[..inner.len() - stars];
        if words.is_empty()
            || !words.iter().all(|t| {
                t.kind == TokenKind::Identifier
                    || (t.kind == TokenKind::Keyword
                        && (BASE_TYPES.contains(&t.text.as_str())
                            || QUALIFIERS.contains(&t.text.as_str())
                            || matches!(t.text.as_str(), "struct" | "union" | "enum")))
            })
        {
            return None;
        }
        let has_type_word = words.iter().any(|t| t.kind == TokenKind::Keyword);
        let next = self.toks.get(close);
        let next_starts_operand = next.is_some_and(|n| {
            matches!(
                n.kind,
                TokenKind::Identifier
                    | TokenKind::IntLiteral
                    | TokenKind::StringLiteral
                    | TokenKind::CharLiteral
            ) || n.is("(")
                || (n.kind == TokenKind::Keyword && n.text == "sizeof")
        });
        let is_cast = if has_type_word || stars > 0 {
            next.is_some()
        } else {
            words.len() == 1 && next_starts_operand
        };
        if !is_cast {
            return None;
        }
        let ty = inner.iter().map(|t| t.text.clone()).collect();
        self.pos = close;
        match self.unary() {
            Some(e) => Some(Expr::Cast(ty, Box::new(e))),
            None => {
                self.pos = open;
                None
            }
        }
    }

    fn postfix(&mut self) -> Option<Expr> {
        let mut e = self.primary()?;
        loop {
            match self.peek_op() {
                Some("(") => {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.assignment()?);
                            if self.eat(")") {
                                break;
                            }
                            if !self.eat(",") {
                                return None;
                            }
                        }
                    }
                    e = Expr::Call(Box::new(e), args);
                }
                Some("[") => {
                    self.pos += 1;
                    let idx = self.comma()?;
                    if !self.eat("]") {
                        return None;
                    }
                    e = Expr::Index(Box::new(e), Box::new(idx));
                }
                Some(op @ ("." | "->")) => {
                    self.pos += 1;
                    let field = self.peek().filter(|t| t.kind == TokenKind::Identifier)?;
                    self.pos += 1;
                    e = Expr::Member(Box::new(e), op.to_string(), field.text.clone());
                }
                Some(op @ ("++" | "--")) => {
                    self.pos += 1;
                    e = Expr::Postfix(op.to_string(), Box::new(e));
                }
                _ => return Some(e),
            }
        }
    }

    fn primary(&mut self) -> Option<Expr> {
        let t = self.peek()?;
        match t.kind {
            TokenKind::Identifier => {
                self.pos += 1;
                Some(Expr::Var(t.text.clone()))
            }
            TokenKind::IntLiteral => {
                self.pos += 1;
                Some(Expr::IntLit(t.text.clone()))
            }
            TokenKind::StringLiteral | TokenKind::CharLiteral => {
                let mut parts = vec![t.text.clone()];
                self.pos += 1;
                if t.kind == TokenKind::StringLiteral {
                    while let Some(n) = self.peek().filter(|n| n.kind == TokenKind::StringLiteral) {
                        parts.push(n.text.clone());
                        self.pos += 1;
                    }
                }
                Some(Expr::StrLit(parts))
            }
            _ if t.is("(") => {
                self.pos += 1;
                let e = self.comma()?;
                if !self.eat(")") {
                    return None;
                }
                Some(Expr::Paren(Box::new(e)))
            }
            _ => None,
        }
    }
}
