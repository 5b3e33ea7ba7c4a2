//! Deterministic pretty-printer for [`StmtTree`].

use super::ast::{is_directive_text, Decl, Expr, Stmt, StmtKind, StmtTree};

const INDENT: &str = "    ";

pub fn render(tree: &StmtTree) -> String {
    let mut out = String::new();
    match &tree.header {
        Some(header) => {
            out.push_str(&join_tokens(header));
            out.push('\n');
            render_stmt(&tree.root, 0, &mut out);
            out.push('\n');
        }
        None => {
            for s in tree.body() {
                render_stmt(s, 0, &mut out);
                out.push('\n');
            }
        }
    }
    out
}

/// Renders a single statement at indentation zero.
pub fn render_stmt_text(stmt: &Stmt) -> String {
    let mut out = String::new();
    render_stmt(stmt, 0, &mut out);
    out
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str(INDENT);
    }
}

/// Writes `stmt` assuming the cursor sits at the start of an already
/// indented line.
fn render_stmt(stmt: &Stmt, indent: usize, out: &mut String) {
    match &stmt.kind {
        StmtKind::Block(items) => {
            if items.is_empty() {
                out.push_str("{ }");
                return;
            }
            out.push('{');
            for s in items {
                out.push('\n');
                pad(out, indent + 1);
                render_stmt(s, indent + 1, out);
            }
            out.push('\n');
            pad(out, indent);
            out.push('}');
        }
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            out.push_str("if (");
            out.push_str(&render_expr(cond));
            out.push(')');
            render_body(then, indent, out);
            if let Some(e) = otherwise {
                if matches!(then.kind, StmtKind::Block(_)) {
                    out.push(' ');
                } else {
                    out.push('\n');
                    pad(out, indent);
                }
                out.push_str("else");
                if matches!(e.kind, StmtKind::If { .. }) {
                    out.push(' ');
                    render_stmt(e, indent, out);
                } else {
                    render_body(e, indent, out);
                }
            }
        }
        StmtKind::While { cond, body } => {
            out.push_str("while (");
            out.push_str(&render_expr(cond));
            out.push(')');
            render_body(body, indent, out);
        }
        StmtKind::DoWhile { body, cond } => {
            out.push_str("do");
            render_body(body, indent, out);
            if matches!(body.kind, StmtKind::Block(_)) {
                out.push(' ');
            } else {
                out.push('\n');
                pad(out, indent);
            }
            out.push_str("while (");
            out.push_str(&render_expr(cond));
            out.push_str(");");
        }
        StmtKind::For {
            init,
            cond,
            step,
            body,
        } => {
            out.push_str("for (");
            if let Some(init) = init {
                out.push_str(&render_simple(init));
            }
            out.push(';');
            if let Some(c) = cond {
                out.push(' ');
                out.push_str(&render_expr(c));
            }
            out.push(';');
            if let Some(s) = step {
                out.push(' ');
                out.push_str(&render_expr(s));
            }
            out.push(')');
            render_body(body, indent, out);
        }
        StmtKind::Break => out.push_str("break;"),
        StmtKind::Continue => out.push_str("continue;"),
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            out.push_str("return ");
            out.push_str(&render_expr(e));
            out.push(';');
        }
        StmtKind::Expr(_) | StmtKind::Decl(_) => {
            out.push_str(&render_simple(stmt));
            out.push(';');
        }
        StmtKind::Opaque(tokens) => out.push_str(&join_tokens(tokens)),
    }
}

/// Loop and branch bodies: a block opens on the same line, anything else
/// goes on its own indented line.
fn render_body(body: &Stmt, indent: usize, out: &mut String) {
    if matches!(body.kind, StmtKind::Block(_)) {
        out.push(' ');
        render_stmt(body, indent, out);
    } else {
        out.push('\n');
        pad(out, indent + 1);
        render_stmt(body, indent + 1, out);
    }
}

/// Declaration, expression or opaque run without a trailing `;`.
fn render_simple(stmt: &Stmt) -> String {
    match &stmt.kind {
        StmtKind::Expr(e) => render_expr(e),
        StmtKind::Decl(d) => render_decl(d),
        StmtKind::Opaque(tokens) => join_tokens(tokens),
        _ => render_stmt_text(stmt),
    }
}

fn render_decl(d: &Decl) -> String {
    let items: Vec<String> = d
        .items
        .iter()
        .map(|it| {
            let mut toks = it.pointer.clone();
            toks.push(it.name.clone());
            toks.extend(it.array.iter().cloned());
            let mut s = join_tokens(&toks);
            if let Some(init) = &it.init {
                s.push_str(" = ");
                s.push_str(&render_expr(init));
            }
            s
        })
        .collect();
    format!("{} {}", join_tokens(&d.ty), items.join(", "))
}

pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::IntLit(t) | Expr::Var(t) => t.clone(),
        Expr::StrLit(parts) => parts.join(" "),
        Expr::Paren(inner) => format!("({})", render_expr(inner)),
        Expr::Unary(op, inner) => {
            let rhs = render_expr(inner);
            if op == "sizeof" && !matches!(inner.as_ref(), Expr::Paren(_)) {
                format!("sizeof {rhs}")
            } else {
                glue(op, &rhs)
            }
        }
        Expr::Postfix(op, inner) => glue(&render_expr(inner), op),
        Expr::Binary(op, l, r) if op == "," => format!("{}, {}", render_expr(l), render_expr(r)),
        Expr::Binary(op, l, r) => format!("{} {} {}", render_expr(l), op, render_expr(r)),
        Expr::Ternary(c, t, f) => format!(
            "{} ? {} : {}",
            render_expr(c),
            render_expr(t),
            render_expr(f)
        ),
        Expr::Call(callee, args) => {
            let args: Vec<String> = args.iter().map(render_expr).collect();
            format!("{}({})", render_expr(callee), args.join(", "))
        }
        Expr::Index(base, idx) => format!("{}[{}]", render_expr(base), render_expr(idx)),
        Expr::Member(base, op, field) => format!("{}{}{}", render_expr(base), op, field),
        Expr::Cast(ty, inner) => format!("({}){}", join_tokens(ty), render_expr(inner)),
        Expr::Opaque(tokens) => join_tokens(tokens),
    }
}

fn is_op_char(c: char) -> bool {
    "+-*/%<>=!&|^~?:.#".contains(c)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '"' || c == '\''
}

/// Concatenates two lexemes, inserting a space when gluing them would lex
/// differently.
fn glue(a: &str, b: &str) -> String {
    let (Some(x), Some(y)) = (a.chars().last(), b.chars().next()) else {
        return format!("{a}{b}");
    };
    let clash = (is_op_char(x) && is_op_char(y))
        || (is_word_char(x) && is_word_char(y))
        || (x == '/' && y == '*');
    if clash {
        format!("{a} {b}")
    } else {
        format!("{a}{b}")
    }
}

/// Joins raw token texts with readable spacing that re-lexes to the same
/// token sequence. Directive tokens get their own lines.
pub fn join_tokens(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for t in tokens {
        if is_directive_text(t) {
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(t);
            out.push('\n');
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let tight = matches!(p, "(" | "[" | "." | "->")
                || matches!(t.as_str(), ")" | "]" | "," | ";" | "." | "->")
                || (t == "("
                    && p.chars().all(|c| c.is_alphanumeric() || c == '_')
                    && !super::lexer::is_keyword(p))
                || (t == "[" && !is_op_char(p.chars().last().unwrap_or(' ')));
            let would_clash = {
                let x = p.chars().last().unwrap_or(' ');
                let y = t.chars().next().unwrap_or(' ');
                (is_op_char(x) && is_op_char(y)) || (is_word_char(x) && is_word_char(y))
            };
            if !tight || would_clash {
                out.push(' ');
            }
        }
        out.push_str(t);
        prev = Some(t);
    }
    if out.ends_with('\n') {
        out.pop();
    }
    out
}
