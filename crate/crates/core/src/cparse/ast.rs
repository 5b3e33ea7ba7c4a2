//! Statement-level syntax tree for C-like function bodies.

use serde::{Deserialize, Serialize};

/// Source extent of a node: significant-token index range and line range.
///
/// Spans do not take part in structural equality: two trees that render to
/// the same program compare equal regardless of where their nodes came from.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    /// First significant token (inclusive).
    pub start: usize,
    /// One past the last significant token.
    pub end: usize,
    pub start_line: usize,
    pub end_line: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Block(Vec<Stmt>),
    If {
        cond: Expr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        /// Declaration or expression statement, without its `;`.
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Break,
    Continue,
    Return(Option<Expr>),
    Expr(Expr),
    Decl(Decl),
    /// A balanced run of significant tokens the statement grammar does not
    /// model (goto, switch, labels, macro invocations, ...). A preprocessor
    /// directive is kept as a single token holding its verbatim line(s).
    Opaque(Vec<String>),
}

/// True for a token that holds a whole preprocessor directive.
pub fn is_directive_text(text: &str) -> bool {
    text.len() > 1 && text.starts_with('#') && text != "##"
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decl {
    /// Specifier and qualifier tokens (`static const uint8_t`).
    pub ty: Vec<String>,
    pub items: Vec<Declarator>,
}

impl Decl {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|d| d.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declarator {
    /// Pointer stars and their qualifiers, e.g. `["*", "const"]`.
    pub pointer: Vec<String>,
    pub name: String,
    /// Raw array suffix tokens, e.g. `["[", "16", "]"]`.
    pub array: Vec<String>,
    pub init: Option<Expr>,
}

impl Declarator {
    pub fn is_scalar(&self) -> bool {
        self.pointer.is_empty() && self.array.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    /// Integer or other numeric literal, verbatim.
    IntLit(String),
    /// String or character literal (adjacent strings kept as a list).
    StrLit(Vec<String>),
    Var(String),
    Paren(Box<Expr>),
    /// Prefix operator: `- ! ~ * & ++ -- + sizeof`.
    Unary(String, Box<Expr>),
    /// Postfix `++` / `--`.
    Postfix(String, Box<Expr>),
    /// Binary operator, assignments and the comma operator included.
    /// `&&` and `||` keep their operand order.
    Binary(String, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    /// `.` or `->` member access.
    Member(Box<Expr>, String, String),
    Cast(Vec<String>, Box<Expr>),
    Opaque(Vec<String>),
}

pub const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
];

impl Expr {
    pub fn binary(op: &str, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op.to_string(), Box::new(l), Box::new(r))
    }

    pub fn negated(e: Expr) -> Expr {
        Expr::Unary("!".to_string(), Box::new(Expr::Paren(Box::new(e))))
    }

    pub fn is_opaque(&self) -> bool {
        matches!(self, Expr::Opaque(_))
    }

    /// Strips redundant outer parentheses.
    pub fn unparen(&self) -> &Expr {
        match self {
            Expr::Paren(inner) => inner.unparen(),
            e => e,
        }
    }

    /// Pre-order visit of this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::IntLit(_) | Expr::StrLit(_) | Expr::Var(_) | Expr::Opaque(_) => {}
            Expr::Paren(e) | Expr::Unary(_, e) | Expr::Postfix(_, e) | Expr::Cast(_, e) => {
                e.walk(f)
            }
            Expr::Member(e, _, _) => e.walk(f),
            Expr::Binary(_, l, r) | Expr::Index(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Ternary(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            Expr::Call(callee, args) => {
                callee.walk(f);
                for a in args {
                    a.walk(f);
                }
            }
        }
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            span: Span::default(),
        }
    }

    pub fn block(stmts: Vec<Stmt>) -> Stmt {
        Stmt::new(StmtKind::Block(stmts))
    }

    /// Wraps a statement in a block unless it already is one.
    pub fn into_block(self) -> Stmt {
        match self.kind {
            StmtKind::Block(_) => self,
            _ => Stmt::block(vec![self]),
        }
    }

    /// Child statements in slot order. Slot numbers are what
    /// [`NodePath`] indexes: block items by position; `then` = 0 and
    /// `else` = 1 for `if`; the body is slot 0 for loops.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Block(items) => items.iter().collect(),
            StmtKind::If {
                then, otherwise, ..
            } => {
                let mut v = vec![then.as_ref()];
                if let Some(e) = otherwise {
                    v.push(e.as_ref());
                }
                v
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::For { body, .. } => vec![body.as_ref()],
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Stmt> {
        match &mut self.kind {
            StmtKind::Block(items) => items.iter_mut().collect(),
            StmtKind::If {
                then, otherwise, ..
            } => {
                let mut v = vec![then.as_mut()];
                if let Some(e) = otherwise {
                    v.push(e.as_mut());
                }
                v
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::For { body, .. } => vec![body.as_mut()],
            _ => Vec::new(),
        }
    }

    /// Expressions owned directly by this statement (not its children).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::DoWhile { cond, .. } => vec![cond],
            StmtKind::For { cond, step, .. } => cond.iter().chain(step.iter()).collect(),
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Expr(e) => vec![e],
            StmtKind::Decl(d) => d.items.iter().filter_map(|i| i.init.as_ref()).collect(),
            _ => Vec::new(),
        }
    }

    /// Pre-order traversal over every statement, including `for` init
    /// statements.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        if let StmtKind::For {
            init: Some(init), ..
        } = &self.kind
        {
            init.walk(f);
        }
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn at(&self, path: &[usize]) -> Option<&Stmt> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i).and_then(|c| c.at(rest)),
        }
    }
}

/// Path from the root block to a statement, one child slot per level.
pub type NodePath = Vec<usize>;

/// A parsed function: an optional opaque header (`static int f(int x)`)
/// and the body. For bare statement lists there is no header and the root
/// block is implicit (rendered without braces).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StmtTree {
    pub header: Option<Vec<String>>,
    pub root: Stmt,
}

impl StmtTree {
    pub fn body(&self) -> &[Stmt] {
        match &self.root.kind {
            StmtKind::Block(items) => items,
            _ => std::slice::from_ref(&self.root),
        }
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        self.root.walk(f)
    }

    pub fn at(&self, path: &[usize]) -> Option<&Stmt> {
        self.root.at(path)
    }

    /// Visits every expression in the tree, sub-expressions included.
    pub fn walk_exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        self.walk(&mut |s| {
            for e in s.exprs() {
                e.walk(f);
            }
        });
    }
}
