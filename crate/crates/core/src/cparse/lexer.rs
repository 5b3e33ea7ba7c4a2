use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    /// Any pp-number: decimal, hex, octal, floating, with suffixes.
    IntLiteral,
    StringLiteral,
    CharLiteral,
    Operator,
    Punctuation,
    Comment,
    Whitespace,
}

impl TokenKind {
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Comment | TokenKind::Whitespace)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first byte.
    pub line: usize,
}

impl Token {
    /// Line of the last byte.
    pub fn end_line(&self) -> usize {
        self.line + self.text.matches('\n').count()
    }

    pub fn is(&self, text: &str) -> bool {
        !self.kind.is_trivia() && self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal at line {0}")]
    UnterminatedString(usize),
    #[error("unterminated character literal at line {0}")]
    UnterminatedChar(usize),
    #[error("unterminated block comment at line {0}")]
    UnterminatedComment(usize),
}

pub const KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Complex",
    "_Imaginary",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Generic",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

// Longest match first.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##", "+", "-", "*", "/", "%", "<", ">", "=", "!",
    "&", "|", "^", "~", "?", ":", ".",
];

const PUNCTUATION: &[char] = &[';', ',', '(', ')', '{', '}', '[', ']', '#'];

/// Lossless tokenization: concatenating every token's text gives back
/// `code` exactly. Bytes that fit no other class become single-character
/// punctuation tokens.
pub fn lex(code: &str) -> Result<Vec<Token>, LexError> {
    let bytes = code.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    let mut line = 1;
    while pos < bytes.len() {
        let start = pos;
        let c = bytes[pos];
        let kind = if c.is_ascii_whitespace() {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            TokenKind::Whitespace
        } else if code[pos..].starts_with("//") {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                // a trailing backslash continues a line comment
                if bytes[pos] == b'\\' && pos + 1 < bytes.len() && bytes[pos + 1] == b'\n' {
                    pos += 1;
                }
                pos += 1;
            }
            TokenKind::Comment
        } else if code[pos..].starts_with("/*") {
            match code[pos + 2..].find("*/") {
                Some(off) => pos += 2 + off + 2,
                None => return Err(LexError::UnterminatedComment(line)),
            }
            TokenKind::Comment
        } else if c == b'"' || c == b'\'' {
            pos = scan_quoted(bytes, pos, c).ok_or(if c == b'"' {
                LexError::UnterminatedString(line)
            } else {
                LexError::UnterminatedChar(line)
            })?;
            if c == b'"' {
                TokenKind::StringLiteral
            } else {
                TokenKind::CharLiteral
            }
        } else if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while pos < bytes.len()
                && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_' || bytes[pos] >= 0x80)
            {
                pos += 1;
            }
            // wide/unicode string and char prefixes: L"..", u8"..", U'.'
            if pos < bytes.len()
                && (bytes[pos] == b'"' || bytes[pos] == b'\'')
                && matches!(&code[start..pos], "L" | "u" | "U" | "u8")
            {
                let q = bytes[pos];
                pos = scan_quoted(bytes, pos, q).ok_or(if q == b'"' {
                    LexError::UnterminatedString(line)
                } else {
                    LexError::UnterminatedChar(line)
                })?;
                if q == b'"' {
                    TokenKind::StringLiteral
                } else {
                    TokenKind::CharLiteral
                }
            } else if is_keyword(&code[start..pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit()
            || (c == b'.' && pos + 1 < bytes.len() && bytes[pos + 1].is_ascii_digit())
        {
            pos = scan_number(bytes, pos);
            TokenKind::IntLiteral
        } else if let Some(op) = OPERATORS.iter().find(|op| code[pos..].starts_with(**op)) {
            pos += op.len();
            TokenKind::Operator
        } else {
            // Single punctuation or unknown character (keep UTF-8 intact).
            let ch = code[pos..].chars().next().unwrap_or('\0');
            pos += ch.len_utf8().max(1);
            debug_assert!(PUNCTUATION.contains(&ch) || !ch.is_ascii_alphanumeric());
            TokenKind::Punctuation
        };
        let text = &code[start..pos];
        tokens.push(Token {
            kind,
            text: text.to_string(),
            line,
        });
        line += text.matches('\n').count();
    }
    Ok(tokens)
}

fn scan_quoted(bytes: &[u8], start: usize, quote: u8) -> Option<usize> {
    let mut pos = start + 1;
    while pos < bytes.len() {
        match bytes[pos] {
            b'\\' => pos += 2,
            b'\n' => return None,
            b if b == quote => return Some(pos + 1),
            _ => pos += 1,
        }
    }
    None
}

fn scan_number(bytes: &[u8], start: usize) -> usize {
    let mut pos = start;
    while pos < bytes.len() {
        let b = bytes[pos];
        if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' {
            // exponent sign: 1e+5, 0x1p-3
            if (b == b'e' || b == b'E' || b == b'p' || b == b'P')
                && pos + 1 < bytes.len()
                && (bytes[pos + 1] == b'+' || bytes[pos + 1] == b'-')
            {
                pos += 2;
                continue;
            }
            pos += 1;
        } else {
            break;
        }
    }
    pos
}
