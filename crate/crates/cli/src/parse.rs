//! Text frontend for the program DSL.
//!
//! ```text
//! program   := decl* thread+
//! decl      := "var" IDENT ("=" INT)?
//!            | "array" IDENT "[" INT "]" ("=" "{" INT ("," INT)* "}")?
//!            | "mutex" IDENT ("locked")?
//! thread    := "thread" IDENT "{" stmt* "}"
//! stmt      := lvalue "=" expr | "lock" "(" IDENT ")" | "unlock" "(" IDENT ")"
//!            | "assert" "(" expr ")" | "if" "(" expr ")" block ("else" block)?
//!            | "while" "(" expr ")" block
//! lvalue    := IDENT | IDENT "[" expr "]"
//! ```
//!
//! `#` starts a comment; statements are newline-separated. Expression
//! precedence, loosest first: `||`, `&&`, `==`/`!=`, relational, additive,
//! multiplicative, unary `!`/`-`.

use por_core::ast::{AstProgram, Decl, Expr, Stmt};
use por_core::program::{BinOp, Span, UnOp};
use por_core::Program;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{span}: {message}")]
    Syntax { span: Span, message: String },
    #[error(transparent)]
    Lower(#[from] por_core::ast::LowerError),
}

/// A parsed source file: the surface form, the structured form, and the
/// executable program.
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub path: PathBuf,
    pub text: String,
    pub ast: AstProgram,
    pub program: Program,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Newline,
    Punct(&'static str),
}

const KEYWORDS: &[&str] = &[
    "var", "array", "mutex", "thread", "lock", "unlock", "assert", "if", "else", "while", "locked",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { span: Span { line: self.line, col: self.col }, message: message.into() }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>, ParseError> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let span = Span { line: self.line, col: self.col };
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\r' => {
                    self.bump();
                }
                b'\n' => {
                    self.bump();
                    out.push((Tok::Newline, span));
                }
                b'#' => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.bump();
                    }
                }
                b'0'..=b'9' => {
                    let mut v: i64 = 0;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        v = v
                            .checked_mul(10)
                            .and_then(|v| v.checked_add((self.src[self.pos] - b'0') as i64))
                            .ok_or_else(|| self.error("integer literal overflows"))?;
                        self.bump();
                    }
                    out.push((Tok::Int(v), span));
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = self.pos;
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                    {
                        self.bump();
                    }
                    let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                    out.push((Tok::Ident(word), span));
                }
                _ => {
                    let two = if self.pos + 1 < self.src.len() {
                        &self.src[self.pos..self.pos + 2]
                    } else {
                        &self.src[self.pos..self.pos + 1]
                    };
                    let double = match two {
                        b"==" => Some("=="),
                        b"!=" => Some("!="),
                        b"<=" => Some("<="),
                        b">=" => Some(">="),
                        b"&&" => Some("&&"),
                        b"||" => Some("||"),
                        _ => None,
                    };
                    if let Some(p) = double {
                        self.bump();
                        self.bump();
                        out.push((Tok::Punct(p), span));
                        continue;
                    }
                    let single = match c {
                        b'=' => "=",
                        b'<' => "<",
                        b'>' => ">",
                        b'!' => "!",
                        b'+' => "+",
                        b'-' => "-",
                        b'*' => "*",
                        b'/' => "/",
                        b'%' => "%",
                        b'(' => "(",
                        b')' => ")",
                        b'{' => "{",
                        b'}' => "}",
                        b'[' => "[",
                        b']' => "]",
                        b',' => ",",
                        _ => return Err(self.error(format!("unexpected character `{}`", c as char))),
                    };
                    self.bump();
                    out.push((Tok::Punct(single), span));
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn span(&self) -> Span {
        self.toks
            .get(self.pos)
            .map(|(_, s)| *s)
            .or_else(|| self.toks.last().map(|(_, s)| *s))
            .unwrap_or_default()
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { span: self.span(), message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Some(Tok::Newline)) {
            self.pos += 1;
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`")))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), ParseError> {
        let span = self.span();
        match self.peek() {
            Some(Tok::Ident(w)) if !KEYWORDS.contains(&w.as_str()) => {
                let w = w.clone();
                self.pos += 1;
                Ok((w, span))
            }
            Some(Tok::Ident(w)) => Err(self.error(format!("`{w}` is a keyword"))),
            _ => Err(self.error("expected an identifier")),
        }
    }

    fn expect_int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat_punct("-");
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error("expected an integer")),
        }
    }

    /// A statement ends at a newline, or right before `}`.
    fn expect_end_of_stmt(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Newline) => {
                self.skip_newlines();
                Ok(())
            }
            Some(Tok::Punct("}")) | None => Ok(()),
            _ => Err(self.error("expected end of statement")),
        }
    }

    fn program(&mut self) -> Result<AstProgram, ParseError> {
        let mut ast = AstProgram::default();
        self.skip_newlines();
        loop {
            if self.eat_keyword("var") {
                let (name, span) = self.expect_ident()?;
                let init = if self.eat_punct("=") { Some(self.expect_int()?) } else { None };
                ast.decls.push(Decl::Var { name, init, span });
                self.expect_end_of_stmt()?;
            } else if self.eat_keyword("array") {
                let (name, span) = self.expect_ident()?;
                self.expect_punct("[")?;
                let len = self.expect_int()?;
                if len < 0 {
                    return Err(self.error("array length must be non-negative"));
                }
                self.expect_punct("]")?;
                let init = if self.eat_punct("=") {
                    self.expect_punct("{")?;
                    let mut values = vec![self.expect_int()?];
                    while self.eat_punct(",") {
                        values.push(self.expect_int()?);
                    }
                    self.expect_punct("}")?;
                    Some(values)
                } else {
                    None
                };
                ast.decls.push(Decl::Array { name, len: len as usize, init, span });
                self.expect_end_of_stmt()?;
            } else if self.eat_keyword("mutex") {
                let (name, span) = self.expect_ident()?;
                let locked = self.eat_keyword("locked");
                ast.decls.push(Decl::Mutex { name, locked, span });
                self.expect_end_of_stmt()?;
            } else {
                break;
            }
            self.skip_newlines();
        }
        while self.eat_keyword("thread") {
            let (name, _) = self.expect_ident()?;
            let body = self.block()?;
            ast.threads.push((name, body));
            self.skip_newlines();
        }
        if self.pos < self.toks.len() {
            return Err(self.error("expected `thread`"));
        }
        if ast.threads.is_empty() {
            return Err(self.error("a program needs at least one thread"));
        }
        Ok(ast)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.skip_newlines();
        self.expect_punct("{")?;
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            if self.eat_punct("}") {
                return Ok(body);
            }
            if self.peek().is_none() {
                return Err(self.error("unterminated block"));
            }
            body.push(self.stmt()?);
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        if self.eat_keyword("lock") {
            self.expect_punct("(")?;
            let (mutex, _) = self.expect_ident()?;
            self.expect_punct(")")?;
            self.expect_end_of_stmt()?;
            return Ok(Stmt::Lock { mutex, span });
        }
        if self.eat_keyword("unlock") {
            self.expect_punct("(")?;
            let (mutex, _) = self.expect_ident()?;
            self.expect_punct(")")?;
            self.expect_end_of_stmt()?;
            return Ok(Stmt::Unlock { mutex, span });
        }
        if self.eat_keyword("assert") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            self.expect_end_of_stmt()?;
            return Ok(Stmt::Assert { cond, span });
        }
        if self.eat_keyword("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_body = self.block()?;
            let else_body = if self.peek_else() { self.block()? } else { Vec::new() };
            self.expect_end_of_stmt()?;
            return Ok(Stmt::If { cond, then_body, else_body, span });
        }
        if self.eat_keyword("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            self.expect_end_of_stmt()?;
            return Ok(Stmt::While { cond, body, span });
        }
        // assignment
        let (name, _) = self.expect_ident()?;
        let index = if self.eat_punct("[") {
            let ix = self.expr()?;
            self.expect_punct("]")?;
            Some(ix)
        } else {
            None
        };
        self.expect_punct("=")?;
        let value = self.expr()?;
        self.expect_end_of_stmt()?;
        Ok(Stmt::Assign { name, index, value, span })
    }

    /// Looks past newlines for an `else` continuing an if statement.
    fn peek_else(&mut self) -> bool {
        let save = self.pos;
        self.skip_newlines();
        if self.eat_keyword("else") {
            return true;
        }
        self.pos = save;
        false
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat_punct("||") {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.eq_expr()?;
        while self.eat_punct("&&") {
            let rhs = self.eq_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn eq_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.rel_expr()?;
        loop {
            let op = if self.eat_punct("==") {
                BinOp::Eq
            } else if self.eat_punct("!=") {
                BinOp::Ne
            } else {
                return Ok(lhs);
            };
            let rhs = self.rel_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn rel_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = if self.eat_punct("<=") {
                BinOp::Le
            } else if self.eat_punct(">=") {
                BinOp::Ge
            } else if self.eat_punct("<") {
                BinOp::Lt
            } else if self.eat_punct(">") {
                BinOp::Gt
            } else {
                return Ok(lhs);
            };
            let rhs = self.add_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = if self.eat_punct("+") {
                BinOp::Add
            } else if self.eat_punct("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = if self.eat_punct("*") {
                BinOp::Mul
            } else if self.eat_punct("/") {
                BinOp::Div
            } else if self.eat_punct("%") {
                BinOp::Rem
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary_expr()?)));
        }
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary_expr()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("(") {
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            Some(Tok::Ident(_)) => {
                let (name, _) = self.expect_ident()?;
                if self.eat_punct("[") {
                    let ix = self.expr()?;
                    self.expect_punct("]")?;
                    Ok(Expr::Index(name, Box::new(ix)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.error("expected an expression")),
        }
    }
}

/// Parses DSL text into a source program.
pub fn parse(path: impl Into<PathBuf>, text: &str) -> Result<SourceProgram, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser { toks, pos: 0 };
    let ast = parser.program()?;
    let program = por_core::ast::lower(&ast)?;
    Ok(SourceProgram { path: path.into(), text: text.to_string(), ast, program })
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne => 3,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
    }
}

fn op_str(op: BinOp) -> &'static str {
    match op {
        BinOp::Or => "||",
        BinOp::And => "&&",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Rem => "%",
    }
}

fn write_expr(out: &mut String, e: &Expr, parent: u8) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(n) => out.push_str(n),
        Expr::Index(n, ix) => {
            out.push_str(n);
            out.push('[');
            write_expr(out, ix, 0);
            out.push(']');
        }
        Expr::Unary(op, x) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            write_expr(out, x, 7);
        }
        Expr::Binary(op, l, r) => {
            let p = prec(*op);
            if p < parent {
                out.push('(');
            }
            write_expr(out, l, p);
            let _ = write!(out, " {} ", op_str(*op));
            write_expr(out, r, p + 1);
            if p < parent {
                out.push(')');
            }
        }
    }
}

fn write_stmt(out: &mut String, s: &Stmt, indent: usize) {
    let pad = "  ".repeat(indent);
    match s {
        Stmt::Assign { name, index, value, .. } => {
            out.push_str(&pad);
            out.push_str(name);
            if let Some(ix) = index {
                out.push('[');
                write_expr(out, ix, 0);
                out.push(']');
            }
            out.push_str(" = ");
            write_expr(out, value, 0);
            out.push('\n');
        }
        Stmt::Lock { mutex, .. } => {
            let _ = writeln!(out, "{pad}lock({mutex})");
        }
        Stmt::Unlock { mutex, .. } => {
            let _ = writeln!(out, "{pad}unlock({mutex})");
        }
        Stmt::Assert { cond, .. } => {
            out.push_str(&pad);
            out.push_str("assert(");
            write_expr(out, cond, 0);
            out.push_str(")\n");
        }
        Stmt::If { cond, then_body, else_body, .. } => {
            out.push_str(&pad);
            out.push_str("if (");
            write_expr(out, cond, 0);
            out.push_str(") {\n");
            for st in then_body {
                write_stmt(out, st, indent + 1);
            }
            if else_body.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                for st in else_body {
                    write_stmt(out, st, indent + 1);
                }
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::While { cond, body, .. } => {
            out.push_str(&pad);
            out.push_str("while (");
            write_expr(out, cond, 0);
            out.push_str(") {\n");
            for st in body {
                write_stmt(out, st, indent + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

/// Prints a structured program back to DSL text; `parse ∘ print` is the
/// identity on the structured form.
pub fn print(ast: &AstProgram) -> String {
    let mut out = String::new();
    for d in &ast.decls {
        match d {
            Decl::Var { name, init, .. } => match init {
                Some(v) => {
                    let _ = writeln!(out, "var {name} = {v}");
                }
                None => {
                    let _ = writeln!(out, "var {name}");
                }
            },
            Decl::Array { name, len, init, .. } => match init {
                Some(values) => {
                    let list = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
                    let _ = writeln!(out, "array {name}[{len}] = {{{list}}}");
                }
                None => {
                    let _ = writeln!(out, "array {name}[{len}]");
                }
            },
            Decl::Mutex { name, locked, .. } => {
                if *locked {
                    let _ = writeln!(out, "mutex {name} locked");
                } else {
                    let _ = writeln!(out, "mutex {name}");
                }
            }
        }
    }
    for (name, body) in &ast.threads {
        let _ = writeln!(out, "\nthread {name} {{");
        for st in body {
            write_stmt(out, st, 1);
        }
        out.push_str("}\n");
    }
    out
}
