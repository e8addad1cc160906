//! Closed-form scalar expressions over chart coordinates.
//!
//! Expressions are parsed from text, evaluated at points, and differentiated
//! exactly. Every derivative used by the curvature pipeline comes from
//! [`Expr::differentiate`]; finite differences only appear in tests.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := primary ('^' exponent)?
//! exponent := sign? number | '(' sign? number ')'
//! primary  := number | coord | 'pi' | func '(' expr ')' | '(' expr ')'
//! func     := sin | cos | tan | exp | log | sqrt
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree. Variables are indices into the chart's coordinate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a numeric exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), found {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }

    /// Shift the reported byte offset, used when the expression is a slice of
    /// a larger input line.
    pub fn shifted(self, by: usize) -> ParseError {
        match self {
            ParseError::Syntax { offset, message } => ParseError::Syntax { offset: offset + by, message },
            ParseError::UnknownIdentifier { name, offset } => {
                ParseError::UnknownIdentifier { name, offset: offset + by }
            }
            ParseError::Arity { name, offset, expected, found } => ParseError::Arity {
                name,
                offset: offset + by,
                expected,
                found,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain violation in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
    #[error("variable x{} is not defined for a point of dimension {dim}", .index + 1)]
    MissingCoordinate { index: usize, dim: usize },
}

pub fn parse(text: &str, coords: &[impl AsRef<str>]) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        coords: coords.iter().map(|c| c.as_ref()).collect(),
        end: text.len(),
    };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind),
        });
    }
    Ok(expr)
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    pub fn depends_on(&self, k: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => *i == k,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(k),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(k) || b.depends_on(k)
            }
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *point.get(*i).ok_or(EvalError::MissingCoordinate {
                index: *i,
                dim: point.len(),
            })?,
            Expr::Neg(a) => -a.eval(point)?,
            Expr::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Expr::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Expr::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Expr::Div(a, b) => {
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.eval(point)? / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval(point)?;
                if base == 0.0 && *n < 0.0 {
                    return Err(self.domain("zero raised to a negative power"));
                }
                if base < 0.0 && n.fract() != 0.0 {
                    return Err(self.domain("negative base with a fractional exponent"));
                }
                if n.fract() == 0.0 && n.abs() <= i32::MAX as f64 {
                    base.powi(*n as i32)
                } else {
                    base.powf(*n)
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(point)?;
                match f {
                    Func::Log if x <= 0.0 => return Err(self.domain("log of a non-positive argument")),
                    Func::Sqrt if x <= 0.0 => return Err(self.domain("sqrt of a non-positive argument")),
                    _ => f.apply(x),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain("non-finite result"))
        }
    }

    fn domain(&self, reason: &'static str) -> EvalError {
        EvalError::Domain {
            node: self.to_string(),
            reason,
        }
    }

    /// Exact partial derivative with respect to coordinate `k`.
    pub fn differentiate(&self, k: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == k { 1.0 } else { 0.0 }),
            _ if !self.depends_on(k) => Expr::Const(0.0),
            Expr::Neg(a) => neg(a.differentiate(k)),
            Expr::Add(a, b) => add(a.differentiate(k), b.differentiate(k)),
            Expr::Sub(a, b) => sub(a.differentiate(k), b.differentiate(k)),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(k), (**b).clone()),
                mul((**a).clone(), b.differentiate(k)),
            ),
            Expr::Div(a, b) => {
                // (a/b)' = a'/b - a b' / b^2
                let da = a.differentiate(k);
                let db = b.differentiate(k);
                let first = div(da, (**b).clone());
                let second = div(mul((**a).clone(), db), pow((**b).clone(), 2.0));
                sub(first, second)
            }
            Expr::Pow(a, n) => mul(
                mul(Expr::Const(*n), pow((**a).clone(), n - 1.0)),
                a.differentiate(k),
            ),
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let da = a.differentiate(k);
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => div(Expr::Const(1.0), pow(call(Func::Cos, inner), 2.0)),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Expr::Const(1.0), inner),
                    Func::Sqrt => div(Expr::Const(0.5), call(Func::Sqrt, inner)),
                };
                mul(outer, da)
            }
        }
    }

    /// Constant folding plus removal of additive zeros and multiplicative
    /// ones and zeros.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => neg(a.simplify()),
            Expr::Add(a, b) => add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => div(a.simplify(), b.simplify()),
            Expr::Pow(a, n) => pow(a.simplify(), *n),
            Expr::Call(f, a) => call(*f, a.simplify()),
        }
    }

    /// Render with the given coordinate names. The output parses back to the
    /// same tree.
    pub fn to_text(&self, coords: &[impl AsRef<str>]) -> String {
        let names: Vec<&str> = coords.iter().map(|c| c.as_ref()).collect();
        let mut out = String::new();
        write_expr(self, &|i| names.get(i).map(|s| s.to_string()), &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_expr(self, &|_| None, &mut out);
        f.write_str(&out)
    }
}

fn write_expr(e: &Expr, names: &dyn Fn(usize) -> Option<String>, out: &mut String) {
    let child = |c: &Expr, paren: bool, out: &mut String| {
        if paren {
            out.push('(');
            write_expr(c, names, out);
            out.push(')');
        } else {
            write_expr(c, names, out);
        }
    };
    match e {
        Expr::Const(c) => {
            if c.is_sign_negative() {
                out.push_str(&format!("-{}", -c));
            } else {
                out.push_str(&format!("{c}"));
            }
        }
        Expr::Var(i) => out.push_str(&names(*i).unwrap_or_else(|| format!("x{}", i + 1))),
        Expr::Neg(a) => {
            out.push('-');
            child(a, a.precedence() < 3, out);
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            let (op, prec) = match e {
                Expr::Add(..) => (" + ", 1),
                Expr::Sub(..) => (" - ", 1),
                Expr::Mul(..) => ("*", 2),
                _ => ("/", 2),
            };
            child(a, a.precedence() < prec, out);
            out.push_str(op);
            child(b, b.precedence() <= prec, out);
        }
        Expr::Pow(a, n) => {
            child(a, a.precedence() < 5, out);
            out.push('^');
            out.push_str(&format!("{n}"));
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(a, names, out);
            out.push(')');
        }
    }
}

// Smart constructors shared by `differentiate` and `simplify`.

fn fold(value: f64, otherwise: impl FnOnce() -> Expr) -> Expr {
    if value.is_finite() {
        Expr::Const(value)
    } else {
        otherwise()
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        _ if a.is_one() => b,
        _ if b.is_one() => a,
        (Expr::Const(c), _) if *c == -1.0 => neg(b),
        (_, Expr::Const(c)) if *c == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => fold(x / y, || Expr::Div(Box::new(a.clone()), Box::new(b.clone()))),
        _ if b.is_one() => a,
        _ if a.is_zero() => Expr::Const(0.0),
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, n: f64) -> Expr {
    if n == 0.0 {
        return Expr::Const(1.0);
    }
    if n == 1.0 {
        return a;
    }
    match a {
        Expr::Const(c) => {
            let v = if n.fract() == 0.0 { c.powi(n as i32) } else { c.powf(n) };
            fold(v, || Expr::Pow(Box::new(Expr::Const(c)), n))
        }
        a => Expr::Pow(Box::new(a), n),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Const(c) => {
            let valid = match f {
                Func::Log | Func::Sqrt => c > 0.0,
                _ => true,
            };
            if valid {
                fold(f.apply(c), || Expr::Call(f, Box::new(Expr::Const(c))))
            } else {
                Expr::Call(f, Box::new(Expr::Const(c)))
            }
        }
        a => Expr::Call(f, Box::new(a)),
    }
}

// Tokenizer and recursive-descent parser.

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(n) => write!(f, "number {n}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Sym(c) => write!(f, "`{c}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let slice = &text[start..i];
            let value: f64 = slice.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{slice}`"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else if "+-*/^(),".contains(c) {
            tokens.push(Token {
                kind: TokenKind::Sym(c),
                offset: i,
            });
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or(c);
            return Err(ParseError::Syntax {
                offset: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    coords: Vec<&'a str>,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_sym(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Sym(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expect_sym(&mut self, want: char) -> Result<(), ParseError> {
        if self.peek_sym() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{want}`")))
        }
    }

    fn unexpected(&self, message: &str) -> ParseError {
        let found = match self.peek() {
            Some(t) => format!("found {}", t.kind),
            None => "found end of input".to_string(),
        };
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("{message}, {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek_sym() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let exponent = if self.peek_sym() == Some('(') {
            self.pos += 1;
            let n = self.signed_number()?;
            self.expect_sym(')')?;
            n
        } else {
            self.signed_number()?
        };
        if self.peek_sym() == Some('^') {
            return Err(self.unexpected("chained exponents need parentheses"));
        }
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let sign = match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                -1.0
            }
            Some('+') => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        match self.peek() {
            Some(Token {
                kind: TokenKind::Number(n),
                ..
            }) => {
                let n = *n;
                self.pos += 1;
                Ok(sign * n)
            }
            _ => Err(self.unexpected("exponent must be a numeric literal")),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("expected an operand"));
        };
        match tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::Const(n))
            }
            TokenKind::Sym('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_sym(')')?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    if self.peek_sym() == Some('(') {
                        return Err(self.unexpected(&format!("coordinate `{name}` is not a function")));
                    }
                    return Ok(Expr::Var(i));
                }
                if let Some(f) = Func::from_name(&name) {
                    if self.peek_sym() != Some('(') {
                        return Err(self.unexpected(&format!("expected `(` after `{name}`")));
                    }
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek_sym() != Some(')') {
                        args.push(self.expr()?);
                        while self.peek_sym() == Some(',') {
                            self.pos += 1;
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_sym(')')?;
                    if args.len() != 1 {
                        return Err(ParseError::Arity {
                            name,
                            offset: tok.offset,
                            expected: 1,
                            found: args.len(),
                        });
                    }
                    let arg = args.pop().expect("one argument");
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                Err(ParseError::UnknownIdentifier {
                    name,
                    offset: tok.offset,
                })
            }
            TokenKind::Sym(c) => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("expected an operand, found `{c}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const COORDS: [&str; 4] = ["x1", "x2", "x3", "x4"];

    fn p(text: &str) -> Expr {
        parse(text, &COORDS).unwrap()
    }

    fn at4(x4: f64) -> [f64; 4] {
        [0.0, 0.0, 0.0, x4]
    }

    #[test]
    fn parses_power_of_coordinate() {
        assert_eq!(p("x4^2"), Expr::Pow(Box::new(Expr::Var(3)), 2.0));
    }

    #[test]
    fn precedence_of_power_and_unary_minus() {
        assert_eq!(p("-x1^2"), Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2.0))));
        assert_eq!(p("-x1^2").eval(&[3.0]).unwrap(), -9.0);
        assert_eq!(p("2*-x1").eval(&[3.0]).unwrap(), -6.0);
        assert_eq!(p("1 + 2*3 - 4/2").eval(&[]).unwrap(), 5.0);
        assert_eq!(p("2^-1").eval(&[]).unwrap(), 0.5);
        assert_eq!(p("x1^(-2)").eval(&[2.0]).unwrap(), 0.25);
    }

    #[test]
    fn evaluates_simple_rational_and_trig() {
        assert_eq!(p("1/(x1*x1)").eval(&[2.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert_eq!(p("cos(x4)").eval(&at4(0.0)).unwrap(), 1.0);
        assert_eq!(p("1/(x4^2)").eval(&at4(1.0)).unwrap(), 1.0);
        assert_eq!(p("sin(x4)").eval(&at4(0.0)).unwrap(), 0.0);
        assert_eq!(p("-log(1+x1)").eval(&[0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((p("pi").eval(&[]).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!((p("1.5e-1 + .5").eval(&[]).unwrap() - 0.65).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse("x1 + * x2", &COORDS) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        match parse("x1 + y", &COORDS) {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("sin(x1, x2)", &COORDS) {
            Err(ParseError::Arity { expected: 1, found: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("x1^x2", &COORDS), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(x1", &COORDS), Err(ParseError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("x1 $", &COORDS), Err(ParseError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("", &COORDS), Err(ParseError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn domain_violations_name_the_node() {
        let err = p("1/(x1 - 1)").eval(&[1.0]).unwrap_err();
        match err {
            EvalError::Domain { node, reason } => {
                assert_eq!(node, "1/(x1 - 1)");
                assert_eq!(reason, "division by zero");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(p("log(x1)").eval(&[0.0]), Err(EvalError::Domain { .. })));
        assert!(matches!(p("sqrt(x1)").eval(&[-1.0]), Err(EvalError::Domain { .. })));
        assert!(matches!(p("x2").eval(&[1.0]), Err(EvalError::MissingCoordinate { index: 1, dim: 1 })));
    }

    #[test]
    fn derivative_examples() {
        let d = p("x4^2").differentiate(3);
        assert_eq!(d, Expr::Mul(Box::new(Expr::Const(2.0)), Box::new(Expr::Var(3))));
        let d = p("1/(x4^2)").differentiate(3);
        assert!((d.eval(&at4(2.0)).unwrap() + 0.25).abs() < 1e-15);
        assert_eq!(p("cos(x4)").differentiate(0), Expr::Const(0.0));
    }

    #[test]
    fn simplify_examples() {
        assert_eq!(p("0*x1 + x2").simplify(), Expr::Var(1));
        assert_eq!(p("2*3").simplify(), Expr::Const(6.0));
        assert_eq!(p("7.5").differentiate(2).simplify(), Expr::Const(0.0));
        assert_eq!(p("x1*1 - 0").simplify(), Expr::Var(0));
        assert_eq!(p("--x1").simplify(), Expr::Var(0));
    }

    #[test]
    fn printing_round_trips() {
        for text in ["x1 - (x2 - x3)", "-(x1*x2)", "(-x1)^2", "x1/(x2*x3)", "sin(x1)^-0.5", "x1 - -x2", "--x3"] {
            let e = p(text);
            assert_eq!(parse(&e.to_text(&COORDS), &COORDS).unwrap(), e, "{text}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.1f64..3.0).prop_map(Expr::Const),
            (0usize..4).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), prop_oneof![Just(2.0), Just(3.0), Just(-1.0), Just(0.5)])
                    .prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
                (inner, prop::sample::select(Func::ALL.to_vec())).prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
            ]
        })
    }

    fn arb_point() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.2f64..2.0, 4)
    }

    fn central_difference(e: &Expr, p: &[f64], k: usize, h: f64) -> Option<f64> {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[k] += h;
        minus[k] -= h;
        Some((e.eval(&plus).ok()? - e.eval(&minus).ok()?) / (2.0 * h))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn derivative_matches_central_difference(e in arb_expr(), point in arb_point(), k in 0usize..4) {
            let h = 1e-5;
            // Only judge expressions that are well conditioned around the point:
            // every evaluation in the stencil must succeed and stay moderate.
            let value = match e.eval(&point) { Ok(v) => v, Err(_) => return Ok(()) };
            let Some(fd) = central_difference(&e, &point, k, h) else { return Ok(()) };
            let d = match e.differentiate(k).eval(&point) { Ok(v) => v, Err(_) => return Ok(()) };
            // Curvature of the function bounds the truncation error; skip points
            // near singularities where h^2 f''' is not small.
            let Some(fd_half) = central_difference(&e, &point, k, h / 2.0) else { return Ok(()) };
            if value.abs() > 1e3 || d.abs() > 1e3 || (fd - fd_half).abs() > 1e-8 * (1.0 + d.abs()) {
                return Ok(());
            }
            prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "d={d} fd={fd} e={e}");
        }

        #[test]
        fn simplify_preserves_value(e in arb_expr(), point in arb_point()) {
            if let Ok(v) = e.eval(&point) {
                let s = e.simplify().eval(&point).unwrap();
                prop_assert!((v - s).abs() <= 1e-9 * (1.0 + v.abs()), "{v} vs {s}");
            }
        }

        #[test]
        fn print_parse_is_idempotent(e in arb_expr()) {
            let once = parse(&e.to_text(&COORDS), &COORDS).unwrap();
            let twice = parse(&once.to_text(&COORDS), &COORDS).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once, e);
        }

        #[test]
        fn differentiation_is_linear(a in arb_expr(), b in arb_expr(), point in arb_point(), k in 0usize..4) {
            let sum = Expr::Add(Box::new(a.clone()), Box::new(b.clone()));
            if let (Ok(da), Ok(db), Ok(ds)) = (
                a.differentiate(k).eval(&point),
                b.differentiate(k).eval(&point),
                sum.differentiate(k).eval(&point),
            ) {
                prop_assert!((ds - (da + db)).abs() <= 1e-9 * (1.0 + ds.abs()));
            }
        }
    }
}
