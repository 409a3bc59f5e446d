//! Scalar field expressions over named chart coordinates.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | constant | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `func` is one of `sin cos tan exp log sinh cosh tanh sqrt`; `pi` and `e`
//! are reserved constants. An expression is evaluated over any [`Carrier`]:
//! plain `f64` for values, [`Jet2`] for values with exact first and second
//! derivatives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::jets::{Elementary, Jet2, JetError, MAX_REPEATED_POWER};

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConstant {
    Pi,
    E,
}

impl NamedConstant {
    pub fn value(self) -> f64 {
        match self {
            NamedConstant::Pi => std::f64::consts::PI,
            NamedConstant::E => std::f64::consts::E,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NamedConstant::Pi => "pi",
            NamedConstant::E => "e",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "pi" => Some(NamedConstant::Pi),
            "e" => Some(NamedConstant::E),
            _ => None,
        }
    }
}

/// Identifiers that can never name a coordinate.
pub fn is_reserved(name: &str) -> bool {
    NamedConstant::from_name(name).is_some() || Elementary::from_name(name).is_some()
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Number(f64),
    Constant(NamedConstant),
    Variable(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Elementary, Box<Expr>),
}

/// A parsed expression. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Number(a), Number(b)) => a.to_bits() == b.to_bits(),
            (Constant(a), Constant(b)) => a == b,
            (Variable(a), Variable(b)) => a == b,
            (Neg(a), Neg(b)) => a == b,
            (Binary(oa, la, ra), Binary(ob, lb, rb)) => oa == ob && la == lb && ra == rb,
            (Call(fa, a), Call(fb, b)) => fa == fb && a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {position} (expected {expected})")]
pub struct ParseError {
    pub message: String,
    pub position: usize,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{name}` at {span}")]
    Unbound { name: String, span: Span },
    #[error("{source} at {span}")]
    Domain { source: JetError, span: Span },
}

impl EvalError {
    pub fn span(&self) -> Span {
        match self {
            EvalError::Unbound { span, .. } | EvalError::Domain { span, .. } => *span,
        }
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let frac_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == frac_start {
                    return Err(ParseError {
                        message: "malformed number".into(),
                        position: i,
                        expected: "digit after decimal point".into(),
                    });
                }
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
            let literal = &text[start..i];
            Tok::Num(literal.parse().map_err(|_| ParseError {
                message: format!("malformed number `{literal}`"),
                position: start,
                expected: "number".into(),
            })?)
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(text[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError {
                        message: format!("unexpected character `{ch}`"),
                        position: start,
                        expected: "expression".into(),
                    });
                }
            }
        };
        out.push(Token {
            tok,
            span: Span { start, end: i },
        });
    }
    out.push(Token {
        tok: Tok::End,
        span: Span {
            start: text.len(),
            end: text.len(),
        },
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// parser

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>, expected: &str) -> ParseError {
        ParseError {
            message: message.into(),
            position: self.peek().span.start,
            expected: expected.into(),
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }

    fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = lhs.span.join(rhs.span);
        Expr {
            kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            span,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Op('-') {
            let minus = self.bump();
            let inner = self.unary()?;
            let span = minus.span.join(inner.span);
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Self::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self, open: Span) -> Result<Span, ParseError> {
        match self.peek().tok {
            Tok::RParen => Ok(self.bump().span),
            Tok::End => Err(ParseError {
                message: format!("unbalanced parenthesis opened at byte {}", open.start),
                position: self.peek().span.start,
                expected: "`)`".into(),
            }),
            ref other => {
                let found = Self::describe(other);
                Err(self.error(format!("unexpected {found}"), "`)`"))
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Number(v),
                    span: token.span,
                })
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(c) = NamedConstant::from_name(&name) {
                    return Ok(Expr {
                        kind: ExprKind::Constant(c),
                        span: token.span,
                    });
                }
                if self.peek().tok == Tok::LParen {
                    let open = self.bump().span;
                    let func = Elementary::from_name(&name).ok_or_else(|| ParseError {
                        message: format!("unknown function `{name}`"),
                        position: token.span.start,
                        expected: "one of sin, cos, tan, exp, log, sinh, cosh, tanh, sqrt".into(),
                    })?;
                    let arg = self.expr()?;
                    let close = self.expect_rparen(open)?;
                    return Ok(Expr {
                        kind: ExprKind::Call(func, Box::new(arg)),
                        span: token.span.join(close),
                    });
                }
                if Elementary::from_name(&name).is_some() {
                    return Err(self.error(format!("function `{name}` needs an argument"), "`(`"));
                }
                Ok(Expr {
                    kind: ExprKind::Variable(name),
                    span: token.span,
                })
            }
            Tok::LParen => {
                let open = self.bump().span;
                let mut inner = self.expr()?;
                let close = self.expect_rparen(open)?;
                inner.span = open.join(close);
                Ok(inner)
            }
            ref other => {
                let found = Self::describe(other);
                Err(self.error(format!("unexpected {found}"), "expression"))
            }
        }
    }
}

/// Parses a complete expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    match parser.peek().tok {
        Tok::End => Ok(expr),
        Tok::RParen => Err(parser.error("unbalanced `)`", "operator or end of input")),
        ref other => {
            let found = Parser::describe(other);
            Err(parser.error(format!("unexpected {found}"), "operator or end of input"))
        }
    }
}

// ---------------------------------------------------------------------------
// printing

impl Expr {
    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, ..) => op.precedence(),
            ExprKind::Neg(_) => 3,
            ExprKind::Number(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(v) => write!(f, "{v}"),
            ExprKind::Constant(c) => f.write_str(c.name()),
            ExprKind::Variable(name) => f.write_str(name),
            ExprKind::Neg(inner) => {
                f.write_str("-")?;
                inner.write_child(f, inner.precedence() < 3)
            }
            ExprKind::Call(func, arg) => write!(f, "{func}({arg})"),
            ExprKind::Binary(BinOp::Pow, base, exponent) => {
                base.write_child(f, base.precedence() <= 4)?;
                f.write_str("^")?;
                exponent.write_child(f, exponent.precedence() < 3)
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                lhs.write_child(f, lhs.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_child(f, rhs.precedence() <= p)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// evaluation

/// Numeric type an expression can be evaluated over.
pub trait Carrier: Clone {
    fn constant(value: f64, dim: usize) -> Self;
    fn value(&self) -> f64;
    fn add(&self, rhs: &Self) -> Result<Self, JetError>;
    fn sub(&self, rhs: &Self) -> Result<Self, JetError>;
    fn mul(&self, rhs: &Self) -> Result<Self, JetError>;
    fn div(&self, rhs: &Self) -> Result<Self, JetError>;
    fn neg(&self) -> Self;
    fn apply(&self, function: Elementary) -> Result<Self, JetError>;
    fn is_finite(&self) -> bool;
}

impl Carrier for f64 {
    fn constant(value: f64, _dim: usize) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self + rhs)
    }
    fn sub(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self - rhs)
    }
    fn mul(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(self * rhs)
    }
    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        if *rhs == 0.0 {
            Err(JetError::DivisionByZero)
        } else {
            Ok(self / rhs)
        }
    }
    fn neg(&self) -> Self {
        -self
    }
    fn apply(&self, function: Elementary) -> Result<Self, JetError> {
        function.value(*self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Carrier for Jet2 {
    fn constant(value: f64, dim: usize) -> Self {
        Jet2::constant(value, dim)
    }
    fn value(&self) -> f64 {
        Jet2::value(self)
    }
    fn add(&self, rhs: &Self) -> Result<Self, JetError> {
        self.try_add(rhs)
    }
    fn sub(&self, rhs: &Self) -> Result<Self, JetError> {
        self.try_sub(rhs)
    }
    fn mul(&self, rhs: &Self) -> Result<Self, JetError> {
        self.try_mul(rhs)
    }
    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        self.checked_div(rhs)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn apply(&self, function: Elementary) -> Result<Self, JetError> {
        Jet2::apply(self, function)
    }
    fn is_finite(&self) -> bool {
        Jet2::is_finite(self)
    }
}

/// Variable bindings for evaluation.
pub trait Environment<T> {
    fn lookup(&self, name: &str) -> Option<T>;
    fn constant(&self, value: f64) -> T;
}

impl Environment<f64> for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
    fn constant(&self, value: f64) -> f64 {
        value
    }
}

impl Environment<f64> for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
    fn constant(&self, value: f64) -> f64 {
        value
    }
}

/// Positional bindings: `names[i]` is bound to `values[i]`.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a, T> {
    pub names: &'a [String],
    pub values: &'a [T],
    pub dim: usize,
}

impl<'a, T> Bindings<'a, T> {
    pub fn new(names: &'a [String], values: &'a [T]) -> Self {
        Bindings {
            names,
            values,
            dim: names.len(),
        }
    }
}

impl<T: Carrier> Environment<T> for Bindings<'_, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.values.get(i).cloned())
    }
    fn constant(&self, value: f64) -> T {
        T::constant(value, self.dim)
    }
}

struct NoVariables;

impl Environment<f64> for NoVariables {
    fn lookup(&self, _name: &str) -> Option<f64> {
        None
    }
    fn constant(&self, value: f64) -> f64 {
        value
    }
}

impl Expr {
    /// Evaluates over the carrier chosen by `env`.
    pub fn evaluate<T: Carrier, E: Environment<T>>(&self, env: &E) -> Result<T, EvalError> {
        let domain = |source: JetError| EvalError::Domain {
            source,
            span: self.span,
        };
        let out = match &self.kind {
            ExprKind::Number(v) => env.constant(*v),
            ExprKind::Constant(c) => env.constant(c.value()),
            ExprKind::Variable(name) => env.lookup(name).ok_or_else(|| EvalError::Unbound {
                name: name.clone(),
                span: self.span,
            })?,
            ExprKind::Neg(inner) => inner.evaluate(env)?.neg(),
            ExprKind::Call(func, arg) => arg.evaluate(env)?.apply(*func).map_err(domain)?,
            ExprKind::Binary(BinOp::Pow, base, exponent) => {
                let b = base.evaluate(env)?;
                match exponent.integer_constant() {
                    Some(k) => integer_power(&b, k, env).map_err(domain)?,
                    None => {
                        let e = exponent.evaluate(env)?;
                        if b.value() <= 0.0 {
                            return Err(domain(JetError::Domain {
                                function: "pow",
                                value: b.value(),
                            }));
                        }
                        b.apply(Elementary::Log)
                            .and_then(|l| l.mul(&e))
                            .and_then(|x| x.apply(Elementary::Exp))
                            .map_err(domain)?
                    }
                }
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let l = lhs.evaluate(env)?;
                let r = rhs.evaluate(env)?;
                match op {
                    BinOp::Add => l.add(&r),
                    BinOp::Sub => l.sub(&r),
                    BinOp::Mul => l.mul(&r),
                    BinOp::Div => l.div(&r),
                    BinOp::Pow => unreachable!(),
                }
                .map_err(domain)?
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(domain(JetError::NonFinite))
        }
    }

    /// Value of a variable-free expression.
    pub fn evaluate_constant(&self) -> Result<f64, EvalError> {
        self.evaluate(&NoVariables)
    }

    /// `Some(k)` when this subtree has no variables and evaluates to an
    /// integer small enough for repeated multiplication.
    fn integer_constant(&self) -> Option<i64> {
        if !self.is_constant() {
            return None;
        }
        let v = self.evaluate_constant().ok()?;
        (v.fract() == 0.0 && v.abs() <= MAX_REPEATED_POWER as f64).then_some(v as i64)
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            ExprKind::Number(_) | ExprKind::Constant(_) => true,
            ExprKind::Variable(_) => false,
            ExprKind::Neg(a) | ExprKind::Call(_, a) => a.is_constant(),
            ExprKind::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            ExprKind::Variable(name) => {
                out.insert(name.clone());
            }
            ExprKind::Number(_) | ExprKind::Constant(_) => {}
            ExprKind::Neg(a) | ExprKind::Call(_, a) => a.collect_variables(out),
            ExprKind::Binary(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }
}

fn integer_power<T: Carrier, E: Environment<T>>(base: &T, k: i64, env: &E) -> Result<T, JetError> {
    let mut acc = env.constant(1.0);
    for step in 0..k.unsigned_abs() {
        acc = if step == 0 { base.clone() } else { acc.mul(base)? };
    }
    if k < 0 {
        env.constant(1.0).div(&acc)
    } else {
        Ok(acc)
    }
}

/// Parses and evaluates in one go, over plain reals.
pub fn eval_str(text: &str, env: &HashMap<String, f64>) -> Result<f64, String> {
    let expr = parse(text).map_err(|e| e.to_string())?;
    expr.evaluate(env).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// symbolic differentiation

impl Expr {
    fn with_span(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn number(v: f64) -> Expr {
        Expr::with_span(ExprKind::Number(v), Span::default())
    }

    pub fn variable(name: &str) -> Expr {
        Expr::with_span(ExprKind::Variable(name.to_string()), Span::default())
    }

    fn as_number(&self) -> Option<f64> {
        match self.kind {
            ExprKind::Number(v) => Some(v),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_number() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_number() == Some(1.0)
    }

    fn binary(op: BinOp, a: Expr, b: Expr, span: Span) -> Expr {
        Expr::with_span(ExprKind::Binary(op, Box::new(a), Box::new(b)), span)
    }

    fn d_add(a: Expr, b: Expr, span: Span) -> Expr {
        match (a.is_zero(), b.is_zero()) {
            (true, _) => b,
            (_, true) => a,
            _ => Expr::binary(BinOp::Add, a, b, span),
        }
    }

    fn d_sub(a: Expr, b: Expr, span: Span) -> Expr {
        match (a.is_zero(), b.is_zero()) {
            (_, true) => a,
            (true, _) => Expr::d_neg(b, span),
            _ => Expr::binary(BinOp::Sub, a, b, span),
        }
    }

    fn d_neg(a: Expr, span: Span) -> Expr {
        if a.is_zero() {
            a
        } else {
            Expr::with_span(ExprKind::Neg(Box::new(a)), span)
        }
    }

    fn d_mul(a: Expr, b: Expr, span: Span) -> Expr {
        if a.is_zero() || b.is_zero() {
            Expr::number(0.0)
        } else if a.is_one() {
            b
        } else if b.is_one() {
            a
        } else {
            Expr::binary(BinOp::Mul, a, b, span)
        }
    }

    fn d_div(a: Expr, b: Expr, span: Span) -> Expr {
        if a.is_zero() || b.is_one() {
            a
        } else {
            Expr::binary(BinOp::Div, a, b, span)
        }
    }

    fn call(func: Elementary, a: Expr, span: Span) -> Expr {
        Expr::with_span(ExprKind::Call(func, Box::new(a)), span)
    }

    /// Partial derivative with respect to `var`, as a new expression.
    ///
    /// Only trivial zero/one folding is applied. Domains are preserved: the
    /// derivative is defined wherever the original's evaluation succeeds,
    /// apart from `sqrt` at points where its argument is exactly zero.
    pub fn derivative(&self, var: &str) -> Expr {
        let s = self.span;
        match &self.kind {
            ExprKind::Number(_) | ExprKind::Constant(_) => Expr::number(0.0),
            ExprKind::Variable(name) => Expr::number(if name == var { 1.0 } else { 0.0 }),
            ExprKind::Neg(a) => Expr::d_neg(a.derivative(var), s),
            ExprKind::Binary(BinOp::Add, a, b) => Expr::d_add(a.derivative(var), b.derivative(var), s),
            ExprKind::Binary(BinOp::Sub, a, b) => Expr::d_sub(a.derivative(var), b.derivative(var), s),
            ExprKind::Binary(BinOp::Mul, a, b) => Expr::d_add(
                Expr::d_mul(a.derivative(var), (**b).clone(), s),
                Expr::d_mul((**a).clone(), b.derivative(var), s),
                s,
            ),
            ExprKind::Binary(BinOp::Div, a, b) => {
                // (a' b - a b') / b^2
                let num = Expr::d_sub(
                    Expr::d_mul(a.derivative(var), (**b).clone(), s),
                    Expr::d_mul((**a).clone(), b.derivative(var), s),
                    s,
                );
                let den = Expr::binary(BinOp::Pow, (**b).clone(), Expr::number(2.0), s);
                Expr::d_div(num, den, s)
            }
            ExprKind::Binary(BinOp::Pow, a, b) => {
                let da = a.derivative(var);
                if b.is_constant() {
                    let k = match b.evaluate_constant() {
                        Ok(k) => k,
                        // evaluation of the original fails too
                        Err(_) => return self.clone(),
                    };
                    if k == 0.0 {
                        return Expr::number(0.0);
                    }
                    // k a^(k-1) a'
                    let lowered = if k == 1.0 {
                        Expr::number(1.0)
                    } else {
                        Expr::binary(BinOp::Pow, (**a).clone(), Expr::number(k - 1.0), s)
                    };
                    Expr::d_mul(Expr::d_mul(Expr::number(k), lowered, s), da, s)
                } else {
                    // a^b (b' log a + b a'/a)
                    let db = b.derivative(var);
                    let inner = Expr::d_add(
                        Expr::d_mul(db, Expr::call(Elementary::Log, (**a).clone(), s), s),
                        Expr::d_div(Expr::d_mul((**b).clone(), da, s), (**a).clone(), s),
                        s,
                    );
                    Expr::d_mul(self.clone(), inner, s)
                }
            }
            ExprKind::Call(func, a) => {
                let da = a.derivative(var);
                if da.is_zero() {
                    return da;
                }
                let a = (**a).clone();
                let outer = match func {
                    Elementary::Sin => Expr::call(Elementary::Cos, a, s),
                    Elementary::Cos => Expr::d_neg(Expr::call(Elementary::Sin, a, s), s),
                    Elementary::Tan => Expr::binary(
                        BinOp::Add,
                        Expr::number(1.0),
                        Expr::binary(BinOp::Pow, Expr::call(Elementary::Tan, a, s), Expr::number(2.0), s),
                        s,
                    ),
                    Elementary::Exp => self.clone(),
                    Elementary::Log => Expr::binary(BinOp::Div, Expr::number(1.0), a, s),
                    Elementary::Sinh => Expr::call(Elementary::Cosh, a, s),
                    Elementary::Cosh => Expr::call(Elementary::Sinh, a, s),
                    Elementary::Tanh => Expr::binary(
                        BinOp::Sub,
                        Expr::number(1.0),
                        Expr::binary(BinOp::Pow, Expr::call(Elementary::Tanh, a, s), Expr::number(2.0), s),
                        s,
                    ),
                    Elementary::Sqrt => {
                        Expr::binary(BinOp::Div, Expr::number(0.5), self.clone(), s)
                    }
                };
                Expr::d_mul(outer, da, s)
            }
        }
    }
}
