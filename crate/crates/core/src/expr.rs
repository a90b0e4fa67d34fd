//! Arithmetic expression language used to enter coefficient families.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-4` and `2^3^2` is `512`.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    /// `lambda`, an alias of `lambda1`.
    Lambda,
    Lambda1,
    Lambda2,
    Pi,
    /// `u1`, `u2`, ... stored zero-based.
    U(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
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
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values bound to the free variables during evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub t: f64,
    pub lambda: [f64; 2],
    pub u: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn new(t: f64, lambda: [f64; 2]) -> Self {
        Bindings { t, lambda, u: &[] }
    }

    pub fn with_state(t: f64, lambda: [f64; 2], u: &'a [f64]) -> Self {
        Bindings { t, lambda, u }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative number {0}")]
    NegativeSqrt(String),
    #[error("power {0} is undefined")]
    UndefinedPower(String),
    #[error("state variable u{0} is not bound")]
    UnboundState(usize),
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        Expr::Num(value)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn eval(&self, b: &Bindings<'_>) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => match v {
                Var::T => b.t,
                Var::Lambda | Var::Lambda1 => b.lambda[0],
                Var::Lambda2 => b.lambda[1],
                Var::Pi => PI,
                Var::U(i) => *b.u.get(*i).ok_or(EvalError::UnboundState(i + 1))?,
            },
            Expr::Neg(e) => -e.eval(b)?,
            Expr::Binary(op, l, r) => {
                let x = l.eval(b)?;
                let y = r.eval(b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        let v = x.powf(y);
                        if v.is_nan() {
                            return Err(EvalError::UndefinedPower(format!("{x}^{y}")));
                        }
                        v
                    }
                }
            }
            Expr::Call(f, arg) => {
                let x = arg.eval(b)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Tanh => x.tanh(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::NegativeSqrt(x.to_string()));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }

    /// True when the tree references `v` (aliases of the first parameter count as one).
    pub fn mentions(&self, v: Var) -> bool {
        let same = |w: &Var| match (v, *w) {
            (Var::Lambda | Var::Lambda1, Var::Lambda | Var::Lambda1) => true,
            (a, b) => a == b,
        };
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => same(w),
            Expr::Neg(e) | Expr::Call(_, e) => e.mentions(v),
            Expr::Binary(_, l, r) => l.mentions(v) || r.mentions(v),
        }
    }

    /// Largest state index referenced (one-based), 0 if none.
    pub fn max_state_index(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(Var::U(i)) => i + 1,
            Expr::Var(_) => 0,
            Expr::Neg(e) | Expr::Call(_, e) => e.max_state_index(),
            Expr::Binary(_, l, r) => l.max_state_index().max(r.max_state_index()),
        }
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Folds constant subtrees. Subtrees whose evaluation fails are kept as is
    /// so the error surfaces at evaluation time with its context.
    pub fn fold_constants(&self) -> Expr {
        let folded = match self {
            Expr::Num(_) | Expr::Var(_) => return self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.fold_constants())),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.fold_constants())),
            Expr::Binary(op, l, r) => Expr::Binary(*op, Box::new(l.fold_constants()), Box::new(r.fold_constants())),
        };
        if folded.is_constant() {
            if let Ok(v) = folded.eval(&Bindings::default()) {
                return Expr::Num(v);
            }
        }
        folded
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(Var::Pi) => true,
            Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::Lambda => f.write_str("lambda"),
            Var::Lambda1 => f.write_str("lambda1"),
            Var::Lambda2 => f.write_str("lambda2"),
            Var::Pi => f.write_str("pi"),
            Var::U(i) => write!(f, "u{}", i + 1),
        }
    }
}

/// Fully parenthesized output; numbers use the shortest round-trip form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// Which identifiers a parse accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    /// Number of state variables `u1..uK` accepted.
    pub state_dim: usize,
}

impl Vocabulary {
    pub const COEFFICIENTS: Vocabulary = Vocabulary { state_dim: 0 };

    pub fn with_state(state_dim: usize) -> Self {
        Vocabulary { state_dim }
    }

    fn resolve(&self, name: &str) -> Option<Var> {
        Some(match name {
            "t" => Var::T,
            "lambda" => Var::Lambda,
            "lambda1" => Var::Lambda1,
            "lambda2" => Var::Lambda2,
            "pi" => Var::Pi,
            _ => {
                let idx: usize = name.strip_prefix('u')?.parse().ok()?;
                if idx == 0 || idx > self.state_dim {
                    return None;
                }
                Var::U(idx - 1)
            }
        })
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, Vocabulary::COEFFICIENTS)
}

pub fn parse_with(text: &str, vocab: Vocabulary) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.len() == 1 {
        return Err(ParseError::Syntax { offset: 0, message: "empty expression".into() });
    }
    let mut p = Parser { tokens, pos: 0, vocab };
    let e = p.expr()?;
    let tok = p.peek();
    if tok.kind != TokKind::End {
        return Err(ParseError::Syntax { offset: tok.offset, message: format!("unexpected {}", tok.kind.describe()) });
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Op(c) => format!("`{c}`"),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
            TokKind::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
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
        if c.is_ascii_digit() || c == b'.' {
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
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError::Syntax { offset: start, message: format!("malformed number `{lit}`") })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax { offset: start, message: format!("number `{lit}` is out of range") });
            }
            out.push(Token { kind: TokKind::Num(value), offset: start });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { kind: TokKind::Ident(text[start..i].to_string()), offset: start });
        } else {
            let kind = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => TokKind::Op(c as char),
                b'(' => TokKind::LParen,
                b')' => TokKind::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
                }
            };
            i += 1;
            out.push(Token { kind, offset: start });
        }
    }
    out.push(Token { kind: TokKind::End, offset: text.len() });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vocab: Vocabulary,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != TokKind::End {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek().kind {
            TokKind::Op(c) if ops.contains(&c) => {
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.bump();
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    let next = self.bump();
                    if next.kind != TokKind::LParen {
                        return Err(ParseError::Syntax { offset: next.offset, message: format!("expected `(` after function `{name}`") });
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::call(func, arg));
                }
                self.vocab.resolve(&name).map(Expr::Var).ok_or(ParseError::UnknownIdentifier { name, offset: tok.offset })
            }
            other => Err(ParseError::Syntax { offset: tok.offset, message: format!("unexpected {}", other.describe()) }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let tok = self.bump();
        if tok.kind != TokKind::RParen {
            return Err(ParseError::Syntax { offset: tok.offset, message: format!("expected `)`, found {}", tok.kind.describe()) });
        }
        Ok(())
    }
}
