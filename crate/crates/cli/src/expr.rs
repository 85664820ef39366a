//! Arithmetic expressions over chart coordinates `x1..xn` and the energy `k`.
//!
//! Precedence, tightest first: `^` (right-associative), unary `-`, `* /`,
//! `+ -`. Parsing compiles to postfix code evaluated on a small stack.

use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sinh,
    Cosh,
}

impl Func {
    pub const ALL: [Func; 9] = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Sinh, Func::Cosh];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Apply with domain checks; `log` and `sqrt` reject arguments outside
    /// their real domain.
    pub fn apply(self, a: f64) -> Result<f64, EvalError> {
        let out = match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Exp => a.exp(),
            Func::Log if a <= 0.0 => return Err(EvalError::Domain { func: "log", arg: a }),
            Func::Log => a.ln(),
            Func::Sqrt if a < 0.0 => return Err(EvalError::Domain { func: "sqrt", arg: a }),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
        };
        finite(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedEnd,
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnknownIdentifier(String),
    BadNumber(String),
    MissingCall(String),
}

/// Syntax error with the byte offset where parsing stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: ", self.offset)?;
        match &self.kind {
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected '{t}'"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier '{s}'"),
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number '{s}'"),
            ParseErrorKind::MissingCall(s) => write!(f, "function '{s}' needs '('"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    DivisionByZero,
    Domain { func: &'static str, arg: f64 },
    NonFinite,
    MissingVariable(usize),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DivisionByZero => write!(f, "division by zero"),
            EvalError::Domain { func, arg } => write!(f, "{func} undefined at {arg}"),
            EvalError::NonFinite => write!(f, "non-finite intermediate value"),
            EvalError::MissingVariable(i) => write!(f, "variable x{i} not supplied", i = i + 1),
        }
    }
}

impl std::error::Error for EvalError {}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Num(f64),
    Var(usize),
    K,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Call(Func),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text
                .parse::<f64>()
                .map_err(|_| ParseError { offset: start, kind: ParseErrorKind::BadNumber(text.into()) })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].into())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or(c);
            return Err(ParseError { offset: i, kind: ParseErrorKind::UnexpectedChar(ch) });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    code: Vec<Op>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self) -> ParseError {
        let kind = match self.peek() {
            None => ParseErrorKind::UnexpectedEnd,
            Some(Tok::Sym(c)) => ParseErrorKind::UnexpectedToken(c.to_string()),
            Some(Tok::Num(v)) => ParseErrorKind::UnexpectedToken(v.to_string()),
            Some(Tok::Ident(s)) => ParseErrorKind::UnexpectedToken(s.clone()),
        };
        ParseError { offset: self.offset(), kind }
    }

    fn expr(&mut self) -> Result<(), ParseError> {
        self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(());
            };
            self.term()?;
            self.code.push(op);
        }
    }

    fn term(&mut self) -> Result<(), ParseError> {
        self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(());
            };
            self.unary()?;
            self.code.push(op);
        }
    }

    fn unary(&mut self) -> Result<(), ParseError> {
        if self.eat('-') {
            self.unary()?;
            self.code.push(Op::Neg);
            Ok(())
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<(), ParseError> {
        self.primary()?;
        if self.eat('^') {
            self.unary()?;
            self.code.push(Op::Pow);
        }
        Ok(())
    }

    fn primary(&mut self) -> Result<(), ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                self.code.push(Op::Num(v));
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                self.expr()?;
                if !self.eat(')') {
                    return Err(self.unexpected());
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    if !self.eat('(') {
                        return Err(ParseError { offset, kind: ParseErrorKind::MissingCall(name) });
                    }
                    self.expr()?;
                    if !self.eat(')') {
                        return Err(self.unexpected());
                    }
                    self.code.push(Op::Call(f));
                } else if name == "k" {
                    self.code.push(Op::K);
                } else if name == "pi" {
                    self.code.push(Op::Num(std::f64::consts::PI));
                } else if let Some(i) = variable_index(&name) {
                    self.code.push(Op::Var(i));
                } else {
                    return Err(ParseError { offset, kind: ParseErrorKind::UnknownIdentifier(name) });
                }
            }
            _ => return Err(self.unexpected()),
        }
        Ok(())
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok().map(|i| i - 1)
}

/// A parsed expression. Keeps its source text for reporting and serialization.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    code: Vec<Op>,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let toks = tokenize(source)?;
        let mut p = Parser { toks: &toks, pos: 0, end: source.len(), code: Vec::new() };
        p.expr()?;
        if p.pos != toks.len() {
            return Err(p.unexpected());
        }
        Ok(Self { source: source.to_string(), code: p.code })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of coordinates the expression needs: the largest `xi` index.
    pub fn arity(&self) -> usize {
        self.code.iter().filter_map(|op| if let Op::Var(i) = op { Some(i + 1) } else { None }).max().unwrap_or(0)
    }

    pub fn uses_k(&self) -> bool {
        self.code.contains(&Op::K)
    }

    pub fn eval(&self, x: &[f64], k: f64) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(8);
        for op in &self.code {
            let v = match *op {
                Op::Num(v) => v,
                Op::Var(i) => *x.get(i).ok_or(EvalError::MissingVariable(i))?,
                Op::K => k,
                Op::Neg => -stack.pop().expect("operand"),
                Op::Call(f) => f.apply(stack.pop().expect("operand"))?,
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    let b = stack.pop().expect("operand");
                    let a = stack.pop().expect("operand");
                    binary(*op, a, b)?
                }
            };
            stack.push(v);
        }
        Ok(stack.pop().expect("result"))
    }
}

fn binary(op: Op, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        Op::Add => finite(a + b),
        Op::Sub => finite(a - b),
        Op::Mul => finite(a * b),
        Op::Div if b == 0.0 => Err(EvalError::DivisionByZero),
        Op::Div => finite(a / b),
        Op::Pow if a == 0.0 && b < 0.0 => Err(EvalError::DivisionByZero),
        Op::Pow => {
            let v = a.powf(b);
            if v.is_nan() {
                Err(EvalError::Domain { func: "pow", arg: a })
            } else {
                finite(v)
            }
        }
        _ => unreachable!("not a binary operator"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(s: &str, x: &[f64]) -> f64 {
        Expression::parse(s).unwrap().eval(x, 0.5).unwrap()
    }

    #[test]
    fn pythagoras() {
        assert!((eval("sin(x1)^2 + cos(x1)^2", &[0.7]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reciprocal_square() {
        assert_eq!(eval("1/(x2*x2)", &[0.0, 2.0]), 0.25);
    }

    #[test]
    fn unclosed_call() {
        let e = Expression::parse("sin(").unwrap_err();
        assert_eq!(e.offset, 4);
        assert_eq!(e.kind, ParseErrorKind::UnexpectedEnd);
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("-2^2", &[]), -4.0);
        assert_eq!(eval("2^3^2", &[]), 512.0);
        assert_eq!(eval("2^-1", &[]), 0.5);
        assert_eq!(eval("1 - 2 - 3", &[]), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[]), 1.0);
        assert_eq!(eval("2 * k + 1e-1", &[]), 1.1);
    }

    #[test]
    fn errors() {
        let e = Expression::parse("x1 + foo").unwrap_err();
        assert_eq!((e.offset, e.kind), (5, ParseErrorKind::UnknownIdentifier("foo".into())));
        assert_eq!(Expression::parse("1 2").unwrap_err().offset, 2);
        assert_eq!(Expression::parse("(1").unwrap_err().offset, 2);
        assert_eq!(Expression::parse("x0").unwrap_err().offset, 0);
        assert!(matches!(Expression::parse("sin x1").unwrap_err().kind, ParseErrorKind::MissingCall(_)));
        assert_eq!(Expression::parse("1 # 2").unwrap_err().kind, ParseErrorKind::UnexpectedChar('#'));
    }

    #[test]
    fn domain_violations() {
        let e = |s: &str| Expression::parse(s).unwrap().eval(&[0.0], 0.0).unwrap_err();
        assert_eq!(e("1/x1"), EvalError::DivisionByZero);
        assert!(matches!(e("log(x1)"), EvalError::Domain { func: "log", .. }));
        assert!(matches!(e("sqrt(x1 - 1)"), EvalError::Domain { func: "sqrt", .. }));
        assert!(matches!(e("(-1)^0.5"), EvalError::Domain { func: "pow", .. }));
        assert_eq!(e("exp(1000)"), EvalError::NonFinite);
        assert_eq!(e("x2"), EvalError::MissingVariable(1));
    }

    #[test]
    fn arity_and_k() {
        let e = Expression::parse("x3 * k + x1").unwrap();
        assert_eq!(e.arity(), 3);
        assert!(e.uses_k());
        assert_eq!(Expression::parse("pi").unwrap().arity(), 0);
    }
}
