//! A small expression language for coefficient functions of one variable.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?            right-associative
//! primary := NUMBER | 'x' | 'pi' | NAME | FUNC '(' expr ')' | '(' expr ')'
//! FUNC    := sin | cos | exp | sqrt | abs
//! ```
//!
//! Any other identifier is a named parameter that must be bound at evaluation
//! time. There is no implicit multiplication: `2x` is rejected.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Parameter bindings, ordered so printed configurations are deterministic.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown function `{name}` at position {position}")]
    UnknownFunction { name: String, position: usize },

    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),

    #[error("domain error in `{subexpr}`: {message}")]
    Domain { message: String, subexpr: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Param(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        parse(source)
    }

    /// Evaluates at `x` with the given parameter bindings.
    pub fn eval(&self, params: &Params, x: f64) -> Result<f64, ExprError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var => Ok(x),
            Expr::Param(name) => params
                .get(name)
                .copied()
                .ok_or_else(|| ExprError::UnboundParameter(name.clone())),
            Expr::Neg(inner) => Ok(-inner.eval(params, x)?),
            Expr::Binary(op, lhs, rhs) => {
                let l = lhs.eval(params, x)?;
                let r = rhs.eval(params, x)?;
                let value = match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        l / r
                    }
                    BinOp::Pow => power(l, r).ok_or_else(|| self.domain("invalid power"))?,
                };
                self.finite(value)
            }
            Expr::Call(func, arg) => {
                let a = arg.eval(params, x)?;
                let value = match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain("square root of a negative number"));
                        }
                        a.sqrt()
                    }
                };
                self.finite(value)
            }
        }
    }

    /// Replaces every parameter by its bound value. Fails on the first unbound name.
    pub fn bind(&self, params: &Params) -> Result<Expr, ExprError> {
        Ok(match self {
            Expr::Num(_) | Expr::Var => self.clone(),
            Expr::Param(name) => Expr::Num(
                params
                    .get(name)
                    .copied()
                    .ok_or_else(|| ExprError::UnboundParameter(name.clone()))?,
            ),
            Expr::Neg(inner) => Expr::Neg(Box::new(inner.bind(params)?)),
            Expr::Binary(op, l, r) => {
                Expr::Binary(*op, Box::new(l.bind(params)?), Box::new(r.bind(params)?))
            }
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.bind(params)?)),
        })
    }

    /// Names of all parameters referenced by the tree, sorted and deduplicated.
    pub fn parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) | Expr::Var => {}
            Expr::Param(name) => out.push(name.clone()),
            Expr::Neg(inner) | Expr::Call(_, inner) => inner.collect_params(out),
            Expr::Binary(_, l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
        }
    }

    fn domain(&self, message: &str) -> ExprError {
        ExprError::Domain {
            message: message.to_string(),
            subexpr: self.to_string(),
        }
    }

    fn finite(&self, value: f64) -> Result<f64, ExprError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain("non-finite result"))
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

/// Integer exponents use repeated multiplication; everything else goes through exp/ln.
fn power(base: f64, exponent: f64) -> Option<f64> {
    if exponent.fract() == 0.0 && exponent.abs() <= 1024.0 {
        let mut n = exponent.abs() as u32;
        let mut acc = 1.0;
        let mut b = base;
        while n > 0 {
            if n & 1 == 1 {
                acc *= b;
            }
            b *= b;
            n >>= 1;
        }
        if exponent < 0.0 {
            if acc == 0.0 {
                return None;
            }
            acc = 1.0 / acc;
        }
        return Some(acc);
    }
    if base < 0.0 {
        return None;
    }
    if base == 0.0 {
        return if exponent > 0.0 { Some(0.0) } else { None };
    }
    Some((exponent * base.ln()).exp())
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Debug formatting of f64 is the shortest representation that round-trips.
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var => write!(f, "x"),
            Expr::Param(name) => write!(f, "{name}"),
            Expr::Neg(inner) => {
                write!(f, "-")?;
                write_child(f, inner, inner.precedence() < 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Binary(op, l, r) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    write_child(f, l, l.precedence() <= p)?;
                    write!(f, "^")?;
                    write_child(f, r, r.precedence() < 3)
                } else {
                    write_child(f, l, l.precedence() < p)?;
                    write!(f, " {sym} ")?;
                    write_child(f, r, r.precedence() <= p)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer {
    chars: Vec<(usize, char)>,
    idx: usize,
    len: usize,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.char_indices().collect(),
            idx: 0,
            len: src.len(),
        }
    }

    fn peek_char(&self, offset: usize) -> Option<char> {
        self.chars.get(self.idx + offset).map(|&(_, c)| c)
    }

    fn pos(&self) -> usize {
        self.chars.get(self.idx).map_or(self.len, |&(p, _)| p)
    }

    fn tokenize(mut self) -> Result<Vec<(usize, Token)>, ExprError> {
        let mut out = Vec::new();
        loop {
            while self.peek_char(0).is_some_and(char::is_whitespace) {
                self.idx += 1;
            }
            let start = self.pos();
            let Some(c) = self.peek_char(0) else {
                out.push((start, Token::End));
                return Ok(out);
            };
            let token = if c.is_ascii_digit() || c == '.' {
                self.number(start)?
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut name = String::new();
                while let Some(c) = self.peek_char(0) {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        name.push(c);
                        self.idx += 1;
                    } else {
                        break;
                    }
                }
                Token::Ident(name)
            } else {
                self.idx += 1;
                match c {
                    '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    _ => {
                        return Err(ExprError::Syntax {
                            position: start,
                            message: format!("unexpected character `{c}`"),
                        })
                    }
                }
            };
            out.push((start, token));
        }
    }

    fn number(&mut self, start: usize) -> Result<Token, ExprError> {
        let mut text = String::new();
        let digits = |lexer: &mut Self, text: &mut String| {
            let mut any = false;
            while let Some(c) = lexer.peek_char(0).filter(char::is_ascii_digit) {
                text.push(c);
                lexer.idx += 1;
                any = true;
            }
            any
        };
        let mut any = digits(self, &mut text);
        if self.peek_char(0) == Some('.') {
            text.push('.');
            self.idx += 1;
            any |= digits(self, &mut text);
        }
        if !any {
            return Err(ExprError::Syntax {
                position: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.peek_char(0), Some('e' | 'E')) {
            let sign = matches!(self.peek_char(1), Some('+' | '-'));
            let first_digit = self.peek_char(if sign { 2 } else { 1 });
            if first_digit.is_some_and(|c| c.is_ascii_digit()) {
                text.push('e');
                self.idx += 1;
                if sign {
                    text.push(self.peek_char(0).unwrap());
                    self.idx += 1;
                }
                digits(self, &mut text);
            }
        }
        text.parse::<f64>()
            .map(Token::Num)
            .map_err(|e| ExprError::Syntax {
                position: start,
                message: format!("malformed number `{text}`: {e}"),
            })
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx].1
    }

    fn position(&self) -> usize {
        self.tokens[self.idx].0
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].1.clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(name) => format!("identifier `{name}`"),
            Token::Op(c) => format!("`{c}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Token::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Token::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Token::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Token::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let position = self.position();
        match self.peek().clone() {
            Token::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Token::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.bump();
                if *self.peek() == Token::LParen {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ExprError::UnknownFunction { name, position });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Ok(match name.as_str() {
                    "x" => Expr::Var,
                    "pi" => Expr::Num(std::f64::consts::PI),
                    _ if Func::from_name(&name).is_some() => {
                        return Err(ExprError::Syntax {
                            position,
                            message: format!("function `{name}` requires a parenthesized argument"),
                        })
                    }
                    _ => Expr::Param(name),
                })
            }
            _ => self.error(format!("expected an operand, found {}", self.describe())),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() == Token::RParen {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `)`, found {}", self.describe()))
        }
    }
}

pub fn parse(source: &str) -> Result<Expr, ExprError> {
    if source.trim().is_empty() {
        return Err(ExprError::Syntax {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let tokens = Lexer::new(source).tokenize()?;
    let mut parser = Parser { tokens, idx: 0 };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return parser.error(format!("unexpected {}", parser.describe()));
    }
    Ok(expr)
}

/// Parses and evaluates in one step.
pub fn evaluate(source: &str, params: &Params, x: f64) -> Result<f64, ExprError> {
    parse(source)?.eval(params, x)
}
