//! Analytic functions of spacetime coordinates `(t, x)`.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right-associative
//! atom    := number | 't' | 'x' | 'lambda' | 'pi'
//!          | func '(' sum ')' | '(' sum ')'
//! func    := sin | cos | exp | tanh | ln
//! ```
//!
//! `lambda` is an alias for `t`, used by gauge functions whose first
//! argument is the flow parameter.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Ln => "ln",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "ln" => Func::Ln,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

/// Value together with its two first partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
}

impl Dual {
    fn constant(value: f64) -> Self {
        Self { value, dt: 0.0, dx: 0.0 }
    }

    fn scale_grad(self, value: f64, k: f64) -> Self {
        Self { value, dt: self.dt * k, dx: self.dx * k }
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.dt.is_finite() && self.dx.is_finite()
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn parse(source: &str) -> Result<Self> {
        parse_expr(source)
    }

    /// Value and exact first partials at `(t, x)`.
    pub fn eval_with_grad(&self, t: f64, x: f64) -> Result<Dual> {
        let d = self.eval_dual(t, x)?;
        if !d.is_finite() {
            return Err(Error::NonFinite { context: format!("`{self}` at (t={t}, x={x})") });
        }
        Ok(d)
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.eval_with_grad(t, x)?.value)
    }

    fn eval_dual(&self, t: f64, x: f64) -> Result<Dual> {
        Ok(match self {
            Expr::Const(c) => Dual::constant(*c),
            Expr::Var(Var::T) => Dual { value: t, dt: 1.0, dx: 0.0 },
            Expr::Var(Var::X) => Dual { value: x, dt: 0.0, dx: 1.0 },
            Expr::Neg(e) => {
                let a = e.eval_dual(t, x)?;
                Dual { value: -a.value, dt: -a.dt, dx: -a.dx }
            }
            Expr::Func(f, e) => {
                let a = e.eval_dual(t, x)?;
                match f {
                    Func::Sin => a.scale_grad(a.value.sin(), a.value.cos()),
                    Func::Cos => a.scale_grad(a.value.cos(), -a.value.sin()),
                    Func::Exp => {
                        let v = a.value.exp();
                        a.scale_grad(v, v)
                    }
                    Func::Tanh => {
                        let v = a.value.tanh();
                        a.scale_grad(v, 1.0 - v * v)
                    }
                    Func::Ln => a.scale_grad(a.value.ln(), 1.0 / a.value),
                }
            }
            Expr::Bin(op, l, r) => {
                let a = l.eval_dual(t, x)?;
                let b = r.eval_dual(t, x)?;
                match op {
                    BinOp::Add => Dual { value: a.value + b.value, dt: a.dt + b.dt, dx: a.dx + b.dx },
                    BinOp::Sub => Dual { value: a.value - b.value, dt: a.dt - b.dt, dx: a.dx - b.dx },
                    BinOp::Mul => Dual {
                        value: a.value * b.value,
                        dt: a.dt * b.value + a.value * b.dt,
                        dx: a.dx * b.value + a.value * b.dx,
                    },
                    BinOp::Div => {
                        if b.value == 0.0 {
                            return Err(Error::DivisionByZero);
                        }
                        let q = a.value / b.value;
                        Dual {
                            value: q,
                            dt: (a.dt - q * b.dt) / b.value,
                            dx: (a.dx - q * b.dx) / b.value,
                        }
                    }
                    BinOp::Pow => pow_dual(a, b),
                }
            }
        })
    }

    /// Symbolic partial derivative. No simplification beyond trivial zeros.
    pub fn derivative(&self, v: Var) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var(w) => Const(if *w == v { 1.0 } else { 0.0 }),
            Neg(e) => neg(e.derivative(v)),
            Func(f, e) => {
                let inner = e.derivative(v);
                let outer = match f {
                    self::Func::Sin => func(self::Func::Cos, (**e).clone()),
                    self::Func::Cos => neg(func(self::Func::Sin, (**e).clone())),
                    self::Func::Exp => self.clone(),
                    self::Func::Tanh => sub(Const(1.0), pow(self.clone(), Const(2.0))),
                    self::Func::Ln => div(Const(1.0), (**e).clone()),
                };
                mul(outer, inner)
            }
            Bin(op, l, r) => {
                let dl = l.derivative(v);
                let dr = r.derivative(v);
                let (l, r) = ((**l).clone(), (**r).clone());
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, r.clone()), mul(l, dr)),
                    BinOp::Div => div(sub(mul(dl, r.clone()), mul(l, dr)), pow(r, Const(2.0))),
                    BinOp::Pow => {
                        if r.depends_on(self::Var::T) || r.depends_on(self::Var::X) {
                            // a^b (b' ln a + b a'/a)
                            mul(
                                self.clone(),
                                add(mul(dr, func(self::Func::Ln, l.clone())), div(mul(r, dl), l)),
                            )
                        } else {
                            mul(mul(r.clone(), pow(l, sub(r, Const(1.0)))), dl)
                        }
                    }
                }
            }
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(e) | Expr::Func(_, e) => e.depends_on(v),
            Expr::Bin(_, l, r) => l.depends_on(v) || r.depends_on(v),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(e) | Expr::Func(_, e) => 1 + e.size(),
            Expr::Bin(_, l, r) => 1 + l.size() + r.size(),
        }
    }
}

fn pow_dual(a: Dual, b: Dual) -> Dual {
    let value = a.value.powf(b.value);
    let exponent_const = b.dt == 0.0 && b.dx == 0.0;
    let base_const = a.dt == 0.0 && a.dx == 0.0;
    let mut dt = 0.0;
    let mut dx = 0.0;
    if !base_const {
        let k = b.value * a.value.powf(b.value - 1.0);
        dt += k * a.dt;
        dx += k * a.dx;
    }
    if !exponent_const {
        let k = value * a.value.ln();
        dt += k * b.dt;
        dx += k * b.dx;
    }
    Dual { value, dt, dx }
}

// Builders with trivial zero/one folding; they keep derivative trees small.
fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        neg(b)
    } else {
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Const(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Const(0.0)
    } else {
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    if is_zero(&a) {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn func(f: Func, a: Expr) -> Expr {
    Expr::Func(f, Box::new(a))
}

/// Fully parenthesized rendering; re-parses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Func(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
        }
    }
}

/// Parses infix source text into an [`Expr`].
pub fn parse_expr(source: &str) -> Result<Expr> {
    let mut p = Parser { src: source.as_bytes(), pos: 0 };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax(&["+", "-", "*", "/", "^", "end of input"]));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, expected: &[&str]) -> Error {
        Error::Syntax { offset: self.pos, expected: expected.iter().map(|s| s.to_string()).collect() }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        const ATOM: &[&str] = &["number", "identifier", "(", "-"];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax(&[")"]));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                match name {
                    "t" | "lambda" => Ok(Expr::Var(Var::T)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    _ => match Func::from_name(name) {
                        Some(func) => {
                            if self.peek() != Some(b'(') {
                                return Err(self.syntax(&["("]));
                            }
                            self.pos += 1;
                            let arg = self.sum()?;
                            if self.peek() != Some(b')') {
                                return Err(self.syntax(&[")"]));
                            }
                            self.pos += 1;
                            Ok(Expr::Func(func, Box::new(arg)))
                        }
                        None => Err(Error::UnknownIdentifier { name: name.to_string(), offset: start }),
                    },
                }
            }
            _ => Err(self.syntax(ATOM)),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let src = self.src;
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < src.len() && src[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > s
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < src.len() && src[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.syntax(&["digit"]));
        }
        if p < src.len() && (src[p] == b'e' || src[p] == b'E') {
            let mut q = p + 1;
            if q < src.len() && (src[q] == b'+' || src[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                self.pos = q;
                return Err(self.syntax(&["exponent digits"]));
            }
        }
        let text = std::str::from_utf8(&src[start..p]).unwrap_or_default();
        let value: f64 = text.parse().map_err(|_| self.syntax(&["number"]))?;
        self.pos = p;
        Ok(Expr::Const(value))
    }
}
