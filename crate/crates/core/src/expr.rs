//! Closed-form arithmetic expressions over named coordinates.
//!
//! Grammar (ASCII, whitespace-insensitive), loosest to tightest:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | ident | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt | abs
//! ```
//!
//! Expressions are immutable and cheap to clone (subtrees are shared), so the
//! derivative trees built by [`Expression::differentiate`] never copy their
//! operands.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Elementary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// One node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Arc<str>),
    Neg(Expression),
    Binary(BinOp, Expression, Expression),
    Call(Func, Expression),
}

/// An immutable expression tree.
#[derive(Clone, PartialEq)]
pub struct Expression(Arc<Node>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Anything that can resolve a coordinate name to a value.
pub trait Bindings {
    fn value(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

/// A point in chart coordinates: an ordered list of names with one value each.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    names: Arc<[String]>,
    values: Vec<f64>,
}

impl Point {
    /// Panics if `names` and `values` differ in length.
    pub fn new(names: Arc<[String]>, values: Vec<f64>) -> Self {
        assert_eq!(names.len(), values.len(), "point arity mismatch");
        Point { names, values }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.value(name)
    }

    /// Same coordinates, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Point {
        Point::new(self.names.clone(), values)
    }
}

impl Bindings for Point {
    fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (n, v)) in self.names.iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}={v:?}")?;
        }
        write!(f, ")")
    }
}

// ---------------------------------------------------------------------------
// construction

impl Expression {
    fn wrap(node: Node) -> Self {
        Expression(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Expression::wrap(Node::Const(value))
    }

    pub fn zero() -> Self {
        Expression::constant(0.0)
    }

    pub fn one() -> Self {
        Expression::constant(1.0)
    }

    pub fn var(name: &str) -> Self {
        Expression::wrap(Node::Var(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True only for the literal constant zero; no algebra is attempted.
    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Const(c) => Expression::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expression::wrap(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, rhs: &Expression) -> Self {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expression::constant(a + b);
        }
        if let Node::Neg(inner) = rhs.node() {
            return Expression::wrap(Node::Binary(BinOp::Sub, self.clone(), inner.clone()));
        }
        Expression::wrap(Node::Binary(BinOp::Add, self.clone(), rhs.clone()))
    }

    pub fn sub(&self, rhs: &Expression) -> Self {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expression::constant(a - b);
        }
        if let Node::Neg(inner) = rhs.node() {
            return self.add(inner);
        }
        Expression::wrap(Node::Binary(BinOp::Sub, self.clone(), rhs.clone()))
    }

    pub fn mul(&self, rhs: &Expression) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Expression::zero();
        }
        if self.is_one() {
            return rhs.clone();
        }
        if rhs.is_one() {
            return self.clone();
        }
        if self.as_const() == Some(-1.0) {
            return rhs.neg();
        }
        if rhs.as_const() == Some(-1.0) {
            return self.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            return Expression::constant(a * b);
        }
        Expression::wrap(Node::Binary(BinOp::Mul, self.clone(), rhs.clone()))
    }

    pub fn div(&self, rhs: &Expression) -> Self {
        if rhs.is_one() {
            return self.clone();
        }
        if self.is_zero() && rhs.as_const().is_some_and(|c| c != 0.0) {
            return Expression::zero();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            if b != 0.0 {
                return Expression::constant(a / b);
            }
        }
        Expression::wrap(Node::Binary(BinOp::Div, self.clone(), rhs.clone()))
    }

    pub fn pow(&self, rhs: &Expression) -> Self {
        if rhs.is_zero() {
            return Expression::one();
        }
        if rhs.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            if let Ok(v) = pow_checked(a, b) {
                return Expression::constant(v);
            }
        }
        Expression::wrap(Node::Binary(BinOp::Pow, self.clone(), rhs.clone()))
    }

    pub fn call(func: Func, arg: &Expression) -> Self {
        if let Some(a) = arg.as_const() {
            if let Ok(v) = apply_func(func, a) {
                return Expression::constant(v);
            }
        }
        Expression::wrap(Node::Call(func, arg.clone()))
    }

    pub fn binary(op: BinOp, lhs: &Expression, rhs: &Expression) -> Self {
        match op {
            BinOp::Add => lhs.add(rhs),
            BinOp::Sub => lhs.sub(rhs),
            BinOp::Mul => lhs.mul(rhs),
            BinOp::Div => lhs.div(rhs),
            BinOp::Pow => lhs.pow(rhs),
        }
    }

    /// Sum of a sequence; the empty sum is zero.
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a Expression>) -> Expression {
        terms
            .into_iter()
            .fold(Expression::zero(), |acc, t| acc.add(t))
    }
}

impl From<f64> for Expression {
    fn from(value: f64) -> Self {
        Expression::constant(value)
    }
}

macro_rules! forward_op {
    ($trait:ident, $method:ident) => {
        impl std::ops::$trait<Expression> for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::$method(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                Expression::$method(self, rhs)
            }
        }
    };
}

forward_op!(Add, add);
forward_op!(Sub, sub);
forward_op!(Mul, mul);
forward_op!(Div, div);

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(&self)
    }
}

impl std::ops::Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(self)
    }
}

// ---------------------------------------------------------------------------
// evaluation

fn pow_checked(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::Domain(format!(
            "negative base {base} raised to non-integer power {exponent}"
        )));
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    finite(base.powf(exponent), "^")
}

fn finite(value: f64, what: &str) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::Domain(format!("non-finite result from {what}")))
    }
}

fn apply_func(func: Func, x: f64) -> Result<f64, EvalError> {
    let y = match func {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Tan => x.tan(),
        Func::Exp => x.exp(),
        Func::Log => {
            if x <= 0.0 {
                return Err(EvalError::Domain(format!("log of non-positive value {x}")));
            }
            x.ln()
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of negative value {x}")));
            }
            x.sqrt()
        }
        Func::Abs => x.abs(),
    };
    finite(y, func.name())
}

fn apply_binary(op: BinOp, x: f64, y: f64) -> Result<f64, EvalError> {
    match op {
        BinOp::Add => finite(x + y, "+"),
        BinOp::Sub => finite(x - y, "-"),
        BinOp::Mul => finite(x * y, "*"),
        BinOp::Div => {
            if y == 0.0 {
                Err(EvalError::DivisionByZero)
            } else {
                finite(x / y, "/")
            }
        }
        BinOp::Pow => pow_checked(x, y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Slot(usize),
    Neg,
    Binary(BinOp),
    Call(Func),
}

/// An expression flattened to postfix form with variables bound to slots.
/// Evaluation applies the same domain checks as [`Expression::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    ops: Vec<Op>,
    depth: usize,
}

impl Compiled {
    pub fn evaluate(&self, values: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.depth);
        self.evaluate_with(values, &mut stack)
    }

    /// As [`Compiled::evaluate`], reusing `stack` to avoid allocation.
    pub fn evaluate_with(&self, values: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Slot(i) => stack.push(values[i]),
                Op::Neg => {
                    let x = stack.last_mut().expect("operand");
                    *x = -*x;
                }
                Op::Binary(b) => {
                    let y = stack.pop().expect("operand");
                    let x = stack.last_mut().expect("operand");
                    *x = apply_binary(b, *x, y)?;
                }
                Op::Call(f) => {
                    let x = stack.last_mut().expect("operand");
                    *x = apply_func(f, *x)?;
                }
            }
        }
        Ok(stack[0])
    }
}

impl Expression {
    pub fn evaluate<B: Bindings + ?Sized>(&self, env: &B) -> Result<f64, EvalError> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Var(name) => env
                .value(name)
                .ok_or_else(|| EvalError::Unbound(name.to_string())),
            Node::Neg(e) => Ok(-e.evaluate(env)?),
            Node::Binary(op, a, b) => apply_binary(*op, a.evaluate(env)?, b.evaluate(env)?),
            Node::Call(func, arg) => apply_func(*func, arg.evaluate(env)?),
        }
    }

    /// Resolve variables against `names` (by position) for repeated
    /// evaluation. Fails on a variable not in `names`.
    pub fn compile(&self, names: &[String]) -> Result<Compiled, EvalError> {
        let mut ops = Vec::with_capacity(self.node_count());
        let depth = self.emit(names, &mut ops)?;
        Ok(Compiled { ops, depth })
    }

    /// Push postfix ops; returns the stack depth needed.
    fn emit(&self, names: &[String], ops: &mut Vec<Op>) -> Result<usize, EvalError> {
        Ok(match self.node() {
            Node::Const(c) => {
                ops.push(Op::Const(*c));
                1
            }
            Node::Var(name) => {
                let slot = names
                    .iter()
                    .position(|n| **n == **name)
                    .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
                ops.push(Op::Slot(slot));
                1
            }
            Node::Neg(e) => {
                let d = e.emit(names, ops)?;
                ops.push(Op::Neg);
                d
            }
            Node::Binary(op, a, b) => {
                let da = a.emit(names, ops)?;
                let db = b.emit(names, ops)?;
                ops.push(Op::Binary(*op));
                da.max(db + 1)
            }
            Node::Call(func, arg) => {
                let d = arg.emit(names, ops)?;
                ops.push(Op::Call(*func));
                d
            }
        })
    }

    /// Names of all variables occurring in the tree.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(n) => {
                out.insert(n.to_string());
            }
            Node::Neg(e) | Node::Call(_, e) => e.collect_vars(out),
            Node::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(n) => &**n == name,
            Node::Neg(e) | Node::Call(_, e) => e.depends_on(name),
            Node::Binary(_, a, b) => a.depends_on(name) || b.depends_on(name),
        }
    }

    /// Replace every occurrence of variable `name` by `with`.
    pub fn substitute(&self, name: &str, with: &Expression) -> Expression {
        if !self.depends_on(name) {
            return self.clone();
        }
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(n) => {
                if &**n == name {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            Node::Neg(e) => e.substitute(name, with).neg(),
            Node::Binary(op, a, b) => {
                Expression::binary(*op, &a.substitute(name, with), &b.substitute(name, with))
            }
            Node::Call(f, e) => Expression::call(*f, &e.substitute(name, with)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Neg(e) | Node::Call(_, e) => 1 + e.node_count(),
            Node::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

// ---------------------------------------------------------------------------
// differentiation

impl Expression {
    /// Exact partial derivative with respect to `coord`.
    pub fn differentiate(&self, coord: &str) -> Expression {
        if !self.depends_on(coord) {
            return Expression::zero();
        }
        match self.node() {
            Node::Const(_) => Expression::zero(),
            Node::Var(n) => {
                if &**n == coord {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Node::Neg(e) => e.differentiate(coord).neg(),
            Node::Binary(op, u, v) => {
                let du = u.differentiate(coord);
                let dv = v.differentiate(coord);
                match op {
                    BinOp::Add => du.add(&dv),
                    BinOp::Sub => du.sub(&dv),
                    BinOp::Mul => du.mul(v).add(&u.mul(&dv)),
                    BinOp::Div => {
                        // (u'v - uv') / v^2
                        let num = du.mul(v).sub(&u.mul(&dv));
                        num.div(&v.mul(v))
                    }
                    BinOp::Pow => {
                        if let Some(c) = v.as_const() {
                            Expression::constant(c)
                                .mul(&u.pow(&Expression::constant(c - 1.0)))
                                .mul(&du)
                        } else {
                            // u^v (v' log u + v u'/u)
                            let log_u = Expression::call(Func::Log, u);
                            let inner = dv.mul(&log_u).add(&v.mul(&du).div(u));
                            self.mul(&inner)
                        }
                    }
                }
            }
            Node::Call(func, u) => {
                let du = u.differentiate(coord);
                let outer = match func {
                    Func::Sin => Expression::call(Func::Cos, u),
                    Func::Cos => Expression::call(Func::Sin, u).neg(),
                    Func::Tan => {
                        let c = Expression::call(Func::Cos, u);
                        Expression::one().div(&c.mul(&c))
                    }
                    Func::Exp => self.clone(),
                    Func::Log => Expression::one().div(u),
                    Func::Sqrt => Expression::one().div(&Expression::constant(2.0).mul(self)),
                    // d|u| = u/|u| du, undefined at u = 0
                    Func::Abs => u.div(self),
                };
                outer.mul(&du)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// printing

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expression {
    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => PREC_NEG,
            Node::Const(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
            Node::Neg(_) => PREC_NEG,
            Node::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Node::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Node::Binary(BinOp::Pow, ..) => PREC_POW,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(n) => write!(f, "{n}"),
            Node::Neg(e) => {
                write!(f, "-")?;
                e.write_child(f, PREC_NEG)
            }
            Node::Binary(op, a, b) => {
                let (lhs_min, rhs_min) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_ADD, PREC_ADD + 1),
                    BinOp::Mul | BinOp::Div => (PREC_MUL, PREC_MUL + 1),
                    BinOp::Pow => (PREC_ATOM, PREC_NEG),
                };
                a.write_child(f, lhs_min)?;
                match op {
                    BinOp::Add | BinOp::Sub => write!(f, " {} ", op.symbol())?,
                    _ => write!(f, "{}", op.symbol())?,
                }
                b.write_child(f, rhs_min)
            }
            Node::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(u8),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self
                .src
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                self.pos += 1;
            }
            let ident = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
            return Ok((Tok::Ident(ident), start));
        }
        self.pos += 1;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ if c.is_ascii() => {
                return Err(Self::syntax(
                    start,
                    format!("unexpected character `{}`", c as char),
                ))
            }
            _ => return Err(Self::syntax(start, "non-ASCII input")),
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut mantissa = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            return Err(Self::syntax(start, "malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent after all, e.g. "2e" is a syntax error below
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text
            .parse()
            .map_err(|_| Self::syntax(start, format!("malformed number `{text}`")))?;
        if !value.is_finite() {
            return Err(Self::syntax(start, format!("number `{text}` out of range")));
        }
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        Lexer::syntax(self.at, message)
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ (b'+' | b'-')) = self.tok {
            self.bump()?;
            let rhs = self.term()?;
            let op = if op == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expression::wrap(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ (b'*' | b'/')) = self.tok {
            self.bump()?;
            let rhs = self.unary()?;
            let op = if op == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expression::wrap(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.tok == Tok::Op(b'-') {
            self.bump()?;
            let inner = self.unary()?;
            return Ok(Expression::wrap(Node::Neg(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op(b'^') {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expression::wrap(Node::Binary(BinOp::Pow, base, exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expression::constant(v))
            }
            Tok::Ident(name) => {
                let name_at = self.at;
                self.bump()?;
                if self.tok == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                        offset: name_at,
                        name,
                    })?;
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expression::wrap(Node::Call(func, arg)))
                } else {
                    Ok(Expression::var(&name))
                }
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::End => Err(self.error("unexpected end of input")),
            tok => {
                self.tok = tok;
                Err(self.error("expected a number, name or `(`"))
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return Err(self.error("expected `)`"));
        }
        self.bump()
    }
}

/// Parse expression text into a tree. The tree mirrors the source exactly: no
/// folding is applied, so `parse("2*U/(3*V)")` is `Div(Mul(2,U), Mul(3,V))`.
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let mut parser = Parser {
        lexer: Lexer {
            src: source.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
    };
    parser.bump()?;
    if parser.tok == Tok::End {
        return Err(parser.error("empty expression"));
    }
    let e = parser.expr()?;
    if parser.tok != Tok::End {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(e)
}

impl std::str::FromStr for Expression {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
