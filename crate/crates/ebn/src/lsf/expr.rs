//! Abstract syntax tree, parser, and evaluators for limit-state
//! expressions.
//!
//! Grammar (standard precedence, left-associative except `^`):
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := unary (('*'|'/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right-associative, binds above unary minus
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ident   := [A-Za-z_][A-Za-z0-9_.]*
//! ```

use crate::dist::normal::{phi, phi_inv};
use crate::lsf::{EvalError, ParseError};
use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;

/// Built-in functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Min,
    Max,
    Phi,
    InvPhi,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Phi => "phi",
            Func::InvPhi => "inv_phi",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "phi" => Func::Phi,
            "inv_phi" => Func::InvPhi,
            _ => return None,
        })
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

/// A parsed limit-state expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    /// The set of free variables, in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// Substitutes constants for the named variables, leaving others free.
    pub fn bind_consts(&self, values: &HashMap<String, f64>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(name) => match values.get(name) {
                Some(v) => Expr::Num(*v),
                None => Expr::Var(name.clone()),
            },
            Expr::Neg(e) => Expr::Neg(Box::new(e.bind_consts(values))),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.bind_consts(values)),
                Box::new(b.bind_consts(values)),
            ),
            Expr::Call(f, args) => {
                Expr::Call(*f, args.iter().map(|a| a.bind_consts(values)).collect())
            }
        }
    }

    /// Renames variables according to the map.
    pub fn rename_vars(&self, renames: &HashMap<String, String>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(name) => Expr::Var(
                renames
                    .get(name)
                    .cloned()
                    .unwrap_or_else(|| name.clone()),
            ),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rename_vars(renames))),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.rename_vars(renames)),
                Box::new(b.rename_vars(renames)),
            ),
            Expr::Call(f, args) => {
                Expr::Call(*f, args.iter().map(|a| a.rename_vars(renames)).collect())
            }
        }
    }

    /// True if the tree contains min/max/abs, which break the smoothness
    /// assumption of gradient-based solvers.
    pub fn has_nonsmooth_ops(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(e) => e.has_nonsmooth_ops(),
            Expr::Bin(_, a, b) => a.has_nonsmooth_ops() || b.has_nonsmooth_ops(),
            Expr::Call(f, args) => {
                matches!(f, Func::Min | Func::Max | Func::Abs)
                    || args.iter().any(|a| a.has_nonsmooth_ops())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        while let Some((tok, at)) = lx.next_token()? {
            out.push((tok, at));
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        let at = self.pos;
        let c = self.bytes[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                // exponent part
                if self.pos < self.bytes.len()
                    && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
                {
                    let mut look = self.pos + 1;
                    if look < self.bytes.len()
                        && (self.bytes[look] == b'+' || self.bytes[look] == b'-')
                    {
                        look += 1;
                    }
                    if look < self.bytes.len() && self.bytes[look].is_ascii_digit() {
                        self.pos = look;
                        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit()
                        {
                            self.pos += 1;
                        }
                    }
                }
                let text = &self.src[start..self.pos];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    position: start,
                    message: format!("invalid number `{text}`"),
                })?;
                Tok::Num(v)
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric()
                        || self.bytes[self.pos] == b'_'
                        || self.bytes[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            other => {
                return Err(ParseError {
                    position: at,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(Some((tok, at)))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            Err(ParseError {
                position: self.pos(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.idx += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.idx += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.idx += 1;
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.idx += 1;
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.idx += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.idx += 1;
            // right-associative; exponent may carry a unary minus
            let exp = self.unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.idx += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.idx += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)` to close the argument list")?;
                    let f = Func::lookup(&name).ok_or_else(|| ParseError {
                        position: at,
                        message: format!("unknown function `{name}`"),
                    })?;
                    if args.len() != f.arity() {
                        return Err(ParseError {
                            position: at,
                            message: format!(
                                "function `{}` takes {} argument(s), got {}",
                                f.name(),
                                f.arity(),
                                args.len()
                            ),
                        });
                    }
                    Ok(Expr::Call(f, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(tok) => Err(ParseError {
                position: at,
                message: format!("unexpected token {tok:?}"),
            }),
            None => Err(ParseError {
                position: at,
                message: "unexpected end of expression".into(),
            }),
        }
    }
}

/// Parses an expression from text.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokenize(text)?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.idx != p.toks.len() {
        return Err(ParseError {
            position: p.pos(),
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Unparsing (Display). Parentheses are inserted from precedence so that
// parse(to_string(e)) == e.
// ---------------------------------------------------------------------------

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if precedence(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                child(f, e, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, prec, right_bump) = match op {
                    BinOp::Add => ("+", 1, 1),
                    BinOp::Sub => ("-", 1, 1),
                    BinOp::Mul => ("*", 2, 1),
                    BinOp::Div => ("/", 2, 1),
                    BinOp::Pow => ("^", 4, 0),
                };
                child(f, a, if *op == BinOp::Pow { 5 } else { prec })?;
                write!(f, " {sym} ")?;
                child(f, b, prec + right_bump)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn apply_func(f: Func, args: &[f64]) -> Result<f64, EvalError> {
    Ok(match f {
        Func::Exp => args[0].exp(),
        Func::Ln => {
            if args[0] <= 0.0 {
                return Err(EvalError::Domain(format!("ln of {}", args[0])));
            }
            args[0].ln()
        }
        Func::Sqrt => {
            if args[0] < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of {}", args[0])));
            }
            args[0].sqrt()
        }
        Func::Abs => args[0].abs(),
        Func::Min => args[0].min(args[1]),
        Func::Max => args[0].max(args[1]),
        Func::Phi => phi(args[0]),
        Func::InvPhi => {
            let p = args[0];
            if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                return Err(EvalError::Domain(format!("inv_phi of {p}")));
            }
            // Boundary probabilities map to infinities so that domain
            // membership tests behave as the limits dictate.
            phi_inv(p.clamp(0.0, 1.0))
        }
    })
}

fn apply_bin(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::Domain(format!("division of {a} by zero")));
            }
            a / b
        }
        BinOp::Pow => {
            let v = a.powf(b);
            if v.is_nan() {
                return Err(EvalError::Domain(format!("{a} ^ {b} is undefined")));
            }
            v
        }
    })
}

/// Evaluates an expression against named bindings.
pub fn eval_expr(e: &Expr, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
    let v = eval_inner(e, bindings)?;
    if v.is_nan() {
        return Err(EvalError::Domain("expression evaluated to NaN".into()));
    }
    Ok(v)
}

fn eval_inner(e: &Expr, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Var(name) => bindings
            .get(name)
            .copied()
            .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
        Expr::Neg(inner) => Ok(-eval_inner(inner, bindings)?),
        Expr::Bin(op, a, b) => apply_bin(*op, eval_inner(a, bindings)?, eval_inner(b, bindings)?),
        Expr::Call(f, args) => {
            let mut vals = [0.0; 2];
            for (i, a) in args.iter().enumerate() {
                vals[i] = eval_inner(a, bindings)?;
            }
            apply_func(*f, &vals[..args.len()])
        }
    }
}

/// Central-difference gradient with per-variable step
/// `max(step * |x|, step)`. Partials are returned in the order of `vars`.
pub fn grad_expr(
    e: &Expr,
    bindings: &HashMap<String, f64>,
    vars: &[&str],
    step: f64,
) -> Result<Vec<f64>, EvalError> {
    let mut local = bindings.clone();
    let mut out = Vec::with_capacity(vars.len());
    for &v in vars {
        let x = *bindings
            .get(v)
            .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))?;
        let h = (step * x.abs()).max(step);
        local.insert(v.to_string(), x + h);
        let fp = eval_expr(e, &local)?;
        local.insert(v.to_string(), x - h);
        let fm = eval_expr(e, &local)?;
        local.insert(v.to_string(), x);
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Compiled (slot-indexed postfix) form for hot loops
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call(Func, usize),
}

/// An expression compiled against a fixed variable layout; evaluation
/// reads variable values from a slot array instead of a hash map.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    stack_depth: usize,
}

impl CompiledExpr {
    /// Compiles `e`, resolving each variable to its index in `slots`.
    pub fn compile(e: &Expr, slots: &HashMap<String, usize>) -> Result<Self, EvalError> {
        let mut ops = Vec::new();
        fn walk(
            e: &Expr,
            slots: &HashMap<String, usize>,
            ops: &mut Vec<Op>,
        ) -> Result<(), EvalError> {
            match e {
                Expr::Num(v) => ops.push(Op::Const(*v)),
                Expr::Var(name) => {
                    let idx = slots
                        .get(name)
                        .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
                    ops.push(Op::Load(*idx));
                }
                Expr::Neg(inner) => {
                    walk(inner, slots, ops)?;
                    ops.push(Op::Neg);
                }
                Expr::Bin(op, a, b) => {
                    walk(a, slots, ops)?;
                    walk(b, slots, ops)?;
                    ops.push(Op::Bin(*op));
                }
                Expr::Call(f, args) => {
                    for a in args {
                        walk(a, slots, ops)?;
                    }
                    ops.push(Op::Call(*f, args.len()));
                }
            }
            Ok(())
        }
        walk(e, slots, &mut ops)?;
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => depth += 1,
                Op::Neg => {}
                Op::Bin(_) => depth -= 1,
                Op::Call(_, n) => depth = depth - n + 1,
            }
            max_depth = max_depth.max(depth);
        }
        Ok(CompiledExpr {
            ops,
            stack_depth: max_depth,
        })
    }

    pub fn stack_depth(&self) -> usize {
        self.stack_depth
    }

    /// Evaluates against the slot array, using `stack` as scratch space
    /// (must hold at least [`Self::stack_depth`] values).
    pub fn eval_with(&self, slots: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Const(v) => stack.push(*v),
                Op::Load(i) => stack.push(slots[*i]),
                Op::Neg => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = -*top;
                }
                Op::Bin(b) => {
                    let rhs = stack.pop().expect("stack underflow");
                    let lhs = stack.last_mut().expect("stack underflow");
                    *lhs = apply_bin(*b, *lhs, rhs)?;
                }
                Op::Call(f, n) => {
                    let start = stack.len() - n;
                    let v = apply_func(*f, &stack[start..])?;
                    stack.truncate(start);
                    stack.push(v);
                }
            }
        }
        let v = stack.pop().expect("empty expression");
        if v.is_nan() {
            return Err(EvalError::Domain("expression evaluated to NaN".into()));
        }
        Ok(v)
    }
}
