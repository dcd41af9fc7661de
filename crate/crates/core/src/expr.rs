//! Expression trees over `x, y, z` (and optionally `t`) with symbolic
//! differentiation.
//!
//! The grammar is intentionally small so that every node kind has a closed
//! form derivative:
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" integer ] ;
//! integer = [ "-" ] digits | "(" [ "-" ] digits ")" ;
//! primary = number | var | func "(" expr ")" | "(" expr ")" ;
//! var     = "x" | "y" | "z" | "t" ;
//! func    = "sin" | "cos" | "exp" | "tanh" ;
//! map     = "(" expr "," expr "," expr ")" ;
//! ```

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    Z,
    T,
}

impl Var {
    pub fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::Z => 2,
            Var::T => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::T => "t",
        }
    }

    const SPATIAL: [Var; 3] = [Var::X, Var::Y, Var::Z];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

// Smart constructors fold the trivial cases so derivative trees stay small.
fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) if *x == 0.0 => b,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), _) if *x == 0.0 => neg(b),
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => num(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), k),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl Expr {
    /// Evaluates with `vars = [x, y, z, t]`.
    pub fn eval(&self, vars: &[f64; 4]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => vars[v.index()],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, k) => a.eval(vars).powi(*k),
            Expr::Call(f, a) => {
                let v = a.eval(vars);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Tanh => v.tanh(),
                }
            }
        }
    }

    /// Symbolic partial derivative with respect to `var`.
    pub fn derivative(&self, var: Var) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)),
            Expr::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), 2),
            ),
            Expr::Pow(a, k) => mul(
                mul(num(*k as f64), pow((**a).clone(), k - 1)),
                a.derivative(var),
            ),
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Tanh => sub(num(1.0), pow(call(Func::Tanh, inner), 2)),
                };
                mul(outer, a.derivative(var))
            }
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.uses(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses(var) || b.uses(var)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        let p = self.precedence();
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                child(f, a, a.precedence() < p)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => " * ",
                    _ => " / ",
                };
                child(f, a, a.precedence() < p)?;
                f.write_str(op)?;
                child(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, k) => {
                child(f, a, a.precedence() <= p)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(Error::Syntax {
            pos: start,
            msg: format!("unexpected character `{ch}`"),
        })
    }
}

struct Parser<'v> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    vars: &'v [Var],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax {
                pos: self.pos(),
                msg: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let parens = *self.peek() == Tok::Op('(');
        if parens {
            self.bump();
        }
        let negative = *self.peek() == Tok::Op('-');
        if negative {
            self.bump();
        }
        let pos = self.pos();
        let k = match self.bump() {
            Tok::Num(v) if v.fract() == 0.0 && v <= i32::MAX as f64 => v as i32,
            _ => {
                return Err(Error::Syntax {
                    pos,
                    msg: "exponent must be an integer constant".into(),
                })
            }
        };
        if parens {
            self.expect(')')?;
        }
        Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.vars
                    .iter()
                    .find(|v| v.name() == name)
                    .map(|v| Expr::Var(*v))
                    .ok_or(Error::UnknownIdentifier { name, pos })
            }
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            Tok::Op(c) => Err(Error::Syntax {
                pos,
                msg: format!("unexpected `{c}`"),
            }),
        }
    }
}

/// Parses a scalar expression in the given variables.
pub fn parse_expr(src: &str, vars: &[Var]) -> Result<Expr> {
    let mut p = Parser {
        toks: Lexer::tokens(src)?,
        at: 0,
        vars,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}

fn parse_triple(src: &str, vars: &[Var]) -> Result<[Expr; 3]> {
    let mut p = Parser {
        toks: Lexer::tokens(src)?,
        at: 0,
        vars,
    };
    p.expect('(')?;
    let mut parts = vec![p.expr()?];
    while *p.peek() == Tok::Op(',') {
        p.bump();
        parts.push(p.expr()?);
    }
    p.expect(')')?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    let found = parts.len();
    parts.try_into().map_err(|_| Error::Arity { found })
}

// ---------------------------------------------------------------------------
// Differentiable carriers
// ---------------------------------------------------------------------------

/// A scalar expression together with its symbolic gradient in `(x, y, z)`;
/// the Hessian is derived lazily.
#[derive(Debug)]
pub struct ScalarExpr {
    expr: Expr,
    grad: [Expr; 3],
    hess: OnceLock<[[Expr; 3]; 3]>,
}

impl ScalarExpr {
    pub fn new(expr: Expr) -> Self {
        let grad = Var::SPATIAL.map(|v| expr.derivative(v));
        Self {
            expr,
            grad,
            hess: OnceLock::new(),
        }
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::new(parse_expr(src, &Var::SPATIAL)?))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn partial(&self, i: usize) -> &Expr {
        &self.grad[i]
    }

    pub fn value(&self, vars: &[f64; 4]) -> f64 {
        self.expr.eval(vars)
    }

    pub fn gradient(&self, vars: &[f64; 4]) -> Vector3<f64> {
        Vector3::new(
            self.grad[0].eval(vars),
            self.grad[1].eval(vars),
            self.grad[2].eval(vars),
        )
    }

    pub fn hessian(&self, vars: &[f64; 4]) -> Matrix3<f64> {
        let h = self.hess.get_or_init(|| {
            std::array::from_fn(|i| std::array::from_fn(|j| self.grad[i].derivative(Var::SPATIAL[j])))
        });
        Matrix3::from_fn(|i, j| h[i][j].eval(vars))
    }
}

/// Three component expressions of a map R^3 -> R^3 with their symbolic
/// Jacobian. Component expressions may use `t` when parsed as a family.
#[derive(Debug)]
pub struct MapExpr {
    comps: [Expr; 3],
    jac: [[Expr; 3]; 3],
    time_dependent: bool,
}

impl MapExpr {
    pub fn new(comps: [Expr; 3]) -> Self {
        let jac = std::array::from_fn(|i| Var::SPATIAL.map(|v| comps[i].derivative(v)));
        let time_dependent = comps.iter().any(|c| c.uses(Var::T));
        Self {
            comps,
            jac,
            time_dependent,
        }
    }

    /// Parses `"(f_x, f_y, f_z)"` over `x, y, z`.
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::new(parse_triple(src, &Var::SPATIAL)?))
    }

    /// Parses a time-indexed family `"(f_x, f_y, f_z)"` over `x, y, z, t`.
    pub fn parse_family(src: &str) -> Result<Self> {
        Ok(Self::new(parse_triple(
            src,
            &[Var::X, Var::Y, Var::Z, Var::T],
        )?))
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.comps
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn eval(&self, vars: &[f64; 4]) -> Vector3<f64> {
        Vector3::new(
            self.comps[0].eval(vars),
            self.comps[1].eval(vars),
            self.comps[2].eval(vars),
        )
    }

    pub fn jacobian(&self, vars: &[f64; 4]) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.jac[i][j].eval(vars))
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.comps[0], self.comps[1], self.comps[2])
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// Parses a map expression; the public entry point behind `--map`.
pub fn parse_map(src: &str) -> Result<Arc<MapExpr>> {
    MapExpr::parse(src).map(Arc::new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, z: f64) -> [f64; 4] {
        [x, y, z, 0.0]
    }

    #[test]
    fn arity_and_identifier_errors() {
        assert_eq!(MapExpr::parse("(x, y)").unwrap_err(), Error::Arity { found: 2 });
        assert_eq!(
            MapExpr::parse("(x, y + w, z)").unwrap_err(),
            Error::UnknownIdentifier {
                name: "w".into(),
                pos: 8
            }
        );
        assert!(matches!(
            MapExpr::parse("(x, y +, z)"),
            Err(Error::Syntax { pos: 7, .. })
        ));
        assert!(matches!(
            MapExpr::parse("(x, y, z, x)"),
            Err(Error::Arity { found: 4 })
        ));
        // t is only legal in families
        assert!(matches!(
            MapExpr::parse("(x, y, z + t)"),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(MapExpr::parse_family("(x, y, z + t)").unwrap().is_time_dependent());
    }

    #[test]
    fn reeb_translation_literal() {
        let m = MapExpr::parse("(x, y, z + 0.2)").unwrap();
        let v = m.eval(&at(1.0, -2.0, 3.0));
        assert_eq!([v.x, v.y, v.z], [1.0, -2.0, 3.0 + 0.2]);
        assert_eq!(m.jacobian(&at(0.3, 0.1, 0.0)), Matrix3::identity());
    }

    #[test]
    fn precedence_and_powers() {
        let e = parse_expr("-x^2 + 2*y/4 - 3^(-1)", &Var::SPATIAL).unwrap();
        let v = e.eval(&at(3.0, 2.0, 0.0));
        assert!((v - (-9.0 + 1.0 - 1.0 / 3.0)).abs() < 1e-15);
        let e = parse_expr("2^-2", &Var::SPATIAL).unwrap();
        assert_eq!(e.eval(&at(0.0, 0.0, 0.0)), 0.25);
        assert!(parse_expr("x^1.5", &Var::SPATIAL).is_err());
    }

    #[test]
    fn symbolic_derivatives_match_known_forms() {
        let s = ScalarExpr::parse("sin(x) * exp(y) + tanh(z)^2 / (1 + x^2)").unwrap();
        let p = at(0.3, -0.2, 0.7);
        let (x, y, z) = (0.3f64, -0.2f64, 0.7f64);
        let th = z.tanh();
        let expect = Vector3::new(
            x.cos() * y.exp() - th * th * 2.0 * x / (1.0 + x * x).powi(2),
            x.sin() * y.exp(),
            2.0 * th * (1.0 - th * th) / (1.0 + x * x),
        );
        assert!((s.gradient(&p) - expect).norm() < 1e-14);
        let h = s.hessian(&p);
        assert!((h - h.transpose()).norm() < 1e-13);
    }

    #[test]
    fn display_parenthesizes_right_operands() {
        let e = parse_expr("x - (y - z)", &Var::SPATIAL).unwrap();
        assert_eq!(e.to_string(), "x - (y - z)");
        let e = parse_expr("(x * y)^3 - -z", &Var::SPATIAL).unwrap();
        assert_eq!(parse_expr(&e.to_string(), &Var::SPATIAL).unwrap(), e);
    }
}
