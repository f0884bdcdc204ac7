//! Closed-form conformal factors as small expression trees.
//!
//! The grammar is the usual infix one:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `x1..xn`, `absx` (= |x|), `rho_k` (= |(x1..xk)|), `n`, `pi`,
//! `green` (Dirichlet Green function of the flat unit ball). Functions:
//! `abs(x)`, `exp`, `log`/`ln`, `sqrt`, `sin`, `cos`.
//!
//! Constants are folded once `n` is bound, and powers of `|x|` and `rho_k`
//! are collapsed into single nodes so that e.g. `abs(x)^(2-n)` is evaluated
//! as `(sum x_i^2)^{(2-n)/2}` rather than through a square root.

use crate::dim::sphere_area;
use crate::error::{Error, Result};
use crate::jet::Scalar;
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fun {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    /// `|x|^a`
    RadialPow(f64),
    /// `rho_k^a`
    RhoPow(usize, f64),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    PowConst(Box<Node>, f64),
    Pow(Box<Node>, Box<Node>),
    Func(Fun, Box<Node>),
}

/// A parsed, dimension-bound scalar expression in the chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    n: usize,
    root: Node,
}

impl Expr {
    /// Parse `source` with the dimension symbol `n` bound.
    pub fn parse(source: &str, n: usize) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            n,
            len: source.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(Error::Expression {
                position: tok.pos,
                message: format!("unexpected token {:?}", tok.kind),
            });
        }
        Ok(Expr {
            source: source.to_string(),
            n,
            root: fold(root),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Evaluate on any scalar type; `x.len()` must equal the bound dimension.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.n);
        eval_node(&self.root, x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    /// True when the tree depends on `x` only through `|x|`.
    pub fn is_radial(&self) -> bool {
        invariant(&self.root, self.n)
    }

    /// True when the tree is invariant under rotations of `x1..xk`.
    pub fn is_rotation_invariant(&self, k: usize) -> bool {
        invariant(&self.root, k)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn invariant(node: &Node, k: usize) -> bool {
    match node {
        Node::Const(_) | Node::RadialPow(_) => true,
        Node::Coord(i) => *i >= k,
        Node::RhoPow(j, _) => *j >= k,
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            invariant(a, k) && invariant(b, k)
        }
        Node::Neg(a) | Node::PowConst(a, _) | Node::Func(_, a) => invariant(a, k),
    }
}

fn partial_square_norm<S: Scalar>(x: &[S], k: usize) -> S {
    let mut s = x[0].mul(&x[0]);
    for xi in &x[1..k] {
        s = s.add(&xi.mul(xi));
    }
    s
}

fn eval_node<S: Scalar>(node: &Node, x: &[S]) -> S {
    match node {
        Node::Const(c) => x[0].lift(*c),
        Node::Coord(i) => x[*i].clone(),
        Node::RadialPow(a) => partial_square_norm(x, x.len()).powf(a / 2.0),
        Node::RhoPow(k, a) => partial_square_norm(x, *k).powf(a / 2.0),
        Node::Add(a, b) => eval_node(a, x).add(&eval_node(b, x)),
        Node::Sub(a, b) => eval_node(a, x).sub(&eval_node(b, x)),
        Node::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
            (Node::Const(c), other) | (other, Node::Const(c)) => eval_node(other, x).scale(*c),
            _ => eval_node(a, x).mul(&eval_node(b, x)),
        },
        Node::Div(a, b) => match b.as_ref() {
            Node::Const(c) => eval_node(a, x).scale(1.0 / c),
            _ => eval_node(a, x).div(&eval_node(b, x)),
        },
        Node::Neg(a) => eval_node(a, x).neg(),
        Node::PowConst(a, p) => {
            let base = eval_node(a, x);
            if *p == 1.0 {
                base
            } else if *p == 2.0 {
                base.mul(&base)
            } else {
                base.powf(*p)
            }
        }
        Node::Pow(a, b) => eval_node(b, x).mul(&eval_node(a, x).ln()).exp(),
        Node::Func(f, a) => {
            let v = eval_node(a, x);
            match f {
                Fun::Exp => v.exp(),
                Fun::Ln => v.ln(),
                Fun::Sqrt => v.sqrt(),
                Fun::Sin => v.sin(),
                Fun::Cos => v.cos(),
            }
        }
    }
}

fn fold(node: Node) -> Node {
    use Node::*;
    match node {
        Add(a, b) => match (fold(*a), fold(*b)) {
            (Const(x), Const(y)) => Const(x + y),
            (Const(z), o) | (o, Const(z)) if z == 0.0 => o,
            (x, y) => Add(Box::new(x), Box::new(y)),
        },
        Sub(a, b) => match (fold(*a), fold(*b)) {
            (Const(x), Const(y)) => Const(x - y),
            (o, Const(z)) if z == 0.0 => o,
            (x, y) => Sub(Box::new(x), Box::new(y)),
        },
        Mul(a, b) => match (fold(*a), fold(*b)) {
            (Const(x), Const(y)) => Const(x * y),
            (Const(o), e) | (e, Const(o)) if o == 1.0 => e,
            (RadialPow(p), RadialPow(q)) => RadialPow(p + q),
            (RhoPow(k, p), RhoPow(l, q)) if k == l => RhoPow(k, p + q),
            (x, y) => Mul(Box::new(x), Box::new(y)),
        },
        Div(a, b) => match (fold(*a), fold(*b)) {
            (Const(x), Const(y)) => Const(x / y),
            (RadialPow(p), RadialPow(q)) => RadialPow(p - q),
            (Const(o), RadialPow(q)) if o == 1.0 => RadialPow(-q),
            (x, y) => Div(Box::new(x), Box::new(y)),
        },
        Neg(a) => match fold(*a) {
            Const(x) => Const(-x),
            x => Neg(Box::new(x)),
        },
        PowConst(a, p) => pow_const(fold(*a), p),
        Pow(a, b) => match (fold(*a), fold(*b)) {
            (x, Const(p)) => pow_const(x, p),
            (x, y) => Pow(Box::new(x), Box::new(y)),
        },
        Func(f, a) => match (f, fold(*a)) {
            (f, Const(x)) => Const(match f {
                Fun::Exp => x.exp(),
                Fun::Ln => x.ln(),
                Fun::Sqrt => x.sqrt(),
                Fun::Sin => x.sin(),
                Fun::Cos => x.cos(),
            }),
            (Fun::Sqrt, RadialPow(p)) => RadialPow(p / 2.0),
            (Fun::Sqrt, RhoPow(k, p)) => RhoPow(k, p / 2.0),
            (f, x) => Func(f, Box::new(x)),
        },
        other => other,
    }
}

fn pow_const(base: Node, p: f64) -> Node {
    match base {
        Node::Const(x) => Node::Const(x.powf(p)),
        Node::RadialPow(a) => Node::RadialPow(a * p),
        Node::RhoPow(k, a) => Node::RhoPow(k, a * p),
        x if p == 1.0 => x,
        x if p == 0.0 => {
            let _ = x;
            Node::Const(1.0)
        }
        x => Node::PowConst(Box::new(x), p),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
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
            let value = text.parse::<f64>().map_err(|_| Error::Expression {
                position: start,
                message: format!("malformed number '{text}'"),
            })?;
            out.push(Token {
                kind: TokenKind::Number(value),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                pos: start,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token {
                kind: TokenKind::Op(c),
                pos: i,
            });
            i += 1;
        } else {
            return Err(Error::Expression {
                position: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    n: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.len, |t| t.pos)
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression {
                position: self.here(),
                message: format!("expected '{op}'"),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let tok = self.peek().cloned().ok_or(Error::Expression {
            position: self.len,
            message: "unexpected end of expression".into(),
        })?;
        self.pos += 1;
        match tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(v)),
            TokenKind::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            TokenKind::Op(c) => Err(Error::Expression {
                position: tok.pos,
                message: format!("unexpected '{c}'"),
            }),
            TokenKind::Ident(name) => {
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    self.call(&name, tok.pos)
                } else {
                    self.identifier(&name, tok.pos)
                }
            }
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Node> {
        if name == "abs" {
            match self.peek() {
                Some(Token {
                    kind: TokenKind::Ident(id),
                    ..
                }) if id == "x" => {
                    self.pos += 1;
                    self.expect(')')?;
                    return Ok(Node::RadialPow(1.0));
                }
                _ => {
                    return Err(Error::Expression {
                        position: self.here(),
                        message: "abs() only accepts the position vector x".into(),
                    })
                }
            }
        }
        let func = match name {
            "exp" => Fun::Exp,
            "log" | "ln" => Fun::Ln,
            "sqrt" => Fun::Sqrt,
            "sin" => Fun::Sin,
            "cos" => Fun::Cos,
            _ => {
                return Err(Error::Expression {
                    position: at,
                    message: format!("unknown function '{name}'"),
                })
            }
        };
        let arg = self.expr()?;
        self.expect(')')?;
        Ok(Node::Func(func, Box::new(arg)))
    }

    fn identifier(&mut self, name: &str, at: usize) -> Result<Node> {
        let n = self.n;
        let bad = |message: String| Error::Expression {
            position: at,
            message,
        };
        match name {
            "absx" => Ok(Node::RadialPow(1.0)),
            "n" => Ok(Node::Const(n as f64)),
            "pi" => Ok(Node::Const(PI)),
            "green" => {
                // (|x|^{2-n} - 1) / ((n-2) omega_{n-1})
                let scale = 1.0 / ((n as f64 - 2.0) * sphere_area(n));
                Ok(Node::Mul(
                    Box::new(Node::Const(scale)),
                    Box::new(Node::Sub(
                        Box::new(Node::RadialPow(2.0 - n as f64)),
                        Box::new(Node::Const(1.0)),
                    )),
                ))
            }
            _ => {
                if let Some(k) = name.strip_prefix("rho_") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| bad(format!("malformed identifier '{name}'")))?;
                    if k == 0 || k > n {
                        return Err(bad(format!("rho_{k} needs 1 <= k <= n = {n}")));
                    }
                    return Ok(Node::RhoPow(k, 1.0));
                }
                if let Some(i) = name.strip_prefix('x') {
                    if let Ok(i) = i.parse::<usize>() {
                        if i == 0 || i > n {
                            return Err(bad(format!("coordinate x{i} outside 1..={n}")));
                        }
                        return Ok(Node::Coord(i - 1));
                    }
                }
                Err(bad(format!("unknown identifier '{name}'")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet, JetSpace};

    #[test]
    fn radial_power_collapses() {
        let e = Expr::parse("abs(x)^(2-n)", 4).unwrap();
        assert_eq!(e.root, Node::RadialPow(-2.0));
        assert!((e.value(&[2.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!(e.is_radial());
    }

    #[test]
    fn rotation_invariance() {
        let e = Expr::parse("rho_4^(-2) * (1 + x5^2)", 5).unwrap();
        assert!(e.is_rotation_invariant(4) && e.is_rotation_invariant(2));
        assert!(!e.is_rotation_invariant(5) && !e.is_radial());
        assert!(!Expr::parse("x1 + absx", 5).unwrap().is_rotation_invariant(4));
        assert!(Expr::parse("rho_3 * absx", 3).unwrap().is_radial());
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-x1^2 + 2*x2/4 - 3", 3).unwrap();
        let v = e.value(&[3.0, 2.0, 0.0]);
        assert!((v - (-9.0 + 1.0 - 3.0)).abs() < 1e-14);
        let e = Expr::parse("2^-1", 3).unwrap();
        assert_eq!(e.value(&[1.0, 1.0, 1.0]), 0.5);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("exp(log(absx)) * cos(pi) + sqrt(rho_2^2)", 3).unwrap();
        let x = [3.0, 4.0, 12.0];
        assert!((e.value(&x) - (-13.0 + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn green_vanishes_on_unit_sphere() {
        let e = Expr::parse("green", 4).unwrap();
        assert!(e.value(&[0.0, 1.0, 0.0, 0.0]).abs() < 1e-15);
        let half = e.value(&[0.5, 0.0, 0.0, 0.0]);
        assert!((half - 3.0 / (4.0 * PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + foo", 4) {
            Err(Error::Expression { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("x5", 4).is_err());
        assert!(Expr::parse("(1 + 2", 4).is_err());
        assert!(Expr::parse("abs(x1)", 4).is_err());
        assert!(Expr::parse("1 $ 2", 4).is_err());
    }

    #[test]
    fn jet_evaluation_matches_hand_derivative() {
        // u = |x|^{-2}: d/dx1 = -2 x1 |x|^{-4}
        let e = Expr::parse("absx^-2", 4).unwrap();
        let sp = JetSpace::get(4, 2);
        let x = [0.5, 0.2, -0.1, 0.3];
        let u = e.eval(&Jet::coordinates(&sp, &x));
        let r2: f64 = x.iter().map(|v| v * v).sum();
        assert!((u.d1(0) + 2.0 * x[0] / (r2 * r2)).abs() < 1e-12);
    }
}
