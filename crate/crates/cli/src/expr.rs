//! Initial-data expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := number | 'x' | 'pi' | 'sin' '(' expr ')' | 'cos' '(' expr ')'
//!         | '(' expr ')' | '-' factor
//! ```
//!
//! Periodicity is decided structurally: every `sin`/`cos` argument must be
//! affine in `x` with slope an integer multiple of `2 pi`, and `x` may not
//! appear anywhere else.

use std::f64::consts::PI;
use std::fmt;

use mudp_core::{PeriodicFunction, Result as CoreResult};

/// Nesting beyond this is rejected rather than risking the stack.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: expected {expected}, found {found}")]
    Syntax { pos: usize, expected: String, found: String },
    #[error("non-periodic expression at position {pos}: {reason}")]
    NonPeriodic { pos: usize, reason: String },
}

impl ExprError {
    /// Character offset of the offending token (0-based).
    pub fn position(&self) -> usize {
        match self {
            Self::Syntax { pos, .. } | Self::NonPeriodic { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    X,
    Pi,
    Call(Func, Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

/// A node with the character offset where it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub pos: usize,
    pub node: Node,
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match &self.node {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Pi => PI,
            Node::Call(Func::Sin, a) => a.eval(x).sin(),
            Node::Call(Func::Cos, a) => a.eval(x).cos(),
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::X => write!(f, "x"),
            Node::Pi => write!(f, "pi"),
            Node::Call(Func::Sin, a) => write!(f, "sin({a})"),
            Node::Call(Func::Cos, a) => write!(f, "cos({a})"),
            Node::Neg(a) => write!(f, "-({a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

/// Parsed and periodicity-checked initial datum.
#[derive(Debug, Clone, PartialEq)]
pub struct InitExpr {
    pub source: String,
    pub tree: Expr,
}

impl InitExpr {
    pub fn sample(&self, n: usize) -> CoreResult<PeriodicFunction> {
        PeriodicFunction::from_fn(n, |x| self.tree.eval(x))
    }
}

pub fn parse_init(source: &str) -> Result<InitExpr, ExprError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, at: 0, depth: 0 };
    let tree = p.expr()?;
    let tok = p.peek();
    if tok.kind != Tok::End {
        return Err(ExprError::Syntax {
            pos: tok.pos,
            expected: "operator or end of input".into(),
            found: tok.kind.describe(),
        });
    }
    match shape(&tree)? {
        Shape::Const(_) | Shape::Periodic => Ok(InitExpr { source: source.to_string(), tree }),
        Shape::Affine { .. } => Err(ExprError::NonPeriodic {
            pos: first_x(&tree).unwrap_or(tree.pos),
            reason: "'x' may only appear inside a sin/cos argument".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v:?}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    kind: Tok,
    pos: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(kind) = simple {
            out.push(Token { kind, pos: start });
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent only if digits follow, so "2e" is not swallowed
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                expected: "a number".into(),
                found: format!("'{text}'"),
            })?;
            if !value.is_finite() {
                return Err(ExprError::Syntax {
                    pos: start,
                    expected: "a finite number".into(),
                    found: format!("'{text}'"),
                });
            }
            out.push(Token { kind: Tok::Num(value), pos: start });
        } else if c.is_alphabetic() {
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push(Token { kind: Tok::Ident(chars[start..i].iter().collect()), pos: start });
        } else {
            return Err(ExprError::Syntax {
                pos: start,
                expected: "number, 'x', 'pi', 'sin', 'cos', operator or parenthesis".into(),
                found: format!("'{c}'"),
            });
        }
    }
    out.push(Token { kind: Tok::End, pos: chars.len() });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.kind != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, kind: Tok, what: &str) -> Result<(), ExprError> {
        let t = self.bump();
        if t.kind == kind {
            Ok(())
        } else {
            Err(ExprError::Syntax { pos: t.pos, expected: what.into(), found: t.kind.describe() })
        }
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ExprError::Syntax {
                pos: self.peek().pos,
                expected: format!("nesting depth at most {MAX_DEPTH}"),
                found: "deeper nesting".into(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = self.peek().kind.clone();
            if !matches!(op, Tok::Plus | Tok::Minus) {
                break;
            }
            self.bump();
            let rhs = self.term()?;
            let pos = lhs.pos;
            let node = if op == Tok::Plus {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
            lhs = Expr { pos, node };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        while self.peek().kind == Tok::Star {
            self.bump();
            let rhs = self.factor()?;
            let pos = lhs.pos;
            lhs = Expr { pos, node: Node::Mul(Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        self.enter()?;
        let t = self.bump();
        let node = match t.kind {
            Tok::Num(v) => Node::Num(v),
            Tok::Minus => Node::Neg(Box::new(self.factor()?)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.depth -= 1;
                return Ok(Expr { pos: t.pos, node: inner.node });
            }
            Tok::Ident(ref name) => match name.as_str() {
                "x" => Node::X,
                "pi" => Node::Pi,
                "sin" | "cos" => {
                    let func = if name == "sin" { Func::Sin } else { Func::Cos };
                    self.expect(Tok::LParen, &format!("'(' after '{name}'"))?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    Node::Call(func, Box::new(arg))
                }
                _ => {
                    return Err(ExprError::Syntax {
                        pos: t.pos,
                        expected: "'x', 'pi', 'sin' or 'cos'".into(),
                        found: t.kind.describe(),
                    })
                }
            },
            other => {
                return Err(ExprError::Syntax {
                    pos: t.pos,
                    expected: "number, 'x', 'pi', function, '(' or '-'".into(),
                    found: other.describe(),
                })
            }
        };
        self.depth -= 1;
        Ok(Expr { pos: t.pos, node })
    }
}

/// Structural class of a subexpression as a function of `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Const(f64),
    /// `a x + b` with `a != 0`.
    Affine { a: f64, b: f64 },
    /// Built from 1-periodic pieces and constants.
    Periodic,
}

fn affine(a: f64, b: f64) -> Shape {
    if a == 0.0 {
        Shape::Const(b)
    } else {
        Shape::Affine { a, b }
    }
}

fn non_periodic(pos: usize, reason: &str) -> ExprError {
    ExprError::NonPeriodic { pos, reason: reason.to_string() }
}

fn shape(e: &Expr) -> Result<Shape, ExprError> {
    use Shape::*;
    Ok(match &e.node {
        Node::Num(v) => Const(*v),
        Node::Pi => Const(PI),
        Node::X => Affine { a: 1.0, b: 0.0 },
        Node::Neg(a) => match shape(a)? {
            Const(c) => Const(-c),
            Affine { a, b } => Affine { a: -a, b: -b },
            Periodic => Periodic,
        },
        Node::Add(l, r) | Node::Sub(l, r) => {
            let sign = if matches!(e.node, Node::Add(..)) { 1.0 } else { -1.0 };
            match (shape(l)?, shape(r)?) {
                (Const(p), Const(q)) => Const(p + sign * q),
                (Const(p), Affine { a, b }) => affine(sign * a, p + sign * b),
                (Affine { a, b }, Const(q)) => affine(a, b + sign * q),
                (Affine { a: a1, b: b1 }, Affine { a: a2, b: b2 }) => affine(a1 + sign * a2, b1 + sign * b2),
                (Periodic, Periodic) | (Periodic, Const(_)) | (Const(_), Periodic) => Periodic,
                (Affine { .. }, Periodic) | (Periodic, Affine { .. }) => {
                    return Err(non_periodic(
                        first_x(e).unwrap_or(e.pos),
                        "'x' may only appear inside a sin/cos argument",
                    ))
                }
            }
        }
        Node::Mul(l, r) => match (shape(l)?, shape(r)?) {
            (Const(p), Const(q)) => Const(p * q),
            (Const(p), Affine { a, b }) | (Affine { a, b }, Const(p)) => affine(p * a, p * b),
            (Periodic, Periodic) | (Periodic, Const(_)) | (Const(_), Periodic) => Periodic,
            _ => {
                return Err(non_periodic(
                    first_x(e).unwrap_or(e.pos),
                    "product with 'x' outside a sin/cos argument is not periodic",
                ))
            }
        },
        Node::Call(func, arg) => match shape(arg)? {
            Const(c) => Const(match func {
                Func::Sin => c.sin(),
                Func::Cos => c.cos(),
            }),
            Affine { a, .. } => {
                let k = a / (2.0 * PI);
                if (k - k.round()).abs() > 1e-9 * k.abs().max(1.0) {
                    return Err(non_periodic(
                        arg.pos,
                        &format!("argument slope is {k} * 2 pi; only integer multiples of 2 pi are 1-periodic"),
                    ));
                }
                Periodic
            }
            Periodic => Periodic,
        },
    })
}

fn first_x(e: &Expr) -> Option<usize> {
    match &e.node {
        Node::X => Some(e.pos),
        Node::Num(_) | Node::Pi | Node::Call(..) => None,
        Node::Neg(a) => first_x(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => first_x(a).or_else(|| first_x(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_datum_parses_and_samples() {
        let e = parse_init("0.2 + 0.05*cos(2*pi*x)").unwrap();
        let f = e.sample(64).unwrap();
        for (j, v) in f.values().iter().enumerate() {
            let x = j as f64 / 64.0;
            assert!((v - (0.2 + 0.05 * (2.0 * PI * x).cos())).abs() <= 1e-15);
        }
    }

    #[test]
    fn bare_x_is_rejected() {
        let err = parse_init("x").unwrap_err();
        assert!(matches!(err, ExprError::NonPeriodic { pos: 0, .. }), "{err}");
        let err = parse_init("1 + sin(2*pi*x) + 3*x").unwrap_err();
        assert_eq!(err.position(), 20);
    }

    #[test]
    fn half_integer_frequency_is_rejected() {
        let err = parse_init("sin(3*pi*x)").unwrap_err();
        assert!(matches!(err, ExprError::NonPeriodic { pos: 4, .. }), "{err}");
    }

    #[test]
    fn accepted_shapes() {
        for s in [
            "0.3",
            "-pi",
            "sin(2*pi*x)*cos(4*pi*x + 1)",
            "cos(2*pi*(x + 0.25))",
            "sin(-2*pi*x)",
            "sin(2*pi*x - 2*pi*x + 1)",
            "cos(x*2*pi*3) - -1",
            "sin(sin(2*pi*x))",
            "1.5e-2*cos(6.283185307179586*x)",
        ] {
            assert!(parse_init(s).is_ok(), "{s}: {:?}", parse_init(s));
        }
    }

    #[test]
    fn rejected_shapes_carry_positions() {
        for (s, pos) in [
            ("x*x", 0),
            ("sin(x)", 4),
            ("sin(2*pi*x*x)", 9),
            ("2 +", 3),
            ("sin 2", 4),
            ("tan(x)", 0),
            ("(1", 2),
            ("1)", 1),
            ("1 $ 2", 2),
            ("1e999", 0),
            ("", 0),
            ("sin(2*pi*x) * x", 14),
        ] {
            let e = parse_init(s).unwrap_err();
            assert_eq!(e.position(), pos, "{s}: {e}");
        }
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let s = "(".repeat(100_000);
        assert!(parse_init(&s).is_err());
        let s = "-".repeat(100_000) + "1";
        assert!(parse_init(&s).is_err());
    }

    #[test]
    fn precedence() {
        let e = parse_init("1 - 2 - 3 + 2*3*-1").unwrap();
        assert_eq!(e.tree.eval(0.0), -10.0);
    }
}
