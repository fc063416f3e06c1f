//! Closed-form scalar expressions for problem definitions.
//!
//! Right-hand sides f(x,y,u,p,q), weight functions ψ(t), boundary traces and
//! Rassias weights are all supplied as strings in this small language:
//! numeric literals, declared variables, `+ - * / ^`, unary minus, and a
//! fixed function catalog. Precedence from loosest to tightest:
//!
//! | level | operators        | associativity |
//! |-------|------------------|---------------|
//! | 1     | binary `+` `-`   | left          |
//! | 2     | `*` `/`          | left          |
//! | 3     | unary `-`        | prefix        |
//! | 4     | `^`              | right         |
//!
//! So `-x^2` parses as `-(x^2)` and `2^3^2` as `2^(3^2)`. Parsing is a
//! hand-rolled Pratt loop over a byte-offset token stream, which keeps error
//! positions exact.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` expects {expected} argument(s), got {got} (offset {offset})")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        offset: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("environment binds {got} values but the expression declares {expected} variables")]
    EnvSize { expected: usize, got: usize },
    #[error("{0}")]
    Variables(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Atan,
    Tanh,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "atan" => Func::Atan,
            "tanh" => Func::Tanh,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
            Func::Tanh => "tanh",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression over a fixed, ordered set of variables.
///
/// Immutable after parsing; `eval` is reentrant and the value can be shared
/// freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
    source: String,
}

pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        vars,
        end: src.len(),
    };
    let root = p.expr(0)?;
    if let Some(tok) = p.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            msg: format!("unexpected `{}`", tok.text()),
        });
    }
    Ok(Expr {
        root,
        vars: vars.iter().map(|s| s.to_string()).collect(),
        source: src.to_string(),
    })
}

impl Expr {
    /// Evaluates with `env[i]` bound to the i-th declared variable.
    ///
    /// Domain violations (ln of a nonpositive value, square root of a
    /// negative, division by zero, non-finite intermediates) surface as
    /// errors rather than silent NaN/inf.
    pub fn eval(&self, env: &[f64]) -> Result<f64, EvalError> {
        if env.len() < self.vars.len() {
            return Err(EvalError::EnvSize {
                expected: self.vars.len(),
                got: env.len(),
            });
        }
        eval_node(&self.root, env)
    }

    /// Canonical fully-parenthesized rendering; reparsing it yields a
    /// structurally identical tree.
    pub fn render(&self) -> String {
        let mut out = String::new();
        Self::render_into(&self.root, &self.vars, &mut out);
        out
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// The text this expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Tree and variable-set equality, ignoring the source text the two
    /// expressions were parsed from.
    pub fn structurally_equal(&self, other: &Expr) -> bool {
        self.root == other.root && self.vars == other.vars
    }
}

fn eval_node(node: &Node, env: &[f64]) -> Result<f64, EvalError> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Var(i) => env[*i],
        Node::Neg(inner) => -eval_node(inner, env)?,
        Node::Bin(op, l, r) => {
            let a = eval_node(l, env)?;
            let b = eval_node(r, env)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::Domain("division by zero".into()));
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval_node(&args[0], env)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Ln => {
                    if a <= 0.0 {
                        return Err(EvalError::Domain(format!("ln of nonpositive value {a}")));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(EvalError::Domain(format!("sqrt of negative value {a}")));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
                Func::Atan => a.atan(),
                Func::Tanh => a.tanh(),
                Func::Min => a.min(eval_node(&args[1], env)?),
                Func::Max => a.max(eval_node(&args[1], env)?),
            }
        }
    };
    if !v.is_finite() {
        return Err(EvalError::Domain(format!("non-finite value {v}")));
    }
    Ok(v)
}

// --- lexer ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
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

#[derive(Debug, Clone, PartialEq)]
struct Token {
    kind: TokKind,
    offset: usize,
}

impl Token {
    fn text(&self) -> String {
        match &self.kind {
            TokKind::Num(v) => format!("{v}"),
            TokKind::Ident(s) => s.clone(),
            TokKind::Plus => "+".into(),
            TokKind::Minus => "-".into(),
            TokKind::Star => "*".into(),
            TokKind::Slash => "/".into(),
            TokKind::Caret => "^".into(),
            TokKind::LParen => "(".into(),
            TokKind::RParen => ")".into(),
            TokKind::Comma => ",".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' | b',' => {
                let kind = match c {
                    b'+' => TokKind::Plus,
                    b'-' => TokKind::Minus,
                    b'*' => TokKind::Star,
                    b'/' => TokKind::Slash,
                    b'^' => TokKind::Caret,
                    b'(' => TokKind::LParen,
                    b')' => TokKind::RParen,
                    _ => TokKind::Comma,
                };
                out.push(Token { kind, offset: i });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
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
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    msg: format!("invalid number `{text}`"),
                })?;
                out.push(Token {
                    kind: TokKind::Num(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Token {
                    kind: TokKind::Ident(src[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    msg: format!("unexpected character `{}`", &src[i..i + 1]),
                })
            }
        }
    }
    Ok(out)
}

// --- Pratt parser -----------------------------------------------------

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    end: usize,
}

// Binding powers; `^` binds tighter than unary minus, which binds tighter
// than `*` and `/`.
const BP_ADD: (u8, u8) = (1, 2);
const BP_MUL: (u8, u8) = (3, 4);
const BP_NEG: u8 = 5;
const BP_POW: (u8, u8) = (8, 7);

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn eof_offset(&self) -> usize {
        self.end
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, l_bp, r_bp) = match self.peek().map(|t| &t.kind) {
                Some(TokKind::Plus) => (BinOp::Add, BP_ADD.0, BP_ADD.1),
                Some(TokKind::Minus) => (BinOp::Sub, BP_ADD.0, BP_ADD.1),
                Some(TokKind::Star) => (BinOp::Mul, BP_MUL.0, BP_MUL.1),
                Some(TokKind::Slash) => (BinOp::Div, BP_MUL.0, BP_MUL.1),
                Some(TokKind::Caret) => (BinOp::Pow, BP_POW.0, BP_POW.1),
                _ => break,
            };
            if l_bp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(r_bp)?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.bump().cloned() else {
            return Err(ParseError::Syntax {
                offset: self.eof_offset(),
                msg: "expected an operand, found end of input".into(),
            });
        };
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::Minus => {
                let inner = self.expr(BP_NEG)?;
                Ok(Node::Neg(Box::new(inner)))
            }
            TokKind::LParen => {
                let inner = self.expr(0)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident(name) => self.ident(name, tok.offset),
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                msg: format!("expected an operand, found `{}`", Token {
                    kind: other,
                    offset: tok.offset
                }
                .text()),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        // Declared variables shadow the function catalog.
        if let Some(idx) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(idx));
        }
        if let Some(func) = Func::lookup(&name) {
            match self.peek().map(|t| &t.kind) {
                Some(TokKind::LParen) => {}
                _ => {
                    return Err(ParseError::Syntax {
                        offset,
                        msg: format!("`{name}` is a function and needs arguments"),
                    })
                }
            }
            self.bump(); // (
            let mut args = vec![self.expr(0)?];
            while matches!(self.peek().map(|t| &t.kind), Some(TokKind::Comma)) {
                self.bump();
                args.push(self.expr(0)?);
            }
            self.expect_rparen()?;
            if args.len() != func.arity() {
                return Err(ParseError::Arity {
                    name,
                    expected: func.arity(),
                    got: args.len(),
                    offset,
                });
            }
            return Ok(Node::Call(func, args));
        }
        Err(ParseError::UnknownIdentifier { name, offset })
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Some(t) if t.kind == TokKind::RParen => Ok(()),
            Some(t) => Err(ParseError::Syntax {
                offset: t.offset,
                msg: format!("expected `)`, found `{}`", t.text()),
            }),
            None => Err(ParseError::Syntax {
                offset: self.eof_offset(),
                msg: "expected `)`, found end of input".into(),
            }),
        }
    }
}

// --- rendering --------------------------------------------------------

impl Expr {
    fn render_into(node: &Node, vars: &[String], out: &mut String) {
        match node {
            Node::Num(v) => {
                if *v < 0.0 || v.is_sign_negative() {
                    out.push_str("(-");
                    out.push_str(&format!("{}", -v));
                    out.push(')');
                } else {
                    out.push_str(&format!("{v}"));
                }
            }
            Node::Var(i) => out.push_str(&vars[*i]),
            Node::Neg(inner) => {
                out.push_str("(-");
                Self::render_into(inner, vars, out);
                out.push(')');
            }
            Node::Bin(op, l, r) => {
                out.push('(');
                Self::render_into(l, vars, out);
                out.push_str(match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                    BinOp::Pow => " ^ ",
                });
                Self::render_into(r, vars, out);
                out.push(')');
            }
            Node::Call(f, args) => {
                out.push_str(f.name());
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    Self::render_into(a, vars, out);
                }
                out.push(')');
            }
        }
    }
}

// --- Lipschitz estimation ----------------------------------------------

/// Sampling box for [`estimate_lipschitz`].
#[derive(Debug, Clone, Copy)]
pub struct SampleBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub u: (f64, f64),
    pub p: (f64, f64),
    pub q: (f64, f64),
}

/// Estimates the Lipschitz constant of `f(x, y, u, p, q)` in its last three
/// arguments by sampled difference quotients: pairs share (x, y) and differ
/// in (u, p, q); the quotient is |f(z) - f(z')| / max_i |z_i - z_i'|.
///
/// The result is a lower bound on the true constant and is advisory only —
/// configs normally supply the constant directly. Sampling is driven by the
/// seed, and for a fixed seed the sample set for n₁ < n₂ draws is a prefix of
/// the larger one, so the estimate never decreases as n grows.
pub fn estimate_lipschitz(
    e: &Expr,
    bounds: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if e.vars.len() != 5 {
        return Err(EvalError::Variables(format!(
            "lipschitz estimation expects 5 declared variables (x, y, u, p, q), got {}",
            e.vars.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |range: (f64, f64)| -> f64 {
        if range.0 == range.1 {
            range.0
        } else {
            rng.random_range(range.0..=range.1)
        }
    };
    let mut best = 0.0f64;
    for _ in 0..n {
        let x = draw(bounds.x);
        let y = draw(bounds.y);
        let z = [draw(bounds.u), draw(bounds.p), draw(bounds.q)];
        let z2 = [draw(bounds.u), draw(bounds.p), draw(bounds.q)];
        let denom = z
            .iter()
            .zip(&z2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if denom < 1e-300 {
            continue;
        }
        let f1 = e.eval(&[x, y, z[0], z[1], z[2]])?;
        let f2 = e.eval(&[x, y, z2[0], z2[1], z2[2]])?;
        best = best.max((f1 - f2).abs() / denom);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval1(src: &str, var: &str, value: f64) -> f64 {
        parse(src, &[var]).unwrap().eval(&[value]).unwrap()
    }

    fn eval0(src: &str) -> f64 {
        parse(src, &[]).unwrap().eval(&[]).unwrap()
    }

    #[test]
    fn precedence_table() {
        // (input, expected) with no variables.
        let cases: &[(&str, f64)] = &[
            ("2+3*4", 14.0),
            ("2*3+4", 10.0),
            ("2-3-4", -5.0),
            ("2/4/2", 0.25),
            ("2^3^2", 512.0),
            ("2^2^3", 256.0),
            ("-2^2", -4.0),
            ("(-2)^2", 4.0),
            ("-2*3", -6.0),
            ("2--3", 5.0),
            ("2*-3", -6.0),
            ("2+3*4^2", 50.0),
            ("(2+3)*4", 20.0),
            ("1/2^2", 0.25),
            ("min(1, 2)", 1.0),
            ("max(1, 2)", 2.0),
            ("abs(-3.5)", 3.5),
            ("min(2+3, 4)*2", 8.0),
        ];
        for (src, want) in cases {
            let got = eval0(src);
            assert!(
                (got - want).abs() < 1e-12,
                "{src} evaluated to {got}, want {want}"
            );
        }
    }

    #[test]
    fn smoke_ast_shape() {
        let e = parse("u + sin(x*y)", &["x", "y", "u", "p", "q"]).unwrap();
        assert!(matches!(e.root, Node::Bin(BinOp::Add, _, _)));
    }

    #[test]
    fn variables_and_functions() {
        assert!((eval1("x^2", "x", 3.0) - 9.0).abs() < 1e-15);
        assert!((eval1("ln(t)", "t", 1.0)).abs() < 1e-15);
        assert!((eval1("sin(t)^2 + cos(t)^2", "t", 0.83) - 1.0).abs() < 1e-14);
        assert!((eval1("exp(ln(t))", "t", 2.5) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn error_offsets() {
        let cases: &[(&str, usize)] = &[
            ("x +", 3),
            ("+ x", 0),
            ("x * * y", 4),
            ("(x", 2),
            ("x)", 1),
            ("sin()", 4),   // `)` where an operand is expected
            ("1 + @", 4),
            ("", 0),
        ];
        for (src, want_offset) in cases {
            match parse(src, &["x", "y"]) {
                Err(ParseError::Syntax { offset, .. }) => assert_eq!(
                    offset, *want_offset,
                    "wrong offset for {src:?}"
                ),
                other => panic!("expected syntax error for {src:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_identifier_is_named() {
        match parse("x + foo", &["x"]) {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(
            parse("sin(1, 2)", &[]),
            Err(ParseError::Arity { expected: 1, got: 2, .. })
        ));
        assert!(matches!(
            parse("min(1)", &[]),
            Err(ParseError::Arity { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn eval_domain_errors() {
        assert!(matches!(
            eval_err("ln(t)", 0.0),
            EvalError::Domain(_)
        ));
        assert!(matches!(
            eval_err("ln(t)", -2.0),
            EvalError::Domain(_)
        ));
        assert!(matches!(eval_err("1/t", 0.0), EvalError::Domain(_)));
        assert!(matches!(eval_err("sqrt(t)", -1.0), EvalError::Domain(_)));
        assert!(matches!(eval_err("exp(t)", 1e6), EvalError::Domain(_)));
    }

    fn eval_err(src: &str, t: f64) -> EvalError {
        parse(src, &["t"]).unwrap().eval(&[t]).unwrap_err()
    }

    #[test]
    fn env_size_checked() {
        let e = parse("x + y", &["x", "y"]).unwrap();
        assert!(matches!(
            e.eval(&[1.0]),
            Err(EvalError::EnvSize { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn render_round_trip_hand_cases() {
        for src in [
            "2+3*4",
            "u + sin(x*y)",
            "-x^2",
            "min(x, max(y, 1.5))",
            "x^y^2",
            "1e-3 * x + 2.5E2",
            "(x+y)/(x-2)",
        ] {
            let e = parse(src, &["x", "y", "u"]).unwrap();
            let rendered = e.render();
            let e2 = parse(&rendered, &["x", "y", "u"]).unwrap();
            assert_eq!(e.root, e2.root, "round trip failed for {src:?} -> {rendered:?}");
        }
    }

    #[test]
    fn eval_is_deterministic() {
        let e = parse("sin(x)*exp(y) + x^y", &["x", "y"]).unwrap();
        let a = e.eval(&[0.7, 1.3]).unwrap();
        for _ in 0..10 {
            let b = e.eval(&[0.7, 1.3]).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    fn unit_box() -> SampleBox {
        SampleBox {
            x: (0.0, 1.0),
            y: (0.0, 1.0),
            u: (0.0, 1.0),
            p: (0.0, 1.0),
            q: (0.0, 1.0),
        }
    }

    #[test]
    fn lipschitz_identity_in_u() {
        let e = parse("u", &["x", "y", "u", "p", "q"]).unwrap();
        let l = estimate_lipschitz(&e, &unit_box(), 500, 42).unwrap();
        assert!((l - 1.0).abs() < 1e-9, "got {l}");
    }

    #[test]
    fn lipschitz_no_dependence() {
        let e = parse("x+y", &["x", "y", "u", "p", "q"]).unwrap();
        let l = estimate_lipschitz(&e, &unit_box(), 500, 42).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn lipschitz_sin_u_on_0_pi() {
        let mut b = unit_box();
        b.u = (0.0, std::f64::consts::PI);
        let e = parse("sin(u)", &["x", "y", "u", "p", "q"]).unwrap();
        let l = estimate_lipschitz(&e, &b, 10_000, 7).unwrap();
        assert!(l > 0.99 && l <= 1.0 + 1e-12, "got {l}");
    }

    #[test]
    fn lipschitz_nondecreasing_in_n() {
        let e = parse("sin(u)*q + p^2", &["x", "y", "u", "p", "q"]).unwrap();
        let mut last = 0.0;
        for n in [10, 100, 1000, 5000] {
            let l = estimate_lipschitz(&e, &unit_box(), n, 99).unwrap();
            assert!(l >= last, "estimate decreased: {l} < {last}");
            last = l;
        }
    }

    // Random AST generator for the structural round-trip property.
    fn arb_node(depth: u32) -> BoxedStrategy<Node> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Node::Num),
            (0usize..3).prop_map(Node::Var),
        ];
        leaf.prop_recursive(depth, 64, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|n| Node::Neg(Box::new(n))),
                (inner.clone(), inner.clone(), 0u8..5).prop_map(|(a, b, op)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]
                        [op as usize];
                    Node::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), 0u8..4).prop_map(|(a, f)| {
                    let f = [Func::Sin, Func::Cos, Func::Exp, Func::Abs][f as usize];
                    Node::Call(f, vec![a])
                }),
                (inner.clone(), inner).prop_map(|(a, b)| Node::Call(Func::Min, vec![a, b])),
            ]
        })
        .boxed()
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(root in arb_node(4)) {
            let vars = vec!["x".to_string(), "y".to_string(), "u".to_string()];
            let e = Expr { root, vars, source: String::new() };
            let rendered = e.render();
            let e2 = parse(&rendered, &["x", "y", "u"]).unwrap();
            prop_assert_eq!(&e.root, &e2.root);
        }
    }
}
