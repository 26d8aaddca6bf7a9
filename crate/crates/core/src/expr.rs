//! Expression strings for scalar fields on the chart.
//!
//! Grammar (configs and CLI flags):
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' atom)?
//! atom   := NUMBER | IDENT | '(' expr ')' | FUNC '(' expr ')' | '-' atom
//! ```
//! `IDENT` is one of the coordinates `x1, x2, y1, y2` or a config-bound
//! named constant; `FUNC` is one of `exp, log, sin, cos, sqrt`.

use crate::field::{ConstTable, Point4};
use crate::jet::{Jet, JetError};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdent { name: String, pos: usize },
    #[error(transparent)]
    Eval(#[from] JetError),
    #[error("unbound constant `{0}`")]
    UnboundConst(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree over literals, the four coordinates, named constants,
/// arithmetic, and the unary functions of the grammar.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Num(f64),
    /// Coordinate index 0..4 for (x1, x2, y1, y2).
    Coord(usize),
    Const(String),
    Add(Box<ScalarExpr>, Box<ScalarExpr>),
    Sub(Box<ScalarExpr>, Box<ScalarExpr>),
    Mul(Box<ScalarExpr>, Box<ScalarExpr>),
    Div(Box<ScalarExpr>, Box<ScalarExpr>),
    /// Power with a literal exponent (the common case, folded at parse).
    Pow(Box<ScalarExpr>, f64),
    /// Power with a general exponent expression.
    PowE(Box<ScalarExpr>, Box<ScalarExpr>),
    Neg(Box<ScalarExpr>),
    Apply(Func, Box<ScalarExpr>),
}

pub const COORD_NAMES: [&str; 4] = ["x1", "x2", "y1", "y2"];

impl ScalarExpr {
    pub fn num(v: f64) -> ScalarExpr {
        ScalarExpr::Num(v)
    }

    pub fn coord(i: usize) -> ScalarExpr {
        assert!(i < 4);
        ScalarExpr::Coord(i)
    }

    pub fn node_count(&self) -> usize {
        match self {
            ScalarExpr::Num(_) | ScalarExpr::Coord(_) | ScalarExpr::Const(_) => 1,
            ScalarExpr::Add(a, b)
            | ScalarExpr::Sub(a, b)
            | ScalarExpr::Mul(a, b)
            | ScalarExpr::Div(a, b)
            | ScalarExpr::PowE(a, b) => 1 + a.node_count() + b.node_count(),
            ScalarExpr::Pow(a, _) | ScalarExpr::Neg(a) | ScalarExpr::Apply(_, a) => {
                1 + a.node_count()
            }
        }
    }

    /// Names of constants appearing in the tree.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_constants(&mut out);
        out
    }

    fn collect_constants(&self, out: &mut BTreeSet<String>) {
        match self {
            ScalarExpr::Const(n) => {
                out.insert(n.clone());
            }
            ScalarExpr::Add(a, b)
            | ScalarExpr::Sub(a, b)
            | ScalarExpr::Mul(a, b)
            | ScalarExpr::Div(a, b)
            | ScalarExpr::PowE(a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
            ScalarExpr::Pow(a, _) | ScalarExpr::Neg(a) | ScalarExpr::Apply(_, a) => {
                a.collect_constants(out)
            }
            _ => {}
        }
    }

    /// Evaluate as a jet of the requested order at `p`.
    pub fn eval_jet(
        &self,
        p: &Point4,
        order: usize,
        consts: &ConstTable,
    ) -> Result<Jet, ExprError> {
        Ok(match self {
            ScalarExpr::Num(v) => Jet::constant(order, *v),
            ScalarExpr::Coord(i) => Jet::variable(order, *i, p.coord(*i)),
            ScalarExpr::Const(name) => Jet::constant(
                order,
                consts
                    .get(name)
                    .ok_or_else(|| ExprError::UnboundConst(name.clone()))?,
            ),
            ScalarExpr::Add(a, b) => a.eval_jet(p, order, consts)?.add(&b.eval_jet(p, order, consts)?),
            ScalarExpr::Sub(a, b) => a.eval_jet(p, order, consts)?.sub(&b.eval_jet(p, order, consts)?),
            ScalarExpr::Mul(a, b) => a.eval_jet(p, order, consts)?.mul(&b.eval_jet(p, order, consts)?),
            ScalarExpr::Div(a, b) => a
                .eval_jet(p, order, consts)?
                .div(&b.eval_jet(p, order, consts)?)?,
            ScalarExpr::Pow(a, e) => {
                let base = a.eval_jet(p, order, consts)?;
                pow_jet(&base, *e)?
            }
            ScalarExpr::PowE(a, b) => {
                let base = a.eval_jet(p, order, consts)?;
                let ex = b.eval_jet(p, order, consts)?;
                let nonconst = ex.sub(&Jet::constant(order, ex.value())).max_abs_coeff();
                if nonconst == 0.0 {
                    pow_jet(&base, ex.value())?
                } else {
                    // variable exponent: b^e = exp(e log b)
                    ex.mul(&base.ln()?).exp()
                }
            }
            ScalarExpr::Neg(a) => a.eval_jet(p, order, consts)?.neg(),
            ScalarExpr::Apply(f, a) => {
                let x = a.eval_jet(p, order, consts)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => x.ln()?,
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => x.sqrt()?,
                }
            }
        })
    }

    /// Plain value evaluation (order-0 jet).
    pub fn eval(&self, p: &Point4, consts: &ConstTable) -> Result<f64, ExprError> {
        Ok(self.eval_jet(p, 0, consts)?.value())
    }
}

fn pow_jet(base: &Jet, e: f64) -> Result<Jet, JetError> {
    if e.fract() == 0.0 && e.abs() < 1e15 {
        base.powi(e as i64)
    } else {
        base.powf(e)
    }
}

// operator sugar for programmatic construction (catalog, tests)
impl std::ops::Add for ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: ScalarExpr) -> ScalarExpr {
        ScalarExpr::Add(Box::new(self), Box::new(rhs))
    }
}
impl std::ops::Sub for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        ScalarExpr::Sub(Box::new(self), Box::new(rhs))
    }
}
impl std::ops::Mul for ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: ScalarExpr) -> ScalarExpr {
        ScalarExpr::Mul(Box::new(self), Box::new(rhs))
    }
}
impl std::ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::Neg(Box::new(self))
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl ScalarExpr {
    fn prec(&self) -> u8 {
        match self {
            ScalarExpr::Add(..) | ScalarExpr::Sub(..) => 1,
            ScalarExpr::Mul(..) | ScalarExpr::Div(..) => 2,
            ScalarExpr::Neg(..) => 3,
            ScalarExpr::Pow(..) | ScalarExpr::PowE(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        let p = self.prec();
        let parens = p < outer;
        if parens {
            write!(f, "(")?;
        }
        match self {
            ScalarExpr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")?;
                } else {
                    write!(f, "{v}")?;
                }
            }
            ScalarExpr::Coord(i) => write!(f, "{}", COORD_NAMES[*i])?,
            ScalarExpr::Const(n) => write!(f, "{n}")?,
            ScalarExpr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            ScalarExpr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            ScalarExpr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            ScalarExpr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            ScalarExpr::Pow(a, e) => {
                a.fmt_prec(f, 5)?;
                if *e < 0.0 {
                    write!(f, "^({e})")?;
                } else {
                    write!(f, "^{e}")?;
                }
            }
            ScalarExpr::PowE(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^")?;
                b.fmt_prec(f, 5)?;
            }
            ScalarExpr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 4)?;
            }
            ScalarExpr::Apply(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

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
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let save = i;
                    let mut k = i + 1;
                    if k < bytes.len() && matches!(bytes[k] as char, '+' | '-') {
                        k += 1;
                    }
                    if k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                        i = k;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    msg: format!("invalid number `{s}`"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] as char == '_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ExprError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    known: &'a dyn Fn(&str) -> bool,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<ScalarExpr, ExprError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    e = ScalarExpr::Add(Box::new(e), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    e = ScalarExpr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ExprError> {
        let mut e = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    e = ScalarExpr::Mul(Box::new(e), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    e = ScalarExpr::Div(Box::new(e), Box::new(self.factor()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn factor(&mut self) -> Result<ScalarExpr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let e = self.atom()?;
            Ok(match e {
                ScalarExpr::Num(v) => ScalarExpr::Pow(Box::new(base), v),
                ScalarExpr::Neg(inner) if matches!(*inner, ScalarExpr::Num(_)) => {
                    if let ScalarExpr::Num(v) = *inner {
                        ScalarExpr::Pow(Box::new(base), -v)
                    } else {
                        unreachable!()
                    }
                }
                other => ScalarExpr::PowE(Box::new(base), Box::new(other)),
            })
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<ScalarExpr, ExprError> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(ScalarExpr::Num(v)),
            Some(Tok::Minus) => Ok(ScalarExpr::Neg(Box::new(self.atom()?))),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(ExprError::Syntax {
                        pos: self.here(),
                        msg: "expected `)`".into(),
                    }),
                }
            }
            Some(Tok::Ident(name)) => {
                if let Some(f) = Func::from_name(&name) {
                    match self.bump() {
                        Some(Tok::LParen) => {}
                        _ => {
                            return Err(ExprError::Syntax {
                                pos: self.here(),
                                msg: format!("expected `(` after `{name}`"),
                            })
                        }
                    }
                    let arg = self.expr()?;
                    match self.bump() {
                        Some(Tok::RParen) => Ok(ScalarExpr::Apply(f, Box::new(arg))),
                        _ => Err(ExprError::Syntax {
                            pos: self.here(),
                            msg: "expected `)`".into(),
                        }),
                    }
                } else if let Some(i) = COORD_NAMES.iter().position(|c| *c == name) {
                    Ok(ScalarExpr::Coord(i))
                } else if (self.known)(&name) {
                    Ok(ScalarExpr::Const(name))
                } else {
                    Err(ExprError::UnknownIdent { name, pos })
                }
            }
            _ => Err(ExprError::Syntax {
                pos,
                msg: "expected a number, identifier, or `(`".into(),
            }),
        }
    }
}

/// Parse an expression; identifiers other than the coordinates must pass
/// the `known_const` predicate.
pub fn parse_expr_with(
    text: &str,
    known_const: &dyn Fn(&str) -> bool,
) -> Result<ScalarExpr, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        known: known_const,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ExprError::Syntax {
            pos: p.here(),
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}

/// Parse with no named constants in scope.
pub fn parse_expr(text: &str) -> Result<ScalarExpr, ExprError> {
    parse_expr_with(text, &|_| false)
}

/// Parse against a constant table.
pub fn parse_expr_consts(text: &str, consts: &ConstTable) -> Result<ScalarExpr, ExprError> {
    parse_expr_with(text, &|name| consts.contains(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ConstTable, Point4};

    #[test]
    fn node_counts() {
        let e = parse_expr("2*exp(x1) + y1^2").unwrap();
        assert_eq!(e.node_count(), 7);
    }

    #[test]
    fn unknown_identifier_rejected() {
        match parse_expr("x3") {
            Err(ExprError::UnknownIdent { name, .. }) => assert_eq!(name, "x3"),
            other => panic!("expected UnknownIdent, got {other:?}"),
        }
        assert!(parse_expr("sqrt(exp(2*x1)+a1)").is_err());
        let mut consts = ConstTable::new();
        consts.set("a1", 1.0);
        assert!(parse_expr_consts("sqrt(exp(2*x1)+a1)", &consts).is_ok());
    }

    #[test]
    fn print_parse_roundtrip() {
        let samples = [
            "2*exp(x1) + y1^2",
            "-x1 + (x2 - y1)*y2",
            "sqrt(exp(2*x1) + 1) / (1 + x2^2)",
            "sin(x1)*cos(x2) - x1^3/3",
            "x1^(-2)",
            "1e-3*x1 + 2.5E2",
        ];
        let p = Point4::new(0.3, -0.2, 0.7, 1.1);
        let consts = ConstTable::new();
        for s in samples {
            let e = parse_expr(s).unwrap();
            let printed = e.to_string();
            let e2 = parse_expr(&printed).unwrap();
            assert_eq!(
                e2.to_string(),
                printed,
                "print/parse not stable for `{s}`"
            );
            let a = e.eval(&p, &consts).unwrap();
            let b = e2.eval(&p, &consts).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_errors_at_eval() {
        let e = parse_expr("log(x1)").unwrap();
        let consts = ConstTable::new();
        assert!(e.eval(&Point4::new(-1.0, 0.0, 0.0, 0.0), &consts).is_err());
        assert!(e.eval(&Point4::new(2.0, 0.0, 0.0, 0.0), &consts).is_ok());
    }

    #[test]
    fn jet_of_polynomial() {
        let e = parse_expr("x1^2").unwrap();
        let consts = ConstTable::new();
        let j = e
            .eval_jet(&Point4::new(2.0, 0.0, 0.0, 0.0), 2, &consts)
            .unwrap();
        assert_eq!(j.value(), 4.0);
        assert_eq!(j.coeff([1, 0, 0, 0]), 4.0);
        assert_eq!(j.coeff([2, 0, 0, 0]), 1.0);
    }
}
