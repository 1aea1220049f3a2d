//! The arithmetic expression mini-grammar used in configs.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] integer)?
//! atom   := integer | identifier | '(' expr ')'
//! ```
//!
//! Precedence `^` > unary `-` > `* /` > `+ -`, all binary operators left
//! associative. Identifiers match `[a-zA-Z][a-zA-Z0-9_]*` and are bound
//! to tower generators; `t` is reserved for the base uniformizer in
//! equal characteristic. Exponents are integer literals.

use std::collections::BTreeMap;
use std::fmt;

use num::BigInt;
use thiserror::Error;

use crate::tower::{BaseKind, Coeff, Tower, TowerElement, TowerError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbound identifier '{0}'")]
    Unbound(String),
    #[error(transparent)]
    Tower(Box<TowerError>),
}

impl From<TowerError> for ExprError {
    fn from(e: TowerError) -> Self {
        ExprError::Tower(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(BigInt),
    Ident(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            let n = self.integer()?;
            let n: i64 = n
                .try_into()
                .map_err(|_| self.err("exponent out of range"))?;
            Ok(Expr::Pow(Box::new(base), if neg { -n } else { n }))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => Ok(Expr::Int(self.integer()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric()
                        || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.bytes[start..self.pos])
                    .expect("ascii identifier");
                Ok(Expr::Ident(name.to_string()))
            }
            Some(_) => Err(self.err("expected a literal, identifier, or '('")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<BigInt, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        Ok(s.parse().expect("digit string parses"))
    }
}

/// Exact evaluation over a tower; identifiers resolve to stage
/// generators, `t` to the uniformizer in equal characteristic.
pub fn evaluate(e: &Expr, tower: &Tower) -> Result<TowerElement, ExprError> {
    evaluate_with(e, tower, &BTreeMap::new())
}

pub fn evaluate_with(
    e: &Expr,
    tower: &Tower,
    bindings: &BTreeMap<String, TowerElement>,
) -> Result<TowerElement, ExprError> {
    Ok(match e {
        Expr::Int(n) => constant_bigint(tower, n),
        Expr::Ident(name) => {
            if let Some(b) = bindings.get(name) {
                b.clone()
            } else if let Some(idx) = tower.stage_named(name) {
                tower.generator(idx + 1)
            } else if name == "t" && matches!(tower.base().kind, BaseKind::Equal { .. }) {
                TowerElement::from_coeff(Coeff::uniformizer(tower.base()))
            } else {
                return Err(ExprError::Unbound(name.clone()));
            }
        }
        Expr::Neg(a) => tower.neg(&evaluate_with(a, tower, bindings)?),
        Expr::Add(a, b) => tower.add(
            &evaluate_with(a, tower, bindings)?,
            &evaluate_with(b, tower, bindings)?,
        ),
        Expr::Sub(a, b) => tower.sub(
            &evaluate_with(a, tower, bindings)?,
            &evaluate_with(b, tower, bindings)?,
        ),
        Expr::Mul(a, b) => tower.mul(
            &evaluate_with(a, tower, bindings)?,
            &evaluate_with(b, tower, bindings)?,
        ),
        Expr::Div(a, b) => tower.div(
            &evaluate_with(a, tower, bindings)?,
            &evaluate_with(b, tower, bindings)?,
        )?,
        Expr::Pow(a, n) => tower.pow_int(&evaluate_with(a, tower, bindings)?, *n)?,
    })
}

fn constant_bigint(tower: &Tower, n: &BigInt) -> TowerElement {
    match tower.base().kind {
        BaseKind::Mixed { .. } => {
            TowerElement::from_coeff(Coeff::Rat(crate::Rat::from(n.clone())))
        }
        BaseKind::Equal { p } => {
            use num::Integer;
            let r = n.mod_floor(&BigInt::from(p));
            let r: i64 = r.try_into().expect("reduced residue fits");
            tower.constant_int(r)
        }
    }
}

// Printing with minimal parentheses; parse-print round trips preserve
// the tree.

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Int(..) | Expr::Ident(..) => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if prec(e) < min {
                write!(f, "({})", e)
            } else {
                write!(f, "{}", e)
            }
        }
        match self {
            Expr::Int(n) => write!(f, "{}", n),
            Expr::Ident(s) => write!(f, "{}", s),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, n) => {
                wrap(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^-{}", -n)
                } else {
                    write!(f, "^{}", n)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;
    use crate::tower::{BaseField, RelationKind, Val};

    #[test]
    fn parse_rational_literal() {
        // unary minus binds tighter than '/': (-1)/2, same value
        let e = parse("-1/2").unwrap();
        assert_eq!(
            e,
            Expr::Div(
                Box::new(Expr::Neg(Box::new(Expr::Int(1.into())))),
                Box::new(Expr::Int(2.into()))
            )
        );
    }

    #[test]
    fn parse_sum_of_reciprocals() {
        let e = parse("1/a_1 + 1/a_2").unwrap();
        assert!(matches!(e, Expr::Add(..)));
        let printed = e.to_string();
        assert_eq!(parse(&printed).unwrap(), e);
    }

    #[test]
    fn parse_relation_lhs() {
        let e = parse("a_1^2 - a_1").unwrap();
        assert_eq!(
            e,
            Expr::Sub(
                Box::new(Expr::Pow(Box::new(Expr::Ident("a_1".into())), 2)),
                Box::new(Expr::Ident("a_1".into()))
            )
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(
            parse("1 + 2*3").unwrap(),
            Expr::Add(
                Box::new(Expr::Int(1.into())),
                Box::new(Expr::Mul(
                    Box::new(Expr::Int(2.into())),
                    Box::new(Expr::Int(3.into()))
                ))
            )
        );
        // unary minus under a power: -a^2 = -(a^2)
        assert_eq!(
            parse("-a^2").unwrap(),
            Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Ident("a".into())), 2)))
        );
    }

    #[test]
    fn syntax_error_position() {
        match parse("1 + ") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    fn sqrt2_tower() -> Tower {
        Tower::new(BaseField::mixed(2))
            .push_stage(
                "a_1",
                RelationKind::PthRoot,
                TowerElement::from_coeff(Coeff::Rat(crate::rat_int(2))),
                rat(1, 2),
            )
            .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let t = sqrt2_tower();
        let sq = evaluate(&parse("a_1*a_1").unwrap(), &t).unwrap();
        assert_eq!(sq, t.constant_int(2));

        // (1+a_1)^2 against repeated multiplication
        let e = evaluate(&parse("(1+a_1)^2").unwrap(), &t).unwrap();
        let one_plus = t.add(&t.constant_int(1), &t.generator(1));
        assert_eq!(e, t.mul(&one_plus, &one_plus));

        let te = Tower::new(BaseField::equal(3));
        let tt = evaluate(&parse("t").unwrap(), &te).unwrap();
        assert_eq!(te.valuation(&tt).unwrap(), Val::Finite(crate::rat_int(1)));

        assert!(matches!(
            evaluate(&parse("x + 1").unwrap(), &t),
            Err(ExprError::Unbound(_))
        ));
        assert!(matches!(
            evaluate(&parse("1/(a_1 - a_1)").unwrap(), &t),
            Err(ExprError::Tower(_))
        ));
    }

    #[test]
    fn print_parse_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        fn gen(rng: &mut rand_chacha::ChaCha8Rng, depth: usize) -> Expr {
            if depth == 0 || rng.gen_bool(0.3) {
                if rng.gen_bool(0.5) {
                    Expr::Int(BigInt::from(rng.gen_range(0..50)))
                } else {
                    Expr::Ident(["a_1", "a_2", "t", "u"][rng.gen_range(0..4)].to_string())
                }
            } else {
                let a = Box::new(gen(rng, depth - 1));
                let b = Box::new(gen(rng, depth - 1));
                match rng.gen_range(0..6) {
                    0 => Expr::Add(a, b),
                    1 => Expr::Sub(a, b),
                    2 => Expr::Mul(a, b),
                    3 => Expr::Div(a, b),
                    4 => Expr::Neg(a),
                    _ => Expr::Pow(a, rng.gen_range(-3..4)),
                }
            }
        }
        for _ in 0..500 {
            let e = gen(&mut rng, 4);
            let printed = e.to_string();
            let reparsed = parse(&printed)
                .unwrap_or_else(|err| panic!("failed to reparse '{}': {}", printed, err));
            assert_eq!(reparsed, e, "round trip of '{}'", printed);
        }
    }
}
