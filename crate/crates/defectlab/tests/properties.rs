//! Property tests over the exact-arithmetic layers.

use defectlab::expr::{evaluate, parse, Expr};
use defectlab::laurent::Laurent;
use defectlab::tower::{padic_val, BaseField, Coeff, RelationKind, Tower, TowerElement, Val};
use defectlab::{rat, Rat};
use num::{BigInt, Zero};
use proptest::prelude::*;

fn expr_tree(with_idents: bool) -> impl Strategy<Value = Expr> {
    let leaf = if with_idents {
        prop_oneof![
            (0i64..60).prop_map(|n| Expr::Int(BigInt::from(n))),
            prop_oneof![Just("a_1"), Just("x"), Just("t"), Just("u2")]
                .prop_map(|s| Expr::Ident(s.to_string())),
        ]
        .boxed()
    } else {
        (0i64..60).prop_map(|n| Expr::Int(BigInt::from(n))).boxed()
    };
    leaf.prop_recursive(4, 64, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
            inner.clone().prop_map(|a| Expr::Neg(a.into())),
            (inner, -3i64..4).prop_map(|(a, n)| Expr::Pow(a.into(), n)),
        ]
    })
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    expr_tree(true)
}

/// Reference evaluator over plain rationals for identifier-free trees.
fn reference_eval(e: &Expr) -> Option<Rat> {
    Some(match e {
        Expr::Int(n) => Rat::from(n.clone()),
        Expr::Ident(_) => return None,
        Expr::Neg(a) => -reference_eval(a)?,
        Expr::Add(a, b) => reference_eval(a)? + reference_eval(b)?,
        Expr::Sub(a, b) => reference_eval(a)? - reference_eval(b)?,
        Expr::Mul(a, b) => reference_eval(a)? * reference_eval(b)?,
        Expr::Div(a, b) => {
            let d = reference_eval(b)?;
            if d.is_zero() {
                return None;
            }
            reference_eval(a)? / d
        }
        Expr::Pow(a, n) => {
            let base = reference_eval(a)?;
            if *n < 0 && base.is_zero() {
                return None;
            }
            base.pow(*n as i32)
        }
    })
}

fn contains_ident(e: &Expr) -> bool {
    match e {
        Expr::Int(_) => false,
        Expr::Ident(_) => true,
        Expr::Neg(a) => contains_ident(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            contains_ident(a) || contains_ident(b)
        }
        Expr::Pow(a, _) => contains_ident(a),
    }
}

proptest! {
    /// The printer and parser preserve the tree, so the published
    /// precedence is exactly what the parser implements.
    #[test]
    fn expr_print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let reparsed = parse(&printed).expect("printed expressions reparse");
        prop_assert_eq!(reparsed, e);
    }

    /// Evaluation agrees with a reference recursive evaluator on
    /// identifier-free trees.
    #[test]
    fn expr_matches_reference_evaluator(e in expr_tree(false)) {
        prop_assert!(!contains_ident(&e));
        let tower = Tower::new(BaseField::mixed(2));
        let reference = reference_eval(&e);
        match evaluate(&e, &tower) {
            Ok(elem) => {
                let expected = reference.expect("tower evaluation succeeded, reference must too");
                prop_assert_eq!(elem, tower.constant_rat(expected).unwrap());
            }
            Err(_) => prop_assert!(reference.is_none(), "only division by zero may fail"),
        }
    }

    /// Laurent arithmetic is a commutative ring with exact t-adic
    /// valuation multiplicativity.
    #[test]
    fn laurent_ring_laws(
        a in proptest::collection::vec((-6i64..8, 0i64..3), 0..4),
        b in proptest::collection::vec((-6i64..8, 0i64..3), 0..4),
        c in proptest::collection::vec((-6i64..8, 0i64..3), 0..4),
    ) {
        let p = 3;
        let a = Laurent::from_terms(p, &a);
        let b = Laurent::from_terms(p, &b);
        let c = Laurent::from_terms(p, &c);
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        match (a.valuation().unwrap(), b.valuation().unwrap()) {
            (Some(va), Some(vb)) => {
                prop_assert_eq!(a.mul(&b).valuation().unwrap(), Some(va + vb));
            }
            _ => prop_assert_eq!(a.mul(&b).valuation().unwrap(), None),
        }
    }

    /// p-adic valuation of rationals is multiplicative.
    #[test]
    fn padic_val_multiplicative(an in -400i64..400, ad in 1i64..300, bn in -400i64..400, bd in 1i64..300) {
        let a = rat(an, ad);
        let b = rat(bn, bd);
        let prod = &a * &b;
        for p in [2u32, 3, 5] {
            match (padic_val(&a, p), padic_val(&b, p)) {
                (Some(x), Some(y)) => prop_assert_eq!(padic_val(&prod, p), Some(x + y)),
                _ => prop_assert_eq!(padic_val(&prod, p), None),
            }
        }
    }
}

/// Build a deterministic element of the two-stage square-root tower
/// from compact part descriptors.
fn element_from_parts(t: &Tower, parts: &[(u8, i8, u8)]) -> TowerElement {
    let mut acc = TowerElement::zero();
    for &(mono_bits, k, digit) in parts {
        let mono = vec![mono_bits & 1, (mono_bits >> 1) & 1];
        let term = TowerElement::term(Coeff::uniformizer_pow(t.base(), k as i64), mono);
        acc = t.add(&acc, &t.mul_int(&term, 1 + (digit % 3) as i64));
    }
    acc
}

proptest! {
    /// The tower valuation really is a valuation: multiplicative on
    /// products, minimum rule on sums with equality at distinct values.
    #[test]
    fn tower_valuation_laws(
        xp in proptest::collection::vec((0u8..4, -3i8..4, 0u8..3), 0..3),
        yp in proptest::collection::vec((0u8..4, -3i8..4, 0u8..3), 0..3),
    ) {
        let t = Tower::new(BaseField::mixed(2))
            .push_stage("a1", RelationKind::PthRoot, TowerElement::from_coeff(Coeff::Rat(rat(2, 1))), rat(1, 2))
            .unwrap();
        let t = {
            let g1 = t.generator(1);
            t.push_stage("a2", RelationKind::PthRoot, g1, rat(1, 4)).unwrap()
        };
        let x = element_from_parts(&t, &xp);
        let y = element_from_parts(&t, &yp);
        let vx = t.valuation(&x).unwrap();
        let vy = t.valuation(&y).unwrap();
        let vxy = t.valuation(&t.mul(&x, &y)).unwrap();
        match (&vx, &vy) {
            (Val::Finite(a), Val::Finite(b)) => prop_assert_eq!(vxy, Val::Finite(a + b)),
            _ => prop_assert_eq!(vxy, Val::Infinite),
        }
        let vsum = t.valuation(&t.add(&x, &y)).unwrap();
        match (&vx, &vy) {
            (Val::Finite(a), Val::Finite(b)) => {
                let min = a.min(b).clone();
                match vsum {
                    Val::Finite(s) => {
                        prop_assert!(s >= min);
                        if a != b {
                            prop_assert_eq!(s, min);
                        }
                    }
                    Val::Infinite => prop_assert_eq!(a, b),
                }
            }
            (Val::Infinite, _) => prop_assert_eq!(vsum, vy),
            (_, Val::Infinite) => prop_assert_eq!(vsum, vx),
        }
    }
}
