//! Polynomials with tower-element coefficients.
//!
//! Degrees stay tiny (at most 2p), so the representation is a dense
//! coefficient vector. Division and the extended Euclidean pass are what
//! tower inversion and trace denominators need; the Hasse-Schmidt
//! derivatives feed the Taylor expansion identities.

use num::BigInt;

use crate::tower::{Tower, TowerElement, TowerError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    coeffs: Vec<TowerElement>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<TowerElement>) -> Self {
        while coeffs.last().is_some_and(TowerElement::is_provably_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: TowerElement) -> Self {
        Poly::new(vec![c])
    }

    /// `X^n`
    pub fn x_pow(tower: &Tower, n: usize) -> Self {
        let mut coeffs = vec![TowerElement::zero(); n + 1];
        coeffs[n] = tower.constant_int(1);
        Poly::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[TowerElement] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> TowerElement {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn add(&self, tower: &Tower, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(tower.add(&self.coeff(i), &other.coeff(i)));
        }
        Poly::new(out)
    }

    pub fn neg(&self, tower: &Tower) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| tower.neg(c)).collect())
    }

    pub fn sub(&self, tower: &Tower, other: &Poly) -> Poly {
        self.add(tower, &other.neg(tower))
    }

    pub fn mul(&self, tower: &Tower, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out =
            vec![TowerElement::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = tower.add(&out[i + j], &tower.mul(a, b));
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, tower: &Tower, c: &TowerElement) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| tower.mul(a, c)).collect())
    }

    pub fn eval(&self, tower: &Tower, x: &TowerElement) -> TowerElement {
        let mut acc = TowerElement::zero();
        for c in self.coeffs.iter().rev() {
            acc = tower.add(&tower.mul(&acc, x), c);
        }
        acc
    }

    /// The i-th Hasse-Schmidt derivative: sum of `binom(k, i) f_k
    /// X^(k-i)`, with the binomials reduced in the coefficient domain.
    pub fn hasse_schmidt(&self, tower: &Tower, i: usize) -> Poly {
        if i > self.coeffs.len() {
            return Poly::zero();
        }
        let mut out = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate().skip(i) {
            let b = binomial(k, i);
            out.push(tower.mul(c, &tower.constant_int(b)));
        }
        Poly::new(out)
    }

    pub fn derivative(&self, tower: &Tower) -> Poly {
        self.hasse_schmidt(tower, 1)
    }
}

pub fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = BigInt::from(1);
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc.try_into().expect("binomial fits in i64 at these degrees")
}

/// Euclidean division by a polynomial with invertible leading
/// coefficient.
pub fn divmod(tower: &Tower, a: &Poly, b: &Poly) -> Result<(Poly, Poly), TowerError> {
    let db = b.degree().ok_or(TowerError::DivisionByZero)?;
    let lead_inv = tower.inv(&b.coeff(db))?;
    let mut rem = a.clone();
    let mut quot = vec![TowerElement::zero(); a.coeffs.len().saturating_sub(db)];
    while let Some(dr) = rem.degree() {
        if dr < db {
            break;
        }
        let factor = tower.mul(&rem.coeff(dr), &lead_inv);
        quot[dr - db] = factor.clone();
        let mut sub = vec![TowerElement::zero(); dr + 1];
        for i in 0..=db {
            sub[dr - db + i] = tower.mul(&b.coeff(i), &factor);
        }
        rem = rem.sub(tower, &Poly::new(sub));
    }
    Ok((Poly::new(quot), rem))
}

/// Reduce `a` modulo `f`.
pub fn rem(tower: &Tower, a: &Poly, f: &Poly) -> Result<Poly, TowerError> {
    Ok(divmod(tower, a, f)?.1)
}

/// Bezout inverse: `s` with `s * g = 1 mod f`, via the extended
/// Euclidean algorithm. Fails when `gcd(g, f)` is not a unit.
pub fn invert_mod(tower: &Tower, g: &Poly, f: &Poly) -> Result<Poly, TowerError> {
    let g = rem(tower, g, f)?;
    if g.is_zero() {
        return Err(TowerError::NotInvertible("zero modulo the relation".into()));
    }
    let mut r0 = f.clone();
    let mut r1 = g.clone();
    let mut s0 = Poly::zero();
    let mut s1 = Poly::constant(tower.constant_int(1));
    while !r1.is_zero() {
        let (q, r) = divmod(tower, &r0, &r1)?;
        let s = s0.sub(tower, &q.mul(tower, &s1));
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = s;
    }
    if r0.degree() != Some(0) {
        return Err(TowerError::NotInvertible(format!(
            "gcd has degree {:?}",
            r0.degree()
        )));
    }
    let unit_inv = tower.inv(&r0.coeff(0))?;
    Ok(s0.scale(tower, &unit_inv))
}
