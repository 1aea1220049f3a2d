//! Truncated Laurent series over the prime field `F_p`.
//!
//! A series stores finitely many nonzero coefficients indexed by integer
//! exponents of `t`, plus an optional truncation order: coefficients at
//! exponents `< prec` are exact, everything at or above `prec` is
//! unknown. `prec = None` means the series is an exact Laurent
//! polynomial. Addition and multiplication propagate precision with the
//! usual `O(t^k)` rules; inversion of a non-monomial necessarily
//! truncates and is the only place where precision is introduced.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LaurentError {
    #[error("division by zero series")]
    DivisionByZero,
    #[error("valuation not certified below truncation order {0}")]
    PrecisionExhausted(i64),
}

/// A truncated Laurent series over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Laurent {
    p: u32,
    /// exponent -> coefficient in `1..p`; no zero coefficients stored.
    coeffs: BTreeMap<i64, u32>,
    /// Coefficients at exponents `< prec` are exact. `None` = exact.
    prec: Option<i64>,
}

impl Laurent {
    pub fn zero(p: u32) -> Self {
        Laurent {
            p,
            coeffs: BTreeMap::new(),
            prec: None,
        }
    }

    pub fn from_int(p: u32, n: i64) -> Self {
        let c = n.rem_euclid(p as i64) as u32;
        let mut s = Laurent::zero(p);
        if c != 0 {
            s.coeffs.insert(0, c);
        }
        s
    }

    /// `c * t^e` with `c` reduced mod p.
    pub fn monomial(p: u32, c: i64, e: i64) -> Self {
        let c = c.rem_euclid(p as i64) as u32;
        let mut s = Laurent::zero(p);
        if c != 0 {
            s.coeffs.insert(e, c);
        }
        s
    }

    pub fn from_terms(p: u32, terms: &[(i64, i64)]) -> Self {
        let mut s = Laurent::zero(p);
        for &(e, c) in terms {
            let c = c.rem_euclid(p as i64) as u32;
            if c != 0 {
                let entry = s.coeffs.entry(e).or_insert(0);
                *entry = (*entry + c) % p;
                if *entry == 0 {
                    s.coeffs.remove(&e);
                }
            }
        }
        s
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn prec(&self) -> Option<i64> {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec.is_none()
    }

    /// Provably zero: no terms and no truncation hiding anything.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.prec.is_none()
    }

    pub fn coeff(&self, e: i64) -> u32 {
        self.coeffs.get(&e).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.coeffs.iter().map(|(&e, &c)| (e, c))
    }

    /// Exact t-adic valuation.
    ///
    /// `Ok(None)` is the zero series (valuation infinity). A series with
    /// no visible terms but a finite truncation order cannot be told
    /// apart from zero and reports `PrecisionExhausted`.
    pub fn valuation(&self) -> Result<Option<i64>, LaurentError> {
        match self.coeffs.keys().next() {
            Some(&e) => Ok(Some(e)),
            None => match self.prec {
                None => Ok(None),
                Some(p) => Err(LaurentError::PrecisionExhausted(p)),
            },
        }
    }

    /// Lower bound for the valuation (truncation order when empty).
    fn val_floor(&self) -> Option<i64> {
        match self.coeffs.keys().next() {
            Some(&e) => Some(e),
            None => self.prec,
        }
    }

    /// Drop terms at or above the truncation order `at`.
    pub fn truncate(mut self, at: i64) -> Self {
        let keep = self.prec.map_or(at, |p| p.min(at));
        self.coeffs.retain(|&e, _| e < keep);
        self.prec = Some(keep);
        self
    }

    pub fn add(&self, other: &Laurent) -> Laurent {
        assert_eq!(self.p, other.p);
        let prec = min_prec(self.prec, other.prec);
        let mut coeffs = self.coeffs.clone();
        for (&e, &c) in &other.coeffs {
            let entry = coeffs.entry(e).or_insert(0);
            *entry = (*entry + c) % self.p;
            if *entry == 0 {
                coeffs.remove(&e);
            }
        }
        let mut out = Laurent {
            p: self.p,
            coeffs,
            prec: None,
        };
        if let Some(pr) = prec {
            out = out.truncate(pr);
        }
        out
    }

    pub fn neg(&self) -> Laurent {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = self.p - *c;
        }
        out
    }

    pub fn sub(&self, other: &Laurent) -> Laurent {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Laurent) -> Laurent {
        assert_eq!(self.p, other.p);
        // O-term bookkeeping: unknown parts contribute from
        // v(a)+prec(b) and v(b)+prec(a).
        let prec = min_prec(
            combine(self.val_floor(), other.prec),
            combine(other.val_floor(), self.prec),
        );
        let mut coeffs: BTreeMap<i64, u32> = BTreeMap::new();
        for (&e1, &c1) in &self.coeffs {
            for (&e2, &c2) in &other.coeffs {
                let e = e1 + e2;
                if let Some(pr) = prec {
                    if e >= pr {
                        continue;
                    }
                }
                let entry = coeffs.entry(e).or_insert(0);
                *entry = (*entry + c1 * c2) % self.p;
                if *entry == 0 {
                    coeffs.remove(&e);
                }
            }
        }
        Laurent {
            p: self.p,
            coeffs,
            prec,
        }
    }

    /// Multiplicative inverse.
    ///
    /// A monomial inverts exactly. Anything else is inverted as a
    /// geometric series truncated `rel_order` coefficients past its
    /// leading term.
    pub fn inv(&self, rel_order: i64) -> Result<Laurent, LaurentError> {
        let v = self
            .valuation()?
            .ok_or(LaurentError::DivisionByZero)?;
        let lead = self.coeff(v);
        let lead_inv = mod_inverse(lead, self.p);
        let lead_term = Laurent::monomial(self.p, lead_inv as i64, -v);
        if self.coeffs.len() == 1 && self.is_exact() {
            return Ok(lead_term);
        }
        // u = 1 - self * lead_term has positive valuation; sum the
        // geometric series in u up to the requested relative order.
        let one = Laurent::from_int(self.p, 1);
        let u = one.sub(&self.mul(&lead_term)).truncate(rel_order);
        let mut acc = one.clone().truncate(rel_order);
        let mut pow = u.clone();
        while !pow.coeffs.is_empty() {
            acc = acc.add(&pow);
            pow = pow.mul(&u).truncate(rel_order);
        }
        let mut out = lead_term.mul(&acc);
        out = out.truncate(rel_order - v);
        // Inheriting truncation from the operand itself.
        if let Some(pr) = self.prec {
            out = out.truncate(pr - 2 * v);
        }
        Ok(out)
    }

    /// `x^p`, exact: the Frobenius just multiplies exponents by p.
    pub fn frobenius(&self) -> Laurent {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&e, &c)| (e * self.p as i64, c))
            .collect();
        Laurent {
            p: self.p,
            coeffs,
            prec: self.prec.map(|pr| pr * self.p as i64),
        }
    }

    /// Exact p-th root, when every exponent is divisible by p.
    pub fn pth_root_exact(&self) -> Option<Laurent> {
        if !self.is_exact() {
            return None;
        }
        let p = self.p as i64;
        let mut coeffs = BTreeMap::new();
        for (&e, &c) in &self.coeffs {
            if e % p != 0 {
                return None;
            }
            coeffs.insert(e / p, c);
        }
        Some(Laurent {
            p: self.p,
            coeffs,
            prec: None,
        })
    }

    pub fn pow(&self, mut n: u32) -> Laurent {
        let mut acc = Laurent::from_int(self.p, 1);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

fn min_prec(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(a.min(b)),
    }
}

fn combine(val: Option<i64>, prec: Option<i64>) -> Option<i64> {
    match (val, prec) {
        (_, None) => None,
        (None, Some(_)) => None, // zero operand: product exactly zero
        (Some(v), Some(p)) => Some(v + p),
    }
}

pub fn mod_inverse(a: u32, p: u32) -> u32 {
    // p is prime and a != 0 mod p.
    let mut result = 1u64;
    let mut base = (a % p) as u64;
    let mut exp = p as u64 - 2;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base % p as u64;
        }
        base = base * base % p as u64;
        exp >>= 1;
    }
    result as u32
}

impl fmt::Display for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            write!(f, "0")?;
        } else {
            let mut first = true;
            for (&e, &c) in &self.coeffs {
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                match e {
                    0 => write!(f, "{}", c)?,
                    1 if c == 1 => write!(f, "t")?,
                    1 => write!(f, "{}*t", c)?,
                    _ if c == 1 => write!(f, "t^{}", e)?,
                    _ => write!(f, "{}*t^{}", c, e)?,
                }
            }
        }
        if let Some(pr) = self.prec {
            write!(f, " + O(t^{})", pr)?;
        }
        Ok(())
    }
}
