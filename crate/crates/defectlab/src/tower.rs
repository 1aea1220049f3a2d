//! Exact arithmetic in algebraic towers over valued base fields.
//!
//! Two base fields are supported: the rationals with the p-adic
//! valuation (mixed characteristic) and Laurent series over `F_p` with
//! the t-adic valuation (equal characteristic), both normalized so the
//! uniformizer has value 1. A tower stacks degree-p stages on top of the
//! base, each given by `a^p = rhs` or `a^p - a = rhs` with `rhs` over
//! the earlier stages and a declared value for the new generator.
//!
//! Elements are maps from bounded exponent tuples (one exponent `< p`
//! per stage) to base coefficients. Stage validation enforces that the
//! monomial values are pairwise distinct modulo the base value group, so
//! the valuation of an element is the plain minimum over its terms and
//! is always exact. Multiplication reduces overflowing exponents through
//! the stage relations; inversion runs an extended Euclidean pass over
//! the top generator and recurses into the prefix tower.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use num::{BigInt, Integer, One, Signed, Zero};
use thiserror::Error;

use crate::laurent::{mod_inverse, Laurent, LaurentError};
use crate::ogroup::GroupElement;
use crate::{rat_int, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TowerError {
    #[error("declared value {declared} inconsistent with v(rhs) = {actual} for stage '{stage}'")]
    ValueMismatch {
        stage: String,
        declared: Box<Rat>,
        actual: Box<Rat>,
    },
    #[error("artin-schreier stage '{stage}' needs v(rhs) < 0, got {actual}; nonnegative-value stages are outside the totally ramified representation")]
    NonNegativeShift { stage: String, actual: Rat },
    #[error("monomial values collide modulo the base group after stage '{stage}'")]
    BasisCollision { stage: String },
    #[error("stage name '{0}' already in use")]
    DuplicateStage(String),
    #[error("stage rhs must be nonzero")]
    ZeroRhs,
    #[error("tower would exceed the monomial budget ({0} monomials)")]
    MonomialBudget(u64),
    #[error("valuation not certified below the precision cap")]
    PrecisionExhausted,
    #[error("division by zero")]
    DivisionByZero,
    #[error("residue of a non-unit (valuation != 0)")]
    NonUnit,
    #[error("element of the extension is not invertible: {0}")]
    NotInvertible(String),
    #[error("no family rule declared for auto-extension")]
    NoFamilyRule,
    #[error("coefficient kind does not match the base field")]
    CoeffKindMismatch,
    #[error(transparent)]
    Expr(#[from] Box<crate::expr::ExprError>),
}

impl From<LaurentError> for TowerError {
    fn from(e: LaurentError) -> Self {
        match e {
            LaurentError::DivisionByZero => TowerError::DivisionByZero,
            LaurentError::PrecisionExhausted(_) => TowerError::PrecisionExhausted,
        }
    }
}

/// Base field kind; `p` is the residue characteristic in both cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    /// `Q` with the p-adic valuation, `vp = 1`.
    Mixed { p: u32 },
    /// `F_p((t))` with the t-adic valuation, `vt = 1`.
    Equal { p: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseField {
    pub kind: BaseKind,
    /// Valuation queries are certified for values below this cap; only
    /// equal-characteristic series inversion ever truncates.
    pub precision_cap: i64,
}

pub const DEFAULT_PRECISION_CAP: i64 = 64;

impl BaseField {
    pub fn mixed(p: u32) -> Self {
        BaseField {
            kind: BaseKind::Mixed { p },
            precision_cap: DEFAULT_PRECISION_CAP,
        }
    }

    pub fn equal(p: u32) -> Self {
        BaseField {
            kind: BaseKind::Equal { p },
            precision_cap: DEFAULT_PRECISION_CAP,
        }
    }

    pub fn with_cap(mut self, cap: i64) -> Self {
        self.precision_cap = cap.max(8);
        self
    }

    pub fn p(&self) -> u32 {
        match self.kind {
            BaseKind::Mixed { p } | BaseKind::Equal { p } => p,
        }
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self.kind, BaseKind::Mixed { .. })
    }
}

/// A coefficient of the base field: an exact rational in mixed
/// characteristic, a (possibly truncated) Laurent series in equal
/// characteristic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coeff {
    Rat(Rat),
    Ser(Laurent),
}

impl Coeff {
    pub fn zero(base: &BaseField) -> Self {
        match base.kind {
            BaseKind::Mixed { .. } => Coeff::Rat(Rat::zero()),
            BaseKind::Equal { p } => Coeff::Ser(Laurent::zero(p)),
        }
    }

    pub fn one(base: &BaseField) -> Self {
        Coeff::from_int(base, 1)
    }

    pub fn from_int(base: &BaseField, n: i64) -> Self {
        match base.kind {
            BaseKind::Mixed { .. } => Coeff::Rat(rat_int(n)),
            BaseKind::Equal { p } => Coeff::Ser(Laurent::from_int(p, n)),
        }
    }

    /// The base uniformizer: `p` or `t`.
    pub fn uniformizer(base: &BaseField) -> Self {
        match base.kind {
            BaseKind::Mixed { p } => Coeff::Rat(rat_int(p as i64)),
            BaseKind::Equal { p } => Coeff::Ser(Laurent::monomial(p, 1, 1)),
        }
    }

    /// `uniformizer^k`, exact for any integer `k`.
    pub fn uniformizer_pow(base: &BaseField, k: i64) -> Self {
        match base.kind {
            BaseKind::Mixed { p } => {
                let p = BigInt::from(p);
                if k >= 0 {
                    Coeff::Rat(Rat::from(p.pow(k as u32)))
                } else {
                    Coeff::Rat(Rat::new(BigInt::one(), p.pow((-k) as u32)))
                }
            }
            BaseKind::Equal { p } => Coeff::Ser(Laurent::monomial(p, 1, k)),
        }
    }

    pub fn is_provably_zero(&self) -> bool {
        match self {
            Coeff::Rat(r) => r.is_zero(),
            Coeff::Ser(s) => s.is_zero(),
        }
    }

    /// Empty but truncated: cannot be distinguished from zero.
    pub fn is_opaque(&self) -> bool {
        match self {
            Coeff::Rat(_) => false,
            Coeff::Ser(s) => s.terms().next().is_none() && !s.is_exact(),
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Rat(a), Coeff::Rat(b)) => Coeff::Rat(a + b),
            (Coeff::Ser(a), Coeff::Ser(b)) => Coeff::Ser(a.add(b)),
            _ => panic!("mixed coefficient kinds"),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Rat(a) => Coeff::Rat(-a),
            Coeff::Ser(a) => Coeff::Ser(a.neg()),
        }
    }

    pub fn sub(&self, other: &Coeff) -> Coeff {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Rat(a), Coeff::Rat(b)) => Coeff::Rat(a * b),
            (Coeff::Ser(a), Coeff::Ser(b)) => Coeff::Ser(a.mul(b)),
            _ => panic!("mixed coefficient kinds"),
        }
    }

    pub fn inv(&self, base: &BaseField) -> Result<Coeff, TowerError> {
        match self {
            Coeff::Rat(a) => {
                if a.is_zero() {
                    Err(TowerError::DivisionByZero)
                } else {
                    Ok(Coeff::Rat(a.recip()))
                }
            }
            Coeff::Ser(a) => Ok(Coeff::Ser(a.inv(base.precision_cap)?)),
        }
    }

    /// Exact valuation; `None` encodes infinity (the zero coefficient).
    pub fn val(&self, base: &BaseField) -> Result<Option<i64>, TowerError> {
        match self {
            Coeff::Rat(a) => Ok(padic_val(a, base.p())),
            Coeff::Ser(s) => Ok(s.valuation()?),
        }
    }

    /// A lower bound for the valuation that is defined even for opaque
    /// truncated coefficients. `None` = provably infinite.
    pub fn val_floor(&self, base: &BaseField) -> Option<i64> {
        match self {
            Coeff::Rat(a) => padic_val(a, base.p()),
            Coeff::Ser(s) => match s.valuation() {
                Ok(v) => v,
                Err(LaurentError::PrecisionExhausted(pr)) => Some(pr),
                Err(_) => unreachable!(),
            },
        }
    }

    /// Residue of the leading part: the residue of
    /// `coeff / uniformizer^v(coeff)`, defined for any nonzero exactly
    /// known coefficient.
    pub fn leading_residue(&self, base: &BaseField) -> Result<u32, TowerError> {
        let p = base.p();
        match self {
            Coeff::Rat(a) => {
                let v = padic_val(a, p).ok_or(TowerError::DivisionByZero)?;
                let unit = a * Coeff::uniformizer_pow(base, -v)
                    .as_rat()
                    .expect("mixed-characteristic uniformizer is rational");
                Coeff::Rat(unit).residue(base)
            }
            Coeff::Ser(s) => {
                let v = s.valuation()?.ok_or(TowerError::DivisionByZero)?;
                Ok(s.coeff(v))
            }
        }
    }

    /// Residue of a valuation-0 coefficient in `F_p`.
    pub fn residue(&self, base: &BaseField) -> Result<u32, TowerError> {
        let p = base.p();
        match self {
            Coeff::Rat(a) => {
                if padic_val(a, p) != Some(0) {
                    return Err(TowerError::NonUnit);
                }
                let pb = BigInt::from(p);
                let n = a.numer().mod_floor(&pb);
                let d = a.denom().mod_floor(&pb);
                let n: u32 = n.try_into().unwrap();
                let d: u32 = d.try_into().unwrap();
                Ok(n * mod_inverse(d, p) % p)
            }
            Coeff::Ser(s) => {
                if s.valuation()? != Some(0) {
                    return Err(TowerError::NonUnit);
                }
                Ok(s.coeff(0))
            }
        }
    }

    pub fn as_rat(&self) -> Option<&Rat> {
        match self {
            Coeff::Rat(r) => Some(r),
            Coeff::Ser(_) => None,
        }
    }
}

/// p-adic valuation of an exact rational; `None` = infinity.
pub fn padic_val(x: &Rat, p: u32) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let count = |mut n: BigInt| -> i64 {
        n = n.abs();
        let mut c = 0;
        while (&n % &p).is_zero() {
            n /= &p;
            c += 1;
        }
        c
    };
    Some(count(x.numer().clone()) - count(x.denom().clone()))
}

/// Exponent tuple of a monomial in the stage generators, one exponent
/// per stage, trailing zeros trimmed (so elements stay valid when the
/// tower is deepened).
pub type Mono = Vec<u8>;

fn trim(mut m: Mono) -> Mono {
    while m.last() == Some(&0) {
        m.pop();
    }
    m
}

fn mono_add(a: &Mono, b: &Mono) -> Mono {
    let n = a.len().max(b.len());
    let mut out = vec![0u8; n];
    for (i, o) in out.iter_mut().enumerate() {
        *o = a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0);
    }
    trim(out)
}

/// An exact element of a tower: finitely many `coefficient * monomial`
/// terms with pairwise distinct values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TowerElement {
    terms: BTreeMap<Mono, Coeff>,
}

impl TowerElement {
    pub fn zero() -> Self {
        TowerElement::default()
    }

    pub fn from_coeff(c: Coeff) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_provably_zero() {
            terms.insert(Mono::new(), c);
        }
        TowerElement { terms }
    }

    pub fn term(c: Coeff, m: Mono) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_provably_zero() {
            terms.insert(trim(m), c);
        }
        TowerElement { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Coeff)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_provably_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest stage index (1-based) appearing in the element; 0 for
    /// constants.
    pub fn top_stage(&self) -> usize {
        self.terms
            .keys()
            .map(|m| {
                m.iter()
                    .rposition(|&e| e != 0)
                    .map(|i| i + 1)
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    fn insert_term(&mut self, m: Mono, c: Coeff) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                if !c.is_provably_zero() {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_provably_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }
}

/// Defining relation of a tower stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationKind {
    /// `a^p = rhs`
    PthRoot,
    /// `a^p - a = rhs`
    ArtinSchreierShift,
}

#[derive(Debug, Clone)]
pub struct TowerStage {
    pub name: String,
    pub relation: RelationKind,
    pub rhs: TowerElement,
    pub value: Rat,
}

/// Recurrence for materializing deeper stages on demand: the next stage
/// has `rhs` given by an expression in `prev` (the current top
/// generator) and the earlier generators.
#[derive(Debug, Clone)]
pub struct FamilyRule {
    pub relation: RelationKind,
    pub rhs_expr: String,
}

const MONOMIAL_BUDGET: u64 = 1 << 20;

/// A validated tower: base field plus finitely many materialized stages
/// of a (possibly infinite) declared family. Immutable; extension
/// returns a new tower.
#[derive(Debug, Clone)]
pub struct Tower {
    base: BaseField,
    stages: Vec<TowerStage>,
    family: Option<FamilyRule>,
    frac_map: OnceLock<BTreeMap<Rat, Mono>>,
}

impl Tower {
    pub fn new(base: BaseField) -> Self {
        Tower {
            base,
            stages: Vec::new(),
            family: None,
            frac_map: OnceLock::new(),
        }
    }

    pub fn with_family(mut self, family: FamilyRule) -> Self {
        self.family = Some(family);
        self
    }

    pub fn base(&self) -> &BaseField {
        &self.base
    }

    pub fn p(&self) -> u32 {
        self.base.p()
    }

    pub fn stages(&self) -> &[TowerStage] {
        &self.stages
    }

    pub fn family(&self) -> Option<&FamilyRule> {
        self.family.as_ref()
    }

    pub fn stage_named(&self, name: &str) -> Option<usize> {
        self.stages.iter().position(|s| s.name == name)
    }

    /// Generator of stage `idx` (1-based) as an element.
    pub fn generator(&self, idx: usize) -> TowerElement {
        assert!(idx >= 1 && idx <= self.stages.len());
        let mut m = vec![0u8; idx];
        m[idx - 1] = 1;
        TowerElement::term(Coeff::one(&self.base), m)
    }

    pub fn constant_int(&self, n: i64) -> TowerElement {
        TowerElement::from_coeff(Coeff::from_int(&self.base, n))
    }

    pub fn constant_rat(&self, r: Rat) -> Result<TowerElement, TowerError> {
        match self.base.kind {
            BaseKind::Mixed { .. } => Ok(TowerElement::from_coeff(Coeff::Rat(r))),
            BaseKind::Equal { .. } => {
                // A rational constant lands in F_p; the denominator must
                // be a unit there.
                let num = self.constant_int(int_to_i64(r.numer())?);
                let den = self.constant_int(int_to_i64(r.denom())?);
                self.div(&num, &den)
            }
        }
    }

    pub fn uniformizer_pow(&self, k: i64) -> TowerElement {
        TowerElement::from_coeff(Coeff::uniformizer_pow(&self.base, k))
    }

    /// Validate and append a stage, returning the extended tower.
    pub fn push_stage(
        &self,
        name: &str,
        relation: RelationKind,
        rhs: TowerElement,
        declared_value: Rat,
    ) -> Result<Tower, TowerError> {
        if self.stage_named(name).is_some() {
            return Err(TowerError::DuplicateStage(name.to_string()));
        }
        let p = self.p();
        let v_rhs = match self.valuation(&rhs)? {
            Val::Finite(v) => v,
            Val::Infinite => return Err(TowerError::ZeroRhs),
        };
        match relation {
            RelationKind::PthRoot => {
                if &declared_value * rat_int(p as i64) != v_rhs {
                    return Err(TowerError::ValueMismatch {
                        stage: name.to_string(),
                        declared: Box::new(declared_value),
                        actual: Box::new(v_rhs),
                    });
                }
            }
            RelationKind::ArtinSchreierShift => {
                if !v_rhs.is_negative() {
                    return Err(TowerError::NonNegativeShift {
                        stage: name.to_string(),
                        actual: v_rhs,
                    });
                }
                if &declared_value * rat_int(p as i64) != v_rhs {
                    return Err(TowerError::ValueMismatch {
                        stage: name.to_string(),
                        declared: Box::new(declared_value),
                        actual: Box::new(v_rhs),
                    });
                }
            }
        }

        let mut next = Tower {
            base: self.base,
            stages: self.stages.clone(),
            family: self.family.clone(),
            frac_map: OnceLock::new(),
        };
        next.stages.push(TowerStage {
            name: name.to_string(),
            relation,
            rhs,
            value: declared_value,
        });

        let count = (p as u64).checked_pow(next.stages.len() as u32);
        match count {
            Some(c) if c <= MONOMIAL_BUDGET => {}
            _ => return Err(TowerError::MonomialBudget(MONOMIAL_BUDGET)),
        }
        // Value-independent basis: all monomial values distinct modulo
        // the base group Z. This also forces ramification index p at
        // every stage, which keeps the residue field prime.
        let mut seen = BTreeSet::new();
        for (f, _) in next.enumerate_fracs() {
            if !seen.insert(f) {
                return Err(TowerError::BasisCollision {
                    stage: name.to_string(),
                });
            }
        }
        Ok(next)
    }

    /// The tower restricted to its first `n` stages (the stage-`n`
    /// subfield of the declared family).
    pub fn truncate_stages(&self, n: usize) -> Tower {
        if n >= self.stages.len() {
            return self.clone();
        }
        Tower {
            base: self.base,
            stages: self.stages[..n].to_vec(),
            family: self.family.clone(),
            frac_map: OnceLock::new(),
        }
    }

    /// Materialize one more stage from the family rule.
    pub fn extend_by_family(&self) -> Result<Tower, TowerError> {
        let family = self.family.clone().ok_or(TowerError::NoFamilyRule)?;
        let prev = self
            .stages
            .last()
            .ok_or(TowerError::NoFamilyRule)?;
        let prev_gen = self.generator(self.stages.len());
        let expr = crate::expr::parse(&family.rhs_expr).map_err(Box::new)?;
        let mut bindings = BTreeMap::new();
        bindings.insert("prev".to_string(), prev_gen);
        let rhs = crate::expr::evaluate_with(&expr, self, &bindings).map_err(Box::new)?;
        let v_rhs = match self.valuation(&rhs)? {
            Val::Finite(v) => v,
            Val::Infinite => return Err(TowerError::ZeroRhs),
        };
        let declared = v_rhs / rat_int(self.p() as i64);
        let name = next_stage_name(&prev.name);
        self.push_stage(&name, family.relation, rhs, declared)
    }

    /// Value of a monomial: sum of stage values weighted by exponents.
    pub fn mono_value(&self, m: &Mono) -> Rat {
        let mut v = Rat::zero();
        for (i, &e) in m.iter().enumerate() {
            if e != 0 {
                v += &self.stages[i].value * rat_int(e as i64);
            }
        }
        v
    }

    fn enumerate_fracs(&self) -> Vec<(Rat, Mono)> {
        let p = self.p() as u8;
        let n = self.stages.len();
        let mut out = Vec::new();
        let mut mono = vec![0u8; n];
        loop {
            let v = self.mono_value(&mono);
            out.push((frac_part(&v), trim(mono.clone())));
            // odometer increment
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                mono[i] += 1;
                if mono[i] < p {
                    break;
                }
                mono[i] = 0;
                i += 1;
            }
        }
    }

    fn frac_map(&self) -> &BTreeMap<Rat, Mono> {
        self.frac_map.get_or_init(|| {
            self.enumerate_fracs().into_iter().collect()
        })
    }

    /// Decompose `target` as `k * v(uniformizer) + value(mono)` with
    /// integer `k`; decides membership in the tower's value group.
    pub fn monomial_for_value(&self, target: &Rat) -> Option<(i64, Mono)> {
        let mono = self.frac_map().get(&frac_part(target))?.clone();
        let k = target - self.mono_value(&mono);
        debug_assert!(k.is_integer());
        let k: i64 = int_to_i64(&k.to_integer()).ok()?;
        Some((k, mono))
    }

    pub fn group_contains(&self, v: &Rat) -> bool {
        self.monomial_for_value(v).is_some()
    }

    // ---- element arithmetic -------------------------------------------

    pub fn add(&self, a: &TowerElement, b: &TowerElement) -> TowerElement {
        let mut out = a.clone();
        for (m, c) in &b.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self, a: &TowerElement) -> TowerElement {
        TowerElement {
            terms: a
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn sub(&self, a: &TowerElement, b: &TowerElement) -> TowerElement {
        self.add(a, &self.neg(b))
    }

    /// Product, with exponents `>= p` reduced through the stage
    /// relations.
    pub fn mul(&self, a: &TowerElement, b: &TowerElement) -> TowerElement {
        let p = self.p() as u8;
        let mut out = TowerElement::zero();
        let mut work: Vec<(Mono, Coeff)> = Vec::new();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                work.push((mono_add(ma, mb), ca.mul(cb)));
            }
        }
        while let Some((m, c)) = work.pop() {
            if c.is_provably_zero() {
                continue;
            }
            // reduce the highest overflowing stage first
            match m.iter().rposition(|&e| e >= p) {
                None => out.insert_term(m, c),
                Some(j) => {
                    let mut rest = m.clone();
                    rest[j] -= p;
                    let stage = &self.stages[j];
                    // a_j^p = rhs (pth root) or a_j + rhs (shift)
                    for (mr, cr) in &stage.rhs.terms {
                        work.push((mono_add(&rest, mr), c.mul(cr)));
                    }
                    if stage.relation == RelationKind::ArtinSchreierShift {
                        let mut with_gen = rest.clone();
                        if with_gen.len() <= j {
                            with_gen.resize(j + 1, 0);
                        }
                        with_gen[j] += 1;
                        work.push((trim(with_gen), c));
                    }
                }
            }
        }
        out
    }

    pub fn mul_int(&self, a: &TowerElement, n: i64) -> TowerElement {
        self.mul(a, &self.constant_int(n))
    }

    pub fn pow(&self, a: &TowerElement, n: u32) -> TowerElement {
        let mut acc = self.constant_int(1);
        let mut base = a.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            n >>= 1;
            if n > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    pub fn pow_int(&self, a: &TowerElement, n: i64) -> Result<TowerElement, TowerError> {
        if n >= 0 {
            Ok(self.pow(a, n as u32))
        } else {
            let inv = self.inv(a)?;
            Ok(self.pow(&inv, (-n) as u32))
        }
    }

    /// Exact valuation of an element: the minimum over its terms, which
    /// is attained by a unique term thanks to the basis invariant.
    pub fn valuation(&self, a: &TowerElement) -> Result<Val, TowerError> {
        let mut min_known: Option<Rat> = None;
        let mut min_opaque: Option<Rat> = None;
        for (m, c) in &a.terms {
            let mv = self.mono_value(m);
            if c.is_opaque() {
                let floor = c.val_floor(&self.base).expect("opaque coeff has a floor");
                let bound = mv + rat_int(floor);
                if min_opaque.as_ref().is_none_or(|b| bound < *b) {
                    min_opaque = Some(bound);
                }
            } else if let Some(v) = c.val_floor(&self.base) {
                let val = mv + rat_int(v);
                if min_known.as_ref().is_none_or(|b| val < *b) {
                    min_known = Some(val);
                }
            }
        }
        match (min_known, min_opaque) {
            (None, None) => Ok(Val::Infinite),
            (Some(v), None) => Ok(Val::Finite(v)),
            (Some(v), Some(b)) if v < b => Ok(Val::Finite(v)),
            _ => Err(TowerError::PrecisionExhausted),
        }
    }

    /// Valuation as a rank-1 group element (infinity for zero).
    pub fn valuation_elem(&self, a: &TowerElement) -> Result<GroupElement, TowerError> {
        Ok(match self.valuation(a)? {
            Val::Finite(v) => GroupElement::scalar(v),
            Val::Infinite => GroupElement::infinite(1),
        })
    }

    /// The unique minimal-value term as `(coefficient, monomial)`.
    pub fn leading_term(&self, a: &TowerElement) -> Result<Option<(Coeff, Mono)>, TowerError> {
        let v = match self.valuation(a)? {
            Val::Finite(v) => v,
            Val::Infinite => return Ok(None),
        };
        for (m, c) in &a.terms {
            if c.is_opaque() {
                continue;
            }
            if let Some(cv) = c.val_floor(&self.base) {
                if self.mono_value(m) + rat_int(cv) == v {
                    return Ok(Some((c.clone(), m.clone())));
                }
            }
        }
        unreachable!("valuation certified but no leading term found")
    }

    /// Residue of a valuation-0 element in `F_p`. The value-0 term is
    /// necessarily the constant one.
    pub fn residue(&self, a: &TowerElement) -> Result<u32, TowerError> {
        match self.valuation(a)? {
            Val::Finite(v) if v.is_zero() => {}
            _ => return Err(TowerError::NonUnit),
        }
        let c = a.terms.get(&Mono::new()).ok_or(TowerError::NonUnit)?;
        c.residue(&self.base)
    }

    /// Multiplicative inverse via extended Euclid over the top stage,
    /// recursing into the prefix tower for coefficient inverses.
    /// Single-term elements invert through the stage relations directly,
    /// which keeps the hot paths (reciprocals of generators and digit
    /// monomials) cheap in deep towers.
    pub fn inv(&self, a: &TowerElement) -> Result<TowerElement, TowerError> {
        if a.is_provably_zero() {
            return Err(TowerError::DivisionByZero);
        }
        let k = a.top_stage();
        if k == 0 {
            let c = a.terms.get(&Mono::new()).expect("constant element");
            return Ok(TowerElement::from_coeff(c.inv(&self.base)?));
        }
        if a.terms.len() == 1 {
            let (m, c) = a.terms.iter().next().expect("single term");
            let mut out = TowerElement::from_coeff(c.inv(&self.base)?);
            for (j, &e) in m.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let gi = self.generator_inverse(j + 1)?;
                for _ in 0..e {
                    out = self.mul(&out, &gi);
                }
            }
            return Ok(out);
        }
        // View as a polynomial in the stage-k generator over the prefix.
        let p = self.p() as usize;
        let mut coeffs: Vec<TowerElement> = vec![TowerElement::zero(); p];
        for (m, c) in &a.terms {
            let e = m.get(k - 1).copied().unwrap_or(0) as usize;
            let mut rest = m.clone();
            if rest.len() >= k {
                rest[k - 1] = 0;
            }
            coeffs[e] = self.add(&coeffs[e], &TowerElement::term(c.clone(), rest));
        }
        let g = crate::poly::Poly::new(coeffs);
        let f = self.stage_min_poly(k);
        let s = crate::poly::invert_mod(self, &g, &f).map_err(|e| match e {
            TowerError::NotInvertible(_) => {
                TowerError::NotInvertible(format!("stage {} relation is not coprime", k))
            }
            other => other,
        })?;
        // reattach the stage-k exponents
        let mut out = TowerElement::zero();
        for (e, c) in s.coeffs().iter().enumerate() {
            if c.is_provably_zero() {
                continue;
            }
            let mut m = vec![0u8; k];
            m[k - 1] = e as u8;
            out = self.add(&out, &self.mul(c, &TowerElement::term(Coeff::one(&self.base), m)));
        }
        Ok(out)
    }

    pub fn div(&self, a: &TowerElement, b: &TowerElement) -> Result<TowerElement, TowerError> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    /// `1/a_idx` through the stage relation: `a^p = rhs` gives
    /// `a^(p-1)/rhs`, and `a^p - a = rhs` gives `(a^(p-1) - 1)/rhs`.
    fn generator_inverse(&self, idx: usize) -> Result<TowerElement, TowerError> {
        let stage = &self.stages[idx - 1];
        let gen = self.generator(idx);
        let num = match stage.relation {
            RelationKind::PthRoot => self.pow(&gen, self.p() - 1),
            RelationKind::ArtinSchreierShift => {
                self.sub(&self.pow(&gen, self.p() - 1), &self.constant_int(1))
            }
        };
        Ok(self.mul(&num, &self.inv(&stage.rhs)?))
    }

    /// Monic minimal polynomial of the stage-`idx` generator over the
    /// prefix tower.
    pub fn stage_min_poly(&self, idx: usize) -> crate::poly::Poly {
        let p = self.p() as usize;
        let stage = &self.stages[idx - 1];
        let mut coeffs = vec![TowerElement::zero(); p + 1];
        coeffs[p] = self.constant_int(1);
        coeffs[0] = self.neg(&stage.rhs);
        if stage.relation == RelationKind::ArtinSchreierShift {
            coeffs[1] = self.constant_int(-1);
        }
        crate::poly::Poly::new(coeffs)
    }

    /// Outcome of a leading-term p-th root step.
    ///
    /// Returns `Root(y)` with `v(x - y^p) > v(x)`: the p-th root of the
    /// leading monomial (its value must be p-divisible within the
    /// materialized stages) times the residue digit, which exists
    /// because the Frobenius is the identity on the prime field.
    pub fn pth_root_step(&self, x: &TowerElement) -> Result<RootOutcome, TowerError> {
        let v = match self.valuation(x)? {
            Val::Finite(v) => v,
            Val::Infinite => return Err(TowerError::DivisionByZero),
        };
        let target = v.clone() / rat_int(self.p() as i64);
        let (k, mono) = match self.monomial_for_value(&target) {
            Some(t) => t,
            None => return Ok(RootOutcome::NeedsDeeperTower),
        };
        let y0 = TowerElement::term(Coeff::uniformizer_pow(&self.base, k), mono);
        let y0p = self.pow(&y0, self.p());
        // The leading terms of x and y0^p share their value, hence (by
        // the distinct-values-mod-base invariant) their monomial; the
        // digit is the residue ratio of their leading coefficients.
        let (cx, mx) = self.leading_term(x)?.expect("x is nonzero");
        let (cy, my) = self.leading_term(&y0p)?.expect("y0^p is nonzero");
        debug_assert_eq!(mx, my, "leading monomials must agree");
        let rx = cx.leading_residue(&self.base)?;
        let ry = cy.leading_residue(&self.base)?;
        let digit = rx * crate::laurent::mod_inverse(ry, self.p()) % self.p();
        debug_assert!(digit != 0);
        let y = self.mul_int(&y0, digit as i64);
        #[cfg(debug_assertions)]
        {
            let r = self.sub(x, &self.pow(&y, self.p()));
            match self.valuation(&r) {
                Ok(Val::Finite(nv)) => debug_assert!(nv > v),
                Ok(Val::Infinite) => {}
                Err(_) => {}
            }
        }
        Ok(RootOutcome::Root(y))
    }

    /// Render an element with stage names; terms in monomial order.
    pub fn format_element(&self, a: &TowerElement) -> String {
        if a.terms.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (m, c) in &a.terms {
            let mut factors = Vec::new();
            let coeff_str = match c {
                Coeff::Rat(r) => r.to_string(),
                Coeff::Ser(s) => format!("({})", s),
            };
            let coeff_is_one = match c {
                Coeff::Rat(r) => r.is_one(),
                Coeff::Ser(_) => false,
            };
            if !coeff_is_one || m.is_empty() {
                factors.push(coeff_str);
            }
            for (i, &e) in m.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(self.stages[i].name.clone()),
                    _ => factors.push(format!("{}^{}", self.stages[i].name, e)),
                }
            }
            parts.push(factors.join("*"));
        }
        parts.join(" + ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Val {
    Finite(Rat),
    Infinite,
}

impl Val {
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Val::Finite(v) => Some(v),
            Val::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Val::Infinite)
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Finite(v) => write!(f, "{}", v),
            Val::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RootOutcome {
    Root(TowerElement),
    NeedsDeeperTower,
}

fn frac_part(x: &Rat) -> Rat {
    x - x.floor()
}

// Towers are immutable after validation and elements are plain values,
// so classification jobs may share them across threads.
const _: () = {
    const fn assert_shareable<T: Send + Sync>() {}
    assert_shareable::<Tower>();
    assert_shareable::<TowerElement>();
};

fn int_to_i64(n: &BigInt) -> Result<i64, TowerError> {
    n.try_into()
        .map_err(|_| TowerError::MonomialBudget(MONOMIAL_BUDGET))
}

fn next_stage_name(prev: &str) -> String {
    let digits_at = prev
        .rfind(|c: char| !c.is_ascii_digit())
        .map(|i| i + 1)
        .unwrap_or(0);
    let (stem, digits) = prev.split_at(digits_at);
    match digits.parse::<u64>() {
        Ok(n) => format!("{}{}", stem, n + 1),
        Err(_) => format!("{}2", prev),
    }
}
