//! The built-in reproduction families.
//!
//! Three extension families over recursively defined towers:
//!
//! * `indep`: mixed characteristic, stages `a_i^p = a_{i-1}` starting
//!   from `a_0 = p`, extension `z^p - z = 1/p`. Independent defect; the
//!   tower field is semitame.
//! * `dep`: mixed characteristic, stages `a_i^p - a_i = -a_{i-1}`
//!   starting from `a_0 = -1/p`, extension `z^p = 1/p`. Dependent
//!   defect; the tower field fails the p-th power axiom.
//! * `equalchar`: the perfect hull of `F_p((t))` materialized as stages
//!   `a_i^p = a_{i-1}` from `a_0 = t`, extension `z^p - z = 1/t`.
//!   Independent defect.
//!
//! For each family the greedy refinement reproduces a closed-form
//! approximant sequence `b_i` whose residual is known exactly; the step
//! checker verifies that identity at every depth, which is what lets a
//! report claim pattern-proven certification.

use num::Signed;

use crate::defect::{DefectError, ExtensionKind, ExtensionSpec};
use crate::ogroup::{Component, GroupDescriptor, GroupElement};
use crate::tower::{BaseField, Coeff, FamilyRule, RelationKind, Tower, TowerElement, Val};
use crate::{rat, rat_int, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Independent,
    Dependent,
    EqualChar,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Independent => "indep",
            FamilyKind::Dependent => "dep",
            FamilyKind::EqualChar => "equalchar",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "indep" => Some(FamilyKind::Independent),
            "dep" => Some(FamilyKind::Dependent),
            "equalchar" => Some(FamilyKind::EqualChar),
            _ => None,
        }
    }
}

pub type StepCheckFn =
    fn(&Tower, usize, &TowerElement, &TowerElement) -> Result<bool, DefectError>;

#[derive(Debug, Clone)]
pub struct BuiltinFamily {
    pub kind: FamilyKind,
    pub spec: ExtensionSpec,
    /// Declared value group of the limit field.
    pub limit_group: GroupDescriptor,
    pub vp: GroupElement,
    pub check: StepCheckFn,
    pub notes: Vec<String>,
}

impl BuiltinFamily {
    /// Closed-form approximant `b_i` over a tower with at least `i`
    /// stages.
    pub fn approximant(&self, tower: &Tower, i: usize) -> Result<TowerElement, DefectError> {
        approximant(self.kind, tower, i)
    }
}

fn approximant(kind: FamilyKind, tower: &Tower, i: usize) -> Result<TowerElement, DefectError> {
    assert!(i >= 1 && i <= tower.stages().len(), "stage {} not materialized", i);
    let mut acc = TowerElement::zero();
    for j in 1..=i {
        let term = match kind {
            FamilyKind::Dependent => tower.generator(j),
            FamilyKind::Independent | FamilyKind::EqualChar => {
                tower.inv(&tower.generator(j))?
            }
        };
        acc = tower.add(&acc, &term);
    }
    Ok(acc)
}

/// `v(x) > 0`, with infinity counting as positive.
fn strictly_positive(tower: &Tower, x: &TowerElement) -> Result<bool, DefectError> {
    Ok(match tower.valuation(x)? {
        Val::Infinite => true,
        Val::Finite(v) => v.is_positive(),
    })
}

fn indep_check(
    tower: &Tower,
    step: usize,
    approximant_elem: &TowerElement,
    residual: &TowerElement,
) -> Result<bool, DefectError> {
    let b = approximant(FamilyKind::Independent, tower, step)?;
    if &b != approximant_elem {
        return Ok(false);
    }
    // r_i = 1/a_i modulo positive-value terms
    let lead = tower.inv(&tower.generator(step))?;
    strictly_positive(tower, &tower.sub(residual, &lead))
}

fn dep_check(
    tower: &Tower,
    step: usize,
    approximant_elem: &TowerElement,
    residual: &TowerElement,
) -> Result<bool, DefectError> {
    let b = approximant(FamilyKind::Dependent, tower, step)?;
    if &b != approximant_elem {
        return Ok(false);
    }
    // r_i = -a_i modulo positive-value terms
    let lead = tower.neg(&tower.generator(step));
    strictly_positive(tower, &tower.sub(residual, &lead))
}

fn equalchar_check(
    tower: &Tower,
    step: usize,
    approximant_elem: &TowerElement,
    residual: &TowerElement,
) -> Result<bool, DefectError> {
    let b = approximant(FamilyKind::EqualChar, tower, step)?;
    if &b != approximant_elem {
        return Ok(false);
    }
    // exact in characteristic p: r_i = 1/a_i on the nose
    let lead = tower.inv(&tower.generator(step))?;
    Ok(residual == &lead)
}

fn limit_group(p: u32) -> GroupDescriptor {
    GroupDescriptor::new(vec![Component::PDivisible { p }])
}

/// Value group of the stage-`i` field, `(1/p^i)Z`.
pub fn stage_group(p: u32, i: u32) -> GroupDescriptor {
    GroupDescriptor::new(vec![Component::PPowerLattice { p, level: i }])
}

pub fn family(kind: FamilyKind, p: u32, stages: usize) -> Result<BuiltinFamily, DefectError> {
    match kind {
        FamilyKind::Independent => independent_family(p, stages),
        FamilyKind::Dependent => dependent_family(p, stages),
        FamilyKind::EqualChar => equalchar_family(p, stages),
    }
}

/// Mixed characteristic, `a_i^p = a_{i-1}` from `a_0 = p`, extension
/// `z^p - z = 1/p`.
pub fn independent_family(p: u32, stages: usize) -> Result<BuiltinFamily, DefectError> {
    let mut tower = Tower::new(BaseField::mixed(p)).with_family(FamilyRule {
        relation: RelationKind::PthRoot,
        rhs_expr: "prev".to_string(),
    });
    let mut value = Rat::from(num::BigInt::from(1));
    for i in 1..=stages {
        value /= rat_int(p as i64);
        let rhs = if i == 1 {
            tower.constant_int(p as i64)
        } else {
            tower.generator(i - 1)
        };
        tower = tower.push_stage(&format!("a{}", i), RelationKind::PthRoot, rhs, value.clone())?;
    }
    let u = TowerElement::from_coeff(Coeff::Rat(rat(1, p as i64)));
    let spec = ExtensionSpec::new(tower, ExtensionKind::ASShift, u);
    Ok(BuiltinFamily {
        kind: FamilyKind::Independent,
        spec,
        limit_group: limit_group(p),
        vp: GroupElement::scalar(rat_int(1)),
        check: indep_check,
        notes: vec![],
    })
}

/// Mixed characteristic, `a_i^p - a_i = -a_{i-1}` from `a_0 = -1/p`,
/// extension `z^p = 1/p`.
pub fn dependent_family(p: u32, stages: usize) -> Result<BuiltinFamily, DefectError> {
    let mut tower = Tower::new(BaseField::mixed(p)).with_family(FamilyRule {
        relation: RelationKind::ArtinSchreierShift,
        rhs_expr: "-prev".to_string(),
    });
    let mut value = Rat::from(num::BigInt::from(-1));
    for i in 1..=stages {
        value /= rat_int(p as i64);
        let rhs = if i == 1 {
            // -a_0 = 1/p
            TowerElement::from_coeff(Coeff::Rat(rat(1, p as i64)))
        } else {
            tower.neg(&tower.generator(i - 1))
        };
        tower = tower.push_stage(
            &format!("a{}", i),
            RelationKind::ArtinSchreierShift,
            rhs,
            value.clone(),
        )?;
    }
    let u = TowerElement::from_coeff(Coeff::Rat(rat(1, p as i64)));
    let spec = ExtensionSpec::new(tower, ExtensionKind::Kummer, u);
    Ok(BuiltinFamily {
        kind: FamilyKind::Dependent,
        spec,
        limit_group: limit_group(p),
        vp: GroupElement::scalar(rat_int(1)),
        check: dep_check,
        notes: vec![format!(
            "sign note: the declared stage values are v(a_i) = -1/{p}^i, forced by v(a_0) = -1 under the shift recurrence; gap values inherit the negative sign",
            p = p
        )],
    })
}

/// The perfect hull of `F_p((t))`: stages `a_i^p = a_{i-1}` from
/// `a_0 = t`, extension `z^p - z = 1/t`.
pub fn equalchar_family(p: u32, stages: usize) -> Result<BuiltinFamily, DefectError> {
    let base = BaseField::equal(p);
    let mut tower = Tower::new(base).with_family(FamilyRule {
        relation: RelationKind::PthRoot,
        rhs_expr: "prev".to_string(),
    });
    let mut value = Rat::from(num::BigInt::from(1));
    for i in 1..=stages {
        value /= rat_int(p as i64);
        let rhs = if i == 1 {
            TowerElement::from_coeff(Coeff::uniformizer(&base))
        } else {
            tower.generator(i - 1)
        };
        tower = tower.push_stage(&format!("a{}", i), RelationKind::PthRoot, rhs, value.clone())?;
    }
    let u = TowerElement::from_coeff(Coeff::uniformizer_pow(&base, -1));
    let spec = ExtensionSpec::new(tower, ExtensionKind::ASShift, u);
    Ok(BuiltinFamily {
        kind: FamilyKind::EqualChar,
        spec,
        limit_group: limit_group(p),
        vp: GroupElement::scalar(rat_int(1)),
        check: equalchar_check,
        notes: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_values() {
        let fam = independent_family(2, 4).unwrap();
        let t = &fam.spec.tower;
        for (i, s) in t.stages().iter().enumerate() {
            assert_eq!(s.value, rat(1, 2i64.pow(i as u32 + 1)));
        }
        let fam = dependent_family(3, 3).unwrap();
        for (i, s) in fam.spec.tower.stages().iter().enumerate() {
            assert_eq!(s.value, rat(-1, 3i64.pow(i as u32 + 1)));
        }
        let fam = equalchar_family(2, 3).unwrap();
        for (i, s) in fam.spec.tower.stages().iter().enumerate() {
            assert_eq!(s.value, rat(1, 2i64.pow(i as u32 + 1)));
        }
    }

    #[test]
    fn family_rule_extends() {
        let fam = independent_family(2, 2).unwrap();
        let t = fam.spec.tower.extend_by_family().unwrap();
        assert_eq!(t.stages().len(), 3);
        assert_eq!(t.stages()[2].name, "a3");
        assert_eq!(t.stages()[2].value, rat(1, 8));

        let fam = dependent_family(2, 1).unwrap();
        let t = fam.spec.tower.extend_by_family().unwrap();
        assert_eq!(t.stages()[1].value, rat(-1, 4));
    }

    #[test]
    fn approximants() {
        let fam = independent_family(2, 3).unwrap();
        let t = &fam.spec.tower;
        let b2 = fam.approximant(t, 2).unwrap();
        let expect = t.add(
            &t.inv(&t.generator(1)).unwrap(),
            &t.inv(&t.generator(2)).unwrap(),
        );
        assert_eq!(b2, expect);
    }
}
