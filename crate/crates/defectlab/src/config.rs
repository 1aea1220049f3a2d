//! Experiment configuration: JSON schema, end-to-end validation, and
//! construction of the domain objects.
//!
//! A config is rejected with a diagnostic naming the violated invariant
//! before any computation starts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms;
use crate::defect::{ExtensionKind, ExtensionSpec};
use crate::expr;
use crate::ogroup::{Component, GroupDescriptor, GroupElement};
use crate::report::parse_rat;
use crate::tower::{BaseField, FamilyRule, RelationKind, Tower, DEFAULT_PRECISION_CAP};
use crate::{rat_int, Rat};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("stage '{stage}': {source}")]
    Stage {
        stage: String,
        source: crate::tower::TowerError,
    },
    #[error("expression in {field}: {source}")]
    Expr {
        field: String,
        source: crate::expr::ExprError,
    },
    #[error(transparent)]
    Tower(#[from] crate::tower::TowerError),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub base: BaseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_group: Option<Vec<ComponentConfig>>,
    /// Embedding of vp in the limit group ("num/den" coordinates).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp: Option<Vec<String>>,
    #[serde(default)]
    pub declared_perfect: bool,
    #[serde(default)]
    pub tower: Vec<StageConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_rule: Option<FamilyRuleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<ExtensionConfig>,
    #[serde(default)]
    pub budget: BudgetConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseConfig {
    pub kind: String,
    pub p: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentConfig {
    Trivial,
    Cyclic { generator: String },
    PPowerLattice { p: u32, level: u32 },
    PDivisible { p: u32 },
    FullRationals,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageConfig {
    pub name: String,
    pub relation: String,
    pub rhs: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyRuleConfig {
    pub relation: String,
    pub rhs: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionConfig {
    pub kind: String,
    pub u: String,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetConfig {
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Precision cap; falls back to the environment default when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<i64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_depth() -> usize {
    6
}
fn default_samples() -> usize {
    100
}
fn default_seed() -> u64 {
    0
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            depth: default_depth(),
            precision: None,
            samples: default_samples(),
            seed: default_seed(),
        }
    }
}

/// Fully validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub tower: Tower,
    pub limit_group: Option<GroupDescriptor>,
    pub vp: Option<GroupElement>,
    pub declared_perfect: bool,
    pub spec: Option<ExtensionSpec>,
    pub budget: BudgetConfig,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    Ok(serde_json::from_str(text)?)
}

fn relation_kind(s: &str, field: &str) -> Result<RelationKind, ConfigError> {
    match s {
        "pth_root" => Ok(RelationKind::PthRoot),
        "as_shift" => Ok(RelationKind::ArtinSchreierShift),
        other => Err(invalid(
            field,
            format!("relation must be 'pth_root' or 'as_shift', got '{}'", other),
        )),
    }
}

fn component(c: &ComponentConfig) -> Result<Component, ConfigError> {
    Ok(match c {
        ComponentConfig::Trivial => Component::Trivial,
        ComponentConfig::Cyclic { generator } => {
            let g = parse_rat(generator).map_err(|m| invalid("value_group.generator", m))?;
            if g <= rat_int(0) {
                return Err(invalid(
                    "value_group.generator",
                    "cyclic generator must be positive",
                ));
            }
            Component::Cyclic(g)
        }
        ComponentConfig::PPowerLattice { p, level } => {
            if !is_prime(*p) {
                return Err(invalid("value_group.p", "p must be prime"));
            }
            Component::PPowerLattice {
                p: *p,
                level: *level,
            }
        }
        ComponentConfig::PDivisible { p } => {
            if !is_prime(*p) {
                return Err(invalid("value_group.p", "p must be prime"));
            }
            Component::PDivisible { p: *p }
        }
        ComponentConfig::FullRationals => Component::FullRationals,
    })
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Validate a config end to end and build the experiment.
pub fn build(config: &ExperimentConfig) -> Result<Experiment, ConfigError> {
    if !is_prime(config.base.p) {
        return Err(invalid("base.p", "p must be prime"));
    }
    let base = match config.base.kind.as_str() {
        "mixed" => BaseField::mixed(config.base.p),
        "equal" => BaseField::equal(config.base.p),
        other => {
            return Err(invalid(
                "base.kind",
                format!("must be 'mixed' or 'equal', got '{}'", other),
            ))
        }
    };
    let base = base.with_cap(config.budget.precision.unwrap_or(DEFAULT_PRECISION_CAP));

    let mut tower = Tower::new(base);
    for stage in &config.tower {
        if stage.name == "t" || stage.name == "prev" {
            return Err(invalid(
                "tower.name",
                format!("'{}' is a reserved identifier", stage.name),
            ));
        }
        let relation = relation_kind(&stage.relation, "tower.relation")?;
        let rhs_expr = expr::parse(&stage.rhs).map_err(|e| ConfigError::Expr {
            field: format!("tower['{}'].rhs", stage.name),
            source: e,
        })?;
        let rhs = expr::evaluate(&rhs_expr, &tower).map_err(|e| ConfigError::Expr {
            field: format!("tower['{}'].rhs", stage.name),
            source: e,
        })?;
        let value = parse_rat(&stage.value)
            .map_err(|m| invalid(&format!("tower['{}'].value", stage.name), m))?;
        tower = tower
            .push_stage(&stage.name, relation, rhs, value)
            .map_err(|e| ConfigError::Stage {
                stage: stage.name.clone(),
                source: e,
            })?;
    }
    if let Some(rule) = &config.family_rule {
        let relation = relation_kind(&rule.relation, "family_rule.relation")?;
        expr::parse(&rule.rhs).map_err(|e| ConfigError::Expr {
            field: "family_rule.rhs".to_string(),
            source: e,
        })?;
        tower = tower.with_family(FamilyRule {
            relation,
            rhs_expr: rule.rhs.clone(),
        });
    }

    let limit_group = match &config.value_group {
        Some(components) => {
            if components.is_empty() {
                return Err(invalid("value_group", "must have rank >= 1"));
            }
            let comps: Result<Vec<Component>, ConfigError> =
                components.iter().map(component).collect();
            Some(GroupDescriptor::new(comps?))
        }
        None => None,
    };

    let vp = match (&config.vp, &limit_group) {
        (Some(coords), Some(group)) => {
            let parsed: Result<Vec<Rat>, String> =
                coords.iter().map(|s| parse_rat(s)).collect();
            let elem =
                GroupElement::finite(parsed.map_err(|m| invalid("vp", m))?);
            if elem.rank() != group.rank() {
                return Err(invalid("vp", "rank does not match value_group"));
            }
            if base.is_mixed() && !group.contains(&elem).unwrap_or(false) {
                return Err(invalid("vp", "vp must be a member of value_group"));
            }
            Some(elem)
        }
        (Some(_), None) => {
            return Err(invalid("vp", "vp given without a value_group"));
        }
        (None, Some(group)) => {
            if base.is_mixed() {
                // default normalization vp = 1 in the leading coordinate
                let mut coords = vec![Rat::from(num::BigInt::from(0)); group.rank()];
                coords[group.rank() - 1] = rat_int(1);
                let elem = GroupElement::finite(coords);
                if !group.contains(&elem).unwrap_or(false) {
                    return Err(invalid(
                        "vp",
                        "default vp = 1 is not in value_group; give the embedding explicitly",
                    ));
                }
                Some(elem)
            } else {
                None
            }
        }
        (None, None) => None,
    };

    let spec = match &config.extension {
        Some(ext) => {
            let kind = match ext.kind.as_str() {
                "kummer" => ExtensionKind::Kummer,
                "as" | "as_shift" => ExtensionKind::ASShift,
                other => {
                    return Err(invalid(
                        "extension.kind",
                        format!("must be 'kummer' or 'as', got '{}'", other),
                    ))
                }
            };
            let u_expr = expr::parse(&ext.u).map_err(|e| ConfigError::Expr {
                field: "extension.u".to_string(),
                source: e,
            })?;
            let u = expr::evaluate(&u_expr, &tower).map_err(|e| ConfigError::Expr {
                field: "extension.u".to_string(),
                source: e,
            })?;
            if u.is_provably_zero() {
                return Err(invalid("extension.u", "generator must be nonzero"));
            }
            Some(ExtensionSpec::new(tower.clone(), kind, u))
        }
        None => None,
    };

    if config.budget.depth < 3 {
        return Err(invalid("budget.depth", "depth must be at least 3"));
    }

    Ok(Experiment {
        tower,
        limit_group,
        vp,
        declared_perfect: config.declared_perfect,
        spec,
        budget: config.budget.clone(),
    })
}

/// Config equivalent to a built-in family, echoed into reports.
pub fn builtin_config(kind: crate::builtin::FamilyKind, p: u32, budget: BudgetConfig) -> ExperimentConfig {
    use crate::builtin::FamilyKind;
    let (base_kind, stage1_rhs, family_relation, family_rhs, ext_kind, ext_u) = match kind {
        FamilyKind::Independent => ("mixed", format!("{}", p), "pth_root", "prev", "as", format!("1/{}", p)),
        FamilyKind::Dependent => ("mixed", format!("1/{}", p), "as_shift", "-prev", "kummer", format!("1/{}", p)),
        FamilyKind::EqualChar => ("equal", "t".to_string(), "pth_root", "prev", "as", "1/t".to_string()),
    };
    let stage1_relation = match kind {
        FamilyKind::Dependent => "as_shift",
        _ => "pth_root",
    };
    let value = match kind {
        FamilyKind::Dependent => format!("-1/{}", p),
        _ => format!("1/{}", p),
    };
    ExperimentConfig {
        base: BaseConfig {
            kind: base_kind.to_string(),
            p,
        },
        value_group: Some(vec![ComponentConfig::PDivisible { p }]),
        vp: match kind {
            FamilyKind::EqualChar => None,
            _ => Some(vec!["1/1".to_string()]),
        },
        declared_perfect: matches!(kind, FamilyKind::EqualChar),
        tower: vec![StageConfig {
            name: "a1".to_string(),
            relation: stage1_relation.to_string(),
            rhs: stage1_rhs,
            value,
        }],
        family_rule: Some(FamilyRuleConfig {
            relation: family_relation.to_string(),
            rhs: family_rhs.to_string(),
        }),
        extension: Some(ExtensionConfig {
            kind: ext_kind.to_string(),
            u: ext_u,
            normalize: matches!(kind, FamilyKind::Dependent),
        }),
        budget,
    }
}

/// Inputs for an axioms run derived from an experiment.
pub fn field_class_input<'a>(
    exp: &'a Experiment,
    adversarial: Vec<axioms::Adversarial>,
) -> Result<axioms::FieldClassInput<'a>, ConfigError> {
    let limit_group = exp.limit_group.as_ref().ok_or_else(|| {
        invalid("value_group", "axioms need a declared limit value group")
    })?;
    Ok(axioms::FieldClassInput {
        tower: &exp.tower,
        limit_group,
        vp: exp.vp.as_ref(),
        declared_perfect: exp.declared_perfect,
        adversarial,
        stage_budget: exp.budget.depth + 2,
        samples: exp.budget.samples.max(50),
        seed: exp.budget.seed,
        density_alpha: rat_int(8),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const INDEP_JSON: &str = r#"{
        "base": {"kind": "mixed", "p": 2},
        "value_group": [{"kind": "p_divisible", "p": 2}],
        "vp": ["1/1"],
        "tower": [
            {"name": "a1", "relation": "pth_root", "rhs": "2", "value": "1/2"}
        ],
        "family_rule": {"relation": "pth_root", "rhs": "prev"},
        "extension": {"kind": "as", "u": "1/2"},
        "budget": {"depth": 4, "precision": 64, "samples": 50, "seed": 1}
    }"#;

    #[test]
    fn build_minimal_config() {
        let cfg = parse_config(INDEP_JSON).unwrap();
        let exp = build(&cfg).unwrap();
        assert_eq!(exp.tower.stages().len(), 1);
        assert!(exp.spec.is_some());
        assert!(exp.vp.is_some());
    }

    #[test]
    fn reject_bad_declared_value() {
        let bad = INDEP_JSON.replace("\"value\": \"1/2\"", "\"value\": \"1/4\"");
        let cfg = parse_config(&bad).unwrap();
        match build(&cfg) {
            Err(ConfigError::Stage { stage, .. }) => assert_eq!(stage, "a1"),
            other => panic!("expected stage error, got {:?}", other),
        }
    }

    #[test]
    fn reject_composite_p() {
        let bad = INDEP_JSON.replace("\"p\": 2}", "\"p\": 4}");
        let cfg = parse_config(&bad).unwrap();
        assert!(matches!(build(&cfg), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn reject_reserved_name() {
        let bad = INDEP_JSON.replace("\"name\": \"a1\"", "\"name\": \"t\"");
        let cfg = parse_config(&bad).unwrap();
        assert!(matches!(build(&cfg), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn builtin_config_builds() {
        for kind in [
            crate::builtin::FamilyKind::Independent,
            crate::builtin::FamilyKind::Dependent,
            crate::builtin::FamilyKind::EqualChar,
        ] {
            let cfg = builtin_config(kind, 2, BudgetConfig::default());
            let exp = build(&cfg).unwrap();
            assert!(exp.spec.is_some(), "{:?}", kind);
        }
    }
}
