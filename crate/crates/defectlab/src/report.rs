//! Report serialization.
//!
//! All rationals travel as `"num/den"` strings so no float ever touches
//! the pipeline; structs serialize in declaration order, which together
//! with seeded sampling makes reports byte-stable.

use serde::{Deserialize, Serialize};

use crate::axioms::{ClassVerdict, DrvrVerdict, FieldClassVerdict};
use crate::cuts::{Cut, FinalSegment, Provenance, Side};
use crate::defect::{Certification, ClassificationReport, Verdict};
use crate::ogroup::GroupElement;
use crate::tower::Tower;
use crate::trace::TraceProbe;
use crate::Rat;

pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: num::BigInt = num
        .parse()
        .map_err(|e| format!("bad numerator '{}': {}", num, e))?;
    let d: num::BigInt = den
        .parse()
        .map_err(|e| format!("bad denominator '{}': {}", den, e))?;
    if d == num::BigInt::from(0) {
        return Err("zero denominator".to_string());
    }
    Ok(Rat::new(n, d))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CutJson {
    pub boundary: Vec<String>,
    pub subgroup_tail: usize,
    pub side: String,
    pub provenance: ProvenanceJson,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceJson {
    Exact,
    CertifiedFromSamples(usize),
    Conjectured,
}

impl From<&Cut> for CutJson {
    fn from(c: &Cut) -> Self {
        CutJson {
            boundary: c.boundary().coords().iter().map(rat_to_string).collect(),
            subgroup_tail: c.subgroup().tail_index(),
            side: match c.side() {
                Side::Minus => "-".to_string(),
                Side::Plus => "+".to_string(),
            },
            provenance: match c.provenance() {
                Provenance::Exact => ProvenanceJson::Exact,
                Provenance::CertifiedFromSamples(n) => ProvenanceJson::CertifiedFromSamples(*n),
                Provenance::Conjectured => ProvenanceJson::Conjectured,
            },
        }
    }
}

impl CutJson {
    pub fn to_cut(&self) -> Result<Cut, String> {
        let coords: Result<Vec<Rat>, String> =
            self.boundary.iter().map(|s| parse_rat(s)).collect();
        let coords = coords?;
        let side = match self.side.as_str() {
            "-" => Side::Minus,
            "+" => Side::Plus,
            other => return Err(format!("bad side '{}'", other)),
        };
        let provenance = match &self.provenance {
            ProvenanceJson::Exact => Provenance::Exact,
            ProvenanceJson::CertifiedFromSamples(n) => Provenance::CertifiedFromSamples(*n),
            ProvenanceJson::Conjectured => Provenance::Conjectured,
        };
        Ok(Cut::new(
            GroupElement::finite(coords),
            crate::ogroup::ConvexSubgroup::new(self.subgroup_tail),
            side,
            provenance,
        ))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FinalSegmentJson {
    pub above: CutJson,
}

impl From<&FinalSegment> for FinalSegmentJson {
    fn from(f: &FinalSegment) -> Self {
        FinalSegmentJson {
            above: CutJson::from(f.cut()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StepJson {
    pub i: usize,
    pub approximant: String,
    pub gap: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CertificationJson {
    pub mode: String,
    pub depth: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassificationJson {
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict_subgroup_tail: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<CutJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_distance: Option<CutJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<FinalSegmentJson>,
    pub steps: Vec<StepJson>,
    pub certification: CertificationJson,
    pub notes: Vec<String>,
}

pub fn classification_json(report: &ClassificationReport) -> ClassificationJson {
    let tower: &Tower = &report.working_spec.tower;
    let steps = report
        .record
        .as_ref()
        .map(|rec| {
            rec.steps
                .iter()
                .enumerate()
                .map(|(i, s)| StepJson {
                    i: i + 1,
                    approximant: tower.format_element(&s.approximant),
                    gap: rat_to_string(&s.gap),
                })
                .collect()
        })
        .unwrap_or_default();
    ClassificationJson {
        verdict: report.verdict.as_str().to_string(),
        verdict_subgroup_tail: match &report.verdict {
            Verdict::IndependentDefect(h) => Some(h.tail_index()),
            _ => None,
        },
        defect: report.defect.map(|d| d.to_string()),
        distance: report.distance.as_ref().map(CutJson::from),
        generator_distance: report.generator_distance.as_ref().map(CutJson::from),
        sigma_e: report.sigma_e.as_ref().map(FinalSegmentJson::from),
        steps,
        certification: match &report.certification {
            Certification::PatternProven(d) => CertificationJson {
                mode: "pattern_proven".to_string(),
                depth: *d,
            },
            Certification::Empirical(d) => CertificationJson {
                mode: "empirical".to_string(),
                depth: *d,
            },
        },
        notes: report.notes.clone(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ProbeSampleJson {
    pub value: String,
    pub trace_value: Option<String>,
    pub near_boundary: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TraceProbeJson {
    pub predicted_cut: CutJson,
    pub coarsening_ideal_form: bool,
    pub all_above: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closest_approach: Option<String>,
    pub samples: Vec<ProbeSampleJson>,
}

pub fn trace_probe_json(probe: &TraceProbe) -> TraceProbeJson {
    TraceProbeJson {
        predicted_cut: CutJson::from(&probe.predicted_cut),
        coarsening_ideal_form: probe.predicted_is_coarsening_ideal,
        all_above: probe.all_above,
        closest_approach: probe.closest_approach.as_ref().map(rat_to_string),
        samples: probe
            .samples
            .iter()
            .map(|s| ProbeSampleJson {
                value: rat_to_string(&s.input_value),
                trace_value: s.trace_value.as_ref().map(rat_to_string),
                near_boundary: s.near_boundary,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DrvrJson {
    VerifiedToDepth {
        depth: usize,
    },
    RefutedUpToBudget {
        witness: String,
        best_by_stage: Vec<(usize, Option<String>)>,
    },
    Exact,
    Inconclusive {
        witness: String,
        best: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClassJson {
    Verified { depth: usize },
    Refuted,
    Inconclusive,
}

impl From<&ClassVerdict> for ClassJson {
    fn from(c: &ClassVerdict) -> Self {
        match c {
            ClassVerdict::Verified(d) => ClassJson::Verified { depth: *d },
            ClassVerdict::Refuted => ClassJson::Refuted,
            ClassVerdict::Inconclusive => ClassJson::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AxiomsJson {
    pub drvg: bool,
    pub drvp: bool,
    pub drst: bool,
    pub drvr: DrvrJson,
    pub semitame: ClassJson,
    pub deeply_ramified: ClassJson,
    pub gdr: ClassJson,
}

pub fn axioms_json(v: &FieldClassVerdict) -> AxiomsJson {
    AxiomsJson {
        drvg: v.drvg,
        drvp: v.drvp,
        drst: v.drst,
        drvr: match &v.drvr {
            DrvrVerdict::VerifiedToDepth(d) => DrvrJson::VerifiedToDepth { depth: *d },
            DrvrVerdict::RefutedUpToBudget {
                witness,
                best_by_stage,
            } => DrvrJson::RefutedUpToBudget {
                witness: witness.clone(),
                best_by_stage: best_by_stage
                    .iter()
                    .map(|(i, b)| (*i, b.as_ref().map(rat_to_string)))
                    .collect(),
            },
            DrvrVerdict::Exact => DrvrJson::Exact,
            DrvrVerdict::Inconclusive { witness, best } => DrvrJson::Inconclusive {
                witness: witness.clone(),
                best: rat_to_string(best),
            },
        },
        semitame: ClassJson::from(&v.semitame),
        deeply_ramified: ClassJson::from(&v.deeply_ramified),
        gdr: ClassJson::from(&v.gdr),
    }
}

/// Top-level report document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ReportJson {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_probe: Option<TraceProbeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<AxiomsJson>,
}

impl ReportJson {
    pub fn to_pretty_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
