//! Exact traces on degree-p extensions via Newton's identities, and the
//! trace-ideal probe.
//!
//! Traces are computed symbolically from the minimal polynomial of the
//! generator; conjugates are never constructed (they live outside the
//! representable towers). The probe samples elements of the maximal
//! ideal of the extension, takes their exact traces, and checks the
//! realized values against the image ideal predicted by the distance
//! cut.

use num::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cuts::{Cut, Side};
use crate::defect::{ClassificationReport, DefectError, ExtensionKind, ExtensionSpec};
use crate::ogroup::GroupElement;
use crate::poly::{invert_mod, rem, Poly};
use crate::tower::{BaseKind, Tower, TowerElement, TowerError, Val};
use crate::{rat_int, Rat};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Defect(#[from] DefectError),
    #[error("power sum index {0} out of the supported range 0..=2p")]
    PowerSumRange(usize),
    #[error("trace-ideal probe supports equal-characteristic shift and mixed-characteristic Kummer extensions only")]
    UnsupportedKind,
    #[error("probe requires a resolved distance cut")]
    NoDistance,
    #[error("probe could not draw enough admissible samples ({got}/{want})")]
    SamplingStarved { got: usize, want: usize },
}

/// Monic minimal polynomial of the extension generator.
///
/// Kummer form: `X^p - u`. Shift form: `X^p - X - u`.
pub fn min_poly(spec: &ExtensionSpec) -> Poly {
    let t = &spec.tower;
    let p = spec.p() as usize;
    let mut coeffs = vec![TowerElement::zero(); p + 1];
    coeffs[p] = t.constant_int(1);
    coeffs[0] = t.neg(&spec.u);
    if spec.kind == ExtensionKind::ASShift {
        coeffs[1] = t.constant_int(-1);
    }
    Poly::new(coeffs)
}

/// Power sums `s_0..s_max` of the roots of a monic polynomial, from the
/// elementary symmetric functions by Newton's identities. Valid over
/// any coefficient ring, in particular in characteristic p where
/// `s_0 = p = 0`.
pub fn power_sums(
    tower: &Tower,
    f: &Poly,
    max: usize,
) -> Result<Vec<TowerElement>, TraceError> {
    let n = f.degree().expect("monic polynomial");
    if max > 2 * n {
        return Err(TraceError::PowerSumRange(max));
    }
    // e_k = (-1)^k * coefficient of X^(n-k)
    let e = |k: usize| -> TowerElement {
        if k > n {
            return TowerElement::zero();
        }
        let c = f.coeff(n - k);
        if k.is_multiple_of(2) {
            c
        } else {
            tower.neg(&c)
        }
    };
    let mut s: Vec<TowerElement> = Vec::with_capacity(max + 1);
    s.push(tower.constant_int(n as i64));
    for k in 1..=max {
        let mut acc = TowerElement::zero();
        for i in 1..k.min(n + 1) {
            // (-1)^(i-1) e_i s_(k-i)
            let term = tower.mul(&e(i), &s[k - i]);
            acc = if (i - 1) % 2 == 0 {
                tower.add(&acc, &term)
            } else {
                tower.sub(&acc, &term)
            };
        }
        if k <= n {
            // (-1)^(k-1) k e_k
            let term = tower.mul_int(&e(k), k as i64);
            acc = if (k - 1) % 2 == 0 {
                tower.add(&acc, &term)
            } else {
                tower.sub(&acc, &term)
            };
        }
        s.push(acc);
    }
    Ok(s)
}

/// Trace of `g(z)` where `z` is a root of the monic polynomial `f`;
/// `g` is reduced modulo `f` first.
pub fn trace_poly(tower: &Tower, f: &Poly, g: &Poly) -> Result<TowerElement, TraceError> {
    let g = rem(tower, g, f)?;
    let deg = match g.degree() {
        Some(d) => d,
        None => return Ok(TowerElement::zero()),
    };
    let s = power_sums(tower, f, deg)?;
    let mut acc = TowerElement::zero();
    for (m, c) in g.coeffs().iter().enumerate() {
        acc = tower.add(&acc, &tower.mul(c, &s[m]));
    }
    Ok(acc)
}

/// Trace of `g(z)` for an extension spec.
pub fn trace_of(spec: &ExtensionSpec, g: &Poly) -> Result<TowerElement, TraceError> {
    trace_poly(&spec.tower, &min_poly(spec), g)
}

/// `trace(z^m / f'(z))`: 0 for `1 <= m <= p-2` and 1 for `m = p-1`.
pub fn euler_trace_table_holds(spec: &ExtensionSpec) -> Result<bool, TraceError> {
    let t = &spec.tower;
    let f = min_poly(spec);
    let fp = f.derivative(t);
    let fp_inv = invert_mod(t, &fp, &f).map_err(TraceError::Tower)?;
    let p = spec.p() as usize;
    for m in 1..p {
        let g = Poly::x_pow(t, m).mul(t, &fp_inv);
        let tr = trace_poly(t, &f, &g)?;
        let expected = if m == p - 1 {
            t.constant_int(1)
        } else {
            TowerElement::zero()
        };
        if tr != expected {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone)]
pub struct ProbeSample {
    /// Exact value of the sampled element of the maximal ideal.
    pub input_value: Rat,
    /// Value of its trace; `None` when the trace is exactly zero.
    pub trace_value: Option<Rat>,
    /// Whether the sample came from the closed-form near-boundary
    /// family `d (z - b_i)^(p-1)`.
    pub near_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct TraceProbe {
    /// The predicted image is `{d : vd above this cut}`,
    /// i.e. `-(p-1) * dist E`.
    pub predicted_cut: Cut,
    /// The predicted image has the shape of a coarsening ideal
    /// (idempotent plus-side cut).
    pub predicted_is_coarsening_ideal: bool,
    pub samples: Vec<ProbeSample>,
    /// Every realized trace value lies strictly above the predicted cut.
    pub all_above: bool,
    /// Smallest realized distance above the cut boundary.
    pub closest_approach: Option<Rat>,
}

/// Sample the trace of the maximal ideal of the extension and compare
/// with the image predicted by the distance cut.
///
/// Supported where the trace-ideal statement is established:
/// equal-characteristic shift extensions and mixed-characteristic
/// 1-unit Kummer extensions. Mixed-characteristic shift specs are
/// refused rather than extrapolated.
pub fn trace_ideal_probe(
    report: &ClassificationReport,
    samples: usize,
    seed: u64,
) -> Result<TraceProbe, TraceError> {
    let spec = &report.working_spec;
    let mixed = matches!(spec.tower.base().kind, BaseKind::Mixed { .. });
    let supported = match spec.kind {
        ExtensionKind::ASShift => !mixed,
        ExtensionKind::Kummer => mixed,
    };
    if !supported {
        return Err(TraceError::UnsupportedKind);
    }
    let dist_e = report.distance.as_ref().ok_or(TraceError::NoDistance)?;
    let record = report.record.as_ref().ok_or(TraceError::NoDistance)?;
    let p = spec.p();
    let t = spec.tower.clone();

    // Work with a generator whose approximant gaps are known: the
    // recorded one, rescaled to the 1-unit generator in the Kummer
    // case.
    let (probe_spec, approximants): (ExtensionSpec, Vec<(TowerElement, Rat)>) = match spec.kind {
        ExtensionKind::ASShift => (
            ExtensionSpec {
                tower: t.clone(),
                ..spec.clone()
            },
            record
                .steps
                .iter()
                .map(|s| (s.approximant.clone(), s.gap.clone()))
                .collect(),
        ),
        ExtensionKind::Kummer => {
            let s = report
                .scaling
                .clone()
                .expect("kummer classification records a scaling");
            let vs = match t.valuation(&s)? {
                Val::Finite(v) => v,
                Val::Infinite => unreachable!(),
            };
            let u_unit = t.mul(&spec.u, &t.pow(&s, p));
            let mut ps = spec.clone();
            ps.tower = t.clone();
            ps.u = u_unit;
            ps.one_unit_normalized = true;
            let approx = record
                .steps
                .iter()
                .map(|st| (t.mul(&s, &st.approximant), &st.gap + &vs))
                .collect();
            (ps, approx)
        }
    };

    let f = min_poly(&probe_spec);
    let predicted = dist_e.negate().scale(p - 1);
    let predicted_is_coarsening_ideal =
        predicted.is_idempotent() && predicted.side() == Side::Plus;

    let mut out_samples = Vec::new();
    let mut all_above = true;
    let mut closest: Option<Rat> = None;
    let boundary = predicted.boundary().as_scalar().cloned();

    let mut push_sample = |g: &Poly,
                           value: Rat,
                           near: bool,
                           out: &mut Vec<ProbeSample>|
     -> Result<(), TraceError> {
        let tr = trace_poly(&t, &f, g)?;
        let tv = match t.valuation(&tr)? {
            Val::Finite(v) => Some(v),
            Val::Infinite => None,
        };
        if let Some(v) = &tv {
            if !predicted.is_above(&GroupElement::scalar(v.clone())).unwrap_or(false) {
                all_above = false;
            }
            if let Some(b) = &boundary {
                let d = v - b;
                if closest.as_ref().is_none_or(|c| d < *c) {
                    closest = Some(d);
                }
            }
        }
        out.push(ProbeSample {
            input_value: value,
            trace_value: tv,
            near_boundary: near,
        });
        Ok(())
    };

    // Closed-form samples hugging the boundary: d (z - b_i)^(p-1) with
    // vd as small as the stage grid allows above -(p-1) v(z - b_i).
    let grid_step = Rat::new(1.into(), num::BigInt::from(p).pow(t.stages().len() as u32));
    for (b_i, gap) in &approximants {
        let bound = -(gap * rat_int(p as i64 - 1));
        let mut d_val = grid_floor(&bound, &grid_step) + &grid_step;
        let mut d_elem = None;
        for _ in 0..4 {
            if let Some((k, mono)) = t.monomial_for_value(&d_val) {
                d_elem = Some(TowerElement::term(
                    crate::tower::Coeff::uniformizer_pow(t.base(), k),
                    mono,
                ));
                break;
            }
            d_val += &grid_step;
        }
        let d_elem = match d_elem {
            Some(e) => e,
            None => continue,
        };
        let lin = Poly::new(vec![t.neg(b_i), t.constant_int(1)]);
        let mut g = Poly::constant(d_elem);
        for _ in 0..p - 1 {
            g = g.mul(&t, &lin);
        }
        let input_value = &d_val + gap * rat_int(p as i64 - 1);
        debug_assert!(input_value.is_positive());
        push_sample(&g, input_value, true, &mut out_samples)?;
    }

    // trace(0) = 0 belongs to every predicted ideal.
    push_sample(&Poly::zero(), rat_int(1), false, &mut out_samples)?;

    // Random elements of the maximal ideal, written in the basis
    // (z - b)^j at the two deepest approximants; a sample is admitted
    // only when its value is positive, attained by a unique term, and
    // stable across both expansion points.
    let deep: Vec<&(TowerElement, Rat)> = approximants.iter().rev().take(2).collect();
    if deep.len() == 2 {
        let want = samples;
        let mut got = 0usize;
        let max_attempts = samples.saturating_mul(30).max(200);
        for attempt in 0..max_attempts {
            if got >= want {
                break;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let g = random_poly(&t, p, &mut rng);
            if g.is_zero() {
                continue;
            }
            let v0 = element_value_via(&t, &g, &deep[0].0, &deep[0].1)?;
            let v1 = element_value_via(&t, &g, &deep[1].0, &deep[1].1)?;
            match (v0, v1) {
                (Some(a), Some(b)) if a == b && a.is_positive() => {
                    push_sample(&g, a, false, &mut out_samples)?;
                    got += 1;
                }
                _ => continue,
            }
        }
        if got < want {
            return Err(TraceError::SamplingStarved { got, want });
        }
    }

    Ok(TraceProbe {
        predicted_cut: predicted,
        predicted_is_coarsening_ideal,
        samples: out_samples,
        all_above,
        closest_approach: closest,
    })
}

fn grid_floor(x: &Rat, step: &Rat) -> Rat {
    (x / step).floor() * step
}

fn random_poly(t: &Tower, p: u32, rng: &mut ChaCha8Rng) -> Poly {
    let max_stage = t.stages().len().min(4);
    let mut coeffs = Vec::new();
    for _ in 0..p {
        if rng.gen_bool(0.35) {
            coeffs.push(TowerElement::zero());
            continue;
        }
        let digit = rng.gen_range(1..p) as i64;
        let k = rng.gen_range(-1..3i64);
        let mut mono = vec![0u8; max_stage];
        for e in mono.iter_mut() {
            *e = rng.gen_range(0..p) as u8;
        }
        let c = TowerElement::term(
            crate::tower::Coeff::uniformizer_pow(t.base(), k),
            mono,
        );
        coeffs.push(t.mul_int(&c, digit));
    }
    Poly::new(coeffs)
}

/// Value of `g(z)` through the Taylor expansion at an approximant `c`
/// with known gap `v(z - c)`: the minimum of
/// `v(d_j g(c)) + j * gap` when that minimum is attained exactly once.
pub fn element_value_via(
    t: &Tower,
    g: &Poly,
    c: &TowerElement,
    gap: &Rat,
) -> Result<Option<Rat>, TraceError> {
    let deg = match g.degree() {
        Some(d) => d,
        None => return Ok(None),
    };
    let mut best: Option<Rat> = None;
    let mut unique = true;
    for j in 0..=deg {
        let dj = g.hasse_schmidt(t, j).eval(t, c);
        let v = match t.valuation(&dj)? {
            Val::Finite(v) => v + gap * rat_int(j as i64),
            Val::Infinite => continue,
        };
        match &best {
            None => best = Some(v),
            Some(b) => {
                if v < *b {
                    best = Some(v);
                    unique = true;
                } else if v == *b {
                    unique = false;
                }
            }
        }
    }
    Ok(if unique { best } else { None })
}
