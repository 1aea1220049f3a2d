//! Randomized exact-identity suites.
//!
//! Each check draws seeded random instances, evaluates both sides of an
//! identity with exact arithmetic, and reports the first violation.
//! They back the unit tests at small instance counts and the acceptance
//! suite at full counts.

use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::axioms::random_integral_element;
use crate::builtin::{equalchar_family, independent_family};
use crate::cuts::{Cut, Provenance, Side};
use crate::defect::{ClassificationReport, ExtensionKind, ExtensionSpec};
use crate::ogroup::{ConvexSubgroup, GroupElement};
use crate::poly::Poly;
use crate::tower::{BaseField, Coeff, RelationKind, Tower, TowerElement, Val};
use crate::{rat, rat_int, Rat};

type CheckResult = Result<(), String>;

fn fail(msg: String) -> CheckResult {
    Err(msg)
}

/// Random element with value bounded below by `floor` (in uniformizer
/// units), over the materialized stages.
fn random_element(tower: &Tower, floor: i64, rng: &mut ChaCha8Rng) -> TowerElement {
    let p = tower.p();
    let stages = tower.stages().len();
    let mut acc = TowerElement::zero();
    for _ in 0..rng.gen_range(1..4usize) {
        let mut mono = vec![0u8; stages];
        for e in mono.iter_mut() {
            *e = rng.gen_range(0..p) as u8;
        }
        let mv = tower.mono_value(&mono);
        let lift = (rat_int(floor) - &mv).ceil();
        let k: i64 = lift.to_integer().try_into().unwrap_or(0);
        let k = k + rng.gen_range(0..3i64);
        let digit = rng.gen_range(1..p) as i64;
        let term = TowerElement::term(Coeff::uniformizer_pow(tower.base(), k), mono);
        acc = tower.add(&acc, &tower.mul_int(&term, digit));
    }
    acc
}

fn value_of(tower: &Tower, x: &TowerElement) -> Result<Option<Rat>, String> {
    match tower.valuation(x).map_err(|e| e.to_string())? {
        Val::Finite(v) => Ok(Some(v)),
        Val::Infinite => Ok(None),
    }
}

/// `(b_1 + ... + b_n)^p = b_1^p + ... + b_n^p mod p*O` for integral
/// elements; for elements of value `>= -vp/p` the congruence holds
/// mod `O`.
pub fn congp_check(p: u32, instances: usize, seed: u64) -> CheckResult {
    let fam = independent_family(p, 3).map_err(|e| e.to_string())?;
    let tower = &fam.spec.tower;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        // part 1: integral inputs, congruence mod pO
        let n = rng.gen_range(2..4usize);
        let bs: Vec<TowerElement> = (0..n)
            .map(|_| random_integral_element(tower, &mut rng))
            .collect();
        let sum = bs.iter().fold(TowerElement::zero(), |a, b| tower.add(&a, b));
        let lhs = tower.pow(&sum, p);
        let rhs = bs
            .iter()
            .fold(TowerElement::zero(), |a, b| tower.add(&a, &tower.pow(b, p)));
        let diff = tower.sub(&lhs, &rhs);
        if let Some(v) = value_of(tower, &diff)? {
            if v < rat_int(1) {
                return fail(format!(
                    "congp part 1 failed at case {}: v(diff) = {} < vp",
                    case, v
                ));
            }
        }

        // part 2: values >= -vp/p, congruence mod O
        let bs: Vec<TowerElement> = (0..n)
            .map(|_| {
                let x = random_integral_element(tower, &mut rng);
                if rng.gen_bool(0.5) {
                    // scale down to value >= -1/p using the first stage
                    let inv_a1 = tower.inv(&tower.generator(1)).expect("a1 invertible");
                    tower.mul(&x, &inv_a1)
                } else {
                    x
                }
            })
            .collect();
        let sum = bs.iter().fold(TowerElement::zero(), |a, b| tower.add(&a, b));
        let lhs = tower.pow(&sum, p);
        let rhs = bs
            .iter()
            .fold(TowerElement::zero(), |a, b| tower.add(&a, &tower.pow(b, p)));
        let diff = tower.sub(&lhs, &rhs);
        if let Some(v) = value_of(tower, &diff)? {
            if v.is_negative() {
                return fail(format!(
                    "congp part 2 failed at case {}: v(diff) = {} < 0",
                    case, v
                ));
            }
        }
    }
    Ok(())
}

/// For a unit `eta` and `c` with `v(eta - c) > 0`:
/// `v(eta - c) < vp/(p-1)` iff `v(eta^p - c^p) < p*vp/(p-1)`, with
/// `v(eta^p - c^p) = p * v(eta - c)` in that case, and
/// `v(eta^p - c^p) = vp + v(eta - c)` strictly above the threshold.
pub fn eta_c_check(p: u32, instances: usize, seed: u64) -> CheckResult {
    let fam = independent_family(p, 3).map_err(|e| e.to_string())?;
    let tower = &fam.spec.tower;
    let threshold = rat(1, p as i64 - 1);
    let p_threshold = rat(p as i64, p as i64 - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        // eta: a unit; w = eta - c of positive value, straddling the
        // threshold across cases
        let eta = tower.add(
            &tower.constant_int(1 + rng.gen_range(0..p as i64 - 1).min(1)),
            &random_element(tower, 1, &mut rng),
        );
        let w = {
            let raw = random_element(tower, 0, &mut rng);
            let bump = rng.gen_range(-1..3i64);
            let scaled = tower.mul(&raw, &tower.uniformizer_pow(bump));
            match value_of(tower, &scaled)? {
                Some(v) if v.is_positive() => scaled,
                _ => tower.mul(&raw, &tower.uniformizer_pow(3)),
            }
        };
        let c = tower.sub(&eta, &w);
        let d1 = match value_of(tower, &w)? {
            Some(v) => v,
            None => continue,
        };
        if !d1.is_positive() {
            continue;
        }
        let diff = tower.sub(&tower.pow(&eta, p), &tower.pow(&c, p));
        let d2 = match value_of(tower, &diff)? {
            Some(v) => v,
            None => continue,
        };
        if d1 < threshold {
            if d2 != rat_int(p as i64) * &d1 {
                return fail(format!(
                    "eta-c below threshold at case {}: d1 = {}, d2 = {} != p*d1",
                    case, d1, d2
                ));
            }
            if d2 >= p_threshold {
                return fail(format!("eta-c equivalence broken at case {}", case));
            }
        } else if d1 > threshold {
            if d2 != rat_int(1) + &d1 {
                return fail(format!(
                    "eta-c above threshold at case {}: d1 = {}, d2 = {} != vp + d1",
                    case, d1, d2
                ));
            }
            if d2 < p_threshold {
                return fail(format!("eta-c equivalence broken at case {}", case));
            }
        } else if d2 < p_threshold {
            return fail(format!(
                "eta-c at threshold at case {}: d2 = {} below p*vp/(p-1)",
                case, d2
            ));
        }
    }
    Ok(())
}

/// Level corollary: for a 1-unit `u`, `level(u) < vp/(p-1)` iff
/// `level(u^p) < p*vp/(p-1)`, and in that case
/// `v(u^p - 1) = p * v(u - 1)`.
pub fn level_check(p: u32, instances: usize, seed: u64) -> CheckResult {
    let fam = independent_family(p, 3).map_err(|e| e.to_string())?;
    let tower = &fam.spec.tower;
    let threshold = rat(1, p as i64 - 1);
    let p_threshold = rat(p as i64, p as i64 - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = tower.constant_int(1);
    for case in 0..instances {
        let w = {
            let raw = random_element(tower, 0, &mut rng);
            tower.mul(&raw, &tower.uniformizer_pow(rng.gen_range(-1..3i64)))
        };
        let level = match value_of(tower, &w)? {
            Some(v) if v.is_positive() => v,
            _ => continue,
        };
        let u = tower.add(&one, &w);
        let up = tower.pow(&u, p);
        let level_p = match value_of(tower, &tower.sub(&up, &one))? {
            Some(v) => v,
            None => continue,
        };
        let below = level < threshold;
        let below_p = level_p < p_threshold;
        if below != below_p {
            return fail(format!(
                "level equivalence broken at case {}: level {} vs level(u^p) {}",
                case, level, level_p
            ));
        }
        if below && level_p != rat_int(p as i64) * &level {
            return fail(format!(
                "level equality broken at case {}: {} != p * {}",
                case, level_p, level
            ));
        }
    }
    Ok(())
}

/// Taylor identity `f(a) = sum_i d_i f(c) (a - c)^i`, exact, in both
/// characteristics.
pub fn taylor_check(p: u32, instances: usize, seed: u64) -> CheckResult {
    let mixed = independent_family(p, 2).map_err(|e| e.to_string())?;
    let equal = equalchar_family(p, 2).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let tower = if case % 2 == 0 {
            &mixed.spec.tower
        } else {
            &equal.spec.tower
        };
        let deg = rng.gen_range(1..p as usize);
        let f = Poly::new(
            (0..=deg)
                .map(|_| random_element(tower, -2, &mut rng))
                .collect(),
        );
        let a = random_element(tower, -2, &mut rng);
        let c = random_element(tower, -2, &mut rng);
        let diff = tower.sub(&a, &c);
        let mut acc = TowerElement::zero();
        for i in 0..=deg {
            let di = f.hasse_schmidt(tower, i).eval(tower, &c);
            acc = tower.add(&acc, &tower.mul(&di, &tower.pow(&diff, i as u32)));
        }
        if acc != f.eval(tower, &a) {
            return fail(format!("taylor identity failed at case {} (p = {})", case, p));
        }
    }
    Ok(())
}

/// Random representable cuts: the algebra laws and the equivalence
/// "idempotent iff fixed by every scale factor iff of the form H^-/H^+".
pub fn cut_algebra_check(instances: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..instances {
        let rank = rng.gen_range(1..4usize);
        let mut coords = Vec::with_capacity(rank);
        for _ in 0..rank {
            // occasionally force zero coordinates so idempotent cuts appear
            if rng.gen_bool(0.3) {
                coords.push(Rat::zero());
            } else {
                coords.push(rat(rng.gen_range(-9..9), rng.gen_range(1..7)));
            }
        }
        let h = ConvexSubgroup::new(rng.gen_range(1..=rank + 1));
        let side = if rng.gen_bool(0.5) { Side::Minus } else { Side::Plus };
        let l = Cut::new(GroupElement::finite(coords), h, side, Provenance::Exact);

        let mk = |rng: &mut ChaCha8Rng| {
            GroupElement::finite(
                (0..rank)
                    .map(|_| rat(rng.gen_range(-9..9), rng.gen_range(1..7)))
                    .collect(),
            )
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let m = rng.gen_range(2..5u32);
        let n = rng.gen_range(2..5u32);

        if l.shift(&a).negate() != l.negate().shift(&a.neg()) {
            return fail(format!("negate/shift law failed at case {}", case));
        }
        if l.scale(m * n) != l.scale(n).scale(m) {
            return fail(format!("scale composition failed at case {}", case));
        }
        if l.shift(&a).shift(&b) != l.shift(&a.add(&b)) {
            return fail(format!("shift composition failed at case {}", case));
        }
        if l.negate().negate() != l {
            return fail(format!("negate involution failed at case {}", case));
        }
        let fixed_by_scaling = (2..7).all(|k| l.scale(k) == l);
        if l.is_idempotent() != fixed_by_scaling {
            return fail(format!(
                "idempotence mismatch at case {}: form says {}, scaling says {}",
                case,
                l.is_idempotent(),
                fixed_by_scaling
            ));
        }
    }
    Ok(())
}

/// Trace table `tr(z^m / f'(z))` on random irreducible degree-p specs.
pub fn random_spec_trace_tables(p: u32, count: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < count {
        attempts += 1;
        if attempts > count * 60 {
            return fail(format!(
                "could not draw {} random specs for p = {}",
                count, p
            ));
        }
        let spec = match random_irreducible_spec(p, &mut rng) {
            Some(s) => s,
            None => continue,
        };
        match crate::trace::euler_trace_table_holds(&spec) {
            Ok(true) => done += 1,
            Ok(false) => {
                return fail(format!(
                    "trace table failed on random spec #{} (p = {}, kind {:?})",
                    done, p, spec.kind
                ))
            }
            Err(e) => return fail(format!("trace table errored: {}", e)),
        }
    }
    Ok(())
}

/// A random degree-p spec whose generator value certifies
/// irreducibility (ramification index p at the generator).
fn random_irreducible_spec(p: u32, rng: &mut ChaCha8Rng) -> Option<ExtensionSpec> {
    let mixed = rng.gen_bool(0.6);
    let stages = rng.gen_range(0..3usize);
    let tower = if mixed {
        let mut t = Tower::new(BaseField::mixed(p));
        let mut value = Rat::one();
        for i in 1..=stages {
            value /= rat_int(p as i64);
            let rhs = if i == 1 {
                t.constant_int(p as i64)
            } else {
                t.generator(i - 1)
            };
            t = t
                .push_stage(&format!("a{}", i), RelationKind::PthRoot, rhs, value.clone())
                .ok()?;
        }
        t
    } else {
        let mut t = Tower::new(BaseField::equal(p));
        let mut value = Rat::one();
        for i in 1..=stages {
            value /= rat_int(p as i64);
            let rhs = if i == 1 {
                TowerElement::from_coeff(Coeff::uniformizer(t.base()))
            } else {
                t.generator(i - 1)
            };
            t = t
                .push_stage(&format!("a{}", i), RelationKind::PthRoot, rhs, value.clone())
                .ok()?;
        }
        t
    };
    let kind = if mixed && rng.gen_bool(0.5) {
        ExtensionKind::Kummer
    } else {
        ExtensionKind::ASShift
    };
    // u with v(u) not p-divisible in the tower group, negative for the
    // shift form
    let unit = tower.add(
        &tower.constant_int(rng.gen_range(1..p as i64 + 1).min(p as i64 - 1).max(1)),
        &random_element(&tower, 1, rng),
    );
    let k = if kind == ExtensionKind::ASShift {
        -rng.gen_range(1..4i64)
    } else {
        let k = rng.gen_range(-3..4i64);
        if k == 0 {
            1
        } else {
            k
        }
    };
    let u = tower.mul(&unit, &tower.uniformizer_pow(k));
    let vu = match tower.valuation(&u).ok()? {
        Val::Finite(v) => v,
        Val::Infinite => return None,
    };
    let target = vu / rat_int(p as i64);
    if tower.monomial_for_value(&target).is_some() {
        return None; // value-divisible: irreducibility not certified
    }
    Some(ExtensionSpec::new(tower, kind, u))
}

/// Sampled conjugation values of a classified defect extension.
///
/// For polynomials `f` in the generator of degree `< p`, the value of
/// `(sigma f - f)/f` equals `v(sigma z - z) - v(z - c)` at deep
/// approximants; every sample must land strictly inside the final
/// segment `Sigma_E` of the report and approach its boundary to within
/// `1/p^depth`.
pub fn sigma_structure_check(
    report: &ClassificationReport,
    samples: usize,
    seed: u64,
) -> CheckResult {
    let spec = &report.working_spec;
    let tower = &spec.tower;
    let p = spec.p();
    let sigma_e = report
        .sigma_e
        .as_ref()
        .ok_or_else(|| "report carries no Sigma_E".to_string())?;
    let record = report
        .record
        .as_ref()
        .ok_or_else(|| "report carries no approximation record".to_string())?;
    if record.steps.len() < 4 {
        return fail("need depth >= 4 for the structure check".to_string());
    }
    // conjugate difference value: v(sigma z - z)
    let mixed = tower.base().is_mixed();
    let conj = match spec.kind {
        ExtensionKind::ASShift => Rat::zero(),
        ExtensionKind::Kummer if mixed => spec.kras_shift(),
        ExtensionKind::Kummer => {
            return fail("no Galois structure for purely inseparable generators".to_string())
        }
    };
    // scaling to the 1-unit generator where the criterion lives
    let approximants: Vec<(TowerElement, Rat)> = match spec.kind {
        ExtensionKind::Kummer => {
            let s = report
                .scaling
                .clone()
                .ok_or_else(|| "kummer report without scaling".to_string())?;
            let vs = match tower.valuation(&s).map_err(|e| e.to_string())? {
                Val::Finite(v) => v,
                Val::Infinite => unreachable!(),
            };
            record
                .steps
                .iter()
                .map(|st| (tower.mul(&s, &st.approximant), &st.gap + &vs))
                .collect()
        }
        ExtensionKind::ASShift => record
            .steps
            .iter()
            .map(|st| (st.approximant.clone(), st.gap.clone()))
            .collect(),
    };
    let boundary = sigma_e
        .cut()
        .boundary()
        .as_scalar()
        .cloned()
        .ok_or_else(|| "rank-1 boundary expected".to_string())?;
    let depth = record.steps.len();
    let tol = Rat::new(1.into(), num::BigInt::from(p).pow(depth as u32));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collected = 0usize;
    let mut attempts = 0usize;
    let mut closest: Option<Rat> = None;
    while collected < samples {
        attempts += 1;
        if attempts > samples * 50 {
            return fail(format!(
                "sigma sampling starved: {}/{}",
                collected, samples
            ));
        }
        // pick an approximant; weight the deepest ones so the samples
        // press against the boundary
        let idx = if rng.gen_bool(0.5) {
            approximants.len() - 1
        } else {
            rng.gen_range(0..approximants.len())
        };
        let (_b, gap) = &approximants[idx];
        // f = sum g_l (z - b)^l with g_0 = 0 allowed; degree < p
        let deg = rng.gen_range(1..p as usize);
        let gs: Vec<TowerElement> = (0..=deg)
            .map(|l| {
                if l == 0 && rng.gen_bool(0.5) {
                    TowerElement::zero()
                } else {
                    random_element(tower, -2, &mut rng)
                }
            })
            .collect();
        // v(f) and v(sigma f - f) from the value ledger, requiring
        // unique minima
        let mut vf: Option<Rat> = None;
        let mut vf_unique = true;
        for (l, g) in gs.iter().enumerate() {
            let vg = match value_of(tower, g)? {
                Some(v) => v + gap * rat_int(l as i64),
                None => continue,
            };
            match &vf {
                None => vf = Some(vg),
                Some(b) => {
                    if vg < *b {
                        vf = Some(vg);
                        vf_unique = true;
                    } else if vg == *b {
                        vf_unique = false;
                    }
                }
            }
        }
        let vf = match (vf, vf_unique) {
            (Some(v), true) => v,
            _ => continue,
        };
        // sigma f - f = sum_j g_j [ (w + delta)^j - w^j ], terms
        // C(j,l) g_j w^l delta^(j-l) with l < j
        let mut vsf: Option<Rat> = None;
        let mut vsf_unique = true;
        for (j, g) in gs.iter().enumerate().skip(1) {
            let vg = match value_of(tower, g)? {
                Some(v) => v,
                None => continue,
            };
            for l in 0..j {
                if crate::poly::binomial(j, l) % p as i64 == 0 {
                    continue;
                }
                let v = &vg
                    + gap * rat_int(l as i64)
                    + &conj * rat_int((j - l) as i64);
                match &vsf {
                    None => vsf = Some(v),
                    Some(b) => {
                        if v < *b {
                            vsf = Some(v);
                            vsf_unique = true;
                        } else if v == *b {
                            vsf_unique = false;
                        }
                    }
                }
            }
        }
        let vsf = match (vsf, vsf_unique) {
            (Some(v), true) => v,
            _ => continue,
        };
        let value = vsf - vf;
        if !sigma_e
            .contains(&GroupElement::scalar(value.clone()))
            .map_err(|e| e.to_string())?
        {
            return fail(format!(
                "sampled conjugation value {} escapes Sigma_E",
                value
            ));
        }
        let d = &value - &boundary;
        if closest.as_ref().is_none_or(|c| d < *c) {
            closest = Some(d);
        }
        collected += 1;
    }
    match closest {
        Some(c) if c <= tol => Ok(()),
        Some(c) => fail(format!(
            "sampled values stay {} above the boundary; tolerance {}",
            c, tol
        )),
        None => fail("no samples collected".to_string()),
    }
}
