//! End-to-end behavior of the built-in families: verdicts, distance
//! cuts, step tables, probes, and the cross-checks tying them together.

use defectlab::axioms::{classify_field, drvr_search, Adversarial, DrvrVerdict, SearchOutcome};
use defectlab::builtin::{dependent_family, equalchar_family, independent_family, FamilyKind};
use defectlab::config::field_class_input;
use defectlab::cuts::{Cut, Provenance, Side};
use defectlab::defect::{
    classify, distance, normalized_generator_power, theta_transform, Certification,
    ExtensionKind, Verdict,
};
use defectlab::ogroup::GroupElement;
use defectlab::trace::trace_ideal_probe;
use defectlab::{rat, rat_int};

#[test]
fn independent_family_classification() {
    for p in [2u32, 3] {
        let fam = independent_family(p, 1).unwrap();
        let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
        assert!(
            matches!(report.verdict, Verdict::IndependentDefect(h) if h.is_trivial_for(1)),
            "p = {}: {:?}",
            p,
            report.verdict
        );
        // gap table: v(z - b_i) = -1/p^(i+1), i = 1..6
        let rec = report.record.as_ref().unwrap();
        assert_eq!(rec.steps.len(), 6);
        for (i, step) in rec.steps.iter().enumerate() {
            let expect = rat(-1, (p as i64).pow(i as u32 + 2));
            assert_eq!(step.gap, expect, "p = {}, step {}", p, i + 1);
        }
        assert_eq!(
            report.distance.as_ref().unwrap(),
            &Cut::zero(1, Side::Minus)
        );
        assert!(matches!(
            report.certification,
            Certification::PatternProven(6)
        ));
        assert_eq!(report.defect, Some(p as u64));
    }
}

#[test]
fn dependent_family_classification() {
    for p in [2u32, 3] {
        let fam = dependent_family(p, 1).unwrap();
        let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
        assert!(
            matches!(report.verdict, Verdict::DependentDefect),
            "p = {}: {:?}",
            p,
            report.verdict
        );
        let rec = report.record.as_ref().unwrap();
        for (i, step) in rec.steps.iter().enumerate() {
            let expect = rat(-1, (p as i64).pow(i as u32 + 2));
            assert_eq!(step.gap, expect, "p = {}, step {}", p, i + 1);
        }
        // dist(eta, K) = 0^-
        let raw = report.record.as_ref().unwrap();
        assert!(raw.stall.is_none());
        // generator distance (1-unit): vp/p + 0^-
        let expected_unit = Cut::principal(
            GroupElement::scalar(rat(1, p as i64)),
            Side::Minus,
        );
        assert_eq!(report.generator_distance.as_ref().unwrap(), &expected_unit);
        // dist E = (1/p - 1/(p-1))^-
        let expected_e = Cut::principal(
            GroupElement::scalar(rat(1, p as i64) - rat(1, p as i64 - 1)),
            Side::Minus,
        );
        assert_eq!(report.distance.as_ref().unwrap(), &expected_e);
        assert!(matches!(
            report.certification,
            Certification::PatternProven(6)
        ));
    }
}

#[test]
fn equalchar_family_classification() {
    for p in [2u32, 3] {
        let fam = equalchar_family(p, 1).unwrap();
        let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
        assert!(
            matches!(report.verdict, Verdict::IndependentDefect(_)),
            "p = {}: {:?}",
            p,
            report.verdict
        );
        assert_eq!(
            report.distance.as_ref().unwrap(),
            &Cut::zero(1, Side::Minus)
        );
        assert!(matches!(
            report.certification,
            Certification::PatternProven(6)
        ));
    }
}

#[test]
fn dependent_raw_distance_is_zero_minus() {
    let fam = dependent_family(2, 1).unwrap();
    let run = distance(&fam.spec, 6, Some(&fam.check)).unwrap();
    let cut = run.cut.unwrap();
    assert_eq!(cut, Cut::zero(1, Side::Minus));
    assert!(matches!(
        cut.provenance(),
        Provenance::CertifiedFromSamples(6) | Provenance::Exact
    ));
}

#[test]
fn trace_probe_equalchar() {
    let fam = equalchar_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let probe = trace_ideal_probe(&report, 30, 7).unwrap();
    // tr(M_L) = M_K: predicted cut 0^+, coarsening ideal form
    assert_eq!(probe.predicted_cut, Cut::zero(1, Side::Plus));
    assert!(probe.predicted_is_coarsening_ideal);
    assert!(probe.all_above);
    // the zero element belongs to every predicted ideal
    assert!(probe.samples.iter().any(|s| s.trace_value.is_none()));
    let approach = probe.closest_approach.unwrap();
    assert!(approach <= rat(1, 64), "approach {}", approach);
}

#[test]
fn trace_probe_dependent() {
    let fam = dependent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let probe = trace_ideal_probe(&report, 30, 7).unwrap();
    // -(p-1) * dist E = (1/2)^+
    assert_eq!(
        probe.predicted_cut,
        Cut::principal(GroupElement::scalar(rat(1, 2)), Side::Plus)
    );
    assert!(!probe.predicted_is_coarsening_ideal);
    assert!(probe.all_above);
}

#[test]
fn theta_transform_dependent() {
    let fam = dependent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    // rebuild the normalized 1-unit spec over the deepened tower
    let spec = &report.working_spec;
    let (unit_spec, _) = defectlab::defect::normalize_to_one_unit(spec).unwrap();
    let c = defectlab::defect::find_c(&unit_spec.tower).unwrap();
    assert_eq!(c, unit_spec.tower.constant_int(-2));
    let tt = theta_transform(&unit_spec, &c).unwrap();
    assert!(tt.g.is_zero());
    let derived = tt.derived_spec.unwrap();
    assert_eq!(derived.kind, ExtensionKind::ASShift);
    // distance of the derived generator: -vp/(p-1) + dist(eta') = (-1/2)^-
    let run = distance(&derived, 6, None).unwrap();
    let cut = run.cut.unwrap();
    assert_eq!(
        cut,
        Cut::principal(GroupElement::scalar(rat(-1, 2)), Side::Minus)
    );
    assert!(!cut.is_idempotent());
}

#[test]
fn axioms_on_families() {
    // independent family: semitame verified
    let fam = independent_family(2, 1).unwrap();
    let cfg = defectlab::config::builtin_config(
        FamilyKind::Independent,
        2,
        defectlab::config::BudgetConfig::default(),
    );
    let exp = defectlab::config::build(&cfg).unwrap();
    let input = field_class_input(&exp, vec![]).unwrap();
    let verdict = classify_field(&input).unwrap();
    assert!(verdict.drvg && verdict.drvp && verdict.drst);
    assert!(matches!(verdict.drvr, DrvrVerdict::VerifiedToDepth(_)));
    assert!(matches!(
        verdict.semitame,
        defectlab::axioms::ClassVerdict::Verified(_)
    ));
    let _ = fam;

    // dependent family: DRvr refuted by the normalized generator power
    let fam = dependent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let witness = normalized_generator_power(&report).unwrap().unwrap();
    let cfg = defectlab::config::builtin_config(
        FamilyKind::Dependent,
        2,
        defectlab::config::BudgetConfig::default(),
    );
    let exp = defectlab::config::build(&cfg).unwrap();
    let mut input = field_class_input(&exp, vec![]).unwrap();
    input.adversarial = vec![Adversarial {
        label: "p-th power of the normalized defect generator".to_string(),
        element: witness.clone(),
        proven_ceiling: matches!(report.verdict, Verdict::DependentDefect),
    }];
    let verdict = classify_field(&input).unwrap();
    match &verdict.drvr {
        DrvrVerdict::RefutedUpToBudget { best_by_stage, .. } => {
            for (i, best) in best_by_stage {
                let expect = rat_int(1) - rat(1, 2i64.pow(*i as u32));
                assert_eq!(best.as_ref(), Some(&expect), "stage {}", i);
            }
        }
        other => panic!("expected refutation, got {:?}", other),
    }
    assert!(matches!(
        verdict.semitame,
        defectlab::axioms::ClassVerdict::Refuted
    ));

    // another check on the dependent witness at budget 5 directly
    match drvr_search(&report.working_spec.tower, &witness, 5).unwrap() {
        SearchOutcome::Exhausted { best, .. } => {
            assert_eq!(best, rat_int(1) - rat(1, 32));
        }
        other => panic!("expected exhaustion, got {:?}", other),
    }
}

#[test]
fn sigma_e_examples() {
    // equal characteristic, dist = 0^-: Sigma_E = {alpha > 0}
    let fam = equalchar_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let sigma = report.sigma_e.as_ref().unwrap();
    assert_eq!(sigma.cut(), &Cut::zero(1, Side::Plus));
    assert!(sigma.contains(&GroupElement::scalar(rat(1, 64))).unwrap());
    assert!(!sigma.contains(&GroupElement::scalar(rat_int(0))).unwrap());

    // dependent p = 2, dist(d eta) = (1/2)^-: Sigma_E = {alpha > 1/2}
    let fam = dependent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let sigma = report.sigma_e.as_ref().unwrap();
    assert_eq!(
        sigma.cut(),
        &Cut::principal(GroupElement::scalar(rat(1, 2)), Side::Plus)
    );
    assert!(sigma.contains(&GroupElement::scalar(rat(33, 64))).unwrap());
    assert!(!sigma.contains(&GroupElement::scalar(rat(1, 2))).unwrap());
    assert!(!sigma.is_subgroup_complement());

    // independent: Sigma_E = {alpha > H}
    let fam = independent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    assert!(report.sigma_e.as_ref().unwrap().is_subgroup_complement());
}

#[test]
fn ramification_data_examples() {
    use defectlab::defect::{ramification_data, IdealDescription};

    // independent, rank 1: the ideal is the maximal ideal itself
    let fam = independent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let ram = ramification_data(&report);
    match ram.ideal {
        IdealDescription::CoarseningIdeal(h) => assert!(h.is_trivial_for(1)),
        other => panic!("expected coarsening ideal, got {:?}", other),
    }
    assert!(ram.jump.is_some());

    // dependent p = 2: jump {alpha > 1/2}, ideal strictly inside M_L
    let fam = dependent_family(2, 1).unwrap();
    let report = classify(&fam.spec, 6, Some(&fam.check)).unwrap();
    let ram = ramification_data(&report);
    match &ram.ideal {
        IdealDescription::StrictlyInsideMaximal(cut) => {
            assert_eq!(
                cut,
                &Cut::principal(GroupElement::scalar(rat(1, 2)), Side::Plus)
            );
        }
        other => panic!("expected strict ideal, got {:?}", other),
    }

    // tame: no jump
    let t = defectlab::tower::Tower::new(defectlab::tower::BaseField::mixed(2));
    let spec = defectlab::defect::ExtensionSpec::new(
        t.clone(),
        ExtensionKind::Kummer,
        t.constant_int(2),
    );
    let report = classify(&spec, 4, None).unwrap();
    assert!(matches!(report.verdict, Verdict::Tame));
    let ram = ramification_data(&report);
    assert!(ram.jump.is_none());
    assert!(matches!(ram.ideal, IdealDescription::Empty));
}

#[test]
fn tame_detection() {
    let t = defectlab::tower::Tower::new(defectlab::tower::BaseField::mixed(3));
    // Kummer with non-divisible value: ramification index p
    let spec = defectlab::defect::ExtensionSpec::new(
        t.clone(),
        ExtensionKind::Kummer,
        t.constant_int(3),
    );
    let report = classify(&spec, 4, None).unwrap();
    assert!(matches!(report.verdict, Verdict::Tame));
    assert_eq!(report.defect, Some(1));

    // shift with unit generator: separable residue extension of degree p
    let spec = defectlab::defect::ExtensionSpec::new(
        t.clone(),
        ExtensionKind::ASShift,
        t.constant_int(1),
    );
    let report = classify(&spec, 4, None).unwrap();
    assert!(matches!(report.verdict, Verdict::Tame));

    // shift with positive generator value: root in the completion,
    // never a defect extension; ends inconclusive with a note
    let spec = defectlab::defect::ExtensionSpec::new(
        t.clone(),
        ExtensionKind::ASShift,
        t.constant_int(9),
    );
    let report = classify(&spec, 4, None).unwrap();
    assert!(matches!(report.verdict, Verdict::Inconclusive(_)));
    assert!(report.notes.iter().any(|n| n.contains("completion")));
}

#[test]
fn equal_char_kummer_is_purely_inseparable() {
    // z^p = u over the perfect hull: the distance is computed but no
    // Galois verdict applies
    let fam = equalchar_family(2, 1).unwrap();
    let t = fam.spec.tower.clone();
    let u = t.mul(
        &t.uniformizer_pow(1),
        &t.add(&t.constant_int(1), &t.uniformizer_pow(3)),
    );
    // v(u) = 1 is 2-divisible in the hull group, so no tame exit
    let spec = defectlab::defect::ExtensionSpec::new(t, ExtensionKind::Kummer, u);
    let report = classify(&spec, 4, None).unwrap();
    assert!(matches!(report.verdict, Verdict::Inconclusive(_)));
    assert!(report
        .notes
        .iter()
        .any(|n| n.contains("purely inseparable")));
}

#[test]
fn conjugate_distance_invariance() {
    use rand::{Rng, SeedableRng};
    // equal characteristic: z and z + c are Artin-Schreier generators
    // of the same extension; their distances agree
    let fam = equalchar_family(2, 1).unwrap();
    let base_report = classify(&fam.spec, 5, Some(&fam.check)).unwrap();
    let base_cut = base_report.distance.clone().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..4 {
        let t = fam.spec.tower.clone();
        let c = {
            let k = rng.gen_range(-1..3i64);
            let mut acc = t.uniformizer_pow(k);
            if rng.gen_bool(0.5) {
                acc = t.add(&acc, &t.generator(1));
            }
            acc
        };
        // (z + c)^p - (z + c) = u + (c^p - c), exactly in char p
        let cp = t.pow(&c, 2);
        let u2 = t.add(&fam.spec.u, &t.sub(&cp, &c));
        let spec2 = defectlab::defect::ExtensionSpec::new(t, ExtensionKind::ASShift, u2);
        let report2 = classify(&spec2, 5, None).unwrap();
        assert_eq!(
            report2.distance.as_ref(),
            Some(&base_cut),
            "distance must not depend on the generator shift"
        );
        assert!(matches!(report2.verdict, Verdict::IndependentDefect(_)));
    }
}

#[test]
fn gdr_fields_admit_no_dependent_verdicts() {
    // consistency between the axiom module and the defect module: when
    // the field classes verify, classified extensions are tame or
    // independent
    for (kind, p) in [
        (FamilyKind::Independent, 2u32),
        (FamilyKind::Independent, 3),
        (FamilyKind::EqualChar, 2),
        (FamilyKind::EqualChar, 3),
    ] {
        let fam = defectlab::builtin::family(kind, p, 1).unwrap();
        let report = classify(&fam.spec, 5, Some(&fam.check)).unwrap();
        let cfg = defectlab::config::builtin_config(
            kind,
            p,
            defectlab::config::BudgetConfig::default(),
        );
        let exp = defectlab::config::build(&cfg).unwrap();
        let input = field_class_input(&exp, vec![]).unwrap();
        let verdict = classify_field(&input).unwrap();
        let gdr_ok = matches!(
            verdict.gdr,
            defectlab::axioms::ClassVerdict::Verified(_)
        );
        if gdr_ok {
            assert!(
                matches!(
                    report.verdict,
                    Verdict::Tame | Verdict::IndependentDefect(_)
                ),
                "{:?} p = {}: gdr verified but verdict {:?}",
                kind,
                p,
                report.verdict
            );
        }
    }
}

#[test]
fn bare_laurent_field_is_not_semitame() {
    // F_p((t)) alone: vK = Z is not p-divisible, semitame refuted
    use defectlab::axioms::{classify_field as cf, ClassVerdict, FieldClassInput};
    use defectlab::ogroup::{Component, GroupDescriptor};
    let tower = defectlab::tower::Tower::new(defectlab::tower::BaseField::equal(2));
    let group = GroupDescriptor::new(vec![Component::Cyclic(rat_int(1))]);
    let input = FieldClassInput {
        tower: &tower,
        limit_group: &group,
        vp: None,
        declared_perfect: false,
        adversarial: vec![],
        stage_budget: 3,
        samples: 10,
        seed: 1,
        density_alpha: rat_int(4),
    };
    let verdict = cf(&input).unwrap();
    assert!(!verdict.drst);
    assert_eq!(verdict.semitame, ClassVerdict::Refuted);
}

#[test]
fn sigma_structure_check_on_all_kinds() {
    // includes the mixed-characteristic shift family, where the
    // conjugate difference has value 0
    for (kind, p) in [
        (FamilyKind::Independent, 2u32),
        (FamilyKind::Dependent, 2),
        (FamilyKind::EqualChar, 3),
    ] {
        let fam = defectlab::builtin::family(kind, p, 1).unwrap();
        let report = classify(&fam.spec, 5, Some(&fam.check)).unwrap();
        defectlab::checks::sigma_structure_check(&report, 100, 23)
            .unwrap_or_else(|e| panic!("{:?} p = {}: {}", kind, p, e));
    }
}

#[test]
fn newton_traces_match_explicit_conjugates() {
    use defectlab::poly::Poly;
    use defectlab::tower::{BaseField, Coeff, RelationKind, Tower, TowerElement};
    use rand::{Rng, SeedableRng};
    // Kummer p = 2 with u = 2: the conjugates are +-a1, both
    // representable, so the symbolic trace can be compared with the
    // explicit sum g(a1) + g(-a1).
    let t = Tower::new(BaseField::mixed(2))
        .push_stage(
            "a1",
            RelationKind::PthRoot,
            TowerElement::from_coeff(Coeff::Rat(rat_int(2))),
            rat(1, 2),
        )
        .unwrap();
    let spec = defectlab::defect::ExtensionSpec::new(
        t.clone(),
        ExtensionKind::Kummer,
        t.constant_int(2),
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    for _ in 0..25 {
        let g = Poly::new(
            (0..2)
                .map(|_| {
                    t.mul_int(
                        &t.uniformizer_pow(rng.gen_range(-2..3)),
                        rng.gen_range(-3..4).max(1),
                    )
                })
                .collect(),
        );
        let symbolic = defectlab::trace::trace_of(&spec, &g).unwrap();
        let root = t.generator(1);
        let explicit = t.add(&g.eval(&t, &root), &g.eval(&t, &t.neg(&root)));
        assert_eq!(symbolic, explicit);
    }
}
