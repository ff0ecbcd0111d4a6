use handface_core::gesture::GestureClass;
use handface_core::impedance::{
    from_polar, parallel, series, shoulder_impedance, to_polar, BodyNetwork, Branch, ComplexImpedance, GestureState,
};
use handface_core::simulator::{generate_subject, ProfileRanges, SubjectProfile};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(z: ComplexImpedance) -> Complex64 {
    Complex64::new(z.resistance, z.reactance)
}

fn rel_err(a: ComplexImpedance, b: Complex64) -> f64 {
    (c(a) - b).norm() / b.norm().max(1e-300)
}

/// Admittance sum over every closed current path between the shoulders.
fn oracle(net: &BodyNetwork, left: Option<ComplexImpedance>, right: Option<ComplexImpedance>) -> Complex64 {
    let mut y = c(net.z_trunk_head).inv();
    if let Some(z) = left {
        y += (c(net.z_arm_left) + c(z)).inv();
    }
    if let Some(z) = right {
        y += (c(net.z_arm_right) + c(z)).inv();
    }
    y.inv()
}

fn physical() -> impl Strategy<Value = ComplexImpedance> {
    (1.0..1e5f64, -1e4..1e4f64).prop_map(|(r, x)| ComplexImpedance::new(r, x))
}

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![1 => Just(Branch::Open), 4 => physical().prop_map(Branch::Closed)]
}

fn close(a: Branch, b: Branch) -> bool {
    match (a, b) {
        (Branch::Open, Branch::Open) => true,
        (Branch::Closed(a), Branch::Closed(b)) => rel_err(a, c(b)) < 1e-12,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shoulder_impedance_matches_admittance_oracle(
        th in physical(), al in physical(), ar in physical(), cl in branch(), cr in branch()
    ) {
        let net = BodyNetwork::new(th, al, ar).unwrap();
        let state = GestureState { gesture: GestureClass::MouthGuard, contact_left: cl, contact_right: cr };
        let z = shoulder_impedance(&net, &state).unwrap();
        prop_assert!(rel_err(z, oracle(&net, cl.closed(), cr.closed())) < 1e-12);
    }

    #[test]
    fn parallel_is_commutative_and_associative(a in branch(), b in branch(), d in branch()) {
        prop_assert!(close(parallel(a, b).unwrap(), parallel(b, a).unwrap()));
        let left = parallel(parallel(a, b).unwrap(), d).unwrap();
        let right = parallel(a, parallel(b, d).unwrap()).unwrap();
        prop_assert!(close(left, right));
    }

    #[test]
    fn series_matches_complex_sum(a in physical(), b in physical()) {
        let s = series(a.into(), b.into()).closed().unwrap();
        prop_assert!(rel_err(s, c(a) + c(b)) < 1e-15);
        prop_assert_eq!(series(a.into(), Branch::Open), Branch::Open);
    }

    #[test]
    fn adding_a_resistive_path_lowers_magnitude(base in 10.0..1e4f64, extra in 10.0..1e6f64, more in 10.0..1e6f64) {
        let z1 = parallel(Branch::Closed(ComplexImpedance::resistive(base)), Branch::Closed(ComplexImpedance::resistive(extra))).unwrap();
        prop_assert!(z1.closed().unwrap().magnitude() < base);
        // Lower contact impedance, lower measured impedance.
        let lo = extra.min(more);
        let hi = extra.max(more);
        let zl = parallel(ComplexImpedance::resistive(base).into(), ComplexImpedance::resistive(lo).into()).unwrap();
        let zh = parallel(ComplexImpedance::resistive(base).into(), ComplexImpedance::resistive(hi).into()).unwrap();
        prop_assert!(zl.closed().unwrap().magnitude() <= zh.closed().unwrap().magnitude());
    }

    #[test]
    fn polar_round_trip(z in physical()) {
        let back = from_polar(to_polar(z));
        prop_assert!(rel_err(back, c(z)) < 1e-12);
        let p = to_polar(z);
        prop_assert!(p.phase_deg > -180.0 && p.phase_deg <= 180.0);
    }
}

fn mean_abs_shift(profile: &SubjectProfile) -> Vec<f64> {
    let base = profile.baseline().magnitude();
    profile.class_impedances().unwrap().iter().map(|z| (z.magnitude() - base).abs()).collect()
}

#[test]
fn boredom_largest_pinch_smallest_for_generated_subjects() {
    for seed in 1..=100u64 {
        let profile = generate_subject(seed as u32, seed, &ProfileRanges::default()).unwrap();
        let shift = mean_abs_shift(&profile);
        for g in GestureClass::GESTURES {
            if g != GestureClass::Boredom {
                assert!(shift[GestureClass::Boredom.index()] > shift[g.index()], "seed {seed}: {g}");
            }
            if g != GestureClass::PinchNoseBridge {
                assert!(shift[GestureClass::PinchNoseBridge.index()] < shift[g.index()], "seed {seed}: {g}");
            }
        }
    }
}
