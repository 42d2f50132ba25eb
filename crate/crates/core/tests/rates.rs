use std::sync::Arc;

use centerman_core::rates::{
    check_corollary, check_limit_conditions, psi_derivative_crosscheck, sigma_discrete, sigma_tau_continuous,
    tau_discrete, CorollaryTag, ExponentialRates,
};
use centerman_core::rds::{Model, OmegaPoint, SampleSet, ScaledShape, Shape, Shift, TimeDomain};
use centerman_core::zoo::{
    make_polynomial, make_r4_psi, make_tempered_exp, with_admissible_f, DiagonalCocycle, PolynomialParams,
    R4Params, R4Rates, SubbundleDims, TemperedBounds, TemperedExpParams,
};
use centerman_core::Error;
use proptest::prelude::*;

/// `K = 1`, one direction per subbundle, center exponent 0, with the given
/// Lipschitz profile in the base coordinate.
fn flat_center(domain: TimeDomain, lip: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Model {
    let rates = ExponentialRates { c_upper: 0.0, c_lower: 0.0, s: -1.0, u: 1.0 };
    let driving = match domain {
        TimeDomain::Discrete => Shift::discrete(),
        TimeDomain::Continuous => Shift::continuous(),
    };
    Model::new(
        "flat-center",
        Arc::new(driving),
        Arc::new(DiagonalCocycle { exponents: vec![0.0, -1.0, 1.0], dims: SubbundleDims::default() }),
        Arc::new(TemperedBounds { rates, k: 1.0 }),
    )
    .with_nonlinearity(Arc::new(ScaledShape::new(Shape::ComponentwiseSine, move |w| lip(w.x()))))
}

const L: f64 = 0.01;

#[test]
fn zero_f_has_zero_rates() {
    let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap();
    let w = OmegaPoint::scalar(0.3);
    let s = sigma_discrete(&m, &w, 20).unwrap();
    let t = tau_discrete(&m, &w, 20).unwrap();
    assert_eq!((s.minus, s.plus, t.minus, t.plus), (0.0, 0.0, 0.0, 0.0));
    let c = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Continuous).unwrap();
    let r = sigma_tau_continuous(&c, &w, 10.0, 0.1).unwrap();
    assert_eq!((r.sigma_plus, r.tau_plus, r.tau_minus), (0.0, 0.0, 0.0));
}

#[test]
fn sigma_geometric_profile() {
    let m = flat_center(TimeDomain::Discrete, |x| L * 3f64.powf(-x.abs()));
    let s = sigma_discrete(&m, &OmegaPoint::scalar(0.0), 60).unwrap();
    assert!((s.plus - 1.5 * L).abs() <= 1e-14, "{s:?}");
}

#[test]
fn sigma_constant_lip_diverges() {
    let m = flat_center(TimeDomain::Discrete, |_| L);
    let err = sigma_discrete(&m, &OmegaPoint::scalar(0.0), 60).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
}

#[test]
fn tau_single_terms() {
    let w = OmegaPoint::scalar(0.0);
    let m = flat_center(TimeDomain::Discrete, |x| if x.abs() < 0.5 { L } else { 0.0 });
    let t = tau_discrete(&m, &w, 10).unwrap();
    assert!((t.plus - L * (-1.0f64).exp()).abs() <= 1e-16, "{t:?}");
    assert_eq!(t.minus, 0.0);
    let m = flat_center(TimeDomain::Discrete, |x| if (x + 1.0).abs() < 0.5 { L } else { 0.0 });
    let t = tau_discrete(&m, &w, 10).unwrap();
    assert!((t.minus - L).abs() <= 1e-16, "{t:?}");
}

#[test]
fn tau_continuous_closed_form_and_order() {
    let m = flat_center(TimeDomain::Continuous, |x| (-x.abs()).exp());
    let w = OmegaPoint::scalar(0.0);
    let err = |step: f64| {
        let r = sigma_tau_continuous(&m, &w, 20.0, step).unwrap();
        ((r.tau_minus - 0.5).abs(), (r.tau_plus - 0.5).abs())
    };
    let (a, b) = (err(0.1), err(0.05));
    assert!(a.0 < 1e-2 && a.1 < 1e-2);
    assert!((a.0 / b.0).log2() > 1.9 && (a.1 / b.1).log2() > 1.9, "{a:?} {b:?}");
}

#[test]
fn doubling_horizon_stays_within_tail() {
    let m = with_admissible_f(
        make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap(),
        Shape::ComponentwiseSine,
        1.0,
    )
    .unwrap();
    for x in [-2.0, 0.0, 1.3] {
        let w = OmegaPoint::scalar(x);
        let short = tau_discrete(&m, &w, 15).unwrap();
        let long = tau_discrete(&m, &w, 30).unwrap();
        assert!(short.certified);
        let change = (long.minus + long.plus) - (short.minus + short.plus);
        assert!(change <= short.tail_minus + short.tail_plus, "change {change:e}");
    }
}

#[test]
fn tempered_corollary_implies_limits() {
    let m = with_admissible_f(
        make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap(),
        Shape::SmoothSaturation,
        1.0,
    )
    .unwrap();
    let samples = SampleSet::generate(m.driving.as_ref(), 10, 1.0, 1).omegas;
    let report = check_corollary(&m, CorollaryTag::TemperedDisc, &samples, 30.0).unwrap();
    assert!(report.passed);
    let a = report.margin("a(w) > 0").unwrap();
    assert!((a.value - 0.5).abs() < 1e-12);
    for w in &samples {
        assert!(check_limit_conditions(&m, w, 30.0).unwrap().passed);
    }
}

#[test]
fn delta_out_of_range_fails_by_name() {
    let m = make_tempered_exp(&TemperedExpParams { delta: 0.2, ..Default::default() }, TimeDomain::Discrete).unwrap();
    let report = check_corollary(&m, CorollaryTag::TemperedDisc, &[OmegaPoint::scalar(0.0)], 20.0).unwrap();
    assert!(!report.passed);
    let bad: Vec<&str> = report.violated().map(|m| m.name.as_str()).collect();
    assert!(bad.contains(&"delta < 1/6"), "{bad:?}");
    assert!((report.margin("delta < 1/6").unwrap().value - (1.0 / 6.0 - 0.2)).abs() < 1e-15);
}

#[test]
fn plateau_fails_limit_check() {
    let m = flat_center(TimeDomain::Discrete, |_| 0.0);
    // λ̲^c = 0 against λ^s = 0 would plateau; emulate with a bounds object.
    let rates = ExponentialRates { c_upper: 0.0, c_lower: -1.0, s: -1.0, u: 1.0 };
    let m = Model::new("plateau", m.driving.clone(), m.cocycle.clone(), Arc::new(TemperedBounds { rates, k: 1.0 }));
    let ev = check_limit_conditions(&m, &OmegaPoint::scalar(0.0), 20.0).unwrap();
    assert!(!ev.backward.passed && ev.forward.passed);
}

#[test]
fn r4_limits_decay() {
    let m = make_r4_psi(&R4Params::default(), TimeDomain::Discrete).unwrap();
    assert!(check_limit_conditions(&m, &OmegaPoint::scalar(0.7), 40.0).unwrap().passed);
}

#[test]
fn derivative_crosschecks() {
    let m = make_r4_psi(&R4Params { rates: R4Rates::Oscillating, ..Default::default() }, TimeDomain::Continuous).unwrap();
    for c in psi_derivative_crosscheck(&m, &OmegaPoint::scalar(0.4), 1e-2).unwrap() {
        assert!(c.passed, "{c:?}");
    }
    let p = PolynomialParams { epsilon: 0.1, ..Default::default() };
    let m = make_polynomial(&p, TimeDomain::Continuous).unwrap();
    let checks = psi_derivative_crosscheck(&m, &OmegaPoint::new(vec![0.8, 0.5]), 1e-2).unwrap();
    assert!(checks.iter().any(|c| c.quantity == "d_K"));
    for c in checks {
        assert!(c.passed, "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rates_monotone_in_horizon(x in -3.0f64..3.0, h in 25usize..45) {
        let m = with_admissible_f(
            make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap(),
            Shape::ComponentwiseSine,
            1.0,
        ).unwrap();
        let w = OmegaPoint::scalar(x);
        let (s1, s2) = (sigma_discrete(&m, &w, h).unwrap(), sigma_discrete(&m, &w, h + 5).unwrap());
        let (t1, t2) = (tau_discrete(&m, &w, h).unwrap(), tau_discrete(&m, &w, h + 5).unwrap());
        prop_assert!(s2.plus >= s1.plus && s2.minus >= s1.minus);
        prop_assert!(t2.plus >= t1.plus && t2.minus >= t1.minus);
    }
}
