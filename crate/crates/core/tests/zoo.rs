use centerman_core::rates::{check_corollary, estimate_rates, RatesConfig};
use centerman_core::rds::{validate_structure, SampleSet, Shape, TimeDomain};
use centerman_core::zoo::{
    make_r4_psi, make_tempered_exp, with_admissible_f, PolynomialParams, R4Params, R4Rates,
    SystemSpec, TemperedExpParams,
};

fn certified_models() -> Vec<SystemSpec> {
    let osc = R4Params { rates: R4Rates::Oscillating, lambda_c_upper: 0.2, lambda_c_lower: -0.2, ..Default::default() };
    vec![
        SystemSpec::TemperedDisc(TemperedExpParams::default()),
        SystemSpec::TemperedCont(TemperedExpParams::default()),
        SystemSpec::R4PsiDisc(R4Params::default()),
        SystemSpec::R4PsiCont(R4Params::default()),
        SystemSpec::R4PsiDisc(osc),
        SystemSpec::R4PsiCont(osc),
    ]
}

#[test]
fn structure_validates_on_500_samples() {
    let mut specs = certified_models();
    specs.push(SystemSpec::Polynomial(PolynomialParams::default()));
    specs.push(SystemSpec::PolynomialDisc(PolynomialParams { epsilon: 0.1, c: 1.5, ..Default::default() }));
    for spec in specs {
        let model = spec.build().unwrap();
        let samples = SampleSet::generate(model.driving.as_ref(), 500, 4.0, 7);
        let report = validate_structure(&model, &samples);
        for c in &report.checks {
            assert!(c.passed, "{}: {} worst {} at {:?}", model.name, c.name, c.worst, c.worst_at);
        }
    }
}

#[test]
fn admissible_models_pass_their_corollary_and_smallness() {
    for spec in certified_models() {
        let model = with_admissible_f(spec.build().unwrap(), Shape::ComponentwiseSine, 1.0).unwrap();
        let tag = model.hypotheses.as_ref().unwrap().tag;
        let samples = SampleSet::generate(model.driving.as_ref(), 24, 1.0, 3).omegas;
        let report = check_corollary(&model, tag, &samples, 30.0).unwrap();
        for m in &report.margins {
            assert!(m.holds(), "{}: {} margin {}", model.name, m.name, m.value);
        }
        let cfg = RatesConfig { horizon: 40.0, step: 0.1 };
        let rates = estimate_rates(&model, &samples[..6], &cfg).unwrap();
        assert!(rates.certified, "{}", model.name);
        assert!(rates.total_upper() < 0.5, "{}: sigma {} tau {}", model.name, rates.sigma, rates.tau);
    }
}

#[test]
fn tempered_constructor_rejects_equal_rates() {
    let p = TemperedExpParams { lambda_c_lower: -1.0, ..Default::default() };
    assert!(make_tempered_exp(&p, TimeDomain::Discrete).is_err());
}

#[test]
fn r4_with_unit_k_is_diagonal() {
    use centerman_core::rds::{OmegaPoint, Subbundle};
    use centerman_core::zoo::KSpec;
    let p = R4Params { k: KSpec::Constant { value: 1.0 }, ..Default::default() };
    let model = make_r4_psi(&p, TimeDomain::Continuous).unwrap();
    let w = OmegaPoint::scalar(0.4);
    for sub in Subbundle::ALL {
        let proj = model.projector(sub, &w);
        assert_eq!(proj.clone() - nalgebra::DMatrix::from_diagonal(&proj.diagonal()), nalgebra::DMatrix::zeros(4, 4));
    }
    for t in [-3.0, 2.0] {
        assert!((model.alpha(Subbundle::Center, t, &w) - (0.1 * f64::abs(t)).exp()).abs() < 1e-12);
    }
}
