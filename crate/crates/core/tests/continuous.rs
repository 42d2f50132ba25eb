use std::sync::Arc;
use std::time::Instant;

use centerman_core::continuous::{
    compare_time_one, verify_theorem_continuous, volterra_order, ContinuousConfig, ContinuousGraphSolution,
};
use centerman_core::rates::{estimate_rates, solve_mn, RatesConfig};
use centerman_core::rds::{Model, OmegaPoint, SampleSet, ScaledShape, Shape, TimeDomain};
use centerman_core::zoo::{
    make_r4_psi, make_tempered_exp, with_admissible_f, KSpec, R4Params, R4Rates, SubbundleDims, TemperedExpParams,
};
use nalgebra::DVector;

fn solution(model: Model, config: ContinuousConfig) -> ContinuousGraphSolution {
    let samples = SampleSet::generate(model.driving.as_ref(), 8, 5.0, 9);
    let est = estimate_rates(&model, &samples.omegas, &RatesConfig { horizon: config.horizon, step: config.step }).unwrap();
    let constants = solve_mn(est.sigma + est.sigma_tail, est.tau + est.tau_tail).unwrap();
    ContinuousGraphSolution::new(model, constants, config).unwrap()
}

fn constant_integral_exp(k: f64) -> Model {
    let params = R4Params { rates: R4Rates::Oscillating, amplitude: 0.0, k: KSpec::Constant { value: k }, ..Default::default() };
    make_r4_psi(&params, TimeDomain::Continuous).unwrap()
}

#[test]
fn volterra_scalar_converges_at_second_order() {
    let o = volterra_order(-0.3, 0.1, 2.0, 1.0, 0.1, 4).unwrap();
    assert!(o.orders.iter().all(|&p| p >= 1.8), "{o:?}");
}

#[test]
fn theorem_on_tempered_cont() {
    let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Continuous).unwrap();
    let m = with_admissible_f(m, Shape::ComponentwiseSine, 1.0).unwrap();
    let sol = solution(m, ContinuousConfig { horizon: 20.0, ..Default::default() });
    let omega = OmegaPoint::scalar(0.3);
    let xi = sol.model.lift_center(&omega, &[1.0]).unwrap();
    let xi2 = sol.model.lift_center(&omega, &[-0.7]).unwrap();
    let start = Instant::now();
    let p = sol.solve(&omega, &xi).unwrap();
    for t in [-2.0, 2.0] {
        let r = verify_theorem_continuous(&sol, &p, &xi2, t).unwrap();
        assert!(r.passed, "{r:?}");
        eprintln!("{r:?}");
    }
    eprintln!("report {:?} in {:?}", p.report, start.elapsed());
}

#[test]
fn theorem_on_r4_cont() {
    let m = make_r4_psi(&R4Params::default(), TimeDomain::Continuous).unwrap();
    let m = with_admissible_f(m, Shape::SmoothSaturation, 1.0).unwrap();
    let sol = solution(m, ContinuousConfig { horizon: 20.0, ..Default::default() });
    let omega = OmegaPoint::scalar(-0.5);
    let xi = sol.model.lift_center(&omega, &[0.8, -0.4]).unwrap();
    let xi2 = sol.model.lift_center(&omega, &[-0.2, 0.3]).unwrap();
    let p = sol.solve(&omega, &xi).unwrap();
    for t in [-2.0, 2.0] {
        let r = verify_theorem_continuous(&sol, &p, &xi2, t).unwrap();
        assert!(r.passed, "{r:?}");
    }
}

#[test]
fn zero_defect_without_nonlinearity() {
    let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Continuous).unwrap();
    let sol = ContinuousGraphSolution::new(m, solve_mn(0.0, 0.0).unwrap(), ContinuousConfig { horizon: 5.0, ..Default::default() }).unwrap();
    let omega = OmegaPoint::scalar(0.0);
    let xi = sol.model.lift_center(&omega, &[1.0]).unwrap();
    let p = sol.solve(&omega, &xi).unwrap();
    let r = verify_theorem_continuous(&sol, &p, &xi, 1.0).unwrap();
    assert!(r.defect <= 1e-14 && r.growth.lhs == 0.0, "{r:?}");
}

#[test]
fn solver_step_halving_order() {
    let m = constant_integral_exp(1.5);
    let f = Arc::new(ScaledShape::new(Shape::SmoothSaturation, |_| 0.02));
    let m = m.with_nonlinearity(f);
    let omega = OmegaPoint::scalar(0.0);
    let xi = m.lift_center(&omega, &[1.0, 0.5]).unwrap();
    let constants = solve_mn(0.1, 0.1).unwrap();
    let phi = |step: f64| {
        let cfg = ContinuousConfig { horizon: 20.0, step, check_quadrature: false, ..Default::default() };
        ContinuousGraphSolution::new(m.clone(), constants, cfg).unwrap().phi_at(&omega, &xi).unwrap()
    };
    let (a, b, c) = (phi(0.1), phi(0.05), phi(0.025));
    let order = ((&a - &b).amax() / (&b - &c).amax()).log2();
    assert!(order >= 1.8, "order {order}");
}

#[test]
fn time_one_restriction_matches() {
    let start = Instant::now();
    let m = with_admissible_f(constant_integral_exp(1.5), Shape::SmoothSaturation, 0.2).unwrap();
    let omega = OmegaPoint::scalar(0.0);
    let xi = m.lift_center(&omega, &[1.0, -0.5]).unwrap();
    let cfg = ContinuousConfig { horizon: 25.0, ..Default::default() };
    let c = compare_time_one(&m, &omega, &xi, &cfg, 25).unwrap();
    eprintln!("{c:?} in {:?}", start.elapsed());
    assert!(c.passed, "{c:?}");
}

#[test]
fn integral_exp_reproduces_tempered() {
    let f = || Arc::new(ScaledShape::new(Shape::SmoothSaturation, |_| 0.02));
    let r4 = constant_integral_exp(1.0).with_nonlinearity(f());
    let dims = SubbundleDims { center: 2, stable: 1, unstable: 1 };
    let tempered = make_tempered_exp(&TemperedExpParams { dims, ..Default::default() }, TimeDomain::Continuous)
        .unwrap()
        .with_nonlinearity(f());
    let cfg = ContinuousConfig { horizon: 20.0, ..Default::default() };
    let constants = solve_mn(0.1, 0.1).unwrap();
    let omega = OmegaPoint::scalar(0.0);
    // R⁴ coordinates (s, c_lower, c_upper, u) against (c_lower, c_upper, s, u).
    let xi_r4 = DVector::from_vec(vec![0.0, 0.7, -1.1, 0.0]);
    let xi_t = DVector::from_vec(vec![0.7, -1.1, 0.0, 0.0]);
    let a = ContinuousGraphSolution::new(r4, constants, cfg).unwrap().solve(&omega, &xi_r4).unwrap();
    let b = ContinuousGraphSolution::new(tempered, constants, cfg).unwrap().solve(&omega, &xi_t).unwrap();
    let diff = (a.phi[0] - b.phi[2]).abs().max((a.phi[3] - b.phi[3]).abs());
    assert!(diff <= a.phi_error() + b.phi_error() + 1e-12, "diff {diff:e}");
    assert!(diff <= 1e-12, "diff {diff:e}");
}
