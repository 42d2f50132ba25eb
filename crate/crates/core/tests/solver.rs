use centerman_core::oracle::compare_tiny;
use centerman_core::rates::{estimate_rates, solve_mn, ContractionConstants, RatesConfig};
use centerman_core::rds::{Model, OmegaPoint, SampleSet, Shape, Subbundle, TimeDomain};
use centerman_core::solver::{
    contraction_diagnostic, verify_growth_bound, verify_invariance, verify_phi_lipschitz, GraphSolution,
    SolverConfig,
};
use centerman_core::zoo::{make_r4_psi, make_tempered_exp, with_admissible_f, R4Params, TemperedExpParams};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn demo(model: Model) -> GraphSolution {
    let samples = SampleSet::generate(model.driving.as_ref(), 20, 5.0, 3);
    let est = estimate_rates(&model, &samples.omegas, &RatesConfig { horizon: 60.0, step: 1.0 }).unwrap();
    let constants = solve_mn(est.sigma + est.sigma_tail, est.tau + est.tau_tail).unwrap();
    GraphSolution::new(model, constants, SolverConfig::default()).unwrap()
}

fn tempered_demo() -> GraphSolution {
    let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap();
    demo(with_admissible_f(m, Shape::ComponentwiseSine, 1.0).unwrap())
}

fn r4_demo() -> GraphSolution {
    let m = make_r4_psi(&R4Params::default(), TimeDomain::Discrete).unwrap();
    demo(with_admissible_f(m, Shape::SmoothSaturation, 1.0).unwrap())
}

fn random_query(sol: &GraphSolution, rng: &mut ChaCha8Rng) -> (OmegaPoint, DVector<f64>) {
    let omega = OmegaPoint::scalar(rng.random_range(-3.0..3.0));
    let k = sol.model.cocycle.center_dim();
    let coords: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let xi = sol.model.lift_center(&omega, &coords).unwrap();
    (omega, xi)
}

#[test]
fn matches_brute_force_oracle() {
    for seed in 0..20 {
        let c = compare_tiny(seed, 1e-14).unwrap();
        assert!(c.difference <= 1e-10, "{c:?}");
    }
}

#[test]
fn tempered_demo_conclusions() {
    let sol = tempered_demo();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pairs = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (omega, xi) = random_query(&sol, &mut rng);
        let xi2 = sol.model.lift_center(&omega, &[rng.random_range(-2.0..2.0)]).unwrap();
        let n = rng.random_range(-5i64..=5);
        let p = sol.solve(&omega, &xi).unwrap();
        let inv = verify_invariance(&sol, &p, n, 0.0).unwrap();
        assert!(inv.passed, "{inv:?}");
        worst = worst.max(inv.defect / inv.bound);
        let g = verify_growth_bound(&sol, &omega, &xi, &xi2, n).unwrap();
        assert!(g.passed(), "{g:?}");
        let c = contraction_diagnostic(&sol, &omega, &xi).unwrap();
        assert!(c.passed, "{c:?}");
        pairs.push((omega, xi, xi2));
    }
    let lip = verify_phi_lipschitz(&sol, &pairs).unwrap();
    assert!(lip.passed, "{lip:?}");
    eprintln!("worst defect/bound {worst:e}; lip {lip:?}; constants {:?}", sol.constants);
}

#[test]
fn r4_invariance_at_five_steps() {
    let sol = r4_demo();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let (omega, xi) = random_query(&sol, &mut rng);
        let p = sol.solve(&omega, &xi).unwrap();
        for n in [-5, 5] {
            let inv = verify_invariance(&sol, &p, n, 0.0).unwrap();
            assert!(inv.passed, "{inv:?}");
            assert!(inv.defect <= p.report.error_bound.max(inv.bound), "{inv:?}");
        }
    }
}

#[test]
fn shift_consistency() {
    let sol = tempered_demo();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let (omega, xi) = random_query(&sol, &mut rng);
        let n = rng.random_range(-5i64..=5);
        let m = rng.random_range(-5i64..=5);
        let p = sol.solve(&omega, &xi).unwrap();
        let direct = p.h_at(n + m).unwrap();
        let shifted = sol.model.drive(n as f64, &omega).unwrap();
        let q = sol.solve(&shifted, p.h_at(n).unwrap()).unwrap();
        let composed = q.h_at(m).unwrap();
        let defect = sol.model.norm().distance(direct, composed);
        let bound = 2.0 * p.report.error_bound.max(q.report.error_bound);
        assert!(defect <= bound, "defect {defect:e} bound {bound:e}");
    }
}

#[test]
fn converged_segment_is_a_fixed_point() {
    let sol = r4_demo();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5 {
        let (omega, xi) = random_query(&sol, &mut rng);
        let p = sol.solve(&omega, &xi).unwrap();
        assert!(sol.residual(&p).unwrap() <= sol.config.tol);
        assert!(p.segment.containment_defect(&sol.model, &omega) <= 1e-10);
        assert!(p.report.converged && p.report.last_delta <= sol.config.tol);
    }
}

#[test]
fn halving_tol_does_not_increase_defect() {
    let coarse = {
        let mut s = tempered_demo();
        s.config.tol = 1e-6;
        s
    };
    let mut fine = coarse.clone();
    fine.config.tol = 0.5e-6;
    let omega = OmegaPoint::scalar(0.25);
    let xi = coarse.model.lift_center(&omega, &[1.2]).unwrap();
    let a = verify_invariance(&coarse, &coarse.solve(&omega, &xi).unwrap(), 3, 0.0).unwrap();
    let b = verify_invariance(&fine, &fine.solve(&omega, &xi).unwrap(), 3, 0.0).unwrap();
    assert!(b.defect <= a.defect + 1e-12, "{a:?} {b:?}");
}

#[test]
fn zero_f_growth_bound_holds_with_margin() {
    let m = make_tempered_exp(&TemperedExpParams::default(), TimeDomain::Discrete).unwrap();
    let sol = GraphSolution::new(m, solve_mn(0.1, 0.1).unwrap(), SolverConfig::default()).unwrap();
    let omega = OmegaPoint::scalar(0.0);
    let xi = sol.model.lift_center(&omega, &[1.0]).unwrap();
    let xi2 = sol.model.lift_center(&omega, &[-0.5]).unwrap();
    for n in [-4, 0, 4] {
        let g = verify_growth_bound(&sol, &omega, &xi, &xi2, n).unwrap();
        let lhs = sol.model.norm().of(&sol.model.apply_block(Subbundle::Center, n as f64, &omega, &(&xi - &xi2)).unwrap());
        assert!((g.lhs - lhs).abs() <= 1e-12);
        assert!(g.margin.unwrap() >= 0.0);
    }
}

#[test]
fn contraction_bound_for_worked_constants() {
    let c: ContractionConstants = solve_mn(0.1, 0.1).unwrap();
    assert!((c.q - 0.2 * 1.1270167).abs() < 1e-6);
    let c = solve_mn(0.3, 0.15).unwrap();
    assert!(c.q < 0.9);
}

