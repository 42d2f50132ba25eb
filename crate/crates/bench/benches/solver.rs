use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use std::hint::black_box;

use centerman_core::continuous::{ContinuousConfig, ContinuousGraphSolution};
use centerman_core::rates::{estimate_rates, solve_mn, RatesConfig};
use centerman_core::rds::{Model, OmegaPoint, SampleSet, Shape, TimeDomain};
use centerman_core::solver::{GraphSolution, SolverConfig};
use centerman_core::zoo::{make_r4_psi, make_tempered_exp, with_admissible_f, R4Params, TemperedExpParams};

fn tempered(domain: TimeDomain) -> Model {
    let m = make_tempered_exp(&TemperedExpParams::default(), domain).unwrap();
    with_admissible_f(m, Shape::ComponentwiseSine, 1.0).unwrap()
}

fn r4_disc() -> Model {
    let m = make_r4_psi(&R4Params::default(), TimeDomain::Discrete).unwrap();
    with_admissible_f(m, Shape::SmoothSaturation, 1.0).unwrap()
}

fn constants(model: &Model, cfg: &RatesConfig) -> centerman_core::rates::ContractionConstants {
    let samples = SampleSet::generate(model.driving.as_ref(), 8, 5.0, 3);
    let est = estimate_rates(model, &samples.omegas, cfg).unwrap();
    solve_mn(est.sigma + est.sigma_tail, est.tau + est.tau_tail).unwrap()
}

fn discrete_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("discrete_solve");
    for (name, model) in [("tempered", tempered(TimeDomain::Discrete)), ("r4", r4_disc())] {
        let k = constants(&model, &RatesConfig { horizon: 60.0, step: 1.0 });
        for horizon in [20, 40, 80] {
            let sol = GraphSolution::new(model.clone(), k, SolverConfig { horizon, ..Default::default() }).unwrap();
            let omega = OmegaPoint::scalar(0.3);
            let coords = vec![1.0; model.cocycle.center_dim()];
            let xi = model.lift_center(&omega, &coords).unwrap();
            group.bench_with_input(BenchmarkId::new(name, horizon), &xi, |b, xi| {
                b.iter(|| sol.solve(black_box(&omega), black_box(xi)).unwrap())
            });
        }
    }
    group.finish();
}

fn continuous_solve(c: &mut Criterion) {
    let model = tempered(TimeDomain::Continuous);
    let k = constants(&model, &RatesConfig { horizon: 20.0, step: 0.05 });
    let mut group = c.benchmark_group("continuous_solve");
    group.sample_size(10);
    for step in [0.1, 0.05] {
        let cfg = ContinuousConfig { horizon: 20.0, step, check_quadrature: false, ..Default::default() };
        let sol = ContinuousGraphSolution::new(model.clone(), k, cfg).unwrap();
        let omega = OmegaPoint::scalar(0.3);
        let xi = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        group.bench_with_input(BenchmarkId::from_parameter(step), &xi, |b, xi| {
            b.iter(|| sol.solve(black_box(&omega), black_box(xi)).unwrap())
        });
    }
    group.finish();
}

fn rates(c: &mut Criterion) {
    let model = tempered(TimeDomain::Discrete);
    let samples = SampleSet::generate(model.driving.as_ref(), 8, 5.0, 3);
    c.bench_function("rates/tempered_disc_h60", |b| {
        b.iter(|| estimate_rates(&model, black_box(&samples.omegas), &RatesConfig { horizon: 60.0, step: 1.0 }).unwrap())
    });
}

criterion_group!(benches, discrete_solve, continuous_solve, rates);
criterion_main!(benches);
