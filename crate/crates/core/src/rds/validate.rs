//! Sampled verification of the structural axioms: driving-system group
//! law, cocycle property, invariant splitting, trichotomy bounds and the
//! Lipschitz certificate of the nonlinearity.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{DrivingSystem, Model, OmegaPoint, Subbundle, TimeDomain, DYNAMICAL_TOL, STRUCTURAL_TOL};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Worst observed violation (or ratio, for bound checks).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_at: Option<String>,
}

impl CheckOutcome {
    fn new(name: &str, worst: f64, tolerance: f64, worst_at: Option<String>) -> Self {
        CheckOutcome {
            name: name.to_string(),
            worst,
            tolerance,
            passed: worst <= tolerance,
            worst_at,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub subject: String,
    pub samples: usize,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl ValidationReport {
    fn new(subject: &str, samples: usize, checks: Vec<CheckOutcome>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { subject: subject.to_string(), samples, checks, passed }
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(subject: &str, reports: Vec<ValidationReport>) -> ValidationReport {
        let samples = reports.iter().map(|r| r.samples).max().unwrap_or(0);
        let checks = reports.into_iter().flat_map(|r| r.checks).collect();
        ValidationReport::new(subject, samples, checks)
    }
}

/// Tracks the largest value seen and where it happened.
struct Worst {
    value: f64,
    at: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: None }
    }

    fn update(&mut self, value: f64, at: impl FnOnce() -> String) {
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value > self.value || self.at.is_none() && value >= self.value {
            self.value = value;
            self.at = Some(at());
        }
    }

    fn outcome(self, name: &str, tol: f64) -> CheckOutcome {
        CheckOutcome::new(name, self.value, tol, self.at)
    }
}

/// Seeded sample sets shared by all validators.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub omegas: Vec<OmegaPoint>,
    /// `(t, ω)` with `t` of either sign.
    pub times: Vec<(f64, OmegaPoint)>,
    /// `(t, s, ω)` with `t, s >= 0`.
    pub pairs: Vec<(f64, f64, OmegaPoint)>,
}

impl SampleSet {
    pub fn generate(driving: &dyn DrivingSystem, count: usize, max_time: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = driving.time_domain();
        let draw_time = |rng: &mut ChaCha8Rng, lo: f64| -> f64 {
            let t = rng.random_range(lo..=max_time);
            match domain {
                TimeDomain::Discrete => t.round(),
                TimeDomain::Continuous => t,
            }
        };
        let mut omegas = Vec::with_capacity(count);
        let mut times = Vec::with_capacity(count);
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let w = driving.sample(&mut rng);
            let t = draw_time(&mut rng, -max_time);
            let a = draw_time(&mut rng, 0.0);
            let b = draw_time(&mut rng, 0.0);
            omegas.push(w.clone());
            times.push((t, w.clone()));
            pairs.push((a, b, w));
        }
        SampleSet { omegas, times, pairs }
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

pub fn check_driving(driving: &dyn DrivingSystem, samples: &SampleSet) -> ValidationReport {
    let mut identity = Worst::new();
    let mut group = Worst::new();
    for (t, s, w) in &samples.pairs {
        identity.update(driving.distance(&driving.flow(0.0, w), w), || format!("omega={w}"));
        for (a, b) in [(*t, *s), (-*t, *s), (*t, -*s)] {
            let lhs = driving.flow(a + b, w);
            let rhs = driving.flow(a, &driving.flow(b, w));
            let scale = w.coords().iter().fold(a.abs() + b.abs(), |m, c| m.max(c.abs()));
            group.update(rel(driving.distance(&lhs, &rhs), scale), || {
                format!("t={a}, s={b}, omega={w}")
            });
        }
    }
    ValidationReport::new(
        "driving system",
        samples.pairs.len(),
        vec![identity.outcome("identity", 0.0), group.outcome("group law", STRUCTURAL_TOL)],
    )
}

/// Cocycle property `Φ^{t+s}_ω = Φ^t_{θ^s ω} Φ^s_ω` and `Φ^0_ω = Id`,
/// measured relative to the size of the factors.
pub fn check_cocycle(model: &Model, samples: &SampleSet) -> ValidationReport {
    let norm = model.norm();
    let d = model.dim();
    let mut identity = Worst::new();
    let mut cocycle = Worst::new();
    for (t, s, w) in &samples.pairs {
        let id = model.cocycle.forward(0.0, w);
        identity.update(norm.operator(&(id - DMatrix::identity(d, d))), || format!("omega={w}"));
        let whole = model.cocycle.forward(t + s, w);
        let first = model.cocycle.forward(*s, w);
        let second = model.cocycle.forward(*t, &model.flow(*s, w));
        let scale = norm.operator(&second) * norm.operator(&first);
        let diff = norm.operator(&(whole - second * first));
        cocycle.update(rel(diff, scale), || format!("t={t}, s={s}, omega={w}"));
    }
    ValidationReport::new(
        "cocycle",
        samples.pairs.len(),
        vec![
            identity.outcome("forward(0) = identity", STRUCTURAL_TOL),
            cocycle.outcome("cocycle property", DYNAMICAL_TOL),
        ],
    )
}

/// Splitting conditions: idempotency, completeness, mutual annihilation at
/// the same fiber and equivariance under the cocycle.
pub fn validate_splitting(model: &Model, samples: &[(f64, OmegaPoint)]) -> ValidationReport {
    let norm = model.norm();
    let d = model.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let mut idempotent = Worst::new();
    let mut complete = Worst::new();
    let mut annihilate = Worst::new();
    let mut equivariant = Worst::new();
    for (t, w) in samples {
        let t = t.abs();
        let target = model.flow(t, w);
        let phi = model.cocycle.forward(t, w);
        let ps: Vec<DMatrix<f64>> = Subbundle::ALL.iter().map(|&i| model.projector(i, w)).collect();
        let sum = ps.iter().fold(DMatrix::zeros(d, d), |acc, p| acc + p);
        complete.update(norm.operator(&(sum - &id)), || format!("omega={w}"));
        for (i, p) in ps.iter().enumerate() {
            let np = norm.operator(p);
            idempotent.update(rel(norm.operator(&(p * p - p)), np * np), || {
                format!("P^{} at omega={w}", Subbundle::ALL[i])
            });
            for (j, q) in ps.iter().enumerate() {
                if i != j {
                    let v = rel(norm.operator(&(p * q)), np * norm.operator(q));
                    annihilate.update(v, || {
                        format!("P^{} P^{} at omega={w}", Subbundle::ALL[i], Subbundle::ALL[j])
                    });
                }
            }
            let p_target = model.projector(Subbundle::ALL[i], &target);
            let lhs = &p_target * &phi;
            let rhs = &phi * p;
            let scale = norm.operator(&phi) * np.max(norm.operator(&p_target));
            equivariant.update(rel(norm.operator(&(lhs - rhs)), scale), || {
                format!("P^{} with t={t}, omega={w}", Subbundle::ALL[i])
            });
        }
    }
    ValidationReport::new(
        "splitting",
        samples.len(),
        vec![
            idempotent.outcome("idempotency", STRUCTURAL_TOL),
            complete.outcome("sum to identity", STRUCTURAL_TOL),
            annihilate.outcome("annihilation", STRUCTURAL_TOL),
            equivariant.outcome("equivariance", DYNAMICAL_TOL),
        ],
    )
}

/// Bounds `‖Φ^{i,t}_ω‖ <= α^i_{t,ω}`. Each sample time is used with its
/// sign for the center bound, `|t|` for the stable bound and `-|t|` for
/// the unstable bound. Reports the worst ratio.
pub fn check_trichotomy(model: &Model, samples: &[(f64, OmegaPoint)]) -> ValidationReport {
    let norm = model.norm();
    let mut ratios = [Worst::new(), Worst::new(), Worst::new()];
    let mut bad_alpha = 0usize;
    let mut missing = Worst::new();
    for (t, w) in samples {
        for (k, sub) in Subbundle::ALL.iter().enumerate() {
            let time = match sub {
                Subbundle::Center => *t,
                Subbundle::Stable => t.abs(),
                Subbundle::Unstable => -t.abs(),
            };
            let alpha = model.alpha(*sub, time, w);
            if !(alpha.is_finite() && alpha > 0.0) {
                bad_alpha += 1;
                continue;
            }
            match model.block(*sub, time, w) {
                Ok(m) => {
                    let ratio = norm.operator(&m) / alpha;
                    ratios[k].update(ratio, || format!("t={time}, omega={w}"));
                }
                Err(_) => missing.update(1.0, || format!("{sub} at t={time}")),
            }
        }
    }
    let [c, s, u] = ratios;
    let tol = 1.0 + DYNAMICAL_TOL;
    ValidationReport::new(
        "trichotomy",
        samples.len(),
        vec![
            c.outcome("T1 center bound", tol),
            s.outcome("T2 stable bound", tol),
            u.outcome("T3 unstable bound", tol),
            CheckOutcome::new("bounds positive and finite", bad_alpha as f64, 0.0, None),
            missing.outcome("backward maps available", 0.0),
        ],
    )
}

/// Backward-forward round trips on `E^c` and `E^u`:
/// `backward(-t, θ^t ω) forward(t, ω) P_ω = P_ω`.
pub fn check_backward_roundtrip(model: &Model, samples: &SampleSet) -> ValidationReport {
    let norm = model.norm();
    let mut center = Worst::new();
    let mut unstable = Worst::new();
    for (t, _, w) in &samples.pairs {
        let target = model.flow(*t, w);
        let fwd = model.cocycle.forward(*t, w);
        for (sub, worst) in [(Subbundle::Center, &mut center), (Subbundle::Unstable, &mut unstable)] {
            let p = model.projector(sub, w);
            match model.cocycle.backward(sub, -t, &target) {
                Some(back) => {
                    let round = &back * &model.projector(sub, &target) * &fwd * &p;
                    let scale = norm.operator(&back) * norm.operator(&fwd) * norm.operator(&p);
                    worst.update(rel(norm.operator(&(round - &p)), scale), || {
                        format!("t={t}, omega={w}")
                    });
                }
                None => worst.update(f64::INFINITY, || format!("no backward map on E^{sub}")),
            }
        }
    }
    ValidationReport::new(
        "backward round trip",
        samples.pairs.len(),
        vec![
            center.outcome("center round trip", DYNAMICAL_TOL),
            unstable.outcome("unstable round trip", DYNAMICAL_TOL),
        ],
    )
}

/// `f_ω(0) = 0` exactly and `‖f_ω(x) - f_ω(y)‖ <= lip(ω) ‖x - y‖` on
/// seeded random pairs.
pub fn check_nonlinearity(model: &Model, samples: &SampleSet, seed: u64) -> ValidationReport {
    let norm = model.norm();
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_zero = Worst::new();
    let mut lipschitz = Worst::new();
    for w in &samples.omegas {
        let zero = DVector::zeros(d);
        at_zero.update(norm.of(&model.eval_f(w, &zero)), || format!("omega={w}"));
        let lip = model.lip(w);
        for _ in 0..4 {
            let x = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let lhs = norm.distance(&model.eval_f(w, &x), &model.eval_f(w, &y));
            let rhs = lip * norm.distance(&x, &y);
            lipschitz.update((lhs - rhs).max(0.0), || format!("omega={w}"));
        }
    }
    ValidationReport::new(
        "nonlinearity",
        samples.omegas.len(),
        vec![
            at_zero.outcome("f(omega, 0) = 0", 0.0),
            lipschitz.outcome("Lipschitz certificate", STRUCTURAL_TOL),
        ],
    )
}

/// Every structural check at once.
pub fn validate_structure(model: &Model, samples: &SampleSet) -> ValidationReport {
    ValidationReport::merge(
        &model.name,
        vec![
            check_driving(model.driving.as_ref(), samples),
            check_cocycle(model, samples),
            validate_splitting(model, &samples.times),
            check_trichotomy(model, &samples.times),
            check_backward_roundtrip(model, samples),
            check_nonlinearity(model, samples, 0x5eed),
        ],
    )
}
