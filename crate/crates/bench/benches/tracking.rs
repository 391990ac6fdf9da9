use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::DVector;

use fixtrack_core::problem::RelaxedProblem;
use fixtrack_core::{
    psi, run_scenario, solve_ustar, CaseStudy, DerivativeSource, OracleConfig, ScenarioConfig, ScenarioKey,
    SettlingTime,
};

fn fixed_time_law(c: &mut Criterion) {
    let tau = SettlingTime::new(3.0).unwrap();
    c.bench_function("psi", |b| b.iter(|| psi(black_box(-4.2), tau)));
}

fn partials(c: &mut Criterion) {
    let base = RelaxedProblem::with_defaults(CaseStudy::default(), 0.01, 1.0).unwrap();
    let x = DVector::from_column_slice(&[-9.0, -7.0, -5.0]);
    let u = DVector::from_column_slice(&[16.0, 7.0]);
    let mut g = c.benchmark_group("partials");
    for (name, src) in [("analytic", DerivativeSource::Analytic), ("dual", DerivativeSource::Dual)] {
        let p = base.clone().with_derivatives(src);
        g.bench_function(name, |b| b.iter(|| p.partials(black_box(&u), &x, 0.5).unwrap()));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let p = RelaxedProblem::with_defaults(CaseStudy::default(), 0.01, 1.0).unwrap();
    let x = DVector::from_column_slice(&[-9.0, -7.0, -5.0]);
    let cfg = OracleConfig::default();
    c.bench_function("solve_ustar_cold", |b| {
        b.iter(|| solve_ustar(&p, black_box(&x), 0.0, None, &cfg).unwrap())
    });
}

fn short_run(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::defaults(ScenarioKey::CaseStudy);
    cfg.integrator.t_end = 1.0;
    let mut g = c.benchmark_group("run");
    g.sample_size(10);
    g.bench_function("case_study_1s", |b| b.iter(|| run_scenario(&cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, fixed_time_law, partials, oracle, short_run);
criterion_main!(benches);
