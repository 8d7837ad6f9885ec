use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use krotov_bench::{sodium_filters, sodium_tpa, with_spectral};
use krotov_core::krotov::fredholm_solver;
use krotov_core::{Direction, FredholmOperator, Optimizer, Propagator, StopRule};

fn propagation(c: &mut Criterion) {
    let mut g = c.benchmark_group("propagate_sodium");
    for n in [1024, 4096] {
        let p = sodium_tpa(n, 400.0);
        let prop = Propagator::new(&p.system, p.propagator);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| prop.propagate(&p.guess, &p.initial_states[0], Direction::Forward).unwrap())
        });
    }
    g.finish();
}

fn fredholm(c: &mut Criterion) {
    let mut g = c.benchmark_group("fredholm");
    g.sample_size(10);
    let p = sodium_tpa(4096, 400.0);
    let bank = sodium_filters(&p);
    for order in [256, 1024] {
        let s = krotov_core::SpectralSettings::new(bank.clone());
        g.bench_with_input(BenchmarkId::new("assemble_factor", order), &order, |b, &order| {
            b.iter(|| {
                let op = FredholmOperator::new(&bank, &p.amplitude, &p.grid, order, s.quadrature).unwrap();
                krotov_core::FredholmSolver::new(op).unwrap()
            })
        });
        let solver = fredholm_solver(&with_spectral(p.clone(), Some(order))).unwrap().unwrap();
        let rhs = p.guess.values().to_vec();
        g.bench_with_input(BenchmarkId::new("solve", order), &order, |b, _| b.iter(|| solver.solve(&rhs).unwrap()));
    }
    g.finish();
}

fn iteration(c: &mut Criterion) {
    let mut g = c.benchmark_group("krotov_iteration");
    g.sample_size(10);
    let cases = [
        ("unconstrained", sodium_tpa(4096, 400.0)),
        ("spectral_order_1024", with_spectral(sodium_tpa(4096, 400.0), Some(1024))),
    ];
    for (name, p) in cases {
        let p = p.with_stop(StopRule { max_iterations: usize::MAX, j_t_threshold: 0.0 });
        let mut opt = Optimizer::new(p).unwrap();
        g.bench_function(name, |b| b.iter(|| opt.step().unwrap().j));
    }
    g.finish();
}

criterion_group!(benches, propagation, fredholm, iteration);
criterion_main!(benches);
