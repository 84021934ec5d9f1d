use std::hint::black_box;

use bregkt_bench::{affine_problem, block_problem, halfspace_case, lambert_w_args, q_case};
use bregkt_core::instances::scalar_problem;
use bregkt_core::operators::scalar_resolvent;
use bregkt_core::prelude::*;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn special(c: &mut Criterion) {
    let args = lambert_w_args(200);
    c.bench_function("lambert_w/log_grid_200", |b| {
        b.iter(|| args.iter().map(|&t| lambert_w(black_box(t)).unwrap()).sum::<f64>())
    });
}

fn resolvents(c: &mut Criterion) {
    let mut g = c.benchmark_group("resolvent");
    let cases = [
        (
            "bs_entropy",
            KernelKind::BoltzmannShannon,
            ScalarPotential::Entropy { omega: 0.3 },
        ),
        (
            "bs_power",
            KernelKind::BoltzmannShannon,
            ScalarPotential::Power { p: 2.5 },
        ),
        (
            "bs_inverse_power",
            KernelKind::BoltzmannShannon,
            ScalarPotential::InversePower { p: 1.5 },
        ),
        (
            "fd_entropy",
            KernelKind::FermiDirac,
            ScalarPotential::Entropy { omega: 0.3 },
        ),
        ("energy_abs", KernelKind::Energy, ScalarPotential::Power { p: 1.0 }),
    ];
    for (name, h, phi) in cases {
        g.bench_function(BenchmarkId::new("closed_form", name), |b| {
            b.iter(|| scalar_resolvent(h, phi, black_box(1.0), black_box(0.7)).unwrap())
        });
        g.bench_function(BenchmarkId::new("newton", name), |b| {
            b.iter(|| bregkt_core::operators::scalar_resolvent_newton(h, phi, black_box(1.0), black_box(0.7)).unwrap())
        });
    }
    g.finish();
}

fn projections(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection");
    for kind in [KernelKind::Energy, KernelKind::BoltzmannShannon, KernelKind::Hellinger] {
        for dim in [2, 6, 32] {
            let (kernel, x, h) = halfspace_case(kind, dim);
            g.bench_function(BenchmarkId::new(format!("halfspace/{}", kind.name()), dim), |b| {
                b.iter(|| project_halfspace(&kernel, &h, black_box(&x)).unwrap())
            });
        }
    }
    for kind in [KernelKind::Energy, KernelKind::BoltzmannShannon] {
        for dim in [2, 6, 32] {
            let (kernel, x0, x, y) = q_case(kind, dim);
            g.bench_function(BenchmarkId::new(format!("q/{}", kind.name()), dim), |b| {
                b.iter(|| q_projection(&kernel, &x0, black_box(&x), &y).unwrap())
            });
        }
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(20);
    let opts = SolveOptions {
        max_iters: 1000,
        ..Default::default()
    };
    let s = StepSchedule::default();
    let scalar = scalar_problem();
    g.bench_function("scalar", |b| b.iter(|| solve(black_box(&scalar), &s, &opts)));
    for (seed, positive) in [(3, false), (3, true), (8, false)] {
        let p = affine_problem(seed, positive);
        let label = if positive { "positive" } else { "euclidean" };
        g.bench_function(BenchmarkId::new(format!("affine/{label}"), seed), |b| {
            b.iter(|| solve(black_box(&p), &s, &opts))
        });
    }
    for (m, p) in [(2, 2), (4, 3)] {
        let bp = block_problem(m, p);
        let assembled = assemble(&bp).unwrap();
        let id = format!("{m}x{p}");
        g.bench_function(BenchmarkId::new("blocks", &id), |b| {
            b.iter(|| solve_blocks(black_box(&bp), &s, &opts).unwrap())
        });
        g.bench_function(BenchmarkId::new("assembled", &id), |b| {
            b.iter(|| solve(black_box(&assembled), &s, &opts))
        });
    }
    g.finish();
}

criterion_group!(benches, special, resolvents, projections, solver);
criterion_main!(benches);
