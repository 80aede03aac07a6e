//! Hot-path benchmarks: the Lyapunov solve and working-point search behind
//! every sweep point, the per-step cost of the conditional integrator, and
//! the exact single-mode references.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kerrnet_core::nvk;
use kerrnet_core::oracle::{complexp_moment, FockChain, KerrParams};
use kerrnet_core::steom::{SdeConfig, Stepper};
use kerrnet_core::tasks::{self, TaskId};

fn bench_semi_analytic(c: &mut Criterion) {
    let task1 = tasks::task(TaskId::I);
    let sys1 = task1.spec.build("l1").unwrap();
    let task2 = tasks::task(TaskId::II);
    let sys2 = task2.spec.build("l3").unwrap();

    c.bench_function("expansion_point_single_kerr", |b| {
        b.iter(|| nvk::solve_expansion_point(black_box(&sys1)).unwrap())
    });
    c.bench_function("expansion_point_kerr_dimer", |b| {
        b.iter(|| nvk::solve_expansion_point(black_box(&sys2)).unwrap())
    });
    c.bench_function("full_solution_single_kerr", |b| {
        b.iter(|| nvk::solve(black_box(&sys1)).unwrap())
    });
    let sol = nvk::solve(&sys2).unwrap();
    c.bench_function("measured_covariance_general_dimer", |b| {
        b.iter(|| {
            nvk::measured_covariance(
                black_box(&sys2),
                black_box(&sol),
                111.0,
                0.0,
                nvk::FilterMode::General,
            )
            .unwrap()
        })
    });
}

fn bench_stochastic_steps(c: &mut Criterion) {
    let task = tasks::task(TaskId::I);
    let sys = task.spec.build("l1").unwrap();
    let cfg = SdeConfig { dt: 5e-3, t_total: 1.0, seed: 3, store_stride: 0 };
    c.bench_function("conditional_step_three_modes", |b| {
        let mut stepper = Stepper::new(&sys, cfg.dt, cfg.seed);
        b.iter(|| stepper.step().unwrap())
    });
}

fn bench_oracles(c: &mut Criterion) {
    let params =
        KerrParams { detuning: -1.0, kerr: 0.005, damping: 1.5, drive: 10.0, drive_phase: 0.0 };
    c.bench_function("complex_p_occupation_strong_drive", |b| {
        b.iter(|| complexp_moment(black_box(&params), 1, 1).unwrap())
    });
    let weak = KerrParams { detuning: -0.5, kerr: 0.1, damping: 1.0, drive: 0.6, drive_phase: 0.0 };
    c.bench_function("fock_steady_state_dense_dim24", |b| {
        b.iter(|| FockChain::driven_kerr(black_box(&weak), 24).steady_state().unwrap())
    });
}

criterion_group!(benches, bench_semi_analytic, bench_stochastic_steps, bench_oracles);
criterion_main!(benches);
