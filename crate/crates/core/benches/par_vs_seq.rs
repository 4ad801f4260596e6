//! Data-parallel vs sequential execution of the hot kernels: transforms,
//! the per-mode propagator, the nonlinear right-hand side, and a full step.
//!
//! Build with `--no-default-features` to check that the sequential path
//! stands alone; with default features this binary compares both policies
//! in one run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bvxl::dynamics::{Formulation, SimState, Stepper, StepperConfig};
use bvxl::exec::Exec;
use bvxl::field::Domain;
use bvxl::grid::{Bc, GridSpec};
use bvxl::linops::{apply_propagator, PhysParams};

fn execs() -> Vec<(&'static str, Exec)> {
    #[cfg(feature = "parallel")]
    {
        vec![("seq", Exec::Seq), ("par", Exec::Par)]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("seq", Exec::Seq)]
    }
}

fn setup(exec: Exec) -> (std::sync::Arc<Domain>, SimState, Stepper) {
    let domain = Domain::new(GridSpec::new(40.0, 128, 8, Bc::Periodic), exec).unwrap();
    let params = PhysParams { omega: 10.0, gamma: 5.0, nu: 1.0 };
    let mut v = bvxl::experiment::poloidal_band_data(&domain, Some(1), 6.3, 9.0);
    let l2 = v.l2sq().sqrt();
    v.scale(0.5 / l2);
    let mut bt = bvxl::scenario::random_barotropic_band(&domain, 2, 0.3, 3.0).unwrap();
    let l2 = bt.l2sq().sqrt();
    bt.scale(0.5 / l2);
    v.axpy(1.0, &bt);
    let state = SimState { v, t: 0.0, formulation: Formulation::Full, background: None, params };
    let mut stepper = Stepper::new(&domain, StepperConfig { dt: 0.01, linear_only: false });
    stepper.arm_guard(&state);
    (domain, state, stepper)
}

fn bench_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels_128x128x8");
    group.sample_size(10);
    for (name, exec) in execs() {
        let (domain, state, mut stepper) = setup(exec);
        group.bench_with_input(BenchmarkId::new("forward_transform", name), &exec, |b, _| {
            let phys = bvxl::field::to_physical(&state.v);
            b.iter(|| std::hint::black_box(bvxl::field::to_spectral(&phys)));
        });
        group.bench_with_input(BenchmarkId::new("inverse_transform", name), &exec, |b, _| {
            b.iter(|| std::hint::black_box(bvxl::field::to_physical(&state.v)));
        });
        group.bench_with_input(BenchmarkId::new("propagator", name), &exec, |b, _| {
            let mut v = state.v.clone();
            b.iter(|| {
                apply_propagator(&mut v, &state.params, 1e-4);
                std::hint::black_box(&v);
            });
        });
        group.bench_with_input(BenchmarkId::new("nonlinear_rhs", name), &exec, |b, _| {
            let mut out = state.v.same_shape();
            b.iter(|| {
                stepper.nonlinear_rhs(&state, &mut out);
                std::hint::black_box(&out);
            });
        });
        group.bench_with_input(BenchmarkId::new("full_step", name), &exec, |b, _| {
            b.iter_batched(
                || SimState {
                    v: state.v.clone(),
                    t: 0.0,
                    formulation: Formulation::Full,
                    background: None,
                    params: state.params,
                },
                |mut st| {
                    stepper.step(&mut st).unwrap();
                    std::hint::black_box(st.t)
                },
                criterion::BatchSize::LargeInput,
            );
        });
        drop(domain);
    }
    group.finish();
}

criterion_group!(benches, bench_kernels);
criterion_main!(benches);
