use criterion::{criterion_group, criterion_main, Criterion};
use kdmc_core::{
    simulate, simulate_sequential, Background, BoundaryKind, CellParams, Problem, SamplerKind, SolverKind, StepConfig,
    Walls, DEFAULT_SIGMA_THRESHOLD,
};

fn problem() -> Problem {
    let background = Background::homogeneous(0.0, 1.0, 101, CellParams::new(100.0, 1e7, 1e7)).unwrap();
    let walls = Walls::around(&background, BoundaryKind::Reflecting).unwrap();
    Problem { background, walls, x0: 0.98, fluid_dt: 1e-5 }
}

fn config(solver: SolverKind) -> StepConfig {
    StepConfig {
        dt: 1e-4,
        t_final: 1e-3,
        n_particles: 4096,
        seed: 1,
        solver,
        sampler: SamplerKind::Efficient,
        boundary_sigma_threshold: DEFAULT_SIGMA_THRESHOLD,
    }
}

fn sweep(c: &mut Criterion) {
    let problem = problem();
    let cfg = config(SolverKind::KdmcFluid);
    let mut group = c.benchmark_group("kdmc_fluid_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| simulate_sequential(&problem, &cfg).unwrap()));
    group.bench_function("default", |b| b.iter(|| simulate(&problem, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
