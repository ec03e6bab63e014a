use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use steklov_core::assembly::assemble_operator;
use steklov_core::eigen_linear::{LinearOptions, LinearSolver};
use steklov_core::fucik::{curve_points_with, FucikOptions};
use steklov_core::mesh::build_square_mesh;
use steklov_core::par::{self, Exec};
use steklov_core::quadrature::{BoundaryQuadrature, QuadOptions};
use steklov_core::space::FeSpace;
use steklov_core::weights::{Profile, WeightSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn cosine(eps: f64) -> WeightSpec {
    WeightSpec::new(Profile::cosine(1.0, 2.0, [1, 1, 0]), eps).unwrap()
}

fn assembly(c: &mut Criterion) {
    let mesh = build_square_mesh(256).unwrap();
    let space = FeSpace::full(&mesh);
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("operator", name), |b| b.iter(|| assemble_operator(&space, 1.0, 1.0, exec).unwrap()));
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let mesh = build_square_mesh(512).unwrap();
    let spec = cosine(1.0 / 64.0);
    let mut g = c.benchmark_group("boundary_quadrature");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("build", name), |b| {
            b.iter(|| BoundaryQuadrature::with_exec(&mesh, &spec, &QuadOptions::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mesh = build_square_mesh(64).unwrap();
    let space = FeSpace::full(&mesh);
    let eps: Vec<f64> = [8.0, 12.0, 16.0, 24.0, 32.0].iter().map(|m| 1.0 / m).collect();
    let mut g = c.benchmark_group("epsilon_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        let solver = LinearSolver::new(&space, LinearOptions { exec, ..LinearOptions::default() }).unwrap();
        g.bench_function(BenchmarkId::new("first_two", name), |b| {
            b.iter(|| par::map_tasks(exec, &eps, |&e| solver.solve(&cosine(e), 2).unwrap()))
        });
    }
    g.finish();
}

fn s_grid(c: &mut Criterion) {
    let mesh = build_square_mesh(12).unwrap();
    let one = WeightSpec::constant(1.0).unwrap();
    let grid = [0.5, 1.0, 2.0, 4.0];
    let mut g = c.benchmark_group("fucik_curve");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = FucikOptions { exec, ..FucikOptions::default() };
        g.bench_function(BenchmarkId::new("s_grid", name), |b| {
            b.iter(|| curve_points_with(&mesh, &one, &one, &grid, 2.0, &opts, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, assembly, quadrature, sweep, s_grid);
criterion_main!(benches);
