use criterion::{criterion_group, criterion_main, Criterion};
use esdg::dg::{SchemeMode, Solver, Workspace};
use esdg::mesh::build_mesh;
use esdg::par;
use esdg::sbp::SbpOperators;
use esdg::scenarios::orszag_tang;

fn rhs(c: &mut Criterion) {
    let sc = orszag_tang();
    let ops = SbpOperators::new(7).unwrap();
    let mesh = build_mesh(sc.bounds, 20, 20, &ops).unwrap();
    let solver = Solver::new(mesh, ops, sc.gas, SchemeMode::entropy_stable()).unwrap();
    let u = solver.project(|x, y| (sc.initial)(x, y));
    let mut ws = Workspace::new(&solver);
    let mut out = vec![[0.0; 9]; u.len()];
    let mut group = c.benchmark_group("rhs_orszag_tang_n7_20x20");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| par::with_threads(Some(1), || solver.rhs_into(&u, 0.0, 1.0, &mut ws, &mut out).unwrap()))
    });
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    group.bench_function(format!("parallel_{threads}_threads"), |b| {
        b.iter(|| par::with_threads(Some(threads), || solver.rhs_into(&u, 0.0, 1.0, &mut ws, &mut out).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, rhs);
criterion_main!(benches);
