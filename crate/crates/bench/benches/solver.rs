use criterion::{criterion_group, criterion_main, Criterion};
use nozzle_shock::elliptic::{
    exit_oblique_coeffs, solve_theta, theta_coefficients, FixedDomainGrid, ThetaProblem,
};
use nozzle_shock::march::{solve_linearized, MarchGrid};
use nozzle_shock::shock::{h3_downstream, normal_shock_downstream, polar_critical_points};
use nozzle_shock::solver::{fixed_point_solve, SeedInit, SolverGrid, SolverOptions};
use nozzle_shock_bench::{model, upstream_m2, wall_driven_setup};
use std::hint::black_box;

fn bench_shock_algebra(c: &mut Criterion) {
    let m = model();
    let u = upstream_m2();
    c.bench_function("normal_shock_downstream", |b| {
        b.iter(|| normal_shock_downstream(&m, black_box(&u)).unwrap())
    });
    c.bench_function("polar_critical_points", |b| {
        b.iter(|| polar_critical_points(&m, black_box(&u)).unwrap())
    });
    c.bench_function("h3_downstream_slope", |b| {
        b.iter(|| h3_downstream(&m, black_box(&u), 0.003).unwrap())
    });
}

fn bench_march(c: &mut Criterion) {
    let setup = wall_driven_setup(0.01);
    c.bench_function("supersonic_march_ny64", |b| {
        b.iter(|| solve_linearized(&setup, MarchGrid { ny: 64, nx_override: None }).unwrap())
    });
}

fn bench_elliptic(c: &mut Criterion) {
    let m = model();
    let up = normal_shock_downstream(&m, &upstream_m2()).unwrap();
    let grid = FixedDomainGrid::new(64, 64, 0.5, 1.0, 2.366).unwrap();
    let cf = theta_coefficients(&m, &up).unwrap();
    let n = grid.n_nodes();
    let a11 = vec![cf.a11; n];
    let a12 = vec![cf.a12; n];
    let a22 = vec![cf.a22; n];
    let (ae, be) = exit_oblique_coeffs(&m, &up).unwrap();
    let bottom = vec![0.0; grid.nx + 1];
    let top = vec![0.01; grid.nx + 1];
    let exit_cxi = vec![-ae; grid.ny + 1];
    let exit_ceta = vec![be; grid.ny + 1];
    let zeros = vec![0.0; grid.ny + 1];
    let shock_cxi = vec![1.0; grid.ny + 1];
    c.bench_function("solve_theta_64x64", |b| {
        b.iter(|| {
            let problem = ThetaProblem {
                grid: &grid,
                a11: &a11,
                a12: &a12,
                a22: &a22,
                source: None,
                wall_bottom: &bottom,
                wall_top: &top,
                exit_cxi: &exit_cxi,
                exit_ceta: &exit_ceta,
                exit_rhs: &zeros,
                shock_cxi: &shock_cxi,
                shock_ceta: &zeros,
                shock_rhs: &zeros,
                tol_linear: 1e-10,
            };
            solve_theta(black_box(&problem)).unwrap()
        })
    });
}

fn bench_full_solve(c: &mut Criterion) {
    let setup = wall_driven_setup(0.01);
    let pe = setup.pe_interval.mid();
    let grid = SolverGrid { nx: 32, ny: 24, march_nx: None };
    let mut group = c.benchmark_group("fixed_point");
    group.sample_size(10);
    group.bench_function("solve_32x24", |b| {
        b.iter(|| {
            fixed_point_solve(&setup, pe, grid, SeedInit::default(), &SolverOptions::default())
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_shock_algebra,
    bench_march,
    bench_elliptic,
    bench_full_solve
);
criterion_main!(benches);
