use std::hint::black_box;

use atomion::floquet::{build_floquet_matrix, diagonalize_floquet};
use atomion::numerov::solve_unperturbed;
use atomion::propagator::propagate_one_period;
use atomion::spectra::{scan_spectrum, DriveParams};
use atomion::{BasisOptions, PeriodicHamiltonian, TrapConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn basis(c: &mut Criterion) {
    let s = TrapConfig::ba_rb().scaled().unwrap();
    let opts = BasisOptions::default();
    let mut g = c.benchmark_group("basis");
    g.sample_size(10);
    g.bench_function("numerov_150", |b| b.iter(|| solve_unperturbed(black_box(&s), &opts).unwrap()));
    let basis = solve_unperturbed(&s, &opts).unwrap();
    let grid: Vec<f64> = (0..50).map(|i| 4.0 + 0.05 * i as f64).collect();
    g.bench_function("static_scan_50", |b| b.iter(|| scan_spectrum(&basis, black_box(&grid)).unwrap()));
    g.finish();
}

fn engines(c: &mut Criterion) {
    let s = TrapConfig::ba_rb().scaled().unwrap();
    let basis = solve_unperturbed(&s, &BasisOptions::default()).unwrap().truncate(60);
    let p = DriveParams { gamma: s.gamma, delta_d: 0.0, l_ac: 0.0 };
    let ham = PeriodicHamiltonian::atom_ion(&basis, 6.0, s.omega, p, true);
    let mut g = c.benchmark_group("quasienergy_ne60");
    g.sample_size(10);
    g.bench_function("floquet_nf10", |b| {
        b.iter(|| diagonalize_floquet(&build_floquet_matrix(black_box(&ham), 10).unwrap(), 0.0).unwrap())
    });
    g.bench_function("propagator_1000", |b| b.iter(|| propagate_one_period(black_box(&ham), 1000).unwrap()));
    let two = PeriodicHamiltonian::two_level(1.0, 0.02, 1.0);
    g.bench_function("two_level_nf20", |b| {
        b.iter(|| diagonalize_floquet(&build_floquet_matrix(black_box(&two), 20).unwrap(), 0.0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, basis, engines);
criterion_main!(benches);
