use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qsky_core::*;

fn hamiltonian(c: &mut Criterion) {
    let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
    let params = ModelParams::new(0.51, 0.8);
    c.bench_function("build_hamiltonian n=3", |b| {
        b.iter(|| build_hamiltonian(black_box(&lat), black_box(&params)).unwrap())
    });
}

fn spectra(c: &mut Criterion) {
    let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
    let h = build_hamiltonian(&lat, &ModelParams::new(0.51, 0.8)).unwrap();
    let mut g = c.benchmark_group("diagonalize n=3");
    g.sample_size(10);
    g.bench_function("full", |b| {
        b.iter(|| diagonalize(black_box(&h), SolveMode::Full).unwrap())
    });
    g.bench_function("lowest 8", |b| {
        b.iter(|| diagonalize(black_box(&h), SolveMode::LowestK(8)).unwrap())
    });
    g.finish();
}

fn topology(c: &mut Criterion) {
    let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
    let h = build_hamiltonian(&lat, &ModelParams::new(0.25, 1.0)).unwrap();
    let ground = diagonalize(&h, SolveMode::LowestK(1)).unwrap().state(0);
    c.bench_function("ground-state index n=3", |b| {
        b.iter(|| {
            let texture = spin_texture(black_box(&ground), &lat).unwrap();
            let field = SpinField::index(&texture, DEFAULT_MOMENT_FLOOR).unwrap();
            topological_index(&field, &lat.triangulation).unwrap()
        })
    });
}

criterion_group!(benches, hamiltonian, spectra, topology);
criterion_main!(benches);
