use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use qsky_core::*;

fn spectrum(lat: &Lattice, params: &ModelParams) -> Vec<f64> {
    let h = build_hamiltonian(lat, params).unwrap();
    diagonalize(&h, SolveMode::Full).unwrap().eigenvalues
}

#[test]
fn single_bond_spectra() {
    let xy = bond_hamiltonian(&ModelParams::new(0.0, 0.0), BondDirection::PlusX).unwrap();
    let e = diagonalize(&xy, SolveMode::Full).unwrap().eigenvalues;
    for (a, b) in e.iter().zip([-0.5, 0.0, 0.0, 0.5]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
    let iso = bond_hamiltonian(&ModelParams::new(1.0, 0.0), BondDirection::PlusY).unwrap();
    let e = diagonalize(&iso, SolveMode::Full).unwrap().eigenvalues;
    for (a, b) in e.iter().zip([-0.25, -0.25, -0.25, 0.75]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
}

#[test]
fn single_bond_dmi_trace_moments() {
    // every term is c * S^a S^b with distinct Pauli pairs, so Tr H = 0 and
    // Tr H^2 = sum c^2 / 4
    let (j, d) = (1.0, 0.7);
    let h = bond_hamiltonian(&ModelParams { j, delta: 0.0, dmi: d }, BondDirection::PlusX).unwrap();
    let e = diagonalize(&h, SolveMode::Full).unwrap().eigenvalues;
    let trace: f64 = e.iter().sum();
    let frob: f64 = e.iter().map(|x| x * x).sum();
    assert_abs_diff_eq!(trace, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(frob, (2.0 * j * j + 2.0 * d * d) / 4.0, epsilon = 1e-12);
}

#[test]
fn lowest_levels_agree_between_solvers_at_n3() {
    let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
    let h = build_hamiltonian(&lat, &ModelParams::new(0.51, 0.8)).unwrap();
    let full = diagonalize(&h, SolveMode::Full).unwrap();
    let low = diagonalize(&h, SolveMode::LowestK(6)).unwrap();
    for k in 0..6 {
        assert_abs_diff_eq!(full.eigenvalues[k], low.eigenvalues[k], epsilon = 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_invariant_under_site_relabeling(
        delta in 0.0f64..1.5,
        dmi in -2.0f64..2.0,
        perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let params = ModelParams::new(delta, dmi);
        let a = spectrum(&lat, &params);
        let b = spectrum(&lat.relabeled(&perm).unwrap(), &params);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_affine(delta in 0.0f64..1.5, dmi in -2.0f64..2.0) {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let h = build_hamiltonian(&lat, &ModelParams::new(delta, dmi)).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-14);
        let family = dmi_family(&lat, 1.0, delta, DEFAULT_MAX_QUANTUM_SPINS).unwrap();
        let diff = (&family.at(dmi).to_dense() - &h.to_dense()).iter().map(|x| x.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-13);
    }

    #[test]
    fn eigenpairs_reconstruct_the_operator(delta in 0.0f64..1.5, dmi in -2.0f64..2.0) {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let h = build_hamiltonian(&lat, &ModelParams::new(delta, dmi)).unwrap();
        let sys = diagonalize(&h, SolveMode::Full).unwrap();
        prop_assert!(sys.max_residual(&h) < 1e-12 * h.scale().max(1.0));
        prop_assert!(sys.orthonormality_defect() < 1e-12);
    }
}
