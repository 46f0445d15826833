//! Anisotropic Heisenberg + interfacial DMI Hamiltonian on the quantum
//! region, with the classical ring folded in as linear (field-like) terms.
//!
//! Basis convention: bit `i` of a basis index is 0 for spin up and 1 for
//! spin down on quantum site `i`, so index 0 is the fully polarized +z
//! state.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{dmi_axis, Bond, BondDirection, BondKind, Lattice, SiteRef, Vec3};
use crate::operator::{HermitianOperator, LinearFamily};

/// Default cap on the number of quantum spins (2^16 basis states).
pub const DEFAULT_MAX_QUANTUM_SPINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Exchange constant, the energy unit.
    pub j: f64,
    /// Axial anisotropy.
    pub delta: f64,
    /// DMI strength.
    pub dmi: f64,
}

impl ModelParams {
    pub fn new(delta: f64, dmi: f64) -> Self {
        ModelParams { j: 1.0, delta, dmi }
    }

    pub fn with_dmi(self, dmi: f64) -> Self {
        ModelParams { dmi, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(Error::InvalidParams(format!("J must be positive, got {}", self.j)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if !self.dmi.is_finite() {
            return Err(Error::InvalidParams(format!("D must be finite, got {}", self.dmi)));
        }
        Ok(())
    }
}

type Coupling = [[f64; 3]; 3];

const LEVI_CIVITA: [[[f64; 3]; 3]; 3] = [
    [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]],
    [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
    [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
];

/// Bilinear coupling `Σ_ab C_ab S_i^a S_j^b` for a bond `i → j`.
fn bond_coupling(direction: BondDirection, params: &ModelParams) -> Coupling {
    let mut c = [[0.0; 3]; 3];
    c[0][0] = -params.j;
    c[1][1] = -params.j;
    c[2][2] = -params.delta;
    // -D u · (S_i × S_j) = -D Σ_a u_a ε_abc S_i^b S_j^c
    let u = dmi_axis(direction);
    for (a, ua) in u.iter().enumerate() {
        for b in 0..3 {
            for k in 0..3 {
                c[b][k] -= params.dmi * ua * LEVI_CIVITA[a][b][k];
            }
        }
    }
    c
}

fn classical_vector(lattice: &Lattice, site: SiteRef) -> Vec3 {
    match site {
        SiteRef::Classical(k) => lattice.classical_sites[k].vector(),
        SiteRef::Quantum(_) => unreachable!("not a classical site"),
    }
}

/// Effective field `h` on quantum site `q` from one quantum–classical bond,
/// so that the bond contributes `h · S_q`.
fn folded_field(lattice: &Lattice, bond: &Bond, params: &ModelParams) -> (usize, Vec3) {
    let c = bond_coupling(bond.direction, params);
    let mut h = [0.0; 3];
    match (bond.from, bond.to) {
        (SiteRef::Quantum(q), cl) => {
            let m = classical_vector(lattice, cl);
            for a in 0..3 {
                h[a] = (0..3).map(|b| c[a][b] * m[b]).sum();
            }
            (q, h)
        }
        (cl, SiteRef::Quantum(q)) => {
            let m = classical_vector(lattice, cl);
            for b in 0..3 {
                h[b] = (0..3).map(|a| m[a] * c[a][b]).sum();
            }
            (q, h)
        }
        _ => unreachable!("classical-classical bonds are not stored"),
    }
}

/// Effective linear coefficients contributed by the classical ring, one
/// entry per quantum site with at least one classical neighbour, in site
/// order.
pub fn boundary_terms(lattice: &Lattice, params: &ModelParams) -> Vec<(usize, Vec3)> {
    let mut fields: Vec<Option<Vec3>> = vec![None; lattice.num_quantum()];
    for bond in lattice.bonds_of_kind(BondKind::QuantumClassical) {
        let (q, h) = folded_field(lattice, bond, params);
        let acc = fields[q].get_or_insert([0.0; 3]);
        for a in 0..3 {
            acc[a] += h[a];
        }
    }
    fields
        .into_iter()
        .enumerate()
        .filter_map(|(q, h)| h.map(|h| (q, h)))
        .collect()
}

/// Action of `S^a` on a single spin: returns the new bit and the amplitude.
#[inline]
fn spin_op(axis: usize, bit: usize) -> (usize, Complex64) {
    match (axis, bit) {
        (0, b) => (1 - b, Complex64::new(0.5, 0.0)),
        (1, 0) => (1, Complex64::new(0.0, 0.5)),
        (1, _) => (0, Complex64::new(0.0, -0.5)),
        (2, 0) => (0, Complex64::new(0.5, 0.0)),
        (2, _) => (1, Complex64::new(-0.5, 0.0)),
        _ => unreachable!(),
    }
}

struct TermList {
    pairs: Vec<(usize, usize, Coupling)>,
    fields: Vec<(usize, Vec3)>,
}

fn assemble(num_spins: usize, terms: &TermList) -> HermitianOperator {
    let dim = 1usize << num_spins;
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
    for s in 0..dim {
        for &(i, j, ref c) in &terms.pairs {
            for (a, row) in c.iter().enumerate() {
                for (b, &cab) in row.iter().enumerate() {
                    if cab == 0.0 {
                        continue;
                    }
                    let (bit_j, amp_j) = spin_op(b, (s >> j) & 1);
                    let t = (s & !(1 << j)) | (bit_j << j);
                    let (bit_i, amp_i) = spin_op(a, (t >> i) & 1);
                    let target = (t & !(1 << i)) | (bit_i << i);
                    rows[target].push((s, amp_i * amp_j * cab));
                }
            }
        }
        for &(i, ref h) in &terms.fields {
            for (a, &ha) in h.iter().enumerate() {
                if ha == 0.0 {
                    continue;
                }
                let (bit, amp) = spin_op(a, (s >> i) & 1);
                let target = (s & !(1 << i)) | (bit << i);
                rows[target].push((s, amp * ha));
            }
        }
    }
    HermitianOperator::from_rows(rows)
}

fn collect_terms(lattice: &Lattice, params: &ModelParams) -> TermList {
    let pairs = lattice
        .bonds_of_kind(BondKind::QuantumQuantum)
        .map(|b| match (b.from, b.to) {
            (SiteRef::Quantum(i), SiteRef::Quantum(j)) => (i, j, bond_coupling(b.direction, params)),
            _ => unreachable!(),
        })
        .collect();
    TermList {
        pairs,
        fields: boundary_terms(lattice, params),
    }
}

fn check_cap(lattice: &Lattice, max_spins: usize) -> Result<()> {
    let spins = lattice.num_quantum();
    if spins > max_spins || spins >= usize::BITS as usize {
        return Err(Error::DimensionCap {
            what: "Hamiltonian",
            dim: spins,
            cap: max_spins,
        });
    }
    Ok(())
}

pub fn build_hamiltonian(lattice: &Lattice, params: &ModelParams) -> Result<HermitianOperator> {
    build_hamiltonian_capped(lattice, params, DEFAULT_MAX_QUANTUM_SPINS)
}

pub fn build_hamiltonian_capped(
    lattice: &Lattice,
    params: &ModelParams,
    max_spins: usize,
) -> Result<HermitianOperator> {
    params.validate()?;
    check_cap(lattice, max_spins)?;
    Ok(assemble(lattice.num_quantum(), &collect_terms(lattice, params)))
}

/// Two spins joined by one bond along `direction`, with no boundary.
pub fn bond_hamiltonian(params: &ModelParams, direction: BondDirection) -> Result<HermitianOperator> {
    params.validate()?;
    let terms = TermList {
        pairs: vec![(0, 1, bond_coupling(direction, params))],
        fields: vec![],
    };
    Ok(assemble(2, &terms))
}

/// The Hamiltonian is affine in D: `H(D) = H(0) + D · H_dmi`. Returns the
/// family so that a quench can form `H(D(t))` cheaply.
pub fn dmi_family(lattice: &Lattice, j: f64, delta: f64, max_spins: usize) -> Result<LinearFamily> {
    let at_zero = ModelParams { j, delta, dmi: 0.0 };
    at_zero.validate()?;
    check_cap(lattice, max_spins)?;
    let base = assemble(lattice.num_quantum(), &collect_terms(lattice, &at_zero));
    let unit = ModelParams {
        j: 0.0,
        delta: 0.0,
        dmi: 1.0,
    };
    let slope = assemble(lattice.num_quantum(), &collect_terms(lattice, &unit));
    Ok(LinearFamily::new(&base, &slope))
}

/// Total `S^z` as a diagonal operator.
pub fn total_sz(num_spins: usize) -> HermitianOperator {
    let dim = 1usize << num_spins;
    let rows = (0..dim)
        .map(|s| {
            let down = s.count_ones() as f64;
            vec![(s, Complex64::new(0.5 * num_spins as f64 - down, 0.0))]
        })
        .collect();
    HermitianOperator::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Boundary, LatticeSpec};
    use ndarray::Array2;
    use ndarray_linalg::{Eigh, UPLO};

    fn spectrum(h: &HermitianOperator) -> Vec<f64> {
        let (e, _) = h.to_dense().eigh(UPLO::Lower).unwrap();
        e.to_vec()
    }

    fn open_plaquette() -> Lattice {
        build_lattice(LatticeSpec::new(2, Boundary::None)).unwrap()
    }

    // Pauli/2 matrices and Kronecker products: an independent route to the
    // same operators.
    fn spin_matrices() -> [Array2<Complex64>; 3] {
        let z = Complex64::new(0.0, 0.0);
        let h = Complex64::new(0.5, 0.0);
        let ih = Complex64::new(0.0, 0.5);
        // basis order (up, down)
        [
            Array2::from_shape_vec((2, 2), vec![z, h, h, z]).unwrap(),
            Array2::from_shape_vec((2, 2), vec![z, -ih, ih, z]).unwrap(),
            Array2::from_shape_vec((2, 2), vec![h, z, z, -h]).unwrap(),
        ]
    }

    fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
        let (ra, ca) = a.dim();
        let (rb, cb) = b.dim();
        Array2::from_shape_fn((ra * rb, ca * cb), |(r, c)| a[[r / rb, c / cb]] * b[[r % rb, c % cb]])
    }

    /// Site operator in the basis where bit i of the index is site i.
    fn site_op(op: &Array2<Complex64>, site: usize, n: usize) -> Array2<Complex64> {
        let eye = Array2::<Complex64>::eye(2);
        // highest bit is the leftmost kron factor
        let mut m = Array2::<Complex64>::eye(1);
        for k in (0..n).rev() {
            m = kron(&m, if k == site { op } else { &eye });
        }
        m
    }

    #[test]
    fn two_site_xy_spectrum() {
        // a single bond is not an n x n lattice, so assemble it directly
        let params = ModelParams {
            j: 1.0,
            delta: 0.0,
            dmi: 0.0,
        };
        let mut e = spectrum(&bond_hamiltonian(&params, BondDirection::PlusX).unwrap());
        e.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip([-0.5, 0.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }

        let params = ModelParams {
            j: 1.0,
            delta: 1.0,
            dmi: 0.0,
        };
        let e = spectrum(&bond_hamiltonian(&params, BondDirection::PlusX).unwrap());
        for (a, b) in e.iter().zip([-0.25, -0.25, -0.25, 0.75]) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn matches_kron_construction_on_open_plaquette() {
        let lat = open_plaquette();
        let params = ModelParams {
            j: 1.0,
            delta: 0.37,
            dmi: 0.61,
        };
        let h = build_hamiltonian(&lat, &params).unwrap().to_dense();
        let s = spin_matrices();
        let n = lat.num_quantum();
        let mut expect = Array2::<Complex64>::zeros((1 << n, 1 << n));
        for b in lat.bonds_of_kind(BondKind::QuantumQuantum) {
            let (SiteRef::Quantum(i), SiteRef::Quantum(j)) = (b.from, b.to) else {
                unreachable!()
            };
            let si: Vec<_> = s.iter().map(|m| site_op(m, i, n)).collect();
            let sj: Vec<_> = s.iter().map(|m| site_op(m, j, n)).collect();
            let cj = Complex64::new(-1.0, 0.0);
            expect = expect + (si[0].dot(&sj[0]) + si[1].dot(&sj[1])) * cj;
            expect = expect + si[2].dot(&sj[2]) * Complex64::new(-params.delta, 0.0);
            // (S_i × S_j)
            let cross = [
                si[1].dot(&sj[2]) - si[2].dot(&sj[1]),
                si[2].dot(&sj[0]) - si[0].dot(&sj[2]),
                si[0].dot(&sj[1]) - si[1].dot(&sj[0]),
            ];
            let u = dmi_axis(b.direction);
            for a in 0..3 {
                expect = expect + &cross[a] * Complex64::new(-params.dmi * u[a], 0.0);
            }
        }
        let diff = (&h - &expect).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14, "max deviation {diff}");
    }

    #[test]
    fn boundary_field_single_site() {
        let lat = build_lattice(LatticeSpec::with_boundary(1)).unwrap();
        let terms = boundary_terms(&lat, &ModelParams::new(1.0, 0.0));
        assert_eq!(terms.len(), 1);
        let (site, h) = terms[0];
        assert_eq!(site, 0);
        // four classical neighbours, each -Δ · 1/2
        assert_eq!(h, [0.0, 0.0, -2.0]);

        // DMI from opposite neighbours cancels on a single site
        let terms = boundary_terms(&lat, &ModelParams::new(0.0, 0.8));
        assert!(terms[0].1.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn boundary_field_vanishes_without_anisotropy_and_dmi() {
        let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
        for (_, h) in boundary_terms(&lat, &ModelParams::new(0.0, 0.0)) {
            assert_eq!(h, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn boundary_field_counts_classical_neighbours() {
        let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
        let delta = 0.5;
        let dmi = 0.3;
        let terms = boundary_terms(&lat, &ModelParams::new(delta, dmi));
        // enumeration oracle: walk the bond list directly
        let mut expect = vec![[0.0f64; 3]; 9];
        let mut touched = [false; 9];
        for b in &lat.bonds {
            if b.kind != BondKind::QuantumClassical {
                continue;
            }
            let (q, sign) = match (b.from, b.to) {
                (SiteRef::Quantum(q), _) => (q, -1.0),
                (_, SiteRef::Quantum(q)) => (q, 1.0),
                _ => unreachable!(),
            };
            touched[q] = true;
            expect[q][2] -= delta * 0.5;
            let axis = if b.direction == BondDirection::PlusX { 0 } else { 1 };
            expect[q][axis] += sign * dmi * 0.5;
        }
        assert!(!touched[4], "centre site has no classical neighbour");
        let got: Vec<_> = terms.iter().map(|t| t.0).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 5, 6, 7, 8]);
        for (q, h) in terms {
            for a in 0..3 {
                assert!((h[a] - expect[q][a]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hermitian_real_and_sz_conserving_without_dmi() {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let h = build_hamiltonian(&lat, &ModelParams::new(0.4, 0.0)).unwrap();
        assert!(h.hermiticity_defect() < 1e-12 * h.scale());
        assert!(h.max_imag() < 1e-14);
        let sz = total_sz(4);
        let comm = h.to_dense().dot(&sz.to_dense()) - sz.to_dense().dot(&h.to_dense());
        assert!(comm.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-10);

        let hd = build_hamiltonian(&lat, &ModelParams::new(0.4, 0.7)).unwrap();
        assert!(hd.hermiticity_defect() < 1e-12 * hd.scale());
        let comm = hd.to_dense().dot(&sz.to_dense()) - sz.to_dense().dot(&hd.to_dense());
        assert!(comm.iter().map(|v| v.norm()).fold(0.0, f64::max) > 1e-3);
    }

    #[test]
    fn family_is_affine_in_dmi() {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let fam = dmi_family(&lat, 1.0, 0.51, 16).unwrap();
        for d in [0.0, 0.4, 1.3] {
            let direct = build_hamiltonian(&lat, &ModelParams::new(0.51, d)).unwrap();
            let diff = (&fam.at(d).to_dense() - &direct.to_dense())
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn rejects_invalid_params_and_cap() {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        assert!(build_hamiltonian(
            &lat,
            &ModelParams {
                j: 0.0,
                delta: 0.0,
                dmi: 0.0
            }
        )
        .is_err());
        assert!(build_hamiltonian(&lat, &ModelParams::new(-0.1, 0.0)).is_err());
        assert!(matches!(
            build_hamiltonian_capped(&lat, &ModelParams::new(0.1, 0.0), 3),
            Err(Error::DimensionCap { .. })
        ));
    }
}
