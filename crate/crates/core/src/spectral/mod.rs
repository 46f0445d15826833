//! Diagonalization and spin textures of eigenstates.

mod lanczos;

pub use lanczos::LanczosConfig;

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec3};
use crate::operator::HermitianOperator;
use crate::topology::SpinTexture;

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Full,
    LowestK(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub dense_cap: usize,
    /// Residual bound `||H v - λ v|| / scale(H)` for every returned pair.
    pub residual_tol: f64,
    /// Bound on `max |V†V - I|`.
    pub orthonormality_tol: f64,
    /// Eigenvalues closer than this belong to one degenerate cluster.
    pub cluster_tol: f64,
    pub lanczos: LanczosConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dense_cap: DEFAULT_DENSE_CAP,
            residual_tol: 1e-8,
            orthonormality_tol: 1e-10,
            cluster_tol: 1e-10,
            lanczos: LanczosConfig::default(),
        }
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    /// `dim × len` matrix; column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: Array2<Complex64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.dim()
    }

    pub fn vector(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.eigenvectors.column(k)
    }

    pub fn state(&self, k: usize) -> QuantumState {
        QuantumState {
            amplitudes: self.vector(k).to_owned(),
        }
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Index ranges of degenerate clusters (consecutive gaps below `tol`).
    pub fn clusters(&self, tol: f64) -> Vec<Range<usize>> {
        degenerate_clusters(&self.eigenvalues, tol)
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let v = &self.eigenvectors;
        let gram = v.t().mapv(|x| x.conj()).dot(v);
        gram.indexed_iter()
            .map(|((i, j), g)| {
                let target = if i == j { 1.0 } else { 0.0 };
                (g - Complex64::new(target, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `||H v_k - λ_k v_k||₂` over the retained pairs.
    pub fn max_residual(&self, h: &HermitianOperator) -> f64 {
        let mut hv = Array2::zeros(self.eigenvectors.raw_dim());
        let v = self.eigenvectors.as_standard_layout();
        h.apply_block_shifted(0.0, v.view(), hv.view_mut());
        (0..self.len())
            .map(|k| {
                hv.column(k)
                    .iter()
                    .zip(v.column(k))
                    .map(|(a, b)| (a - b * self.eigenvalues[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

pub fn degenerate_clusters(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] >= tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// LAPACK `heevd` on a column-major copy. ndarray-linalg hands row-major
/// complex input to LAPACK as its transpose, which for a Hermitian matrix
/// conjugates the eigenvectors.
pub(crate) fn dense_eigh(m: Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let mut f = Array2::zeros(m.raw_dim().f());
    f.assign(&m);
    f.eigh(UPLO::Lower).map_err(|e| Error::Eigensolver(e.to_string()))
}

pub fn diagonalize(h: &HermitianOperator, mode: SolveMode) -> Result<EigenSystem> {
    diagonalize_with(h, mode, &SolverConfig::default())
}

pub fn diagonalize_with(h: &HermitianOperator, mode: SolveMode, cfg: &SolverConfig) -> Result<EigenSystem> {
    let system = match mode {
        SolveMode::Full => {
            if h.dim() > cfg.dense_cap {
                return Err(Error::DimensionCap {
                    what: "dense diagonalization",
                    dim: h.dim(),
                    cap: cfg.dense_cap,
                });
            }
            let (vals, vecs) = dense_eigh(h.to_dense())?;
            EigenSystem {
                eigenvalues: vals.to_vec(),
                eigenvectors: vecs,
            }
        }
        SolveMode::LowestK(k) => {
            let (vals, vecs) = lanczos::lowest_k(h, k, &cfg.lanczos)?;
            EigenSystem {
                eigenvalues: vals,
                eigenvectors: vecs,
            }
        }
    };
    let tol = cfg.residual_tol * h.scale();
    let residual = system.max_residual(h);
    if residual > tol {
        return Err(Error::NonConvergence {
            max_residual: residual,
            tol,
        });
    }
    let defect = system.orthonormality_defect();
    if defect > cfg.orthonormality_tol {
        return Err(Error::Eigensolver(format!(
            "eigenvectors not orthonormal (defect {defect:.3e})"
        )));
    }
    Ok(system)
}

/// Normalized state vector in the computational spin basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Array1<Complex64>,
}

impl QuantumState {
    pub const NORM_TOL: f64 = 1e-10;

    pub fn new(amplitudes: Array1<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(QuantumState { amplitudes })
    }

    /// Rescales to unit norm; fails only on the zero vector.
    pub fn normalized(mut amplitudes: Array1<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        amplitudes.mapv_inplace(|a| a / norm);
        Ok(QuantumState { amplitudes })
    }

    /// Unchecked constructor for propagated states, whose norm is tracked
    /// separately as a unitarity defect.
    pub(crate) fn from_raw(amplitudes: Array1<Complex64>) -> Self {
        QuantumState { amplitudes }
    }

    /// Product state from per-site bits (0 = up, 1 = down).
    pub fn basis(num_spins: usize, index: usize) -> Self {
        let mut amplitudes = Array1::zeros(1 << num_spins);
        amplitudes[index] = Complex64::new(1.0, 0.0);
        QuantumState { amplitudes }
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Array1<Complex64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn num_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &QuantumState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

pub fn spin_expectation(state: &QuantumState, site: usize) -> Result<Vec3> {
    let spins = state.num_spins();
    if site >= spins {
        return Err(Error::SiteOutOfRange { site, count: spins });
    }
    let psi = state.amplitudes();
    let mask = 1usize << site;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sz = 0.0;
    for (s, &amp) in psi.iter().enumerate() {
        let flipped = psi[s ^ mask].conj() * amp;
        if s & mask == 0 {
            // S^y|up> = (i/2)|down>
            sy += (flipped * Complex64::new(0.0, 0.5)).re;
            sz += 0.5 * amp.norm_sqr();
        } else {
            sy += (flipped * Complex64::new(0.0, -0.5)).re;
            sz -= 0.5 * amp.norm_sqr();
        }
        sx += 0.5 * flipped.re;
    }
    Ok([sx, sy, sz])
}

/// Spin expectation vectors on all quantum sites plus the fixed classical
/// vectors.
pub fn spin_texture(state: &QuantumState, lattice: &Lattice) -> Result<SpinTexture> {
    if state.num_spins() != lattice.num_quantum() || state.dim() != 1 << lattice.num_quantum() {
        return Err(Error::LengthMismatch(format!(
            "state of dimension {} on a lattice with {} quantum sites",
            state.dim(),
            lattice.num_quantum()
        )));
    }
    let quantum = (0..lattice.num_quantum())
        .map(|i| spin_expectation(state, i))
        .collect::<Result<Vec<_>>>()?;
    let classical = lattice.classical_sites.iter().map(|c| c.vector()).collect();
    Ok(SpinTexture { quantum, classical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, ModelParams};
    use crate::lattice::{build_lattice, LatticeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(dim: usize, seed: u64) -> HermitianOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Array2::<Complex64>::zeros((dim, dim));
        for i in 0..dim {
            m[[i, i]] = c(rng.gen_range(-1.0..1.0), 0.0);
            for j in 0..i {
                let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[[i, j]] = v;
                m[[j, i]] = v.conj();
            }
        }
        HermitianOperator::from_dense(&m)
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let zero = HermitianOperator::zeros(8);
        let sys = diagonalize(&zero, SolveMode::Full).unwrap();
        assert_eq!(sys.eigenvalues, vec![0.0; 8]);
    }

    #[test]
    fn reconstruction_of_random_hermitian() {
        for seed in 0..3 {
            let h = random_hermitian(64, seed);
            let sys = diagonalize(&h, SolveMode::Full).unwrap();
            let v = &sys.eigenvectors;
            let lam = Array2::from_diag(&Array1::from(sys.eigenvalues.clone()).mapv(|e| c(e, 0.0)));
            let rebuilt = v.dot(&lam).dot(&v.t().mapv(|x| x.conj()));
            let err = (&rebuilt - &h.to_dense()).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(err < 1e-8 * h.scale(), "reconstruction error {err}");
            assert!(sys.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert!(sys.orthonormality_defect() < 1e-10);
        }
    }

    #[test]
    fn lowest_k_matches_full_on_model() {
        let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
        for (delta, dmi) in [(0.25, 0.0), (0.51, 0.9)] {
            let h = build_hamiltonian(&lat, &ModelParams::new(delta, dmi)).unwrap();
            let full = diagonalize(&h, SolveMode::Full).unwrap();
            let part = diagonalize(&h, SolveMode::LowestK(12)).unwrap();
            assert_eq!(part.len(), 12);
            for k in 0..12 {
                assert!(
                    (full.eigenvalues[k] - part.eigenvalues[k]).abs() < 1e-8,
                    "level {k}: {} vs {}",
                    full.eigenvalues[k],
                    part.eigenvalues[k]
                );
            }
        }
    }

    #[test]
    fn full_mode_respects_dense_cap() {
        let h = HermitianOperator::zeros(16);
        let cfg = SolverConfig {
            dense_cap: 8,
            ..SolverConfig::default()
        };
        assert!(matches!(
            diagonalize_with(&h, SolveMode::Full, &cfg),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn clusters_group_degenerate_levels() {
        let cl = degenerate_clusters(&[-1.0, -1.0, 0.0, 0.5, 0.5, 0.5, 2.0], 1e-10);
        assert_eq!(cl, vec![0..2, 2..3, 3..6, 6..7]);
    }

    #[test]
    fn spin_expectations_of_simple_states() {
        let up = QuantumState::basis(1, 0);
        assert_eq!(spin_expectation(&up, 0).unwrap(), [0.0, 0.0, 0.5]);

        let s = 1.0 / 2f64.sqrt();
        let plus = QuantumState::new(Array1::from(vec![c(s, 0.0), c(s, 0.0)])).unwrap();
        let e = spin_expectation(&plus, 0).unwrap();
        assert!((e[0] - 0.5).abs() < 1e-15 && e[1].abs() < 1e-15 && e[2].abs() < 1e-15);

        let plus_y = QuantumState::new(Array1::from(vec![c(s, 0.0), c(0.0, s)])).unwrap();
        let e = spin_expectation(&plus_y, 0).unwrap();
        assert!((e[1] - 0.5).abs() < 1e-15, "{e:?}");

        // singlet (|ud> - |du>)/sqrt2: bit0 is site 0
        let singlet = QuantumState::new(Array1::from(vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)])).unwrap();
        for site in 0..2 {
            let e = spin_expectation(&singlet, site).unwrap();
            assert!(e.iter().all(|v| v.abs() < 1e-15));
        }
        assert!(matches!(
            spin_expectation(&singlet, 2),
            Err(Error::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_unnormalized_states() {
        assert!(QuantumState::new(Array1::from(vec![c(1.0, 0.0), c(1.0, 0.0)])).is_err());
        assert!(QuantumState::normalized(Array1::from(vec![c(0.0, 0.0)])).is_err());
    }

    #[test]
    fn texture_of_polarized_state() {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let tex = spin_texture(&QuantumState::basis(4, 0), &lat).unwrap();
        assert!(tex.quantum.iter().all(|v| *v == [0.0, 0.0, 0.5]));
        assert_eq!(tex.classical.len(), 12);
        assert!(tex.classical.iter().all(|v| *v == [0.0, 0.0, 0.5]));
        // classical vectors do not depend on the state
        let tex2 = spin_texture(&QuantumState::basis(4, 0b1011), &lat).unwrap();
        assert_eq!(tex.classical, tex2.classical);
    }
}
