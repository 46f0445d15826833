//! Linear DMI quenches: time-ordered propagation, transition probabilities
//! between the initial and final eigenbases, and the dynamical/geometric
//! phase split of an adiabatically followed level.

mod expm;

use std::f64::consts::PI;
use std::ops::Range;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{dmi_family, ModelParams, DEFAULT_MAX_QUANTUM_SPINS};
use crate::lattice::Lattice;
use crate::operator::{HermitianOperator, LinearFamily};
use crate::spectral::{degenerate_clusters, diagonalize_with, EigenSystem, QuantumState, SolveMode, SolverConfig};

use expm::{apply_exp, Workspace};

/// `D(t) = D0 + (D1 - D0) v t` on `[0, 1/v]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchProtocol {
    pub d0: f64,
    pub d1: f64,
    pub rate: f64,
    pub j: f64,
    pub delta: f64,
}

impl QuenchProtocol {
    pub fn new(delta: f64, d0: f64, d1: f64, rate: f64) -> Result<Self> {
        let p = QuenchProtocol {
            d0,
            d1,
            rate,
            j: 1.0,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidProtocol(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if !(self.d0.is_finite() && self.d1.is_finite()) {
            return Err(Error::InvalidProtocol("DMI endpoints must be finite".into()));
        }
        ModelParams {
            j: self.j,
            delta: self.delta,
            dmi: self.d0,
        }
        .validate()
    }

    pub fn duration(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn is_static(&self) -> bool {
        self.d0 == self.d1
    }

    /// Interpolates by the elapsed fraction so both endpoints are exact.
    fn dmi_at_fraction(&self, s: f64) -> f64 {
        (1.0 - s) * self.d0 + s * self.d1
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        let tau = self.duration();
        if !(0.0..=tau).contains(&t) {
            return Err(Error::TimeOutOfRange { t, duration: tau });
        }
        Ok(self.dmi_at_fraction(t / tau))
    }

    pub fn params_at(&self, t: f64) -> Result<ModelParams> {
        Ok(ModelParams {
            j: self.j,
            delta: self.delta,
            dmi: self.value_at(t)?,
        })
    }
}

/// Step budget and tolerances for certified propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub initial_steps: usize,
    pub max_halvings: usize,
    /// Operator-norm error bound for each step's exponential.
    pub step_tol: f64,
    /// Largest allowed change of the final state under one step halving.
    pub global_tol: f64,
    /// Columns propagated together; fixed so results do not depend on the
    /// worker count.
    pub chunk_columns: usize,
    /// Evenly spaced trajectory snapshots to keep (0 = none).
    pub snapshots: usize,
    pub integrator: Integrator,
}

/// Time-stepping scheme for the ordered exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// One exponential of `H` at the step midpoint; second order.
    #[default]
    Midpoint,
    /// Two exponentials of Gauss-point combinations of `H`; fourth order,
    /// commutator free.
    CommutatorFree4,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_steps: 2000,
            max_halvings: 5,
            step_tol: 1e-10,
            global_tol: 1e-6,
            chunk_columns: 32,
            snapshots: 0,
            integrator: Integrator::Midpoint,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_steps > 0
            && self.chunk_columns > 0
            && self.step_tol > 0.0
            && self.global_tol > 0.0
            && self.step_tol.is_finite()
            && self.global_tol.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProtocol(format!("invalid step control {self:?}")))
        }
    }
}

/// A protocol bound to the Hamiltonian family of a lattice.
#[derive(Debug, Clone)]
pub struct Quench {
    family: LinearFamily,
    protocol: QuenchProtocol,
    /// Interval enclosing the spectrum of every `H(t)` on the ramp.
    window: (f64, f64),
}

impl Quench {
    pub fn new(lattice: &Lattice, protocol: QuenchProtocol) -> Result<Self> {
        Self::with_cap(lattice, protocol, DEFAULT_MAX_QUANTUM_SPINS)
    }

    pub fn with_cap(lattice: &Lattice, protocol: QuenchProtocol, max_spins: usize) -> Result<Self> {
        protocol.validate()?;
        let family = dmi_family(lattice, protocol.j, protocol.delta, max_spins)?;
        let window = spectral_window(&family, protocol.d0, protocol.d1);
        Ok(Quench {
            family,
            protocol,
            window,
        })
    }

    /// Quench driven by an arbitrary affine family `base + D * slope`.
    pub fn from_family(family: LinearFamily, protocol: QuenchProtocol) -> Result<Self> {
        protocol.validate()?;
        let window = spectral_window(&family, protocol.d0, protocol.d1);
        Ok(Quench {
            family,
            protocol,
            window,
        })
    }

    /// Interval known to contain the spectrum of `H(t)` for all `t`.
    pub fn spectral_window(&self) -> (f64, f64) {
        self.window
    }

    pub fn protocol(&self) -> &QuenchProtocol {
        &self.protocol
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<HermitianOperator> {
        Ok(self.family.at(self.protocol.value_at(t)?))
    }

    pub fn start_hamiltonian(&self) -> HermitianOperator {
        self.family.at(self.protocol.d0)
    }

    pub fn end_hamiltonian(&self) -> HermitianOperator {
        self.family.at(self.protocol.d1)
    }

    /// Product of `steps` step exponentials applied to the columns of
    /// `block`. Snapshots are taken after every `steps / snapshots` steps.
    fn evolve(&self, block: &Array2<Complex64>, steps: usize, control: &StepControl) -> Evolved {
        let tau = self.protocol.duration();
        let dt = tau / steps as f64;
        let mut h = self.family.at(self.protocol.d0);
        let mut state = block.as_standard_layout().into_owned();
        let mut ws = Workspace::new(state.nrows(), state.ncols());
        let stride = steps.checked_div(control.snapshots).map_or(0, |s| s.max(1));
        let mut kept = Vec::new();
        let at = |x: f64| self.protocol.dmi_at_fraction(x / steps as f64);
        for k in 0..steps {
            let k = k as f64;
            match control.integrator {
                Integrator::Midpoint => {
                    self.family.assign(at(k + 0.5), &mut h);
                    apply_exp(&h, self.window, dt, control.step_tol, &mut state, &mut ws);
                }
                Integrator::CommutatorFree4 => {
                    // alpha1 H(t1) + alpha2 H(t2) = H(D_eff) / 2 because H is affine in D
                    // and alpha1 + alpha2 = 1/2; both D_eff stay inside the step.
                    let (d1, d2) = (at(k + GAUSS[0]), at(k + GAUSS[1]));
                    for (a, b) in [(CF4[1], CF4[0]), (CF4[0], CF4[1])] {
                        self.family.assign(2.0 * (a * d1 + b * d2), &mut h);
                        apply_exp(&h, self.window, 0.5 * dt, control.step_tol, &mut state, &mut ws);
                    }
                }
            }
            if stride > 0 && (k as usize + 1).is_multiple_of(stride) {
                kept.push(((k + 1.0) * dt, state.clone()));
            }
        }
        Evolved { state, snapshots: kept }
    }

    /// Propagates with successive step halvings until the final block moves
    /// by less than `global_tol` (largest column norm of the change).
    fn evolve_converged(&self, block: &Array2<Complex64>, control: &StepControl) -> Result<Converged> {
        let mut steps = control.initial_steps;
        let mut prev = self.evolve(block, steps, control);
        let mut change = f64::INFINITY;
        for halving in 1..=control.max_halvings {
            steps *= 2;
            let next = self.evolve(block, steps, control);
            change = max_column_distance(&prev.state, &next.state);
            if change < control.global_tol {
                return Ok(Converged {
                    evolved: next,
                    steps,
                    halvings: halving,
                    change,
                });
            }
            prev = next;
        }
        Err(Error::PropagationNonConvergence {
            halvings: control.max_halvings,
            change,
            tol: control.global_tol,
        })
    }

    /// Propagates many columns in fixed-size chunks, in parallel.
    fn evolve_columns(&self, block: &Array2<Complex64>, control: &StepControl) -> Result<ColumnsResult> {
        let ncols = block.ncols();
        let chunks: Vec<Range<usize>> = (0..ncols)
            .step_by(control.chunk_columns)
            .map(|s| s..(s + control.chunk_columns).min(ncols))
            .collect();
        let parts = chunks
            .par_iter()
            .map(|r| {
                let sub = block.slice(ndarray::s![.., r.clone()]).to_owned();
                let control = StepControl {
                    snapshots: 0,
                    ..*control
                };
                self.evolve_converged(&sub, &control)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Array2::zeros(block.raw_dim());
        let mut steps = 0;
        let mut change: f64 = 0.0;
        for (r, part) in chunks.iter().zip(parts) {
            out.slice_mut(ndarray::s![.., r.clone()]).assign(&part.evolved.state);
            steps = steps.max(part.steps);
            change = change.max(part.change);
        }
        Ok(ColumnsResult {
            state: out,
            steps,
            change,
        })
    }
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
/// Gauss–Legendre nodes on the unit step.
const GAUSS: [f64; 2] = [0.5 - SQRT3_6, 0.5 + SQRT3_6];
/// Weights of the fourth-order commutator-free exponential pair.
const CF4: [f64; 2] = [0.25 - SQRT3_6, 0.25 + SQRT3_6];

/// Spectral window of `H(D)` for `D` between `d0` and `d1`. The largest
/// eigenvalue of an affine Hermitian family is convex in `D` and the smallest
/// concave, so the extreme eigenvalues at the endpoints bound the whole ramp.
/// Falls back to Gershgorin discs, which are convex/concave the same way.
fn spectral_window(family: &LinearFamily, d0: f64, d1: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for d in [d0, d1] {
        let h = family.at(d);
        let (glo, ghi) = h.spectral_bounds();
        let margin = 1e-6 * h.scale().max(1.0);
        let lowest = |op: &HermitianOperator| {
            diagonalize_with(op, SolveMode::LowestK(1), &SolverConfig::default())
                .map(|s| s.eigenvalues[0])
                .ok()
        };
        lo = lo.min(lowest(&h).map_or(glo, |e| (e - margin).max(glo)));
        hi = hi.max(lowest(&h.scaled(-1.0)).map_or(ghi, |e| (-e + margin).min(ghi)));
    }
    (lo, hi)
}

struct Evolved {
    state: Array2<Complex64>,
    snapshots: Vec<(f64, Array2<Complex64>)>,
}

struct Converged {
    evolved: Evolved,
    steps: usize,
    halvings: usize,
    change: f64,
}

struct ColumnsResult {
    state: Array2<Complex64>,
    steps: usize,
    change: f64,
}

fn max_column_distance(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    (a - b)
        .axis_iter(Axis(1))
        .map(|col| col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn column_norm_defect(a: &Array2<Complex64>) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| (col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub final_state: QuantumState,
    pub steps: usize,
    pub step_size: f64,
    pub halvings: usize,
    /// Change of the final state under the last halving.
    pub convergence: f64,
    /// `| ||psi_final|| - 1 |`.
    pub unitarity_defect: f64,
    pub snapshots: Vec<(f64, QuantumState)>,
}

pub fn propagate(quench: &Quench, initial: &QuantumState, control: &StepControl) -> Result<PropagationResult> {
    control.validate()?;
    let norm = initial.norm();
    if (norm - 1.0).abs() > QuantumState::NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    if initial.dim() != quench.dim() {
        return Err(Error::LengthMismatch(format!(
            "state dimension {} vs Hamiltonian dimension {}",
            initial.dim(),
            quench.dim()
        )));
    }
    let block = initial.amplitudes().clone().insert_axis(Axis(1));
    let run = quench.evolve_converged(&block, control)?;
    let to_state = |a: &Array2<Complex64>| QuantumState::from_raw(a.column(0).to_owned());
    Ok(PropagationResult {
        final_state: to_state(&run.evolved.state),
        steps: run.steps,
        step_size: quench.protocol.duration() / run.steps as f64,
        halvings: run.halvings,
        convergence: run.change,
        unitarity_defect: column_norm_defect(&run.evolved.state),
        snapshots: run.evolved.snapshots.iter().map(|(t, a)| (*t, to_state(a))).collect(),
    })
}

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-10;

/// `p[m][n] = |<E_n(tau)| U |E_m(0)>|^2` for the selected initial levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    /// Row `r` belongs to initial level `initial_levels[r]`; column `n` is
    /// final level `n`.
    pub probabilities: Array2<f64>,
    pub initial_levels: Vec<usize>,
    /// Degenerate clusters of the full initial and final spectra.
    pub initial_clusters: Vec<Range<usize>>,
    pub final_clusters: Vec<Range<usize>>,
    pub steps: usize,
    pub convergence: f64,
    pub unitarity_defect: f64,
}

/// Cluster-summed probabilities `P_MN = (1/|M|) sum_{m in M} sum_{n in N} p_mn`,
/// where `M` is restricted to the propagated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMatrix {
    pub initial: Vec<Range<usize>>,
    pub final_: Vec<Range<usize>>,
    pub values: Array2<f64>,
}

impl ClusterMatrix {
    /// Largest entry whose initial and final clusters share no level index.
    pub fn max_offdiagonal(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (a, m) in self.initial.iter().enumerate() {
            for (b, n) in self.final_.iter().enumerate() {
                if m.start >= n.end || n.start >= m.end {
                    worst = worst.max(self.values[[a, b]]);
                }
            }
        }
        worst
    }
}

impl TransitionMatrix {
    pub fn row_sums(&self) -> Vec<f64> {
        self.probabilities.sum_axis(Axis(1)).to_vec()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.probabilities.sum_axis(Axis(0)).to_vec()
    }

    pub fn is_complete(&self) -> bool {
        self.initial_levels.len() == self.initial_clusters.last().map_or(0, |c| c.end)
            && self.initial_levels.iter().enumerate().all(|(r, &m)| r == m)
    }

    /// `p_n = sum_m p[m][n] p0[m]`; `p0` is indexed by initial level.
    pub fn propagated_populations(&self, p0: &[f64]) -> Result<Vec<f64>> {
        if !self.is_complete() || p0.len() != self.initial_levels.len() {
            return Err(Error::LengthMismatch(format!(
                "need all {} initial levels and matching populations, have {} rows and {} populations",
                self.initial_clusters.last().map_or(0, |c| c.end),
                self.initial_levels.len(),
                p0.len()
            )));
        }
        let w = Array1::from(p0.to_vec());
        Ok(w.dot(&self.probabilities).to_vec())
    }

    pub fn cluster_summed(&self) -> ClusterMatrix {
        let mut initial = Vec::new();
        let mut rows_of = Vec::new();
        for c in &self.initial_clusters {
            let rows: Vec<usize> = self
                .initial_levels
                .iter()
                .enumerate()
                .filter(|(_, m)| c.contains(m))
                .map(|(r, _)| r)
                .collect();
            if !rows.is_empty() {
                initial.push(c.clone());
                rows_of.push(rows);
            }
        }
        let mut values = Array2::zeros((initial.len(), self.final_clusters.len()));
        for (a, rows) in rows_of.iter().enumerate() {
            for (b, n) in self.final_clusters.iter().enumerate() {
                let total: f64 = rows
                    .iter()
                    .map(|&r| n.clone().map(|k| self.probabilities[[r, k]]).sum::<f64>())
                    .sum();
                values[[a, b]] = total / rows.len() as f64;
            }
        }
        ClusterMatrix {
            initial,
            final_: self.final_clusters.clone(),
            values,
        }
    }
}

/// Propagates the eigenvectors of `start` listed in `levels` and projects
/// them on the eigenbasis `end`.
pub fn transition_matrix(
    quench: &Quench,
    start: &EigenSystem,
    end: &EigenSystem,
    levels: &[usize],
    control: &StepControl,
    cluster_tol: f64,
) -> Result<TransitionMatrix> {
    control.validate()?;
    let dim = quench.dim();
    if start.dim() != dim || end.dim() != dim {
        return Err(Error::LengthMismatch(format!(
            "eigenbases of dimension {} / {} for a Hamiltonian of dimension {dim}",
            start.dim(),
            end.dim()
        )));
    }
    if let Some(&bad) = levels.iter().find(|&&m| m >= start.len()) {
        return Err(Error::LengthMismatch(format!(
            "initial level {bad} outside the {} available levels",
            start.len()
        )));
    }
    let block = Array2::from_shape_fn((dim, levels.len()), |(i, c)| start.eigenvectors[[i, levels[c]]]);
    let run = quench.evolve_columns(&block, control)?;
    let amplitudes = end.eigenvectors.t().mapv(|x| x.conj()).dot(&run.state);
    let probabilities = amplitudes.t().mapv(|a| a.norm_sqr());
    Ok(TransitionMatrix {
        probabilities,
        initial_levels: levels.to_vec(),
        initial_clusters: degenerate_clusters(&start.eigenvalues, cluster_tol),
        final_clusters: degenerate_clusters(&end.eigenvalues, cluster_tol),
        steps: run.steps,
        convergence: run.change,
        unitarity_defect: column_norm_defect(&run.state),
    })
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// `-Im sum_k ln <v_k|v_{k+1}>`. Only the gauges of the two endpoints
/// matter.
pub fn discrete_berry_phase(vectors: &[Array1<Complex64>]) -> f64 {
    -vectors
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(w[1].iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .arg()
        })
        .sum::<f64>()
}

const GAUGE_SEED: u64 = 0x9a05_e7e1;

/// Fixed reference vector used to pin eigenvector phases.
fn gauge_reference(dim: usize) -> Array1<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(GAUGE_SEED);
    Array1::from_iter((0..dim).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)))
}

/// Rotates `v` so that `<reference|v>` is real and positive.
pub fn fix_gauge(v: &mut Array1<Complex64>, reference: &Array1<Complex64>) {
    let ov: Complex64 = reference.iter().zip(v.iter()).map(|(r, x)| r.conj() * x).sum();
    if ov.norm() > 0.0 {
        let phase = Complex64::from_polar(1.0, -ov.arg());
        v.mapv_inplace(|x| x * phase);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseControl {
    /// Minimum instantaneous gap to the neighbouring levels.
    pub gap_floor: f64,
    /// Intervals of the eigenvector tracking grid.
    pub grid_intervals: usize,
}

impl Default for PhaseControl {
    fn default() -> Self {
        PhaseControl {
            gap_floor: 1e-8,
            grid_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDecomposition {
    pub level: usize,
    /// `-int_0^tau E_n(t) dt` (trapezoidal).
    pub dynamical: f64,
    /// Discrete Berry phase along the tracked eigenvectors.
    pub geometric: f64,
    /// `arg <E_n(tau)|psi(tau)>` for `psi(0) = |E_n(0)>`.
    pub propagated: f64,
    /// `propagated - dynamical - geometric`, wrapped to `(-pi, pi]`.
    pub mismatch: f64,
    /// `1 - |<E_n(tau)|psi(tau)>|^2`.
    pub residual_infidelity: f64,
    pub min_gap: f64,
    pub steps: usize,
}

/// Follows level `level` along the protocol and splits the phase of the
/// propagated eigenstate into its dynamical and geometric parts.
pub fn phase_decomposition(
    quench: &Quench,
    level: usize,
    control: &StepControl,
    phase: &PhaseControl,
    solver: &SolverConfig,
) -> Result<PhaseDecomposition> {
    control.validate()?;
    let m = phase.grid_intervals.max(1);
    let tau = quench.protocol.duration();
    let reference = gauge_reference(quench.dim());
    let want = (level + 2).min(quench.dim());

    let spectra = (0..=m)
        .into_par_iter()
        .map(|k| {
            let s = k as f64 / m as f64;
            let h = quench.family.at(quench.protocol.dmi_at_fraction(s));
            diagonalize_with(&h, SolveMode::LowestK(want), solver)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut energies = Vec::with_capacity(m + 1);
    let mut vectors: Vec<Array1<Complex64>> = Vec::with_capacity(m + 1);
    let mut min_gap = f64::INFINITY;
    for (k, sys) in spectra.iter().enumerate() {
        let t = tau * k as f64 / m as f64;
        if level >= sys.len() {
            return Err(Error::LengthMismatch(format!(
                "level {level} not among the {} computed",
                sys.len()
            )));
        }
        let e = &sys.eigenvalues;
        let mut gap = f64::INFINITY;
        if level > 0 {
            gap = gap.min(e[level] - e[level - 1]);
        }
        if level + 1 < e.len() {
            gap = gap.min(e[level + 1] - e[level]);
        }
        min_gap = min_gap.min(gap);
        if gap <= phase.gap_floor {
            return Err(Error::GapCollapse {
                level,
                t,
                gap,
                floor: phase.gap_floor,
            });
        }
        let mut v = sys.vector(level).to_owned();
        if let Some(prev) = vectors.last() {
            let overlaps: Vec<f64> = (0..sys.len())
                .map(|a| {
                    sys.vector(a)
                        .iter()
                        .zip(prev.iter())
                        .map(|(x, y)| y.conj() * x)
                        .sum::<Complex64>()
                        .norm()
                })
                .collect();
            let best = (0..overlaps.len())
                .max_by(|&a, &b| overlaps[a].total_cmp(&overlaps[b]))
                .unwrap_or(level);
            if best != level {
                return Err(Error::LevelCrossing { level, t, found: best });
            }
        }
        fix_gauge(&mut v, &reference);
        energies.push(e[level]);
        vectors.push(v);
    }

    let dt = tau / m as f64;
    let dynamical = -dt * energies.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>();
    let geometric = discrete_berry_phase(&vectors);

    let initial = QuantumState::normalized(vectors[0].clone())?;
    let run = propagate(quench, &initial, control)?;
    let ov = overlap(&vectors[m], run.final_state.amplitudes());
    let propagated = ov.arg();
    Ok(PhaseDecomposition {
        level,
        dynamical,
        geometric,
        propagated,
        mismatch: wrap_phase(propagated - dynamical - geometric),
        residual_infidelity: (1.0 - ov.norm_sqr()).clamp(0.0, 1.0),
        min_gap,
        steps: run.steps,
    })
}

fn overlap(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_endpoints_are_exact() {
        let p = QuenchProtocol::new(0.25, 0.1, 0.3, 0.7).unwrap();
        assert_eq!(p.value_at(0.0).unwrap(), 0.1);
        assert_eq!(p.value_at(p.duration()).unwrap(), 0.3);
        assert!((p.value_at(p.duration() / 2.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(p.value_at(-1e-9), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(
            p.value_at(p.duration() * 1.001),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn invalid_rates_rejected() {
        assert!(QuenchProtocol::new(0.25, 0.0, 1.0, 0.0).is_err());
        assert!(QuenchProtocol::new(0.25, 0.0, 1.0, -0.1).is_err());
        assert!(QuenchProtocol::new(0.25, 0.0, f64::NAN, 0.1).is_err());
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianOperator {
        let mut m = Array2::<Complex64>::zeros((dim, dim));
        for i in 0..dim {
            m[[i, i]] = Complex64::new(rng.gen::<f64>() - 0.5, 0.0);
            for j in 0..i {
                let z = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                m[[i, j]] = z;
                m[[j, i]] = z.conj();
            }
        }
        HermitianOperator::from_dense(&m)
    }

    fn final_error(quench: &Quench, integrator: Integrator, steps: usize, exact: &Array2<Complex64>) -> f64 {
        let control = StepControl {
            integrator,
            ..Default::default()
        };
        let block = Array2::<Complex64>::eye(quench.dim());
        max_column_distance(&quench.evolve(&block, steps, &control).state, exact)
    }

    #[test]
    fn integrators_converge_at_their_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let family = LinearFamily::new(&random_hermitian(&mut rng, 5), &random_hermitian(&mut rng, 5));
        let protocol = QuenchProtocol::new(0.0, -1.0, 2.0, 0.25).unwrap();
        let quench = Quench::from_family(family, protocol).unwrap();
        let control = StepControl {
            integrator: Integrator::CommutatorFree4,
            ..Default::default()
        };
        let exact = quench.evolve(&Array2::eye(5), 4096, &control).state;

        let mid = [16, 32].map(|n| final_error(&quench, Integrator::Midpoint, n, &exact));
        let cf4 = [16, 32].map(|n| final_error(&quench, Integrator::CommutatorFree4, n, &exact));
        let mid_ratio = mid[0] / mid[1];
        let cf4_ratio = cf4[0] / cf4[1];
        assert!((3.5..4.5).contains(&mid_ratio), "midpoint ratio {mid_ratio}");
        assert!((14.0..18.0).contains(&cf4_ratio), "fourth-order ratio {cf4_ratio}");
    }

    #[test]
    fn window_encloses_every_spectrum_on_the_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let family = LinearFamily::new(&random_hermitian(&mut rng, 6), &random_hermitian(&mut rng, 6));
        let quench = Quench::from_family(family.clone(), QuenchProtocol::new(0.0, -0.7, 1.3, 1.0).unwrap()).unwrap();
        let (lo, hi) = quench.spectral_window();
        for k in 0..=50 {
            let d = -0.7 + 2.0 * k as f64 / 50.0;
            let sys = crate::spectral::diagonalize(&family.at(d), SolveMode::Full).unwrap();
            assert!(lo <= sys.eigenvalues[0] && sys.eigenvalues[5] <= hi);
        }
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(-0.5 - 4.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn berry_phase_ignores_intermediate_gauges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path: Vec<Array1<Complex64>> = (0..12)
            .map(|_| {
                let v = Array1::from_iter((0..6).map(|_| Complex64::new(rng.gen::<f64>(), rng.gen::<f64>())));
                let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                v / Complex64::new(n, 0.0)
            })
            .collect();
        let base = discrete_berry_phase(&path);
        let mut twisted = path.clone();
        for v in twisted.iter_mut().skip(1).take(10) {
            let ph = Complex64::from_polar(1.0, rng.gen::<f64>() * 2.0 * PI);
            v.mapv_inplace(|x| x * ph);
        }
        assert!(wrap_phase(discrete_berry_phase(&twisted) - base).abs() < 1e-10);
    }
}
