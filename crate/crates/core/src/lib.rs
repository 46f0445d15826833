//! Exact-diagonalization model of a quantum skyrmion on a small square
//! lattice, its topological diagnostics, slow DMI quenches and the quantum
//! Otto cycle that uses it as a working medium.

pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod operator;
pub mod spectral;
pub mod thermo;
pub mod topology;

pub use dynamics::{
    discrete_berry_phase, phase_decomposition, propagate, transition_matrix, wrap_phase, ClusterMatrix, Integrator,
    PhaseControl, PhaseDecomposition, PropagationResult, Quench, QuenchProtocol, StepControl, TransitionMatrix,
    DEFAULT_CLUSTER_TOL,
};
pub use error::{Error, Result};
pub use hamiltonian::{
    bond_hamiltonian, boundary_terms, build_hamiltonian, build_hamiltonian_capped, dmi_family, total_sz, ModelParams,
    DEFAULT_MAX_QUANTUM_SPINS,
};
pub use lattice::{
    build_lattice, dmi_axis, Bond, BondDirection, BondKind, Boundary, ClassicalSite, Lattice, LatticeSpec, SiteRef,
    Vec3, SPIN_LENGTH,
};
pub use operator::{HermitianOperator, LinearFamily};
pub use spectral::{
    degenerate_clusters, diagonalize, diagonalize_with, spin_expectation, spin_texture, EigenSystem, LanczosConfig,
    QuantumState, SolveMode, SolverConfig,
};
pub use thermo::{
    adiabatic_stroke_work, carnot_bound, efficiency, free_energy_change, heat_in, irreversible_work, log_partition,
    log_populations, mean_work, populations, propagated_populations, retained_weight_bound, run_otto_cycle,
    CycleConfig, CycleMode, CycleReport, DrivenStrokes, KlReference, StrokeBath, ThermalEnsemble,
};
pub use topology::{
    half_solid_angle, topological_index, triangulated_charge, winding_parameter, Normalization, SpinField, SpinTexture,
    TopologicalCharge, DEFAULT_MOMENT_FLOOR,
};
