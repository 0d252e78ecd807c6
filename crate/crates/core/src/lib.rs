//! Exact-diagonalization toolkit for entanglement diagnostics of the
//! perturbed toric code.

pub mod dense;
pub mod ed;
pub mod entanglement;
pub mod error;
pub mod ising;
pub mod lattice;
pub mod loopgas;
pub mod pauli;
pub mod state;
pub mod sweep;

pub use ed::{
    connected_correlator, expectation, expectation_string, ground_space, ground_space_projected,
    select_sector, GroundSpace, SectorState, SolverConfig,
};
pub use entanglement::{
    renyi, schmidt_rank, schmidt_spectrum, EntanglementSpectrum, RenyiPoint, Units,
};
pub use error::{Error, Result};
pub use ising::{
    chain_sweep, dual_factorization_residual, tfim_solve, ChainBoundary, ChainSpec, ChainVariant,
    FermionSolution,
};
pub use lattice::{Boundary, EdgeKind, LatticeGeometry, LoopKind, LoopSpec, Region};
pub use loopgas::{
    cc_state_vector, enumerate_group, partition_z, region_subgroups, renyi_exact, CcModel,
    GaugeGroup, RegionSubgroups,
};
pub use pauli::{
    build_model, matvec, CompiledOperator, OperatorSum, PauliString, PerturbationSpec,
};
pub use state::StateVector;
pub use sweep::{
    derivatives, detect_splitting, run_sweep, DerivativeTable, Family, SectorLoops,
    SplittingReport, SweepGrid, SweepResult, SweepRow,
};
