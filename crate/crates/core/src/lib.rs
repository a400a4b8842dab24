//! Open quantum random walks.
//!
//! A walk on a vertex set `V` with chirality space `H = C^d` is given by
//! operators `B^i_j` on `H` (from vertex `j` to vertex `i`) with
//! `Σ_i B^i_j* B^i_j = I` for every source `j`. States are block densities
//! `ρ = Σ_i ρ_i ⊗ |i⟩⟨i|` and one step maps `ρ_i ↦ Σ_j B^i_j ρ_j B^i_j*`.
//!
//! The crate is generic over the real scalar ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix it to `f64`.
//!
//! ```
//! use oqrw::{distribution, evolve, Preset};
//!
//! let (walk, start) = Preset::ZSqrt3.build::<f64>().unwrap();
//! let after = evolve(&start, &walk, 2).unwrap();
//! let p = distribution(&after).unwrap();
//! assert!((p.get(2) - 5.0 / 9.0).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod constructors;
pub mod error;
pub mod matrix;
pub mod realization;
pub mod scalar;
pub mod trajectory;
pub mod walk;

pub use analysis::{gaussian_discrepancy, konno_density, moments, total_variation, MomentSummary};
pub use constructors::{
    from_classical, from_operator_matrix, preset, stationary_z, OperatorMatrix, Preset, StochasticMatrix,
};
pub use error::{OqrwError, Result};
pub use matrix::CMatrix;
pub use realization::{
    build_global_unitary, check_unitary_walk_condition, decohere, dilate, physical_step, refresh_k1, swap_k1_k2,
    unitary_walk_step, AmplitudeState, DilationUnitary, Realizer, TripartiteState, UnitaryConditionReport,
};
pub use scalar::{Real, C};
pub use trajectory::{
    sample_trajectories, trajectory_step, Branch, LocalState, RngStream, TrajectorySample, TrajectoryState,
};
pub use walk::{
    apply_full_map, distribution, evolve, step, trace_report, validate_transitions, BlockState, TraceReport,
    TransitionOperators, ValidationReport, Vertex, VertexSpace, WalkDistribution,
};

pub type Complex64 = num_complex::Complex<f64>;
pub type ComplexMatrix = CMatrix<f64>;
pub type ComplexMatrix32 = CMatrix<f32>;
pub type Walk = TransitionOperators<f64>;
pub type Walk32 = TransitionOperators<f32>;
pub type State = BlockState<f64>;
pub type State32 = BlockState<f32>;
