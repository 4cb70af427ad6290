//! First-hitting-time geometry of finite MDPs.
//!
//! A stationary policy turns an MDP into a Markov chain on state-action
//! pairs. Restarting that chain from the initial distribution with
//! probability `1−γ` gives a chain whose stationary law is the normalized
//! occupancy measure and whose expected first-hitting times form a
//! quasi-metric on the occupancy support. Two MDPs are then compared by the
//! Gromov–Wasserstein distance between these metric-measure spaces.
//!
//! ```
//! use mdp_hitting::{build_triple, fixtures, gw_exhaustive};
//!
//! let chain = build_triple(&fixtures::two_state_chain::<f64>()).unwrap();
//! let point = build_triple(&fixtures::single_self_loop::<f64>(0.5)).unwrap();
//! let d = gw_exhaustive(&chain, &point).unwrap().value;
//! assert!((d - 0.5 * 2f64.sqrt()).abs() < 1e-12);
//! ```
//!
//! Everything numeric is generic over [`Scalar`] (`f64` or `f32`); the
//! `*F64` aliases below name the common instantiations.

// `!(x > tol)` is how NaN is routed to the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod fixtures;
pub mod gw;
pub mod hitting;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod oracle;
pub mod random;
pub mod restart;
pub mod scalar;

pub use gw::{
    build_triple, build_triple_with, check_coupling, equivalence_check, gw_exhaustive, gw_objective, gw_solve,
    mass_mismatch, Coupling, CouplingReport, GwError, GwParams, GwResult, GwStatus, MetricMeasureTriple, Normalization,
};
pub use hitting::{
    hitting_discounted, hitting_plain, hitting_restart, quasi_metric_check, restart_from_discounted, HittingError,
    HittingKind, HittingMatrix, QuasiMetricReport, Targets,
};
pub use io::{load_mdp, DocumentError, MatrixDocument, MdpDocument};
pub use linalg::Matrix;
pub use mdp::{
    induced_transition, initial_pair_distribution, occupancy_measure, validate, MdpError, MdpSpec, OccupancyVector,
    RawMdp, StateActionIndex, TransitionMatrix,
};
pub use oracle::{estimate_hitting, estimate_stationary, occupancy_truncated, Estimate, OracleError, SimConfig};
pub use restart::{
    build_restart_chain, stationary_distribution, support_set, verify_pagerank_identity, RestartChain, RestartError,
    SupportSet,
};
pub use scalar::Scalar;

pub type MdpSpecF64 = MdpSpec<f64>;
pub type MdpSpecF32 = MdpSpec<f32>;
pub type RawMdpF64 = RawMdp<f64>;
pub type MatrixF64 = Matrix<f64>;
pub type TransitionMatrixF64 = TransitionMatrix<f64>;
pub type OccupancyVectorF64 = OccupancyVector<f64>;
pub type RestartChainF64 = RestartChain<f64>;
pub type HittingMatrixF64 = HittingMatrix<f64>;
pub type HittingMatrixF32 = HittingMatrix<f32>;
pub type TripleF64 = MetricMeasureTriple<f64>;
pub type TripleF32 = MetricMeasureTriple<f32>;
pub type CouplingF64 = Coupling<f64>;
pub type GwResultF64 = GwResult<f64>;
