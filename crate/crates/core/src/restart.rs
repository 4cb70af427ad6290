//! The restart chain `P̃_π = (1−γ) ρ₀ 1ᵀ + γ P_π`: with probability `1−γ`
//! the walk teleports to a fresh draw from `ρ₀`, otherwise it follows the
//! induced chain. Its stationary distribution is the personalized PageRank
//! vector of `P_π`, which coincides with the normalized occupancy measure.

use thiserror::Error;

use crate::linalg::Matrix;
use crate::mdp::{
    induced_transition, initial_pair_distribution, occupancy_measure, MdpError, MdpSpec, OccupancyVector,
    TransitionMatrix,
};
use crate::scalar::{max_abs_diff, Scalar};

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RestartError {
    #[error(
        "power iteration did not reach the requested residual in {max_iters} iterations (last residual {residual:e})"
    )]
    NoConvergence { max_iters: usize, residual: f64 },
    #[error("occupancy measure has empty support")]
    EmptySupport,
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartChain<T> {
    matrix: TransitionMatrix<T>,
    gamma: T,
    restart: Vec<T>,
}

impl<T: Scalar> RestartChain<T> {
    pub fn matrix(&self) -> &TransitionMatrix<T> {
        &self.matrix
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// The teleport distribution `ρ₀` over pairs.
    pub fn restart(&self) -> &[T] {
        &self.restart
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }
}

/// `P̃[x′, x] = (1−γ) ρ₀(x′) + γ P_π(x′|x)`.
pub fn build_restart_chain<T: Scalar>(p_pi: &TransitionMatrix<T>, rho0: &[T], gamma: T) -> RestartChain<T> {
    let n = p_pi.len();
    assert_eq!(rho0.len(), n, "restart distribution length");
    let teleport = T::one() - gamma;
    let m = Matrix::from_fn(n, n, |next, cur| teleport * rho0[next] + gamma * p_pi.prob(next, cur));
    RestartChain {
        matrix: TransitionMatrix::new_unchecked(m),
        gamma,
        restart: rho0.to_vec(),
    }
}

/// Stationary distribution by power iteration from the uniform vector.
///
/// Returns `σ` with `‖P̃σ − σ‖_∞ ≤ tol`.
pub fn stationary_distribution<T: Scalar>(
    chain: &RestartChain<T>,
    tol: T,
    max_iters: usize,
) -> Result<Vec<T>, RestartError> {
    let n = chain.len();
    let start = vec![T::one() / T::of(n as f64); n];
    stationary_distribution_from(chain, &start, tol, max_iters)
}

/// Power iteration from an arbitrary starting distribution.
pub fn stationary_distribution_from<T: Scalar>(
    chain: &RestartChain<T>,
    start: &[T],
    tol: T,
    max_iters: usize,
) -> Result<Vec<T>, RestartError> {
    let total: T = start.iter().copied().sum();
    let mut sigma: Vec<T> = start.iter().map(|&x| x / total).collect();
    let mut residual = T::infinity();
    for _ in 0..=max_iters {
        let next = chain.matrix.step(&sigma);
        residual = max_abs_diff(&next, &sigma);
        if residual <= tol {
            return Ok(sigma);
        }
        let s: T = next.iter().copied().sum();
        sigma = next.into_iter().map(|x| x / s).collect();
    }
    Err(RestartError::NoConvergence {
        max_iters,
        residual: residual.as_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankReport<T> {
    pub max_abs_gap: T,
    pub pass: bool,
}

/// Compares `(1−γ) ρ_π` from the linear solve against the power-iteration
/// stationary distribution of the restart chain.
pub fn verify_pagerank_identity<T: Scalar>(mdp: &MdpSpec<T>, tol: T) -> Result<PageRankReport<T>, RestartError> {
    let p = induced_transition(mdp);
    let rho0 = initial_pair_distribution(mdp);
    let gamma = mdp.gamma();
    let occ = occupancy_measure(&p, &rho0, gamma)?;
    let chain = build_restart_chain(&p, &rho0, gamma);
    let sigma = stationary_distribution(&chain, T::tol(DEFAULT_STATIONARY_TOL), DEFAULT_MAX_ITERS)?;
    let max_abs_gap = max_abs_diff(&occ.normalized(), &sigma);
    Ok(PageRankReport {
        max_abs_gap,
        pass: max_abs_gap <= tol,
    })
}

/// Sorted pair indices where `(1−γ) ρ_π` exceeds a threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// # Panics
    /// If `indices` is empty.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        assert!(!indices.is_empty(), "support set must be nonempty");
        Self { indices }
    }

    pub fn full(n: usize) -> Self {
        Self::new((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.indices.binary_search(&x).is_ok()
    }

    /// Membership mask of length `n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &x in &self.indices {
            m[x] = true;
        }
        m
    }
}

pub fn support_set<T: Scalar>(occupancy: &OccupancyVector<T>, threshold: T) -> Result<SupportSet, RestartError> {
    let indices: Vec<usize> = occupancy
        .normalized()
        .iter()
        .enumerate()
        .filter_map(|(x, &v)| (v > threshold).then_some(x))
        .collect();
    if indices.is_empty() {
        return Err(RestartError::EmptySupport);
    }
    Ok(SupportSet { indices })
}
