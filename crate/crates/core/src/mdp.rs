//! Finite MDPs under a stationary policy: validation, the state-action
//! enumeration, the induced chain on `S × A` and the occupancy measure.
//!
//! Matrices over `S × A` are column-stochastic: entry `[x′, x]` is the
//! probability of moving to pair `x′` from pair `x`, and distributions are
//! column vectors. With this convention the occupancy measure is literally
//! `ρ = (I − γP)⁻¹ ρ₀`.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Where in an MDP description a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Transition { state: String, action: String },
    Policy { state: String },
    Initial,
    Reward { state: String, action: String },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Transition { state, action } => write!(f, "transition row ({state},{action})"),
            Location::Policy { state } => write!(f, "policy row {state}"),
            Location::Initial => write!(f, "initial distribution"),
            Location::Reward { state, action } => write!(f, "reward ({state},{action})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("{location} sums to {sum} (deficit {deficit:e})")]
    NonStochasticRow { location: Location, sum: f64, deficit: f64 },
    #[error("{location} has a negative entry")]
    NegativeEntry { location: Location },
    #[error("{location} has a non-finite entry")]
    NonFinite { location: Location },
    #[error("discount {0} outside [0, 1)")]
    GammaOutOfRange(f64),
    #[error("state and action sets must be nonempty")]
    EmptyStateOrActionSet,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("transition matrix entry [{next}, {cur}] is negative or non-finite")]
    InvalidMatrixEntry { next: usize, cur: usize },
    #[error("column {column} of transition matrix sums to {sum}")]
    NotColumnStochastic { column: usize, sum: f64 },
    #[error("linear solve failed: {0}")]
    SolveFailed(#[from] linalg::SingularMatrix),
}

/// Unvalidated MDP description. Tables are dense and indexed by label
/// position: `transition[s][a][s′]`, `reward[s][a]`, `policy[s][a]`,
/// `initial[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMdp<T> {
    pub name: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transition: Vec<Vec<Vec<T>>>,
    pub reward: Vec<Vec<T>>,
    pub gamma: T,
    pub initial: Vec<T>,
    pub policy: Vec<Vec<T>>,
}

/// A row that deviated from stochasticity by less than the rejection
/// threshold and was rescaled during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Renormalized {
    pub location: Location,
    pub deficit: f64,
}

/// Canonical enumeration of `S × A`, lexicographic in (state, action).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateActionIndex {
    pairs: Vec<(usize, usize)>,
    n_actions: usize,
}

impl StateActionIndex {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        let pairs = (0..n_states)
            .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
            .collect();
        Self { pairs, n_actions }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    #[inline]
    pub fn index(&self, state: usize, action: usize) -> usize {
        debug_assert!(action < self.n_actions);
        state * self.n_actions + action
    }

    #[inline]
    pub fn pair(&self, x: usize) -> (usize, usize) {
        self.pairs[x]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Validated finite MDP with initial distribution and stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec<T> {
    name: String,
    states: Vec<String>,
    actions: Vec<String>,
    transition: Vec<Vec<Vec<T>>>,
    reward: Vec<Vec<T>>,
    gamma: T,
    initial: Vec<T>,
    policy: Vec<Vec<T>>,
    index: StateActionIndex,
    warnings: Vec<Renormalized>,
}

impl<T: Scalar> MdpSpec<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `P(s′ | s, a)`.
    pub fn transition(&self, s: usize, a: usize, next: usize) -> T {
        self.transition[s][a][next]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.reward[s][a]
    }

    /// `π(a | s)`.
    pub fn policy(&self, s: usize, a: usize) -> T {
        self.policy[s][a]
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn index(&self) -> &StateActionIndex {
        &self.index
    }

    /// Rows rescaled during validation.
    pub fn warnings(&self) -> &[Renormalized] {
        &self.warnings
    }

    /// `"state,action"` label of pair `x`.
    pub fn pair_label(&self, x: usize) -> String {
        let (s, a) = self.index.pair(x);
        format!("{},{}", self.states[s], self.actions[a])
    }

    pub fn pair_labels(&self) -> Vec<String> {
        (0..self.index.len()).map(|x| self.pair_label(x)).collect()
    }

    pub fn into_raw(self) -> RawMdp<T> {
        RawMdp {
            name: self.name,
            states: self.states,
            actions: self.actions,
            transition: self.transition,
            reward: self.reward,
            gamma: self.gamma,
            initial: self.initial,
            policy: self.policy,
        }
    }

    pub fn to_raw(&self) -> RawMdp<T> {
        self.clone().into_raw()
    }
}

/// Checks a probability row in place, rescaling it when its sum is off by
/// less than the rejection threshold.
fn check_row<T: Scalar>(row: &mut [T], location: Location, warnings: &mut Vec<Renormalized>) -> Result<(), MdpError> {
    if row.iter().any(|x| !x.is_finite()) {
        return Err(MdpError::NonFinite { location });
    }
    if row.iter().any(|&x| x < T::zero()) {
        return Err(MdpError::NegativeEntry { location });
    }
    let sum: T = row.iter().copied().sum();
    let dev = (sum - T::one()).abs();
    if dev > T::tol(1e-9) {
        return Err(MdpError::NonStochasticRow {
            location,
            sum: sum.as_f64(),
            deficit: (T::one() - sum).as_f64(),
        });
    }
    if dev > T::tol(1e-12) {
        for x in row.iter_mut() {
            *x = *x / sum;
        }
        warnings.push(Renormalized {
            location,
            deficit: (T::one() - sum).as_f64(),
        });
    }
    Ok(())
}

fn check_labels(labels: &[String]) -> Result<(), MdpError> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(MdpError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Validates a raw description.
///
/// Rows off by more than `1e-9` are rejected; rows off by more than `1e-12`
/// but within `1e-9` are rescaled and recorded in [`MdpSpec::warnings`].
pub fn validate<T: Scalar>(raw: RawMdp<T>) -> Result<MdpSpec<T>, MdpError> {
    let RawMdp {
        name,
        states,
        actions,
        mut transition,
        reward,
        gamma,
        mut initial,
        mut policy,
    } = raw;
    let (ns, na) = (states.len(), actions.len());
    if ns == 0 || na == 0 {
        return Err(MdpError::EmptyStateOrActionSet);
    }
    check_labels(&states)?;
    check_labels(&actions)?;
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(MdpError::GammaOutOfRange(gamma.as_f64()));
    }

    let shape_ok = transition.len() == ns
        && transition
            .iter()
            .all(|rows| rows.len() == na && rows.iter().all(|r| r.len() == ns))
        && reward.len() == ns
        && reward.iter().all(|r| r.len() == na)
        && initial.len() == ns
        && policy.len() == ns
        && policy.iter().all(|r| r.len() == na);
    if !shape_ok {
        return Err(MdpError::Shape(format!(
            "tables must match {ns} states and {na} actions"
        )));
    }

    let mut warnings = Vec::new();
    for (s, rows) in transition.iter_mut().enumerate() {
        for (a, row) in rows.iter_mut().enumerate() {
            let location = Location::Transition {
                state: states[s].clone(),
                action: actions[a].clone(),
            };
            check_row(row, location, &mut warnings)?;
        }
    }
    for (s, row) in policy.iter_mut().enumerate() {
        let location = Location::Policy {
            state: states[s].clone(),
        };
        check_row(row, location, &mut warnings)?;
    }
    check_row(&mut initial, Location::Initial, &mut warnings)?;
    for (s, row) in reward.iter().enumerate() {
        for (a, r) in row.iter().enumerate() {
            if !r.is_finite() {
                return Err(MdpError::NonFinite {
                    location: Location::Reward {
                        state: states[s].clone(),
                        action: actions[a].clone(),
                    },
                });
            }
        }
    }

    Ok(MdpSpec {
        name,
        index: StateActionIndex::new(ns, na),
        states,
        actions,
        transition,
        reward,
        gamma,
        initial,
        policy,
        warnings,
    })
}

/// Column-stochastic matrix over `S × A`; entry `[next, cur]` is the
/// probability of `next` given `cur`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T>(Matrix<T>);

impl<T: Scalar> TransitionMatrix<T> {
    /// Wraps a matrix after checking that every column is a probability
    /// vector within `1e-12`.
    pub fn new(m: Matrix<T>) -> Result<Self, MdpError> {
        if m.rows() != m.cols() || m.rows() == 0 {
            return Err(MdpError::Shape(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        for next in 0..m.rows() {
            for cur in 0..m.cols() {
                let x = m[(next, cur)];
                if !x.is_finite() || x < T::zero() {
                    return Err(MdpError::InvalidMatrixEntry { next, cur });
                }
            }
        }
        for (column, sum) in m.col_sums().into_iter().enumerate() {
            if (sum - T::one()).abs() > T::tol(1e-12) {
                return Err(MdpError::NotColumnStochastic {
                    column,
                    sum: sum.as_f64(),
                });
            }
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: Matrix<T>) -> Self {
        Self(m)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    /// Probability of `next` given `cur`.
    #[inline]
    pub fn prob(&self, next: usize, cur: usize) -> T {
        self.0[(next, cur)]
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    /// One step of the chain applied to a distribution: `P v`.
    pub fn step(&self, v: &[T]) -> Vec<T> {
        self.0.mul_vec(v)
    }

    /// Successor lists of the support digraph (`x → x′` iff `P(x′|x) > 0`).
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        (0..n)
            .map(|cur| (0..n).filter(|&next| self.prob(next, cur) > T::zero()).collect())
            .collect()
    }
}

/// `P_π[(s′,a′), (s,a)] = P(s′|s,a) · π(a′|s′)`.
pub fn induced_transition<T: Scalar>(mdp: &MdpSpec<T>) -> TransitionMatrix<T> {
    let idx = mdp.index();
    let n = idx.len();
    let m = Matrix::from_fn(n, n, |next, cur| {
        let (s, a) = idx.pair(cur);
        let (s2, a2) = idx.pair(next);
        mdp.transition(s, a, s2) * mdp.policy(s2, a2)
    });
    TransitionMatrix::new_unchecked(m)
}

/// `ρ₀(s, a) = ρ₀(s) · π(a|s)`.
pub fn initial_pair_distribution<T: Scalar>(mdp: &MdpSpec<T>) -> Vec<T> {
    mdp.index()
        .pairs()
        .iter()
        .map(|&(s, a)| mdp.initial()[s] * mdp.policy(s, a))
        .collect()
}

/// Discounted visitation `ρ_π` over `S × A`; sums to `1/(1−γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyVector<T> {
    pub values: Vec<T>,
    pub gamma: T,
}

impl<T: Scalar> OccupancyVector<T> {
    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// `(1−γ) ρ_π`, a probability vector.
    pub fn normalized(&self) -> Vec<T> {
        let c = T::one() - self.gamma;
        self.values.iter().map(|&v| c * v).collect()
    }
}

/// Pairs reachable from the support of `start` along positive transitions.
pub(crate) fn reachable_from<T: Scalar>(p: &TransitionMatrix<T>, start: &[T]) -> Vec<bool> {
    let succ = p.successors();
    let mut seen = vec![false; p.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (x, &w) in start.iter().enumerate() {
        if w > T::zero() {
            seen[x] = true;
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in &succ[x] {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    seen
}

/// Solves `(I − γ P_π) ρ = ρ₀` by dense LU.
///
/// The system is restricted to pairs reachable from `supp(ρ₀)`, a forward
/// closed set, so unreachable pairs come out exactly zero.
pub fn occupancy_measure<T: Scalar>(
    p_pi: &TransitionMatrix<T>,
    rho0: &[T],
    gamma: T,
) -> Result<OccupancyVector<T>, MdpError> {
    let n = p_pi.len();
    if rho0.len() != n {
        return Err(MdpError::Shape(format!(
            "initial distribution has length {}, expected {n}",
            rho0.len()
        )));
    }
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(MdpError::GammaOutOfRange(gamma.as_f64()));
    }
    let live: Vec<usize> = reachable_from(p_pi, rho0)
        .iter()
        .enumerate()
        .filter_map(|(x, &r)| r.then_some(x))
        .collect();
    let k = live.len();
    let a = Matrix::from_fn(k, k, |i, j| {
        let id = if i == j { T::one() } else { T::zero() };
        id - gamma * p_pi.prob(live[i], live[j])
    });
    let b: Vec<T> = live.iter().map(|&x| rho0[x]).collect();
    let sol = linalg::solve(a, &b)?;

    let mut values = vec![T::zero(); n];
    for (&x, v) in live.iter().zip(sol) {
        // The Neumann series is entrywise nonnegative; anything below zero is
        // round-off.
        values[x] = v.max(T::zero());
    }
    Ok(OccupancyVector { values, gamma })
}
