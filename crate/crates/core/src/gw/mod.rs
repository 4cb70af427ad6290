//! Gromov–Wasserstein comparison of MDPs through their metric-measure
//! triples `(supp ρ_π, (1−γ) ρ_π, T_π)`.
//!
//! For two triples `X`, `Y` and a coupling `μ` of their measures the
//! objective is
//!
//! ```text
//! ½ · sqrt( Σ_{x,y} Σ_{x′,y′} |T_X(x,x′) − T_Y(y,y′)|² μ(x,y) μ(x′,y′) )
//! ```
//!
//! and the distance is its minimum over couplings. The problem is a
//! nonconvex quadratic program: [`gw_exhaustive`] solves it exactly on tiny
//! supports, [`gw_solve`] is a multi-restart heuristic that only promises an
//! upper bound.

mod equivalence;
mod exhaustive;
mod solver;
pub mod transport;

pub use equivalence::{equivalence_check, DEFAULT_EQUIVALENCE_TOL};
pub use exhaustive::{gw_exhaustive, EXHAUSTIVE_MAX_SUPPORT};
pub use solver::{gw_solve, GwParams};

use thiserror::Error;

use crate::hitting::{hitting_restart, quasi_metric_check, HittingError};
use crate::linalg::Matrix;
use crate::mdp::{induced_transition, initial_pair_distribution, occupancy_measure, MdpError, MdpSpec};
use crate::restart::{support_set, RestartError, SupportSet, DEFAULT_SUPPORT_THRESHOLD};
use crate::scalar::Scalar;

/// Coupling feasibility tolerance used by [`gw_objective`], relative to the
/// total mass.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GwError {
    #[error("coupling violates the marginal constraints (max gap {max_gap:e})")]
    InfeasibleCoupling { max_gap: f64 },
    #[error("total masses differ ({x_mass} vs {y_mass}); no coupling exists")]
    MassMismatch { x_mass: f64, y_mass: f64 },
    #[error("exhaustive search supports at most {max} points per side, got {x} and {y}")]
    TooLarge { x: usize, y: usize, max: usize },
    #[error("supports have different sizes ({x} vs {y}); no bijection exists")]
    SizeMismatch { x: usize, y: usize },
    #[error("entropic scaling stagnated: {0}")]
    NoConvergence(String),
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Restart(#[from] RestartError),
    #[error(transparent)]
    Hitting(#[from] HittingError),
}

/// A finite quasi-metric measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureTriple<T> {
    labels: Vec<String>,
    measure: Vec<T>,
    hitting: Matrix<T>,
}

impl<T: Scalar> MetricMeasureTriple<T> {
    /// Checks positivity of the measure, a finite nonnegative hitting matrix
    /// with zero diagonal, and the triangle inequality within `1e-9`.
    pub fn new(labels: Vec<String>, measure: Vec<T>, hitting: Matrix<T>) -> Result<Self, GwError> {
        let n = labels.len();
        if n == 0 {
            return Err(GwError::InvalidTriple("empty support".into()));
        }
        if measure.len() != n || hitting.rows() != n || hitting.cols() != n {
            return Err(GwError::Shape(format!(
                "{n} labels, {} measure entries, {}x{} hitting matrix",
                measure.len(),
                hitting.rows(),
                hitting.cols()
            )));
        }
        if let Some(x) = measure.iter().position(|&m| !(m > T::zero() && m.is_finite())) {
            return Err(GwError::InvalidTriple(format!(
                "measure of {} is not positive",
                labels[x]
            )));
        }
        let t = crate::hitting::HittingMatrix::new(hitting, crate::hitting::HittingKind::Restart);
        let report = quasi_metric_check(&t, &SupportSet::full(n), T::tol(1e-9));
        if !report.holds() {
            return Err(GwError::InvalidTriple(format!(
                "hitting matrix is not a quasi-metric (diagonal zero: {}, nonnegative: {}, finite: {}, triangle violations: {})",
                report.diagonal_zero,
                report.nonneg,
                report.all_finite,
                report.triangle_violations.len()
            )));
        }
        Ok(Self {
            labels,
            measure,
            hitting: t.entries().clone(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn measure(&self) -> &[T] {
        &self.measure
    }

    /// `hitting()[(i, j)]` is the expected time to reach `i` from `j`.
    pub fn hitting(&self) -> &Matrix<T> {
        &self.hitting
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.measure.iter().copied().sum()
    }

    /// Reorders points: new point `i` is old point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        Self {
            labels: perm.iter().map(|&i| self.labels[i].clone()).collect(),
            measure: perm.iter().map(|&i| self.measure[i]).collect(),
            hitting: self.hitting.select(perm, perm),
        }
    }
}

/// Whether the occupancy measure is multiplied by `1−γ` when forming a
/// triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Normalized,
    /// Raw occupancy, total mass `1/(1−γ)`.
    Raw,
}

/// `(supp ρ_π, (1−γ) ρ_π, T_π)` restricted to the support.
pub fn build_triple<T: Scalar>(mdp: &MdpSpec<T>) -> Result<MetricMeasureTriple<T>, GwError> {
    build_triple_with(mdp, Normalization::Normalized)
}

pub fn build_triple_with<T: Scalar>(
    mdp: &MdpSpec<T>,
    normalization: Normalization,
) -> Result<MetricMeasureTriple<T>, GwError> {
    let p = induced_transition(mdp);
    let rho0 = initial_pair_distribution(mdp);
    let gamma = mdp.gamma();
    let occ = occupancy_measure(&p, &rho0, gamma)?;
    let support = support_set(&occ, T::of(DEFAULT_SUPPORT_THRESHOLD))?;
    let t = hitting_restart(&p, &rho0, gamma, &support)?;
    let weights = match normalization {
        Normalization::Normalized => occ.normalized(),
        Normalization::Raw => occ.values.clone(),
    };
    let idx = support.indices();
    MetricMeasureTriple::new(
        idx.iter().map(|&x| mdp.pair_label(x)).collect(),
        idx.iter().map(|&x| weights[x]).collect(),
        t.restrict(&support),
    )
}

/// Joint distribution over `supp X × supp Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    pub matrix: Matrix<T>,
}

impl<T: Scalar> Coupling<T> {
    pub fn new(matrix: Matrix<T>) -> Self {
        Self { matrix }
    }

    /// `μ = p qᵀ / mass`.
    pub fn product(p: &[T], q: &[T]) -> Self {
        let mass: T = p.iter().copied().sum();
        Self::new(Matrix::from_fn(p.len(), q.len(), |i, j| p[i] * q[j] / mass))
    }

    /// Coupling supported on the graph of `phi` (`x ↦ phi[x]`), carrying the
    /// measure of `x`.
    pub fn from_bijection(p: &[T], phi: &[usize]) -> Self {
        let mut m = Matrix::zeros(p.len(), phi.len());
        for (x, &y) in phi.iter().enumerate() {
            m[(x, y)] = p[x];
        }
        Self::new(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GwStatus {
    /// Global minimum certified by exhaustive search.
    Exact,
    /// Objective at a feasible coupling; the minimum is at most this.
    UpperBound,
}

impl GwStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GwStatus::Exact => "exact",
            GwStatus::UpperBound => "upper_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwResult<T> {
    pub value: T,
    pub coupling: Coupling<T>,
    pub status: GwStatus,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingReport<T> {
    pub max_row_gap: T,
    pub max_col_gap: T,
    pub min_entry: T,
    pub feasible: bool,
}

/// Marginal gaps of `mu` against the two measures.
pub fn check_coupling<T: Scalar>(
    tx: &MetricMeasureTriple<T>,
    ty: &MetricMeasureTriple<T>,
    mu: &Coupling<T>,
    tol: T,
) -> Result<CouplingReport<T>, GwError> {
    let m = &mu.matrix;
    if m.rows() != tx.len() || m.cols() != ty.len() {
        return Err(GwError::Shape(format!(
            "coupling is {}x{}, supports are {} and {}",
            m.rows(),
            m.cols(),
            tx.len(),
            ty.len()
        )));
    }
    let gap = |sums: Vec<T>, target: &[T]| {
        sums.iter()
            .zip(target)
            .fold(T::zero(), |acc, (&s, &t)| acc.max((s - t).abs()))
    };
    let max_row_gap = gap(m.row_sums(), tx.measure());
    let max_col_gap = gap(m.col_sums(), ty.measure());
    let min_entry = m.as_slice().iter().fold(T::infinity(), |a, &b| a.min(b));
    Ok(CouplingReport {
        max_row_gap,
        max_col_gap,
        min_entry,
        feasible: max_row_gap <= tol && max_col_gap <= tol && min_entry >= -tol,
    })
}

/// Total masses when they differ by more than `tol`.
pub fn mass_mismatch<T: Scalar>(tx: &MetricMeasureTriple<T>, ty: &MetricMeasureTriple<T>, tol: T) -> Option<(T, T)> {
    let (a, b) = (tx.total_mass(), ty.total_mass());
    ((a - b).abs() > tol * a.max(b).max(T::one())).then_some((a, b))
}

pub(crate) fn ensure_same_mass<T: Scalar>(
    tx: &MetricMeasureTriple<T>,
    ty: &MetricMeasureTriple<T>,
) -> Result<(), GwError> {
    match mass_mismatch(tx, ty, T::tol(FEASIBILITY_TOL)) {
        Some((a, b)) => Err(GwError::MassMismatch {
            x_mass: a.as_f64(),
            y_mass: b.as_f64(),
        }),
        None => Ok(()),
    }
}

/// The GW objective at a feasible coupling, by direct quadruple summation.
pub fn gw_objective<T: Scalar>(
    tx: &MetricMeasureTriple<T>,
    ty: &MetricMeasureTriple<T>,
    mu: &Coupling<T>,
) -> Result<T, GwError> {
    let tol = T::tol(FEASIBILITY_TOL) * tx.total_mass().max(T::one());
    let report = check_coupling(tx, ty, mu, tol)?;
    if !report.feasible {
        return Err(GwError::InfeasibleCoupling {
            max_gap: report
                .max_row_gap
                .max(report.max_col_gap)
                .max(-report.min_entry)
                .as_f64(),
        });
    }
    Ok(objective_unchecked(tx.hitting(), ty.hitting(), &mu.matrix))
}

pub(crate) fn objective_unchecked<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, mu: &Matrix<T>) -> T {
    let (m, n) = (a.rows(), b.rows());
    let mut total = T::zero();
    for x in 0..m {
        for y in 0..n {
            let w = mu[(x, y)];
            if w == T::zero() {
                continue;
            }
            let mut inner = T::zero();
            for x2 in 0..m {
                for y2 in 0..n {
                    let d = a[(x, x2)] - b[(y, y2)];
                    inner = inner + d * d * mu[(x2, y2)];
                }
            }
            total = total + w * inner;
        }
    }
    T::of(0.5) * total.max(T::zero()).sqrt()
}

/// The quadratic form `F(μ) = Σ (A_{xx′} − B_{yy′})² μ_{xy} μ_{x′y′}` and its
/// gradient, evaluated through marginals in `O(m²n + mn²)`.
pub(crate) struct Quadratic<'a, T> {
    a: &'a Matrix<T>,
    b: &'a Matrix<T>,
    a2: Matrix<T>,
    b2: Matrix<T>,
}

impl<'a, T: Scalar> Quadratic<'a, T> {
    pub(crate) fn new(a: &'a Matrix<T>, b: &'a Matrix<T>) -> Self {
        Self {
            a,
            b,
            a2: a.map(|v| v * v),
            b2: b.map(|v| v * v),
        }
    }

    /// `(A μ Bᵀ)`.
    fn cross(&self, mu: &Matrix<T>) -> Matrix<T> {
        let (m, n) = (mu.rows(), mu.cols());
        let mut mu_bt = Matrix::zeros(m, n);
        for x in 0..m {
            for y in 0..n {
                let mut s = T::zero();
                for y2 in 0..n {
                    s = s + mu[(x, y2)] * self.b[(y, y2)];
                }
                mu_bt[(x, y)] = s;
            }
        }
        Matrix::from_fn(m, n, |x, y| {
            (0..m).fold(T::zero(), |s, x2| s + self.a[(x, x2)] * mu_bt[(x2, y)])
        })
    }

    pub(crate) fn value(&self, mu: &Matrix<T>) -> T {
        let p = mu.row_sums();
        let q = mu.col_sums();
        let quad = |w: &Matrix<T>, v: &[T]| {
            let wv = w.mul_vec(v);
            v.iter().zip(&wv).fold(T::zero(), |s, (&a, &b)| s + a * b)
        };
        let cross = self.cross(mu);
        let inner = mu
            .as_slice()
            .iter()
            .zip(cross.as_slice())
            .fold(T::zero(), |s, (&u, &c)| s + u * c);
        quad(&self.a2, &p) + quad(&self.b2, &q) - T::of(2.0) * inner
    }

    /// `∇F(μ)`.
    pub(crate) fn gradient(&self, mu: &Matrix<T>) -> Matrix<T> {
        let p = mu.row_sums();
        let q = mu.col_sums();
        let ap = self.a2.mul_vec(&p);
        let atp = self.a2.transpose().mul_vec(&p);
        let bq = self.b2.mul_vec(&q);
        let btq = self.b2.transpose().mul_vec(&q);
        let c1 = self.cross(mu);
        // Aᵀ μ B through the transposed triple.
        let at = self.a.transpose();
        let bt = self.b.transpose();
        let c2 = Quadratic::new(&at, &bt).cross(mu);
        Matrix::from_fn(mu.rows(), mu.cols(), |x, y| {
            ap[x] + atp[x] + bq[y] + btq[y] - T::of(2.0) * (c1[(x, y)] + c2[(x, y)])
        })
    }

    /// Symmetrized Hessian entry: `F(μ) = Σ_{c,c′} Q_{cc′} μ_c μ_{c′}` with
    /// cells `c = (x, y)`.
    pub(crate) fn q_entry(&self, (x, y): (usize, usize), (x2, y2): (usize, usize)) -> T {
        let d1 = self.a[(x, x2)] - self.b[(y, y2)];
        let d2 = self.a[(x2, x)] - self.b[(y2, y)];
        T::of(0.5) * (d1 * d1 + d2 * d2)
    }
}
