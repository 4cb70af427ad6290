//! Expected first-hitting times on `S × A`.
//!
//! Index order follows the quasi-distance: `T[i][j]` is the expected number
//! of steps to first reach pair `i` when starting from pair `j`. Diagonals
//! are zero by definition and unreachable targets are `+∞`.
//!
//! Each target row is an independent linear system over the sources, solved
//! separately (in parallel) with dense LU.

use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{Matrix, SingularMatrix};
use crate::mdp::TransitionMatrix;
use crate::restart::SupportSet;
use crate::scalar::{weighted, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HittingKind {
    /// One-step recursion on a chain, as given.
    Plain,
    /// One-step recursion on the restart chain.
    Restart,
    /// Discounted recursion `L_ij = 1 + γ Σ_k L_ik P(k|j)`.
    Discounted,
}

impl HittingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HittingKind::Plain => "plain",
            HittingKind::Restart => "restart",
            HittingKind::Discounted => "discounted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HittingError {
    #[error("linear system for target {target} is singular: {source}")]
    SolveFailed { target: usize, source: SingularMatrix },
    #[error("ratio denominator for row {row} is not positive ({value:e})")]
    DenominatorNotPositive { row: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Square matrix of expected hitting times over extended reals.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingMatrix<T> {
    entries: Matrix<T>,
    kind: HittingKind,
}

impl<T: Scalar> HittingMatrix<T> {
    pub fn new(entries: Matrix<T>, kind: HittingKind) -> Self {
        assert_eq!(entries.rows(), entries.cols());
        Self { entries, kind }
    }

    /// Expected steps to reach `target` from `source`.
    #[inline]
    pub fn get(&self, target: usize, source: usize) -> T {
        self.entries[(target, source)]
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn kind(&self) -> HittingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows() == 0
    }

    /// Submatrix on `support × support`.
    pub fn restrict(&self, support: &SupportSet) -> Matrix<T> {
        self.entries.select(support.indices(), support.indices())
    }

    /// Largest difference over the given rows, treating equal infinities as
    /// equal.
    pub fn max_abs_diff_on_rows(&self, other: &Self, rows: &[usize]) -> T {
        let n = self.len();
        let mut worst = T::zero();
        for &i in rows {
            for j in 0..n {
                let (a, b) = (self.get(i, j), other.get(i, j));
                if a != b {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}

/// Which target rows to compute.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    All,
    Only(&'a SupportSet),
}

impl Targets<'_> {
    fn mask(self, n: usize) -> Vec<bool> {
        match self {
            Targets::All => vec![true; n],
            Targets::Only(s) => s.mask(n),
        }
    }
}

/// Solves `T_j − Σ_{k ∈ unknowns} coeff(j, k) T_k = 1` for `j ∈ unknowns`,
/// where `exit(j) = 1 − Σ_{k ∈ unknowns} coeff(j, k)` is the mass leaving
/// the unknowns in one step.
///
/// Grassmann–Taksar–Heyman elimination: every pivot is rebuilt from exit mass
/// plus the remaining off-diagonal mass, so nothing is ever subtracted and
/// nearly singular rows (a rarely hit target) keep full relative accuracy.
fn solve_row<T: Scalar>(
    target: usize,
    unknowns: &[usize],
    coeff: impl Fn(usize, usize) -> T,
    exit: impl Fn(usize) -> T,
) -> Result<Vec<T>, HittingError> {
    let k = unknowns.len();
    let mut w = Matrix::from_fn(k, k, |r, c| {
        if r == c {
            T::zero()
        } else {
            coeff(unknowns[r], unknowns[c])
        }
    });
    let mut e: Vec<T> = unknowns.iter().map(|&j| exit(j)).collect();
    let mut b = vec![T::one(); k];
    let mut diag = vec![T::zero(); k];
    for piv in 0..k {
        let d = e[piv] + (piv + 1..k).map(|c| w[(piv, c)]).sum::<T>();
        if !(d > T::zero()) {
            return Err(HittingError::SolveFailed {
                target,
                source: SingularMatrix { column: piv },
            });
        }
        diag[piv] = d;
        for r in piv + 1..k {
            let wr = w[(r, piv)];
            if wr == T::zero() {
                continue;
            }
            let f = wr / d;
            for c in piv + 1..k {
                if c != r {
                    let add = f * w[(piv, c)];
                    w[(r, c)] = w[(r, c)] + add;
                }
            }
            e[r] = e[r] + f * e[piv];
            b[r] = b[r] + f * b[piv];
            w[(r, piv)] = T::zero();
        }
    }
    let mut x = vec![T::zero(); k];
    for piv in (0..k).rev() {
        let s: T = (piv + 1..k).map(|c| w[(piv, c)] * x[c]).sum();
        x[piv] = (b[piv] + s) / diag[piv];
    }
    Ok(x)
}

fn assemble<T: Scalar>(n: usize, rows: Vec<(usize, Vec<(usize, T)>)>, fill: T, kind: HittingKind) -> HittingMatrix<T> {
    let mut m = Matrix::filled(n, n, fill);
    for i in 0..n {
        m[(i, i)] = T::zero();
    }
    for (i, row) in rows {
        for j in 0..n {
            if j != i {
                m[(i, j)] = T::infinity();
            }
        }
        for (j, v) in row {
            m[(i, j)] = v;
        }
    }
    HittingMatrix::new(m, kind)
}

/// Sources from which `target` is reached with probability one: they can
/// reach it, and cannot move (avoiding the target) to a source that can't.
fn almost_sure_sources(target: usize, succ: &[Vec<usize>], pred: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    let mut good = vec![false; n];
    let mut queue = VecDeque::from([target]);
    good[target] = true;
    while let Some(x) = queue.pop_front() {
        for &y in &pred[x] {
            if !good[y] {
                good[y] = true;
                queue.push_back(y);
            }
        }
    }
    loop {
        let mut changed = false;
        for j in 0..n {
            if j != target && good[j] && succ[j].iter().any(|&k| k != target && !good[k]) {
                good[j] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&j| j != target && good[j]).collect()
}

/// Mean first-hitting times of a chain from the one-step recursion
/// `T_ij = 1 + Σ_k T_ik p(k|j)`.
///
/// Sources that miss the target with positive probability get `+∞`. Rows not
/// selected by `targets` are left as NaN (not computed).
pub fn hitting_plain<T: Scalar>(
    p: &TransitionMatrix<T>,
    targets: Targets<'_>,
) -> Result<HittingMatrix<T>, HittingError> {
    let n = p.len();
    let succ = p.successors();
    let mut pred = vec![Vec::new(); n];
    for (x, s) in succ.iter().enumerate() {
        for &y in s {
            pred[y].push(x);
        }
    }
    let mask = targets.mask(n);
    let rows = (0..n)
        .into_par_iter()
        .filter(|&i| mask[i])
        .map(|i| {
            let sources = almost_sure_sources(i, &succ, &pred);
            let sol = solve_row(i, &sources, |j, k| p.prob(k, j), |j| p.prob(i, j))?;
            Ok((i, sources.into_iter().zip(sol).collect()))
        })
        .collect::<Result<Vec<_>, HittingError>>()?;
    Ok(assemble(n, rows, T::nan(), HittingKind::Plain))
}

/// Hitting times of the restart chain, assembled directly from
/// `T_ij = 1 + (1−γ) Σ_k T_ik ρ₀(k) + γ Σ_k T_ik P_π(k|j)`.
///
/// Only targets in `support` are solved; every other target is never reached
/// from anywhere else, so its row is `+∞` off the diagonal.
pub fn hitting_restart<T: Scalar>(
    p_pi: &TransitionMatrix<T>,
    rho0: &[T],
    gamma: T,
    support: &SupportSet,
) -> Result<HittingMatrix<T>, HittingError> {
    let n = p_pi.len();
    if rho0.len() != n {
        return Err(HittingError::Shape(format!(
            "restart distribution has length {}, expected {n}",
            rho0.len()
        )));
    }
    let teleport = T::one() - gamma;
    let rows = support
        .indices()
        .par_iter()
        .map(|&i| {
            let sources: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let coeff = |j: usize, k: usize| teleport * rho0[k] + gamma * p_pi.prob(k, j);
            let sol = solve_row(i, &sources, coeff, |j| coeff(j, i))?;
            Ok((i, sources.into_iter().zip(sol).collect()))
        })
        .collect::<Result<Vec<_>, HittingError>>()?;
    Ok(assemble(n, rows, T::infinity(), HittingKind::Restart))
}

/// Discounted hitting times `L_ij = 1 + γ Σ_k L_ik P_π(k|j)`. Always finite
/// for `γ < 1`.
pub fn hitting_discounted<T: Scalar>(p_pi: &TransitionMatrix<T>, gamma: T) -> Result<HittingMatrix<T>, HittingError> {
    let n = p_pi.len();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let sources: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let sol = solve_row(
                i,
                &sources,
                |j, k| gamma * p_pi.prob(k, j),
                |j| T::one() - gamma + gamma * p_pi.prob(i, j),
            )?;
            Ok((i, sources.into_iter().zip(sol).collect()))
        })
        .collect::<Result<Vec<_>, HittingError>>()?;
    Ok(assemble(n, rows, T::infinity(), HittingKind::Discounted))
}

/// Converts discounted hitting times to restart-chain hitting times with
/// `T_ij = L_ij / (1 − (1−γ) Σ_k L_ik ρ₀(k))`.
///
/// With `Targets::Only(support)`, rows outside the support are `+∞` off the
/// diagonal (their denominator vanishes); selected rows must have a positive
/// denominator (above round-off).
pub fn restart_from_discounted<T: Scalar>(
    l: &HittingMatrix<T>,
    rho0: &[T],
    gamma: T,
    rows: Targets<'_>,
) -> Result<HittingMatrix<T>, HittingError> {
    if l.kind() != HittingKind::Discounted {
        return Err(HittingError::Shape(format!(
            "expected a discounted hitting matrix, got {}",
            l.kind().as_str()
        )));
    }
    let n = l.len();
    if rho0.len() != n {
        return Err(HittingError::Shape(format!(
            "restart distribution has length {}, expected {n}",
            rho0.len()
        )));
    }
    let mask = rows.mask(n);
    let teleport = T::one() - gamma;
    let mut out = Vec::new();
    for (i, &selected) in mask.iter().enumerate() {
        if !selected {
            continue;
        }
        // `ρ₀` sums to one, so the denominator is `Σ_k ρ₀(k) (1 − (1−γ) L_ik)`,
        // a sum of nonnegative terms that avoids cancelling against 1.
        let denom: T = (0..n)
            .map(|k| rho0[k] * (T::one() - teleport * l.get(i, k)).max(T::zero()))
            .sum();
        let floor = T::epsilon() * T::of(64.0);
        if !(denom > floor) {
            return Err(HittingError::DenominatorNotPositive {
                row: i,
                value: denom.as_f64(),
            });
        }
        let row = (0..n).filter(|&j| j != i).map(|j| (j, l.get(i, j) / denom)).collect();
        out.push((i, row));
    }
    Ok(assemble(n, out, T::infinity(), HittingKind::Restart))
}

/// Largest violation of `T_ij = 1 + Σ_k T_ik p(k|j)` over finite entries of
/// computed rows. Pass the restart matrix to check restart-kind output.
pub fn residual_plain<T: Scalar>(t: &HittingMatrix<T>, p: &TransitionMatrix<T>) -> T {
    residual_with(t, |i, j| {
        T::one() + (0..t.len()).map(|k| weighted(p.prob(k, j), t.get(i, k))).sum::<T>()
    })
}

/// Largest violation of the restart recursion written in terms of
/// `P_π`, `ρ₀` and `γ`, over finite entries of support rows.
pub fn residual_restart<T: Scalar>(t: &HittingMatrix<T>, p_pi: &TransitionMatrix<T>, rho0: &[T], gamma: T) -> T {
    let n = t.len();
    residual_with(t, |i, j| {
        let restart: T = (0..n).map(|k| weighted(rho0[k], t.get(i, k))).sum();
        let follow: T = (0..n).map(|k| weighted(p_pi.prob(k, j), t.get(i, k))).sum();
        T::one() + (T::one() - gamma) * restart + gamma * follow
    })
}

/// Largest violation of `L_ij = 1 + γ Σ_k L_ik P_π(k|j)`.
pub fn residual_discounted<T: Scalar>(l: &HittingMatrix<T>, p_pi: &TransitionMatrix<T>, gamma: T) -> T {
    residual_with(l, |i, j| {
        T::one() + gamma * (0..l.len()).map(|k| weighted(p_pi.prob(k, j), l.get(i, k))).sum::<T>()
    })
}

fn residual_with<T: Scalar>(t: &HittingMatrix<T>, rhs: impl Fn(usize, usize) -> T) -> T {
    let n = t.len();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let v = t.get(i, j);
            if i == j || !v.is_finite() {
                continue;
            }
            let r = (v - rhs(i, j)).abs();
            worst = if r.is_nan() { T::infinity() } else { worst.max(r) };
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleViolation<T> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// `T[i][k] − T[i][j] − T[j][k]`.
    pub gap: T,
}

/// Quasi-metric axioms of a hitting matrix on a support set. Indices in the
/// report refer to the full pair enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiMetricReport<T> {
    pub diagonal_zero: bool,
    pub nonneg: bool,
    pub all_finite: bool,
    pub triangle_violations: Vec<TriangleViolation<T>>,
    /// `max |T_ij − T_ji|` with its witness.
    pub max_asymmetry: T,
    pub asymmetry_witness: Option<(usize, usize)>,
}

impl<T: Scalar> QuasiMetricReport<T> {
    pub fn holds(&self) -> bool {
        self.diagonal_zero && self.nonneg && self.all_finite && self.triangle_violations.is_empty()
    }
}

/// Checks zero diagonal, nonnegativity and `T[i][k] ≤ T[i][j] + T[j][k] + tol`
/// on `support × support`.
pub fn quasi_metric_check<T: Scalar>(t: &HittingMatrix<T>, support: &SupportSet, tol: T) -> QuasiMetricReport<T> {
    let idx = support.indices();
    let diagonal_zero = idx.iter().all(|&i| t.get(i, i) == T::zero());
    let mut nonneg = true;
    let mut all_finite = true;
    let mut max_asymmetry = T::zero();
    let mut asymmetry_witness = None;
    for &i in idx {
        for &j in idx {
            let v = t.get(i, j);
            nonneg &= v >= T::zero();
            all_finite &= v.is_finite();
            let asym = (v - t.get(j, i)).abs();
            if asym > max_asymmetry {
                max_asymmetry = asym;
                asymmetry_witness = Some((i, j));
            }
        }
    }
    let mut triangle_violations = Vec::new();
    for &i in idx {
        for &j in idx {
            for &k in idx {
                let gap = t.get(i, k) - t.get(i, j) - t.get(j, k);
                if gap > tol {
                    triangle_violations.push(TriangleViolation { i, j, k, gap });
                }
            }
        }
    }
    QuasiMetricReport {
        diagonal_zero,
        nonneg,
        all_finite,
        triangle_violations,
        max_asymmetry,
        asymmetry_witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mdp::{induced_transition, initial_pair_distribution, occupancy_measure, MdpSpec};
    use crate::random::{random_mdp, RandomMdpConfig};
    use crate::restart::{build_restart_chain, support_set};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Parts {
        p: TransitionMatrix<f64>,
        rho0: Vec<f64>,
        gamma: f64,
        support: SupportSet,
    }

    fn parts(mdp: &MdpSpec<f64>) -> Parts {
        let p = induced_transition(mdp);
        let rho0 = initial_pair_distribution(mdp);
        let gamma = mdp.gamma();
        let occ = occupancy_measure(&p, &rho0, gamma).unwrap();
        let support = support_set(&occ, 1e-12).unwrap();
        Parts {
            p,
            rho0,
            gamma,
            support,
        }
    }

    #[test]
    fn plain_two_state_chain() {
        let x = parts(&fixtures::two_state_chain());
        let t = hitting_plain(&x.p, Targets::All).unwrap();
        assert_eq!(t.get(0, 1), f64::INFINITY);
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.get(0, 0), 0.0);
    }

    #[test]
    fn plain_symmetric_swap_has_mean_two() {
        let p = TransitionMatrix::new(Matrix::<f64>::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]])).unwrap();
        let t = hitting_plain(&p, Targets::All).unwrap();
        assert!((t.get(0, 1) - 2.0).abs() < 1e-14);
        assert!((t.get(1, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn plain_partial_absorption_is_infinite() {
        // From 0: half to 1 (absorbing), half to 2 which returns to 0.
        // Target 2 is missed forever with probability one half.
        let p = TransitionMatrix::new(Matrix::from_rows(vec![
            vec![0.0, 0.0, 1.0],
            vec![0.5, 1.0, 0.0],
            vec![0.5, 0.0, 0.0],
        ]))
        .unwrap();
        let t = hitting_plain(&p, Targets::All).unwrap();
        assert_eq!(t.get(2, 0), f64::INFINITY);
        assert_eq!(t.get(0, 2), 1.0);
        assert_eq!(t.get(0, 1), f64::INFINITY);
        assert!(residual_plain(&t, &p) < 1e-12);
    }

    #[test]
    fn unselected_plain_rows_are_not_computed() {
        let x = parts(&fixtures::two_state_chain());
        let only = SupportSet::new(vec![1]);
        let t = hitting_plain(&x.p, Targets::Only(&only)).unwrap();
        assert!(t.get(0, 1).is_nan());
        assert_eq!(t.get(1, 0), 1.0);
    }

    #[test]
    fn restart_two_state_chain() {
        let x = parts(&fixtures::two_state_chain());
        let t = hitting_restart(&x.p, &x.rho0, x.gamma, &x.support).unwrap();
        assert!((t.get(0, 1) - 2.0).abs() < 1e-12);
        assert!((t.get(1, 0) - 2.0).abs() < 1e-12);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.kind(), HittingKind::Restart);
    }

    #[test]
    fn restart_single_pair() {
        let x = parts(&fixtures::single_self_loop(0.5));
        let t = hitting_restart(&x.p, &x.rho0, x.gamma, &x.support).unwrap();
        assert_eq!(t.entries().as_slice(), &[0.0]);
    }

    #[test]
    fn discounted_two_state_chain() {
        let x = parts(&fixtures::two_state_chain());
        let l = hitting_discounted(&x.p, 0.5).unwrap();
        assert!((l.get(0, 1) - 2.0).abs() < 1e-12);
        assert!((l.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discounted_gamma_zero_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = random_mdp::<f64, _>(
            &mut rng,
            RandomMdpConfig {
                n_states: 3,
                n_actions: 2,
                gamma: 0.0,
                sparsity: 0.5,
            },
        );
        let l = hitting_discounted(&induced_transition(&mdp), 0.0).unwrap();
        for i in 0..l.len() {
            for j in 0..l.len() {
                assert_eq!(l.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn ratio_two_state_chain() {
        let x = parts(&fixtures::two_state_chain());
        let l = hitting_discounted(&x.p, 0.5).unwrap();
        let t = restart_from_discounted(&l, &x.rho0, 0.5, Targets::All).unwrap();
        assert!((t.get(0, 1) - 2.0).abs() < 1e-12);
        assert!((t.get(1, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_outside_support_has_no_positive_denominator() {
        let x = parts(&fixtures::car_on_road(0.9));
        let l = hitting_discounted(&x.p, 0.9).unwrap();
        let steering = (0..x.p.len()).find(|&i| !x.support.contains(i)).unwrap();
        match restart_from_discounted(&l, &x.rho0, 0.9, Targets::All) {
            Err(HittingError::DenominatorNotPositive { row, value }) => {
                assert!(!x.support.contains(row));
                assert!(value.abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let t = restart_from_discounted(&l, &x.rho0, 0.9, Targets::Only(&x.support)).unwrap();
        assert_eq!(t.get(steering, x.support.indices()[0]), f64::INFINITY);
    }

    #[test]
    fn car_on_road_restart_rows_outside_support_are_infinite() {
        let x = parts(&fixtures::car_on_road(0.9));
        let t = hitting_restart(&x.p, &x.rho0, x.gamma, &x.support).unwrap();
        let chain = build_restart_chain(&x.p, &x.rho0, x.gamma);
        let plain = hitting_plain(chain.matrix(), Targets::All).unwrap();
        for i in 0..t.len() {
            for j in 0..t.len() {
                if i == j {
                    continue;
                }
                if x.support.contains(i) {
                    assert!(t.get(i, j).is_finite());
                } else {
                    assert_eq!(t.get(i, j), f64::INFINITY);
                    assert_eq!(plain.get(i, j), f64::INFINITY);
                }
            }
        }
    }

    #[test]
    fn quasi_metric_on_two_state_chain() {
        let x = parts(&fixtures::two_state_chain());
        let t = hitting_restart(&x.p, &x.rho0, x.gamma, &x.support).unwrap();
        let r = quasi_metric_check(&t, &x.support, 1e-9);
        assert!(r.holds());
        assert!(r.max_asymmetry < 1e-12);

        let one = HittingMatrix::new(Matrix::from_rows(vec![vec![0.0]]), HittingKind::Restart);
        assert!(quasi_metric_check(&one, &SupportSet::full(1), 1e-9).holds());
    }

    #[test]
    fn quasi_metric_flags_violations() {
        let bad = HittingMatrix::new(
            Matrix::from_rows(vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]),
            HittingKind::Restart,
        );
        let r = quasi_metric_check::<f64>(&bad, &SupportSet::full(3), 1e-9);
        assert!(!r.holds());
        assert_eq!(r.triangle_violations.len(), 1);
        let v = r.triangle_violations[0];
        assert_eq!((v.i, v.j, v.k), (0, 1, 2));
        assert!((v.gap - 3.0).abs() < 1e-15);
        assert_eq!(r.max_asymmetry, 4.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solvers_agree_and_satisfy_recursions(
            seed in any::<u64>(),
            ns in 1usize..6,
            na in 1usize..4,
            gamma in prop::sample::select(vec![0.0, 0.3, 0.9, 0.99]),
            sparsity in 0.0f64..0.7,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mdp = random_mdp::<f64, _>(&mut rng, RandomMdpConfig { n_states: ns, n_actions: na, gamma, sparsity });
            let x = parts(&mdp);
            let t = hitting_restart(&x.p, &x.rho0, x.gamma, &x.support).unwrap();
            prop_assert!(residual_restart(&t, &x.p, &x.rho0, x.gamma) <= 1e-9);

            let chain = build_restart_chain(&x.p, &x.rho0, x.gamma);
            let via_plain = hitting_plain(chain.matrix(), Targets::Only(&x.support)).unwrap();
            prop_assert!(residual_plain(&via_plain, chain.matrix()) <= 1e-9);
            prop_assert!(t.max_abs_diff_on_rows(&via_plain, x.support.indices()) <= 1e-9);

            let l = hitting_discounted(&x.p, x.gamma).unwrap();
            prop_assert!(residual_discounted(&l, &x.p, x.gamma) <= 1e-9);
            let ratio = restart_from_discounted(&l, &x.rho0, x.gamma, Targets::Only(&x.support)).unwrap();
            for &i in x.support.indices() {
                for j in 0..t.len() {
                    let (a, b) = (t.get(i, j), ratio.get(i, j));
                    prop_assert!(a == b || (a - b).abs() <= 1e-8 + 8.0 * f64::EPSILON * a * a);
                }
            }

            let plain = hitting_plain(&x.p, Targets::All).unwrap();
            prop_assert!(residual_plain(&plain, &x.p) <= 1e-9);
            for i in 0..t.len() {
                for j in 0..t.len() {
                    let v = plain.get(i, j);
                    prop_assert!(i == j || v >= 1.0);
                }
            }

            let report = quasi_metric_check(&t, &x.support, 1e-9);
            prop_assert!(report.holds(), "{:?}", report.triangle_violations.first());
        }
    }
}
