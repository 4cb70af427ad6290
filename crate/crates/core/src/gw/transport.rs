//! Linear optimal transport pieces used by the GW solvers.

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Result of an entropic transport solve.
#[derive(Debug, Clone)]
pub struct Sinkhorn<T> {
    pub plan: Matrix<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub iterations: usize,
    /// Max row-marginal gap after the final column update.
    pub gap: T,
}

fn log_sum_exp<T: Scalar>(values: impl Iterator<Item = T> + Clone) -> T {
    let max = values.clone().fold(T::neg_infinity(), |a, b| a.max(b));
    if max == T::neg_infinity() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<T>().ln()
}

/// Stabilized Sinkhorn for `min ⟨C, μ⟩ − eps·H(μ)` with marginals `p`, `q`.
///
/// Potentials `f`, `g` live in the log domain; between absorptions the
/// iteration only rescales the kernel `exp((f_i + g_j − C_ij)/eps)`.
/// `warm` supplies starting potentials. Stops once the row gap drops below
/// `tol` or after `max_iters` sweeps; the caller decides what a large final
/// gap means.
pub fn sinkhorn_log<T: Scalar>(
    cost: &Matrix<T>,
    p: &[T],
    q: &[T],
    eps: T,
    tol: T,
    max_iters: usize,
    warm: Option<(&[T], &[T])>,
) -> Sinkhorn<T> {
    let (m, n) = (p.len(), q.len());
    assert_eq!((cost.rows(), cost.cols()), (m, n));
    let (mut f, mut g) = match warm {
        Some((f, g)) => (f.to_vec(), g.to_vec()),
        None => (vec![T::zero(); m], vec![T::zero(); n]),
    };
    let big = T::of(1e30);
    let kernel = |f: &[T], g: &[T]| Matrix::from_fn(m, n, |i, j| ((f[i] + g[j] - cost[(i, j)]) / eps).exp());
    let row_gap = |k: &Matrix<T>, u: &[T], v: &[T]| {
        (0..m).fold(T::zero(), |acc, i| {
            let r = u[i] * (0..n).fold(T::zero(), |s, j| s + k[(i, j)] * v[j]);
            acc.max((r - p[i]).abs())
        })
    };

    log_sweep(cost, p, q, eps, &mut f, &mut g);
    let mut k = kernel(&f, &g);
    let mut u = vec![T::one(); m];
    let mut v = vec![T::one(); n];
    let mut gap = T::infinity();
    let mut iterations = 1;
    while iterations < max_iters {
        iterations += 1;
        for i in 0..m {
            let s = (0..n).fold(T::zero(), |s, j| s + k[(i, j)] * v[j]);
            u[i] = p[i] / s;
        }
        for j in 0..n {
            let s = (0..m).fold(T::zero(), |s, i| s + k[(i, j)] * u[i]);
            v[j] = q[j] / s;
        }
        let unstable = u.iter().chain(&v).any(|&x| !(x < big && x > big.recip()));
        if unstable {
            // Fall back to an exact log-domain sweep from the last potentials.
            log_sweep(cost, p, q, eps, &mut f, &mut g);
            k = kernel(&f, &g);
            u.fill(T::one());
            v.fill(T::one());
            continue;
        }
        if iterations % 10 == 0 || iterations == max_iters {
            gap = row_gap(&k, &u, &v);
            if gap < tol {
                break;
            }
            let drift = u.iter().chain(&v).fold(T::zero(), |a, &x| a.max(x.ln().abs()));
            if drift < T::of(20.0) {
                continue;
            }
            // Absorb the scalings so the kernel stays well conditioned.
            for i in 0..m {
                f[i] = f[i] + eps * u[i].ln();
            }
            for j in 0..n {
                g[j] = g[j] + eps * v[j].ln();
            }
            k = kernel(&f, &g);
            u.fill(T::one());
            v.fill(T::one());
        }
    }
    for i in 0..m {
        f[i] = f[i] + eps * u[i].ln();
    }
    for j in 0..n {
        g[j] = g[j] + eps * v[j].ln();
    }
    let plan = kernel(&f, &g);
    if !gap.is_finite() || gap >= tol {
        gap = row_gap(&plan, &vec![T::one(); m], &vec![T::one(); n]);
    }
    Sinkhorn {
        plan,
        f,
        g,
        iterations,
        gap,
    }
}

fn log_sweep<T: Scalar>(cost: &Matrix<T>, p: &[T], q: &[T], eps: T, f: &mut [T], g: &mut [T]) {
    let (m, n) = (p.len(), q.len());
    for i in 0..m {
        let lse = log_sum_exp((0..n).map(|j| (g[j] - cost[(i, j)]) / eps));
        f[i] = eps * (p[i].ln() - lse);
    }
    for j in 0..n {
        let lse = log_sum_exp((0..m).map(|i| (f[i] - cost[(i, j)]) / eps));
        g[j] = eps * (q[j].ln() - lse);
    }
}

/// Projects a nonnegative matrix onto the transport polytope of `p`, `q`:
/// a few proportional row/column sweeps, then the rank-one correction of
/// Altschuler, Weed and Rigollet so that the marginals hold up to rounding.
/// When the sweeps alone already meet the marginals to round-off, their
/// result is returned as is, so the support never grows.
pub fn round_to_marginals<T: Scalar>(plan: &Matrix<T>, p: &[T], q: &[T]) -> Matrix<T> {
    let (m, n) = (p.len(), q.len());
    let mut f = plan.map(|v| v.max(T::zero()));
    for _ in 0..8 {
        let rows = f.row_sums();
        for i in 0..m {
            if rows[i] > T::zero() {
                let s = p[i] / rows[i];
                for j in 0..n {
                    f[(i, j)] = f[(i, j)] * s;
                }
            }
        }
        let cols = f.col_sums();
        for j in 0..n {
            if cols[j] > T::zero() {
                let s = q[j] / cols[j];
                for i in 0..m {
                    f[(i, j)] = f[(i, j)] * s;
                }
            }
        }
    }
    let mass: T = p.iter().copied().sum();
    if marginal_gap(&f, p, q) <= T::epsilon() * T::of(8.0) * mass.max(T::one()) {
        return f;
    }
    let rows = f.row_sums();
    for i in 0..m {
        if rows[i] > p[i] {
            let s = p[i] / rows[i];
            for j in 0..n {
                f[(i, j)] = f[(i, j)] * s;
            }
        }
    }
    let cols = f.col_sums();
    for j in 0..n {
        if cols[j] > q[j] {
            let s = q[j] / cols[j];
            for i in 0..m {
                f[(i, j)] = f[(i, j)] * s;
            }
        }
    }
    let rows = f.row_sums();
    let cols = f.col_sums();
    let er: Vec<T> = (0..m).map(|i| (p[i] - rows[i]).max(T::zero())).collect();
    let ec: Vec<T> = (0..n).map(|j| (q[j] - cols[j]).max(T::zero())).collect();
    let total: T = er.iter().copied().sum();
    if total > T::zero() {
        for i in 0..m {
            for j in 0..n {
                f[(i, j)] = f[(i, j)] + er[i] * ec[j] / total;
            }
        }
    }
    f
}

fn marginal_gap<T: Scalar>(f: &Matrix<T>, p: &[T], q: &[T]) -> T {
    let rows = f.row_sums().into_iter().zip(p).map(|(r, &t)| (r - t).abs());
    let cols = f.col_sums().into_iter().zip(q).map(|(c, &t)| (c - t).abs());
    rows.chain(cols).fold(T::zero(), |a, b| a.max(b))
}

/// Exact minimizer of `⟨C, μ⟩` over the transport polytope: a vertex found
/// by the transportation simplex method (northwest corner start, u-v
/// potentials, Bland's rule once the Dantzig phase runs long).
pub fn transport_lp<T: Scalar>(cost: &Matrix<T>, p: &[T], q: &[T]) -> Matrix<T> {
    let (m, n) = (p.len(), q.len());
    assert_eq!((cost.rows(), cost.cols()), (m, n));
    let mut x = Matrix::zeros(m, n);
    let mut basic = vec![false; m * n];
    let mut basis = Vec::with_capacity(m + n - 1);

    let (mut supply, mut demand) = (p.to_vec(), q.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let t = supply[i].min(demand[j]).max(T::zero());
        x[(i, j)] = t;
        basic[i * n + j] = true;
        basis.push((i, j));
        supply[i] = supply[i] - t;
        demand[j] = demand[j] - t;
        if i + 1 == m && j + 1 == n {
            break;
        }
        // Keep the basis a spanning tree: advance exactly one index.
        if j + 1 == n || (i + 1 < m && supply[i] <= demand[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = cost.as_slice().iter().fold(T::zero(), |s, &c| s.max(c.abs()));
    let tol = T::tol(1e-12) * scale.max(T::one());
    let bland_after = 50 * (m + n);
    let cap = 5000 * (m + n);
    let mut u = vec![T::zero(); m];
    let mut v = vec![T::zero(); n];
    for iter in 0..cap {
        potentials(cost, &basis, &mut u, &mut v);
        let mut entering = None;
        let mut best = -tol;
        'scan: for a in 0..m {
            for b in 0..n {
                if basic[a * n + b] {
                    continue;
                }
                let r = cost[(a, b)] - u[a] - v[b];
                if r < best {
                    entering = Some((a, b));
                    best = r;
                    if iter >= bland_after {
                        break 'scan;
                    }
                }
            }
        }
        let Some((a, b)) = entering else { break };

        // Tree path from column b back to row a; cells alternate −, +, −, …
        let path = tree_path(&basis, m, n, a, b);
        let mut theta = T::infinity();
        let mut leave = usize::MAX;
        for &cell in path.iter().step_by(2) {
            let (ci, cj) = basis[cell];
            let val = x[(ci, cj)];
            if val < theta || (val == theta && ci * n + cj < leave_key(&basis, leave, n)) {
                theta = val;
                leave = cell;
            }
        }
        x[(a, b)] = theta;
        for (k, &cell) in path.iter().enumerate() {
            let (ci, cj) = basis[cell];
            if k % 2 == 0 {
                x[(ci, cj)] = x[(ci, cj)] - theta;
            } else {
                x[(ci, cj)] = x[(ci, cj)] + theta;
            }
        }
        let (li, lj) = basis[leave];
        x[(li, lj)] = T::zero();
        basic[li * n + lj] = false;
        basic[a * n + b] = true;
        basis[leave] = (a, b);
    }
    x.map(|v| v.max(T::zero()))
}

fn leave_key(basis: &[(usize, usize)], leave: usize, n: usize) -> usize {
    basis.get(leave).map_or(usize::MAX, |&(i, j)| i * n + j)
}

fn potentials<T: Scalar>(cost: &Matrix<T>, basis: &[(usize, usize)], u: &mut [T], v: &mut [T]) {
    let (m, n) = (u.len(), v.len());
    let mut row_known = vec![false; m];
    let mut col_known = vec![false; n];
    row_known[0] = true;
    u[0] = T::zero();
    let mut remaining = m + n - 1;
    while remaining > 0 {
        let before = remaining;
        for &(i, j) in basis {
            if row_known[i] && !col_known[j] {
                v[j] = cost[(i, j)] - u[i];
                col_known[j] = true;
                remaining -= 1;
            } else if col_known[j] && !row_known[i] {
                u[i] = cost[(i, j)] - v[j];
                row_known[i] = true;
                remaining -= 1;
            }
        }
        assert!(remaining < before, "transport basis is not a spanning tree");
    }
}

/// Basis cells on the tree path from column `b` to row `a`, starting with
/// the cell touching column `b`.
fn tree_path(basis: &[(usize, usize)], m: usize, n: usize, a: usize, b: usize) -> Vec<usize> {
    // Nodes: rows 0..m, columns m..m+n.
    let mut adj = vec![Vec::new(); m + n];
    for (k, &(i, j)) in basis.iter().enumerate() {
        adj[i].push((m + j, k));
        adj[m + j].push((i, k));
    }
    let start = m + b;
    let mut via = vec![None; m + n];
    let mut seen = vec![false; m + n];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == a {
            break;
        }
        for &(next, k) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                via[next] = Some((node, k));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = a;
    while node != start {
        let (prev, k) = via[node].expect("basis tree is connected");
        path.push(k);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_assignment(cost: &Matrix<f64>) -> f64 {
        fn go(cost: &Matrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.rows() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.cols() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[(row, j)] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost.cols()])
    }

    #[test]
    fn lp_solves_assignment() {
        let cost = Matrix::from_rows(vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]);
        let w = vec![1.0; 3];
        let x = transport_lp(&cost, &w, &w);
        let value: f64 = x.as_slice().iter().zip(cost.as_slice()).map(|(a, b)| a * b).sum();
        assert!((value - brute_assignment(&cost)).abs() < 1e-12);
        assert!((value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_then_round_is_feasible() {
        let cost = Matrix::from_rows(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]]);
        let p = [0.4f64, 0.6];
        let q = [0.2, 0.5, 0.3];
        let s = sinkhorn_log(&cost, &p, &q, 0.05, 1e-12, 10_000, None);
        assert!(s.gap < 1e-12);
        let r = round_to_marginals(&s.plan, &p, &q);
        for (a, b) in r.row_sums().iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in r.col_sums().iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rounding_fixes_a_bad_plan() {
        let p = [0.5f64, 0.25, 0.25];
        let q = [0.7, 0.3];
        let bad = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.9], vec![0.2, 0.1]]);
        let r = round_to_marginals(&bad, &p, &q);
        assert!(r.as_slice().iter().all(|&v| v >= 0.0));
        for (a, b) in r.row_sums().iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in r.col_sums().iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn lp_beats_every_sampled_plan(
            (m, n) in (1usize..6, 1usize..6),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut unit = |k: usize| {
                let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<_>>()
            };
            let p = unit(m);
            let q = unit(n);
            let cost = Matrix::from_fn(m, n, |i, j| ((i * 7 + j * 3 + seed as usize % 11) % 5) as f64);
            let x = transport_lp(&cost, &p, &q);
            for (a, b) in x.row_sums().iter().zip(&p) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in x.col_sums().iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let lp: f64 = x.as_slice().iter().zip(cost.as_slice()).map(|(a, b)| a * b).sum();
            // Entropic plans approach the LP optimum from above.
            let s = sinkhorn_log(&cost, &p, &q, 1e-3, 1e-13, 50_000, None);
            let r = round_to_marginals(&s.plan, &p, &q);
            let ent: f64 = r.as_slice().iter().zip(cost.as_slice()).map(|(a, b)| a * b).sum();
            prop_assert!(lp <= ent + 1e-12);
            let prod = Matrix::from_fn(m, n, |i, j| p[i] * q[j]);
            let pv: f64 = prod.as_slice().iter().zip(cost.as_slice()).map(|(a, b)| a * b).sum();
            prop_assert!(lp <= pv + 1e-12);
        }

        #[test]
        fn rounding_preserves_marginals(p in simplex(4), q in simplex(3), raw in prop::collection::vec(0.0f64..1.0, 12)) {
            let plan = Matrix::from_fn(4, 3, |i, j| raw[i * 3 + j]);
            let r = round_to_marginals(&plan, &p, &q);
            prop_assert!(r.as_slice().iter().all(|&v| v >= 0.0));
            for (a, b) in r.row_sums().iter().zip(&p) {
                prop_assert!((a - b).abs() < 1e-14);
            }
            for (a, b) in r.col_sums().iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
