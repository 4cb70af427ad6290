use super::transport::round_to_marginals;
use super::{
    ensure_same_mass, objective_unchecked, Coupling, GwError, GwResult, GwStatus, MetricMeasureTriple, Quadratic,
};
use crate::linalg::{cholesky_solve, solve_affine, CholeskyError, Matrix};
use crate::scalar::Scalar;

/// Largest support size per side accepted by [`gw_exhaustive`].
pub const EXHAUSTIVE_MAX_SUPPORT: usize = 4;

pub(crate) enum Face<T> {
    Minimizer(Matrix<T>),
    /// Negative curvature along the face, inherited by every larger face.
    Indefinite,
    /// Empty, degenerate, or stationary point outside the polytope.
    Rejected,
}

/// Stationary point of the objective on the affine hull of the face of the
/// transport polytope whose support is `cells`, when it is a strict local
/// minimum there and lies in the polytope. Negative round-off is clipped but
/// marginals are not re-projected.
pub(crate) fn face_minimizer<T: Scalar>(
    quad: &Quadratic<'_, T>,
    p: &[T],
    q: &[T],
    cells: &[(usize, usize)],
) -> Face<T> {
    let (m, n) = (p.len(), q.len());
    let k = cells.len();
    // Row sums for every row, column sums for all but the last column.
    let rows = m + n - 1;
    let mut a = Matrix::zeros(rows, k);
    for (c, &(x, y)) in cells.iter().enumerate() {
        a[(x, c)] = T::one();
        if y + 1 < n {
            a[(m + y, c)] = T::one();
        }
    }
    let mut b = p.to_vec();
    b.extend_from_slice(&q[..n - 1]);
    let Some(affine) = solve_affine(a, b, T::tol(1e-10)) else {
        return Face::Rejected;
    };
    let mut mu = affine.particular;
    let d = affine.basis.len();
    if d > 0 {
        let qmat = Matrix::from_fn(k, k, |c, c2| quad.q_entry(cells[c], cells[c2]));
        let qn: Vec<Vec<T>> = affine.basis.iter().map(|v| qmat.mul_vec(v)).collect();
        let dot = |u: &[T], v: &[T]| u.iter().zip(v).fold(T::zero(), |s, (&a, &b)| s + a * b);
        let h = Matrix::from_fn(d, d, |r, s| dot(&affine.basis[r], &qn[s]));
        let qmu = qmat.mul_vec(&mu);
        let rhs: Vec<T> = affine.basis.iter().map(|v| -dot(v, &qmu)).collect();
        let z = match cholesky_solve(&h, &rhs, T::tol(1e-9)) {
            Ok(z) => z,
            Err(CholeskyError::Indefinite) => return Face::Indefinite,
            Err(CholeskyError::Degenerate) => return Face::Rejected,
        };
        for (zr, v) in z.iter().zip(&affine.basis) {
            for (x, &vc) in mu.iter_mut().zip(v) {
                *x = *x + *zr * vc;
            }
        }
    }
    let mass: T = p.iter().copied().sum();
    let tol = T::tol(1e-10) * mass;
    if mu.iter().any(|&v| !(v >= -tol)) {
        return Face::Rejected;
    }
    let mut plan = Matrix::zeros(m, n);
    for (&(x, y), &v) in cells.iter().zip(&mu) {
        plan[(x, y)] = v.max(T::zero());
    }
    Face::Minimizer(plan)
}

/// Exact GW distance for supports of at most four points per side.
///
/// The global minimizer lies in the relative interior of some face of the
/// transport polytope, where it is a stationary point with positive
/// semidefinite reduced Hessian. Every face is visited; when the reduced
/// Hessian is singular the objective is flat along its kernel and an equally
/// good point sits on a smaller face, so solving only the positive definite
/// faces loses nothing. A face with negative curvature cannot hold a local
/// minimum, and neither can any face containing it, so those are skipped.
pub fn gw_exhaustive<T: Scalar>(
    tx: &MetricMeasureTriple<T>,
    ty: &MetricMeasureTriple<T>,
) -> Result<GwResult<T>, GwError> {
    let (m, n) = (tx.len(), ty.len());
    if m > EXHAUSTIVE_MAX_SUPPORT || n > EXHAUSTIVE_MAX_SUPPORT {
        return Err(GwError::TooLarge {
            x: m,
            y: n,
            max: EXHAUSTIVE_MAX_SUPPORT,
        });
    }
    ensure_same_mass(tx, ty)?;
    let (a, b) = (tx.hitting(), ty.hitting());
    let quad = Quadratic::new(a, b);
    let (p, q) = (tx.measure(), ty.measure());
    let cells_total = m * n;
    let row_mask: Vec<u32> = (0..m).map(|x| ((1u32 << n) - 1) << (x * n)).collect();
    let col_mask: Vec<u32> = (0..n)
        .map(|y| (0..m).fold(0, |acc, x| acc | 1 << (x * n + y)))
        .collect();

    let cells_of = |s: u32| -> Vec<(usize, usize)> {
        (0..cells_total)
            .filter(|&c| s >> c & 1 == 1)
            .map(|c| (c / n, c % n))
            .collect()
    };
    // Masks are visited in increasing order, so every one-cell-smaller face
    // has been classified before its supersets.
    let total = 1usize << cells_total;
    let mut doomed = vec![false; total];
    let mut candidates: Vec<(T, u32)> = Vec::new();
    for s in 1..total {
        if (0..cells_total).any(|c| s >> c & 1 == 1 && doomed[s ^ 1 << c]) {
            doomed[s] = true;
            continue;
        }
        let s = s as u32;
        if !row_mask.iter().chain(&col_mask).all(|&r| s & r != 0) {
            continue;
        }
        match face_minimizer(&quad, p, q, &cells_of(s)) {
            // The expanded form cancels near zero; the literal sum does not.
            Face::Minimizer(plan) => candidates.push((objective_unchecked(a, b, &plan), s)),
            Face::Indefinite => doomed[s as usize] = true,
            Face::Rejected => {}
        }
    }
    // Ties within rounding go to the smallest support, then the
    // lexicographically first one, which prefers the diagonal when both
    // triples coincide.
    let min = candidates.iter().map(|c| c.0).fold(T::infinity(), |x, y| x.min(y));
    let peak = |m: &Matrix<T>| m.as_slice().iter().fold(T::zero(), |s, &v| s.max(v.abs()));
    let mass: T = p.iter().copied().sum();
    let scale = (peak(a) + peak(b)) * mass;
    let slack = T::of(1e-10) * min + T::epsilon() * T::of(64.0) * scale;
    let support =
        |plan: &Matrix<T>| -> Vec<usize> { (0..cells_total).filter(|&c| plan[(c / n, c % n)] > T::zero()).collect() };
    let (value, plan) = candidates
        .iter()
        .filter(|c| c.0 <= min + slack)
        .map(|c| {
            let Face::Minimizer(plan) = face_minimizer(&quad, p, q, &cells_of(c.1)) else {
                unreachable!("candidate faces are reproducible")
            };
            let plan = round_to_marginals(&plan, p, q);
            (support(&plan), objective_unchecked(a, b, &plan), plan)
        })
        .min_by(|x, y| (x.0.len(), &x.0).cmp(&(y.0.len(), &y.0)))
        .map(|(_, v, plan)| (v, plan))
        .expect("the product coupling face always yields a candidate");

    Ok(GwResult {
        value,
        coupling: Coupling::new(plan),
        status: GwStatus::Exact,
        restarts_used: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gw::{build_triple, gw_objective};

    fn triple(labels: &[&str], measure: Vec<f64>, rows: Vec<Vec<f64>>) -> MetricMeasureTriple<f64> {
        MetricMeasureTriple::new(
            labels.iter().map(|s| s.to_string()).collect(),
            measure,
            Matrix::from_rows(rows),
        )
        .unwrap()
    }

    #[test]
    fn worked_instances() {
        let chain = build_triple(&fixtures::two_state_chain::<f64>()).unwrap();
        let single = build_triple(&fixtures::single_self_loop::<f64>(0.5)).unwrap();
        let same = gw_exhaustive(&chain, &chain).unwrap();
        assert!(same.value < 1e-12);
        assert!((same.coupling.matrix[(0, 0)] - 0.5).abs() < 1e-12);
        assert!(same.coupling.matrix[(0, 1)].abs() < 1e-12);

        let r = gw_exhaustive(&chain, &single).unwrap();
        assert!((r.value - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.status, GwStatus::Exact);
        assert!((gw_objective(&chain, &single, &r.coupling).unwrap() - r.value).abs() < 1e-12);
    }

    #[test]
    fn permuted_copy_is_at_distance_zero() {
        let x = triple(
            &["a", "b", "c"],
            vec![0.2, 0.3, 0.5],
            vec![vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 1.5], vec![2.5, 3.0, 0.0]],
        );
        let y = x.permuted(&[2, 0, 1]);
        let r = gw_exhaustive(&x, &y).unwrap();
        assert!(r.value < 1e-9, "{}", r.value);
    }

    #[test]
    fn beats_every_vertex_and_product() {
        // Two-point spaces: the polytope is a segment, scan it finely.
        let x = triple(&["a", "b"], vec![0.3, 0.7], vec![vec![0.0, 1.0], vec![4.0, 0.0]]);
        let y = triple(&["c", "d"], vec![0.6, 0.4], vec![vec![0.0, 2.0], vec![2.5, 0.0]]);
        let r = gw_exhaustive(&x, &y).unwrap();
        let mut best = f64::INFINITY;
        for k in 0..=30_000 {
            let t = 0.3 * k as f64 / 30_000.0;
            let mu = Matrix::from_rows(vec![vec![t, 0.3 - t], vec![0.6 - t, 0.1 + t]]);
            best = best.min(objective_unchecked(x.hitting(), y.hitting(), &mu));
        }
        assert!(r.value <= best + 1e-12);
        assert!(r.value >= best - 1e-6);
    }

    #[test]
    fn too_large_rejected() {
        let rows = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let x = triple(&["a", "b", "c", "d", "e"], vec![0.2; 5], rows);
        assert!(matches!(gw_exhaustive(&x, &x), Err(GwError::TooLarge { .. })));
    }
}
