use super::{GwError, MetricMeasureTriple};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_EQUIVALENCE_TOL: f64 = 1e-8;

fn sorted<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn close<T: Scalar>(a: &[T], b: &[T], tol: T) -> bool {
    a.iter().zip(b).all(|(&x, &y)| (x - y).abs() <= tol)
}

/// Searches for `φ` with `φ[x] = y` preserving measure and hitting times
/// within `tol`. Measures are normalized to unit mass first.
///
/// Backtracking over candidate lists; `x` may map to `y` only when their
/// measures and sorted hitting-time profiles (both directions) agree.
pub fn equivalence_check<T: Scalar>(
    tx: &MetricMeasureTriple<T>,
    ty: &MetricMeasureTriple<T>,
    tol: T,
) -> Result<Option<Vec<usize>>, GwError> {
    let (m, n) = (tx.len(), ty.len());
    if m != n {
        return Err(GwError::SizeMismatch { x: m, y: n });
    }
    let (a, b) = (tx.hitting(), ty.hitting());
    let (mx, my) = (tx.total_mass(), ty.total_mass());
    let p: Vec<T> = tx.measure().iter().map(|&v| v / mx).collect();
    let q: Vec<T> = ty.measure().iter().map(|&v| v / my).collect();

    let profiles = |t: &Matrix<T>, i: usize| {
        let out = sorted(t.row(i).to_vec());
        let inc = sorted(t.column(i));
        (out, inc)
    };
    let px: Vec<_> = (0..n).map(|x| profiles(a, x)).collect();
    let py: Vec<_> = (0..n).map(|y| profiles(b, y)).collect();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| {
                    (p[x] - q[y]).abs() <= tol && close(&px[x].0, &py[y].0, tol) && close(&px[x].1, &py[y].1, tol)
                })
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| (candidates[x].len(), x));

    let mut phi = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let found = extend(0, &order, &candidates, a, b, tol, &mut phi, &mut used);
    Ok(found.then_some(phi))
}

#[allow(clippy::too_many_arguments)]
fn extend<T: Scalar>(
    depth: usize,
    order: &[usize],
    candidates: &[Vec<usize>],
    a: &Matrix<T>,
    b: &Matrix<T>,
    tol: T,
    phi: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let x = order[depth];
    for &y in &candidates[x] {
        if used[y] {
            continue;
        }
        let consistent = order[..depth].iter().all(|&x2| {
            let y2 = phi[x2];
            (a[(x, x2)] - b[(y, y2)]).abs() <= tol && (a[(x2, x)] - b[(y2, y)]).abs() <= tol
        });
        if !consistent {
            continue;
        }
        phi[x] = y;
        used[y] = true;
        if extend(depth + 1, order, candidates, a, b, tol, phi, used) {
            return true;
        }
        used[y] = false;
        phi[x] = usize::MAX;
    }
    false
}
