//! Small dense linear algebra: a row-major matrix, LU with partial pivoting,
//! solution sets of rank-deficient systems and Cholesky.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("matrix is singular to working precision (pivot column {column})")]
pub struct SingularMatrix {
    pub column: usize,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows.
    ///
    /// # Panics
    /// If the rows are ragged.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows in Matrix::from_rows");
        let n = rows.len();
        Self {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Entrywise `max |a − b|`; `∞ − ∞` counts as equal.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(
            T::zero(),
            |acc, (&a, &b)| {
                if a == b {
                    acc
                } else {
                    acc.max((a - b).abs())
                }
            },
        )
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + x;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `PA = LU` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(mut a: Matrix<T>) -> Result<Self, SingularMatrix> {
        assert_eq!(a.rows, a.cols, "LU requires a square matrix");
        let n = a.rows;
        let scale = a
            .data
            .iter()
            .fold(T::zero(), |m, &x| m.max(x.abs()))
            .max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::of(n.max(1) as f64);
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot_abs) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold(
                    (k, T::neg_infinity()),
                    |best, cur| {
                        if cur.1 > best.1 {
                            cur
                        } else {
                            best
                        }
                    },
                );
            if !(pivot_abs > tiny) {
                return Err(SingularMatrix { column: k });
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor != T::zero() {
                    for j in k + 1..n {
                        let akj = a[(k, j)];
                        a[(i, j)] = a[(i, j)] - factor * akj;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Solves `A x = b` by LU.
pub fn solve<T: Scalar>(a: Matrix<T>, b: &[T]) -> Result<Vec<T>, SingularMatrix> {
    Ok(Lu::factor(a)?.solve(b))
}

/// Solution set `{particular + basis · z}` of an underdetermined system.
#[derive(Debug, Clone)]
pub struct AffineSolutions<T> {
    /// One solution, with free variables set to zero.
    pub particular: Vec<T>,
    /// Null-space basis vectors of the coefficient matrix.
    pub basis: Vec<Vec<T>>,
}

/// Gauss-Jordan elimination with partial pivoting that tolerates rank
/// deficiency. Returns `None` when `A x = b` is inconsistent.
///
/// Pivots below `rel_tol · max|A|` are treated as zero.
pub fn solve_affine<T: Scalar>(mut a: Matrix<T>, mut b: Vec<T>, rel_tol: T) -> Option<AffineSolutions<T>> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(b.len(), m);
    let scale = a.data.iter().fold(T::zero(), |s, &x| s.max(x.abs()));
    let bscale = b.iter().fold(T::zero(), |s, &x| s.max(x.abs()));
    let tiny = rel_tol * scale.max(T::min_positive_value());

    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..n {
        if r == m {
            break;
        }
        let (p, best) =
            (r..m)
                .map(|i| (i, a[(i, c)].abs()))
                .fold((r, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if !(best > tiny) {
            for i in r..m {
                a[(i, c)] = T::zero();
            }
            continue;
        }
        if p != r {
            for j in 0..n {
                a.data.swap(r * n + j, p * n + j);
            }
            b.swap(r, p);
        }
        let inv = T::one() / a[(r, c)];
        for j in c..n {
            a[(r, j)] = a[(r, j)] * inv;
        }
        b[r] = b[r] * inv;
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = a[(i, c)];
            if f != T::zero() {
                for j in c..n {
                    let arj = a[(r, j)];
                    a[(i, j)] = a[(i, j)] - f * arj;
                }
                b[i] = b[i] - f * b[r];
            }
        }
        pivot_cols.push(c);
        r += 1;
    }

    let consistency = rel_tol.sqrt() * (bscale + T::one());
    if b[r..].iter().any(|&x| x.abs() > consistency) {
        return None;
    }

    let mut is_pivot = vec![false; n];
    for &c in &pivot_cols {
        is_pivot[c] = true;
    }
    let mut particular = vec![T::zero(); n];
    for (row, &c) in pivot_cols.iter().enumerate() {
        particular[c] = b[row];
    }
    let basis = (0..n)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = vec![T::zero(); n];
            v[f] = T::one();
            for (row, &c) in pivot_cols.iter().enumerate() {
                v[c] = -a[(row, f)];
            }
            v
        })
        .collect();
    Some(AffineSolutions { particular, basis })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CholeskyError {
    /// A pivot fell below `−rel_tol · max|H_ii|`: some leading block has a
    /// negative eigenvalue.
    #[error("matrix is indefinite")]
    Indefinite,
    /// A pivot was within `rel_tol · max|H_ii|` of zero.
    #[error("matrix is numerically singular")]
    Degenerate,
}

/// Solves `H x = rhs` for symmetric positive definite `H` by Cholesky.
pub fn cholesky_solve<T: Scalar>(h: &Matrix<T>, rhs: &[T], rel_tol: T) -> Result<Vec<T>, CholeskyError> {
    let n = h.rows;
    assert_eq!(h.cols, n);
    assert_eq!(rhs.len(), n);
    let diag = (0..n).fold(T::zero(), |s, i| s.max(h[(i, i)].abs()));
    let tiny = rel_tol * diag.max(T::min_positive_value());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = h[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d < -tiny {
            return Err(CholeskyError::Indefinite);
        }
        if !(d > tiny) {
            return Err(CholeskyError::Degenerate);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] = y[i] - l[(i, k)] * y[k];
        }
        y[i] = y[i] / l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] = y[i] - l[(k, i)] * y[k];
        }
        y[i] = y[i] / l[(i, i)];
    }
    Ok(y)
}
