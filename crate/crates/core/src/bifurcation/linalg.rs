//! Dense Gaussian elimination for the small boundary systems.

use crate::scalar::Scalar;

/// Row-major square matrix.
pub type Matrix<T> = Vec<Vec<T>>;

/// Solves `a x = b` with partial pivoting. `None` when a pivot vanishes.
pub fn solve<T: Scalar>(mut a: Matrix<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col] == T::zero() || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            if m == T::zero() {
                continue;
            }
            for c in col..n {
                let v = a[col][c];
                a[r][c] = a[r][c] - m * v;
            }
            b[r] = b[r] - m * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s = (r + 1..n).fold(b[r], |acc, c| acc - a[r][c] * x[c]);
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// Determinant by elimination with partial pivoting.
pub fn det<T: Scalar>(mut a: Matrix<T>) -> T {
    let n = a.len();
    let mut d = T::one();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        if a[piv][col] == T::zero() {
            return T::zero();
        }
        if piv != col {
            a.swap(col, piv);
            d = -d;
        }
        d = d * a[col][col];
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] = a[r][c] - m * v;
            }
        }
    }
    d
}
