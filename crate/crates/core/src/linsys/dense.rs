//! Gaussian elimination for the square systems of policy evaluation and
//! expected-frequency computation.

use crate::scalar::Scalar;

/// Solves `a·x = rhs` for square `a`. Returns `None` if `a` is singular.
///
/// Exact scalars pivot on the first non-zero entry; floats use partial
/// pivoting. Zero entries are skipped, which keeps the sparse, nearly
/// triangular matrices of Markov chains cheap.
pub fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = if T::EXACT {
            (col..n).find(|&r| !a[r][col].is_zero())?
        } else {
            let r = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
            if a[r][col].is_zero_tol() {
                return None;
            }
            r
        };
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let nz: Vec<usize> = (col + 1..n).filter(|&j| !a[col][j].is_zero()).collect();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / a[col][col].clone();
            for &j in &nz {
                a[r][j] = a[r][j].clone() - factor.clone() * a[col][j].clone();
            }
            a[r][col] = T::zero();
            rhs[r] = rhs[r].clone() - factor * rhs[col].clone();
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for j in r + 1..n {
            if !a[r][j].is_zero() {
                acc = acc - a[r][j].clone() * x[j].clone();
            }
        }
        x[r] = acc / a[r][r].clone();
    }
    Some(x)
}
