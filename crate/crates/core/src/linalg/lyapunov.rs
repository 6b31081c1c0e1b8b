use super::{symmetrize, Mat};
use crate::error::{Error, Result};

/// Solves `A^T X + X A + Q = 0` for symmetric `X`.
///
/// Dense Kronecker formulation, intended for the state dimensions this crate
/// works with (tens of states at most). `A` must have no pair of eigenvalues
/// summing to zero.
pub fn solve_continuous_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let nn = n * n;
    let mut big = Mat::zeros(nn, nn);
    // vec(A^T X) = (I ⊗ A^T) vec X, vec(X A) = (A^T ⊗ I) vec X (column-major vec).
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += a[(k, i)];
                big[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let rhs = Mat::from_iterator(nn, 1, q.iter().map(|x| -x));
    let sol = big.lu().solve(&rhs).ok_or_else(|| Error::Internal("Lyapunov operator is singular".into()))?;
    Ok(symmetrize(&Mat::from_iterator(n, n, sol.iter().copied())))
}
