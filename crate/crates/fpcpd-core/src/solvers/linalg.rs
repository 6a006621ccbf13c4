//! Small dense symmetric solves shared by ALS, SALS, CORCONDIA and the
//! pipeline's factor projection. Systems are R x R for modest R, so a
//! plain Cholesky with escalating ridge damping is all that is needed.

use crate::tensor::Matrix;

/// Relative ridge applied to every Gram system: `1e-12 * trace / n`.
pub(crate) const BASE_RIDGE: f64 = 1e-12;

pub(crate) struct GramSolve {
    pub solution: Matrix,
    /// True when the base ridge was not enough and damping had to grow,
    /// i.e. the Gram matrix was numerically rank-deficient.
    pub escalated: bool,
}

/// Solve `rows * (gram + damp*I) = rhs` for `rows`, where `gram` is
/// symmetric positive semidefinite and `rhs` is one right-hand side per
/// row. Damping starts at the base ridge and grows until the Cholesky
/// factorization succeeds, so the call cannot fail.
pub(crate) fn solve_gram_rows(gram: &Matrix, rhs: &Matrix) -> GramSolve {
    let n = gram.nrows();
    debug_assert_eq!(gram.ncols(), n);
    debug_assert_eq!(rhs.ncols(), n);

    let trace: f64 = (0..n).map(|i| gram[[i, i]]).sum();
    let base = BASE_RIDGE * trace.max(0.0) / n as f64;
    let mut damp = base;
    let mut escalated = false;
    let chol = loop {
        if let Some(l) = cholesky(gram, damp) {
            break l;
        }
        escalated = true;
        // Escalate from around machine precision relative to the matrix
        // scale up to a scale-dominating ridge; the last step always
        // yields a positive definite system.
        damp = if damp > 0.0 {
            damp * 1e4
        } else {
            1e-12 * (1.0 + trace.abs())
        };
        if damp > 1e3 * (1.0 + trace.abs()) {
            break cholesky(gram, damp).expect("diagonally dominant system");
        }
    };

    let mut solution = Matrix::zeros(rhs.raw_dim());
    let mut x = vec![0.0; n];
    for (row_idx, row) in rhs.rows().into_iter().enumerate() {
        // Forward substitution L y = rhs_row, then L^T x = y.
        for i in 0..n {
            let mut sum = row[i];
            for k in 0..i {
                sum -= chol[[i, k]] * x[k];
            }
            x[i] = sum / chol[[i, i]];
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in (i + 1)..n {
                sum -= chol[[k, i]] * x[k];
            }
            x[i] = sum / chol[[i, i]];
            solution[[row_idx, i]] = x[i];
        }
    }
    GramSolve {
        solution,
        escalated,
    }
}

/// Lower-triangular Cholesky factor of `g + damp*I`, or None when the
/// damped matrix is not positive definite.
fn cholesky(g: &Matrix, damp: f64) -> Option<Matrix> {
    let n = g.nrows();
    let mut l = Matrix::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g[[i, j]] + if i == j { damp } else { 0.0 };
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Hadamard product of the two Gram matrices `(m1^T m1) .* (m2^T m2)`,
/// the normal-equations matrix for one ALS mode solve.
pub(crate) fn gram_hadamard(m1: &Matrix, m2: &Matrix) -> Matrix {
    let g1 = m1.t().dot(m1);
    let g2 = m2.t().dot(m2);
    &g1 * &g2
}
