use crate::error::{Error, Result};
use crate::solvers::linalg::solve_gram_rows;
use crate::tensor::{DenseTensor3, FactorModel, Matrix};

/// Core consistency diagnostic of a CP fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corcondia {
    /// `100 * (1 - sum((G - superdiagonal)^2) / R)`; 100 for a perfect fit.
    pub score: f64,
    /// True when a factor Gram matrix was numerically rank-deficient and
    /// the pseudo-inverse needed extra damping.
    pub damped: bool,
}

/// Compute the least-squares Tucker core of `t` against the CP bases and
/// measure how far it is from the superdiagonal identity core.
///
/// The core is `G = X x1 A^+ x2 B^+ x3 C^+` with ridge-damped
/// pseudo-inverses, evaluated as three successive mode products.
pub fn corcondia(t: &DenseTensor3, f: &FactorModel) -> Result<Corcondia> {
    if f.dims() != t.dims() {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {:?} do not match tensor dims {:?}",
            f.dims(),
            t.dims()
        )));
    }
    let rank = f.rank;
    let mut damped = false;
    let mut pinv = |m: &Matrix| -> Matrix {
        // (M^T M + ridge I)^{-1} M^T computed row-wise: row p of the
        // pseudo-inverse solves gram * row = column p of M^T, i.e. we
        // feed M^T's rows (= M's columns) as right-hand sides.
        let gram = m.t().dot(m);
        let rhs = m.t().dot(&Matrix::eye(m.nrows()));
        let solved = solve_gram_rows(&gram, &rhs.t().to_owned());
        damped |= solved.escalated;
        solved.solution.t().to_owned()
    };
    let a_pinv = pinv(&f.a); // R x I
    let b_pinv = pinv(&f.b); // R x J
    let c_pinv = pinv(&f.c); // R x K

    let (i_dim, j_dim, k_dim) = t.dims();
    // y1[p, j, k] = sum_i a_pinv[p, i] * X[i, j, k]
    let mut y1 = vec![0.0; rank * j_dim * k_dim];
    for k in 0..k_dim {
        for j in 0..j_dim {
            for p in 0..rank {
                let mut acc = 0.0;
                for i in 0..i_dim {
                    acc += a_pinv[[p, i]] * t.get(i, j, k);
                }
                y1[p + rank * (j + j_dim * k)] = acc;
            }
        }
    }
    // y2[p, q, k] = sum_j b_pinv[q, j] * y1[p, j, k]
    let mut y2 = vec![0.0; rank * rank * k_dim];
    for k in 0..k_dim {
        for q in 0..rank {
            for p in 0..rank {
                let mut acc = 0.0;
                for j in 0..j_dim {
                    acc += b_pinv[[q, j]] * y1[p + rank * (j + j_dim * k)];
                }
                y2[p + rank * (q + rank * k)] = acc;
            }
        }
    }
    // core[p, q, s] = sum_k c_pinv[s, k] * y2[p, q, k]
    let mut deviation = 0.0;
    for s in 0..rank {
        for q in 0..rank {
            for p in 0..rank {
                let mut acc = 0.0;
                for k in 0..k_dim {
                    acc += c_pinv[[s, k]] * y2[p + rank * (q + rank * k)];
                }
                let target = if p == q && q == s { 1.0 } else { 0.0 };
                deviation += (acc - target) * (acc - target);
            }
        }
    }
    Ok(Corcondia {
        score: 100.0 * (1.0 - deviation / rank as f64),
        damped,
    })
}
