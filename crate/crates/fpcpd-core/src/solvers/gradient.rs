use crate::error::{Error, Result};
use crate::scheduler::Block;
use crate::tensor::{khatri_rao, unfold, DenseTensor3, FactorModel, Matrix};

/// Descent direction for the factor of `mode`: the residual unfolding
/// times the Khatri-Rao product of the other two factors, which is the
/// negative gradient of half the squared Frobenius loss.
///
/// With a `restriction`, only residual contributions from the block's
/// entries are included (the per-block loss term); the sum of restricted
/// gradients over a plan's blocks recovers the full gradient.
pub fn mode_gradient(
    t: &DenseTensor3,
    f: &FactorModel,
    mode: usize,
    restriction: Option<&Block>,
) -> Result<Matrix> {
    if f.dims() != t.dims() {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {:?} do not match tensor dims {:?}",
            f.dims(),
            t.dims()
        )));
    }
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidMode(mode));
    }

    match restriction {
        None => {
            let (kr, factor) = match mode {
                1 => (khatri_rao(&f.c, &f.b)?, &f.a),
                2 => (khatri_rao(&f.c, &f.a)?, &f.b),
                _ => (khatri_rao(&f.b, &f.a)?, &f.c),
            };
            let unfolded = unfold(t, mode)?;
            let residual = &unfolded - &factor.dot(&kr.t());
            Ok(residual.dot(&kr))
        }
        Some(block) => {
            let (i_dim, j_dim, k_dim) = t.dims();
            let rows = match mode {
                1 => i_dim,
                2 => j_dim,
                _ => k_dim,
            };
            let mut out = Matrix::zeros((rows, f.rank));
            for e in &block.entries {
                if e.i >= i_dim || e.j >= j_dim || e.k >= k_dim {
                    return Err(Error::InvalidInput(format!(
                        "block entry ({}, {}, {}) outside dims {:?}",
                        e.i,
                        e.j,
                        e.k,
                        t.dims()
                    )));
                }
                let mut est = 0.0;
                for r in 0..f.rank {
                    est += f.a[[e.i, r]] * f.b[[e.j, r]] * f.c[[e.k, r]];
                }
                let resid = t.get(e.i, e.j, e.k) - est;
                for r in 0..f.rank {
                    let (row, weight) = match mode {
                        1 => (e.i, f.b[[e.j, r]] * f.c[[e.k, r]]),
                        2 => (e.j, f.a[[e.i, r]] * f.c[[e.k, r]]),
                        _ => (e.k, f.a[[e.i, r]] * f.b[[e.j, r]]),
                    };
                    out[[row, r]] += resid * weight;
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{build_plan, Entry};
    use crate::tensor::{loss, reconstruct};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(dims: (usize, usize, usize), rank: usize, seed: u64) -> FactorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |r: usize| Matrix::from_shape_fn((r, rank), |_| rng.gen_range(-1.0..1.0));
        FactorModel::new(mat(dims.0), mat(dims.1), mat(dims.2)).unwrap()
    }

    fn random_tensor(dims: (usize, usize, usize), seed: u64) -> DenseTensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.0 * dims.1 * dims.2;
        DenseTensor3::new(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central finite differences of half the loss with respect to one
    /// factor entry; the independent oracle for the analytic gradient.
    fn numeric_half_loss_grad(
        t: &DenseTensor3,
        f: &FactorModel,
        mode: usize,
        row: usize,
        col: usize,
    ) -> f64 {
        let h = 1e-6;
        let mut probe = |delta: f64| {
            let mut g = f.clone();
            let m = match mode {
                1 => &mut g.a,
                2 => &mut g.b,
                _ => &mut g.c,
            };
            m[[row, col]] += delta;
            0.5 * loss(t, &g).unwrap()
        };
        (probe(h) - probe(-h)) / (2.0 * h)
    }

    #[test]
    fn exact_fit_gives_zero_gradient() {
        let f = random_model((3, 2, 4), 2, 1);
        let t = reconstruct(&f);
        for mode in 1..=3 {
            let g = mode_gradient(&t, &f, mode, None).unwrap();
            assert!(g.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn matches_finite_differences() {
        for seed in 0..5u64 {
            let dims = (2, 2, 2);
            let t = random_tensor(dims, seed);
            let f = random_model(dims, 2, seed + 100);
            for mode in 1..=3 {
                let g = mode_gradient(&t, &f, mode, None).unwrap();
                for row in 0..g.nrows() {
                    for col in 0..g.ncols() {
                        let numeric = numeric_half_loss_grad(&t, &f, mode, row, col);
                        // Analytic descent direction is the negated gradient.
                        let analytic = -g[[row, col]];
                        let scale = numeric.abs().max(1e-3);
                        assert!(
                            (numeric - analytic).abs() / scale < 1e-5,
                            "mode {mode} ({row},{col}): numeric {numeric} vs {analytic}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_entry_restriction_touches_one_row() {
        let dims = (3, 3, 3);
        let t = random_tensor(dims, 5);
        let f = random_model(dims, 2, 6);
        let block = Block {
            entries: vec![Entry { i: 1, j: 2, k: 0 }],
        };
        let g1 = mode_gradient(&t, &f, 1, Some(&block)).unwrap();
        for row in 0..3 {
            let zero = g1.row(row).iter().all(|v| *v == 0.0);
            assert_eq!(zero, row != 1);
        }
        let g2 = mode_gradient(&t, &f, 2, Some(&block)).unwrap();
        for row in 0..3 {
            assert_eq!(g2.row(row).iter().all(|v| *v == 0.0), row != 2);
        }
    }

    #[test]
    fn block_restricted_gradients_sum_to_full() {
        let dims = (3, 4, 2);
        let t = random_tensor(dims, 9);
        let f = random_model(dims, 3, 10);
        let plan = build_plan(dims).unwrap();
        for mode in 1..=3 {
            let full = mode_gradient(&t, &f, mode, None).unwrap();
            let mut acc = Matrix::zeros(full.raw_dim());
            for block in &plan.blocks {
                acc = acc + mode_gradient(&t, &f, mode, Some(block)).unwrap();
            }
            for (a, b) in acc.iter().zip(full.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_mode_and_dims() {
        let t = random_tensor((2, 2, 2), 1);
        let f = random_model((2, 2, 2), 2, 2);
        assert!(mode_gradient(&t, &f, 0, None).is_err());
        assert!(mode_gradient(&t, &f, 4, None).is_err());
        let wrong = random_model((2, 2, 3), 2, 3);
        assert!(mode_gradient(&t, &wrong, 1, None).is_err());
    }
}
