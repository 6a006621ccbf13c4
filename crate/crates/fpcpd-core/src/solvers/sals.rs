use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::solvers::config::{should_stop, SolverConfig, TraceRecord};
use crate::solvers::init_factors;
use crate::solvers::linalg::solve_gram_rows;
use crate::tensor::{loss, DenseTensor3, Matrix};
use crate::FactorModel;

/// SGD/ALS hybrid baseline: each epoch cycles the three modes, and each
/// mode solve draws a fresh sample of `batch_fraction * I*J*K` entries
/// and solves every factor row in closed form against the sampled
/// residuals. With `batch_fraction = 1.0` an epoch reduces to one ALS
/// outer iteration. Rows that receive no sampled entries keep their
/// previous values.
pub fn sals_fit(t: &DenseTensor3, cfg: &SolverConfig) -> Result<(FactorModel, Vec<TraceRecord>)> {
    cfg.validate()?;
    let dims = t.dims();
    let (i_dim, j_dim, k_dim) = dims;
    let total = i_dim * j_dim * k_dim;
    let batch = ((cfg.batch_fraction * total as f64).ceil() as usize).clamp(1, total);

    let mut f = init_factors(dims, cfg.rank, cfg.seed);
    let rank = cfg.rank;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5A15_5A15_5A15_5A15);

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut losses = Vec::new();
    for epoch in 0..cfg.epochs {
        for mode in 1..=3 {
            let rows = match mode {
                1 => i_dim,
                2 => j_dim,
                _ => k_dim,
            };
            // Per-row normal equations accumulated over the sample.
            let mut grams = vec![Matrix::zeros((rank, rank)); rows];
            let mut rhs = Matrix::zeros((rows, rank));
            let mut touched = vec![false; rows];
            let mut kappa = vec![0.0; rank];

            let sample = rand::seq::index::sample(&mut rng, total, batch);
            for flat in sample {
                let i = flat % i_dim;
                let j = (flat / i_dim) % j_dim;
                let k = flat / (i_dim * j_dim);
                let row = match mode {
                    1 => i,
                    2 => j,
                    _ => k,
                };
                for (r, slot) in kappa.iter_mut().enumerate() {
                    *slot = match mode {
                        1 => f.b[[j, r]] * f.c[[k, r]],
                        2 => f.a[[i, r]] * f.c[[k, r]],
                        _ => f.a[[i, r]] * f.b[[j, r]],
                    };
                }
                let x = t.get(i, j, k);
                let gram = &mut grams[row];
                for p in 0..rank {
                    rhs[[row, p]] += x * kappa[p];
                    for q in 0..rank {
                        gram[[p, q]] += kappa[p] * kappa[q];
                    }
                }
                touched[row] = true;
            }

            let factor = match mode {
                1 => &mut f.a,
                2 => &mut f.b,
                _ => &mut f.c,
            };
            for row in 0..rows {
                if !touched[row] {
                    continue;
                }
                let rhs_row = rhs.row(row).insert_axis(ndarray::Axis(0)).to_owned();
                let solved = solve_gram_rows(&grams[row], &rhs_row);
                for r in 0..rank {
                    factor[[row, r]] = solved.solution[[0, r]];
                }
            }
        }

        let l = loss(t, &f)?;
        trace.push(TraceRecord {
            epoch,
            seconds: start.elapsed().as_secs_f64(),
            rmse: (l / total as f64).sqrt(),
            loss: l,
        });
        losses.push(l);
        if should_stop(&losses, cfg.tol) {
            break;
        }
    }
    Ok((f, trace))
}
