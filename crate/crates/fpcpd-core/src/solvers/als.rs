use std::time::Instant;

use crate::error::Result;
use crate::solvers::config::{should_stop, SolverConfig, TraceRecord};
use crate::solvers::linalg::{gram_hadamard, solve_gram_rows};
use crate::solvers::init_factors;
use crate::tensor::{khatri_rao, loss, unfold, DenseTensor3};
use crate::FactorModel;

/// Alternating least squares: cycle closed-form solves of A, B, C until
/// the relative loss change drops below `cfg.tol` or `cfg.epochs` outer
/// iterations. Normal equations are ridge-damped, so collinear factors
/// degrade gracefully instead of crashing; the loss never increases from
/// one outer iteration to the next (up to the damping perturbation).
pub fn als_fit(t: &DenseTensor3, cfg: &SolverConfig) -> Result<(FactorModel, Vec<TraceRecord>)> {
    cfg.validate()?;
    let dims = t.dims();
    let mut f = init_factors(dims, cfg.rank, cfg.seed);

    let x1 = unfold(t, 1)?;
    let x2 = unfold(t, 2)?;
    let x3 = unfold(t, 3)?;

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut losses = Vec::new();
    for epoch in 0..cfg.epochs {
        let kr = khatri_rao(&f.c, &f.b)?;
        f.a = solve_gram_rows(&gram_hadamard(&f.c, &f.b), &x1.dot(&kr)).solution;

        let kr = khatri_rao(&f.c, &f.a)?;
        f.b = solve_gram_rows(&gram_hadamard(&f.c, &f.a), &x2.dot(&kr)).solution;

        let kr = khatri_rao(&f.b, &f.a)?;
        f.c = solve_gram_rows(&gram_hadamard(&f.b, &f.a), &x3.dot(&kr)).solution;

        let l = loss(t, &f)?;
        trace.push(TraceRecord {
            epoch,
            seconds: start.elapsed().as_secs_f64(),
            rmse: (l / t.len() as f64).sqrt(),
            loss: l,
        });
        losses.push(l);
        if should_stop(&losses, cfg.tol) {
            break;
        }
    }
    Ok((f, trace))
}
