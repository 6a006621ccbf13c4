//! The block-parallel stochastic solvers.
//!
//! One epoch walks the plan's blocks in order and updates each block's
//! entries concurrently. An entry `(i, j, k)` owns rows `A[i]`, `B[j]`,
//! `C[k]` plus their velocity rows for the duration of its update, which
//! the block construction makes conflict-free.
//!
//! Per entry, the update family is
//!
//! * velocity: `v := gamma * v + (1 - gamma) * g`, where `g` is the
//!   single-entry residual descent direction, evaluated at the velocity
//!   lookahead point `w + gamma * v` when `nag_lookahead` is set;
//! * weights: `w := w + eta * (v + epsilon) - eta * beta * sign(w)` with
//!   `epsilon ~ N(0, noise^2)` drawn per coefficient.
//!
//! `fpcpd_fit` uses the full update; `psgd_fit` drops the momentum
//! (`gamma = 0`, perturbation only) and `sgd_fit` additionally drops the
//! perturbation and shrinkage, leaving the plain per-entry SGD step.
//!
//! All randomness is derived from `(seed, epoch, block, slot)`, so a
//! given configuration reproduces bitwise regardless of thread count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scheduler::{run_block_parallel, BlockExecutor, BlockPlan, SharedRows, SharedSlice};
use crate::solvers::config::{should_stop, SolverConfig, TraceRecord};
use crate::solvers::init_factors;
use crate::tensor::{loss, slice_loss, DenseTensor3, FactorModel};

/// Loss blow-up factor (relative to the initial loss) treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;

/// Block-parallel SGD with Nesterov momentum, Gaussian perturbation and
/// L1 shrinkage.
pub fn fpcpd_fit(
    t: &DenseTensor3,
    cfg: &SolverConfig,
    plan: &BlockPlan,
) -> Result<(FactorModel, Vec<TraceRecord>)> {
    stochastic_fit(
        t,
        cfg,
        plan,
        cfg.gamma,
        cfg.noise,
        cfg.beta,
        cfg.nag_lookahead,
    )
}

/// Perturbed SGD baseline: the fpcpd loop with no velocity (`gamma = 0`),
/// keeping the Gaussian perturbation and shrinkage.
pub fn psgd_fit(
    t: &DenseTensor3,
    cfg: &SolverConfig,
    plan: &BlockPlan,
) -> Result<(FactorModel, Vec<TraceRecord>)> {
    stochastic_fit(t, cfg, plan, 0.0, cfg.noise, cfg.beta, false)
}

/// Plain SGD baseline: per-entry residual steps only.
pub fn sgd_fit(
    t: &DenseTensor3,
    cfg: &SolverConfig,
    plan: &BlockPlan,
) -> Result<(FactorModel, Vec<TraceRecord>)> {
    stochastic_fit(t, cfg, plan, 0.0, 0.0, 0.0, false)
}

fn stochastic_fit(
    t: &DenseTensor3,
    cfg: &SolverConfig,
    plan: &BlockPlan,
    gamma: f64,
    sigma: f64,
    beta: f64,
    lookahead: bool,
) -> Result<(FactorModel, Vec<TraceRecord>)> {
    cfg.validate()?;
    let dims = t.dims();
    if plan.dims != dims {
        return Err(Error::DimensionMismatch(format!(
            "plan dims {:?} do not match tensor dims {:?}",
            plan.dims, dims
        )));
    }

    let mut f = init_factors(dims, cfg.rank, cfg.seed);
    let exec = BlockExecutor::new(cfg.threads);

    let initial_loss = loss(t, &f)?;
    let divergence_limit = DIVERGENCE_FACTOR * initial_loss.max(f64::MIN_POSITIVE);

    let rank = cfg.rank;
    let values = t.values();
    let (i_dim, j_dim, _) = dims;
    let mut slice_buf: Vec<f64> = Vec::new();
    let mut order: Vec<usize> = (0..plan.blocks.len()).collect();

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut losses = Vec::new();
    for epoch in 0..cfg.epochs {
        let eta = cfg.eta / (1.0 + epoch as f64 * cfg.decay);
        if !cfg.deterministic {
            use rand::seq::SliceRandom;
            let mut rng =
                ChaCha8Rng::seed_from_u64(entry_seed(cfg.seed, epoch as u64, u64::MAX, 0));
            order.shuffle(&mut rng);
        }

        {
            let rows_a = SharedRows::new(&mut f.a);
            let rows_b = SharedRows::new(&mut f.b);
            let rows_c = SharedRows::new(&mut f.c);
            let vel_a = SharedRows::new(&mut f.vel_a);
            let vel_b = SharedRows::new(&mut f.vel_b);
            let vel_c = SharedRows::new(&mut f.vel_c);

            for &b_idx in &order {
                let block = &plan.blocks[b_idx];
                run_block_parallel(&exec, block, |slot, e| {
                    let x = values[e.i + i_dim * (e.j + j_dim * e.k)];
                    // Safety: entries of one block have pairwise distinct
                    // i, j and k, so these six rows are not aliased by any
                    // concurrent update in the same block.
                    let (a, b, c, va, vb, vc) = unsafe {
                        (
                            rows_a.row_mut(e.i),
                            rows_b.row_mut(e.j),
                            rows_c.row_mut(e.k),
                            vel_a.row_mut(e.i),
                            vel_b.row_mut(e.j),
                            vel_c.row_mut(e.k),
                        )
                    };
                    if sigma > 0.0 {
                        let mut rng = ChaCha8Rng::seed_from_u64(entry_seed(
                            cfg.seed,
                            epoch as u64,
                            b_idx as u64,
                            slot as u64,
                        ));
                        let normal = Normal::new(0.0, sigma).expect("sigma validated");
                        update_entry(x, rank, a, b, c, va, vb, vc, eta, gamma, beta, lookahead, || {
                            normal.sample(&mut rng)
                        });
                    } else {
                        update_entry(
                            x, rank, a, b, c, va, vb, vc, eta, gamma, beta, lookahead,
                            || 0.0,
                        );
                    }
                });
            }
        }

        let l = parallel_loss(&exec, t, &f, &mut slice_buf);
        if !l.is_finite() || l > divergence_limit {
            return Err(Error::Diverged {
                epoch,
                eta,
                detail: format!("loss {l} exceeded {divergence_limit} (initial {initial_loss})"),
            });
        }
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

/// One entry's update: simultaneous residual descent on the three factor
/// rows, with velocity, perturbation and shrinkage. `noise` is invoked
/// three times per rank component, in A, B, C order.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn update_entry<N: FnMut() -> f64>(
    x: f64,
    rank: usize,
    a: &mut [f64],
    b: &mut [f64],
    c: &mut [f64],
    va: &mut [f64],
    vb: &mut [f64],
    vc: &mut [f64],
    eta: f64,
    gamma: f64,
    beta: f64,
    lookahead: bool,
    mut noise: N,
) {
    let lam = if lookahead { gamma } else { 0.0 };
    let mut est = 0.0;
    for r in 0..rank {
        let la = a[r] + lam * va[r];
        let lb = b[r] + lam * vb[r];
        let lc = c[r] + lam * vc[r];
        est += la * lb * lc;
    }
    let resid = x - est;
    let keep = 1.0 - gamma;
    for r in 0..rank {
        let la = a[r] + lam * va[r];
        let lb = b[r] + lam * vb[r];
        let lc = c[r] + lam * vc[r];
        va[r] = gamma * va[r] + keep * resid * lb * lc;
        vb[r] = gamma * vb[r] + keep * resid * la * lc;
        vc[r] = gamma * vc[r] + keep * resid * la * lb;
        a[r] += eta * (va[r] + noise()) - eta * beta * sign(a[r]);
        b[r] += eta * (vb[r] + noise()) - eta * beta * sign(b[r]);
        c[r] += eta * (vc[r] + noise()) - eta * beta * sign(c[r]);
    }
}

/// L1 subgradient sign with `sign(0) = 0`.
#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Counter-style seed for the Gaussian draws of one entry update; block
/// `u64::MAX` is reserved for the epoch's block-order shuffle.
fn entry_seed(seed: u64, epoch: u64, block: u64, slot: u64) -> u64 {
    let mut h = mix64(seed ^ 0xD6E8_FEB8_6659_FD93);
    h = mix64(h ^ epoch);
    h = mix64(h ^ block);
    mix64(h ^ slot)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loss evaluated with one partial sum per mode-3 slice. Slices are
/// computed in parallel but summed in index order, so the value does not
/// depend on the thread count.
fn parallel_loss(
    exec: &BlockExecutor,
    t: &DenseTensor3,
    f: &FactorModel,
    buf: &mut Vec<f64>,
) -> f64 {
    let (i_dim, j_dim, k_dim) = t.dims();
    buf.clear();
    buf.resize(k_dim, 0.0);
    {
        let partials = SharedSlice::new(buf);
        exec.run(k_dim, |k| {
            let v = slice_loss(t, f, k, i_dim, j_dim);
            // Safety: slot k is written by exactly one item.
            unsafe { partials.set(k, v) };
        });
    }
    buf.iter().sum()
}
