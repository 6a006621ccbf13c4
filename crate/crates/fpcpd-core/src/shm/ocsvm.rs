//! One-class SVM with a Gaussian kernel, trained by pairwise coordinate
//! descent on the dual:
//!
//! minimize `0.5 * a^T K a` subject to `sum(a) = 1`, `0 <= a_i <= 1/(nu n)`.
//!
//! The most-violating pair is optimized in closed form each step until
//! the KKT gap drops below tolerance. The kernel width defaults to the
//! median of the pairwise training distances when not supplied.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// KKT gap at which training stops.
const KKT_TOL: f64 = 1e-6;
/// Alphas below this fraction of the box bound are dropped from the model.
const SV_CUTOFF: f64 = 1e-10;

/// Trained one-class model over factor-space rows.
#[derive(Debug, Clone)]
pub struct OcsvmModel {
    support_vectors: Matrix,
    alphas: Vec<f64>,
    rho: f64,
    sigma: f64,
    nu: f64,
    /// True when the kernel width had to be floored because the training
    /// rows were (nearly) identical.
    pub degenerate_sigma: bool,
}

impl OcsvmModel {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn support_count(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Signed decision value `sum_s alpha_s k(sv_s, row) - rho`; negative
    /// means anomalous, and more negative tracks greater deviation from
    /// the training data.
    pub fn decision(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.support_vectors.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected a row of length {}, got {}",
                self.support_vectors.ncols(),
                row.len()
            )));
        }
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut sum = 0.0;
        for (sv, alpha) in self.support_vectors.rows().into_iter().zip(&self.alphas) {
            let mut d2 = 0.0;
            for (a, b) in sv.iter().zip(row) {
                let d = a - b;
                d2 += d * d;
            }
            sum += alpha * (-d2 * inv).exp();
        }
        Ok(sum - self.rho)
    }
}

/// Free-function form of [`OcsvmModel::decision`].
pub fn ocsvm_decision(model: &OcsvmModel, row: &[f64]) -> Result<f64> {
    model.decision(row)
}

/// Train on the rows of `rows` (one training point per row). `nu` bounds
/// the fraction of training points scored anomalous; `sigma` overrides
/// the median-distance kernel width.
pub fn ocsvm_train(rows: &Matrix, nu: f64, sigma: Option<f64>) -> Result<OcsvmModel> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "one-class training needs at least 2 rows, got {n}"
        )));
    }
    if !(0.0 < nu && nu < 1.0) {
        return Err(Error::InvalidConfig(format!("nu must be in (0, 1), got {nu}")));
    }
    if let Some(v) = rows.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "training rows contain non-finite value {v}"
        )));
    }

    // Pairwise squared distances drive both the median heuristic and the
    // kernel matrix.
    let mut dist2 = Matrix::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for (a, b) in rows.row(i).iter().zip(rows.row(j).iter()) {
                let d = a - b;
                d2 += d * d;
            }
            dist2[[i, j]] = d2;
            dist2[[j, i]] = d2;
        }
    }

    let mut degenerate_sigma = false;
    let sigma = match sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive and finite, got {s}"
            )))
        }
        None => {
            let mut dists: Vec<f64> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| dist2[[i, j]].sqrt())
                .filter(|d| *d > 0.0)
                .collect();
            if dists.is_empty() {
                degenerate_sigma = true;
                1.0
            } else {
                dists.sort_by(|a, b| a.total_cmp(b));
                let median = dists[dists.len() / 2];
                if median < 1e-12 {
                    degenerate_sigma = true;
                    1e-6
                } else {
                    median
                }
            }
        }
    };

    let inv = 1.0 / (2.0 * sigma * sigma);
    let kernel = Matrix::from_shape_fn((n, n), |(i, j)| (-dist2[[i, j]] * inv).exp());

    // Feasible start: uniform weights satisfy both constraints.
    let cap = 1.0 / (nu * n as f64);
    let mut alpha = vec![1.0 / n as f64; n];
    let mut grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| kernel[[i, j]] * alpha[j]).sum())
        .collect();

    let max_steps = 400_000usize.max(200 * n);
    for _ in 0..max_steps {
        // Most violating pair: mass can move from the highest gradient
        // with alpha > 0 to the lowest gradient with alpha < cap.
        let mut hi = None;
        let mut lo = None;
        for idx in 0..n {
            if alpha[idx] > 0.0 && hi.map_or(true, |h: usize| grad[idx] > grad[h]) {
                hi = Some(idx);
            }
            if alpha[idx] < cap && lo.map_or(true, |l: usize| grad[idx] < grad[l]) {
                lo = Some(idx);
            }
        }
        let (Some(i), Some(j)) = (hi, lo) else { break };
        let gap = grad[i] - grad[j];
        if gap < KKT_TOL {
            break;
        }
        let curvature = kernel[[i, i]] + kernel[[j, j]] - 2.0 * kernel[[i, j]];
        let max_step = alpha[i].min(cap - alpha[j]);
        let step = if curvature > 1e-15 {
            (gap / curvature).min(max_step)
        } else {
            max_step
        };
        if step <= 0.0 {
            break;
        }
        alpha[i] -= step;
        alpha[j] += step;
        for l in 0..n {
            grad[l] += step * (kernel[[l, j]] - kernel[[l, i]]);
        }
    }

    // Offset from interior points (0 < alpha < cap), midpoint of the
    // active-bound gradients when none are interior.
    let margin = cap * 1e-6;
    let interior: Vec<usize> = (0..n)
        .filter(|&i| alpha[i] > margin && alpha[i] < cap - margin)
        .collect();
    let rho = if interior.is_empty() {
        let upper = (0..n)
            .filter(|&i| alpha[i] <= margin)
            .map(|i| grad[i])
            .fold(f64::INFINITY, f64::min);
        let lower = (0..n)
            .filter(|&i| alpha[i] >= cap - margin)
            .map(|i| grad[i])
            .fold(f64::NEG_INFINITY, f64::max);
        match (upper.is_finite(), lower.is_finite()) {
            (true, true) => 0.5 * (upper + lower),
            (true, false) => upper,
            (false, true) => lower,
            (false, false) => grad.iter().sum::<f64>() / n as f64,
        }
    } else {
        interior.iter().map(|&i| grad[i]).sum::<f64>() / interior.len() as f64
    };

    let kept: Vec<usize> = (0..n).filter(|&i| alpha[i] > SV_CUTOFF * cap).collect();
    let mut support_vectors = Matrix::zeros((kept.len(), rows.ncols()));
    let mut alphas = Vec::with_capacity(kept.len());
    for (out_row, &i) in kept.iter().enumerate() {
        support_vectors.row_mut(out_row).assign(&rows.row(i));
        alphas.push(alpha[i]);
    }

    Ok(OcsvmModel {
        support_vectors,
        alphas,
        rho,
        sigma,
        nu,
        degenerate_sigma,
    })
}
