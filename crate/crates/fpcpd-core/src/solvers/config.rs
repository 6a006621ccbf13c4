use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by all solvers.
///
/// Serializes to a flat key-value file (TOML syntax). Keys: `rank`,
/// `eta`, `gamma`, `noise`, `beta`, `epochs`, `tol`, `seed`, `threads`,
/// `deterministic`, plus `decay` (learning-rate schedule), `nag_lookahead`
/// (evaluate block gradients at the velocity lookahead point) and
/// `batch_fraction` (SALS sample size per mode solve).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of rank-one components R.
    pub rank: usize,
    /// Initial learning rate.
    pub eta: f64,
    /// Learning-rate decay: the rate at epoch t is `eta / (1 + t * decay)`.
    pub decay: f64,
    /// Momentum friction, `0 <= gamma < 1`.
    pub gamma: f64,
    /// Standard deviation of the Gaussian gradient perturbation.
    pub noise: f64,
    /// L1 shrinkage weight.
    pub beta: f64,
    /// Maximum epochs (full passes over the tensor).
    pub epochs: usize,
    /// Relative loss-change stopping tolerance.
    pub tol: f64,
    pub seed: u64,
    /// Upper bound on worker threads for block-parallel solvers.
    pub threads: usize,
    /// Fixed block order. When false, block order is reshuffled each
    /// epoch from the seed; either way runs are reproducible and results
    /// do not depend on `threads`.
    pub deterministic: bool,
    /// Evaluate gradients at `w + gamma * velocity` instead of `w`.
    pub nag_lookahead: bool,
    /// Fraction of tensor entries sampled per SALS mode solve.
    pub batch_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank: 5,
            eta: 1e-3,
            decay: 0.0,
            gamma: 0.9,
            noise: 1e-4,
            beta: 0.0,
            epochs: 200,
            tol: 1e-6,
            seed: 42,
            threads: 1,
            deterministic: true,
            nag_lookahead: true,
            batch_fraction: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be >= 1".into()));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.noise < 0.0 || self.beta < 0.0 || self.decay < 0.0 {
            return Err(Error::InvalidConfig(
                "noise, beta and decay must be nonnegative".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.tol < 0.0 {
            return Err(Error::InvalidConfig("tol must be nonnegative".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.batch_fraction) || self.batch_fraction == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "batch_fraction must be in (0, 1], got {}",
                self.batch_fraction
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        // Flat struct with only scalar fields; serialization cannot fail.
        toml::to_string(self).expect("serialize flat config")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("bad config file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One per-epoch telemetry sample of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 0-based epoch index.
    pub epoch: usize,
    /// Wall-clock seconds since the fit started, nondecreasing.
    pub seconds: f64,
    pub rmse: f64,
    pub loss: f64,
}

/// Write a trace as CSV with header `epoch,seconds,rmse,loss`.
pub fn write_trace_csv<W: Write>(w: &mut W, trace: &[TraceRecord]) -> Result<()> {
    writeln!(w, "epoch,seconds,rmse,loss")?;
    for rec in trace {
        writeln!(
            w,
            "{},{:.6},{:.17e},{:.17e}",
            rec.epoch, rec.seconds, rec.rmse, rec.loss
        )?;
    }
    Ok(())
}

/// Parse a trace CSV produced by [`write_trace_csv`].
pub fn read_trace_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "epoch,seconds,rmse,loss" {
                return Err(Error::Parse {
                    line: 1,
                    detail: format!("unexpected trace header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                detail: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                detail: format!("bad number {s:?}"),
            })
        };
        out.push(TraceRecord {
            epoch: fields[0].trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                detail: format!("bad epoch {:?}", fields[0]),
            })?,
            seconds: parse(fields[1])?,
            rmse: parse(fields[2])?,
            loss: parse(fields[3])?,
        });
    }
    Ok(out)
}

/// Stopping rule shared by the iterative solvers: stop once the relative
/// loss change over the last `STOP_WINDOW` epochs falls below `tol`.
pub(crate) const STOP_WINDOW: usize = 3;

pub(crate) fn should_stop(losses: &[f64], tol: f64) -> bool {
    if losses.len() <= STOP_WINDOW {
        return false;
    }
    let cur = losses[losses.len() - 1];
    let past = losses[losses.len() - 1 - STOP_WINDOW];
    let denom = past.abs().max(f64::MIN_POSITIVE);
    (past - cur).abs() / denom < tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = SolverConfig::default();
        cfg.gamma = 1.0;
        assert!(cfg.validate().is_err());
        cfg = SolverConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg = SolverConfig {
            rank: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg = SolverConfig {
            threads: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_roundtrip_and_partial_file() {
        let cfg = SolverConfig {
            rank: 7,
            eta: 0.01,
            seed: 9,
            ..Default::default()
        };
        let text = cfg.to_toml();
        assert_eq!(SolverConfig::from_toml(&text).unwrap(), cfg);

        let partial = SolverConfig::from_toml("rank = 3\neta = 0.5\n").unwrap();
        assert_eq!(partial.rank, 3);
        assert_eq!(partial.eta, 0.5);
        assert_eq!(partial.epochs, SolverConfig::default().epochs);

        assert!(SolverConfig::from_toml("rank = 3\nbogus_key = 1\n").is_err());
    }

    #[test]
    fn trace_csv_roundtrip() {
        let trace = vec![
            TraceRecord {
                epoch: 0,
                seconds: 0.25,
                rmse: 0.5,
                loss: 6.75,
            },
            TraceRecord {
                epoch: 1,
                seconds: 0.5,
                rmse: 0.25,
                loss: 1.6875,
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,seconds,rmse,loss\n"));
        let back = read_trace_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].epoch, 0);
        assert_eq!(back[1].rmse, 0.25);
        assert_eq!(back[1].loss, 1.6875);
    }

    #[test]
    fn stop_rule_uses_three_epoch_window() {
        // Not enough history yet.
        assert!(!should_stop(&[1.0, 1.0, 1.0], 1e-6));
        // Flat over the window -> stop.
        assert!(should_stop(&[5.0, 1.0, 1.0, 1.0, 1.0], 1e-6));
        // Still moving -> keep going.
        assert!(!should_stop(&[5.0, 4.0, 3.0, 2.0, 1.0], 1e-6));
    }
}
