//! The decomposition solvers: ALS, the block-parallel SGD family
//! (FP-CPD, PSGD, plain SGD), the SGD/ALS hybrid SALS, and the CORCONDIA
//! rank diagnostic. All solvers share [`SolverConfig`], emit one
//! [`TraceRecord`] per epoch and initialize factors identically from the
//! config seed, so runs with the same seed are directly comparable.

pub mod als;
pub mod config;
pub mod corcondia;
pub mod gradient;
pub(crate) mod linalg;
pub mod sals;
pub mod sgd;

pub use als::als_fit;
pub use config::{read_trace_csv, write_trace_csv, SolverConfig, TraceRecord};
pub use corcondia::{corcondia, Corcondia};
pub use gradient::mode_gradient;
pub use sals::sals_fit;
pub use sgd::{fpcpd_fit, psgd_fit, sgd_fit};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::build_plan;
use crate::tensor::{DenseTensor3, FactorModel, Matrix};

/// The implemented decomposition algorithms, for dispatch by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Als,
    #[serde(rename = "fpcpd")]
    FpCpd,
    Psgd,
    Sals,
    Sgd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Als,
        SolverKind::FpCpd,
        SolverKind::Psgd,
        SolverKind::Sals,
        SolverKind::Sgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Als => "als",
            SolverKind::FpCpd => "fpcpd",
            SolverKind::Psgd => "psgd",
            SolverKind::Sals => "sals",
            SolverKind::Sgd => "sgd",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "als" => Ok(SolverKind::Als),
            "fpcpd" | "fp-cpd" => Ok(SolverKind::FpCpd),
            "psgd" => Ok(SolverKind::Psgd),
            "sals" => Ok(SolverKind::Sals),
            "sgd" => Ok(SolverKind::Sgd),
            other => Err(Error::InvalidConfig(format!("unknown solver {other:?}"))),
        }
    }
}

/// Fit `t` with the named solver; block-parallel solvers build their
/// plan internally.
pub fn fit_solver(
    kind: SolverKind,
    t: &DenseTensor3,
    cfg: &SolverConfig,
) -> Result<(FactorModel, Vec<TraceRecord>)> {
    match kind {
        SolverKind::Als => als_fit(t, cfg),
        SolverKind::Sals => sals_fit(t, cfg),
        SolverKind::FpCpd => fpcpd_fit(t, cfg, &build_plan(t.dims())?),
        SolverKind::Psgd => psgd_fit(t, cfg, &build_plan(t.dims())?),
        SolverKind::Sgd => sgd_fit(t, cfg, &build_plan(t.dims())?),
    }
}

/// Seeded factor initialization shared by every solver: entries i.i.d.
/// uniform on `[0, 1)`, filled row-major through A, B, C in that order.
/// Velocities start at zero.
pub fn init_factors(dims: (usize, usize, usize), rank: usize, seed: u64) -> FactorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniform_factors(dims, rank, &mut rng)
}

pub(crate) fn uniform_factors(
    dims: (usize, usize, usize),
    rank: usize,
    rng: &mut ChaCha8Rng,
) -> FactorModel {
    let mut mat = |rows: usize| Matrix::from_shape_fn((rows, rank), |_| rng.gen::<f64>());
    let a = mat(dims.0);
    let b = mat(dims.1);
    let c = mat(dims.2);
    FactorModel::new(a, b, c).expect("uniform factors are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_per_seed() {
        let f1 = init_factors((3, 4, 5), 2, 9);
        let f2 = init_factors((3, 4, 5), 2, 9);
        assert_eq!(f1.a, f2.a);
        assert_eq!(f1.b, f2.b);
        assert_eq!(f1.c, f2.c);
        let f3 = init_factors((3, 4, 5), 2, 10);
        assert_ne!(f1.a, f3.a);
        assert!(f1.vel_a.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_entries_are_unit_uniform() {
        let f = init_factors((20, 20, 20), 4, 1);
        assert!(f.a.iter().all(|v| (0.0..1.0).contains(v)));
        let mean = f.a.iter().sum::<f64>() / f.a.len() as f64;
        assert!((mean - 0.5).abs() < 0.1);
    }
}
