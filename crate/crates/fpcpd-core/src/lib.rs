//! Block-parallel CP tensor decomposition and a vibration-based anomaly
//! detection pipeline.
//!
//! The crate has four layers:
//!
//! * [`tensor`] — dense order-3 tensors, unfolding, Khatri-Rao products,
//!   CP reconstruction and loss evaluation.
//! * [`scheduler`] — partition of the index grid into conflict-free
//!   blocks plus the executor that updates one block concurrently.
//! * [`solvers`] — ALS, plain/perturbed SGD, SALS and the accelerated
//!   block-parallel FP-CPD solver, with per-epoch convergence traces and
//!   the CORCONDIA rank diagnostic.
//! * [`shm`] — the downstream pipeline: FFT feature extraction, one-class
//!   SVM detection on the temporal factor, k-NN localization on the
//!   location factor, and bootstrap evaluation.
//!
//! [`synth`] generates the seeded synthetic datasets used by benchmarks
//! and tests.

pub mod error;
pub mod scheduler;
pub mod shm;
pub mod solvers;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{DenseTensor3, FactorModel, Matrix};
