//! Exact sparse attention via half-space range reporting.
//!
//! The crate accelerates two attention variants over a large key/value cache:
//!
//! * **ReLU^α attention** — every attention entry below the activation
//!   threshold `b` is exactly zero, so reporting the keys inside the
//!   half-space `{x : ⟨q, x⟩/√d − b ≥ 0}` and touching only those keys
//!   reproduces the dense result bit for bit.
//! * **Top-r Softmax attention** — the softmax is restricted to the `r` keys
//!   with the largest inner products, with a computable error bound
//!   `(2ᾱ/α)·‖V‖∞` against the dense result.
//!
//! Modules:
//!
//! * [`tensor`] — row-major `f64` matrices, deterministic Gaussian sampling,
//!   vector/matrix norms.
//! * [`fmat`] — the `FMAT1` binary matrix file format used by the CLI.
//! * [`rng`] — the SplitMix64 generator and Box–Muller Gaussian stream.
//! * [`hsr`] — the half-space reporter with linear-scan and spatial-tree
//!   backends, plus top-r extreme queries.
//! * [`attention`] — dense and reporter-accelerated attention kernels.
//! * [`generation`] — KV-cache autoregressive generation; appended keys are
//!   attended densely and never inserted into the reporter.
//! * [`analysis`] — threshold calibration, sparsity statistics against the
//!   `2·n^{4/5}` bound, massive-activation checks, softmax error bounds.
//! * [`synth`] — seeded synthetic instance generators shared by the
//!   experiment CLI and the test suites.

pub mod analysis;
pub mod attention;
pub mod error;
pub mod fmat;
pub mod generation;
pub mod hsr;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::DenseMatrix;
