//! Robust energy-efficiency maximization for multi-functional-RIS-aided
//! multiuser MISO downlinks under bounded and statistical CSI error.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex matrix/vector kernel (Kronecker, vectorization,
//!   Hermitian eigensolves, complex-to-real embeddings).
//! - [`scenario`]: reproducible scenario drops (geometry, Rician channels,
//!   uncertainty parameterizations) and config ingestion.
//! - [`system`]: evaluation of candidate solutions (SINR, rates, total power,
//!   energy efficiency, empirical robustness probes).
//! - [`conic`]: a language-neutral conic-program container with a bundled
//!   primal-dual interior-point backend (linear, SOC, exponential-cone via
//!   piecewise-SOC, Hermitian-PSD blocks).
//! - [`robustify`]: S-procedure / sign-definiteness / Bernstein transforms and
//!   all LMI block constructions used by the solvers.
//! - [`solver_bounded`]: alternating optimization for the bounded error model
//!   (SCA beamforming subproblem + PCCP surface subproblem).
//! - [`solver_statistical`]: alternating optimization for the statistical
//!   error model (lifted SDR subproblems with SROCR rank-one tightening).

pub mod conic;
pub mod linalg;
pub mod robustify;
pub mod scenario;
pub mod solver_bounded;
pub mod solver_statistical;
pub mod system;

pub use linalg::{CMatrix, CVector, C64};
