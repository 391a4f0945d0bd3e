//! Numerics for time-periodic Oseen and Navier-Stokes flow past a translating body.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`]: wake function, `Ein`/`E1`, the `sqrt(-mu)` branch and the constant `C4`.
//! * [`steady`]: the steady Oseen tensor, the steady vorticity kernel and bound checkers.
//! * [`periodic`]: Helmholtz-with-drift kernels, the purely periodic vorticity kernel,
//!   per-mode velocity kernels, time norms and multiplier diagnostics.
//! * [`quadrature`]: singular convolution quadrature and the convolution-lemma verifiers.
//! * [`solver`]: spectral linear and Picard solves on a periodic box, field dumps and
//!   far-field evaluation through representation formulas.
//! * [`harness`]: ray sampling, decay fits, weighted norms and the kernel surrogate.

pub mod error;
pub mod geom;
pub mod harness;
pub mod periodic;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod steady;

pub use error::{Error, Result};
pub use geom::{CMat3, CVec3, Mat3, Tensor333, Vec3};
pub use special::FlowParams;
