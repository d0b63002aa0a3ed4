//! Modified Patankar-Runge-Kutta (MPRK) integrators for conservative
//! production-destruction systems, with unconditionally positive and
//! conservative dense output.
//!
//! * [`pds`]: production-destruction systems and the built-in test problems.
//! * [`linalg`]: Patankar mass matrices and their dense solves.
//! * [`schemes`]: MPE, MPRK22(alpha), MPRK43(alpha, beta) and the fourth-order MPRK.
//! * [`dense`]: dense-output formulae of orders 1 to 3.
//! * [`analysis`]: oracles, convergence studies and the positivity demonstration.
//! * [`cli`]: the `mprk` command-line front end.
//! * [`plot`]: static SVG plots for the CLI.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod pds;
pub mod plot;
pub mod schemes;

pub use error::{Error, Result};
