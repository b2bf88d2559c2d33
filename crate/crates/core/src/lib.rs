//! Error accounting for Gaussian one-way quantum computation.
//!
//! Every computation scheme built from small continuous-variable cluster
//! states is modelled as an exact pair: a symplectic transformation acting on
//! the input quadratures, and a linear *error map* from the squeezed ancilla
//! quadratures to the additive output error. Variances follow from the error
//! map because the ancillas are independent and share one squeeze variance.
//!
//! Modules:
//!
//! - [`symplectic`]: rotations, squeezes, the measurement-induced gate and the
//!   Euler decomposition `R(alpha) diag(s, 1/s) R(beta)`.
//! - [`schemes`]: four-node, two-node, pair, rotator and CZ realizations.
//! - [`analysis`]: phase matching, L-infinity comparison, error surfaces.
//! - [`montecarlo`]: an independent sampling oracle for every error map.
//! - [`compiler`]: lowering of Gaussian circuits onto two-node clusters with
//!   rotators and a beam-splitter CZ, with an exact error budget.
//! - [`formats`]: JSON circuit/plan files and the scan CSV.
//!
//! Quadrature ordering is `(x_1, ..., x_n, y_1, ..., y_n)` everywhere, with
//! `[x, y] = i/2` so the vacuum variance is `1/4`.

pub mod analysis;
pub mod compiler;
pub mod error;
pub mod formats;
pub mod montecarlo;
pub mod schemes;
pub mod symplectic;

pub use error::{Error, Result};
