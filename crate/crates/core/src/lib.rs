//! Augmented Lagrangian method (ALM) for second-order cone programs
//!
//! ```text
//! minimize f(x)  subject to  Φ(x) ∈ Q,   Q = {(y0, yr) : ‖yr‖ ≤ y0} ⊂ R^{m+1}
//! ```
//!
//! together with the second-order machinery used to analyse it: exact
//! Lorentz-cone projections and their Jacobians, the KKT residual, second
//! subderivatives of the augmented Lagrangian, SOSC and dual-qualification
//! certificates, and empirical diagnostics for error bounds, growth and
//! linear convergence rates.
//!
//! Module map:
//!
//! - [`cone`]: geometry of `Q` (membership, projections, Jacobians).
//! - [`model`]: problem oracles, built-in problems, planted generator, JSON loader.
//! - [`lagrangian`]: `L`, the augmented Lagrangian, its derivatives and the residual.
//! - [`variational`]: critical cones, second subderivatives, SOSC, dual qualification.
//! - [`alm`]: the outer/inner ALM driver.
//! - [`diagnostics`]: error-bound, growth, solvability and rate estimates.
//! - [`cli`]: command-line front end used by the `socp-alm` binary.

pub mod alm;
pub mod cli;
pub mod cone;
pub mod diagnostics;
mod error;
pub mod lagrangian;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod variational;

pub use error::{Error, Result};

pub use alm::{AlmConfig, AlmStatus, AlmTrace, EpsRule, InnerConfig};
pub use cone::{ConeRegion, ConeVec};
pub use model::{KktPoint, SocpProblem};
