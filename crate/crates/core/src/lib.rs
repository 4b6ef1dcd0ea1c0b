//! Stability-constrained optimization with convex Lyapunov certificates.
//!
//! Differential-equation stability constraints are replaced by algebraic
//! ones: a convex Lyapunov function certifies a region around each
//! equilibrium, the minimum of the function over the region's boundary is
//! expressed through per-facet KKT conditions, and the fault-cleared state
//! is required to lie inside the certified sublevel set.

pub mod error;
pub mod expr;
pub mod linalg;
pub mod lure;
pub mod manifold;
pub mod nlp;
pub mod pendulum;
pub mod poly;
pub mod polytope;
pub mod power;
pub mod problem;
pub mod qp;
pub mod quadratic;
pub mod scalar;
pub mod scenario;
pub mod sco;
pub mod sdp;
pub mod sim;
pub mod sos;
pub mod trajectory;
pub mod vmin;

pub use error::{Error, Result};
pub use polytope::Polytope;
pub use quadratic::{
    eval_quadratic, eval_quadratic_gradient, LyapunovFunction, QuadraticCertificate,
};
pub use trajectory::Trajectory;
