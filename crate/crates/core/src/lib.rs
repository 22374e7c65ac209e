//! Periodic orbits of coupled singular-degenerate parabolic systems with
//! delayed nonlocal reaction terms.
//!
//! The crate covers the continuous problem description, a finite-difference
//! discretization on intervals and rectangles, the first eigenpair of the
//! Dirichlet r-Laplacian, the delayed kernel integrals, a linearly implicit
//! time stepper, a period-map fixed-point solver with continuation in the
//! regularization parameter, closed-form a priori bound constants, and a set
//! of independent verification checks.

pub mod bounds;
pub mod eigen;
pub mod evolution;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod nonlocal;
pub mod periodic;
pub mod verify;

pub use bounds::{BoundsError, BoundsOptions, BoundsReport, TheoremId};
pub use eigen::EigenPair;
pub use grid::{
    degenerate_flux_divergence, discrete_gradient, norm_lr_space, norm_lr_spacetime, sup_norm,
    Component, Domain, EdgeAveraging, Field, Grid, GridError, Trajectory,
};
pub use model::{ProblemConfig, ProblemSpec};
pub use periodic::{Classification, PeriodicConfig, PeriodicResult};
pub use verify::VerificationReport;
