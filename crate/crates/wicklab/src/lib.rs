//! wicklab: exact Wick calculus on a discretized Brownian motion plus a
//! seeded Monte Carlo harness for anticipating stochastic integrals.
//!
//! The symbolic side works over a fixed grid `0 = t_0 < … < t_m`: step
//! functions carry the Hilbert-space structure, Gaussian
//! exponential-polynomial elements carry Wiener integrals, Wick
//! exponentials, (Wick) products, expectations, the S-transform and the
//! Malliavin derivative, all in closed form. The Monte Carlo side samples
//! reproducible path ensembles, evaluates left/right endpoint Riemann sums
//! for adapted × instantly-independent integrands, and certifies closure
//! topologies (L^p Cauchy, pathwise integrand decay plus convergence in
//! probability of the integrals) in three-valued reports.

pub mod error;
pub mod integrate;
pub mod mcsim;
pub mod process;
pub mod report;
pub mod rng;
pub mod scenarios;
pub mod stepfn;
pub mod synth;
pub mod wickalg;

pub use error::{Result, WickError};
pub use process::ElementaryProcess;
pub use report::{ConvergenceReport, DefinitionTag, LimitSummary, Thresholds, Verdict};
pub use stepfn::{common_grid, make_step, Grid, Partition, StepFunction, TAU_SYM};
pub use wickalg::{GepElement, DEFAULT_DEGREE_CAP};
