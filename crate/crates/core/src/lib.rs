//! Nonlinear rectenna energy-harvesting model and conditional-capacity
//! (rate-energy) solver for SWIPT systems over AWGN channels.
//!
//! The crate is organized around the pipeline:
//!
//! * [`numerics`] — special functions (`ln I0`, Lambert W, erf), bracketed
//!   root finding, deterministic Gauss-Legendre quadrature;
//! * [`rectenna`] — the diode/rectifier circuit model: exact and approximate
//!   harvested DC power and the saturation threshold;
//! * [`channel`] — output densities, marginal information densities, and
//!   mutual information for the real AWGN channel and the amplitude channel
//!   of complex signalling;
//! * [`solver`] — the conditional-capacity convex program over a discrete
//!   support grid, with multiplier recovery and optimality verification;
//! * [`scenarios`] — deployment-level orchestration: path loss, effective
//!   peak amplitude, closed-form maximum WPT, the suboptimal superposition
//!   distribution, single-active-constraint reduction, and R-E sweeps;
//! * [`oracle`] — independent Monte-Carlo and brute-force references used by
//!   the tests and the solver's feasibility pre-check.

pub mod channel;
pub mod numerics;
pub mod oracle;
pub mod rectenna;
pub mod scenarios;
pub mod solver;

pub use channel::{
    AmplitudeChannel, ChannelModel, DiscreteDistribution, RealAwgnChannel, DEFAULT_QUAD_NODES,
};
pub use rectenna::{DiodeParams, HarvestModel, Rectenna, RectifierParams, SaturationPoint};
pub use scenarios::{
    Deployment, PeakSummary, RETrace, RETracePoint, ReceiverSite, ScenarioSettings, Signalling,
    TxConstraints,
};
pub use solver::{
    CapacityProblem, CapacitySolution, EhConstraint, OptimalityReport, SolveOptions, SolveStatus,
    SolverError, VerifyOptions,
};
