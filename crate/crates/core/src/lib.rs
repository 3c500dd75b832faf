//! Redundancy bottleneck toolkit.
//!
//! Given a target distribution `p(y)` and source channels `p(x_s | y)`, this
//! crate traces the tradeoff between predicting the target from a bottleneck
//! variable `Q` (`I(Q;Y|S)`) and leaking which source it came from
//! (`I(Q;S|Y)`), decomposes both terms per source, and computes the exact
//! Blackwell redundancy of small systems.
//!
//! All information values are in nats unless a name says `bits`.

pub mod analysis;
pub mod blackwell;
pub mod gates;
pub mod prob;
pub mod problem;
pub mod solver;

pub use problem::{ProblemError, ProblemSpec, RbProblem};
pub use solver::{
    rb_at_rate, solve_lagrangian, sweep, BottleneckChannel, Objective, RbCurve, RbPoint,
    SolverConfig,
};

pub const LN2: f64 = std::f64::consts::LN_2;

/// Nats to bits.
pub fn to_bits(nats: f64) -> f64 {
    nats / LN2
}
