//! Simulator and analysis toolkit for partially asynchronous block coordinate
//! descent with locally chosen, uncoordinated stepsizes.
//!
//! `N` agents jointly minimize a smooth, possibly nonconvex `f` over a
//! product of convex sets `X = X_1 × … × X_N`. Agent `i` owns block `i` of
//! the decision vector and takes projected gradient steps on it using a
//! possibly stale local copy of the other blocks. Delays are bounded
//! (partial asynchrony), and each agent can choose its own stepsize from
//! its row of block-Lipschitz constants and the delays on its own links.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below are what the command-line driver uses.
//!
//! Agent and block indices are 0-based throughout this API. Files written
//! for people (CSV column names, reports, schedule exports) are 1-based.

pub mod asynchrony;
pub mod blockvec;
pub mod engine;
mod error;
pub mod linalg;
pub mod objective;
pub mod problem;
pub mod rng;
mod scalar;
pub mod stepsize;

pub use asynchrony::{
    build_schedule, validate_partial_asynchrony, DelaySpec, Schedule, ScheduleMode, Verdict,
    Violation,
};
pub use blockvec::{BlockPartition, BlockVector};
pub use engine::{
    residual, run, MonitorReport, DEFAULT_STOP_TOLERANCE, NetworkState, RunConfig, RunTrace, Simulation, StopCriteria,
    StopReason,
};
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use objective::{BlockLipschitzMatrix, BoxConstraint, QuadraticObjective, SmoothObjective};
pub use problem::{generate_problem, GeneratorParams, Problem};
pub use scalar::Scalar;
pub use stepsize::{
    descent_constants, global_stepsize, local_stepsizes, manual_stepsizes, Rule, StepsizePlan,
    DEFAULT_SAFETY,
};

pub type BlockVector64 = BlockVector<f64>;
pub type Problem64 = Problem<f64>;
pub type StepsizePlan64 = StepsizePlan<f64>;
pub type RunTrace64 = RunTrace<f64>;
pub type MonitorReport64 = MonitorReport<f64>;

pub type BlockVector32 = BlockVector<f32>;
pub type Problem32 = Problem<f32>;
pub type StepsizePlan32 = StepsizePlan<f32>;
pub type RunTrace32 = RunTrace<f32>;
