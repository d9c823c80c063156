use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Lemma3Sample, NetworkState};
use crate::scalar::Scalar;
use crate::stepsize::StepsizePlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    /// Residual and disagreement both under tolerance.
    Stationary,
    /// No agent moved for a full quiescence window.
    Quiescent,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Horizon => "horizon",
            StopReason::Stationary => "stationary",
            StopReason::Quiescent => "quiescent",
        })
    }
}

/// Metrics of the true state at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub t: usize,
    /// `f(x(t))`.
    pub f: T,
    /// `‖s(t)‖`; on the last row, the step the algorithm would take next.
    pub step_norm: T,
    pub step_block_norms: Vec<T>,
    /// `‖r^{[i]}(t)‖` with the plan's stepsizes.
    pub residual_block_norms: Vec<T>,
    pub residual_total: T,
    /// `‖x(t) − Π_X[x(t) − ∇f(x(t))]‖`.
    pub residual_unscaled_total: T,
    pub max_disagreement: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta<T> {
    pub problem_hash: Option<String>,
    pub schedule_seed: u64,
    pub schedule_hash: String,
    pub plan: StepsizePlan<T>,
    pub horizon: usize,
    pub stop_reason: StopReason,
    pub stop_time: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    pub meta: TraceMeta<T>,
    /// One row per timestep `0..=stop_time`.
    pub rows: Vec<TraceRow<T>>,
    pub lemma3: Vec<Lemma3Sample<T>>,
    /// `(receiver, sender, t, age)` for every update that read a block older
    /// than its delay bound.
    pub staleness_violations: Vec<(usize, usize, usize, usize)>,
    pub final_state: NetworkState<T>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn last(&self) -> &TraceRow<T> {
        self.rows.last().expect("a trace has at least one row")
    }

    /// First timestep whose unscaled residual is at most `threshold`.
    pub fn first_below(&self, threshold: T) -> Option<usize> {
        self.rows.iter().find(|r| r.residual_unscaled_total <= threshold).map(|r| r.t)
    }

    pub fn num_agents(&self) -> usize {
        self.meta.plan.num_agents()
    }

    /// CSV with header `t,f,step_norm,residual_total,residual_unscaled_total,
    /// max_disagreement,s_1,…,s_N`. Floats are shortest round-trip scientific
    /// notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,f,step_norm,residual_total,residual_unscaled_total,max_disagreement");
        for i in 1..=self.num_agents() {
            write!(out, ",s_{i}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            write!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                r.t, r.f, r.step_norm, r.residual_total, r.residual_unscaled_total, r.max_disagreement
            )
            .unwrap();
            for s in &r.step_block_norms {
                write!(out, ",{s:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}
