//! TOML reports written next to the traces.

use pabcd::engine::MonitorSummary;
use pabcd::{RunTrace64, StepsizePlan64};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Threshold {
    pub residual: f64,
    /// First timestep with unscaled residual at or below `residual`.
    pub t: Option<usize>,
}

pub fn thresholds(trace: &RunTrace64, levels: &[f64]) -> Vec<Threshold> {
    levels.iter().map(|&residual| Threshold { residual, t: trace.first_below(residual) }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub rule: String,
    pub safety: f64,
    pub within_bound: bool,
    pub gammas: Vec<f64>,
    pub bounds: Vec<f64>,
}

impl PlanReport {
    pub fn new(plan: &StepsizePlan64) -> Self {
        Self {
            rule: plan.rule.to_string(),
            safety: plan.safety,
            within_bound: plan.within_bound(),
            gammas: plan.gammas.clone(),
            bounds: plan.bounds.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub horizon: usize,
    pub stop_reason: String,
    pub stop_time: usize,
    pub final_f: f64,
    pub final_residual: f64,
    pub final_residual_scaled: f64,
    pub final_step: f64,
    pub final_disagreement: f64,
    pub schedule_seed: String,
    pub schedule_hash: String,
    pub plan: PlanReport,
    pub thresholds: Vec<Threshold>,
    pub monitor: MonitorSummary,
}

impl RunReport {
    pub fn new(trace: &RunTrace64, monitor: MonitorSummary, levels: &[f64]) -> Self {
        let last = trace.last();
        Self {
            horizon: trace.meta.horizon,
            stop_reason: trace.meta.stop_reason.to_string(),
            stop_time: trace.meta.stop_time,
            final_f: last.f,
            final_residual: last.residual_unscaled_total,
            final_residual_scaled: last.residual_total,
            final_step: last.step_norm,
            final_disagreement: last.max_disagreement,
            schedule_seed: trace.meta.schedule_seed.to_string(),
            schedule_hash: trace.meta.schedule_hash.clone(),
            plan: PlanReport::new(&trace.meta.plan),
            thresholds: thresholds(trace, levels),
            monitor,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleReport {
    pub format: &'static str,
    pub version: u32,
    pub problem_hash: String,
    pub run: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub format: &'static str,
    pub version: u32,
    pub problem_hash: String,
    /// Both runs used this schedule.
    pub schedule_hash: String,
    pub same_schedule: bool,
    pub local: RunReport,
    pub global: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub seed: String,
    pub pass: bool,
    pub error: Option<String>,
    pub stop_reason: Option<String>,
    pub stop_time: Option<usize>,
    pub final_residual: Option<f64>,
    pub monitor: Option<MonitorSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub format: &'static str,
    pub version: u32,
    pub rule: String,
    pub safety: f64,
    pub seeds: u64,
    pub passed: u64,
    pub failed: u64,
    pub runs: Vec<SeedReport>,
}

pub fn to_toml<T: Serialize>(report: &T) -> String {
    toml::to_string(report).expect("reports contain only TOML-representable values")
}
