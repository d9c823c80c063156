//! Runtime checks of the descent inequalities that guarantee convergence.

use serde::{Deserialize, Serialize};

use super::RunTrace;
use crate::blockvec::{dot, norm_sq};
use crate::scalar::Scalar;

/// Relative slack (times `|f(x(0))|`) of the cumulative descent check.
pub const THEOREM1_REL_TOL: f64 = 1e-9;
/// Absolute slack of the per-update projection inequality.
pub const LEMMA3_ABS_TOL: f64 = 1e-9;

/// Projection inequality `⟨s, ∇^{[i]} f(x_i(t))⟩ ≤ −‖s‖²/γ_i` at one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Sample<T> {
    pub agent: usize,
    pub t: usize,
    /// `−‖s‖²/γ − ⟨s, g⟩` evaluated through `g = (x − y)/γ`, i.e.
    /// `−⟨s, Π(y) − y⟩/γ` with `y = x − γg` the unprojected trial point. This
    /// form is free of the cancellation that the direct form suffers when
    /// `|x| ≫ |s|`.
    pub margin: T,
    /// `−‖s‖²/γ − ⟨s, g⟩` evaluated literally.
    pub direct_margin: T,
}

impl<T: Scalar> Lemma3Sample<T> {
    pub fn evaluate(
        agent: usize,
        t: usize,
        gamma: T,
        step: &[T],
        grad: &[T],
        trial: &[T],
        projected: &[T],
    ) -> Self {
        let direct_margin = -norm_sq(step) / gamma - dot(step, grad);
        let push: Vec<T> = projected.iter().zip(trial).map(|(&p, &y)| p - y).collect();
        let margin = -dot(step, &push) / gamma;
        Self { agent, t, margin, direct_margin }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Report<T> {
    pub updates: usize,
    pub worst_margin: T,
    pub worst_direct_margin: T,
    /// Samples with `margin < −LEMMA3_ABS_TOL`.
    pub failures: Vec<(usize, usize, T)>,
    pub pass: bool,
}

pub fn monitor_lemma3<T: Scalar>(samples: &[Lemma3Sample<T>]) -> Lemma3Report<T> {
    let tol = T::of(LEMMA3_ABS_TOL);
    let failures: Vec<_> = samples
        .iter()
        .filter(|s| s.margin < -tol)
        .map(|s| (s.agent, s.t, s.margin))
        .collect();
    Lemma3Report {
        updates: samples.len(),
        worst_margin: samples.iter().map(|s| s.margin).fold(T::infinity(), T::min),
        worst_direct_margin: samples.iter().map(|s| s.direct_margin).fold(T::infinity(), T::min),
        pass: failures.is_empty(),
        failures,
    }
}

/// `f(x(m)) − f(x(0)) ≤ −Σ_i C_i Σ_{t<m} ‖s^{[i]}(t)‖²` for every prefix `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report<T> {
    /// `f(x(m)) − f(x(0))`.
    pub lhs: Vec<T>,
    /// `−Σ_i C_i Σ_{t<m} ‖s^{[i]}(t)‖²`.
    pub rhs: Vec<T>,
    pub tolerance: T,
    /// `min_m (rhs − lhs)`.
    pub worst_margin: T,
    pub worst_prefix: usize,
    pub pass: bool,
}

pub fn monitor_theorem1<T: Scalar>(trace: &RunTrace<T>, constants: &[T]) -> Theorem1Report<T> {
    let f0 = trace.rows[0].f;
    let tolerance = T::of(THEOREM1_REL_TOL) * f0.abs();
    let mut lhs = Vec::with_capacity(trace.rows.len());
    let mut rhs = Vec::with_capacity(trace.rows.len());
    let mut acc = vec![T::zero(); constants.len()];
    let mut worst_margin = T::infinity();
    let mut worst_prefix = 0;
    for (m, row) in trace.rows.iter().enumerate() {
        let l = row.f - f0;
        let r = -constants.iter().zip(&acc).fold(T::zero(), |s, (&c, &a)| s + c * a);
        let margin = r - l;
        if margin < worst_margin {
            worst_margin = margin;
            worst_prefix = m;
        }
        lhs.push(l);
        rhs.push(r);
        for (a, &s) in acc.iter_mut().zip(&row.step_block_norms) {
            *a = *a + s * s;
        }
    }
    Theorem1Report { lhs, rhs, tolerance, worst_margin, worst_prefix, pass: worst_margin >= -tolerance }
}

/// `Σ_i C_i Σ_t ‖s^{[i]}(t)‖²` against `f(x(0)) − min_t f(x(t))` over the
/// applied steps of the trace. Returns `(weighted_sum, descent, holds)`.
pub fn square_summability<T: Scalar>(trace: &RunTrace<T>, constants: &[T]) -> (T, T, bool) {
    let applied = &trace.rows[..trace.rows.len() - 1];
    let weighted = applied.iter().fold(T::zero(), |acc, row| {
        acc + constants
            .iter()
            .zip(&row.step_block_norms)
            .fold(T::zero(), |s, (&c, &n)| s + c * n * n)
    });
    let f0 = trace.rows[0].f;
    let f_min = trace.rows.iter().map(|r| r.f).fold(T::infinity(), T::min);
    let descent = f0 - f_min;
    let tol = T::of(THEOREM1_REL_TOL) * f0.abs();
    (weighted, descent, weighted <= descent + tol)
}

/// Every monitor verdict of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport<T> {
    pub constants: Vec<T>,
    /// All `C_i > 0`, i.e. the stepsizes satisfy the local bound.
    pub constants_positive: bool,
    pub theorem1: Theorem1Report<T>,
    pub lemma3: Lemma3Report<T>,
    pub square_summable: (T, T, bool),
    pub staleness_violations: usize,
}

impl<T: Scalar> MonitorReport<T> {
    pub fn evaluate(trace: &RunTrace<T>, constants: Vec<T>) -> Self {
        Self {
            constants_positive: constants.iter().all(|&c| c > T::zero()),
            theorem1: monitor_theorem1(trace, &constants),
            lemma3: monitor_lemma3(&trace.lemma3),
            square_summable: square_summability(trace, &constants),
            staleness_violations: trace.staleness_violations.len(),
            constants,
        }
    }

    pub fn pass(&self) -> bool {
        self.theorem1.pass && self.lemma3.pass && self.square_summable.2 && self.staleness_violations == 0
    }

    pub fn summary(&self) -> MonitorSummary {
        MonitorSummary {
            pass: self.pass(),
            constants_positive: self.constants_positive,
            descent_constants: self.constants.iter().map(|c| c.f64()).collect(),
            theorem1_pass: self.theorem1.pass,
            theorem1_worst_margin: self.theorem1.worst_margin.f64(),
            theorem1_worst_prefix: self.theorem1.worst_prefix,
            theorem1_tolerance: self.theorem1.tolerance.f64(),
            lemma3_pass: self.lemma3.pass,
            lemma3_updates: self.lemma3.updates,
            lemma3_failures: self.lemma3.failures.len(),
            lemma3_worst_margin: finite_or_zero(self.lemma3.worst_margin.f64()),
            lemma3_worst_direct_margin: finite_or_zero(self.lemma3.worst_direct_margin.f64()),
            square_summable_pass: self.square_summable.2,
            square_summable_weighted: self.square_summable.0.f64(),
            square_summable_descent: self.square_summable.1.f64(),
            staleness_violations: self.staleness_violations,
        }
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Flat, serializable view of a [`MonitorReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub pass: bool,
    pub constants_positive: bool,
    pub descent_constants: Vec<f64>,
    pub theorem1_pass: bool,
    pub theorem1_worst_margin: f64,
    pub theorem1_worst_prefix: usize,
    pub theorem1_tolerance: f64,
    pub lemma3_pass: bool,
    pub lemma3_updates: usize,
    pub lemma3_failures: usize,
    pub lemma3_worst_margin: f64,
    pub lemma3_worst_direct_margin: f64,
    pub square_summable_pass: bool,
    pub square_summable_weighted: f64,
    pub square_summable_descent: f64,
    pub staleness_violations: usize,
}
