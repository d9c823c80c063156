//! Discrete-time execution of partially asynchronous block coordinate
//! descent.
//!
//! Each agent keeps a full local copy of the decision vector. At timestep `t`
//! every agent `i` with `t ∈ T^i` replaces its own block by
//! `Π_{X_i}[x_i^{[i]}(t) − γ_i ∇^{[i]} f(x_i(t))]`, evaluated on its possibly
//! stale copy. All updates of a timestep read time-`t` information only.
//! Messages scheduled to arrive at `t + 1` are then delivered: the receiver's
//! copy of the sender's block is overwritten with the sender's new value.

mod monitor;
mod trace;

use std::sync::Arc;

pub use monitor::{
    monitor_lemma3, monitor_theorem1, square_summability, Lemma3Report, Lemma3Sample,
    MonitorReport, MonitorSummary, Theorem1Report, LEMMA3_ABS_TOL, THEOREM1_REL_TOL,
};
pub use trace::{RunTrace, StopReason, TraceMeta, TraceRow};

use crate::asynchrony::{DelaySpec, Schedule};
use crate::blockvec::{dist, norm, norm_sq, BlockPartition, BlockVector};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::objective::{BoxConstraint, SmoothObjective};
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::stepsize::StepsizePlan;

pub const DEFAULT_STOP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria<T> {
    /// Stop once the unscaled residual and the largest disagreement between
    /// the true state and any local copy are both at most this value.
    pub tolerance: T,
    /// Stop once no agent has moved for a full quiescence window.
    pub quiescence: bool,
}

impl<T: Scalar> Default for StopCriteria<T> {
    fn default() -> Self {
        Self { tolerance: T::of(DEFAULT_STOP_TOLERANCE), quiescence: true }
    }
}

impl<T: Scalar> StopCriteria<T> {
    /// Run to the horizon no matter what.
    pub fn never() -> Self {
        Self { tolerance: T::of(-1.0), quiescence: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub horizon: usize,
    pub stop: StopCriteria<T>,
    /// Common starting point of every agent; zero when absent.
    pub initial: Option<Vec<T>>,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, stop: StopCriteria::default(), initial: None }
    }
}

/// True state, local copies and the timestamps of every copied block.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<T> {
    pub t: usize,
    /// `x(t)`: every agent's own block.
    pub true_x: BlockVector<T>,
    /// `x_i(t)`.
    pub local_copies: Vec<BlockVector<T>>,
    /// `stale_stamps[(i, j)] = τ^j_i(t)`; the diagonal is always `t`.
    pub stale_stamps: DenseMatrix<usize>,
}

impl<T: Scalar> NetworkState<T> {
    /// Every agent starts from the same point at `t = 0`.
    pub fn synchronized(x0: BlockVector<T>) -> Self {
        let n = x0.partition().num_blocks();
        Self {
            t: 0,
            local_copies: vec![x0.clone(); n],
            true_x: x0,
            stale_stamps: DenseMatrix::filled(n, n, 0),
        }
    }

    /// `max_i ‖x(t) − x_i(t)‖`.
    pub fn max_disagreement(&self) -> T {
        self.local_copies
            .iter()
            .map(|c| dist(c.as_slice(), self.true_x.as_slice()))
            .fold(T::zero(), T::max)
    }
}

/// What a timestep did, before it is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProposal<T> {
    /// `s(t) = x(t+1) − x(t)`.
    pub step: Vec<T>,
    /// Projected blocks `x^{[i]}(t+1)` for agents updating at `t`.
    pub new_blocks: Vec<Option<Vec<T>>>,
    pub lemma3: Vec<Lemma3Sample<T>>,
    /// `(receiver, sender, age)` for updates that read a block older than its bound.
    pub staleness_violations: Vec<(usize, usize, usize)>,
}

/// Simulator bound to one objective, constraint set, delay model, schedule
/// and stepsize plan.
pub struct Simulation<'a, T, O> {
    objective: &'a O,
    constraints: &'a BoxConstraint<T>,
    delays: &'a DelaySpec,
    schedule: &'a Schedule,
    plan: &'a StepsizePlan<T>,
}

impl<'a, T: Scalar, O: SmoothObjective<T>> Simulation<'a, T, O> {
    pub fn new(
        objective: &'a O,
        constraints: &'a BoxConstraint<T>,
        delays: &'a DelaySpec,
        schedule: &'a Schedule,
        plan: &'a StepsizePlan<T>,
    ) -> Result<Self> {
        let n = objective.partition().num_blocks();
        if constraints.partition() != objective.partition() {
            return Err(Error::Partition("objective and constraints use different partitions".into()));
        }
        if delays.num_agents() != n || schedule.num_agents() != n || plan.num_agents() != n {
            return Err(Error::Config(format!(
                "agent counts differ: objective {n}, delays {}, schedule {}, plan {}",
                delays.num_agents(),
                schedule.num_agents(),
                plan.num_agents()
            )));
        }
        Ok(Self { objective, constraints, delays, schedule, plan })
    }

    fn partition(&self) -> &Arc<BlockPartition> {
        self.objective.partition()
    }

    /// Compute `s(t)` without touching the state.
    pub fn propose(&self, state: &NetworkState<T>) -> Result<StepProposal<T>> {
        let p = self.partition().clone();
        let n = p.num_blocks();
        let t = state.t;
        let mut step = vec![T::zero(); p.dim()];
        let mut new_blocks = vec![None; n];
        let mut lemma3 = Vec::new();
        let mut staleness_violations = Vec::new();

        for i in (0..n).filter(|&i| self.schedule.updates_at(i, t)) {
            for j in (0..n).filter(|&j| j != i && self.delays.has_link(i, j)) {
                let age = t - state.stale_stamps[(i, j)];
                if age > self.delays.bound(i, j) as usize {
                    staleness_violations.push((i, j, age));
                }
            }
            let copy = &state.local_copies[i];
            let mut grad = vec![T::zero(); p.block_size(i)];
            self.objective.gradient_block_into(copy.as_slice(), i, &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { t, what: "gradient" });
            }
            let gamma = self.plan.gammas[i];
            let x = state.true_x.block(i);
            let trial: Vec<T> = x.iter().zip(&grad).map(|(&xk, &gk)| xk - gamma * gk).collect();
            let mut projected = trial.clone();
            self.constraints.project_block_in_place(i, &mut projected);
            let s = p.block_mut(&mut step, i);
            for ((sk, &pk), &xk) in s.iter_mut().zip(&projected).zip(x) {
                *sk = pk - xk;
            }
            lemma3.push(Lemma3Sample::evaluate(i, t, gamma, s, &grad, &trial, &projected));
            new_blocks[i] = Some(projected);
        }
        Ok(StepProposal { step, new_blocks, lemma3, staleness_violations })
    }

    /// Apply a proposal and the deliveries arriving at `t + 1`.
    pub fn apply(&self, state: &mut NetworkState<T>, proposal: StepProposal<T>) {
        for (i, block) in proposal.new_blocks.into_iter().enumerate() {
            if let Some(b) = block {
                state.true_x.block_mut(i).copy_from_slice(&b);
                state.local_copies[i].block_mut(i).copy_from_slice(&b);
            }
        }
        state.t += 1;
        for i in 0..state.local_copies.len() {
            state.stale_stamps[(i, i)] = state.t;
        }
        for &(i, j) in self.schedule.arrivals_at(state.t) {
            let fresh = state.true_x.block(j).to_vec();
            state.local_copies[i].block_mut(j).copy_from_slice(&fresh);
            state.stale_stamps[(i, j)] = state.t;
        }
    }

    /// One timestep of the algorithm.
    pub fn step(&self, state: &mut NetworkState<T>) -> Result<StepProposal<T>> {
        let proposal = self.propose(state)?;
        self.apply(state, proposal.clone());
        Ok(proposal)
    }

    /// Execute from `t = 0` until a stop criterion fires or `config.horizon`.
    pub fn run(&self, config: &RunConfig<T>) -> Result<RunTrace<T>> {
        if config.horizon > self.schedule.horizon() {
            return Err(Error::Config(format!(
                "run horizon {} exceeds schedule horizon {}",
                config.horizon,
                self.schedule.horizon()
            )));
        }
        let p = self.partition().clone();
        let x0 = match &config.initial {
            Some(v) => BlockVector::from_vec(p.clone(), v.clone())?,
            None => BlockVector::zeros(p.clone()),
        };
        if let Some(block) = (0..p.num_blocks()).find(|&i| !self.constraints.block_contains(i, x0.block(i))) {
            return Err(Error::Infeasible { block });
        }
        let mut state = NetworkState::synchronized(x0);
        let n = p.num_blocks();
        let window = self.delays.quiescence_window();
        let mut rows = Vec::with_capacity(config.horizon + 1);
        let mut lemma3 = Vec::new();
        let mut staleness = Vec::new();
        let mut quiet = 0usize;

        let stop_reason = loop {
            let t = state.t;
            let x = state.true_x.as_slice();
            let f = self.objective.value(x);
            if !f.is_finite() {
                return Err(Error::Divergence { t, what: "objective" });
            }
            let res = residual_with(self.objective, self.constraints, x, Some(&self.plan.gammas))?;
            let unscaled = residual_with(self.objective, self.constraints, x, None)?;
            let proposal = self.propose(&state)?;
            let step = BlockVector::from_vec(p.clone(), proposal.step.clone())?;
            let step_blocks = step.block_norms();
            let row = TraceRow {
                t,
                f,
                step_norm: step.norm(),
                step_block_norms: step_blocks.clone(),
                residual_block_norms: res.block_norms,
                residual_total: res.total,
                residual_unscaled_total: unscaled.total,
                max_disagreement: state.max_disagreement(),
            };
            let stationary = row.residual_unscaled_total <= config.stop.tolerance
                && row.max_disagreement <= config.stop.tolerance;
            rows.push(row);
            lemma3.extend(proposal.lemma3.iter().cloned());
            staleness.extend(proposal.staleness_violations.iter().map(|&(i, j, age)| (i, j, t, age)));

            quiet = if step_blocks.iter().all(|&b| b == T::zero()) { quiet + 1 } else { 0 };
            if stationary {
                break StopReason::Stationary;
            }
            if config.stop.quiescence && quiet >= window {
                break StopReason::Quiescent;
            }
            if t >= config.horizon {
                break StopReason::Horizon;
            }
            self.apply(&mut state, proposal);
        };

        debug_assert_eq!(n, state.local_copies.len());
        Ok(RunTrace {
            meta: TraceMeta {
                problem_hash: None,
                schedule_seed: self.schedule.seed(),
                schedule_hash: self.schedule.hash(),
                plan: self.plan.clone(),
                horizon: config.horizon,
                stop_reason,
                stop_time: state.t,
            },
            rows,
            lemma3,
            staleness_violations: staleness,
            final_state: state,
        })
    }
}

/// Run a stored problem.
pub fn run<T: Scalar>(
    problem: &Problem<T>,
    schedule: &Schedule,
    plan: &StepsizePlan<T>,
    config: &RunConfig<T>,
) -> Result<RunTrace<T>> {
    let sim = Simulation::new(problem.objective(), problem.constraints(), problem.delays(), schedule, plan)?;
    let mut trace = sim.run(config)?;
    trace.meta.problem_hash = Some(problem.hash());
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T> {
    pub blocks: Vec<Vec<T>>,
    pub block_norms: Vec<T>,
    /// Euclidean norm of the whole residual vector.
    pub total: T,
}

/// Projected-gradient residual at `x`.
///
/// With stepsizes `γ`: `r^{[i]} = Π_{X_i}[x^{[i]} − γ_i ∇^{[i]} f(x)] − x^{[i]}`.
/// Without (`None`): the same with every `γ_i = 1`, whose norm is the
/// stationarity measure `‖x − Π_X[x − ∇f(x)]‖`.
pub fn residual_with<T: Scalar, O: SmoothObjective<T>>(
    objective: &O,
    constraints: &BoxConstraint<T>,
    x: &[T],
    gammas: Option<&[T]>,
) -> Result<Residual<T>> {
    let p = objective.partition();
    p.check_len(x.len())?;
    let mut blocks = Vec::with_capacity(p.num_blocks());
    for i in 0..p.num_blocks() {
        let xi = p.block(x, i);
        if !constraints.block_contains(i, xi) {
            return Err(Error::Infeasible { block: i });
        }
        let gamma = gammas.map_or(T::one(), |g| g[i]);
        let mut y = vec![T::zero(); xi.len()];
        objective.gradient_block_into(x, i, &mut y);
        for (yk, &xk) in y.iter_mut().zip(xi) {
            *yk = xk - gamma * *yk;
        }
        constraints.project_block_in_place(i, &mut y);
        for (yk, &xk) in y.iter_mut().zip(xi) {
            *yk = *yk - xk;
        }
        blocks.push(y);
    }
    let block_norms: Vec<T> = blocks.iter().map(|b| norm(b)).collect();
    let total = blocks.iter().fold(T::zero(), |acc, b| acc + norm_sq(b)).sqrt();
    Ok(Residual { blocks, block_norms, total })
}

/// Residual of a stored problem, scaled by the plan's stepsizes or unscaled.
pub fn residual<T: Scalar>(
    problem: &Problem<T>,
    x: &BlockVector<T>,
    gamma_scaled: bool,
    plan: &StepsizePlan<T>,
) -> Result<Residual<T>> {
    let gammas = gamma_scaled.then_some(plan.gammas.as_slice());
    residual_with(problem.objective(), problem.constraints(), x.as_slice(), gammas)
}
