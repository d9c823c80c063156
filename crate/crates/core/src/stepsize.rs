//! Stepsize rules.
//!
//! The local rule lets agent `i` pick
//! `γ_i = safety · 2 / Σ_j L^i_j (1 + D^j_i + D^i_j)` from its own row of
//! block-Lipschitz constants and the delays on its own links. The global rule
//! gives everyone `γ = safety · 2 / (L (1 + 2√N B))`, which needs the global
//! Lipschitz constant, the network size and the worst delay anywhere.

use serde::{Deserialize, Serialize};

use crate::asynchrony::DelaySpec;
use crate::error::{Error, Result};
use crate::objective::BlockLipschitzMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_SAFETY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Local,
    Global,
    Manual,
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rule::Local => "local",
            Rule::Global => "global",
            Rule::Manual => "manual",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepsizePlan<T> {
    pub gammas: Vec<T>,
    pub rule: Rule,
    pub safety: T,
    /// Upper bound each `γ_i` is measured against: the local bound for local
    /// and manual plans (infinite for isolated agents), the global bound for
    /// global plans.
    pub bounds: Vec<T>,
}

impl<T: Scalar> StepsizePlan<T> {
    pub fn num_agents(&self) -> usize {
        self.gammas.len()
    }

    /// `γ_i < bound_i` for every agent.
    pub fn within_bound(&self) -> bool {
        self.gammas.iter().zip(&self.bounds).all(|(g, b)| g < b)
    }
}

fn check_safety<T: Scalar>(safety: T) -> Result<()> {
    if safety > T::zero() && safety.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("safety factor must be positive and finite, got {safety}")))
    }
}

/// `Σ_j L^i_j (1 + D^j_i + D^i_j)`.
pub fn local_denominator<T: Scalar>(l_row: &[T], inbound: &[u32], outbound: &[u32]) -> T {
    l_row
        .iter()
        .zip(inbound.iter().zip(outbound))
        .fold(T::zero(), |acc, (&l, (&din, &dout))| {
            acc + l * (T::one() + T::of(din as f64) + T::of(dout as f64))
        })
}

/// Stepsize and bound for one agent from its local information only: its row
/// of block-Lipschitz constants, `D^j_i` for all `j` (`inbound`) and `D^i_j`
/// for all `j` (`outbound`).
pub fn local_stepsize_for_agent<T: Scalar>(
    agent: usize,
    l_row: &[T],
    inbound: &[u32],
    outbound: &[u32],
    safety: T,
) -> Result<(T, T)> {
    check_safety(safety)?;
    let denom = local_denominator(l_row, inbound, outbound);
    if denom == T::zero() {
        return Err(Error::DegenerateAgent { agent });
    }
    let bound = T::of(2.0) / denom;
    Ok((safety * bound, bound))
}

pub fn local_stepsizes<T: Scalar>(
    lipschitz: &BlockLipschitzMatrix<T>,
    delays: &DelaySpec,
    safety: T,
) -> Result<StepsizePlan<T>> {
    check_shapes(lipschitz, delays)?;
    let mut gammas = Vec::with_capacity(delays.num_agents());
    let mut bounds = Vec::with_capacity(delays.num_agents());
    for i in 0..delays.num_agents() {
        let (g, b) = local_stepsize_for_agent(
            i,
            lipschitz.row(i),
            &delays.inbound(i),
            &delays.outbound(i),
            safety,
        )?;
        gammas.push(g);
        bounds.push(b);
    }
    Ok(StepsizePlan { gammas, rule: Rule::Local, safety, bounds })
}

/// Upper bound of the global rule, `2 / (L (1 + 2√N B))`.
pub fn global_bound<T: Scalar>(lipschitz_global: T, agents: usize, max_delay: u32) -> T {
    let n = T::of_usize(agents);
    T::of(2.0) / (lipschitz_global * (T::one() + T::of(2.0) * n.sqrt() * T::of(max_delay as f64)))
}

pub fn global_stepsize<T: Scalar>(
    lipschitz_global: T,
    agents: usize,
    max_delay: u32,
    safety: T,
) -> Result<StepsizePlan<T>> {
    check_safety(safety)?;
    if !(lipschitz_global > T::zero()) || !lipschitz_global.is_finite() {
        return Err(Error::Config(format!(
            "global Lipschitz constant must be positive, got {lipschitz_global}"
        )));
    }
    if agents == 0 {
        return Err(Error::Config("no agents".into()));
    }
    let bound = global_bound(lipschitz_global, agents, max_delay);
    Ok(StepsizePlan {
        gammas: vec![safety * bound; agents],
        rule: Rule::Global,
        safety,
        bounds: vec![bound; agents],
    })
}

/// User-supplied stepsizes, measured against the local bounds.
pub fn manual_stepsizes<T: Scalar>(
    gammas: Vec<T>,
    lipschitz: &BlockLipschitzMatrix<T>,
    delays: &DelaySpec,
) -> Result<StepsizePlan<T>> {
    check_shapes(lipschitz, delays)?;
    if gammas.len() != delays.num_agents() {
        return Err(Error::Config(format!(
            "{} stepsizes for {} agents",
            gammas.len(),
            delays.num_agents()
        )));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > T::zero()) || !g.is_finite()) {
        return Err(Error::Config(format!("stepsizes must be positive and finite, got {g}")));
    }
    let bounds = (0..delays.num_agents())
        .map(|i| {
            let d = local_denominator(lipschitz.row(i), &delays.inbound(i), &delays.outbound(i));
            if d == T::zero() {
                T::infinity()
            } else {
                T::of(2.0) / d
            }
        })
        .collect();
    Ok(StepsizePlan { gammas, rule: Rule::Manual, safety: T::one(), bounds })
}

/// `C_i = 1/γ_i − ½ Σ_j L^i_j (1 + D^j_i + D^i_j)`.
///
/// Positive for every agent iff each `γ_i` lies strictly inside the local
/// bound; the cumulative descent `f(x(m)) − f(x(0))` is then at most
/// `−Σ_i C_i Σ_{t<m} ‖s^{[i]}(t)‖²`.
pub fn descent_constants<T: Scalar>(
    plan: &StepsizePlan<T>,
    lipschitz: &BlockLipschitzMatrix<T>,
    delays: &DelaySpec,
) -> Vec<T> {
    let half = T::of(0.5);
    (0..plan.num_agents())
        .map(|i| {
            let d = local_denominator(lipschitz.row(i), &delays.inbound(i), &delays.outbound(i));
            T::one() / plan.gammas[i] - half * d
        })
        .collect()
}

fn check_shapes<T: Scalar>(lipschitz: &BlockLipschitzMatrix<T>, delays: &DelaySpec) -> Result<()> {
    if lipschitz.num_agents() == delays.num_agents() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} agents in the Lipschitz matrix, {} in the delay bounds",
            lipschitz.num_agents(),
            delays.num_agents()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use approx::assert_relative_eq;

    fn lip(rows: Vec<Vec<f64>>, global: f64) -> BlockLipschitzMatrix<f64> {
        BlockLipschitzMatrix::new(DenseMatrix::from_rows(&rows).unwrap(), global).unwrap()
    }

    fn delays(rows: Vec<Vec<u32>>) -> DelaySpec {
        let n = rows.len();
        DelaySpec::new(DenseMatrix::from_rows(&rows).unwrap(), vec![0; n]).unwrap()
    }

    #[test]
    fn single_agent_local() {
        let plan = local_stepsizes(&lip(vec![vec![2.0]], 2.0), &delays(vec![vec![0]]), 0.95).unwrap();
        assert_relative_eq!(plan.gammas[0], 0.95, max_relative = 1e-15);
        assert!(plan.within_bound());
    }

    #[test]
    fn two_agent_local() {
        // D^2_1 = 1 (row 0, col 1), D^1_2 = 2 (row 1, col 0).
        let l = lip(vec![vec![2., 1.], vec![1., 3.]], 3.618);
        let d = delays(vec![vec![0, 1], vec![2, 0]]);
        let plan = local_stepsizes(&l, &d, 0.95).unwrap();
        // 0.95 · 2 / (2·1 + 1·(1 + 1 + 2))
        assert_relative_eq!(plan.gammas[0], 0.95 * 2.0 / 6.0, max_relative = 1e-15);
        assert_eq!(format!("{:.4}", plan.gammas[0]), "0.3167");
        // agent 2: 1·(1 + 2 + 1) + 3·1
        assert_relative_eq!(plan.gammas[1], 0.95 * 2.0 / 7.0, max_relative = 1e-15);

        let c = descent_constants(&plan, &l, &d);
        assert_relative_eq!(c[0], 1.0 / (0.95 / 3.0) - 3.0, max_relative = 1e-14);
        assert_eq!(format!("{:.4}", c[0]), "0.1579");
        assert!(c.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn descent_constant_signs() {
        let l = lip(vec![vec![2., 1.], vec![1., 3.]], 3.618);
        let d = delays(vec![vec![0, 1], vec![2, 0]]);
        let at = manual_stepsizes(vec![1.0 / 3.0, 2.0 / 7.0], &l, &d).unwrap();
        let c = descent_constants(&at, &l, &d);
        assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15);
        assert!(!at.within_bound());
        let above = manual_stepsizes(vec![0.5, 0.5], &l, &d).unwrap();
        assert!(descent_constants(&above, &l, &d).iter().all(|&c| c < 0.0));
    }

    #[test]
    fn global_examples() {
        let p = global_stepsize(100.0, 20, 20, 0.95).unwrap();
        let expected = 1.9 / (100.0 * (1.0 + 40.0 * 20f64.sqrt()));
        assert_relative_eq!(p.gammas[0], expected, max_relative = 1e-15);
        assert_eq!(format!("{:.3e}", p.gammas[0]), "1.056e-4");
        assert!(p.gammas.iter().all(|&g| g == p.gammas[0]));

        assert_relative_eq!(global_stepsize(2.0, 1, 0, 0.95).unwrap().gammas[0], 0.95, max_relative = 1e-15);
        assert_eq!(global_stepsize(1.0, 4, 1, 1.0).unwrap().gammas, vec![0.4; 4]);
        assert!(global_stepsize(0.0, 4, 1, 0.95).is_err());
    }

    #[test]
    fn isolated_agent_is_degenerate() {
        let l = lip(vec![vec![0., 0.], vec![0., 3.]], 3.0);
        let d = delays(vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(local_stepsizes(&l, &d, 0.95), Err(Error::DegenerateAgent { agent: 0 }));
        let m = manual_stepsizes(vec![1.0, 0.1], &l, &d).unwrap();
        assert_eq!(m.bounds[0], f64::INFINITY);
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = lip(vec![vec![1.0]], 1.0);
        let d = delays(vec![vec![0]]);
        assert!(local_stepsizes(&l, &d, 0.0).is_err());
        assert!(local_stepsizes(&l, &d, f64::NAN).is_err());
        assert!(manual_stepsizes(vec![0.0], &l, &d).is_err());
        assert!(manual_stepsizes(vec![0.1, 0.1], &l, &d).is_err());
    }

    #[test]
    fn zero_delay_reduces_to_row_sums() {
        let l = lip(vec![vec![2., 1., 0.5], vec![1., 3., 0.], vec![0.5, 0., 1.]], 4.0);
        let d = delays(vec![vec![0; 3]; 3]);
        let plan = local_stepsizes(&l, &d, 1.0).unwrap();
        for i in 0..3 {
            let row_sum: f64 = l.row(i).iter().sum();
            assert_relative_eq!(plan.gammas[i], 2.0 / row_sum, max_relative = 1e-15);
        }
    }
}
