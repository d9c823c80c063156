//! Bounded-delay model: delay bounds, update and communication schedules,
//! staleness lookup and validation.
//!
//! Time is discrete. At every timestep `t` an agent in `T^i` computes an
//! update from its local copy; afterwards messages whose arrival time is
//! `t + 1` overwrite the receiver's copy of the sender's block with the
//! sender's current value. Transport is instantaneous, asynchrony comes from
//! messages being infrequent.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::objective::BlockLipschitzMatrix;
use crate::rng::{self, Domain};
use crate::scalar::Scalar;

/// Delay bounds `D^j_i` and update-interval bounds `G_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySpec {
    /// `bounds[(i, j)] = D^j_i`: staleness bound of agent `j`'s block as seen
    /// by agent `i`.
    bounds: DenseMatrix<u32>,
    update_bounds: Vec<u32>,
    /// `links[(i, j)]`: agent `j` sends its block to agent `i`.
    links: DenseMatrix<bool>,
}

impl DelaySpec {
    /// Every ordered pair of distinct agents communicates.
    pub fn new(bounds: DenseMatrix<u32>, update_bounds: Vec<u32>) -> Result<Self> {
        let n = bounds.rows();
        let mut links = DenseMatrix::filled(n, n, true);
        for i in 0..n {
            links[(i, i)] = false;
        }
        Self::with_links(bounds, update_bounds, links)
    }

    /// Links follow the coupling pattern of `lipschitz`: agents `i` and `j`
    /// communicate iff `L^i_j ≠ 0`. Uncoupled pairs must have zero bounds.
    pub fn with_coupling<T: Scalar>(
        bounds: DenseMatrix<u32>,
        update_bounds: Vec<u32>,
        lipschitz: &BlockLipschitzMatrix<T>,
    ) -> Result<Self> {
        let n = bounds.rows();
        if lipschitz.num_agents() != n {
            return Err(Error::Config(format!(
                "{} agents in the Lipschitz matrix, {n} in the delay bounds",
                lipschitz.num_agents()
            )));
        }
        let mut links = DenseMatrix::filled(n, n, false);
        for i in 0..n {
            for j in 0..n {
                links[(i, j)] = i != j && lipschitz.coupled(i, j);
            }
        }
        Self::with_links(bounds, update_bounds, links)
    }

    fn with_links(
        bounds: DenseMatrix<u32>,
        update_bounds: Vec<u32>,
        links: DenseMatrix<bool>,
    ) -> Result<Self> {
        let n = bounds.rows();
        if n == 0 || bounds.cols() != n {
            return Err(Error::Config("delay bounds must form a nonempty square matrix".into()));
        }
        if update_bounds.len() != n {
            return Err(Error::Config(format!(
                "{} update bounds for {n} agents",
                update_bounds.len()
            )));
        }
        for i in 0..n {
            if bounds[(i, i)] != 0 {
                return Err(Error::Config(format!("D^{0}_{0} must be zero", i + 1)));
            }
            for j in 0..n {
                if i != j && !links[(i, j)] && (bounds[(i, j)] != 0 || bounds[(j, i)] != 0) {
                    return Err(Error::Config(format!(
                        "agents {} and {} are uncoupled but have nonzero delay bounds",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { bounds, update_bounds, links })
    }

    /// Zero delays, every agent updates every step.
    pub fn synchronous(n: usize) -> Result<Self> {
        Self::new(DenseMatrix::filled(n, n, 0), vec![0; n])
    }

    pub fn num_agents(&self) -> usize {
        self.bounds.rows()
    }

    /// `D^sender_receiver`.
    pub fn bound(&self, receiver: usize, sender: usize) -> u32 {
        self.bounds[(receiver, sender)]
    }

    pub fn bounds(&self) -> &DenseMatrix<u32> {
        &self.bounds
    }

    /// `G_i`.
    pub fn update_bound(&self, i: usize) -> u32 {
        self.update_bounds[i]
    }

    pub fn update_bounds(&self) -> &[u32] {
        &self.update_bounds
    }

    pub fn has_link(&self, receiver: usize, sender: usize) -> bool {
        self.links[(receiver, sender)]
    }

    /// Row `i`: `D^j_i` for every `j` (delays on messages into agent `i`).
    pub fn inbound(&self, i: usize) -> Vec<u32> {
        self.bounds.row(i).to_vec()
    }

    /// Column `i`: `D^i_j` for every `j` (delays on messages out of agent `i`).
    pub fn outbound(&self, i: usize) -> Vec<u32> {
        (0..self.num_agents()).map(|j| self.bounds[(j, i)]).collect()
    }

    /// `B = max_{i,j} {D^j_i, D^i_j, G_i}`.
    pub fn max_delay(&self) -> u32 {
        let d = self.bounds.as_slice().iter().copied().max().unwrap_or(0);
        let g = self.update_bounds.iter().copied().max().unwrap_or(0);
        d.max(g)
    }

    /// Length of the quiescence window: `max_i max(G_i, max_j D^j_i) + 1`.
    pub fn quiescence_window(&self) -> usize {
        (0..self.num_agents())
            .map(|i| {
                let d = self.bounds.row(i).iter().copied().max().unwrap_or(0);
                d.max(self.update_bounds[i]) as usize
            })
            .max()
            .unwrap_or(0)
            + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Every agent updates at every timestep.
    #[serde(alias = "paper-iv")]
    EveryStep,
    /// Agent `i` updates at random times, at least once every `G_i + 1` steps.
    RandomizedUpdates,
    /// Assembled by hand through [`Schedule::from_parts`].
    Custom,
}

/// Arrival times of messages on one directed link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub receiver: usize,
    pub sender: usize,
    /// Sorted, strictly increasing, within `0..=horizon`.
    pub arrivals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    horizon: usize,
    seed: u64,
    mode: ScheduleMode,
    num_agents: usize,
    updates: Vec<Vec<usize>>,
    update_mask: Vec<Vec<bool>>,
    links: Vec<Link>,
    link_index: DenseMatrix<Option<usize>>,
    by_time: Vec<Vec<(usize, usize)>>,
}

impl Schedule {
    /// Assemble and check a schedule from explicit update and arrival sets.
    pub fn from_parts(
        horizon: usize,
        seed: u64,
        mode: ScheduleMode,
        updates: Vec<Vec<usize>>,
        mut links: Vec<Link>,
    ) -> Result<Self> {
        let n = updates.len();
        if n == 0 {
            return Err(Error::Config("schedule needs at least one agent".into()));
        }
        let strictly_sorted = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        let mut update_mask = Vec::with_capacity(n);
        for (i, u) in updates.iter().enumerate() {
            if !strictly_sorted(u) || u.last().is_some_and(|&t| t > horizon) {
                return Err(Error::Config(format!("update times of agent {} are invalid", i + 1)));
            }
            let mut mask = vec![false; horizon + 1];
            u.iter().for_each(|&t| mask[t] = true);
            update_mask.push(mask);
        }
        links.sort_by_key(|l| (l.receiver, l.sender));
        let mut link_index = DenseMatrix::filled(n, n, None);
        let mut by_time = vec![Vec::new(); horizon + 1];
        for (k, l) in links.iter().enumerate() {
            if l.receiver >= n || l.sender >= n || l.receiver == l.sender {
                return Err(Error::Config(format!(
                    "invalid link {} -> {}",
                    l.sender + 1,
                    l.receiver + 1
                )));
            }
            if link_index[(l.receiver, l.sender)].is_some() {
                return Err(Error::Config(format!(
                    "duplicate link {} -> {}",
                    l.sender + 1,
                    l.receiver + 1
                )));
            }
            if !strictly_sorted(&l.arrivals) || l.arrivals.last().is_some_and(|&t| t > horizon) {
                return Err(Error::Config(format!(
                    "arrival times on link {} -> {} are invalid",
                    l.sender + 1,
                    l.receiver + 1
                )));
            }
            link_index[(l.receiver, l.sender)] = Some(k);
            for &t in &l.arrivals {
                by_time[t].push((l.receiver, l.sender));
            }
        }
        Ok(Self {
            horizon,
            seed,
            mode,
            num_agents: n,
            updates,
            update_mask,
            links,
            link_index,
            by_time,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    /// `T^i`.
    pub fn updates(&self, i: usize) -> &[usize] {
        &self.updates[i]
    }

    /// `t ∈ T^i`; false beyond the horizon.
    pub fn updates_at(&self, i: usize, t: usize) -> bool {
        self.update_mask[i].get(t).copied().unwrap_or(false)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, receiver: usize, sender: usize) -> Option<&Link> {
        self.link_index[(receiver, sender)].map(|k| &self.links[k])
    }

    /// `(receiver, sender)` pairs with a message arriving at `t`, sorted.
    pub fn arrivals_at(&self, t: usize) -> &[(usize, usize)] {
        self.by_time.get(t).map_or(&[], Vec::as_slice)
    }

    /// `τ^j_i(t)`: timestamp of agent `j`'s block held by agent `i` at `t`.
    ///
    /// `τ^i_i(t) = t`. Agents without a link never refresh their copy after
    /// initialization, reported as 0.
    pub fn staleness(&self, i: usize, j: usize, t: usize) -> usize {
        if i == j {
            return t;
        }
        match self.link(i, j) {
            Some(l) => {
                let k = l.arrivals.partition_point(|&a| a <= t);
                if k == 0 {
                    0
                } else {
                    l.arrivals[k - 1]
                }
            }
            None => 0,
        }
    }

    pub fn to_document(&self) -> ScheduleDocument {
        ScheduleDocument {
            format: SCHEDULE_FORMAT.into(),
            version: 1,
            horizon: self.horizon,
            seed: self.seed.to_string(),
            mode: self.mode,
            updates: self.updates.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkDocument {
                    receiver: l.receiver + 1,
                    sender: l.sender + 1,
                    arrivals: l.arrivals.clone(),
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("schedule serializes")
    }

    /// SHA-256 of the canonical TOML export, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub const SCHEDULE_FORMAT: &str = "pabcd-schedule";

/// On-disk schedule export. Agent indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub format: String,
    pub version: u32,
    pub horizon: usize,
    pub seed: String,
    pub mode: ScheduleMode,
    pub updates: Vec<Vec<usize>>,
    pub links: Vec<LinkDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDocument {
    pub receiver: usize,
    pub sender: usize,
    pub arrivals: Vec<usize>,
}

impl ScheduleDocument {
    pub fn into_schedule(self) -> Result<Schedule> {
        if self.format != SCHEDULE_FORMAT || self.version != 1 {
            return Err(Error::Document(format!(
                "unsupported schedule format {} v{}",
                self.format, self.version
            )));
        }
        let seed = self
            .seed
            .parse()
            .map_err(|e| Error::Document(format!("bad schedule seed: {e}")))?;
        let links = self
            .links
            .into_iter()
            .map(|l| {
                if l.receiver == 0 || l.sender == 0 {
                    return Err(Error::Document("agent indices are 1-based".into()));
                }
                Ok(Link { receiver: l.receiver - 1, sender: l.sender - 1, arrivals: l.arrivals })
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::from_parts(self.horizon, seed, self.mode, self.updates, links)
    }
}

/// Realize the bounded-delay model for `horizon` timesteps.
///
/// Each link `j → i` delivers at `t = 0` and then, after a delivery at `t`,
/// again at `t + 1 + δ` with `δ` uniform on `{0, …, D^j_i}`. In
/// [`ScheduleMode::RandomizedUpdates`] agent `i` first updates at a uniform
/// time in `{0, …, G_i}` and then `1 + g` steps after each update, `g`
/// uniform on `{0, …, G_i}`. Each link and agent draws from its own stream.
pub fn build_schedule(spec: &DelaySpec, horizon: usize, seed: u64, mode: ScheduleMode) -> Schedule {
    let n = spec.num_agents();
    let updates: Vec<Vec<usize>> = (0..n)
        .map(|i| match mode {
            ScheduleMode::EveryStep | ScheduleMode::Custom => (0..=horizon).collect(),
            ScheduleMode::RandomizedUpdates => {
                let g = spec.update_bound(i) as usize;
                let mut rng = rng::stream(seed, Domain::AgentUpdates, i as u64);
                let mut times = Vec::new();
                let mut t = rng.random_range(0..=g);
                while t <= horizon {
                    times.push(t);
                    t += 1 + rng.random_range(0..=g);
                }
                times
            }
        })
        .collect();

    let mut links = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if !spec.has_link(i, j) {
                continue;
            }
            let d = spec.bound(i, j) as usize;
            let mut rng = rng::stream(seed, Domain::Link, rng::link_index(i, j, n));
            let mut arrivals = Vec::new();
            let mut t = 0;
            while t <= horizon {
                arrivals.push(t);
                t += 1 + rng.random_range(0..=d);
            }
            links.push(Link { receiver: i, sender: j, arrivals });
        }
    }
    Schedule::from_parts(horizon, seed, mode, updates, links).expect("generated schedule is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `t - τ^j_i(t) > D^j_i` at an update time of the receiver.
    Staleness { receiver: usize, sender: usize, t: usize, age: usize, bound: u32 },
    /// No update of `agent` in `{start, …, start + G_i}`.
    UpdateGap { agent: usize, start: usize },
    /// Schedule and delay spec disagree on the network.
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that a schedule realizes bounded staleness and bounded update gaps.
///
/// Links absent from the delay spec are not checked: the agents do not
/// depend on each other's blocks.
pub fn validate_partial_asynchrony(sched: &Schedule, spec: &DelaySpec) -> Verdict {
    let n = spec.num_agents();
    let mut violations = Vec::new();
    if sched.num_agents() != n {
        violations.push(Violation::Shape(format!(
            "schedule has {} agents, delay spec {n}",
            sched.num_agents()
        )));
        return Verdict { violations };
    }
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i && spec.has_link(i, j)) {
            if sched.link(i, j).is_none() {
                violations.push(Violation::Shape(format!("missing link {} -> {}", j + 1, i + 1)));
                continue;
            }
            let bound = spec.bound(i, j);
            for &t in sched.updates(i) {
                let age = t - sched.staleness(i, j, t);
                if age > bound as usize {
                    violations.push(Violation::Staleness { receiver: i, sender: j, t, age, bound });
                }
            }
        }
        let g = spec.update_bound(i) as usize;
        if g <= sched.horizon() {
            for start in 0..=sched.horizon() - g {
                if !(start..=start + g).any(|t| sched.updates_at(i, t)) {
                    violations.push(Violation::UpdateGap { agent: i, start });
                }
            }
        }
    }
    Verdict { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bounds: Vec<Vec<u32>>, g: Vec<u32>) -> DelaySpec {
        DelaySpec::new(DenseMatrix::from_rows(&bounds).unwrap(), g).unwrap()
    }

    #[test]
    fn zero_delay_delivers_every_step() {
        let s = spec(vec![vec![0, 0, 0]; 3], vec![0; 3]);
        let sched = build_schedule(&s, 30, 1, ScheduleMode::EveryStep);
        for l in sched.links() {
            assert_eq!(l.arrivals, (0..=30).collect::<Vec<_>>());
        }
        for t in 0..=30 {
            assert_eq!(sched.staleness(0, 2, t), t);
        }
    }

    #[test]
    fn single_agent_has_no_links() {
        let s = spec(vec![vec![0]], vec![0]);
        let sched = build_schedule(&s, 10, 3, ScheduleMode::EveryStep);
        assert!(sched.links().is_empty());
        assert_eq!(sched.updates(0), (0..=10).collect::<Vec<_>>().as_slice());
        assert!(validate_partial_asynchrony(&sched, &s).passed());
    }

    #[test]
    fn arrival_gaps_bounded_by_delay_plus_one() {
        let s = spec(vec![vec![0, 20], vec![20, 0]], vec![0, 0]);
        let sched = build_schedule(&s, 500, 11, ScheduleMode::EveryStep);
        let arr = &sched.link(0, 1).unwrap().arrivals;
        assert_eq!(arr[0], 0);
        assert!(arr.windows(2).all(|w| (1..=21).contains(&(w[1] - w[0]))));
        // Over 500 steps a uniform gap distribution should produce more than one gap size.
        let distinct: std::collections::BTreeSet<_> = arr.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(distinct.len() > 5);
    }

    #[test]
    fn staleness_between_arrivals() {
        let sched = Schedule::from_parts(
            12,
            0,
            ScheduleMode::Custom,
            vec![(0..=12).collect(), (0..=12).collect()],
            vec![Link { receiver: 0, sender: 1, arrivals: vec![0, 5, 9] }],
        )
        .unwrap();
        assert_eq!(sched.staleness(0, 1, 7), 5);
        assert_eq!(sched.staleness(0, 1, 9), 9);
        assert_eq!(sched.staleness(0, 1, 12), 9);
        assert_eq!(sched.staleness(1, 1, 7), 7);
        // No link 0 -> 1.
        assert_eq!(sched.staleness(1, 0, 7), 0);
    }

    #[test]
    fn forced_violation_is_reported() {
        // D = 2 but the link is silent for 4 steps before the update at t = 4.
        let s = spec(vec![vec![0, 2], vec![2, 0]], vec![0, 0]);
        let sched = Schedule::from_parts(
            6,
            0,
            ScheduleMode::Custom,
            vec![(0..=6).collect(), (0..=6).collect()],
            vec![
                Link { receiver: 0, sender: 1, arrivals: vec![0, 4, 5, 6] },
                Link { receiver: 1, sender: 0, arrivals: (0..=6).collect() },
            ],
        )
        .unwrap();
        let v = validate_partial_asynchrony(&sched, &s);
        assert_eq!(
            v.violations,
            vec![Violation::Staleness { receiver: 0, sender: 1, t: 3, age: 3, bound: 2 }]
        );
    }

    #[test]
    fn update_gap_violation() {
        let s = spec(vec![vec![0]], vec![1]);
        let sched = Schedule::from_parts(5, 0, ScheduleMode::Custom, vec![vec![0, 1, 4, 5]], vec![]).unwrap();
        let v = validate_partial_asynchrony(&sched, &s);
        assert_eq!(v.violations, vec![Violation::UpdateGap { agent: 0, start: 2 }]);
    }

    #[test]
    fn randomized_updates_respect_gap_bound() {
        let s = spec(vec![vec![0, 3], vec![1, 0]], vec![4, 0]);
        for seed in 0..50 {
            let sched = build_schedule(&s, 200, seed, ScheduleMode::RandomizedUpdates);
            assert!(validate_partial_asynchrony(&sched, &s).passed());
            assert_eq!(sched.updates(1).len(), 201);
        }
        let sched = build_schedule(&s, 200, 5, ScheduleMode::RandomizedUpdates);
        assert!(sched.updates(0).len() < 201);
    }

    #[test]
    fn malformed_parts_rejected() {
        assert!(Schedule::from_parts(3, 0, ScheduleMode::Custom, vec![vec![2, 1]], vec![]).is_err());
        assert!(Schedule::from_parts(3, 0, ScheduleMode::Custom, vec![vec![4]], vec![]).is_err());
        let bad_link = Link { receiver: 0, sender: 0, arrivals: vec![0] };
        assert!(Schedule::from_parts(3, 0, ScheduleMode::Custom, vec![vec![0]], vec![bad_link]).is_err());
    }

    #[test]
    fn uncoupled_pairs_need_zero_bounds() {
        let l = BlockLipschitzMatrix::new(DenseMatrix::diag(&[1.0, 2.0]), 2.0).unwrap();
        let bounds = DenseMatrix::from_rows(&[vec![0u32, 3], vec![0, 0]]).unwrap();
        assert!(DelaySpec::with_coupling(bounds, vec![0, 0], &l).is_err());
        let ok = DelaySpec::with_coupling(DenseMatrix::filled(2, 2, 0u32), vec![0, 0], &l).unwrap();
        assert!(!ok.has_link(0, 1));
        let sched = build_schedule(&ok, 10, 0, ScheduleMode::EveryStep);
        assert!(sched.links().is_empty());
    }

    #[test]
    fn derived_bounds() {
        let s = spec(vec![vec![0, 3, 1], vec![7, 0, 0], vec![2, 2, 0]], vec![0, 5, 1]);
        assert_eq!(s.max_delay(), 7);
        assert_eq!(s.inbound(1), vec![7, 0, 0]);
        assert_eq!(s.outbound(0), vec![0, 7, 2]);
        assert_eq!(s.quiescence_window(), 8);
        assert!(DelaySpec::new(DenseMatrix::from_rows(&[vec![1u32]]).unwrap(), vec![0]).is_err());
    }

    #[test]
    fn document_round_trip() {
        let s = spec(vec![vec![0, 3], vec![1, 0]], vec![2, 0]);
        let sched = build_schedule(&s, 40, 9, ScheduleMode::RandomizedUpdates);
        let doc: ScheduleDocument = toml::from_str(&sched.to_toml()).unwrap();
        assert_eq!(doc.into_schedule().unwrap(), sched);
    }
}
