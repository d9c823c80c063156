//! Problem instances: objective, constraint box and delay bounds, plus the
//! random instance generator and the on-disk document format.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asynchrony::DelaySpec;
use crate::blockvec::BlockPartition;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, symmetric_eigenvalues, DenseMatrix};
use crate::objective::{BlockLipschitzMatrix, BoxConstraint, QuadraticObjective, SmoothObjective};
use crate::rng::{self, Domain};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    objective: QuadraticObjective<T>,
    constraints: BoxConstraint<T>,
    delays: DelaySpec,
    lipschitz: BlockLipschitzMatrix<T>,
    seed: Option<u64>,
}

impl<T: Scalar> Problem<T> {
    /// Checks that the pieces share a partition and that uncoupled agents have
    /// zero delay bounds.
    pub fn new(
        objective: QuadraticObjective<T>,
        constraints: BoxConstraint<T>,
        delays: DelaySpec,
        seed: Option<u64>,
    ) -> Result<Self> {
        if objective.partition() != constraints.partition() {
            return Err(Error::Partition("objective and constraints use different partitions".into()));
        }
        let lipschitz = objective.block_lipschitz();
        let delays = DelaySpec::with_coupling(
            delays.bounds().clone(),
            delays.update_bounds().to_vec(),
            &lipschitz,
        )?;
        Ok(Self { objective, constraints, delays, lipschitz, seed })
    }

    pub fn objective(&self) -> &QuadraticObjective<T> {
        &self.objective
    }

    pub fn constraints(&self) -> &BoxConstraint<T> {
        &self.constraints
    }

    pub fn delays(&self) -> &DelaySpec {
        &self.delays
    }

    pub fn lipschitz(&self) -> &BlockLipschitzMatrix<T> {
        &self.lipschitz
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        self.objective.partition()
    }

    pub fn num_agents(&self) -> usize {
        self.partition().num_blocks()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Smallest and largest eigenvalue of `Q`.
    pub fn eigenvalue_extremes(&self) -> (T, T) {
        let eig = symmetric_eigenvalues(self.objective.q());
        (eig[0], eig[eig.len() - 1])
    }

    pub fn to_document(&self) -> ProblemDocument {
        let f = |v: &[T]| v.iter().map(|x| x.f64()).collect::<Vec<f64>>();
        let q = self.objective.q();
        ProblemDocument {
            format: PROBLEM_FORMAT.into(),
            version: 1,
            seed: self.seed.map(|s| s.to_string()),
            block_sizes: self.partition().sizes().to_vec(),
            q: (0..q.rows()).map(|i| f(q.row(i))).collect(),
            r: f(self.objective.r()),
            lower: f(self.constraints.lower()),
            upper: f(self.constraints.upper()),
            delay_bounds: self.delays.bounds().to_rows(),
            update_bounds: self.delays.update_bounds().to_vec(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("problem serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ProblemDocument =
            toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        doc.into_problem()
    }

    /// SHA-256 of the canonical TOML document, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub const PROBLEM_FORMAT: &str = "pabcd-problem";

/// On-disk problem document.
///
/// Floats are written in shortest round-trip decimal, so a save/load cycle
/// is bit exact. `delay_bounds[i][j]` is `D^j_i`, the bound on the age of
/// agent `j`'s block as seen by agent `i` (rows and columns in agent order).
/// The seed is a string because TOML integers are signed 64-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<String>,
    pub block_sizes: Vec<usize>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub delay_bounds: Vec<Vec<u32>>,
    pub update_bounds: Vec<u32>,
}

impl ProblemDocument {
    pub fn into_problem<T: Scalar>(self) -> Result<Problem<T>> {
        if self.format != PROBLEM_FORMAT || self.version != 1 {
            return Err(Error::Document(format!(
                "unsupported problem format {} v{}",
                self.format, self.version
            )));
        }
        let seed = self
            .seed
            .map(|s| s.parse::<u64>().map_err(|e| Error::Document(format!("bad seed: {e}"))))
            .transpose()?;
        let partition = Arc::new(BlockPartition::new(self.block_sizes)?);
        let t = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
        let rows: Vec<Vec<T>> = self.q.into_iter().map(t).collect();
        let q = DenseMatrix::from_rows(&rows).ok_or_else(|| Error::Document("Q is ragged".into()))?;
        let objective = QuadraticObjective::new(q, t(self.r), partition.clone())?;
        let constraints = BoxConstraint::new(t(self.lower), t(self.upper), partition)?;
        let bounds = DenseMatrix::from_rows(&self.delay_bounds)
            .ok_or_else(|| Error::Document("delay bounds are ragged".into()))?;
        // Coupling is checked against the objective in Problem::new.
        let delays = DelaySpec::new(bounds, self.update_bounds)?;
        Problem::new(objective, constraints, delays, seed)
    }
}

/// Parameters of the random nonconvex quadratic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub block_sizes: Vec<usize>,
    /// Target spectral norm of `Q`.
    pub lipschitz: f64,
    /// Box `|x_k| ≤ box_radius`; may be infinite.
    pub box_radius: f64,
    /// `D^j_i` is uniform on `{0, …, delay_max}`.
    pub delay_max: u32,
    /// `G_i` is uniform on `{0, …, update_bound_max}`.
    pub update_bound_max: u32,
}

impl GeneratorParams {
    /// `agents` scalar blocks, `L = 100`, `|x| ≤ 10⁴`, delays up to 20,
    /// updates every step.
    pub fn benchmark(seed: u64, agents: usize) -> Self {
        Self {
            seed,
            block_sizes: vec![1; agents],
            lipschitz: 100.0,
            box_radius: 10_000.0,
            delay_max: 20,
            update_bound_max: 0,
        }
    }
}

/// Random indefinite quadratic over a box with random delay bounds.
///
/// * `Q = (A + Aᵀ)/2` with `A` i.i.d. standard normal, negated if it turns
///   out positive semidefinite, then scaled to spectral norm `lipschitz`.
/// * `r` i.i.d. uniform on `[-lipschitz, lipschitz]`.
/// * `D^j_i` i.i.d. uniform on `{0, …, delay_max}` per ordered pair `i ≠ j`
///   (zero where the blocks are uncoupled), `G_i` uniform on
///   `{0, …, update_bound_max}`.
///
/// The draws happen on the problem stream family in `f64`; the result is
/// converted to `T` afterwards.
pub fn generate_problem<T: Scalar>(params: &GeneratorParams) -> Result<Problem<T>> {
    if !(params.lipschitz > 0.0) || !params.lipschitz.is_finite() {
        return Err(Error::Config(format!(
            "Lipschitz target must be positive and finite, got {}",
            params.lipschitz
        )));
    }
    if !(params.box_radius > 0.0) {
        return Err(Error::Config(format!("box radius must be positive, got {}", params.box_radius)));
    }
    let partition = Arc::new(BlockPartition::new(params.block_sizes.clone())?);
    let n = partition.dim();
    let agents = partition.num_blocks();

    let mut hess = rng::stream(params.seed, Domain::Hessian, 0);
    let raw: Vec<f64> = (0..n * n).map(|_| hess.sample(StandardNormal)).collect();
    let mut q = DenseMatrix::from_row_major(n, n, raw).symmetrized();
    let eig = symmetric_eigenvalues(&q);
    if eig[0] >= 0.0 {
        q.scale(-1.0);
    }
    let norm = spectral_norm(&q);
    if norm == 0.0 {
        return Err(Error::Config("sampled Hessian is zero".into()));
    }
    q.scale(params.lipschitz / norm);

    let mut lin = rng::stream(params.seed, Domain::Linear, 0);
    let r: Vec<f64> =
        (0..n).map(|_| lin.random_range(-params.lipschitz..=params.lipschitz)).collect();

    let to_t = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let q_t = DenseMatrix::from_row_major(n, n, to_t(q.as_slice()));
    let objective = QuadraticObjective::new(q_t, to_t(&r), partition.clone())?;
    let lipschitz = objective.block_lipschitz();

    let mut bounds = DenseMatrix::filled(agents, agents, 0u32);
    for i in 0..agents {
        for j in (0..agents).filter(|&j| j != i) {
            let mut s = rng::stream(params.seed, Domain::DelayBounds, rng::link_index(i, j, agents));
            let d = s.random_range(0..=params.delay_max);
            if lipschitz.coupled(i, j) {
                bounds[(i, j)] = d;
            }
        }
    }
    let mut upd = rng::stream(params.seed, Domain::UpdateBounds, 0);
    let update_bounds = (0..agents).map(|_| upd.random_range(0..=params.update_bound_max)).collect();

    let constraints = BoxConstraint::symmetric(T::of(params.box_radius), partition)?;
    let delays = DelaySpec::with_coupling(bounds, update_bounds, &lipschitz)?;
    Problem::new(objective, constraints, delays, Some(params.seed))
}
