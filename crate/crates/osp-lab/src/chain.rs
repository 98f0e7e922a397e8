//! Exact analysis of finite Markov chains.
//!
//! Everything downstream leans on four quantities of the chain induced by a
//! fixed policy:
//!
//! - the stationary distribution `μ` with `μᵀP = μᵀ`, obtained by a direct
//!   linear solve of the balance equations (power iteration is relegated to
//!   test oracles; exactness matters because the smallest positive mass
//!   feeds a horizon threshold downstream),
//! - the mixing time `t_mix = min{ n : max_s d_TV(pⁿ(s,·), μ) ≤ 1/4 }`,
//! - the pseudo-spectral gap `β = max_k γ((P*)ᵏPᵏ)/k` where `P*` is the
//!   μ-adjoint kernel and `γ` is one minus the second-largest eigenvalue of
//!   the self-adjoint product,
//! - the average reward `ρ = μᵀr`.
//!
//! Validation of uniform ergodicity is exact graph theory, no numerics:
//! a finite chain is uniformly ergodic iff it has a single recurrent class
//! (a closed strongly connected component) and that class is aperiodic.
//! Unichains with transient states are accepted; `μ` is zero there.

use nalgebra::DMatrix;
use thiserror::Error;

/// Row-sum and distribution-mass tolerance.
const MASS_TOL: f64 = 1e-12;
/// Required residual of the stationary solve, ‖μᵀP − μᵀ‖₁.
const STATIONARY_RESIDUAL: f64 = 1e-10;
/// Absolute slack on the `d_TV ≤ 1/4` comparison; repeated matrix products
/// accumulate rounding while the threshold constant is exact.
const TV_SLACK: f64 = 1e-12;
/// Default cap on the mixing-time search.
pub const DEFAULT_MIXING_CAP: usize = 100_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChainError {
    #[error("dimension mismatch: {left} states vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("row {row} is not a probability vector: {reason}")]
    NotStochastic { row: usize, reason: String },
    #[error("not a probability distribution: {reason}")]
    NotDistribution { reason: String },
    #[error("not uniquely ergodic: {recurrent_classes} recurrent classes")]
    NotUniquelyErgodic { recurrent_classes: usize },
    #[error("stationary solve failed: {reason}")]
    StationarySolveFailed { reason: String },
    #[error("no n <= {cap} brings worst-start TV distance below 1/4: mixing exceeds cap")]
    MixingExceedsCap { cap: usize },
    #[error("state {state} is reachable from the support but has zero stationary mass")]
    ZeroMassReachable { state: usize },
}

/// Why a chain fails uniform ergodicity. The report is the result, not an
/// error: callers decide whether a violation is fatal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgodicityViolation {
    MultipleRecurrentClasses { count: usize },
    PeriodicRecurrentClass { period: u64 },
}

impl std::fmt::Display for ErgodicityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MultipleRecurrentClasses { count } => {
                write!(f, "{count} recurrent classes (must be exactly 1)")
            }
            Self::PeriodicRecurrentClass { period } => {
                write!(f, "recurrent class has period {period} (must be aperiodic)")
            }
        }
    }
}

/// Row-stochastic matrix; row `s` is `p(·|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ChainError> {
        let n = rows.len();
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ChainError::DimensionMismatch {
                    left: n,
                    right: row.len(),
                });
            }
            check_mass(row).map_err(|reason| ChainError::NotStochastic { row: s, reason })?;
        }
        Ok(Self { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.rows[i][j])
    }

    /// Edge list of the support digraph: `s → s'` iff `p(s'|s) > 0`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

/// Probability vector over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(mass: Vec<f64>) -> Result<Self, ChainError> {
        check_mass(&mass).map_err(|reason| ChainError::NotDistribution { reason })?;
        Ok(Self { mass })
    }

    pub fn point_mass(n: usize, s: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[s] = 1.0;
        Self { mass }
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
}

fn check_mass(v: &[f64]) -> Result<(), String> {
    let mut sum = 0.0;
    for (i, &p) in v.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("entry {i} = {p} outside [0,1]"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > MASS_TOL {
        return Err(format!("mass sums to {sum}, not 1"));
    }
    Ok(())
}

/// Total-variation distance: `sup_A |P(A) − Q(A)|`, which on a finite space
/// equals half the L1 distance.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64, ChainError> {
    if p.n() != q.n() {
        return Err(ChainError::DimensionMismatch {
            left: p.n(),
            right: q.n(),
        });
    }
    Ok(tv_slices(p.mass(), q.mass()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Checks that the chain has exactly one recurrent class and that it is
/// aperiodic; for finite chains this is uniform ergodicity (geometric
/// convergence from every start state).
pub fn validate_uniform_ergodicity(p: &TransitionMatrix) -> Result<(), ErgodicityViolation> {
    let adj = p.adjacency();
    let recurrent = recurrent_classes(&adj);
    if recurrent.len() != 1 {
        return Err(ErgodicityViolation::MultipleRecurrentClasses {
            count: recurrent.len(),
        });
    }
    let period = class_period(&adj, &recurrent[0]);
    if period != 1 {
        return Err(ErgodicityViolation::PeriodicRecurrentClass { period });
    }
    Ok(())
}

/// Closed strongly connected components, each sorted ascending.
fn recurrent_classes(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(adj);
    let n = adj.len();
    let mut comp_of = vec![0usize; n];
    for (id, comp) in comps.iter().enumerate() {
        for &s in comp {
            comp_of[s] = id;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(id, comp)| {
            comp.iter()
                .all(|&u| adj[u].iter().all(|&v| comp_of[v] == *id))
        })
        .map(|(_, comp)| comp)
        .collect()
}

/// Kosaraju's algorithm, iterative to keep large chains off the call stack.
fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push((start, 0));
        while let Some(top) = stack.last_mut() {
            let (u, i) = *top;
            if i < adj[u].len() {
                top.1 += 1;
                let v = adj[u][i];
                if !visited[v] {
                    visited[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }

    let mut radj = vec![Vec::new(); n];
    for (u, out) in adj.iter().enumerate() {
        for &v in out {
            radj[v].push(u);
        }
    }

    const UNASSIGNED: usize = usize::MAX;
    let mut comp_of = vec![UNASSIGNED; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut dfs = Vec::new();
    for &root in order.iter().rev() {
        if comp_of[root] != UNASSIGNED {
            continue;
        }
        let id = comps.len();
        comp_of[root] = id;
        let mut members = vec![root];
        dfs.push(root);
        while let Some(u) = dfs.pop() {
            for &v in &radj[u] {
                if comp_of[v] == UNASSIGNED {
                    comp_of[v] = id;
                    members.push(v);
                    dfs.push(v);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// Period of a strongly connected class: gcd of |d(u)+1−d(v)| over in-class
/// edges, with d = BFS levels from an arbitrary class member. Every cycle's
/// length is a multiple of this gcd, and cycles exist, so the gcd is ≥ 1.
fn class_period(adj: &[Vec<usize>], class: &[usize]) -> u64 {
    let n = adj.len();
    let mut in_class = vec![false; n];
    for &s in class {
        in_class[s] = true;
    }
    const UNSEEN: u64 = u64::MAX;
    let mut level = vec![UNSEEN; n];
    let root = class[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if in_class[v] && level[v] == UNSEEN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0u64;
    for &u in class {
        for &v in &adj[u] {
            if in_class[v] {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution by direct linear solve of the balance equations
/// `μᵀ(P − I) = 0` restricted to the recurrent class, with the last equation
/// replaced by the normalization `Σ μ = 1`. Transient states get mass zero.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Distribution, ChainError> {
    let n = p.n();
    let recurrent = recurrent_classes(&p.adjacency());
    if recurrent.len() != 1 {
        return Err(ChainError::NotUniquelyErgodic {
            recurrent_classes: recurrent.len(),
        });
    }
    let class = &recurrent[0];
    let r = class.len();

    // Columns of the system: (Pᵀ − I) on the class, last row overwritten
    // with ones; right-hand side e_r. The class is closed, so its rows of P
    // restricted to the class are still stochastic.
    let m = DMatrix::from_fn(r, r, |i, j| {
        if i == r - 1 {
            1.0
        } else {
            let delta = if i == j { 1.0 } else { 0.0 };
            p.rows[class[j]][class[i]] - delta
        }
    });
    let mut b = nalgebra::DVector::zeros(r);
    b[r - 1] = 1.0;
    let x = m
        .lu()
        .solve(&b)
        .ok_or_else(|| ChainError::StationarySolveFailed {
            reason: "balance system is singular".to_string(),
        })?;

    let total: f64 = x.iter().sum();
    let mut mass = vec![0.0; n];
    for (idx, &s) in class.iter().enumerate() {
        let v = x[idx] / total;
        if !(0.0..=1.0).contains(&v) {
            return Err(ChainError::StationarySolveFailed {
                reason: format!("solved mass {v} for state {s} outside [0,1]"),
            });
        }
        mass[s] = v;
    }

    let residual: f64 = (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| mass[i] * p.rows[i][j]).sum();
            (flow - mass[j]).abs()
        })
        .sum();
    if residual > STATIONARY_RESIDUAL {
        return Err(ChainError::StationarySolveFailed {
            reason: format!("residual {residual} exceeds {STATIONARY_RESIDUAL}"),
        });
    }
    Distribution::new(mass)
}

/// Worst-start total-variation distance to μ after `n_steps` steps:
/// `max_s d_TV(pⁿ(s,·), μ)`.
pub fn worst_start_tv(
    p: &TransitionMatrix,
    mu: &Distribution,
    n_steps: usize,
) -> Result<f64, ChainError> {
    if p.n() != mu.n() {
        return Err(ChainError::DimensionMismatch {
            left: p.n(),
            right: mu.n(),
        });
    }
    let single = p.to_dmatrix();
    let mut power = single.clone();
    for _ in 1..n_steps {
        power *= &single;
    }
    Ok(worst_row_tv(&power, mu.mass()))
}

fn worst_row_tv(power: &DMatrix<f64>, mu: &[f64]) -> f64 {
    (0..power.nrows())
        .map(|s| {
            0.5 * (0..power.ncols())
                .map(|j| (power[(s, j)] - mu[j]).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `min{ n : max_s d_TV(pⁿ(s,·), μ) ≤ 1/4 }`, found by iterated
/// matrix–matrix multiplication scanning n = 1, 2, … up to `cap`.
pub fn mixing_time(
    p: &TransitionMatrix,
    mu: &Distribution,
    cap: usize,
) -> Result<usize, ChainError> {
    if p.n() != mu.n() {
        return Err(ChainError::DimensionMismatch {
            left: p.n(),
            right: mu.n(),
        });
    }
    let single = p.to_dmatrix();
    let mut power = single.clone();
    for n in 1..=cap {
        if worst_row_tv(&power, mu.mass()) <= 0.25 + TV_SLACK {
            return Ok(n);
        }
        power *= &single;
    }
    Err(ChainError::MixingExceedsCap { cap })
}

/// Pseudo-spectral gap `β = max_{1 ≤ k ≤ k_max} γ((P*)ᵏPᵏ)/k` where
/// `P*(s,s') = μ(s')·P(s',s)/μ(s)` is the μ-adjoint and γ is one minus the
/// second-largest eigenvalue.
///
/// The product `(P*)ᵏPᵏ` is similar under `D_μ^{1/2}` to `CᵀC` with
/// `C = D_μ^{1/2} Pᵏ D_μ^{−1/2}`, a symmetric positive-semidefinite matrix
/// with top eigenvalue 1, so the eigenproblem is solved in symmetric form.
/// States outside the support of μ are excluded; the support must be closed
/// under P or the adjoint is undefined.
pub fn pseudo_spectral_gap(
    p: &TransitionMatrix,
    mu: &Distribution,
    k_max: usize,
) -> Result<f64, ChainError> {
    if p.n() != mu.n() {
        return Err(ChainError::DimensionMismatch {
            left: p.n(),
            right: mu.n(),
        });
    }
    let support: Vec<usize> = (0..p.n()).filter(|&s| mu.mass()[s] > 0.0).collect();
    for &s in &support {
        for (s_next, &prob) in p.rows[s].iter().enumerate() {
            if prob > 0.0 && mu.mass()[s_next] == 0.0 {
                return Err(ChainError::ZeroMassReachable { state: s_next });
            }
        }
    }
    let r = support.len();
    if r == 1 {
        return Ok(1.0);
    }

    let p_r = DMatrix::from_fn(r, r, |i, j| p.rows[support[i]][support[j]]);
    let sqrt_mu: Vec<f64> = support.iter().map(|&s| mu.mass()[s].sqrt()).collect();

    let mut beta = 0.0f64;
    let mut power = p_r.clone();
    for k in 1..=k_max.max(1) {
        let c = DMatrix::from_fn(r, r, |i, j| sqrt_mu[i] * power[(i, j)] / sqrt_mu[j]);
        let mut b = c.transpose() * &c;
        // Symmetrize away multiplication rounding before the eigensolve.
        b = (&b + b.transpose()) * 0.5;
        let mut eigen: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
        eigen.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let gamma = (1.0 - eigen[1]).clamp(0.0, 1.0);
        beta = beta.max(gamma / k as f64);
        power *= &p_r;
    }
    Ok(beta)
}

/// Everything the optimizer and the verifier need to know about one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainAnalysis {
    pub stationary: Distribution,
    pub mixing_time: usize,
    pub pseudo_spectral_gap: f64,
    pub avg_reward: f64,
}

/// Full analysis of a validated chain with per-state mean rewards.
/// The pseudo-spectral gap search runs to `k_max = 2·t_mix`; the maximizing
/// k lies within that range up to constant factors because `1/β ≤ 2·t_mix`.
pub fn analyze_chain(
    p: &TransitionMatrix,
    rewards: &[f64],
    cap: usize,
) -> Result<ChainAnalysis, ChainError> {
    if rewards.len() != p.n() {
        return Err(ChainError::DimensionMismatch {
            left: p.n(),
            right: rewards.len(),
        });
    }
    let stationary = stationary_distribution(p)?;
    let mixing = mixing_time(p, &stationary, cap)?;
    let gap = pseudo_spectral_gap(p, &stationary, 2 * mixing)?;
    let avg_reward = stationary
        .mass()
        .iter()
        .zip(rewards)
        .map(|(m, r)| m * r)
        .sum();
    Ok(ChainAnalysis {
        stationary,
        mixing_time: mixing,
        pseudo_spectral_gap: gap,
        avg_reward,
    })
}
