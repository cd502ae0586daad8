//! The successor-feature matrix: exact dynamic-programming builders, a
//! tabular TD learner, and the analytic off-diagonal mode.
//!
//! The matrix is indexed by (policy, cumulant, state, action), where both
//! policies and cumulants are (feature, bin) pairs. In
//! [`SfMode::OffDiagonalAnalytic`] only each policy's own-feature block is
//! stored; entries for any other feature are computed on read as
//! `phi(s) / (1 - gamma)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, DeterministicMdp, StateId, TransitionTable};
use crate::features::{BinGrid, FeatureMap};
use crate::util::{argmax_tol, mix_seed, TIE_TOL};
use crate::{Error, Result};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sup-norm tolerance of the exact dynamic-programming fixed points.
pub const EXACT_TOL: f64 = 1e-12;

/// A (feature, bin) pair. Indexes control policies and cumulants alike:
/// policy (i,j) is the optimal policy for cumulant (i,j).
/// `feature` is 0-based, `bin` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureBin {
    pub feature: usize,
    pub bin: usize,
}

impl FeatureBin {
    pub fn new(feature: usize, bin: usize) -> Self {
        Self { feature, bin }
    }

    pub fn flat(self, m: usize) -> usize {
        debug_assert!((1..=m).contains(&self.bin));
        self.feature * m + self.bin - 1
    }

    pub fn from_flat(flat: usize, m: usize) -> Self {
        Self {
            feature: flat / m,
            bin: flat % m + 1,
        }
    }
}

/// Identifier of one feature-control policy.
pub type PolicyId = FeatureBin;
/// Identifier of one indicator cumulant.
pub type CumulantId = FeatureBin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfMode {
    Full,
    OffDiagonalAnalytic,
}

/// Dimensions of a successor-feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfDims {
    pub k: usize,
    pub m: usize,
    pub state_count: usize,
    pub action_count: usize,
}

impl SfDims {
    /// Number of policies = number of cumulants.
    pub fn n(&self) -> usize {
        self.k * self.m
    }

    /// Stored (policy, cumulant) pairs per (state, action):
    /// `(k*m)^2` in full mode, `k*m^2` in off-diagonal-analytic mode.
    pub fn stored_columns_per_state_action(&self, mode: SfMode) -> usize {
        match mode {
            SfMode::Full => self.n() * self.n(),
            SfMode::OffDiagonalAnalytic => self.k * self.m * self.m,
        }
    }
}

/// Deterministic greedy policy derived from a value table; ties resolve to
/// the lowest action index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    pub policy_id: PolicyId,
    pub actions: Vec<ActionId>,
}

impl GreedyPolicy {
    pub fn act(&self, state: StateId) -> ActionId {
        self.actions[state.0]
    }
}

#[derive(Serialize, Deserialize)]
struct SfMatrixFile {
    format: String,
    version: u32,
    k: usize,
    m: usize,
    state_count: usize,
    action_count: usize,
    gamma: f64,
    mode: SfMode,
    state_bins: Vec<u16>,
    entries: Vec<f64>,
}

const FILE_FORMAT: &str = "sflab-sf-matrix";
const FILE_VERSION: u32 = 1;

/// The table of successor features of every feature-control policy with
/// respect to every cumulant.
#[derive(Debug, Clone, PartialEq)]
pub struct SfMatrix {
    dims: SfDims,
    gamma: f64,
    mode: SfMode,
    /// 1-based occupied bin per `[state * k + feature]`.
    state_bins: Vec<u16>,
    entries: Vec<f64>,
}

impl SfMatrix {
    pub fn zeros(dims: SfDims, gamma: f64, state_bins: Vec<u16>, mode: SfMode) -> Self {
        assert_eq!(state_bins.len(), dims.state_count * dims.k);
        let stored =
            dims.stored_columns_per_state_action(mode) * dims.state_count * dims.action_count;
        Self {
            dims,
            gamma,
            mode,
            state_bins,
            entries: vec![0.0; stored],
        }
    }

    pub fn dims(&self) -> SfDims {
        self.dims
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mode(&self) -> SfMode {
        self.mode
    }

    pub fn stored_entry_count(&self) -> usize {
        self.entries.len()
    }

    /// 1-based bin occupied by `feature` in `state`.
    pub fn bin_of(&self, state: StateId, feature: usize) -> usize {
        self.state_bins[state.0 * self.dims.k + feature] as usize
    }

    /// Indicator cumulant value of `state`.
    pub fn phi(&self, state: StateId, cumulant: CumulantId) -> f64 {
        f64::from(self.bin_of(state, cumulant.feature) == cumulant.bin)
    }

    #[inline]
    fn full_index(&self, p: usize, c: usize, s: usize, a: usize) -> usize {
        ((p * self.dims.n() + c) * self.dims.state_count + s) * self.dims.action_count + a
    }

    #[inline]
    fn diag_index(&self, p: usize, bin: usize, s: usize, a: usize) -> usize {
        ((p * self.dims.m + bin - 1) * self.dims.state_count + s) * self.dims.action_count + a
    }

    /// The matrix entry `Psi[(policy)][(cumulant)](state, action)`.
    /// In off-diagonal-analytic mode, cross-feature entries are the closed
    /// form `phi(s) / (1 - gamma)`.
    pub fn value(
        &self,
        policy: PolicyId,
        cumulant: CumulantId,
        state: StateId,
        action: ActionId,
    ) -> f64 {
        match self.mode {
            SfMode::Full => {
                self.entries[self.full_index(
                    policy.flat(self.dims.m),
                    cumulant.flat(self.dims.m),
                    state.0,
                    action.0,
                )]
            }
            SfMode::OffDiagonalAnalytic => {
                if cumulant.feature == policy.feature {
                    self.entries[self.diag_index(
                        policy.flat(self.dims.m),
                        cumulant.bin,
                        state.0,
                        action.0,
                    )]
                } else {
                    self.phi(state, cumulant) / (1.0 - self.gamma)
                }
            }
        }
    }

    /// The analytic cross-feature read: `phi_lh(state) / (1 - gamma)`.
    /// Errors when the cumulant shares the policy's feature or when the
    /// matrix is not in off-diagonal-analytic mode.
    pub fn off_diagonal_read(
        &self,
        cumulant: CumulantId,
        policy: PolicyId,
        state: StateId,
    ) -> Result<f64> {
        if self.mode != SfMode::OffDiagonalAnalytic {
            return Err(Error::NotOffDiagonalMode);
        }
        if cumulant.feature == policy.feature {
            return Err(Error::OffDiagonalOwnFeature {
                feature: cumulant.feature,
            });
        }
        Ok(self.phi(state, cumulant) / (1.0 - self.gamma))
    }

    fn set(&mut self, p: usize, c: usize, s: usize, a: usize, v: f64) {
        let idx = match self.mode {
            SfMode::Full => self.full_index(p, c, s, a),
            SfMode::OffDiagonalAnalytic => {
                debug_assert_eq!(c / self.dims.m, p / self.dims.m);
                self.diag_index(p, c % self.dims.m + 1, s, a)
            }
        };
        self.entries[idx] = v;
    }

    /// Greedy action table of one policy from its own diagonal block.
    pub fn greedy_policy(&self, policy: PolicyId, tie_tol: f64) -> GreedyPolicy {
        let a_count = self.dims.action_count;
        let own = CumulantId::new(policy.feature, policy.bin);
        let mut actions = Vec::with_capacity(self.dims.state_count);
        let mut q = vec![0.0; a_count];
        for s in 0..self.dims.state_count {
            for (a, slot) in q.iter_mut().enumerate() {
                *slot = self.value(policy, own, StateId(s), ActionId(a));
            }
            actions.push(ActionId(argmax_tol(&q, tie_tol)));
        }
        GreedyPolicy { policy_id: policy, actions }
    }

    /// Largest Bellman residual `|psi(s,a) - (phi(s) + gamma psi(s', a*))|`
    /// over all stored entries, with `a*` the stored greedy action at `s'`.
    pub fn max_bellman_residual(&self, transitions: &TransitionTable) -> f64 {
        let m = self.dims.m;
        let mut worst = 0.0f64;
        for pf in 0..self.dims.n() {
            let policy = PolicyId::from_flat(pf, m);
            let greedy = self.greedy_policy(policy, TIE_TOL);
            let cumulants: Vec<usize> = match self.mode {
                SfMode::Full => (0..self.dims.n()).collect(),
                SfMode::OffDiagonalAnalytic => {
                    (policy.feature * m..(policy.feature + 1) * m).collect()
                }
            };
            for s in 0..self.dims.state_count {
                for a in 0..self.dims.action_count {
                    let s2 = transitions.next(StateId(s), ActionId(a));
                    let astar = greedy.act(s2);
                    for &cf in &cumulants {
                        let c = CumulantId::from_flat(cf, m);
                        let here = self.value(policy, c, StateId(s), ActionId(a));
                        let target =
                            self.phi(StateId(s), c) + self.gamma * self.value(policy, c, s2, astar);
                        worst = worst.max((here - target).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest absolute difference between the stored entries of two
    /// matrices with identical dimensions and mode.
    pub fn sup_norm_gap(&self, other: &SfMatrix) -> Result<f64> {
        if self.dims != other.dims || self.mode != other.mode {
            return Err(Error::DimensionMismatch(
                "sup_norm_gap requires matching dimensions and mode".into(),
            ));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SfMatrixFile {
            format: FILE_FORMAT.into(),
            version: FILE_VERSION,
            k: self.dims.k,
            m: self.dims.m,
            state_count: self.dims.state_count,
            action_count: self.dims.action_count,
            gamma: self.gamma,
            mode: self.mode,
            state_bins: self.state_bins.clone(),
            entries: self.entries.clone(),
        };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(&file)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: SfMatrixFile = serde_json::from_slice(&std::fs::read(path)?)?;
        if file.format != FILE_FORMAT || file.version != FILE_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported matrix file {}/{}",
                file.format, file.version
            )));
        }
        let dims = SfDims {
            k: file.k,
            m: file.m,
            state_count: file.state_count,
            action_count: file.action_count,
        };
        let expect =
            dims.stored_columns_per_state_action(file.mode) * dims.state_count * dims.action_count;
        if file.entries.len() != expect || file.state_bins.len() != dims.state_count * dims.k {
            return Err(Error::InvalidConfig("matrix file has wrong sizes".into()));
        }
        Ok(Self {
            dims,
            gamma: file.gamma,
            mode: file.mode,
            state_bins: file.state_bins,
            entries: file.entries,
        })
    }
}

// ---------------------------------------------------------------------------
// exact dynamic programming
// ---------------------------------------------------------------------------

/// `V*` of the reward `r(s) = reward[s]` by Jacobi value iteration to
/// sup-norm tolerance `tol`.
pub(crate) fn value_iteration(
    transitions: &TransitionTable,
    reward: &[f64],
    gamma: f64,
    tol: f64,
) -> Vec<f64> {
    let (s_count, a_count) = (transitions.state_count(), transitions.action_count());
    let mut v = vec![0.0f64; s_count];
    let mut next = vec![0.0f64; s_count];
    loop {
        let mut delta = 0.0f64;
        for s in 0..s_count {
            let mut best = f64::NEG_INFINITY;
            for a in 0..a_count {
                best = best.max(v[transitions.next(StateId(s), ActionId(a)).0]);
            }
            let nv = reward[s] + gamma * best;
            delta = delta.max((nv - v[s]).abs());
            next[s] = nv;
        }
        std::mem::swap(&mut v, &mut next);
        if delta < tol {
            return v;
        }
    }
}

/// `V^pi` of a deterministic policy under `r(s) = reward[s]`.
pub(crate) fn policy_value(
    transitions: &TransitionTable,
    reward: &[f64],
    policy: &[ActionId],
    gamma: f64,
    tol: f64,
) -> Vec<f64> {
    let s_count = transitions.state_count();
    let mut v = vec![0.0f64; s_count];
    let mut next = vec![0.0f64; s_count];
    loop {
        let mut delta = 0.0f64;
        for s in 0..s_count {
            let nv = reward[s] + gamma * v[transitions.next(StateId(s), policy[s]).0];
            delta = delta.max((nv - v[s]).abs());
            next[s] = nv;
        }
        std::mem::swap(&mut v, &mut next);
        if delta < tol {
            return v;
        }
    }
}

/// Greedy action table from state values, ties to the lowest action index.
pub(crate) fn greedy_from_values(
    transitions: &TransitionTable,
    reward: &[f64],
    gamma: f64,
    v: &[f64],
) -> Vec<ActionId> {
    let a_count = transitions.action_count();
    let mut actions = Vec::with_capacity(transitions.state_count());
    let mut q = vec![0.0f64; a_count];
    for s in 0..transitions.state_count() {
        for (a, slot) in q.iter_mut().enumerate() {
            *slot = reward[s] + gamma * v[transitions.next(StateId(s), ActionId(a)).0];
        }
        actions.push(ActionId(argmax_tol(&q, TIE_TOL)));
    }
    actions
}

fn indicator_reward(state_bins: &[u16], k: usize, cumulant: CumulantId, s_count: usize) -> Vec<f64> {
    (0..s_count)
        .map(|s| f64::from(state_bins[s * k + cumulant.feature] as usize == cumulant.bin))
        .collect()
}

/// The optimal policy induced by one indicator cumulant, as an explicit
/// action table, together with its state values.
pub fn exact_optimal_policy(
    mdp: &(impl DeterministicMdp + ?Sized),
    features: &FeatureMap,
    grid: &BinGrid,
    cumulant: CumulantId,
    gamma: f64,
) -> Result<(GreedyPolicy, Vec<f64>)> {
    let transitions = TransitionTable::build(mdp)?;
    let state_bins = features.bin_table(grid)?;
    let reward = indicator_reward(&state_bins, features.k(), cumulant, transitions.state_count());
    let v = value_iteration(&transitions, &reward, gamma, EXACT_TOL);
    let actions = greedy_from_values(&transitions, &reward, gamma, &v);
    Ok((
        GreedyPolicy {
            policy_id: cumulant,
            actions,
        },
        v,
    ))
}

/// Successor features of one deterministic policy with respect to all
/// `k * m` cumulants: the fixed point of
/// `psi_c(s, a) = phi_c(s) + gamma * psi_c(s', pi(s'))`.
///
/// Returned flat as `[(cumulant * state_count + state) * action_count + action]`.
pub fn exact_policy_evaluation(
    mdp: &(impl DeterministicMdp + ?Sized),
    features: &FeatureMap,
    grid: &BinGrid,
    policy: &[ActionId],
    gamma: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let transitions = TransitionTable::build(mdp)?;
    let state_bins = features.bin_table(grid)?;
    let (k, m) = (features.k(), grid.m);
    let cumulants: Vec<CumulantId> = (0..k * m).map(|c| CumulantId::from_flat(c, m)).collect();
    Ok(evaluate_cumulants(
        &transitions,
        &state_bins,
        k,
        &cumulants,
        policy,
        gamma,
        tol,
    ))
}

/// On-policy values per cumulant, then one lookahead step to (s, a) entries.
fn evaluate_cumulants(
    transitions: &TransitionTable,
    state_bins: &[u16],
    k: usize,
    cumulants: &[CumulantId],
    policy: &[ActionId],
    gamma: f64,
    tol: f64,
) -> Vec<f64> {
    let (s_count, a_count) = (transitions.state_count(), transitions.action_count());
    let mut out = vec![0.0f64; cumulants.len() * s_count * a_count];
    for (ci, &c) in cumulants.iter().enumerate() {
        let reward = indicator_reward(state_bins, k, c, s_count);
        let v = policy_value(transitions, &reward, policy, gamma, tol);
        for s in 0..s_count {
            for a in 0..a_count {
                let s2 = transitions.next(StateId(s), ActionId(a));
                out[(ci * s_count + s) * a_count + a] = reward[s] + gamma * v[s2.0];
            }
        }
    }
    out
}

/// Builds the exact successor-feature matrix: for each of the `k * m`
/// cumulants, an optimal policy by value iteration, then exact policy
/// evaluation on every stored cumulant. Policies solve in parallel.
pub fn build_exact_sf_matrix(
    mdp: &(impl DeterministicMdp + Sync + ?Sized),
    features: &FeatureMap,
    grid: &BinGrid,
    gamma: f64,
    mode: SfMode,
) -> Result<SfMatrix> {
    let transitions = TransitionTable::build(mdp)?;
    let state_bins = features.bin_table(grid)?;
    let (k, m) = (features.k(), grid.m);
    let dims = SfDims {
        k,
        m,
        state_count: transitions.state_count(),
        action_count: transitions.action_count(),
    };
    let n = dims.n();
    let blocks: Vec<(usize, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|pf| {
            let policy_id = PolicyId::from_flat(pf, m);
            let reward =
                indicator_reward(&state_bins, k, policy_id, transitions.state_count());
            let v = value_iteration(&transitions, &reward, gamma, EXACT_TOL);
            let actions = greedy_from_values(&transitions, &reward, gamma, &v);
            let cumulants: Vec<CumulantId> = match mode {
                SfMode::Full => (0..n).map(|c| CumulantId::from_flat(c, m)).collect(),
                SfMode::OffDiagonalAnalytic => (1..=m)
                    .map(|bin| CumulantId::new(policy_id.feature, bin))
                    .collect(),
            };
            let block = evaluate_cumulants(
                &transitions,
                &state_bins,
                k,
                &cumulants,
                &actions,
                gamma,
                EXACT_TOL,
            );
            (pf, block)
        })
        .collect();

    let mut matrix = SfMatrix::zeros(dims, gamma, state_bins, mode);
    let (s_count, a_count) = (dims.state_count, dims.action_count);
    for (pf, block) in blocks {
        let cumulant_flats: Vec<usize> = match mode {
            SfMode::Full => (0..n).collect(),
            SfMode::OffDiagonalAnalytic => {
                let base = (pf / m) * m;
                (base..base + m).collect()
            }
        };
        for (ci, &cf) in cumulant_flats.iter().enumerate() {
            for s in 0..s_count {
                for a in 0..a_count {
                    matrix.set(pf, cf, s, a, block[(ci * s_count + s) * a_count + a]);
                }
            }
        }
    }
    Ok(matrix)
}

// ---------------------------------------------------------------------------
// tabular TD learning
// ---------------------------------------------------------------------------

/// Schedule of the endogenous (reward-free) learning stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfLearnSchedule {
    pub steps: u64,
    pub alpha: f64,
    pub epsilon: f64,
    pub episode_len: u32,
    /// Actions within this margin of the best estimate count as tied and
    /// resolve to the lowest index, mirroring the exact builder once the
    /// estimates converge. Must stay below the smallest true action-value
    /// gap of the environment.
    pub tie_tol: f64,
}

impl Default for SfLearnSchedule {
    fn default() -> Self {
        Self {
            steps: 200_000,
            alpha: 0.3,
            epsilon: 0.5,
            episode_len: 10,
            tie_tol: 2e-2,
        }
    }
}

impl SfLearnSchedule {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidSchedule(format!("alpha {} not in (0,1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidSchedule(format!(
                "epsilon {} not in [0,1]",
                self.epsilon
            )));
        }
        if self.episode_len == 0 {
            return Err(Error::InvalidSchedule("episode_len must be >= 1".into()));
        }
        if self.tie_tol < 0.0 {
            return Err(Error::InvalidSchedule("tie_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Tabular TD(0) learning of the successor-feature matrix.
///
/// Behavior: each episode samples a policy id uniformly, starts from a
/// uniformly random state, and acts epsilon-greedily with respect to that
/// policy's own diagonal block. Each transition updates every stored column
/// of the acting policy toward `phi(s) + gamma * psi(s', a*)`, with `a*` the
/// current greedy action of the acting policy at `s'`.
pub fn td_learn_sf(
    mdp: &(impl DeterministicMdp + ?Sized),
    features: &FeatureMap,
    grid: &BinGrid,
    gamma: f64,
    schedule: &SfLearnSchedule,
    mode: SfMode,
    seed: u64,
) -> Result<SfMatrix> {
    schedule.validate()?;
    let transitions = TransitionTable::build(mdp)?;
    let state_bins = features.bin_table(grid)?;
    let (k, m) = (features.k(), grid.m);
    let dims = SfDims {
        k,
        m,
        state_count: transitions.state_count(),
        action_count: transitions.action_count(),
    };
    let n = dims.n();
    let mut matrix = SfMatrix::zeros(dims, gamma, state_bins, mode);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x5f]));
    let (s_count, a_count) = (dims.state_count, dims.action_count);
    let mut q = vec![0.0f64; a_count];

    let mut steps_done = 0u64;
    while steps_done < schedule.steps {
        let pf = rng.gen_range(0..n);
        let policy = PolicyId::from_flat(pf, m);
        let own = CumulantId::new(policy.feature, policy.bin);
        let mut s = StateId(rng.gen_range(0..s_count));
        for _ in 0..schedule.episode_len {
            if steps_done >= schedule.steps {
                break;
            }
            let a = if rng.gen::<f64>() < schedule.epsilon {
                ActionId(rng.gen_range(0..a_count))
            } else {
                for (ai, slot) in q.iter_mut().enumerate() {
                    *slot = matrix.value(policy, own, s, ActionId(ai));
                }
                ActionId(argmax_tol(&q, schedule.tie_tol))
            };
            let s2 = transitions.next(s, a);
            for (ai, slot) in q.iter_mut().enumerate() {
                *slot = matrix.value(policy, own, s2, ActionId(ai));
            }
            let astar = ActionId(argmax_tol(&q, schedule.tie_tol));
            let cumulant_flats = match mode {
                SfMode::Full => 0..n,
                SfMode::OffDiagonalAnalytic => policy.feature * m..(policy.feature + 1) * m,
            };
            for cf in cumulant_flats {
                let c = CumulantId::from_flat(cf, m);
                let target = matrix.phi(s, c) + gamma * matrix.value(policy, c, s2, astar);
                let idx = match mode {
                    SfMode::Full => matrix.full_index(pf, cf, s.0, a.0),
                    SfMode::OffDiagonalAnalytic => matrix.diag_index(pf, c.bin, s.0, a.0),
                };
                matrix.entries[idx] += schedule.alpha * (target - matrix.entries[idx]);
            }
            s = s2;
            steps_done += 1;
        }
    }
    Ok(matrix)
}
