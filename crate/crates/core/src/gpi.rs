//! Few-shot transfer: generalized policy evaluation and improvement, weight
//! regression, analytic goal weights, and achievability checks.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, DeterministicMdp, StateId, TransitionTable};
use crate::features::{BinGrid, FeatureMap};
use crate::sf::{policy_value, CumulantId, PolicyId, SfMatrix};
use crate::util::{argmax_tol, TIE_TOL};
use crate::{Error, Result};

/// Task description consumed by GPE/GPI: one weight per (feature, bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub k: usize,
    pub m: usize,
    /// Row-major `[feature * m + bin - 1]`.
    pub values: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            values: vec![0.0; k * m],
        }
    }

    pub fn get(&self, feature: usize, bin: usize) -> f64 {
        self.values[feature * self.m + bin - 1]
    }

    pub fn set(&mut self, feature: usize, bin: usize, value: f64) {
        self.values[feature * self.m + bin - 1] = value;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            k: self.k,
            m: self.m,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `sum_l w[l][bin_l(s)]`, the reward `phi(s) . w` of a state.
    pub fn dot_phi(&self, matrix: &SfMatrix, state: StateId) -> f64 {
        (0..self.k)
            .map(|l| self.get(l, matrix.bin_of(state, l)))
            .sum()
    }
}

/// Per-feature constraint: either wildcard or a nonempty set of allowed bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRegion {
    /// One entry per feature; `None` is a wildcard.
    pub allowed: Vec<Option<BTreeSet<usize>>>,
}

impl GoalRegion {
    pub fn wildcard(k: usize) -> Self {
        Self {
            allowed: vec![None; k],
        }
    }

    /// Goal constraining every feature to a single bin.
    pub fn single_bins(bins: &[usize]) -> Self {
        Self {
            allowed: bins
                .iter()
                .map(|&b| Some(BTreeSet::from([b])))
                .collect(),
        }
    }

    pub fn constrain(mut self, feature: usize, bins: impl IntoIterator<Item = usize>) -> Self {
        self.allowed[feature] = Some(bins.into_iter().collect());
        self
    }

    pub fn k(&self) -> usize {
        self.allowed.len()
    }

    pub fn contains(&self, matrix: &SfMatrix, state: StateId) -> bool {
        self.allowed.iter().enumerate().all(|(f, set)| match set {
            None => true,
            Some(bins) => bins.contains(&matrix.bin_of(state, f)),
        })
    }

    /// Constrained features whose bin constraint `state` does not meet.
    pub fn unachieved_features(&self, matrix: &SfMatrix, state: StateId) -> Vec<usize> {
        self.allowed
            .iter()
            .enumerate()
            .filter_map(|(f, set)| match set {
                Some(bins) if !bins.contains(&matrix.bin_of(state, f)) => Some(f),
                _ => None,
            })
            .collect()
    }
}

fn check_dims(matrix: &SfMatrix, w: &WeightMatrix) -> Result<()> {
    let dims = matrix.dims();
    if w.k != dims.k || w.m != dims.m {
        return Err(Error::DimensionMismatch(format!(
            "weights are {}x{}, matrix expects {}x{}",
            w.k, w.m, dims.k, dims.m
        )));
    }
    Ok(())
}

/// Generalized policy evaluation: the value of `policy` on the task `w`,
/// `Q_w(s,a) = sum_{l,h} w_lh Psi[(policy)][(l,h)](s,a)`.
pub fn gpe(
    matrix: &SfMatrix,
    w: &WeightMatrix,
    state: StateId,
    action: ActionId,
    policy: PolicyId,
) -> Result<f64> {
    check_dims(matrix, w)?;
    Ok(gpe_unchecked(matrix, w, state, action, policy))
}

fn gpe_unchecked(
    matrix: &SfMatrix,
    w: &WeightMatrix,
    state: StateId,
    action: ActionId,
    policy: PolicyId,
) -> f64 {
    let dims = matrix.dims();
    match matrix.mode() {
        crate::sf::SfMode::Full => {
            let mut q = 0.0;
            for cf in 0..dims.n() {
                let wv = w.values[cf];
                if wv != 0.0 {
                    q += wv * matrix.value(policy, CumulantId::from_flat(cf, dims.m), state, action);
                }
            }
            q
        }
        crate::sf::SfMode::OffDiagonalAnalytic => {
            // stored own-feature block plus the analytic cross terms
            let mut q = 0.0;
            for bin in 1..=dims.m {
                let wv = w.get(policy.feature, bin);
                if wv != 0.0 {
                    q += wv
                        * matrix.value(policy, CumulantId::new(policy.feature, bin), state, action);
                }
            }
            let cross = w.dot_phi(matrix, state)
                - w.get(policy.feature, matrix.bin_of(state, policy.feature));
            q + cross / (1.0 - matrix.gamma())
        }
    }
}

/// Per-action GPI objective: `max over policies of Q_w(s, a)`.
pub fn gpi_action_values(matrix: &SfMatrix, w: &WeightMatrix, state: StateId) -> Result<Vec<f64>> {
    check_dims(matrix, w)?;
    let dims = matrix.dims();
    let mut out = vec![f64::NEG_INFINITY; dims.action_count];
    for (a, slot) in out.iter_mut().enumerate() {
        for pf in 0..dims.n() {
            let q = gpe_unchecked(
                matrix,
                w,
                state,
                ActionId(a),
                PolicyId::from_flat(pf, dims.m),
            );
            if q > *slot {
                *slot = q;
            }
        }
    }
    Ok(out)
}

/// GPI action selection: argmax over actions of the max over policies,
/// ties broken by lowest action index.
pub fn gpi_action(matrix: &SfMatrix, w: &WeightMatrix, state: StateId) -> Result<ActionId> {
    let values = gpi_action_values(matrix, w, state)?;
    Ok(ActionId(argmax_tol(&values, TIE_TOL)))
}

/// The GPI policy over every state, as an explicit table.
pub fn gpi_policy_table(matrix: &SfMatrix, w: &WeightMatrix) -> Result<Vec<ActionId>> {
    (0..matrix.dims().state_count)
        .map(|s| gpi_action(matrix, w, StateId(s)))
        .collect()
}

/// Exact per-state values of the GPI-induced policy under the task reward
/// `r(s) = sum w_lh phi_lh(s)`.
pub fn gpi_value_of_policy(
    mdp: &(impl DeterministicMdp + ?Sized),
    matrix: &SfMatrix,
    w: &WeightMatrix,
    gamma: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    check_dims(matrix, w)?;
    let transitions = TransitionTable::build(mdp)?;
    if transitions.state_count() != matrix.dims().state_count {
        return Err(Error::DimensionMismatch(
            "matrix was built for a different state space".into(),
        ));
    }
    let policy = gpi_policy_table(matrix, w)?;
    let reward: Vec<f64> = (0..transitions.state_count())
        .map(|s| w.dot_phi(matrix, StateId(s)))
        .collect();
    Ok(policy_value(&transitions, &reward, &policy, gamma, tol))
}

/// Ridge regression of task rewards onto the indicator cumulants
/// (normal equations, closed form). The sampling distribution is whatever
/// the caller supplies.
pub fn fit_weights(
    samples: &[(StateId, ActionId, f64)],
    features: &FeatureMap,
    grid: &BinGrid,
    lambda: f64,
) -> Result<WeightMatrix> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig(
            "weight regression needs at least one sample".into(),
        ));
    }
    let (k, m) = (features.k(), grid.m);
    let n = k * m;
    let bins = features.bin_table(grid)?;
    let mut xtx = DMatrix::<f64>::zeros(n, n);
    let mut xtr = DVector::<f64>::zeros(n);
    let mut active = vec![0usize; k];
    for &(s, _a, r) in samples {
        for (f, slot) in active.iter_mut().enumerate() {
            *slot = f * m + bins[s.0 * k + f] as usize - 1;
        }
        for &i in &active {
            for &j in &active {
                xtx[(i, j)] += 1.0;
            }
            xtr[i] += r;
        }
    }
    for i in 0..n {
        xtx[(i, i)] += lambda;
    }
    let solved = xtx
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&xtr))
        .or_else(|| xtx.lu().solve(&xtr))
        .ok_or_else(|| {
            Error::InvalidConfig("singular normal equations; use a positive ridge".into())
        })?;
    Ok(WeightMatrix {
        k,
        m,
        values: solved.iter().copied().collect(),
    })
}

/// The achievability construction's weights: `w_ij = 1` iff feature i is
/// constrained to bin j; wildcard rows are zero. Requires single-bin
/// constraints.
pub fn analytic_goal_weights(goal: &GoalRegion) -> Result<WeightMatrix> {
    let m = goal
        .allowed
        .iter()
        .flatten()
        .flat_map(|bins| bins.iter())
        .max()
        .copied()
        .unwrap_or(1);
    analytic_goal_weights_sized(goal, m)
}

/// Same as [`analytic_goal_weights`] with the bin count given explicitly
/// (needed when the largest allowed bin is below m).
pub fn analytic_goal_weights_sized(goal: &GoalRegion, m: usize) -> Result<WeightMatrix> {
    let mut w = WeightMatrix::zeros(goal.k(), m);
    for (f, set) in goal.allowed.iter().enumerate() {
        if let Some(bins) = set {
            if bins.len() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "analytic goal weights need single-bin constraints, feature {f} allows {}",
                    bins.len()
                )));
            }
            w.set(f, *bins.iter().next().unwrap(), 1.0);
        }
    }
    Ok(w)
}

/// Multi-bin extension of the analytic weights: 1 for every allowed bin of
/// every constrained feature. Coincides with [`analytic_goal_weights`] on
/// single-bin goals.
pub fn analytic_region_weights(goal: &GoalRegion, m: usize) -> WeightMatrix {
    let mut w = WeightMatrix::zeros(goal.k(), m);
    for (f, set) in goal.allowed.iter().enumerate() {
        if let Some(bins) = set {
            for &b in bins {
                w.set(f, b, 1.0);
            }
        }
    }
    w
}

/// The reduced GPI objective for single-bin goals: the best own-feature
/// successor feature among the still-unachieved constrained features, and 0
/// once the goal is met. Equals the full objective up to a state constant.
pub fn simplified_qmax(
    matrix: &SfMatrix,
    goal: &GoalRegion,
    state: StateId,
    action: ActionId,
) -> Result<f64> {
    if goal.k() != matrix.dims().k {
        return Err(Error::DimensionMismatch(format!(
            "goal has {} features, matrix {}",
            goal.k(),
            matrix.dims().k
        )));
    }
    let mut best: Option<f64> = None;
    for (f, set) in goal.allowed.iter().enumerate() {
        let Some(bins) = set else { continue };
        if bins.len() != 1 {
            return Err(Error::InvalidConfig(
                "simplified objective requires single-bin goals".into(),
            ));
        }
        let bin = *bins.iter().next().unwrap();
        if matrix.bin_of(state, f) == bin {
            continue;
        }
        let v = matrix.value(
            PolicyId::new(f, bin),
            CumulantId::new(f, bin),
            state,
            action,
        );
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    Ok(best.unwrap_or(0.0))
}

/// True iff rolling `policy` from every start state visits the goal within
/// `horizon` steps (the start state itself counts).
pub fn achieves(
    mdp: &(impl DeterministicMdp + ?Sized),
    policy: &dyn Fn(StateId) -> ActionId,
    in_goal: &dyn Fn(StateId) -> bool,
    horizon: usize,
) -> Result<bool> {
    let transitions = TransitionTable::build(mdp)?;
    for start in 0..transitions.state_count() {
        let mut s = StateId(start);
        let mut hit = in_goal(s);
        for _ in 0..horizon {
            if hit {
                break;
            }
            s = transitions.next(s, policy(s));
            hit = in_goal(s);
        }
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::HypercubeMdp;
    use crate::sf::{build_exact_sf_matrix, SfMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GAMMA: f64 = 0.9;

    fn cube_matrix(k: usize, m: usize, mode: SfMode) -> (HypercubeMdp, SfMatrix) {
        let mdp = HypercubeMdp::new(k, m);
        let features = mdp.canonical_features();
        let grid = BinGrid::new(m);
        let matrix = build_exact_sf_matrix(&mdp, &features, &grid, GAMMA, mode).unwrap();
        (mdp, matrix)
    }

    #[test]
    fn gpe_with_single_indicator_reads_the_entry() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let mut w = WeightMatrix::zeros(2, 3);
        w.set(0, 2, 1.0);
        let p = PolicyId::new(0, 2);
        for s in 0..mdp.state_count() {
            for a in 0..mdp.action_count() {
                let (s, a) = (StateId(s), ActionId(a));
                let q = gpe(&matrix, &w, s, a, p).unwrap();
                assert_eq!(q, matrix.value(p, CumulantId::new(0, 2), s, a));
            }
        }
    }

    #[test]
    fn gpe_with_zero_weights_is_zero() {
        let (_, matrix) = cube_matrix(2, 3, SfMode::Full);
        let w = WeightMatrix::zeros(2, 3);
        let q = gpe(&matrix, &w, StateId(0), ActionId(0), PolicyId::new(1, 3)).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn gpe_checks_dimensions() {
        let (_, matrix) = cube_matrix(2, 3, SfMode::Full);
        let w = WeightMatrix::zeros(2, 4);
        assert!(gpe(&matrix, &w, StateId(0), ActionId(0), PolicyId::new(0, 1)).is_err());
    }

    #[test]
    fn single_policy_gpi_is_that_policys_greedy() {
        let (mdp, matrix) = cube_matrix(1, 1, SfMode::Full);
        let mut w = WeightMatrix::zeros(1, 1);
        w.set(0, 1, 1.0);
        let greedy = matrix.greedy_policy(PolicyId::new(0, 1), TIE_TOL);
        for s in 0..mdp.state_count() {
            assert_eq!(gpi_action(&matrix, &w, StateId(s)).unwrap(), greedy.act(StateId(s)));
        }
    }

    #[test]
    fn gpi_at_goal_returns_stay() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::OffDiagonalAnalytic);
        let goal = GoalRegion::single_bins(&[2, 3]);
        let w = analytic_goal_weights_sized(&goal, 3).unwrap();
        let s = mdp.state_of(&[2, 3]);
        assert_eq!(gpi_action(&matrix, &w, s).unwrap(), ActionId(0));
    }

    #[test]
    fn gpi_rollout_reaches_corner_goal_in_diameter_steps() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let goal = GoalRegion::single_bins(&[3, 3]);
        let w = analytic_goal_weights_sized(&goal, 3).unwrap();
        let mut s = mdp.state_of(&[1, 1]);
        // BFS distance from (1,1) to (3,3) is 4
        let mut reached = false;
        for _ in 0..4 {
            s = mdp.next_state(s, gpi_action(&matrix, &w, s).unwrap());
            if mdp.coords_of(s) == vec![3, 3] {
                reached = true;
                break;
            }
        }
        assert!(reached);
    }

    #[test]
    fn gpi_value_dominates_constituents() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let mut w = WeightMatrix::zeros(2, 3);
        w.set(1, 2, 1.0);
        let v_gpi = gpi_value_of_policy(&mdp, &matrix, &w, GAMMA, 1e-12).unwrap();
        let features = mdp.canonical_features();
        let grid = BinGrid::new(3);
        let (_, v_star) = crate::sf::exact_optimal_policy(
            &mdp,
            &features,
            &grid,
            CumulantId::new(1, 2),
            GAMMA,
        )
        .unwrap();
        for s in 0..mdp.state_count() {
            assert!(v_gpi[s] >= v_star[s] - 1e-8);
        }
    }

    #[test]
    fn gpi_value_of_zero_task_is_zero() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let w = WeightMatrix::zeros(2, 3);
        let v = gpi_value_of_policy(&mdp, &matrix, &w, GAMMA, 1e-12).unwrap();
        assert!(v.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn fit_recovers_exact_linear_reward() {
        let mdp = HypercubeMdp::new(2, 3);
        let features = mdp.canonical_features();
        let grid = BinGrid::new(3);
        let bins = features.bin_table(&grid).unwrap();
        // reward is the (0, bin 1) indicator itself
        let samples: Vec<(StateId, ActionId, f64)> = (0..mdp.state_count())
            .map(|s| {
                (
                    StateId(s),
                    ActionId(0),
                    f64::from(bins[s * 2] == 1),
                )
            })
            .collect();
        let w = fit_weights(&samples, &features, &grid, 1e-9).unwrap();
        // predictions reproduce the reward on every state
        for &(s, _, r) in &samples {
            let pred: f64 = (0..2).map(|l| w.get(l, bins[s.0 * 2 + l] as usize)).sum();
            assert!((pred - r).abs() < 1e-6, "state {s:?}: {pred} vs {r}");
        }
        // row 0 peaks at bin 1, row 1 is flat
        assert!(w.get(0, 1) > w.get(0, 2) + 0.5 && w.get(0, 1) > w.get(0, 3) + 0.5);
        assert!((w.get(1, 1) - w.get(1, 2)).abs() < 1e-6);
    }

    #[test]
    fn fit_of_zero_reward_is_zero() {
        let mdp = HypercubeMdp::new(2, 3);
        let features = mdp.canonical_features();
        let grid = BinGrid::new(3);
        let samples: Vec<(StateId, ActionId, f64)> =
            (0..9).map(|s| (StateId(s), ActionId(0), 0.0)).collect();
        let w = fit_weights(&samples, &features, &grid, 1e-6).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_of_goal_indicator_matches_analytic_argmax() {
        let mdp = HypercubeMdp::new(2, 3);
        let features = mdp.canonical_features();
        let grid = BinGrid::new(3);
        let goal = GoalRegion::single_bins(&[2, 3]);
        let samples: Vec<(StateId, ActionId, f64)> = (0..mdp.state_count())
            .map(|s| {
                let c = mdp.coords_of(StateId(s));
                (StateId(s), ActionId(0), f64::from(c == vec![2, 3]))
            })
            .collect();
        let w = fit_weights(&samples, &features, &grid, 1e-6).unwrap();
        for f in 0..2 {
            let goal_bin = *goal.allowed[f].as_ref().unwrap().iter().next().unwrap();
            let row: Vec<f64> = (1..=3).map(|b| w.get(f, b)).collect();
            assert_eq!(argmax_tol(&row, 1e-12) + 1, goal_bin);
        }
    }

    #[test]
    fn fit_requires_samples() {
        let mdp = HypercubeMdp::new(2, 3);
        let features = mdp.canonical_features();
        assert!(fit_weights(&[], &features, &BinGrid::new(3), 1e-6).is_err());
    }

    #[test]
    fn analytic_weight_examples() {
        let w = analytic_goal_weights_sized(&GoalRegion::single_bins(&[2, 3]), 3).unwrap();
        assert_eq!(w.values, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let w0 = analytic_goal_weights_sized(&GoalRegion::wildcard(2), 3).unwrap();
        assert!(w0.values.iter().all(|&v| v == 0.0));
        let g = GoalRegion::wildcard(3)
            .constrain(0, [1])
            .constrain(2, [3]);
        let w = analytic_goal_weights_sized(&g, 3).unwrap();
        assert_eq!(w.values, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        // multi-bin constraints are not the theorem's form
        let multi = GoalRegion::wildcard(2).constrain(0, [1, 2]);
        assert!(analytic_goal_weights_sized(&multi, 3).is_err());
        let w = analytic_region_weights(&multi, 3);
        assert_eq!(w.values, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn simplified_qmax_examples() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let goal = GoalRegion::single_bins(&[2, 3]);
        let in_goal = mdp.state_of(&[2, 3]);
        for a in 0..mdp.action_count() {
            assert_eq!(
                simplified_qmax(&matrix, &goal, in_goal, ActionId(a)).unwrap(),
                0.0
            );
        }
        // exactly one unachieved feature: the max is that policy's entry
        let s = mdp.state_of(&[1, 3]);
        for a in 0..mdp.action_count() {
            let v = simplified_qmax(&matrix, &goal, s, ActionId(a)).unwrap();
            let direct = matrix.value(PolicyId::new(0, 2), CumulantId::new(0, 2), s, ActionId(a));
            assert_eq!(v, direct);
        }
    }

    #[test]
    fn simplified_qmax_argmax_matches_full_objective() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::OffDiagonalAnalytic);
        for b0 in 1..=3 {
            for b1 in 1..=3 {
                let goal = GoalRegion::single_bins(&[b0, b1]);
                let w = analytic_goal_weights_sized(&goal, 3).unwrap();
                for s in 0..mdp.state_count() {
                    let s = StateId(s);
                    let full = gpi_action_values(&matrix, &w, s).unwrap();
                    let simp: Vec<f64> = (0..mdp.action_count())
                        .map(|a| simplified_qmax(&matrix, &goal, s, ActionId(a)).unwrap())
                        .collect();
                    assert_eq!(
                        crate::util::argmax_set_tol(&full, TIE_TOL),
                        crate::util::argmax_set_tol(&simp, TIE_TOL),
                        "argmax sets differ at {s:?} goal ({b0},{b1})"
                    );
                }
            }
        }
    }

    #[test]
    fn full_and_analytic_matrices_choose_identical_actions() {
        let (mdp, full) = cube_matrix(2, 3, SfMode::Full);
        let (_, ana) = cube_matrix(2, 3, SfMode::OffDiagonalAnalytic);
        for b0 in 1..=3 {
            for b1 in 1..=3 {
                let w =
                    analytic_goal_weights_sized(&GoalRegion::single_bins(&[b0, b1]), 3).unwrap();
                for s in 0..mdp.state_count() {
                    assert_eq!(
                        gpi_action(&full, &w, StateId(s)).unwrap(),
                        gpi_action(&ana, &w, StateId(s)).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn positive_scaling_keeps_the_chosen_action() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let w = WeightMatrix {
                k: 2,
                m: 3,
                values: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            for c in [0.5, 2.0, 10.0] {
                let wc = w.scaled(c);
                for s in 0..mdp.state_count() {
                    assert_eq!(
                        gpi_action(&matrix, &w, StateId(s)).unwrap(),
                        gpi_action(&matrix, &wc, StateId(s)).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn achieves_trivial_and_impossible_goals() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let stay = |_: StateId| ActionId(0);
        let everywhere = |_: StateId| true;
        assert!(achieves(&mdp, &stay, &everywhere, 9).unwrap());
        let corner = mdp.state_of(&[3, 3]);
        let not_corner = |s: StateId| s == corner;
        assert!(!achieves(&mdp, &stay, &not_corner, 9).unwrap());
        let _ = matrix;
    }

    #[test]
    fn analytic_weights_achieve_every_single_bin_goal() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        for b0 in 1..=3 {
            for b1 in 1..=3 {
                let goal = GoalRegion::single_bins(&[b0, b1]);
                let w = analytic_goal_weights_sized(&goal, 3).unwrap();
                let table = gpi_policy_table(&matrix, &w).unwrap();
                let policy = |s: StateId| table[s.0];
                let in_goal = |s: StateId| goal.contains(&matrix, s);
                assert!(
                    achieves(&mdp, &policy, &in_goal, mdp.state_count()).unwrap(),
                    "goal ({b0},{b1}) not achieved"
                );
            }
        }
    }

    #[test]
    fn random_weight_dominance() {
        let (mdp, matrix) = cube_matrix(2, 3, SfMode::Full);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let w = WeightMatrix {
                k: 2,
                m: 3,
                values: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let v = gpi_value_of_policy(&mdp, &matrix, &w, GAMMA, 1e-12).unwrap();
            let table = gpi_policy_table(&matrix, &w).unwrap();
            for s in 0..mdp.state_count() {
                let s_id = StateId(s);
                for pf in 0..matrix.dims().n() {
                    let q = gpe(&matrix, &w, s_id, table[s], PolicyId::from_flat(pf, 3)).unwrap();
                    assert!(v[s] >= q - 1e-8, "dominance failed at state {s}");
                }
            }
        }
    }
}
