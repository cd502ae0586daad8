//! Deterministic-MDP interface, state enumeration, and reachability.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifier of one enumerable environment state, `0 <= index < state_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub usize);

/// Identifier of one action, `0 <= index < action_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

/// Largest state space the exact (dynamic-programming) paths will accept.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

/// A finite MDP with deterministic, total transitions.
///
/// Both experimental environments are deterministic, and exact verification
/// of the achievability guarantees requires it; stochastic transitions are
/// out of scope.
pub trait DeterministicMdp {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Total transition function. Must be identical across calls and runs.
    fn next_state(&self, state: StateId, action: ActionId) -> StateId;
}

/// All states in canonical order, refusing state spaces beyond `DEFAULT_STATE_CAP`.
pub fn enumerate_states<M: DeterministicMdp + ?Sized>(mdp: &M) -> Result<Vec<StateId>> {
    enumerate_states_with_cap(mdp, DEFAULT_STATE_CAP)
}

/// All states in canonical order, refusing state spaces beyond `cap`.
pub fn enumerate_states_with_cap<M: DeterministicMdp + ?Sized>(
    mdp: &M,
    cap: usize,
) -> Result<Vec<StateId>> {
    let count = mdp.state_count();
    if count > cap {
        return Err(Error::StateSpaceTooLarge { count, cap });
    }
    Ok((0..count).map(StateId).collect())
}

/// States reachable from `start` by action sequences of length at most `horizon`.
pub fn successor_closure<M: DeterministicMdp + ?Sized>(
    mdp: &M,
    start: StateId,
    horizon: usize,
) -> BTreeSet<StateId> {
    let mut seen: BTreeSet<StateId> = BTreeSet::new();
    seen.insert(start);
    let mut frontier = vec![start];
    for _ in 0..horizon {
        let mut next_frontier = Vec::new();
        for &s in &frontier {
            for a in 0..mdp.action_count() {
                let s2 = mdp.next_state(s, ActionId(a));
                if seen.insert(s2) {
                    next_frontier.push(s2);
                }
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        frontier = next_frontier;
    }
    seen
}

/// Dense transition table, the workhorse of every exact routine.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    state_count: usize,
    action_count: usize,
    next: Vec<usize>,
}

impl TransitionTable {
    pub fn build<M: DeterministicMdp + ?Sized>(mdp: &M) -> Result<Self> {
        Self::build_with_cap(mdp, DEFAULT_STATE_CAP)
    }

    pub fn build_with_cap<M: DeterministicMdp + ?Sized>(mdp: &M, cap: usize) -> Result<Self> {
        let states = enumerate_states_with_cap(mdp, cap)?;
        let action_count = mdp.action_count();
        let mut next = Vec::with_capacity(states.len() * action_count);
        for &s in &states {
            for a in 0..action_count {
                next.push(mdp.next_state(s, ActionId(a)).0);
            }
        }
        Ok(Self {
            state_count: states.len(),
            action_count,
            next,
        })
    }

    #[inline]
    pub fn next(&self, state: StateId, action: ActionId) -> StateId {
        StateId(self.next[state.0 * self.action_count + action.0])
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }
}

impl DeterministicMdp for TransitionTable {
    fn state_count(&self) -> usize {
        self.state_count
    }

    fn action_count(&self) -> usize {
        self.action_count
    }

    fn next_state(&self, state: StateId, action: ActionId) -> StateId {
        self.next(state, action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::HypercubeMdp;

    #[test]
    fn enumerate_counts() {
        assert_eq!(enumerate_states(&HypercubeMdp::new(2, 3)).unwrap().len(), 9);
        assert_eq!(
            enumerate_states(&HypercubeMdp::new(3, 3)).unwrap().len(),
            27
        );
    }

    #[test]
    fn enumerate_distinct_ids() {
        let states = enumerate_states(&HypercubeMdp::new(3, 3)).unwrap();
        let set: BTreeSet<_> = states.iter().collect();
        assert_eq!(set.len(), states.len());
    }

    #[test]
    fn cap_exceeded_is_an_error() {
        let mdp = HypercubeMdp::new(3, 3);
        let err = enumerate_states_with_cap(&mdp, 10).unwrap_err();
        assert!(err.to_string().contains("state space too large"));
    }

    #[test]
    fn closure_horizon_zero_is_start() {
        let mdp = HypercubeMdp::new(2, 3);
        let start = mdp.state_of(&[2, 2]);
        let set = successor_closure(&mdp, start, 0);
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![start]);
    }

    #[test]
    fn closure_reaches_all_states_at_diameter() {
        // diameter of the k-dim m-ary cube is k(m-1)
        let mdp = HypercubeMdp::new(2, 3);
        for s in enumerate_states(&mdp).unwrap() {
            assert_eq!(successor_closure(&mdp, s, 4).len(), 9);
        }
    }

    #[test]
    fn closure_horizon_one_with_saturation() {
        let mdp = HypercubeMdp::new(2, 3);
        let start = mdp.state_of(&[1, 1]);
        let set = successor_closure(&mdp, start, 1);
        let want: BTreeSet<StateId> = [
            mdp.state_of(&[1, 1]),
            mdp.state_of(&[2, 1]),
            mdp.state_of(&[1, 2]),
        ]
        .into_iter()
        .collect();
        assert_eq!(set, want);
    }
}
