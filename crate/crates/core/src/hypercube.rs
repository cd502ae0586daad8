//! Synthetic hypercube MDP: states are k-tuples of bin indices, actions move
//! one coordinate at a time.
//!
//! Feature control here is independently controllable by construction: the
//! optimal policy for "set coordinate d to bin b" walks along dimension d and
//! then holds still, leaving every other coordinate untouched. The action set
//! therefore includes the identity (`Stay`, action 0) alongside the 2k edge
//! moves; the transformations form a group and the identity is what lets a
//! policy park inside an interior bin.

use crate::env::{ActionId, DeterministicMdp, StateId};
use crate::features::{FeatureKind, FeatureMap};

/// One hypercube action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypercubeAction {
    Stay,
    /// Increment coordinate `dim` (saturating at m).
    Inc(usize),
    /// Decrement coordinate `dim` (saturating at 1).
    Dec(usize),
}

impl HypercubeAction {
    pub fn id(self) -> ActionId {
        match self {
            HypercubeAction::Stay => ActionId(0),
            HypercubeAction::Inc(d) => ActionId(1 + 2 * d),
            HypercubeAction::Dec(d) => ActionId(2 + 2 * d),
        }
    }

    pub fn from_id(action: ActionId) -> Self {
        if action.0 == 0 {
            HypercubeAction::Stay
        } else {
            let d = (action.0 - 1) / 2;
            if (action.0 - 1) % 2 == 0 {
                HypercubeAction::Inc(d)
            } else {
                HypercubeAction::Dec(d)
            }
        }
    }
}

/// k coordinates, each ranging over bins `1..=m`; `state_count = m^k`.
#[derive(Debug, Clone)]
pub struct HypercubeMdp {
    k: usize,
    m: usize,
}

impl HypercubeMdp {
    pub fn new(k: usize, m: usize) -> Self {
        assert!(k >= 1 && m >= 1, "hypercube needs k >= 1 and m >= 1");
        Self { k, m }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Coordinates (1-based bins) of a state, most significant dimension first.
    pub fn coords_of(&self, state: StateId) -> Vec<usize> {
        let mut rest = state.0;
        let mut coords = vec![0usize; self.k];
        for d in (0..self.k).rev() {
            coords[d] = rest % self.m + 1;
            rest /= self.m;
        }
        coords
    }

    /// Canonical row-major id of a coordinate vector.
    pub fn state_of(&self, coords: &[usize]) -> StateId {
        assert_eq!(coords.len(), self.k);
        let mut id = 0usize;
        for &c in coords {
            debug_assert!((1..=self.m).contains(&c));
            id = id * self.m + (c - 1);
        }
        StateId(id)
    }

    /// Single-edge move with boundary saturation; `Stay` is the identity.
    pub fn step_coords(&self, coords: &[usize], action: ActionId) -> Vec<usize> {
        let mut out = coords.to_vec();
        match HypercubeAction::from_id(action) {
            HypercubeAction::Stay => {}
            HypercubeAction::Inc(d) => out[d] = (coords[d] + 1).min(self.m),
            HypercubeAction::Dec(d) => out[d] = (coords[d] - 1).max(1),
        }
        out
    }

    /// The canonical disentangled features: `f_d = (c_d - 0.5) / m`, so the
    /// coordinate value is exactly the occupied bin.
    pub fn canonical_features(&self) -> FeatureMap {
        let (k, m) = (self.k, self.m);
        let per_state: Vec<Vec<usize>> = (0..self.state_count())
            .map(|i| self.coords_of(StateId(i)))
            .collect();
        FeatureMap::from_fn(self.state_count(), k, FeatureKind::Disentangled, |s, d| {
            (per_state[s.0][d] as f64 - 0.5) / m as f64
        })
    }
}

impl DeterministicMdp for HypercubeMdp {
    fn state_count(&self) -> usize {
        self.m.pow(self.k as u32)
    }

    fn action_count(&self) -> usize {
        2 * self.k + 1
    }

    fn next_state(&self, state: StateId, action: ActionId) -> StateId {
        let coords = self.coords_of(state);
        self.state_of(&self.step_coords(&coords, action))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::enumerate_states;

    #[test]
    fn single_edge_move() {
        let mdp = HypercubeMdp::new(2, 3);
        assert_eq!(
            mdp.step_coords(&[2, 2], HypercubeAction::Inc(0).id()),
            vec![3, 2]
        );
    }

    #[test]
    fn boundary_saturation() {
        let mdp = HypercubeMdp::new(2, 3);
        assert_eq!(
            mdp.step_coords(&[3, 2], HypercubeAction::Inc(0).id()),
            vec![3, 2]
        );
        let mdp3 = HypercubeMdp::new(3, 3);
        assert_eq!(
            mdp3.step_coords(&[1, 1, 1], HypercubeAction::Dec(2).id()),
            vec![1, 1, 1]
        );
    }

    #[test]
    fn stay_is_identity() {
        let mdp = HypercubeMdp::new(3, 3);
        for s in enumerate_states(&mdp).unwrap() {
            assert_eq!(mdp.next_state(s, HypercubeAction::Stay.id()), s);
        }
    }

    #[test]
    fn action_roundtrip() {
        let mdp = HypercubeMdp::new(3, 3);
        for a in 0..mdp.action_count() {
            assert_eq!(HypercubeAction::from_id(ActionId(a)).id(), ActionId(a));
        }
    }

    #[test]
    fn moves_change_at_most_one_coordinate_by_one() {
        // exhaustive for every (state, action) pair
        let mdp = HypercubeMdp::new(3, 3);
        for s in enumerate_states(&mdp).unwrap() {
            let c0 = mdp.coords_of(s);
            for a in 0..mdp.action_count() {
                let c1 = mdp.coords_of(mdp.next_state(s, ActionId(a)));
                let diffs: Vec<usize> = (0..3).filter(|&d| c0[d] != c1[d]).collect();
                assert!(diffs.len() <= 1);
                for &d in &diffs {
                    assert_eq!(c0[d].abs_diff(c1[d]), 1);
                }
            }
        }
    }

    #[test]
    fn coords_roundtrip() {
        let mdp = HypercubeMdp::new(3, 4);
        for s in enumerate_states(&mdp).unwrap() {
            assert_eq!(mdp.state_of(&mdp.coords_of(s)), s);
        }
    }
}
