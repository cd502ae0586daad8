//! Discrete re-implementation of the Spriteworld room: an obstacle-free
//! N x N grid with an agent and up to two draggable objects.
//!
//! Eight actions: four regular moves (up/down/left/right, `move_step` cells)
//! and four dragging moves (same directions, `drag_step` cells). Dragging
//! moves every object the agent is standing on together with the agent.
//! Positions clamp at the walls. The grid is discrete so the whole state
//! space enumerates and exact dynamic programming applies; the paper's
//! "half as far" drag ratio is preserved by `move_step = 2 * drag_step`.
//!
//! Coordinates: x grows rightward, y grows upward, so "up" increases y and
//! "top" regions are high y.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, DeterministicMdp, StateId};
use crate::features::{FeatureKind, FeatureMap};
use crate::util::mix_seed;
use crate::{Error, Result};

/// Number of actions: 4 moves + 4 drags.
pub const ACTION_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpriteworldConfig {
    pub grid_size: usize,
    pub object_count: usize,
    #[serde(default = "default_move_step")]
    pub move_step: usize,
    #[serde(default = "default_drag_step")]
    pub drag_step: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_move_step() -> usize {
    2
}

fn default_drag_step() -> usize {
    1
}

/// Complete world configuration: agent cell plus one cell per object.
/// Objects may overlap each other and the agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpriteState {
    pub agent: (usize, usize),
    pub objects: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Spriteworld {
    config: SpriteworldConfig,
}

/// (dx, dy) per direction index: up, down, left, right.
const DIRS: [(isize, isize); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

impl Spriteworld {
    pub fn new(config: SpriteworldConfig) -> Result<Self> {
        if config.grid_size < 3 {
            return Err(Error::InvalidConfig(format!(
                "grid_size must be >= 3, got {}",
                config.grid_size
            )));
        }
        if config.object_count > 2 {
            return Err(Error::InvalidConfig(format!(
                "object_count must be 0, 1 or 2, got {}",
                config.object_count
            )));
        }
        if config.drag_step * 2 != config.move_step {
            return Err(Error::InvalidConfig(format!(
                "drag_step * 2 must equal move_step (drags move half as far), got {} and {}",
                config.drag_step, config.move_step
            )));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &SpriteworldConfig {
        &self.config
    }

    pub fn grid_size(&self) -> usize {
        self.config.grid_size
    }

    pub fn object_count(&self) -> usize {
        self.config.object_count
    }

    /// Number of scalar features: agent x/y plus x/y per object.
    pub fn feature_count(&self) -> usize {
        2 + 2 * self.config.object_count
    }

    /// Agent and objects positioned independently and uniformly;
    /// reproducible given (config seed, episode seed).
    pub fn reset(&self, episode_seed: u64) -> SpriteState {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.config.seed, episode_seed]));
        let n = self.config.grid_size;
        let agent = (rng.gen_range(0..n), rng.gen_range(0..n));
        let objects = (0..self.config.object_count)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        SpriteState { agent, objects }
    }

    fn clamp_move(&self, pos: (usize, usize), dir: usize, step: usize) -> (usize, usize) {
        let n = self.config.grid_size as isize;
        let (dx, dy) = DIRS[dir];
        let x = (pos.0 as isize + dx * step as isize).clamp(0, n - 1);
        let y = (pos.1 as isize + dy * step as isize).clamp(0, n - 1);
        (x as usize, y as usize)
    }

    /// Pure transition. Actions 0-3 move the agent by `move_step`; actions
    /// 4-7 drag: the agent moves by `drag_step` and every object on the
    /// agent's starting cell moves by the same clamped displacement.
    pub fn step(&self, state: &SpriteState, action: ActionId) -> Result<SpriteState> {
        if action.0 >= ACTION_COUNT {
            return Err(Error::InvalidAction {
                action: action.0,
                action_count: ACTION_COUNT,
            });
        }
        let dir = action.0 % 4;
        let mut next = state.clone();
        if action.0 < 4 {
            next.agent = self.clamp_move(state.agent, dir, self.config.move_step);
        } else {
            let moved = self.clamp_move(state.agent, dir, self.config.drag_step);
            let dx = moved.0 as isize - state.agent.0 as isize;
            let dy = moved.1 as isize - state.agent.1 as isize;
            next.agent = moved;
            for obj in next.objects.iter_mut() {
                if *obj == state.agent {
                    obj.0 = (obj.0 as isize + dx) as usize;
                    obj.1 = (obj.1 as isize + dy) as usize;
                }
            }
        }
        Ok(next)
    }

    /// Positions as fractions of the room, ordered
    /// (agent x, agent y, object1 x, object1 y, object2 x, object2 y).
    pub fn observe(&self, state: &SpriteState) -> Vec<f64> {
        let n = self.config.grid_size as f64;
        let mut out = Vec::with_capacity(self.feature_count());
        out.push(state.agent.0 as f64 / n);
        out.push(state.agent.1 as f64 / n);
        for obj in &state.objects {
            out.push(obj.0 as f64 / n);
            out.push(obj.1 as f64 / n);
        }
        out
    }

    /// Canonical row-major id over (agent x, agent y, object1 x, object1 y, ...).
    pub fn state_id(&self, state: &SpriteState) -> StateId {
        let n = self.config.grid_size;
        let mut id = state.agent.0 * n + state.agent.1;
        for obj in &state.objects {
            id = (id * n + obj.0) * n + obj.1;
        }
        StateId(id)
    }

    pub fn state_of(&self, id: StateId) -> SpriteState {
        let n = self.config.grid_size;
        let mut rest = id.0;
        let mut cells = vec![0usize; 2 + 2 * self.config.object_count];
        for c in cells.iter_mut().rev() {
            *c = rest % n;
            rest /= n;
        }
        SpriteState {
            agent: (cells[0], cells[1]),
            objects: (0..self.config.object_count)
                .map(|o| (cells[2 + 2 * o], cells[3 + 2 * o]))
                .collect(),
        }
    }

    /// The ground-truth disentangled feature map: the observation vector.
    pub fn feature_map(&self) -> FeatureMap {
        FeatureMap::from_fn(
            self.state_count(),
            self.feature_count(),
            FeatureKind::Disentangled,
            |s, d| self.observe(&self.state_of(s))[d],
        )
    }
}

impl DeterministicMdp for Spriteworld {
    fn state_count(&self) -> usize {
        self.config
            .grid_size
            .pow(2 + 2 * self.config.object_count as u32)
    }

    fn action_count(&self) -> usize {
        ACTION_COUNT
    }

    fn next_state(&self, state: StateId, action: ActionId) -> StateId {
        let s = self.state_of(state);
        let next = self.step(&s, action).expect("action id out of range");
        self.state_id(&next)
    }
}

/// Direction helpers for readable tests and policies.
pub mod actions {
    use crate::env::ActionId;

    pub const MOVE_UP: ActionId = ActionId(0);
    pub const MOVE_DOWN: ActionId = ActionId(1);
    pub const MOVE_LEFT: ActionId = ActionId(2);
    pub const MOVE_RIGHT: ActionId = ActionId(3);
    pub const DRAG_UP: ActionId = ActionId(4);
    pub const DRAG_DOWN: ActionId = ActionId(5);
    pub const DRAG_LEFT: ActionId = ActionId(6);
    pub const DRAG_RIGHT: ActionId = ActionId(7);
}

#[cfg(test)]
mod tests {
    use super::actions::*;
    use super::*;
    use crate::env::enumerate_states;
    use proptest::prelude::*;

    fn world(object_count: usize) -> Spriteworld {
        Spriteworld::new(SpriteworldConfig {
            grid_size: 5,
            object_count,
            move_step: 2,
            drag_step: 1,
            seed: 7,
        })
        .unwrap()
    }

    #[test]
    fn reset_is_reproducible() {
        let w = world(2);
        assert_eq!(w.reset(3), w.reset(3));
        assert_ne!(w.reset(3), w.reset(4));
    }

    #[test]
    fn reset_without_objects() {
        assert!(world(0).reset(0).objects.is_empty());
    }

    #[test]
    fn reset_agent_x_is_uniform() {
        // chi-square style check: each cell frequency within 3 sigma of uniform
        let w = world(0);
        let mut counts = [0usize; 5];
        let n = 10_000;
        for ep in 0..n {
            counts[w.reset(ep).agent.0] += 1;
        }
        let expected = n as f64 / 5.0;
        let sigma = (n as f64 * 0.2 * 0.8).sqrt();
        for (cell, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() <= 3.0 * sigma,
                "cell {cell} frequency {c} outside 3 sigma of {expected}"
            );
        }
    }

    #[test]
    fn regular_move_leaves_objects() {
        let w = world(1);
        let s = SpriteState {
            agent: (2, 2),
            objects: vec![(1, 3)],
        };
        let next = w.step(&s, MOVE_RIGHT).unwrap();
        assert_eq!(next.agent, (4, 2));
        assert_eq!(next.objects, vec![(1, 3)]);
    }

    #[test]
    fn drag_moves_agent_and_object_together() {
        let w = world(1);
        let s = SpriteState {
            agent: (2, 2),
            objects: vec![(2, 2)],
        };
        let next = w.step(&s, DRAG_RIGHT).unwrap();
        assert_eq!(next.agent, (3, 2));
        assert_eq!(next.objects, vec![(3, 2)]);
    }

    #[test]
    fn drag_moves_all_colocated_objects() {
        let w = world(2);
        let s = SpriteState {
            agent: (2, 2),
            objects: vec![(2, 2), (2, 2)],
        };
        let next = w.step(&s, DRAG_UP).unwrap();
        assert_eq!(next.agent, (2, 3));
        assert_eq!(next.objects, vec![(2, 3), (2, 3)]);
    }

    #[test]
    fn moves_clamp_at_walls() {
        let w = world(0);
        let s = SpriteState {
            agent: (4, 2),
            objects: vec![],
        };
        assert_eq!(w.step(&s, MOVE_RIGHT).unwrap().agent, (4, 2));
        let s = SpriteState {
            agent: (3, 2),
            objects: vec![],
        };
        // truncated to the wall rather than blocked
        assert_eq!(w.step(&s, MOVE_RIGHT).unwrap().agent, (4, 2));
    }

    #[test]
    fn invalid_action_is_an_error() {
        let w = world(0);
        let s = w.reset(0);
        assert!(w.step(&s, ActionId(8)).is_err());
    }

    #[test]
    fn observe_examples() {
        let w = world(2);
        let s = SpriteState {
            agent: (0, 0),
            objects: vec![(1, 2), (3, 4)],
        };
        let obs = w.observe(&s);
        assert_eq!(obs.len(), 6);
        assert_eq!(&obs[..2], &[0.0, 0.0]);
        let s = SpriteState {
            agent: (4, 4),
            objects: vec![(0, 0), (0, 0)],
        };
        assert_eq!(&w.observe(&s)[..2], &[0.8, 0.8]);
    }

    #[test]
    fn state_id_roundtrip() {
        let w = world(1);
        for s in enumerate_states(&w).unwrap() {
            assert_eq!(w.state_id(&w.state_of(s)), s);
        }
    }

    #[test]
    fn regular_moves_never_change_objects_exhaustive() {
        let w = world(1);
        for s in enumerate_states(&w).unwrap() {
            let st = w.state_of(s);
            for a in 0..4 {
                let next = w.step(&st, ActionId(a)).unwrap();
                assert_eq!(next.objects, st.objects);
            }
        }
    }

    proptest! {
        #[test]
        fn positions_stay_in_bounds(seed in 0u64..1000, acts in proptest::collection::vec(0usize..8, 0..64)) {
            let w = world(2);
            let mut s = w.reset(seed);
            for a in acts {
                s = w.step(&s, ActionId(a)).unwrap();
                prop_assert!(s.agent.0 < 5 && s.agent.1 < 5);
                for o in &s.objects {
                    prop_assert!(o.0 < 5 && o.1 < 5);
                }
            }
        }

        #[test]
        fn dragging_is_the_only_object_moving_mechanism(seed in 0u64..1000, acts in proptest::collection::vec(0usize..8, 0..64)) {
            let w = world(2);
            let mut s = w.reset(seed);
            for a in acts {
                let next = w.step(&s, ActionId(a)).unwrap();
                for (idx, (before, after)) in s.objects.iter().zip(&next.objects).enumerate() {
                    if before != after {
                        prop_assert!(a >= 4, "object {idx} moved under regular move {a}");
                        prop_assert_eq!(*before, s.agent, "object moved without the agent on it");
                    }
                }
                s = next;
            }
        }
    }
}
