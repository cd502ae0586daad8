//! From-scratch tabular Q-learning on compiled goal tasks, the per-task
//! baseline the transfer methods are measured against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, DeterministicMdp, StateId, TransitionTable};
use crate::spriteworld::Spriteworld;
use crate::task::CompiledTask;
use crate::util::{argmax_tol, mix_seed, TIE_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QLearnSchedule {
    pub steps: u64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Environment steps between greedy evaluations.
    pub eval_every: u64,
    pub eval_episodes: u32,
    /// Step cap of a learning episode.
    pub episode_horizon: u32,
    /// Step cap of an evaluation episode.
    pub eval_horizon: u32,
}

impl Default for QLearnSchedule {
    fn default() -> Self {
        Self {
            steps: 50_000,
            alpha: 0.5,
            epsilon: 0.2,
            eval_every: 1_000,
            eval_episodes: 100,
            episode_horizon: 80,
            eval_horizon: 80,
        }
    }
}

impl QLearnSchedule {
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
        if self.eval_every == 0 || self.eval_episodes == 0 || self.episode_horizon == 0 {
            return Err(Error::InvalidSchedule(
                "eval cadence, eval episodes and episode horizon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Action-value table of one task.
#[derive(Debug, Clone)]
pub struct QTable {
    pub action_count: usize,
    pub values: Vec<f64>,
}

impl QTable {
    fn row(&self, s: StateId) -> &[f64] {
        &self.values[s.0 * self.action_count..(s.0 + 1) * self.action_count]
    }

    pub fn greedy_action(&self, s: StateId) -> ActionId {
        ActionId(argmax_tol(self.row(s), TIE_TOL))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone)]
pub struct QLearningRun {
    pub curve: Vec<CurvePoint>,
    pub q: QTable,
}

/// Success rate of a greedy policy over fresh random resets: an episode
/// succeeds when the goal is achieved at reset or within the horizon.
pub fn evaluate_policy_success(
    world: &Spriteworld,
    transitions: &TransitionTable,
    task: &CompiledTask,
    policy: &dyn Fn(StateId) -> ActionId,
    episodes: u32,
    horizon: u32,
    rng_seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut successes = 0u32;
    for _ in 0..episodes {
        let mut s = StateId(rng.gen_range(0..world.state_count()));
        let mut hit = task.achieved_id(world, s);
        for _ in 0..horizon {
            if hit {
                break;
            }
            s = transitions.next(s, policy(s));
            hit = task.achieved_id(world, s);
        }
        successes += u32::from(hit);
    }
    f64::from(successes) / f64::from(episodes)
}

/// Standard epsilon-greedy Q-learning with episode termination on goal
/// achievement and periodic greedy evaluation from fresh random resets.
/// Bit-reproducible given the seed.
pub fn q_learning_run(
    world: &Spriteworld,
    task: &CompiledTask,
    schedule: &QLearnSchedule,
    gamma: f64,
    seed: u64,
) -> Result<QLearningRun> {
    schedule.validate()?;
    let transitions = TransitionTable::build(world)?;
    let (s_count, a_count) = (transitions.state_count(), transitions.action_count());
    let mut q = QTable {
        action_count: a_count,
        values: vec![0.0; s_count * a_count],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x71]));
    let mut curve = Vec::new();
    let mut steps_done = 0u64;
    let mut next_eval = 0u64;

    loop {
        if steps_done >= next_eval {
            let table = q.clone();
            let rate = evaluate_policy_success(
                world,
                &transitions,
                task,
                &|s| table.greedy_action(s),
                schedule.eval_episodes,
                schedule.eval_horizon,
                mix_seed(&[seed, 0xe7a1, next_eval]),
            );
            curve.push(CurvePoint {
                step: next_eval,
                success_rate: rate,
            });
            next_eval += schedule.eval_every;
        }
        if steps_done >= schedule.steps {
            break;
        }

        let mut s = StateId(rng.gen_range(0..s_count));
        if task.achieved_id(world, s) {
            // goal met at reset: the episode terminates immediately; count
            // the reset as one interaction so degenerate tasks still advance
            steps_done += 1;
            continue;
        }
        for _ in 0..schedule.episode_horizon {
            if steps_done >= schedule.steps || steps_done >= next_eval {
                break;
            }
            let a = if rng.gen::<f64>() < schedule.epsilon {
                ActionId(rng.gen_range(0..a_count))
            } else {
                q.greedy_action(s)
            };
            let s2 = transitions.next(s, a);
            let done = task.achieved_id(world, s2);
            let reward = f64::from(done);
            let bootstrap = if done {
                0.0
            } else {
                q.row(s2).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            let idx = s.0 * a_count + a.0;
            q.values[idx] += schedule.alpha * (reward + gamma * bootstrap - q.values[idx]);
            steps_done += 1;
            s = s2;
            if done {
                break;
            }
        }
    }
    Ok(QLearningRun { curve, q })
}
