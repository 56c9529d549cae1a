//! Hindsight goal relabeling.
//!
//! Turns stored trajectories into `(s, a, g, h)` training tuples. Each tuple
//! picks a transition uniformly over all transitions in the dataset (so
//! trajectories are sampled proportionally to their length), then with
//! probability `hindsight_ratio` replaces the episode's desired goal by a
//! uniformly chosen future state of the same trajectory, with `h` the index
//! gap; otherwise it keeps the desired goal and sets `h` to the time
//! remaining in the episode. Either way `h >= 1`.

use crate::dataset::Dataset;
use crate::env::phi;
use crate::rng::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RelabelError {
    #[error("dataset has no transitions to sample")]
    NoTransitions,
}

/// One behavior-cloning tuple: act as `a` in state `s` to be at goal `g`
/// after `h` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainTuple {
    pub state: [f64; 2],
    pub action: [f64; 2],
    pub goal: [f64; 2],
    pub horizon: u32,
}

/// Where a tuple came from: trajectory, transition index, and the future
/// state index when the goal was relabeled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TupleTrace {
    pub traj: u32,
    pub t: u32,
    pub future: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelabelConfig {
    /// Fraction of sampled tuples whose goal is replaced by a future state.
    pub hindsight_ratio: f64,
    pub seed: u64,
}

/// Cumulative transition offsets for sampling trajectories proportionally
/// to their transition count.
#[derive(Debug, Clone)]
pub struct TransitionIndex {
    /// `cum[i]` = transitions in trajectories `0..i`; length `n_traj + 1`.
    cum: Vec<u64>,
}

impl TransitionIndex {
    pub fn build(data: &Dataset) -> Result<TransitionIndex, RelabelError> {
        let mut cum = Vec::with_capacity(data.trajectories.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for t in &data.trajectories {
            acc += t.len() as u64;
            cum.push(acc);
        }
        if acc == 0 {
            return Err(RelabelError::NoTransitions);
        }
        Ok(TransitionIndex { cum })
    }

    pub fn total(&self) -> u64 {
        *self.cum.last().expect("cum is never empty")
    }

    /// Maps a flat transition index to `(trajectory, step)`.
    fn locate(&self, flat: u64) -> (usize, usize) {
        let traj = self.cum.partition_point(|&c| c <= flat) - 1;
        (traj, (flat - self.cum[traj]) as usize)
    }
}

/// Fills `out` (and `traces`, if given) with `batch_size` sampled tuples
/// (zero is allowed and leaves the buffers empty). Buffers are cleared
/// first; this is the allocation-free path used by the training loop.
pub fn sample_batch_into(
    data: &Dataset,
    index: &TransitionIndex,
    batch_size: usize,
    cfg: &RelabelConfig,
    rng: &mut Rng,
    out: &mut Vec<TrainTuple>,
    mut traces: Option<&mut Vec<TupleTrace>>,
) {
    out.clear();
    if let Some(tr) = traces.as_deref_mut() {
        tr.clear();
    }
    for _ in 0..batch_size {
        let (traj_i, t) = index.locate(rng.below(index.total()));
        let traj = &data.trajectories[traj_i];
        let len = traj.len();
        let relabel = rng.f64() < cfg.hindsight_ratio;
        let (goal, horizon, future) = if relabel {
            let i = t + 1 + rng.below((len - t) as u64) as usize;
            (phi(traj.state_f64(i)), (i - t) as u32, Some(i as u32))
        } else {
            (traj.goal_f64(), (len - t) as u32, None)
        };
        out.push(TrainTuple {
            state: traj.state_f64(t),
            action: traj.action_f64(t),
            goal,
            horizon,
        });
        if let Some(tr) = traces.as_deref_mut() {
            tr.push(TupleTrace {
                traj: traj_i as u32,
                t: t as u32,
                future,
            });
        }
    }
}

/// Samples a batch of training tuples.
pub fn sample_batch(
    data: &Dataset,
    batch_size: usize,
    cfg: &RelabelConfig,
    rng: &mut Rng,
) -> Result<Vec<TrainTuple>, RelabelError> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let index = TransitionIndex::build(data)?;
    let mut out = Vec::with_capacity(batch_size);
    sample_batch_into(data, &index, batch_size, cfg, rng, &mut out, None);
    Ok(out)
}

/// Samples a batch together with per-tuple provenance.
pub fn sample_batch_traced(
    data: &Dataset,
    batch_size: usize,
    cfg: &RelabelConfig,
    rng: &mut Rng,
) -> Result<(Vec<TrainTuple>, Vec<TupleTrace>), RelabelError> {
    let index = TransitionIndex::build(data)?;
    let mut out = Vec::with_capacity(batch_size);
    let mut traces = Vec::with_capacity(batch_size);
    sample_batch_into(
        data,
        &index,
        batch_size,
        cfg,
        rng,
        &mut out,
        Some(&mut traces),
    );
    Ok((out, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_random, DataSource, Dataset, Trajectory};
    use crate::env::{reward, EnvSpec};
    use crate::rng::Rng;

    #[test]
    fn ratio_zero_keeps_desired_goals() {
        let data = generate_random(&EnvSpec::point_reach(), 10, 1);
        let cfg = RelabelConfig {
            hindsight_ratio: 0.0,
            seed: 0,
        };
        let mut rng = Rng::seed_from_u64(cfg.seed);
        let (batch, traces) = sample_batch_traced(&data, 1000, &cfg, &mut rng).unwrap();
        for (tuple, trace) in batch.iter().zip(&traces) {
            assert!(trace.future.is_none());
            let traj = &data.trajectories[trace.traj as usize];
            assert_eq!(tuple.goal, traj.goal_f64());
            assert_eq!(tuple.horizon, (traj.len() - trace.t as usize) as u32);
            assert_eq!(tuple.state, traj.state_f64(trace.t as usize));
            assert_eq!(tuple.action, traj.action_f64(trace.t as usize));
        }
    }

    #[test]
    fn ratio_one_relabels_to_stored_future_states() {
        let data = generate_random(&EnvSpec::point_reach(), 10, 2);
        let cfg = RelabelConfig {
            hindsight_ratio: 1.0,
            seed: 0,
        };
        let mut rng = Rng::seed_from_u64(7);
        let (batch, traces) = sample_batch_traced(&data, 1000, &cfg, &mut rng).unwrap();
        for (tuple, trace) in batch.iter().zip(&traces) {
            let i = trace.future.expect("ratio 1 always relabels") as usize;
            let traj = &data.trajectories[trace.traj as usize];
            assert!(i > trace.t as usize && i <= traj.len());
            assert_eq!(tuple.goal, traj.state_f64(i));
            assert_eq!(tuple.horizon as usize, i - trace.t as usize);
            // The achieved future state attains its own goal exactly.
            assert_eq!(reward(traj.state_f64(i), tuple.goal, &data.spec), 1.0);
        }
    }

    #[test]
    fn horizons_stay_in_bounds() {
        let data = generate_random(&EnvSpec::point_reach(), 5, 3);
        for ratio in [0.0, 0.5, 1.0] {
            let cfg = RelabelConfig {
                hindsight_ratio: ratio,
                seed: 0,
            };
            let mut rng = Rng::seed_from_u64(11);
            let batch = sample_batch(&data, 2000, &cfg, &mut rng).unwrap();
            assert!(batch
                .iter()
                .all(|t| t.horizon >= 1 && t.horizon <= data.spec.max_steps));
        }
    }

    #[test]
    fn relabeled_fraction_tracks_ratio() {
        let data = generate_random(&EnvSpec::point_reach(), 50, 4);
        for ratio in [0.0, 0.5, 1.0] {
            let cfg = RelabelConfig {
                hindsight_ratio: ratio,
                seed: 0,
            };
            let mut rng = Rng::seed_from_u64(5);
            let (_, traces) = sample_batch_traced(&data, 100_000, &cfg, &mut rng).unwrap();
            let frac =
                traces.iter().filter(|t| t.future.is_some()).count() as f64 / traces.len() as f64;
            assert!(
                (frac - ratio).abs() <= 0.01,
                "ratio {ratio}: observed {frac}"
            );
        }
    }

    #[test]
    fn trajectories_sampled_proportionally_to_length() {
        // Two trajectories with 10 and 40 transitions: expect a 20/80 split.
        let mk = |len: usize| Trajectory {
            states: vec![0.0; (len + 1) * 2],
            actions: vec![0.0; len * 2],
            desired_goal: vec![0.0; 2],
        };
        let data = Dataset {
            spec: EnvSpec::point_reach(),
            source: DataSource::Random,
            seed: 0,
            trajectories: vec![mk(10), mk(40)],
        };
        let cfg = RelabelConfig {
            hindsight_ratio: 0.5,
            seed: 0,
        };
        let mut rng = Rng::seed_from_u64(9);
        let (_, traces) = sample_batch_traced(&data, 100_000, &cfg, &mut rng).unwrap();
        let short = traces.iter().filter(|t| t.traj == 0).count() as f64 / traces.len() as f64;
        assert!((short - 0.2).abs() < 0.01, "short fraction {short}");
    }

    #[test]
    fn zero_length_dataset_is_rejected() {
        let data = Dataset {
            spec: EnvSpec::point_reach(),
            source: DataSource::Random,
            seed: 0,
            trajectories: vec![Trajectory {
                states: vec![1.0, 2.0],
                actions: vec![],
                desired_goal: vec![0.0, 0.0],
            }],
        };
        let cfg = RelabelConfig {
            hindsight_ratio: 0.5,
            seed: 0,
        };
        let mut rng = Rng::seed_from_u64(1);
        assert_eq!(
            sample_batch(&data, 10, &cfg, &mut rng).unwrap_err(),
            RelabelError::NoTransitions
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let data = generate_random(&EnvSpec::point_reach(), 5, 3);
        let cfg = RelabelConfig {
            hindsight_ratio: 0.7,
            seed: 0,
        };
        let mut r1 = Rng::seed_from_u64(42);
        let mut r2 = Rng::seed_from_u64(42);
        let a = sample_batch(&data, 100, &cfg, &mut r1).unwrap();
        let b = sample_batch(&data, 100, &cfg, &mut r2).unwrap();
        assert_eq!(a, b);
    }

}
