//! Nearest-neighbor trajectory stitching.
//!
//! Synthesizes new trajectories by walking backward from randomly sampled
//! final states. At every backward step the current state's nearest
//! neighbor (excluding the state itself) is looked up in the ball tree; if
//! it lies within the distance threshold `delta`, the walk switches to the
//! neighbor's trajectory and adopts its preceding `(state, action)` pair,
//! otherwise it keeps following the current trajectory. Because a switch
//! only happens between near-coincident states, every consecutive
//! transition of a synthesized trajectory exists contiguously in some
//! source trajectory — stitching recombines data, it never fabricates
//! transitions.

use crate::dataset::{DataSource, Dataset, Trajectory};
use crate::env::POINT_DIM;
use crate::neighbors::{BallTree, PointId};
use crate::rng::{derive_seed, Rng};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StitchError {
    #[error("ball tree indexes {tree} states but the dataset holds {data}")]
    TreeMismatch { tree: usize, data: usize },
    #[error("stitch stats: the augmented dataset does not extend the original")]
    NotAnExtension,
}

/// Stitching parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchConfig {
    /// Distance threshold for switching trajectories.
    pub delta: f64,
    /// Number of new trajectories to synthesize.
    pub n_new: usize,
    pub seed: u64,
}

/// Augmented dataset plus per-walk bookkeeping.
#[derive(Debug, Clone)]
pub struct StitchResult {
    /// Original trajectories followed by the synthesized ones.
    pub dataset: Dataset,
    /// Trajectory switches performed in each synthesized trajectory.
    pub switches: Vec<u32>,
}

/// Summary statistics for a stitching run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchStats {
    /// Mean number of trajectory switches per synthesized trajectory.
    pub switches_per_trajectory: f64,
    /// Total ordered (state, later-state) pairs contributed by the
    /// synthesized trajectories, i.e. new state-goal pairs available to
    /// hindsight relabeling: `sum over new trajectories of L(L+1)/2`.
    pub new_state_goal_pairs: u64,
}

/// One backward walk starting from the state at `start` (normally a final
/// state). Walks at most `max_steps` steps and terminates early when the
/// pair source has no predecessor. Returns the forward-ordered trajectory
/// and the number of switches taken.
pub fn stitch_walk(
    data: &Dataset,
    tree: &BallTree,
    delta: f64,
    start: PointId,
    max_steps: usize,
) -> (Trajectory, u32) {
    let start_state = data.trajectories[start.traj as usize].state_f64(start.step as usize);
    // Collected backward; reversed into forward order at the end.
    let mut rev_states: Vec<[f32; 2]> = Vec::with_capacity(max_steps + 1);
    let mut rev_actions: Vec<[f32; 2]> = Vec::with_capacity(max_steps);
    let store = |p: [f64; 2]| [p[0] as f32, p[1] as f32];
    rev_states.push(store(start_state));
    let mut current = start;
    let mut switches = 0u32;
    for _ in 0..max_steps {
        let q = data.trajectories[current.traj as usize].state_f64(current.step as usize);
        let nearest = tree.query(&q, 1, Some(&|id| id == current));
        // The source we take the preceding (state, action) pair from:
        // the neighbor when it is close enough, otherwise the current point.
        let source = match nearest.first() {
            Some(&(id, dist)) if dist <= delta => id,
            _ => current,
        };
        if source.step == 0 {
            break; // trajectory start: no predecessor to adopt
        }
        if source != current {
            switches += 1;
        }
        let src_traj = &data.trajectories[source.traj as usize];
        let prev_step = source.step as usize - 1;
        rev_states.push(store(src_traj.state_f64(prev_step)));
        rev_actions.push(store(src_traj.action_f64(prev_step)));
        current = PointId {
            traj: source.traj,
            step: source.step - 1,
        };
    }
    let mut states = Vec::with_capacity(rev_states.len() * POINT_DIM);
    for s in rev_states.iter().rev() {
        states.extend_from_slice(s);
    }
    let mut actions = Vec::with_capacity(rev_actions.len() * POINT_DIM);
    for a in rev_actions.iter().rev() {
        actions.extend_from_slice(a);
    }
    // The sampled final state is the goal the synthesized trajectory attains.
    let desired_goal = store(start_state).to_vec();
    (
        Trajectory {
            states,
            actions,
            desired_goal,
        },
        switches,
    )
}

/// Runs the stitching procedure: samples `n_new` random final states and
/// walks each backward for at most `T - 1` steps. The returned dataset
/// holds the original trajectories unmodified, followed by the synthesized
/// ones, with `source = stitched`.
pub fn stitch(
    data: &Dataset,
    tree: &BallTree,
    cfg: &StitchConfig,
) -> Result<StitchResult, StitchError> {
    if tree.len() != data.n_states() as usize || tree.dim() != POINT_DIM {
        return Err(StitchError::TreeMismatch {
            tree: tree.len(),
            data: data.n_states() as usize,
        });
    }
    let max_steps = data.spec.max_steps.saturating_sub(1) as usize;
    let n_traj = data.trajectories.len() as u64;
    let walks: Vec<(Trajectory, u32)> = (0..cfg.n_new)
        .into_par_iter()
        .map(|m| {
            let mut rng = Rng::seed_from_u64(derive_seed(cfg.seed, "stitch-walk", m as u64));
            let traj = rng.below(n_traj) as u32;
            let step = data.trajectories[traj as usize].len() as u32;
            stitch_walk(data, tree, cfg.delta, PointId { traj, step }, max_steps)
        })
        .collect();
    let mut trajectories = data.trajectories.clone();
    let mut switches = Vec::with_capacity(cfg.n_new);
    for (traj, s) in walks {
        trajectories.push(traj);
        switches.push(s);
    }
    Ok(StitchResult {
        dataset: Dataset {
            spec: data.spec.clone(),
            source: DataSource::Stitched,
            seed: cfg.seed,
            trajectories,
        },
        switches,
    })
}

/// Summary statistics of a stitching run, checked against the original
/// dataset the run started from.
pub fn stitch_stats(before: &Dataset, result: &StitchResult) -> Result<StitchStats, StitchError> {
    let after = &result.dataset;
    let extends = after.trajectories.len()
        == before.trajectories.len() + result.switches.len()
        && after.trajectories[..before.trajectories.len()] == before.trajectories[..];
    if !extends {
        return Err(StitchError::NotAnExtension);
    }
    let new = &after.trajectories[before.trajectories.len()..];
    let pairs: u64 = new
        .iter()
        .map(|t| {
            let l = t.len() as u64;
            l * (l + 1) / 2
        })
        .sum();
    let mean_switches = if result.switches.is_empty() {
        0.0
    } else {
        result.switches.iter().map(|&s| s as f64).sum::<f64>() / result.switches.len() as f64
    };
    Ok(StitchStats {
        switches_per_trajectory: mean_switches,
        new_state_goal_pairs: pairs,
    })
}

/// Checks the no-fabrication invariant of a synthesized trajectory against
/// its source dataset: every `(state, action)` pair of `traj` must appear
/// verbatim in some source trajectory, and the successor it is spliced onto
/// must lie within `delta` of that pair's true successor. Away from switch
/// points the successor matches exactly; at a switch point it may differ by
/// at most the stitching threshold.
pub fn transitions_exist_in(data: &Dataset, traj: &Trajectory, delta: f64) -> bool {
    (0..traj.len()).all(|i| {
        let s = &traj.states[i * POINT_DIM..(i + 1) * POINT_DIM];
        let a = &traj.actions[i * POINT_DIM..(i + 1) * POINT_DIM];
        let s2 = &traj.states[(i + 1) * POINT_DIM..(i + 2) * POINT_DIM];
        data.trajectories.iter().any(|src| {
            (0..src.len()).any(|j| {
                if src.states[j * POINT_DIM..(j + 1) * POINT_DIM] != *s
                    || src.actions[j * POINT_DIM..(j + 1) * POINT_DIM] != *a
                {
                    return false;
                }
                let succ = &src.states[(j + 1) * POINT_DIM..(j + 2) * POINT_DIM];
                let gap = succ
                    .iter()
                    .zip(s2)
                    .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
                    .sum::<f64>()
                    .sqrt();
                gap <= delta
            })
        })
    })
}
