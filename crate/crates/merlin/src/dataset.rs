//! Offline trajectory datasets: generation, storage, and the `MRLN` binary
//! file format.
//!
//! A [`Trajectory`] is an ordered `(state, action)` sequence of length
//! `L <= T` plus a final state and the episode's desired goal. Values are
//! kept in IEEE-754 binary32 — the on-disk precision — and every generated
//! transition is produced from already-rounded inputs, so replaying a stored
//! transition through [`env::step`] reproduces the stored successor exactly.
//!
//! # File format (all integers little-endian)
//!
//! ```text
//! magic "MRLN" | version u32 | name_len u32 | env name (UTF-8)
//! | state_dim u32 | action_dim u32 | goal_dim u32
//! | source u8 | seed u64 | n_traj u64 | n_transitions u64
//! then per trajectory:
//!   len u32 | states f32[(len+1)*state_dim] | actions f32[len*action_dim]
//!   | desired_goal f32[goal_dim]
//! ```

use crate::env::{self, EnvName, EnvSpec, EnvState, GoalMode, POINT_DIM};
use crate::rng::{derive_seed, Rng};
use rayon::prelude::*;
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MRLN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes (not a dataset file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("unknown environment name {0:?}")]
    UnknownEnv(String),
    #[error("unknown source tag {0}")]
    UnknownSource(u8),
    #[error("dimension mismatch: file has ({state}, {action}, {goal}), expected ({exp}, {exp}, {exp})")]
    DimMismatch {
        state: u32,
        action: u32,
        goal: u32,
        exp: u32,
    },
    #[error("header declares {header} transitions but trajectories hold {actual}")]
    CountMismatch { header: u64, actual: u64 },
    #[error("trailing bytes after the last trajectory")]
    TrailingBytes,
}

/// How a dataset's trajectories were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Random,
    Expert,
    Stitched,
    ModelRollout,
}

impl DataSource {
    pub fn tag(self) -> u8 {
        match self {
            DataSource::Random => 0,
            DataSource::Expert => 1,
            DataSource::Stitched => 2,
            DataSource::ModelRollout => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<DataSource> {
        Some(match tag {
            0 => DataSource::Random,
            1 => DataSource::Expert,
            2 => DataSource::Stitched,
            3 => DataSource::ModelRollout,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataSource::Random => "random",
            DataSource::Expert => "expert",
            DataSource::Stitched => "stitched",
            DataSource::ModelRollout => "model_rollout",
        }
    }
}

/// One episode: `len + 1` states, `len` actions, and the desired goal,
/// stored flat in binary32.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<f32>,
    pub actions: Vec<f32>,
    pub desired_goal: Vec<f32>,
}

impl Trajectory {
    /// Number of transitions (actions).
    pub fn len(&self) -> usize {
        self.actions.len() / POINT_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.states.len() / POINT_DIM
    }

    pub fn state_f64(&self, i: usize) -> [f64; 2] {
        [
            self.states[i * POINT_DIM] as f64,
            self.states[i * POINT_DIM + 1] as f64,
        ]
    }

    pub fn action_f64(&self, i: usize) -> [f64; 2] {
        [
            self.actions[i * POINT_DIM] as f64,
            self.actions[i * POINT_DIM + 1] as f64,
        ]
    }

    pub fn goal_f64(&self) -> [f64; 2] {
        [self.desired_goal[0] as f64, self.desired_goal[1] as f64]
    }

    pub fn final_state_f64(&self) -> [f64; 2] {
        self.state_f64(self.len())
    }
}

/// A collection of trajectories plus the spec they were collected under.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: EnvSpec,
    pub source: DataSource,
    pub seed: u64,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn n_transitions(&self) -> u64 {
        self.trajectories.iter().map(|t| t.len() as u64).sum()
    }

    pub fn n_states(&self) -> u64 {
        self.trajectories.iter().map(|t| t.n_states() as u64).sum()
    }

    /// Fraction of trajectories whose final state attains the desired goal.
    pub fn final_success_rate(&self) -> f64 {
        if self.trajectories.is_empty() {
            return 0.0;
        }
        let hits: f64 = self
            .trajectories
            .iter()
            .map(|t| env::reward(t.final_state_f64(), t.goal_f64(), &self.spec))
            .sum();
        hits / self.trajectories.len() as f64
    }

    /// Fraction of transitions whose stored successor is reproduced by
    /// [`env::step`] within Euclidean distance `tol` (useful for judging
    /// model-generated data against the real dynamics).
    pub fn replay_within_fraction(&self, tol: f64) -> f64 {
        let mut total = 0u64;
        let mut ok = 0u64;
        for traj in &self.trajectories {
            for i in 0..traj.len() {
                let st = EnvState {
                    pos: traj.state_f64(i),
                    step_count: 0,
                };
                let next = env::step(&st, traj.action_f64(i), &self.spec)
                    .expect("step_count 0 cannot be exhausted");
                let stored = traj.state_f64(i + 1);
                let dist = ((next.pos[0] - stored[0]).powi(2)
                    + (next.pos[1] - stored[1]).powi(2))
                .sqrt();
                total += 1;
                if dist <= tol {
                    ok += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            ok as f64 / total as f64
        }
    }

    /// Largest per-coordinate discrepancy between stored successors and
    /// replaying each stored `(state, action)` through [`env::step`].
    /// Zero for datasets generated by this crate.
    pub fn max_replay_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for traj in &self.trajectories {
            for i in 0..traj.len() {
                let st = EnvState {
                    pos: traj.state_f64(i),
                    step_count: 0,
                };
                let next = env::step(&st, traj.action_f64(i), &self.spec)
                    .expect("step_count 0 cannot be exhausted");
                let stored = traj.state_f64(i + 1);
                for (&p, &s) in next.pos.iter().zip(stored.iter()) {
                    let replayed = p as f32;
                    worst = worst.max((replayed as f64 - s).abs());
                }
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Rolls out one episode, keeping every stored value at binary32 precision:
/// each step consumes the rounded position and the rounded action, so that
/// stored transitions replay exactly.
fn rollout<F>(spec: &EnvSpec, seed: u64, mut pick_action: F) -> Trajectory
where
    F: FnMut(&mut Rng, [f64; 2], [f64; 2]) -> [f64; 2],
{
    let mut rng = Rng::seed_from_u64(seed);
    let (state, goal) = env::reset(spec, GoalMode::Uniform, &mut rng)
        .expect("uniform reset cannot fail");
    let goal32 = [goal[0] as f32, goal[1] as f32];
    let mut pos32 = [state.pos[0] as f32, state.pos[1] as f32];
    let steps = spec.max_steps as usize;
    let mut states = Vec::with_capacity((steps + 1) * POINT_DIM);
    let mut actions = Vec::with_capacity(steps * POINT_DIM);
    states.extend_from_slice(&pos32);
    for t in 0..steps {
        let pos = [pos32[0] as f64, pos32[1] as f64];
        let a = pick_action(&mut rng, pos, [goal32[0] as f64, goal32[1] as f64]);
        let a32 = [a[0] as f32, a[1] as f32];
        let st = EnvState {
            pos,
            step_count: t as u32,
        };
        let next = env::step(&st, [a32[0] as f64, a32[1] as f64], spec)
            .expect("t < max_steps by construction");
        pos32 = [next.pos[0] as f32, next.pos[1] as f32];
        actions.extend_from_slice(&a32);
        states.extend_from_slice(&pos32);
    }
    Trajectory {
        states,
        actions,
        desired_goal: goal32.to_vec(),
    }
}

/// Trajectories with uniform-random starts and goals and actions drawn
/// uniformly from `[-1, 1]^2`; every episode runs the full `T` steps.
pub fn generate_random(spec: &EnvSpec, n_traj: usize, seed: u64) -> Dataset {
    assert!(n_traj > 0, "n_traj must be positive");
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let traj_seed = derive_seed(seed, "random-traj", i as u64);
            rollout(spec, traj_seed, |rng, _pos, _goal| {
                [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]
            })
        })
        .collect();
    Dataset {
        spec: spec.clone(),
        source: DataSource::Random,
        seed,
        trajectories,
    }
}

/// Trajectories from a scripted greedy controller: a unit vector toward the
/// goal scaled by `min(1, distance)`, plus per-axis Gaussian noise of width
/// `noise_sigma`, clipped to `[-1, 1]^2`.
pub fn generate_expert(spec: &EnvSpec, n_traj: usize, noise_sigma: f64, seed: u64) -> Dataset {
    assert!(n_traj > 0, "n_traj must be positive");
    assert!(noise_sigma >= 0.0, "noise_sigma must be non-negative");
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let traj_seed = derive_seed(seed, "expert-traj", i as u64);
            rollout(spec, traj_seed, |rng, pos, goal| {
                let to_goal = [goal[0] - pos[0], goal[1] - pos[1]];
                let dist = (to_goal[0] * to_goal[0] + to_goal[1] * to_goal[1]).sqrt();
                let mut a = if dist > 0.0 {
                    let scale = dist.min(1.0) / dist;
                    [to_goal[0] * scale, to_goal[1] * scale]
                } else {
                    [0.0, 0.0]
                };
                if noise_sigma > 0.0 {
                    a[0] += noise_sigma * rng.normal();
                    a[1] += noise_sigma * rng.normal();
                }
                [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)]
            })
        })
        .collect();
    Dataset {
        spec: spec.clone(),
        source: DataSource::Expert,
        seed,
        trajectories,
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(buf: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Encodes a dataset into the `MRLN` byte format.
pub fn to_bytes(data: &Dataset) -> Vec<u8> {
    let name = data.spec.name.as_str().as_bytes();
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, name.len() as u32);
    buf.extend_from_slice(name);
    put_u32(&mut buf, POINT_DIM as u32);
    put_u32(&mut buf, POINT_DIM as u32);
    put_u32(&mut buf, POINT_DIM as u32);
    buf.push(data.source.tag());
    put_u64(&mut buf, data.seed);
    put_u64(&mut buf, data.trajectories.len() as u64);
    put_u64(&mut buf, data.n_transitions());
    for traj in &data.trajectories {
        put_u32(&mut buf, traj.len() as u32);
        put_f32s(&mut buf, &traj.states);
        put_f32s(&mut buf, &traj.actions);
        put_f32s(&mut buf, &traj.desired_goal);
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DatasetError> {
        if self.pos + n > self.bytes.len() {
            return Err(DatasetError::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, DatasetError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, DatasetError> {
        Ok(self.take(1, what)?[0])
    }

    fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>, DatasetError> {
        let raw = self.take(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decodes a dataset from `MRLN` bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::UnsupportedVersion(version));
    }
    let name_len = cur.u32("name length")? as usize;
    let name_bytes = cur.take(name_len, "env name")?;
    let name_str = std::str::from_utf8(name_bytes)
        .map_err(|_| DatasetError::UnknownEnv(format!("{name_bytes:?}")))?;
    let name = EnvName::parse(name_str)
        .ok_or_else(|| DatasetError::UnknownEnv(name_str.to_string()))?;
    let state_dim = cur.u32("state_dim")?;
    let action_dim = cur.u32("action_dim")?;
    let goal_dim = cur.u32("goal_dim")?;
    if state_dim != POINT_DIM as u32 || action_dim != POINT_DIM as u32 || goal_dim != POINT_DIM as u32
    {
        return Err(DatasetError::DimMismatch {
            state: state_dim,
            action: action_dim,
            goal: goal_dim,
            exp: POINT_DIM as u32,
        });
    }
    let source_tag = cur.u8("source")?;
    let source = DataSource::from_tag(source_tag)
        .ok_or(DatasetError::UnknownSource(source_tag))?;
    let seed = cur.u64("seed")?;
    let n_traj = cur.u64("trajectory count")?;
    let n_transitions = cur.u64("transition count")?;
    let mut trajectories = Vec::with_capacity(n_traj as usize);
    let mut actual_transitions = 0u64;
    for _ in 0..n_traj {
        let len = cur.u32("trajectory length")? as usize;
        let states = cur.f32s((len + 1) * POINT_DIM, "states")?;
        let actions = cur.f32s(len * POINT_DIM, "actions")?;
        let desired_goal = cur.f32s(POINT_DIM, "desired goal")?;
        actual_transitions += len as u64;
        trajectories.push(Trajectory {
            states,
            actions,
            desired_goal,
        });
    }
    if cur.pos != bytes.len() {
        return Err(DatasetError::TrailingBytes);
    }
    if actual_transitions != n_transitions {
        return Err(DatasetError::CountMismatch {
            header: n_transitions,
            actual: actual_transitions,
        });
    }
    Ok(Dataset {
        spec: EnvSpec::named(name),
        source,
        seed,
        trajectories,
    })
}

/// Writes a dataset to `path` in the `MRLN` format.
pub fn save(data: &Dataset, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, to_bytes(data))?;
    Ok(())
}

/// Reads a dataset from `path`.
pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes)
}
