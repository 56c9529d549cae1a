//! 2D point-navigation environments: PointReach and PointRooms.
//!
//! Both tasks share the same bounded arena `[-b, b]^2` (default `b = 5`),
//! two-dimensional displacement actions, an identity state-to-goal mapping,
//! and a sparse binary reward `1[ ||s - g||_2 <= eps ]`. PointRooms adds two
//! axis-aligned walls through the origin, each half-wall with a centered
//! door of width 1, forming four rooms.
//!
//! Environment values are plain data; stepping never touches shared state,
//! so episodes can run concurrently.

use crate::rng::Rng;
use thiserror::Error;

/// State/action/goal dimensionality of the point environments.
pub const POINT_DIM: usize = 2;

/// Margin by which motion stops short of a wall intersection.
const WALL_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("fixed goal ({0}, {1}) lies outside the arena bounds")]
    InvalidGoal(f64, f64),
    #[error("episode exhausted: step called after {0} steps")]
    EpisodeExhausted(u32),
}

/// Which of the two point tasks an [`EnvSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvName {
    PointReach,
    PointRooms,
}

impl EnvName {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvName::PointReach => "point-reach",
            EnvName::PointRooms => "point-rooms",
        }
    }

    pub fn parse(s: &str) -> Option<EnvName> {
        match s {
            "point-reach" => Some(EnvName::PointReach),
            "point-rooms" => Some(EnvName::PointRooms),
            _ => None,
        }
    }
}

/// An axis-aligned wall segment.
///
/// `Vertical` walls live on the line `x = at` and span `y in [lo, hi]`;
/// `Horizontal` walls live on `y = at` and span `x in [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub vertical: bool,
    pub at: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Static description of a point environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: EnvName,
    /// Arena half-extent: positions live in `[-bound, bound]^2`.
    pub bound: f64,
    /// Goal tolerance `eps` of the sparse reward.
    pub reward_tolerance: f64,
    /// Maximum number of steps per episode.
    pub max_steps: u32,
    pub walls: Vec<Wall>,
}

impl EnvSpec {
    /// Open arena, no walls.
    pub fn point_reach() -> EnvSpec {
        EnvSpec {
            name: EnvName::PointReach,
            bound: 5.0,
            reward_tolerance: 1.0,
            max_steps: 50,
            walls: Vec::new(),
        }
    }

    /// Four-room arena: full-span walls at `x = 0` and `y = 0`, each
    /// half-wall with a door of width 1 centered at `bound / 2`.
    pub fn point_rooms() -> EnvSpec {
        let mut spec = EnvSpec {
            name: EnvName::PointRooms,
            ..EnvSpec::point_reach()
        };
        spec.name = EnvName::PointRooms;
        spec.walls = room_walls(spec.bound);
        spec
    }

    pub fn named(name: EnvName) -> EnvSpec {
        match name {
            EnvName::PointReach => EnvSpec::point_reach(),
            EnvName::PointRooms => EnvSpec::point_rooms(),
        }
    }

    /// Shrinks or grows the arena (test hook; walls are rebuilt).
    pub fn with_bound(mut self, bound: f64) -> EnvSpec {
        assert!(bound >= 0.0, "bound must be non-negative");
        self.bound = bound;
        if self.name == EnvName::PointRooms {
            self.walls = room_walls(bound);
        }
        self
    }

    pub fn state_dim(&self) -> usize {
        POINT_DIM
    }

    pub fn action_dim(&self) -> usize {
        POINT_DIM
    }

    pub fn goal_dim(&self) -> usize {
        POINT_DIM
    }
}

fn room_walls(bound: f64) -> Vec<Wall> {
    let half_door = 0.5;
    let mid = bound / 2.0;
    let spans = [
        (-bound, -mid - half_door),
        (-mid + half_door, 0.0),
        (0.0, mid - half_door),
        (mid + half_door, bound),
    ];
    let mut walls = Vec::with_capacity(8);
    for &(lo, hi) in &spans {
        walls.push(Wall {
            vertical: true,
            at: 0.0,
            lo,
            hi,
        });
        walls.push(Wall {
            vertical: false,
            at: 0.0,
            lo,
            hi,
        });
    }
    walls
}

/// Mutable per-episode state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub pos: [f64; 2],
    pub step_count: u32,
}

/// How `reset` picks the episode goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalMode {
    Fixed([f64; 2]),
    Uniform,
}

/// State-to-goal mapping; the identity for both point tasks.
#[inline]
pub fn phi(pos: [f64; 2]) -> [f64; 2] {
    pos
}

/// Sparse binary reward: 1 if `||phi(s) - g||_2 <= eps`, else 0.
///
/// The unsquared Euclidean distance is compared against the tolerance.
pub fn reward(pos: [f64; 2], goal: [f64; 2], spec: &EnvSpec) -> f64 {
    let dx = pos[0] - goal[0];
    let dy = pos[1] - goal[1];
    if (dx * dx + dy * dy).sqrt() <= spec.reward_tolerance {
        1.0
    } else {
        0.0
    }
}

/// Starts an episode: uniform start position and either a fixed or a
/// uniform goal. Position is drawn before the goal. In PointRooms, points
/// lying exactly on a wall are rejected and redrawn.
pub fn reset(
    spec: &EnvSpec,
    goal_mode: GoalMode,
    rng: &mut Rng,
) -> Result<(EnvState, [f64; 2]), EnvError> {
    let pos = sample_free_point(spec, rng);
    let goal = match goal_mode {
        GoalMode::Fixed(g) => {
            if g[0].abs() > spec.bound || g[1].abs() > spec.bound {
                return Err(EnvError::InvalidGoal(g[0], g[1]));
            }
            g
        }
        GoalMode::Uniform => sample_free_point(spec, rng),
    };
    Ok((EnvState { pos, step_count: 0 }, goal))
}

fn sample_free_point(spec: &EnvSpec, rng: &mut Rng) -> [f64; 2] {
    loop {
        let p = [
            rng.range(-spec.bound, spec.bound),
            rng.range(-spec.bound, spec.bound),
        ];
        if !on_wall(spec, p) {
            return p;
        }
    }
}

fn on_wall(spec: &EnvSpec, p: [f64; 2]) -> bool {
    spec.walls.iter().any(|w| {
        let (across, along) = if w.vertical { (p[0], p[1]) } else { (p[1], p[0]) };
        (across - w.at).abs() < 1e-12 && along >= w.lo && along <= w.hi
    })
}

/// Advances one step.
///
/// The action is rescaled to unit Euclidean norm only when its norm exceeds
/// 1; shorter actions pass through unchanged. The target position is clamped
/// into the arena per axis, and in PointRooms the (post-clamp) motion
/// segment stops [`WALL_MARGIN`] short of the first wall it would cross.
pub fn step(state: &EnvState, action: [f64; 2], spec: &EnvSpec) -> Result<EnvState, EnvError> {
    if state.step_count >= spec.max_steps {
        return Err(EnvError::EpisodeExhausted(state.step_count));
    }
    let norm = (action[0] * action[0] + action[1] * action[1]).sqrt();
    let disp = if norm > 1.0 {
        [action[0] / norm, action[1] / norm]
    } else {
        action
    };
    let target = [
        (state.pos[0] + disp[0]).clamp(-spec.bound, spec.bound),
        (state.pos[1] + disp[1]).clamp(-spec.bound, spec.bound),
    ];
    let pos = stop_at_walls(spec, state.pos, target);
    Ok(EnvState {
        pos,
        step_count: state.step_count + 1,
    })
}

/// Returns the endpoint of the motion `from -> to`, stopped just short of
/// the first wall crossing if there is one.
fn stop_at_walls(spec: &EnvSpec, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    if spec.walls.is_empty() {
        return to;
    }
    let d = [to[0] - from[0], to[1] - from[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len == 0.0 {
        return to;
    }
    let mut first_hit: Option<f64> = None;
    for w in &spec.walls {
        let (p_across, d_across, p_along, d_along) = if w.vertical {
            (from[0], d[0], from[1], d[1])
        } else {
            (from[1], d[1], from[0], d[0])
        };
        if d_across == 0.0 {
            continue; // parallel motion never crosses
        }
        let t = (w.at - p_across) / d_across;
        // t = 0 means starting on the wall line; leaving it is allowed.
        if t <= 0.0 || t > 1.0 {
            continue;
        }
        let along = p_along + t * d_along;
        if along >= w.lo && along <= w.hi && first_hit.is_none_or(|h| t < h) {
            first_hit = Some(t);
        }
    }
    match first_hit {
        None => to,
        Some(t) => {
            let travel = (t * len - WALL_MARGIN).max(0.0);
            let scale = travel / len;
            [from[0] + scale * d[0], from[1] + scale * d[1]]
        }
    }
}
