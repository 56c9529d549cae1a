//! Policy evaluation: discounted return and success metrics, goal and
//! horizon sweeps, and vector-field export.
//!
//! An episode rolls the policy's mean action for `T` steps at a fixed
//! conditioning horizon `h*`. Rewards are evaluated on the state reached by
//! each action, so the return is `sum_{t=0}^{T-1} gamma^t r(s_{t+1})` and
//! success is the reward at the final state. Episodes are independent and
//! run in parallel with per-episode derived seeds.

use crate::env::{self, EnvSpec, GoalMode};
use crate::policy::{ActMode, GaussianPolicy};
use crate::rng::{derive_seed, Rng};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Env(#[from] env::EnvError),
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub n_episodes: u32,
    pub gamma: f64,
    /// Conditioning horizon `h*`, held fixed for every step.
    pub horizon: u32,
    pub goal_mode: GoalMode,
    pub seed: u64,
}

/// Aggregate metrics over a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub discounted_return_mean: f64,
    pub discounted_return_std: f64,
    /// Fraction of episodes whose final state attains the goal.
    pub success_rate: f64,
    /// Fraction of episodes that attain the goal at any step.
    pub any_step_success_rate: f64,
    pub n_episodes: u32,
    pub gamma: f64,
    pub horizon: u32,
    pub seed: u64,
}

impl EvalReport {
    /// Upper bound `(1 - gamma^T) / (1 - gamma)` on any episode return.
    pub fn return_bound(gamma: f64, max_steps: u32) -> f64 {
        if gamma == 1.0 {
            max_steps as f64
        } else {
            (1.0 - gamma.powi(max_steps as i32)) / (1.0 - gamma)
        }
    }

    /// CSV header shared by all report files.
    pub const CSV_HEADER: &'static str =
        "return_mean,return_std,success_rate,any_step_success_rate,n_episodes,gamma,horizon,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.discounted_return_mean,
            self.discounted_return_std,
            self.success_rate,
            self.any_step_success_rate,
            self.n_episodes,
            self.gamma,
            self.horizon,
            self.seed
        )
    }
}

/// One evaluation episode; returns (discounted return, final success,
/// any-step success).
fn run_episode(
    policy: &GaussianPolicy,
    spec: &EnvSpec,
    cfg: &EvalConfig,
    episode_seed: u64,
) -> Result<(f64, bool, bool), EvalError> {
    let mut rng = Rng::seed_from_u64(episode_seed);
    let (mut state, goal) = env::reset(spec, cfg.goal_mode, &mut rng)?;
    let mut ret = 0.0;
    let mut disc = 1.0;
    let mut last_reward = 0.0;
    let mut any = false;
    for _ in 0..spec.max_steps {
        let action = policy.act(state.pos, goal, cfg.horizon, ActMode::Mean, &mut rng);
        state = env::step(&state, action, spec)?;
        let r = env::reward(state.pos, goal, spec);
        ret += disc * r;
        disc *= cfg.gamma;
        last_reward = r;
        any |= r == 1.0;
    }
    Ok((ret, last_reward == 1.0, any))
}

/// Evaluates a policy over `n_episodes` independent episodes.
pub fn evaluate(
    policy: &GaussianPolicy,
    spec: &EnvSpec,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    assert!(cfg.n_episodes >= 1, "need at least one episode");
    assert!(
        cfg.gamma > 0.0 && cfg.gamma <= 1.0,
        "gamma must lie in (0, 1]"
    );
    let episodes: Result<Vec<(f64, bool, bool)>, EvalError> = (0..cfg.n_episodes)
        .into_par_iter()
        .map(|i| run_episode(policy, spec, cfg, derive_seed(cfg.seed, "eval-episode", i as u64)))
        .collect();
    let episodes = episodes?;
    let n = episodes.len() as f64;
    let mean = episodes.iter().map(|e| e.0).sum::<f64>() / n;
    let var = episodes.iter().map(|e| (e.0 - mean).powi(2)).sum::<f64>() / n;
    let success = episodes.iter().filter(|e| e.1).count() as f64 / n;
    let any = episodes.iter().filter(|e| e.2).count() as f64 / n;
    Ok(EvalReport {
        discounted_return_mean: mean,
        discounted_return_std: var.sqrt(),
        success_rate: success,
        any_step_success_rate: any,
        n_episodes: cfg.n_episodes,
        gamma: cfg.gamma,
        horizon: cfg.horizon,
        seed: cfg.seed,
    })
}

/// Evaluates the policy on each supplied goal (generalization test for
/// policies trained against one fixed goal). Returns one report per goal,
/// in order; an empty goal list yields an empty report.
pub fn ood_goal_sweep(
    policy: &GaussianPolicy,
    spec: &EnvSpec,
    goals: &[[f64; 2]],
    n_per_goal: u32,
    gamma: f64,
    horizon: u32,
    seed: u64,
) -> Result<Vec<([f64; 2], EvalReport)>, EvalError> {
    goals
        .iter()
        .enumerate()
        .map(|(i, &goal)| {
            let cfg = EvalConfig {
                n_episodes: n_per_goal,
                gamma,
                horizon,
                goal_mode: GoalMode::Fixed(goal),
                seed: derive_seed(seed, "ood-goal", i as u64),
            };
            Ok((goal, evaluate(policy, spec, &cfg)?))
        })
        .collect()
}

/// Evaluates the policy at each conditioning horizon. All horizons share
/// the same seed so the comparison is paired.
pub fn horizon_sweep(
    policy: &GaussianPolicy,
    spec: &EnvSpec,
    horizons: &[u32],
    base: &EvalConfig,
) -> Result<Vec<(u32, EvalReport)>, EvalError> {
    horizons
        .iter()
        .map(|&h| {
            let cfg = EvalConfig {
                horizon: h,
                ..base.clone()
            };
            Ok((h, evaluate(policy, spec, &cfg)?))
        })
        .collect()
}

/// Grid of policy means and standard deviations, used to export the
/// action vector field around a goal.
#[derive(Debug, Clone)]
pub struct VectorField {
    /// Rows `(x, y, mu_x, mu_y, sigma_x, sigma_y)`, y-major (the x index
    /// varies fastest).
    pub rows: Vec<[f64; 6]>,
}

impl VectorField {
    pub const CSV_HEADER: &'static str = "x,y,mu_x,mu_y,sigma_x,sigma_y";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5]);
        }
        out
    }
}

/// Evaluates the policy mean and standard deviation on a uniform
/// `nx x ny` grid of cell centers spanning the arena.
pub fn vector_field(
    policy: &GaussianPolicy,
    spec: &EnvSpec,
    goal: [f64; 2],
    horizon: u32,
    nx: usize,
    ny: usize,
) -> VectorField {
    assert!(nx >= 1 && ny >= 1);
    let b = spec.bound;
    let mut rows = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = -b + (iy as f64 + 0.5) * (2.0 * b / ny as f64);
        for ix in 0..nx {
            let x = -b + (ix as f64 + 0.5) * (2.0 * b / nx as f64);
            let (mu, sigma) = policy.mean_std([x, y], goal, horizon);
            rows.push([x, y, mu[0], mu[1], sigma[0], sigma[1]]);
        }
    }
    VectorField { rows }
}

/// Writes the vector field as CSV (`x,y,mu_x,mu_y,sigma_x,sigma_y`).
pub fn export_vector_field(
    policy: &GaussianPolicy,
    spec: &EnvSpec,
    goal: [f64; 2],
    horizon: u32,
    nx: usize,
    ny: usize,
    path: &Path,
) -> Result<(), EvalError> {
    let field = vector_field(policy, spec, goal, horizon, nx, ny);
    fs::write(path, field.to_csv())?;
    Ok(())
}

/// Mean cosine similarity between the policy mean action and the direction
/// to `goal` over the field's cells, excluding cells within `exclude_radius`
/// of the goal (where the direction is ill-defined).
pub fn mean_cosine_to_goal(field: &VectorField, goal: [f64; 2], exclude_radius: f64) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for r in &field.rows {
        let to_goal = [goal[0] - r[0], goal[1] - r[1]];
        let dist = (to_goal[0] * to_goal[0] + to_goal[1] * to_goal[1]).sqrt();
        if dist < exclude_radius {
            continue;
        }
        let mu_norm = (r[2] * r[2] + r[3] * r[3]).sqrt();
        if mu_norm == 0.0 {
            continue;
        }
        acc += (to_goal[0] * r[2] + to_goal[1] * r[3]) / (dist * mu_norm);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Mean of `(sigma_x + sigma_y) / 2` over the field's cells within
/// `radius` of `goal`.
pub fn mean_sigma_near_goal(field: &VectorField, goal: [f64; 2], radius: f64) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for r in &field.rows {
        let dist = ((goal[0] - r[0]).powi(2) + (goal[1] - r[1]).powi(2)).sqrt();
        if dist <= radius {
            acc += 0.5 * (r[4] + r[5]);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Mlp;
    use crate::policy::GaussianPolicy;

    fn zero_policy() -> GaussianPolicy {
        // Zero network: mean action (0, 0) everywhere.
        GaussianPolicy::from_net(Mlp::zeros(&GaussianPolicy::net_dims()), 50, false)
    }

    #[test]
    fn stationary_policy_at_goal_earns_geometric_series() {
        // Under the zero policy the agent never moves; with the goal fixed
        // at the start position every step pays 1, so the return is the
        // full geometric series (1 - g^50) / (1 - g) ~ 31.792 at g = 0.98.
        let spec = EnvSpec::point_reach().with_bound(0.0);
        let policy = zero_policy();
        let cfg = EvalConfig {
            n_episodes: 4,
            gamma: 0.98,
            horizon: 1,
            goal_mode: GoalMode::Fixed([0.0, 0.0]),
            seed: 1,
        };
        let report = evaluate(&policy, &spec, &cfg).unwrap();
        let bound = EvalReport::return_bound(0.98, 50);
        assert!((bound - 31.791515995644).abs() < 1e-9);
        assert!((report.discounted_return_mean - bound).abs() < 1e-9);
        assert_eq!(report.discounted_return_std, 0.0);
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.any_step_success_rate, 1.0);
    }

    #[test]
    fn never_reaching_policy_scores_zero() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        // Start and goal far apart: fix the goal in a corner; starts are
        // uniform, so exclude the lucky ones by checking the bound only.
        let cfg = EvalConfig {
            n_episodes: 50,
            gamma: 0.98,
            horizon: 1,
            goal_mode: GoalMode::Fixed([4.9, 4.9]),
            seed: 3,
        };
        let report = evaluate(&policy, &spec, &cfg).unwrap();
        // The immobile policy succeeds only if the start lands within the
        // tolerance of the corner goal; that region is ~pi/4 % of the arena.
        assert!(report.discounted_return_mean < 1.0);
        assert!(report.success_rate < 0.05);
    }

    #[test]
    fn returns_respect_the_geometric_bound() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        let cfg = EvalConfig {
            n_episodes: 100,
            gamma: 0.98,
            horizon: 5,
            goal_mode: GoalMode::Uniform,
            seed: 9,
        };
        let report = evaluate(&policy, &spec, &cfg).unwrap();
        let bound = EvalReport::return_bound(cfg.gamma, spec.max_steps);
        assert!(report.discounted_return_mean >= 0.0);
        assert!(report.discounted_return_mean <= bound);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        let cfg = EvalConfig {
            n_episodes: 20,
            gamma: 0.98,
            horizon: 1,
            goal_mode: GoalMode::Uniform,
            seed: 5,
        };
        let a = evaluate(&policy, &spec, &cfg).unwrap();
        let b = evaluate(&policy, &spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_goal_sweep_entry_matches_plain_evaluate() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        let reports =
            ood_goal_sweep(&policy, &spec, &[[1.0, -2.0]], 10, 0.98, 1, 7).unwrap();
        assert_eq!(reports.len(), 1);
        let cfg = EvalConfig {
            n_episodes: 10,
            gamma: 0.98,
            horizon: 1,
            goal_mode: GoalMode::Fixed([1.0, -2.0]),
            seed: derive_seed(7, "ood-goal", 0),
        };
        let direct = evaluate(&policy, &spec, &cfg).unwrap();
        assert_eq!(reports[0].1, direct);
    }

    #[test]
    fn empty_goal_list_gives_empty_report() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        let reports = ood_goal_sweep(&policy, &spec, &[], 10, 0.98, 1, 7).unwrap();
        assert!(reports.is_empty());
    }

    #[test]
    fn single_horizon_sweep_matches_evaluate() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        let base = EvalConfig {
            n_episodes: 10,
            gamma: 0.98,
            horizon: 1,
            goal_mode: GoalMode::Uniform,
            seed: 11,
        };
        let sweep = horizon_sweep(&policy, &spec, &[5], &base).unwrap();
        let direct = evaluate(
            &policy,
            &spec,
            &EvalConfig {
                horizon: 5,
                ..base.clone()
            },
        )
        .unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0], (5, direct));
    }

    #[test]
    fn vector_field_grid_layout() {
        let spec = EnvSpec::point_reach();
        let policy = zero_policy();
        let field = vector_field(&policy, &spec, [0.0, 0.0], 1, 1, 1);
        assert_eq!(field.rows.len(), 1);
        // A 1x1 grid has its single cell center at the arena center.
        assert_eq!(field.rows[0][0], 0.0);
        assert_eq!(field.rows[0][1], 0.0);
        let field = vector_field(&policy, &spec, [0.0, 0.0], 1, 20, 20);
        assert_eq!(field.rows.len(), 400);
        // Cell centers at -4.75 + 0.5k; x varies fastest.
        assert!((field.rows[0][0] + 4.75).abs() < 1e-12);
        assert!((field.rows[0][1] + 4.75).abs() < 1e-12);
        assert!((field.rows[1][0] + 4.25).abs() < 1e-12);
        assert!((field.rows[1][1] + 4.75).abs() < 1e-12);
        let csv = field.to_csv();
        assert!(csv.starts_with("x,y,mu_x,mu_y,sigma_x,sigma_y\n"));
        assert_eq!(csv.lines().count(), 401);
    }
}
