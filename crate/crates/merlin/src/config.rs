//! Run configuration files.
//!
//! A line-based `key = value` format with `[section]` headers; `#` starts a
//! comment and blank lines are ignored. Unknown sections, unknown keys, and
//! duplicate keys are rejected rather than silently defaulted, so typos
//! fail loudly. `parse` and `serialize` round-trip exactly.
//!
//! Sections and keys (defaults in parentheses):
//!
//! ```text
//! [env]     name (point-reach) | reward_tolerance | max_steps | bound
//! [data]    path | n_trajectories (2000) | source (random) | noise_sigma (0.2)
//! [stitch]  delta (1e-6) | n_new (500)            — optional section
//! [relabel] hindsight_ratio (1.0)
//! [train]   mode (merlin) | updates (100000) | batch_size (512)
//!           | lr (5e-4) | log_interval (1000) | checkpoint_interval (0)
//! [model]   epochs (100) | lr (3e-4) | batch_size (256)
//!           | n_rollouts (2000) | rollout_steps (50) — optional section
//! [eval]    gamma (0.98) | horizon (1) | episodes (100)
//!           | goal_mode (uniform) | goal (0,0)
//! [run]     seed (0) | out_dir
//! ```

use crate::dataset::DataSource;
use crate::env::{EnvName, EnvSpec};
use crate::policy::TrainMode;
use crate::reverse_model::ReverseModelParams;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key {key:?} in section [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: {msg}")]
    BadValue { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSection {
    pub name: EnvName,
    pub reward_tolerance: Option<f64>,
    pub max_steps: Option<u32>,
    pub bound: Option<f64>,
}

impl EnvSection {
    /// Resolves the section into a concrete spec (named preset plus
    /// overrides).
    pub fn spec(&self) -> EnvSpec {
        let mut spec = EnvSpec::named(self.name);
        if let Some(eps) = self.reward_tolerance {
            spec.reward_tolerance = eps;
        }
        if let Some(t) = self.max_steps {
            spec.max_steps = t;
        }
        if let Some(b) = self.bound {
            spec = spec.with_bound(b);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    pub path: Option<String>,
    pub n_trajectories: u64,
    pub source: DataSource,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchSection {
    pub delta: f64,
    pub n_new: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub mode: TrainMode,
    pub updates: u64,
    pub batch_size: u64,
    pub lr: f64,
    pub log_interval: u64,
    pub checkpoint_interval: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalModeKind {
    Uniform,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub gamma: f64,
    pub horizon: u32,
    pub episodes: u32,
    pub goal_mode: GoalModeKind,
    pub goal: [f64; 2],
}

impl EvalSection {
    pub fn goal_mode(&self) -> crate::env::GoalMode {
        match self.goal_mode {
            GoalModeKind::Uniform => crate::env::GoalMode::Uniform,
            GoalModeKind::Fixed => crate::env::GoalMode::Fixed(self.goal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvSection,
    pub data: DataSection,
    pub stitch: Option<StitchSection>,
    pub hindsight_ratio: f64,
    pub train: TrainSection,
    pub model: Option<ReverseModelParams>,
    pub eval: EvalSection,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvSection {
                name: EnvName::PointReach,
                reward_tolerance: None,
                max_steps: None,
                bound: None,
            },
            data: DataSection {
                path: None,
                n_trajectories: 2000,
                source: DataSource::Random,
                noise_sigma: 0.2,
            },
            stitch: None,
            hindsight_ratio: 1.0,
            train: TrainSection {
                mode: TrainMode::Merlin,
                updates: 100_000,
                batch_size: 512,
                lr: 5e-4,
                log_interval: 1000,
                checkpoint_interval: 0,
            },
            model: None,
            eval: EvalSection {
                gamma: 0.98,
                horizon: 1,
                episodes: 100,
                goal_mode: GoalModeKind::Uniform,
                goal: [0.0, 0.0],
            },
            run: RunSection {
                seed: 0,
                out_dir: None,
            },
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn to_file(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Semantic validation shared by all subcommands that train.
    pub fn validate_for_train(&self) -> Result<(), ConfigError> {
        if self.data.path.is_none() {
            return Err(ConfigError::Invalid(
                "training requires [data] path".into(),
            ));
        }
        if self.train.mode == TrainMode::MerlinNp && self.stitch.is_none() {
            return Err(ConfigError::Invalid(
                "mode merlin_np requires a [stitch] section".into(),
            ));
        }
        if self.train.mode == TrainMode::MerlinP && self.model.is_none() {
            return Err(ConfigError::Invalid(
                "mode merlin_p requires a [model] section".into(),
            ));
        }
        if let Some(model) = &self.model {
            if model.rollout_steps > self.env.spec().max_steps {
                return Err(ConfigError::Invalid(format!(
                    "rollout_steps {} exceeds the episode cap {}",
                    model.rollout_steps,
                    self.env.spec().max_steps
                )));
            }
        }
        self.validate_common()
    }

    pub fn validate_common(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.hindsight_ratio) {
            return Err(ConfigError::Invalid(format!(
                "hindsight_ratio must lie in [0, 1], got {}",
                self.hindsight_ratio
            )));
        }
        if !(self.eval.gamma > 0.0 && self.eval.gamma <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "gamma must lie in (0, 1], got {}",
                self.eval.gamma
            )));
        }
        if self.eval.horizon < 1 {
            return Err(ConfigError::Invalid("horizon must be at least 1".into()));
        }
        if self.eval.episodes < 1 {
            return Err(ConfigError::Invalid("episodes must be at least 1".into()));
        }
        if self.train.batch_size < 1 {
            return Err(ConfigError::Invalid("batch_size must be at least 1".into()));
        }
        let spec = self.env.spec();
        if spec.reward_tolerance <= 0.0 {
            return Err(ConfigError::Invalid(
                "reward_tolerance must be positive".into(),
            ));
        }
        if spec.max_steps == 0 {
            return Err(ConfigError::Invalid("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[env]");
        let _ = writeln!(s, "name = {}", self.env.name.as_str());
        if let Some(v) = self.env.reward_tolerance {
            let _ = writeln!(s, "reward_tolerance = {v}");
        }
        if let Some(v) = self.env.max_steps {
            let _ = writeln!(s, "max_steps = {v}");
        }
        if let Some(v) = self.env.bound {
            let _ = writeln!(s, "bound = {v}");
        }
        let _ = writeln!(s, "\n[data]");
        if let Some(p) = &self.data.path {
            let _ = writeln!(s, "path = {p}");
        }
        let _ = writeln!(s, "n_trajectories = {}", self.data.n_trajectories);
        let _ = writeln!(s, "source = {}", self.data.source.as_str());
        let _ = writeln!(s, "noise_sigma = {}", self.data.noise_sigma);
        if let Some(st) = &self.stitch {
            let _ = writeln!(s, "\n[stitch]");
            let _ = writeln!(s, "delta = {}", st.delta);
            let _ = writeln!(s, "n_new = {}", st.n_new);
        }
        let _ = writeln!(s, "\n[relabel]");
        let _ = writeln!(s, "hindsight_ratio = {}", self.hindsight_ratio);
        let _ = writeln!(s, "\n[train]");
        let _ = writeln!(s, "mode = {}", self.train.mode.as_str());
        let _ = writeln!(s, "updates = {}", self.train.updates);
        let _ = writeln!(s, "batch_size = {}", self.train.batch_size);
        let _ = writeln!(s, "lr = {}", self.train.lr);
        let _ = writeln!(s, "log_interval = {}", self.train.log_interval);
        let _ = writeln!(s, "checkpoint_interval = {}", self.train.checkpoint_interval);
        if let Some(m) = &self.model {
            let _ = writeln!(s, "\n[model]");
            let _ = writeln!(s, "epochs = {}", m.epochs);
            let _ = writeln!(s, "lr = {}", m.lr);
            let _ = writeln!(s, "batch_size = {}", m.batch_size);
            let _ = writeln!(s, "n_rollouts = {}", m.n_rollouts);
            let _ = writeln!(s, "rollout_steps = {}", m.rollout_steps);
        }
        let _ = writeln!(s, "\n[eval]");
        let _ = writeln!(s, "gamma = {}", self.eval.gamma);
        let _ = writeln!(s, "horizon = {}", self.eval.horizon);
        let _ = writeln!(s, "episodes = {}", self.eval.episodes);
        let _ = writeln!(
            s,
            "goal_mode = {}",
            match self.eval.goal_mode {
                GoalModeKind::Uniform => "uniform",
                GoalModeKind::Fixed => "fixed",
            }
        );
        let _ = writeln!(s, "goal = {},{}", self.eval.goal[0], self.eval.goal[1]);
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.run.seed);
        if let Some(d) = &self.run.out_dir {
            let _ = writeln!(s, "out_dir = {d}");
        }
        s
    }

    /// FNV-1a hash of the canonical serialization, as fixed-width hex.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in self.serialize().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        format!("{h:016x}")
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut model = ReverseModelParams::default();
        let mut stitch = StitchSection {
            delta: 1e-6,
            n_new: 500,
        };
        let mut saw_model = false;
        let mut saw_stitch = false;
        let mut section: Option<String> = None;
        let mut seen: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                })?;
                match name {
                    "env" | "data" | "stitch" | "relabel" | "train" | "model" | "eval"
                    | "run" => {
                        if name == "model" {
                            saw_model = true;
                        }
                        if name == "stitch" {
                            saw_stitch = true;
                        }
                        section = Some(name.to_string());
                    }
                    _ => {
                        return Err(ConfigError::UnknownSection {
                            line: line_no,
                            name: name.to_string(),
                        })
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: line_no,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let sec = section.clone().ok_or(ConfigError::Syntax {
                line: line_no,
                msg: "key before any [section] header".into(),
            })?;
            if seen.iter().any(|(s, k)| s == &sec && k == key) {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    section: sec,
                    key: key.to_string(),
                });
            }
            seen.push((sec.clone(), key.to_string()));
            let bad = |msg: String| ConfigError::BadValue { line: line_no, msg };
            match (sec.as_str(), key) {
                ("env", "name") => {
                    cfg.env.name = EnvName::parse(value)
                        .ok_or_else(|| bad(format!("unknown environment {value:?}")))?;
                }
                ("env", "reward_tolerance") => {
                    cfg.env.reward_tolerance = Some(parse_f64(value, line_no)?)
                }
                ("env", "max_steps") => cfg.env.max_steps = Some(parse_num(value, line_no)?),
                ("env", "bound") => cfg.env.bound = Some(parse_f64(value, line_no)?),
                ("data", "path") => cfg.data.path = Some(value.to_string()),
                ("data", "n_trajectories") => {
                    cfg.data.n_trajectories = parse_num(value, line_no)?
                }
                ("data", "source") => {
                    cfg.data.source = match value {
                        "random" => DataSource::Random,
                        "expert" => DataSource::Expert,
                        _ => return Err(bad(format!("unknown source {value:?}"))),
                    }
                }
                ("data", "noise_sigma") => cfg.data.noise_sigma = parse_f64(value, line_no)?,
                ("stitch", "delta") => stitch.delta = parse_f64(value, line_no)?,
                ("stitch", "n_new") => stitch.n_new = parse_num(value, line_no)?,
                ("relabel", "hindsight_ratio") => {
                    cfg.hindsight_ratio = parse_f64(value, line_no)?
                }
                ("train", "mode") => {
                    cfg.train.mode = TrainMode::parse(value)
                        .ok_or_else(|| bad(format!("unknown mode {value:?}")))?;
                }
                ("train", "updates") => cfg.train.updates = parse_num(value, line_no)?,
                ("train", "batch_size") => cfg.train.batch_size = parse_num(value, line_no)?,
                ("train", "lr") => cfg.train.lr = parse_f64(value, line_no)?,
                ("train", "log_interval") => {
                    cfg.train.log_interval = parse_num(value, line_no)?
                }
                ("train", "checkpoint_interval") => {
                    cfg.train.checkpoint_interval = parse_num(value, line_no)?
                }
                ("model", "epochs") => model.epochs = parse_num(value, line_no)?,
                ("model", "lr") => model.lr = parse_f64(value, line_no)?,
                ("model", "batch_size") => {
                    model.batch_size = parse_num::<u64>(value, line_no)? as usize
                }
                ("model", "n_rollouts") => {
                    model.n_rollouts = parse_num::<u64>(value, line_no)? as usize
                }
                ("model", "rollout_steps") => model.rollout_steps = parse_num(value, line_no)?,
                ("eval", "gamma") => cfg.eval.gamma = parse_f64(value, line_no)?,
                ("eval", "horizon") => cfg.eval.horizon = parse_num(value, line_no)?,
                ("eval", "episodes") => cfg.eval.episodes = parse_num(value, line_no)?,
                ("eval", "goal_mode") => {
                    cfg.eval.goal_mode = match value {
                        "uniform" => GoalModeKind::Uniform,
                        "fixed" => GoalModeKind::Fixed,
                        _ => return Err(bad(format!("unknown goal_mode {value:?}"))),
                    }
                }
                ("eval", "goal") => cfg.eval.goal = parse_pair(value, line_no)?,
                ("run", "seed") => cfg.run.seed = parse_num(value, line_no)?,
                ("run", "out_dir") => cfg.run.out_dir = Some(value.to_string()),
                (_, _) => {
                    return Err(ConfigError::UnknownKey {
                        line: line_no,
                        section: sec,
                        key: key.to_string(),
                    })
                }
            }
        }
        if saw_stitch {
            cfg.stitch = Some(stitch);
        }
        if saw_model {
            cfg.model = Some(model);
        }
        Ok(cfg)
    }
}

fn parse_f64(value: &str, line: usize) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        msg: format!("expected a number, got {value:?}"),
    })
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        msg: format!("expected an integer, got {value:?}"),
    })
}

fn parse_pair(value: &str, line: usize) -> Result<[f64; 2], ConfigError> {
    let (a, b) = value.split_once(',').ok_or(ConfigError::BadValue {
        line,
        msg: format!("expected `x,y`, got {value:?}"),
    })?;
    Ok([parse_f64(a.trim(), line)?, parse_f64(b.trim(), line)?])
}
