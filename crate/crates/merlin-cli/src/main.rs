//! `merlin` — command-line pipeline for the offline goal-conditioned RL
//! toolkit: dataset generation, trajectory stitching, policy training,
//! evaluation sweeps, and vector-field export.
//!
//! Every subcommand reads an optional config file (`--config`), applies
//! flag overrides on top, validates the result, and writes its artifacts
//! together with a manifest recording the effective config hash and seed.
//! Reruns with identical config and seed reproduce artifacts byte for byte
//! (the training log's wall-time column excepted).
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use merlin::config::{GoalModeKind, RunConfig, StitchSection};
use merlin::dataset::{self, DataSource};
use merlin::eval::{
    evaluate, export_vector_field, horizon_sweep, ood_goal_sweep, EvalConfig, EvalReport,
};
use merlin::neighbors::BallTree;
use merlin::policy::{train, GaussianPolicy, StitchParams, TrainConfig, TrainMode, TrainOutcome};
use merlin::rng::derive_seed;
use merlin::stitcher::{stitch, stitch_stats, StitchConfig};
use merlin::verify;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "merlin",
    version,
    about = "Offline goal-conditioned RL: reverse trajectory play, stitching, and Gaussian behavior cloning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration file (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Top-level seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline dataset (random or scripted-expert behavior).
    GenData {
        #[command(flatten)]
        common: ConfigArg,
        /// Environment: point-reach or point-rooms.
        #[arg(long)]
        env: Option<String>,
        /// Number of trajectories.
        #[arg(long)]
        n: Option<u64>,
        /// Behavior policy: random or expert.
        #[arg(long)]
        source: Option<String>,
        /// Expert action noise (expert source only).
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Output dataset path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Augment a dataset with nearest-neighbor stitched trajectories.
    Stitch {
        #[command(flatten)]
        common: ConfigArg,
        /// Input dataset path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Distance threshold for switching trajectories.
        #[arg(long)]
        delta: Option<f64>,
        /// Number of new trajectories.
        #[arg(long)]
        m: Option<u64>,
        /// Output dataset path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a policy (modes: merlin, merlin_np, merlin_p, gcsl).
    Train {
        #[command(flatten)]
        common: ConfigArg,
        /// Input dataset path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Training mode.
        #[arg(long)]
        mode: Option<String>,
        /// Number of policy updates.
        #[arg(long)]
        updates: Option<u64>,
        /// Batch size.
        #[arg(long)]
        batch_size: Option<u64>,
        /// Learning rate.
        #[arg(long)]
        lr: Option<f64>,
        /// Hindsight relabeling ratio in [0, 1].
        #[arg(long)]
        ratio: Option<f64>,
        /// Output directory for policy.mrlw, train_log.csv, and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained policy checkpoint.
    Eval {
        #[command(flatten)]
        common: ConfigArg,
        /// Policy checkpoint (policy.mrlw).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of evaluation episodes.
        #[arg(long)]
        episodes: Option<u32>,
        /// Discount factor.
        #[arg(long)]
        gamma: Option<f64>,
        /// Conditioning horizon h*.
        #[arg(long)]
        horizon: Option<u32>,
        /// Fixed evaluation goal "x,y" (default: uniform goals).
        #[arg(long)]
        goal: Option<String>,
        /// Report CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate at several conditioning horizons.
    SweepHorizon {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated horizons, e.g. "1,5,10,20,50".
        #[arg(long)]
        horizons: String,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate on a list of fixed goals (generalization test).
    SweepOod {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Semicolon-separated goals, e.g. "4,4;-4,4;-4,-4;4,-4".
        #[arg(long)]
        goals: String,
        /// Episodes per goal.
        #[arg(long)]
        n_per_goal: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the policy mean/std field on a grid as CSV.
    ExportField {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Conditioning goal "x,y".
        #[arg(long)]
        goal: String,
        /// Conditioning horizon.
        #[arg(long)]
        horizon: Option<u32>,
        /// Grid size "NXxNY", e.g. "20x20".
        #[arg(long, default_value = "20x20")]
        grid: String,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify backprop gradients of every loss against finite differences.
    GradCheck {
        #[command(flatten)]
        common: ConfigArg,
        /// Random instances per loss.
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
}

/// Errors carrying the intended process exit code.
enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Validation(e) | CliError::Runtime(e) => e,
        }
    }
}

fn validation<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Validation(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MERLIN_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MERLIN_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(common: &ConfigArg) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path).map_err(validation)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

/// Byte-stable manifest enabling reproducible reruns.
fn write_manifest(path: &Path, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let text = format!(
        "command = {command}\nconfig_hash = {}\nseed = {}\ncrate_version = {}\ndataset_format = {}\ncheckpoint_format = {}\n",
        cfg.hash_hex(),
        cfg.run.seed,
        env!("CARGO_PKG_VERSION"),
        dataset::FORMAT_VERSION,
        merlin::nn::checkpoint::FORMAT_VERSION,
    );
    fs::write(path, text)
        .with_context(|| format!("writing manifest {}", path.display()))
        .map_err(runtime)
}

fn parse_pair(text: &str) -> Result<[f64; 2], CliError> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| validation(anyhow!("expected \"x,y\", got {text:?}")))?;
    let x = a.trim().parse().map_err(|_| validation(anyhow!("bad number {a:?}")))?;
    let y = b.trim().parse().map_err(|_| validation(anyhow!("bad number {b:?}")))?;
    Ok([x, y])
}

fn load_policy(cfg: &RunConfig, checkpoint: &Path) -> Result<GaussianPolicy, CliError> {
    let bytes = fs::read(checkpoint)
        .with_context(|| format!("reading checkpoint {}", checkpoint.display()))
        .map_err(runtime)?;
    let gcsl = cfg.train.mode == TrainMode::Gcsl;
    GaussianPolicy::from_checkpoint_bytes(&bytes, cfg.env.spec().max_steps, gcsl)
        .map_err(validation)
}

fn print_report_table(rows: &[(String, &EvalReport)]) {
    println!(
        "{:<16} {:>12} {:>10} {:>9} {:>9} {:>6} {:>5}",
        "condition", "return_mean", "return_std", "success", "any_step", "gamma", "h"
    );
    for (label, r) in rows {
        println!(
            "{:<16} {:>12.4} {:>10.4} {:>9.3} {:>9.3} {:>6.3} {:>5}",
            label,
            r.discounted_return_mean,
            r.discounted_return_std,
            r.success_rate,
            r.any_step_success_rate,
            r.gamma,
            r.horizon
        );
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData {
            common,
            env,
            n,
            source,
            noise_sigma,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(env) = &env {
                cfg.env.name = merlin::env::EnvName::parse(env)
                    .ok_or_else(|| validation(anyhow!("unknown environment {env:?}")))?;
            }
            if let Some(n) = n {
                cfg.data.n_trajectories = n;
            }
            if let Some(source) = &source {
                cfg.data.source = match source.as_str() {
                    "random" => DataSource::Random,
                    "expert" => DataSource::Expert,
                    _ => return Err(validation(anyhow!("unknown source {source:?}"))),
                };
            }
            if let Some(sigma) = noise_sigma {
                cfg.data.noise_sigma = sigma;
            }
            if let Some(out) = &out {
                cfg.data.path = Some(out.display().to_string());
            }
            cfg.validate_common().map_err(validation)?;
            let path = PathBuf::from(cfg.data.path.clone().ok_or_else(|| {
                validation(anyhow!("gen-data needs --out or [data] path in the config"))
            })?);
            if cfg.data.n_trajectories == 0 {
                return Err(validation(anyhow!("n_trajectories must be positive")));
            }
            let spec = cfg.env.spec();
            let seed = cfg.run.seed;
            let data = match cfg.data.source {
                DataSource::Random => {
                    dataset::generate_random(&spec, cfg.data.n_trajectories as usize, seed)
                }
                DataSource::Expert => dataset::generate_expert(
                    &spec,
                    cfg.data.n_trajectories as usize,
                    cfg.data.noise_sigma,
                    seed,
                ),
                other => {
                    return Err(validation(anyhow!(
                        "gen-data cannot produce source {:?}",
                        other.as_str()
                    )))
                }
            };
            dataset::save(&data, &path)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(runtime)?;
            write_manifest(&manifest_path(&path), "gen-data", &cfg)?;
            println!("wrote {}", path.display());
            println!(
                "{:<24} {:>12}", "environment", spec.name.as_str()
            );
            println!("{:<24} {:>12}", "trajectories", data.trajectories.len());
            println!("{:<24} {:>12}", "transitions", data.n_transitions());
            println!(
                "{:<24} {:>12.3}",
                "final success rate",
                data.final_success_rate()
            );
            Ok(())
        }
        Command::Stitch {
            common,
            data,
            delta,
            m,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(data) = &data {
                cfg.data.path = Some(data.display().to_string());
            }
            let mut section = cfg.stitch.unwrap_or(StitchSection {
                delta: 1e-6,
                n_new: 500,
            });
            if let Some(delta) = delta {
                section.delta = delta;
            }
            if let Some(m) = m {
                section.n_new = m;
            }
            cfg.stitch = Some(section);
            let in_path = PathBuf::from(cfg.data.path.clone().ok_or_else(|| {
                validation(anyhow!("stitch needs --data or [data] path in the config"))
            })?);
            let out_path =
                out.ok_or_else(|| validation(anyhow!("stitch needs --out for the result")))?;
            let input = dataset::load(&in_path)
                .with_context(|| format!("reading {}", in_path.display()))
                .map_err(runtime)?;
            let tree = BallTree::build(&input, 32).map_err(runtime)?;
            let stitch_cfg = StitchConfig {
                delta: section.delta,
                n_new: section.n_new as usize,
                seed: derive_seed(cfg.run.seed, "stitch", 0),
            };
            let result = stitch(&input, &tree, &stitch_cfg).map_err(runtime)?;
            let stats = stitch_stats(&input, &result).map_err(runtime)?;
            dataset::save(&result.dataset, &out_path)
                .with_context(|| format!("writing {}", out_path.display()))
                .map_err(runtime)?;
            write_manifest(&manifest_path(&out_path), "stitch", &cfg)?;
            println!("wrote {}", out_path.display());
            println!("{:<24} {:>12}", "input trajectories", input.trajectories.len());
            println!(
                "{:<24} {:>12}",
                "output trajectories",
                result.dataset.trajectories.len()
            );
            println!("{:<24} {:>12.3}", "delta", section.delta);
            println!(
                "{:<24} {:>12.3}",
                "switches / trajectory", stats.switches_per_trajectory
            );
            println!(
                "{:<24} {:>12}",
                "new state-goal pairs", stats.new_state_goal_pairs
            );
            Ok(())
        }
        Command::Train {
            common,
            data,
            mode,
            updates,
            batch_size,
            lr,
            ratio,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(data) = &data {
                cfg.data.path = Some(data.display().to_string());
            }
            if let Some(mode) = &mode {
                cfg.train.mode = TrainMode::parse(mode)
                    .ok_or_else(|| validation(anyhow!("unknown mode {mode:?}")))?;
            }
            if let Some(updates) = updates {
                cfg.train.updates = updates;
            }
            if let Some(batch) = batch_size {
                cfg.train.batch_size = batch;
            }
            if let Some(lr) = lr {
                cfg.train.lr = lr;
            }
            if let Some(ratio) = ratio {
                cfg.hindsight_ratio = ratio;
            }
            if let Some(out) = &out {
                cfg.run.out_dir = Some(out.display().to_string());
            }
            cfg.validate_for_train().map_err(validation)?;
            let out_dir = PathBuf::from(cfg.run.out_dir.clone().ok_or_else(|| {
                validation(anyhow!("train needs --out or [run] out_dir in the config"))
            })?);
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))
                .map_err(runtime)?;
            let data_path = PathBuf::from(cfg.data.path.clone().expect("validated above"));
            let input = dataset::load(&data_path)
                .with_context(|| format!("reading {}", data_path.display()))
                .map_err(runtime)?;
            let train_cfg = TrainConfig {
                mode: cfg.train.mode,
                updates: cfg.train.updates,
                batch_size: cfg.train.batch_size as usize,
                lr: cfg.train.lr,
                hindsight_ratio: cfg.hindsight_ratio,
                eval_horizon: cfg.eval.horizon,
                log_interval: cfg.train.log_interval,
                checkpoint_interval: cfg.train.checkpoint_interval,
                stitch: cfg.stitch.map(|s| StitchParams {
                    delta: s.delta,
                    n_new: s.n_new as usize,
                }),
                model: cfg.model.clone(),
            };
            let TrainOutcome {
                policy,
                adam: _,
                log,
                train_trajectories,
            } = train(&input, &train_cfg, cfg.run.seed, Some(&out_dir)).map_err(runtime)?;
            let ckpt_path = out_dir.join("policy.mrlw");
            fs::write(&ckpt_path, policy.to_checkpoint_bytes(None))
                .with_context(|| format!("writing {}", ckpt_path.display()))
                .map_err(runtime)?;
            let mut log_csv = String::from("update,loss,wall_time_s\n");
            for row in &log {
                let _ = writeln!(log_csv, "{},{},{}", row.update, row.loss, row.wall_time_s);
            }
            fs::write(out_dir.join("train_log.csv"), log_csv).map_err(runtime)?;
            cfg.to_file(&out_dir.join("effective.cfg")).map_err(runtime)?;
            write_manifest(&out_dir.join("manifest.txt"), "train", &cfg)?;
            println!("wrote {}", ckpt_path.display());
            println!("{:<24} {:>12}", "mode", cfg.train.mode.as_str());
            println!("{:<24} {:>12}", "updates", cfg.train.updates);
            println!("{:<24} {:>12}", "train trajectories", train_trajectories);
            if let Some(last) = log.last() {
                println!("{:<24} {:>12.4}", "final loss", last.loss);
                println!("{:<24} {:>12.1}", "wall time (s)", last.wall_time_s);
            }
            Ok(())
        }
        Command::Eval {
            common,
            checkpoint,
            episodes,
            gamma,
            horizon,
            goal,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(episodes) = episodes {
                cfg.eval.episodes = episodes;
            }
            if let Some(gamma) = gamma {
                cfg.eval.gamma = gamma;
            }
            if let Some(horizon) = horizon {
                cfg.eval.horizon = horizon;
            }
            if let Some(goal) = &goal {
                cfg.eval.goal_mode = GoalModeKind::Fixed;
                cfg.eval.goal = parse_pair(goal)?;
            }
            cfg.validate_common().map_err(validation)?;
            let policy = load_policy(&cfg, &checkpoint)?;
            let spec = cfg.env.spec();
            let eval_cfg = EvalConfig {
                n_episodes: cfg.eval.episodes,
                gamma: cfg.eval.gamma,
                horizon: cfg.eval.horizon,
                goal_mode: cfg.eval.goal_mode(),
                seed: derive_seed(cfg.run.seed, "eval", 0),
            };
            let report = evaluate(&policy, &spec, &eval_cfg).map_err(runtime)?;
            print_report_table(&[(spec.name.as_str().to_string(), &report)]);
            if let Some(out) = out {
                let csv = format!("{}\n{}\n", EvalReport::CSV_HEADER, report.csv_row());
                fs::write(&out, csv)
                    .with_context(|| format!("writing {}", out.display()))
                    .map_err(runtime)?;
                write_manifest(&manifest_path(&out), "eval", &cfg)?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::SweepHorizon {
            common,
            checkpoint,
            horizons,
            episodes,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(episodes) = episodes {
                cfg.eval.episodes = episodes;
            }
            cfg.validate_common().map_err(validation)?;
            let hs: Vec<u32> = horizons
                .split(',')
                .map(|h| h.trim().parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|_| validation(anyhow!("bad horizon list {horizons:?}")))?;
            if hs.iter().any(|&h| h < 1) {
                return Err(validation(anyhow!("horizons must be at least 1")));
            }
            let policy = load_policy(&cfg, &checkpoint)?;
            let spec = cfg.env.spec();
            let base = EvalConfig {
                n_episodes: cfg.eval.episodes,
                gamma: cfg.eval.gamma,
                horizon: cfg.eval.horizon,
                goal_mode: cfg.eval.goal_mode(),
                seed: derive_seed(cfg.run.seed, "sweep-horizon", 0),
            };
            let sweep = horizon_sweep(&policy, &spec, &hs, &base).map_err(runtime)?;
            let rows: Vec<(String, &EvalReport)> = sweep
                .iter()
                .map(|(h, r)| (format!("h = {h}"), r))
                .collect();
            print_report_table(&rows);
            if let Some(out) = out {
                let mut csv = format!("{}\n", EvalReport::CSV_HEADER);
                for (_, r) in &sweep {
                    let _ = writeln!(csv, "{}", r.csv_row());
                }
                fs::write(&out, csv).map_err(runtime)?;
                write_manifest(&manifest_path(&out), "sweep-horizon", &cfg)?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::SweepOod {
            common,
            checkpoint,
            goals,
            n_per_goal,
            out,
        } => {
            let cfg = load_config(&common)?;
            cfg.validate_common().map_err(validation)?;
            let goal_list: Vec<[f64; 2]> = goals
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(parse_pair)
                .collect::<Result<_, _>>()?;
            let policy = load_policy(&cfg, &checkpoint)?;
            let spec = cfg.env.spec();
            let n = n_per_goal.unwrap_or(cfg.eval.episodes);
            let sweep = ood_goal_sweep(
                &policy,
                &spec,
                &goal_list,
                n,
                cfg.eval.gamma,
                cfg.eval.horizon,
                derive_seed(cfg.run.seed, "sweep-ood", 0),
            )
            .map_err(runtime)?;
            let rows: Vec<(String, &EvalReport)> = sweep
                .iter()
                .map(|(g, r)| (format!("goal ({}, {})", g[0], g[1]), r))
                .collect();
            print_report_table(&rows);
            if let Some(out) = out {
                let mut csv = format!("goal_x,goal_y,{}\n", EvalReport::CSV_HEADER);
                for (g, r) in &sweep {
                    let _ = writeln!(csv, "{},{},{}", g[0], g[1], r.csv_row());
                }
                fs::write(&out, csv).map_err(runtime)?;
                write_manifest(&manifest_path(&out), "sweep-ood", &cfg)?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::ExportField {
            common,
            checkpoint,
            goal,
            horizon,
            grid,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(h) = horizon {
                cfg.eval.horizon = h;
            }
            cfg.validate_common().map_err(validation)?;
            let goal = parse_pair(&goal)?;
            let (nx, ny) = grid
                .split_once('x')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| validation(anyhow!("bad grid {grid:?}, expected NXxNY")))?;
            if nx == 0 || ny == 0 {
                return Err(validation(anyhow!("grid sides must be positive")));
            }
            let policy = load_policy(&cfg, &checkpoint)?;
            let spec = cfg.env.spec();
            export_vector_field(&policy, &spec, goal, cfg.eval.horizon, nx, ny, &out)
                .map_err(runtime)?;
            write_manifest(&manifest_path(&out), "export-field", &cfg)?;
            println!("wrote {} ({}x{} grid)", out.display(), nx, ny);
            Ok(())
        }
        Command::GradCheck { common, instances } => {
            let cfg = load_config(&common)?;
            if instances == 0 {
                return Err(validation(anyhow!("instances must be positive")));
            }
            let reports = verify::run_all(instances, cfg.run.seed);
            println!("{:<24} {:>10} {:>14}", "loss", "instances", "max_rel_err");
            let mut ok = true;
            for r in &reports {
                println!("{:<24} {:>10} {:>14.3e}", r.name, r.instances, r.max_rel_err);
                ok &= r.max_rel_err < 1e-4;
            }
            let control = verify::negative_control(cfg.run.seed);
            println!("{:<24} {:>10} {:>14.3e}", "corrupted (control)", 1, control);
            if !ok {
                return Err(runtime(anyhow!("gradient check failed (tolerance 1e-4)")));
            }
            if control <= 1e-4 {
                return Err(runtime(anyhow!(
                    "negative control was not flagged; checker is insensitive"
                )));
            }
            println!("all gradients verified (tolerance 1e-4)");
            Ok(())
        }
    }
}

fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.txt");
    artifact.with_file_name(name)
}
