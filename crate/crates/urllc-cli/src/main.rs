//! `urllc` - experiment harness for the factory URLLC simulator.
//!
//! Subcommands: `train`, `eval`, `baseline`, `sweep`, `selfcheck`. Any
//! argument of the form `--section.key=value` is a dotted-path config
//! override (for example `--rl.episodes=10`); `--set section.key=value`
//! works identically.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure,
//! 3 selfcheck failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use urllc_sim::baselines::{
    CentralizedExhaustive, GreedyMulti, GreedySingle, MarlPolicy, Policy, PolicyKind,
    RandomNearest,
};
use urllc_sim::checkpoint::Checkpoint;
use urllc_sim::config::{ConfigError, ExperimentConfig, RunManifest};
use urllc_sim::marl::{self, Connectivity};
use urllc_sim::metrics::{EpisodeMetrics, ResultsRow, TraceRow, TrainEpisodeRow};
use urllc_sim::selfcheck;

#[derive(Parser)]
#[command(name = "urllc", version, about = "Factory URLLC resource-allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the multi-agent allocator and write per-agent checkpoints.
    Train(TrainArgs),
    /// Evaluate trained checkpoints over a payload sweep.
    Eval(EvalArgs),
    /// Run one of the benchmark policies over a payload sweep.
    Baseline(BaselineArgs),
    /// Evaluate a policy across cluster counts and payloads.
    Sweep(SweepArgs),
    /// Run the fast oracle suite and exit nonzero on any failure.
    Selfcheck,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML); defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Config override, path.to.key=value (repeatable).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Output directory (defaults to a hash-stamped directory under runs/).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Continue training from the checkpoints already in the output dir.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding agent_<n>.qnet checkpoints.
    #[arg(long)]
    checkpoint_dir: PathBuf,
    /// Payload sizes in bytes (default: the config payload sweep).
    #[arg(long, value_delimiter = ',')]
    payloads: Vec<f64>,
    /// Episodes per payload (default: config rl.eval_episodes).
    #[arg(long)]
    episodes: Option<usize>,
    /// Also write a per-slot trace CSV for each payload.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// random | central | greedy1 | greedy2 | marl1 | marl2
    #[arg(long)]
    policy: String,
    /// Checkpoint directory (required for marl1/marl2).
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    payloads: Vec<f64>,
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    policy: String,
    /// Cluster counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 6, 8])]
    clusters: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    payloads: Vec<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Root directory holding per-N checkpoint dirs named n<N> (marl only).
    #[arg(long)]
    checkpoint_root: Option<PathBuf>,
}

/// Errors carry the process exit code.
enum AppError {
    Config(String),
    Runtime(String),
    SelfcheckFailed,
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 1,
            AppError::Runtime(_) => 2,
            AppError::SelfcheckFailed => 3,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<marl::MarlError> for AppError {
    fn from(e: marl::MarlError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    // Pull dotted-path overrides (--rl.episodes=10) out before clap sees
    // them; clap handles everything else.
    let mut overrides = Vec::new();
    let args: Vec<String> = std::env::args()
        .filter(|arg| match as_dotted_override(arg) {
            Some(entry) => {
                overrides.push(entry);
                false
            }
            None => true,
        })
        .collect();

    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    let result = match cli.command {
        Command::Train(args) => cmd_train(args, overrides),
        Command::Eval(args) => cmd_eval(args, overrides),
        Command::Baseline(args) => cmd_baseline(args, overrides),
        Command::Sweep(args) => cmd_sweep(args, overrides),
        Command::Selfcheck => cmd_selfcheck(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                AppError::Config(msg) => eprintln!("config error: {msg}"),
                AppError::Runtime(msg) => eprintln!("error: {msg}"),
                AppError::SelfcheckFailed => {}
            }
            ExitCode::from(e.code())
        }
    }
}

/// `--section.key=value` (at least one dot in the flag name) is an override.
fn as_dotted_override(arg: &str) -> Option<String> {
    let body = arg.strip_prefix("--")?;
    let (path, value) = body.split_once('=')?;
    if !path.contains('.') {
        return None;
    }
    if !path.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
        return None;
    }
    Some(format!("{path}={value}"))
}

fn load_config(common: &CommonArgs, mut overrides: Vec<String>) -> Result<ExperimentConfig, AppError> {
    overrides.extend(common.set.iter().cloned());
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    Ok(ExperimentConfig::parse_with_overrides(&text, &overrides)?)
}

fn prepare_out_dir(
    config: &ExperimentConfig,
    requested: &Option<PathBuf>,
    kind: &str,
) -> Result<PathBuf, AppError> {
    let dir = requested.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| {
        PathBuf::from(format!("runs/{kind}-{}-s{}", &config.hash_hex()[..8], config.seed))
    });
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.resolved.toml"), config.resolved_toml())?;
    Ok(dir)
}

fn finish_manifest(
    mut manifest: RunManifest,
    dir: &Path,
    artifacts: Vec<String>,
) -> Result<(), AppError> {
    manifest.artifacts = artifacts;
    manifest.finish();
    manifest.write(&dir.join("run_manifest.json"))?;
    Ok(())
}

fn cmd_train(args: TrainArgs, overrides: Vec<String>) -> Result<(), AppError> {
    let config = load_config(&args.common, overrides)?;
    let out = prepare_out_dir(&config, &args.common.out, "train")?;
    let manifest = RunManifest::new(&config, "train");

    let resume = if args.resume {
        Some(load_checkpoints(&out, config.topology.num_clusters)?)
    } else {
        None
    };

    let spec = config.train_spec();
    let env_params = config.env_params(spec.train_payload_bytes);
    let metrics_path = out.join("training_metrics.csv");
    let mut csv = BufWriter::new(File::create(&metrics_path)?);
    writeln!(csv, "{}", TrainEpisodeRow::HEADER)?;

    let started = std::time::Instant::now();
    let mut recent_rewards = std::collections::VecDeque::with_capacity(100);
    let mut io_err: Option<std::io::Error> = None;
    let result = marl::train(&env_params, &spec, config.seed, resume, |row| {
        if recent_rewards.len() == 100 {
            recent_rewards.pop_front();
        }
        recent_rewards.push_back(row.sum_reward);
        if io_err.is_none() {
            if let Err(e) = writeln!(csv, "{}", row.to_csv()) {
                io_err = Some(e);
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    csv.flush()?;

    let mut artifacts = vec![metrics_path.display().to_string()];
    for (n, ckpt) in result.checkpoints.iter().enumerate() {
        let path = out.join(format!("agent_{n}.qnet"));
        ckpt.save(&path).map_err(|e| AppError::Runtime(e.to_string()))?;
        artifacts.push(path.display().to_string());
    }
    finish_manifest(manifest, &out, artifacts)?;

    let mean_recent: f64 =
        recent_rewards.iter().sum::<f64>() / recent_rewards.len().max(1) as f64;
    println!(
        "trained {} episodes ({} agents) in {:.1}s; mean reward over last {} episodes: {:.2}; checkpoints in {}",
        result.checkpoints[0].train_episodes,
        result.checkpoints.len(),
        started.elapsed().as_secs_f64(),
        recent_rewards.len(),
        mean_recent,
        out.display()
    );
    Ok(())
}

fn load_checkpoints(dir: &Path, count: usize) -> Result<Vec<Checkpoint>, AppError> {
    (0..count)
        .map(|n| {
            let path = dir.join(format!("agent_{n}.qnet"));
            Checkpoint::load(&path)
                .map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn marl_policy_from_dir(
    config: &ExperimentConfig,
    kind: PolicyKind,
    dir: &Path,
) -> Result<MarlPolicy, AppError> {
    let checkpoints = load_checkpoints(dir, config.topology.num_clusters)?;
    MarlPolicy::from_checkpoints(
        &checkpoints,
        kind,
        config.topology.num_clusters,
        config.topology.ap_positions.len(),
        config.num_subbands(),
        &config.power_levels_dbm,
    )
    .map_err(|e| AppError::Runtime(e.to_string()))
}

fn build_policy(
    config: &ExperimentConfig,
    kind: PolicyKind,
    checkpoint_dir: Option<&Path>,
) -> Result<Box<dyn Policy>, AppError> {
    let max_power =
        config.power_levels_dbm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(match kind {
        PolicyKind::RandomNearest => {
            Box::new(RandomNearest::new(config.power_levels_dbm.clone()))
        }
        PolicyKind::CentralizedExhaustive => {
            Box::new(CentralizedExhaustive::new(config.power_levels_dbm.clone()))
        }
        PolicyKind::GreedySingle => Box::new(GreedySingle::new(max_power)),
        PolicyKind::GreedyMulti => Box::new(GreedyMulti::new(max_power)),
        PolicyKind::MarlSingle | PolicyKind::MarlMulti => {
            let dir = checkpoint_dir.ok_or_else(|| {
                AppError::Config(format!(
                    "policy {} requires --checkpoint-dir",
                    kind.cli_name()
                ))
            })?;
            Box::new(marl_policy_from_dir(config, kind, dir)?)
        }
    })
}

/// Shared by eval/baseline/sweep: run the payload sweep and append rows.
#[allow(clippy::too_many_arguments)]
fn run_payload_sweep(
    config: &ExperimentConfig,
    policy: &mut dyn Policy,
    payloads: &[f64],
    episodes: Option<usize>,
    out: &Path,
    results: &mut Vec<ResultsRow>,
    episode_csv: &mut BufWriter<File>,
    trace: bool,
) -> Result<(), AppError> {
    for &payload in payloads {
        let mut spec = config.eval_spec(payload);
        if let Some(n) = episodes {
            spec.episodes = n;
        }
        let env_params = config.env_params(payload);

        let mut trace_file = if trace {
            let path = out.join(format!("trace_b{payload}.csv"));
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{}", TraceRow::HEADER)?;
            Some(w)
        } else {
            None
        };
        let mut trace_err: Option<std::io::Error> = None;
        let mut episode_err: Option<std::io::Error> = None;
        let mut episode_rows: Vec<EpisodeMetrics> = Vec::new();
        let summary = {
            let mut tracer = |row: &TraceRow| {
                if let (Some(w), None) = (trace_file.as_mut(), trace_err.as_ref()) {
                    if let Err(e) = writeln!(w, "{}", row.to_csv()) {
                        trace_err = Some(e);
                    }
                }
            };
            marl::evaluate(
                &env_params,
                policy,
                &spec,
                config.seed,
                |m| episode_rows.push(m.clone()),
                if trace { Some(&mut tracer) } else { None },
            )?
        };
        if let Some(e) = trace_err {
            return Err(e.into());
        }
        for row in &episode_rows {
            if episode_err.is_none() {
                if let Err(e) = writeln!(episode_csv, "{}", row.to_csv()) {
                    episode_err = Some(e);
                }
            }
        }
        if let Some(e) = episode_err {
            return Err(e.into());
        }
        if let Some(mut w) = trace_file {
            w.flush()?;
        }

        results.push(ResultsRow {
            payload_bytes: payload,
            n_clusters: config.topology.num_clusters,
            policy_name: policy.name().to_string(),
            delivery_probability: summary.delivery_probability,
            n_episodes: summary.episodes,
            seed: config.seed,
        });
        println!(
            "payload {payload:>5} B | N={} | {} | delivery probability {:.4} over {} episodes",
            config.topology.num_clusters,
            policy.name(),
            summary.delivery_probability,
            summary.episodes
        );
    }
    Ok(())
}

fn write_results(out: &Path, results: &[ResultsRow]) -> Result<PathBuf, AppError> {
    let path = out.join("results.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "{}", ResultsRow::HEADER)?;
    for row in results {
        writeln!(w, "{}", row.to_csv())?;
    }
    w.flush()?;
    Ok(path)
}

fn open_episode_csv(out: &Path) -> Result<BufWriter<File>, AppError> {
    let mut w = BufWriter::new(File::create(out.join("eval_episodes.csv"))?);
    writeln!(w, "{}", EpisodeMetrics::HEADER)?;
    Ok(w)
}

fn cmd_eval(args: EvalArgs, overrides: Vec<String>) -> Result<(), AppError> {
    let config = load_config(&args.common, overrides)?;
    let out = prepare_out_dir(&config, &args.common.out, "eval")?;
    let manifest = RunManifest::new(&config, "eval");

    // The checkpoint's connectivity decides whether this is marl1 or marl2.
    let probe = Checkpoint::load(&args.checkpoint_dir.join("agent_0.qnet"))
        .map_err(|e| AppError::Runtime(format!("{}: {e}", args.checkpoint_dir.display())))?;
    let kind = match probe.action_space.connectivity {
        Connectivity::Single => PolicyKind::MarlSingle,
        Connectivity::Dual => PolicyKind::MarlMulti,
    };
    let mut policy = marl_policy_from_dir(&config, kind, &args.checkpoint_dir)?;

    let payloads =
        if args.payloads.is_empty() { config.payload.bytes.values() } else { args.payloads.clone() };
    let mut results = Vec::new();
    let mut episode_csv = open_episode_csv(&out)?;
    run_payload_sweep(
        &config,
        &mut policy,
        &payloads,
        args.episodes,
        &out,
        &mut results,
        &mut episode_csv,
        args.trace,
    )?;
    episode_csv.flush()?;
    let results_path = write_results(&out, &results)?;
    finish_manifest(manifest, &out, vec![results_path.display().to_string()])?;
    println!("results written to {}", results_path.display());
    Ok(())
}

fn parse_policy(name: &str) -> Result<PolicyKind, AppError> {
    name.parse::<PolicyKind>().map_err(AppError::Config)
}

fn cmd_baseline(args: BaselineArgs, overrides: Vec<String>) -> Result<(), AppError> {
    let config = load_config(&args.common, overrides)?;
    let kind = parse_policy(&args.policy)?;
    if kind.needs_checkpoints() && args.checkpoint_dir.is_none() {
        return Err(AppError::Config(format!(
            "policy {} requires --checkpoint-dir",
            kind.cli_name()
        )));
    }
    let out = prepare_out_dir(&config, &args.common.out, "baseline")?;
    let manifest = RunManifest::new(&config, "baseline");
    let mut policy = build_policy(&config, kind, args.checkpoint_dir.as_deref())?;

    let payloads =
        if args.payloads.is_empty() { config.payload.bytes.values() } else { args.payloads.clone() };
    let mut results = Vec::new();
    let mut episode_csv = open_episode_csv(&out)?;
    run_payload_sweep(
        &config,
        policy.as_mut(),
        &payloads,
        args.episodes,
        &out,
        &mut results,
        &mut episode_csv,
        false,
    )?;
    episode_csv.flush()?;
    let results_path = write_results(&out, &results)?;
    finish_manifest(manifest, &out, vec![results_path.display().to_string()])?;
    println!("results written to {}", results_path.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs, overrides: Vec<String>) -> Result<(), AppError> {
    let kind = parse_policy(&args.policy)?;
    if kind.needs_checkpoints() && args.checkpoint_root.is_none() {
        return Err(AppError::Config(format!(
            "policy {} requires --checkpoint-root with per-N subdirectories (n4/, n6/, ...)",
            kind.cli_name()
        )));
    }
    let base_config = load_config(&args.common, overrides.clone())?;
    let out = prepare_out_dir(&base_config, &args.common.out, "sweep")?;
    let manifest = RunManifest::new(&base_config, "sweep");

    let mut results = Vec::new();
    let mut episode_csv = open_episode_csv(&out)?;
    for &n in &args.clusters {
        let mut n_overrides = overrides.clone();
        n_overrides.push(format!("topology.num_clusters={n}"));
        let config = load_config(&args.common, n_overrides)?;
        let checkpoint_dir = args.checkpoint_root.as_ref().map(|root| root.join(format!("n{n}")));
        let mut policy = build_policy(&config, kind, checkpoint_dir.as_deref())?;
        let payloads = if args.payloads.is_empty() {
            config.payload.bytes.values()
        } else {
            args.payloads.clone()
        };
        run_payload_sweep(
            &config,
            policy.as_mut(),
            &payloads,
            args.episodes,
            &out,
            &mut results,
            &mut episode_csv,
            false,
        )?;
    }
    episode_csv.flush()?;
    let results_path = write_results(&out, &results)?;
    finish_manifest(manifest, &out, vec![results_path.display().to_string()])?;
    println!("results written to {}", results_path.display());
    Ok(())
}

fn cmd_selfcheck() -> Result<(), AppError> {
    let started = std::time::Instant::now();
    let reports = selfcheck::run_all(0xA11CE);
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut all_passed = true;
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:width$}  {}", r.name, r.detail);
        all_passed &= r.passed;
    }
    println!(
        "{}/{} checks passed in {:.2}s",
        reports.iter().filter(|r| r.passed).count(),
        reports.len(),
        started.elapsed().as_secs_f64()
    );
    if all_passed {
        Ok(())
    } else {
        Err(AppError::SelfcheckFailed)
    }
}
