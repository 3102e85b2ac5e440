//! `rotorfall`: train, evaluate and plot single-rotor-failure recovery
//! policies.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rotorfall::checkpoint::Checkpoint;
use rotorfall::config::{Config, ConfigError};
use rotorfall::harness::{self, EvalOptions, EvalReport, Maneuver, PolicyController};
use rotorfall::logs::{read_trajectory, write_trajectory};
use rotorfall::plot::{self, PlotKind};

const SEED_ENV: &str = "ROTORFALL_SEED";

#[derive(Parser)]
#[command(name = "rotorfall", version, about = "Soft Actor-Critic recovery control for a quadrotor with one failed rotor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy into a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one maneuver.
    Eval(EvalArgs),
    /// Evaluate a checkpoint on all five maneuvers.
    Suite(SuiteArgs),
    /// Render a trajectory log as SVG.
    Plot(PlotArgs),
    /// Print the effective configuration (defaults merged with a file).
    Config(ConfigArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Total environment steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Run seed; falls back to the config file, then ROTORFALL_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// One-based failed rotor, 0 for a healthy vehicle.
    #[arg(long)]
    failed_rotor: Option<usize>,
    /// Continue from this checkpoint (replay buffer starts empty).
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Use the full 15M-step schedule unless --steps is given.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// One of hover, land, circle-xy, circle-yz, saddle.
    #[arg(long)]
    maneuver: String,
    /// Wind speed, m/s; direction drawn from the seed.
    #[arg(long, default_value_t = 0.0)]
    wind: f64,
    /// Episode length, s (default from config, 40).
    #[arg(long)]
    duration: Option<f64>,
    /// Wind-direction seed; falls back to ROTORFALL_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    failed_rotor: Option<usize>,
    /// Replaces the configuration stored in the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `eval-<maneuver>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    wind: f64,
    /// Base seed; maneuver i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    failed_rotor: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "suite")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory CSV.
    #[arg(long)]
    log: PathBuf,
    /// One of coords, pwm, traj3d.
    #[arg(long)]
    kind: String,
    /// Output SVG (default: next to the log, `<stem>.<kind>.svg`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{context}: {e}"))
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::from_file(p).map_err(|e| match e {
            ConfigError::Io(io) => Failure::Config(format!("cannot read config {}: {io}", p.display())),
            other => other.into(),
        }),
        None => Ok(Config::default()),
    }
}

fn echo(out: &Path, cfg: &Config) -> Result<(), Failure> {
    let args: Vec<String> = std::env::args().collect();
    let text = format!("# {}\n{}", args.join(" "), cfg.to_toml_string());
    fs::write(out.join("config.echo"), text).map_err(runtime("writing config.echo"))
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load_config(a.config.as_deref())?;
    if a.paper_scale {
        cfg.train.total_steps = 15_000_000;
    }
    if let Some(s) = a.steps {
        cfg.train.total_steps = s;
    }
    if let Some(r) = a.failed_rotor {
        cfg.episode.failed_rotor = r;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = Some(s);
    }
    cfg.resolve_seed(env_seed()?);
    cfg.validate()?;
    fs::create_dir_all(&a.out).map_err(runtime("creating output directory"))?;
    let outcome = harness::train(&cfg, &a.out, a.resume.as_deref()).map_err(runtime("training"))?;
    // the harness writes the effective config; prefix the command line
    let effective = Config::from_file(&a.out.join("config.echo")).map_err(|e| Failure::Runtime(e.to_string()))?;
    echo(&a.out, &effective)?;
    println!(
        "trained {} steps ({} episodes, {} updates) in {:.1} s; best eval return {}",
        outcome.steps,
        outcome.episodes,
        outcome.updates,
        outcome.wall.as_secs_f64(),
        outcome.best_return.map_or("n/a".into(), |r| format!("{r:.2}"))
    );
    Ok(())
}

/// Checkpoint plus the configuration an evaluation runs under.
fn eval_setup(ckpt: &Path, config: Option<&Path>, failed_rotor: Option<usize>) -> Result<(Checkpoint, Config), Failure> {
    let replacement = match config {
        Some(p) => Some(load_config(Some(p))?),
        None => None,
    };
    let ck = Checkpoint::load(ckpt).map_err(|e| Failure::Runtime(format!("loading {}: {e}", ckpt.display())))?;
    let mut cfg = replacement.unwrap_or_else(|| ck.config.clone());
    if let Some(r) = failed_rotor {
        cfg.episode.failed_rotor = r;
    }
    cfg.validate()?;
    Ok((ck, cfg))
}

fn write_reports(out: &Path, stem: &str, reports: &[EvalReport]) -> Result<(), Failure> {
    let f = File::create(out.join(format!("{stem}.csv"))).map_err(runtime("writing report"))?;
    harness::write_summary_csv(BufWriter::new(f), reports).map_err(runtime("writing report"))?;
    let mut text = Vec::new();
    harness::write_summary_text(&mut text, reports).map_err(runtime("writing report"))?;
    fs::write(out.join(format!("{stem}.txt")), &text).map_err(runtime("writing report"))?;
    std::io::stdout().write_all(&text).map_err(runtime("stdout"))?;
    Ok(())
}

fn write_log(path: &Path, rows: &[rotorfall::logs::TrajectoryRow]) -> Result<(), Failure> {
    let f = File::create(path).map_err(runtime("writing trajectory"))?;
    write_trajectory(BufWriter::new(f), rows).map_err(runtime("writing trajectory"))?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let maneuver: Maneuver = a.maneuver.parse().map_err(|e: harness::UnknownManeuver| Failure::Config(e.to_string()))?;
    if !(a.wind >= 0.0 && a.wind.is_finite()) {
        return Err(Failure::Config(format!("--wind must be a non-negative number, got {}", a.wind)));
    }
    if let Some(d) = a.duration {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Failure::Config(format!("--duration must be positive, got {d}")));
        }
    }
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let (ck, cfg) = eval_setup(&a.ckpt, a.config.as_deref(), a.failed_rotor)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("eval-{maneuver}")));
    fs::create_dir_all(&out).map_err(runtime("creating output directory"))?;
    echo(&out, &cfg)?;
    let mut ctl = PolicyController::new(&ck.agent).map_err(runtime("policy"))?;
    let opts = EvalOptions {
        maneuver,
        wind_speed: a.wind,
        duration: a.duration,
        seed,
    };
    let (report, rows) = harness::evaluate(&mut ctl, &cfg, &opts).map_err(runtime("evaluation"))?;
    write_log(&out.join("trajectory.csv"), &rows)?;
    write_reports(&out, "report", &[report])
}

fn cmd_suite(a: SuiteArgs) -> Result<(), Failure> {
    if !(a.wind >= 0.0 && a.wind.is_finite()) {
        return Err(Failure::Config(format!("--wind must be a non-negative number, got {}", a.wind)));
    }
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let (ck, cfg) = eval_setup(&a.ckpt, a.config.as_deref(), a.failed_rotor)?;
    fs::create_dir_all(&a.out).map_err(runtime("creating output directory"))?;
    echo(&a.out, &cfg)?;
    let mut ctl = PolicyController::new(&ck.agent).map_err(runtime("policy"))?;
    let results = harness::maneuver_suite(&mut ctl, &cfg, a.wind, seed);
    for (report, rows) in &results {
        if !rows.is_empty() {
            write_log(&a.out.join(format!("{}.csv", report.maneuver)), rows)?;
        }
    }
    let reports: Vec<EvalReport> = results.into_iter().map(|(r, _)| r).collect();
    write_reports(&a.out, "summary", &reports)
}

fn cmd_plot(a: PlotArgs) -> Result<(), Failure> {
    let kind: PlotKind = a.kind.parse().map_err(Failure::Config)?;
    let f = File::open(&a.log).map_err(|e| Failure::Runtime(format!("opening {}: {e}", a.log.display())))?;
    let rows = read_trajectory(std::io::BufReader::new(f)).map_err(|e| Failure::Runtime(format!("{}: {e}", a.log.display())))?;
    let out = a.out.unwrap_or_else(|| {
        let stem = a.log.file_stem().map_or("log".into(), |s| s.to_string_lossy().into_owned());
        a.log.with_file_name(format!("{stem}.{}.svg", kind.name()))
    });
    fs::write(&out, plot::render(&rows, kind)).map_err(runtime("writing svg"))?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_config(a: ConfigArgs) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    print!("{}", cfg.to_toml_string());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Config(a) => cmd_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
