use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use levisim::acoustic_field::{force_profile, write_force_profile_csv};
use levisim::config::{load_json, ArrayConfig};
use levisim::experiments::{analyze_logs, write_model_csv, write_trials_csv};
use levisim::particle_dynamics::{
    simulate_trajectory, write_trajectory_csv, ParticleState, TrapSchedule,
};
use levisim::sim_server::{RunOptions, Server, ServerConfig};
use levisim::Vec3;

#[derive(Parser)]
#[command(
    name = "levisim",
    version,
    about = "Ultrasonic levitation interface simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the 90 Hz interaction server, or replay a recorded session.
    Serve(ServeArgs),
    /// Offline analysis of recorded sessions.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Force sweep through the calibrated trap along x, y and z.
    FieldProfile(FieldProfileArgs),
    /// Step response of the bead in the configured trap model.
    Trajectory(TrajectoryArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Server JSON config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the session CSV here.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Stream this session CSV instead of simulating.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Replay speed multiplier.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// No WebSocket bridge; UDP only.
    #[arg(long)]
    headless: bool,
    /// Stop after this many ticks.
    #[arg(long)]
    ticks: Option<u64>,
    /// Write the game session summary JSON here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Analyze {
    /// Fit movement time against index of difficulty.
    Fitts(FittsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupBy {
    Id,
}

#[derive(Args)]
struct FittsArgs {
    /// Session CSVs, each with a `.task.json` condition file beside it.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "id")]
    group_by: GroupBy,
    /// Per-trial results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Model CSV; defaults to `<out stem>.model.csv`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct FieldProfileArgs {
    /// Array JSON config; defaults to the prototype arrays.
    #[arg(long)]
    array: Option<PathBuf>,
    /// Sweep extent either side of the trap centre, m.
    #[arg(long, default_value_t = 0.015)]
    half_range: f64,
    /// Sweep step, m.
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrajectoryArgs {
    /// Server JSON config supplying the trap model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Release point "x,y,z" in m; defaults to 5 mm left of the trap.
    #[arg(long, value_parser = parse_vec3)]
    from: Option<Vec3>,
    /// Trap position "x,y,z" in m; defaults to the volume centre.
    #[arg(long, value_parser = parse_vec3)]
    to: Option<Vec3>,
    /// s
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Output samples per second.
    #[arg(long, default_value_t = 1000.0)]
    rate: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(format!(
            "expected three finite numbers \"x,y,z\", got {s:?}"
        )),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve(args) => serve(args),
        Command::Analyze(Analyze::Fitts(args)) => fitts(args),
        Command::FieldProfile(args) => field_profile(args),
        Command::Trajectory(args) => trajectory(args),
    }
}

fn server_config(path: Option<&Path>) -> Result<ServerConfig> {
    match path {
        Some(p) => ServerConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ServerConfig::default()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = server_config(args.config.as_deref())?;
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        ctrlc::set_handler(move || stop.store(true, Ordering::Release))
            .context("installing Ctrl-C handler")?;
    }
    let server = Server::bind(config, args.headless)?;
    log::info!("UDP on {}", server.udp_addr());
    if let Some(addr) = server.ws_addr() {
        log::info!("WebSocket on ws://{addr}");
    }
    if let Some(log_path) = args.replay {
        if !(args.speed.is_finite() && args.speed > 0.0) {
            bail!("--speed must be positive, got {}", args.speed);
        }
        let report = server.replay(&log_path, args.speed, &stop)?;
        log::info!(
            "replayed {} frames in {:.3} s",
            report.frames,
            report.wall.as_secs_f64()
        );
        return Ok(());
    }
    let options = RunOptions {
        paced: true,
        max_ticks: args.ticks,
        record: args.record,
        summary: args.summary,
        ..RunOptions::default()
    };
    let report = server.run(options, &stop)?;
    print_json(&report)
}

fn fitts(args: FittsArgs) -> Result<()> {
    let GroupBy::Id = args.group_by;
    let analysis = analyze_logs(&args.logs)?;
    write_trials_csv(&args.out, &analysis.trials)?;
    let model_path = args.model.unwrap_or_else(|| {
        let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
        args.out.with_file_name(format!("{stem}.model.csv"))
    });
    write_model_csv(&model_path, &analysis.model)?;
    log::info!("wrote {} and {}", args.out.display(), model_path.display());
    print_json(&json!({
        "groups": analysis.groups.iter().map(|g| json!({"id_bits": g.id_bits, "mean_mt_s": g.mean_mt_s})).collect::<Vec<_>>(),
        "a_s": analysis.model.a_s,
        "b_s_per_bit": analysis.model.b_s_per_bit,
        "r2": analysis.model.r2,
        "tp_bits_per_s": analysis.model.tp_bits_per_s,
    }))
}

fn field_profile(args: FieldProfileArgs) -> Result<()> {
    let array: ArrayConfig = match &args.array {
        Some(p) => load_json(p).with_context(|| format!("loading {}", p.display()))?,
        None => ArrayConfig::default(),
    };
    if !(args.step > 0.0 && args.half_range > 0.0) {
        bail!("--step and --half-range must be positive");
    }
    let trap = array.build()?;
    let c = &trap.characterization;
    let rows = force_profile(&trap.field, &c.center, args.half_range, args.step)?;
    let out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    write_force_profile_csv(&rows, out)?;
    log::info!("wrote {} samples to {}", rows.len(), args.out.display());
    print_json(&json!({
        "amplitude": trap.amplitude(),
        "center_m": c.center,
        "diameters_m": c.diameters(),
        "max_forces_n": c.max_forces(),
        "stiffness_n_per_m": c.stiffness(),
    }))
}

fn trajectory(args: TrajectoryArgs) -> Result<()> {
    let config = server_config(args.config.as_deref())?;
    let model = config.model.build(&config.array, &config.volume)?;
    let to = args.to.unwrap_or_else(|| config.volume.center());
    let from = args.from.unwrap_or(to - Vec3::new(0.005, 0.0, 0.0));
    let samples = simulate_trajectory(
        &ParticleState::at_rest(from),
        &TrapSchedule::constant(to),
        &model,
        &config.integrator,
        args.duration,
        args.rate,
    )?;
    let mut out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    write_trajectory_csv(&samples, &mut out)?;
    out.flush()?;
    log::info!("wrote {} samples to {}", samples.len(), args.out.display());
    Ok(())
}
