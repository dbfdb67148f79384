//! Command-line front end: generate workloads, run scenarios, compare
//! reports. Logging verbosity is controlled via the `MALLEON_LOG`
//! environment variable (e.g. `MALLEON_LOG=debug`).

use clap::{Parser, Subcommand};
use malleon::engine::{run, EndCondition, SimConfig, SimError};
use malleon::metrics::{compute, MetricsReport};
use malleon::strategy::STRATEGY_IDS;
use malleon::time::SimTime;
use malleon::workload::{esp_workload, power_workload, PowerWorkloadParams, Workload};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_SCHEMA: u8 = 2;
const EXIT_UNSCHEDULABLE: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "malleon", version, about = "Malleable-job batch scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a workload file (JSON on stdout or --out).
    Gen {
        /// Workload family: "esp" or "power".
        family: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cluster size (esp only).
        #[arg(long, default_value_t = 32)]
        nodes: u32,
        /// Fraction of jobs made malleable (esp only).
        #[arg(long, default_value_t = 1.0)]
        malleable: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file and write trace and reports.
    Run {
        scenario: PathBuf,
        /// Override the scenario's strategy; "all" runs every strategy.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        malleable: Option<f64>,
        #[arg(long)]
        nodes: Option<u32>,
        /// Scheduler tick in seconds.
        #[arg(long)]
        tick: Option<f64>,
        /// Output directory (default: scenario file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare metric reports produced from the same workload.
    Compare {
        reports: Vec<PathBuf>,
    },
}

/// Scenario file schema. Unknown keys are rejected so typos fail loudly.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    /// "esp", "power", or a path to a workload JSON file.
    workload: String,
    strategy: String,
    #[serde(default = "default_seed")]
    seed: u64,
    /// Cluster size for generated esp workloads.
    #[serde(default = "default_nodes")]
    system_nodes: u32,
    #[serde(default = "default_malleable")]
    malleable_fraction: f64,
    #[serde(default = "default_tick")]
    scheduler_tick_s: f64,
    /// Corridor phase activation times (power workload only).
    corridor_times_s: Option<[f64; 3]>,
    /// Synthetic job length in seconds (power workload only).
    exec_time_s: Option<f64>,
    /// Optional wall-clock cap on simulated time.
    time_limit_s: Option<f64>,
}

fn default_seed() -> u64 {
    1
}
fn default_nodes() -> u32 {
    32
}
fn default_malleable() -> f64 {
    1.0
}
fn default_tick() -> f64 {
    30.0
}

fn build_workload(sc: &Scenario, dir: &Path) -> Result<Workload, String> {
    match sc.workload.as_str() {
        "esp" => esp_workload(sc.system_nodes, sc.malleable_fraction, sc.seed)
            .map_err(|e| e.to_string()),
        "power" => {
            let mut params = PowerWorkloadParams::default();
            if let Some(times) = sc.corridor_times_s {
                params.corridor_times = times.map(SimTime::from_secs_f64);
            }
            if let Some(t) = sc.exec_time_s {
                params.static_exec_time = SimTime::from_secs_f64(t);
            }
            Ok(power_workload(sc.seed, &params))
        }
        path => {
            let full = dir.join(path);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| format!("{}: {e}", full.display()))?;
            Workload::from_json(&text).map_err(|e| e.to_string())
        }
    }
}

fn run_one(
    sc: &Scenario,
    strategy: &str,
    workload: &Workload,
    out_dir: &Path,
) -> Result<(), ExitCode> {
    let mut config = SimConfig::new(strategy, workload.system_nodes);
    config.scheduler_tick = SimTime::from_secs_f64(sc.scheduler_tick_s);
    config.rng_seed = sc.seed;
    if let Some(limit) = sc.time_limit_s {
        config.end_condition = EndCondition::TimeLimit(SimTime::from_secs_f64(limit));
    }
    let trace = match run(&config, workload) {
        Ok(t) => t,
        Err(e @ SimError::Unschedulable { .. }) => {
            eprintln!("error: {e}");
            return Err(ExitCode::from(EXIT_UNSCHEDULABLE));
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Err(ExitCode::FAILURE);
        }
    };
    let report = match compute(&trace) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(ExitCode::FAILURE);
        }
    };
    let prefix = out_dir.join(strategy);
    let write = |suffix: &str, content: String| -> Result<(), ExitCode> {
        let path = prefix.with_extension(suffix);
        std::fs::write(&path, content).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::FAILURE
        })
    };
    write("trace.jsonl", trace.to_jsonl())?;
    write("report.json", report.to_json())?;
    write("report.txt", report.to_text())?;
    write("power.csv", report.power_csv())?;
    print!("== {strategy} ==\n{}", report.to_text());
    Ok(())
}

fn cmd_gen(
    family: &str,
    seed: u64,
    nodes: u32,
    malleable: f64,
    out: Option<PathBuf>,
) -> ExitCode {
    let workload = match family {
        "esp" => match esp_workload(nodes, malleable, seed) {
            Ok(w) => w,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_SCHEMA);
            }
        },
        "power" => power_workload(seed, &PowerWorkloadParams::default()),
        other => {
            eprintln!("error: unknown workload family {other:?} (expected esp or power)");
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let json = workload.to_json();
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, json) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
            eprintln!("wrote {} ({} jobs)", path.display(), workload.jobs.len());
        }
        None => println!("{json}"),
    }
    ExitCode::SUCCESS
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: &Path,
    strategy: Option<String>,
    seed: Option<u64>,
    malleable: Option<f64>,
    nodes: Option<u32>,
    tick: Option<f64>,
    out: Option<PathBuf>,
) -> ExitCode {
    let text = match std::fs::read_to_string(scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", scenario.display());
            return ExitCode::FAILURE;
        }
    };
    let mut sc: Scenario = match toml::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", scenario.display());
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(m) = malleable {
        sc.malleable_fraction = m;
    }
    if let Some(n) = nodes {
        sc.system_nodes = n;
    }
    if let Some(t) = tick {
        sc.scheduler_tick_s = t;
    }
    if let Some(s) = strategy {
        sc.strategy = s;
    }
    let strategies: Vec<&str> = if sc.strategy == "all" {
        STRATEGY_IDS.to_vec()
    } else if STRATEGY_IDS.contains(&sc.strategy.as_str()) {
        vec![sc.strategy.as_str()]
    } else {
        eprintln!(
            "error: unknown strategy {:?} (known: {})",
            sc.strategy,
            STRATEGY_IDS.join(", ")
        );
        return ExitCode::from(EXIT_SCHEMA);
    };

    let dir = scenario.parent().unwrap_or(Path::new("."));
    let workload = match build_workload(&sc, dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let out_dir = out.unwrap_or_else(|| dir.to_path_buf());
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: {}: {e}", out_dir.display());
        return ExitCode::FAILURE;
    }
    for s in strategies {
        if let Err(code) = run_one(&sc, s, &workload, &out_dir) {
            return code;
        }
    }
    ExitCode::SUCCESS
}

fn cmd_compare(reports: &[PathBuf]) -> ExitCode {
    if reports.len() < 2 {
        eprintln!("error: compare needs at least two reports");
        return ExitCode::from(EXIT_SCHEMA);
    }
    let mut loaded = Vec::new();
    for path in reports {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        };
        match MetricsReport::from_json(&text) {
            Ok(r) => loaded.push(r),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_SCHEMA);
            }
        }
    }
    let hash = &loaded[0].workload_hash;
    if loaded.iter().any(|r| &r.workload_hash != hash) {
        eprintln!("error: reports were produced from different workloads");
        return ExitCode::from(EXIT_MISMATCH);
    }
    println!(
        "{:<26} {:>12} {:>8} {:>12} {:>12} {:>6}",
        "strategy", "makespan", "util", "response", "waiting", "viol"
    );
    for r in &loaded {
        println!(
            "{:<26} {:>12.3} {:>8.4} {:>12.3} {:>12.3} {:>6}",
            r.strategy,
            r.makespan_s,
            r.avg_utilization,
            r.avg_response_s,
            r.avg_waiting_s,
            r.corridor_violations
        );
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MALLEON_LOG")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            family,
            seed,
            nodes,
            malleable,
            out,
        } => cmd_gen(&family, seed, nodes, malleable, out),
        Command::Run {
            scenario,
            strategy,
            seed,
            malleable,
            nodes,
            tick,
            out,
        } => cmd_run(
            &scenario, strategy, seed, malleable, nodes, tick, out,
        ),
        Command::Compare { reports } => cmd_compare(&reports),
    }
}
