//! Command-line front end.
//!
//! Three subcommands: `simulate` runs one closed-loop scenario and writes a
//! trace, a metrics summary, and a run manifest; `bench` times several
//! controllers on the same scenario and writes a comparison table;
//! `selfcheck` runs the built-in numerical verification suite.
//!
//! Exit codes are the scripted interface: 0 success, 1 configuration or
//! check failure, 2 run completed but flagged a crash. All file outputs are
//! written atomically (temp file in the target directory, then rename), so
//! a watcher never observes a half-written file. Each CSV starts with a
//! comment line pointing at the manifest that describes the run that
//! produced it. Set `QUADTARGET_VERBOSE=1` for progress lines on stderr.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, ConfigFile, ControllerKind};
use crate::selfcheck::{all_passed, render_report, run_selfcheck, SelfcheckOptions};
use crate::sim::{
    benchmark_controllers, compute_metrics, run_closed_loop, timing_only_metrics, write_bench_csv,
    write_trace_csv, Metrics, MetricsConfig, SimTrace,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_CRASH_FLAGGED: u8 = 2;

const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(
    name = "quadtarget",
    version,
    about = "Closed-loop quadrotor pursuit simulator and controller benchmark"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv, metrics.toml, manifest.toml.
    Simulate(SimulateArgs),
    /// Run several controllers on one scenario and write bench.csv.
    Bench(BenchArgs),
    /// Run the numerical verification suite; exit 0 iff every check passes.
    Selfcheck(SelfcheckArgs),
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the controller chosen in the config (eer, gpm, bvp, pd-only).
    #[arg(long, value_parser = parse_controller)]
    pub controller: Option<ControllerKind>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub outdir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML run configuration (the controller kind inside is ignored).
    #[arg(long)]
    pub config: PathBuf,
    /// Controllers to compare.
    #[arg(long, value_parser = parse_controller, value_delimiter = ',',
          default_values_t = [ControllerKind::Eer, ControllerKind::Gpm, ControllerKind::Bvp])]
    pub controllers: Vec<ControllerKind>,
    /// Repetitions per controller; timing pools across repetitions.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub outdir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Multiply validated gains by (1 + eps) before checking. Any nonzero
    /// value must make the suite fail; this proves the checks are live.
    #[arg(long, default_value_t = 0.0, hide = true)]
    pub perturb_gain: f64,
}

fn verbose() -> bool {
    std::env::var("QUADTARGET_VERBOSE").map(|v| !v.is_empty() && v != "0").unwrap_or(false)
}

fn vlog(msg: &str) {
    if verbose() {
        eprintln!("quadtarget: {msg}");
    }
}

/// Snapshot written next to every output: what ran, where, when, and the
/// fully resolved configuration it ran with.
#[derive(Debug, Serialize)]
struct RunManifest {
    tool: String,
    version: String,
    machine: String,
    started_unix_s: u64,
    command: String,
    controllers: Vec<String>,
    config_path: String,
    outputs: Vec<String>,
    config: ConfigFile,
}

impl RunManifest {
    fn new(command: &str, controllers: Vec<String>, config_path: &Path, config: &ConfigFile) -> Self {
        RunManifest {
            tool: "quadtarget".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            machine: machine_descriptor(),
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            command: command.to_string(),
            controllers,
            config_path: config_path.display().to_string(),
            outputs: Vec::new(),
            config: config.clone(),
        }
    }
}

fn machine_descriptor() -> String {
    let host = std::fs::read_to_string("/etc/hostname")
        .map(|s| s.trim().to_string())
        .ok()
        .filter(|s| !s.is_empty())
        .or_else(|| std::env::var("HOSTNAME").ok())
        .unwrap_or_else(|| "unknown-host".to_string());
    format!("{}-{} {}", std::env::consts::OS, std::env::consts::ARCH, host)
}

/// Write-then-rename so partial output never lands under the final name.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn manifest_comment() -> String {
    format!("# manifest: {MANIFEST_FILE}\n")
}

fn metrics_config(cfg: &ConfigFile) -> MetricsConfig {
    let standoff = cfg.plant.safe_distance_m;
    MetricsConfig {
        standoff_m: standoff,
        band_m: (standoff - 0.2, standoff + 0.2),
        dwell_s: 1.0,
        include_flagged: false,
    }
}

/// Metrics for a finished trace; falls back to timing-only statistics when
/// the run never converged into the band (crashes, divergence).
fn metrics_or_timing(trace: &SimTrace, cfg: &MetricsConfig) -> Result<Metrics, String> {
    match compute_metrics(trace, cfg) {
        Ok(m) => Ok(m),
        Err(crate::sim::SimError::EmptyWindow { .. }) => {
            timing_only_metrics(trace).map_err(|e| e.to_string())
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> u8 {
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let kind = args.controller.unwrap_or(cfg.controller.kind);
    let mut controller = match cfg.build_controller(Some(kind)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let scenario = cfg.to_scenario();
    vlog(&format!("running scenario `{}` with controller `{kind}`", scenario.name));

    let trace = match run_closed_loop(&scenario, controller.as_mut()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let metrics = match metrics_or_timing(&trace, &metrics_config(&cfg)) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };

    if let Err(e) = std::fs::create_dir_all(&args.outdir) {
        eprintln!("error: cannot create {}: {e}", args.outdir.display());
        return EXIT_ERROR;
    }
    let mut manifest =
        RunManifest::new("simulate", vec![kind.to_string()], &args.config, &cfg);
    manifest.outputs = vec!["trace.csv".into(), "metrics.toml".into()];

    let mut trace_buf: Vec<u8> = manifest_comment().into_bytes();
    if let Err(e) = write_trace_csv(&trace, &mut trace_buf) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    let metrics_doc = match toml::to_string_pretty(&metrics) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot serialize metrics: {e}");
            return EXIT_ERROR;
        }
    };
    let manifest_doc = match toml::to_string_pretty(&manifest) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot serialize manifest: {e}");
            return EXIT_ERROR;
        }
    };

    for (name, bytes) in [
        ("trace.csv", trace_buf.as_slice()),
        ("metrics.toml", metrics_doc.as_bytes()),
        (MANIFEST_FILE, manifest_doc.as_bytes()),
    ] {
        let path = args.outdir.join(name);
        if let Err(e) = write_atomic(&path, bytes) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_ERROR;
        }
        vlog(&format!("wrote {}", path.display()));
    }

    if trace.crashed {
        let when = trace.crash_time_s.unwrap_or(f64::NAN);
        println!(
            "{} / {}: CRASH at t = {when:.3} s after {} records",
            scenario.name,
            kind,
            trace.records.len()
        );
        return EXIT_CRASH_FLAGGED;
    }
    println!(
        "{} / {}: {} records, converged at {:.2} s, mae d_x {:.4} m, mae d_z {:.4} m, median step {:.3} ms",
        scenario.name,
        kind,
        metrics.n_records,
        metrics.converged_at_s,
        metrics.mae_dx_m,
        metrics.mae_dz_m,
        metrics.median_compute_s * 1e3
    );
    EXIT_OK
}

fn cmd_bench(args: &BenchArgs) -> u8 {
    if args.reps == 0 {
        eprintln!("error: --reps must be at least 1");
        return EXIT_ERROR;
    }
    if args.controllers.is_empty() {
        eprintln!("error: --controllers must name at least one controller");
        return EXIT_ERROR;
    }
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut controllers = Vec::with_capacity(args.controllers.len());
    for kind in &args.controllers {
        match cfg.build_controller(Some(*kind)) {
            Ok(c) => controllers.push(c),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_ERROR;
            }
        }
    }
    let scenario = cfg.to_scenario();
    vlog(&format!(
        "benchmarking {} controllers on `{}`, {} reps",
        controllers.len(),
        scenario.name,
        args.reps
    ));

    let report = match benchmark_controllers(
        &scenario,
        &mut controllers,
        args.reps,
        &metrics_config(&cfg),
    ) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };

    if let Err(e) = std::fs::create_dir_all(&args.outdir) {
        eprintln!("error: cannot create {}: {e}", args.outdir.display());
        return EXIT_ERROR;
    }
    let controller_names = args.controllers.iter().map(|k| k.to_string()).collect();
    let mut manifest = RunManifest::new("bench", controller_names, &args.config, &cfg);
    manifest.outputs = vec!["bench.csv".into()];

    let mut bench_buf: Vec<u8> = manifest_comment().into_bytes();
    if let Err(e) = write_bench_csv(&report, &mut bench_buf) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    let manifest_doc = match toml::to_string_pretty(&manifest) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot serialize manifest: {e}");
            return EXIT_ERROR;
        }
    };
    for (name, bytes) in
        [("bench.csv", bench_buf.as_slice()), (MANIFEST_FILE, manifest_doc.as_bytes())]
    {
        let path = args.outdir.join(name);
        if let Err(e) = write_atomic(&path, bytes) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_ERROR;
        }
        vlog(&format!("wrote {}", path.display()));
    }

    let mut ranked = report.summaries.clone();
    ranked.sort_by_key(|s| s.rank);
    for s in &ranked {
        println!(
            "#{} {}: median {:.3} ms, mean {:.3} ms, p99 {:.3} ms, ratio vs fastest {:.1}",
            s.rank,
            s.controller,
            s.median_compute_s * 1e3,
            s.mean_compute_s * 1e3,
            s.p99_compute_s * 1e3,
            s.ratio_vs_fastest
        );
    }

    if report.rows.iter().any(|r| r.metrics.crashed) {
        eprintln!("warning: at least one benchmark run flagged a crash");
        return EXIT_CRASH_FLAGGED;
    }
    EXIT_OK
}

fn cmd_selfcheck(args: &SelfcheckArgs) -> u8 {
    let results = run_selfcheck(&SelfcheckOptions { gain_perturbation: args.perturb_gain });
    print!("{}", render_report(&results));
    if all_passed(&results) {
        EXIT_OK
    } else {
        EXIT_ERROR
    }
}

/// Executes a parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Selfcheck(args) => cmd_selfcheck(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn controller_override_parses() {
        let cli = Cli::try_parse_from([
            "quadtarget",
            "simulate",
            "--config",
            "run.toml",
            "--controller",
            "pd-only",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(args) => {
                assert_eq!(args.controller, Some(ControllerKind::PdOnly));
                assert_eq!(args.outdir, PathBuf::from("out"));
            }
            other => panic!("wrong subcommand: {other:?}"),
        }
    }

    #[test]
    fn bench_controller_list_splits_on_commas() {
        let cli = Cli::try_parse_from([
            "quadtarget",
            "bench",
            "--config",
            "run.toml",
            "--controllers",
            "eer,bvp",
            "--reps",
            "7",
        ])
        .unwrap();
        match cli.command {
            Command::Bench(args) => {
                assert_eq!(args.controllers, vec![ControllerKind::Eer, ControllerKind::Bvp]);
                assert_eq!(args.reps, 7);
            }
            other => panic!("wrong subcommand: {other:?}"),
        }
    }

    #[test]
    fn bench_defaults_cover_all_optimizing_controllers() {
        let cli =
            Cli::try_parse_from(["quadtarget", "bench", "--config", "run.toml"]).unwrap();
        match cli.command {
            Command::Bench(args) => {
                assert_eq!(
                    args.controllers,
                    vec![ControllerKind::Eer, ControllerKind::Gpm, ControllerKind::Bvp]
                );
                assert_eq!(args.reps, 3);
            }
            other => panic!("wrong subcommand: {other:?}"),
        }
    }

    #[test]
    fn unknown_controller_is_a_parse_error() {
        let err = Cli::try_parse_from([
            "quadtarget",
            "simulate",
            "--config",
            "run.toml",
            "--controller",
            "newton",
        ])
        .unwrap_err();
        assert!(err.to_string().contains("newton"));
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = std::env::temp_dir().join(format!("qt-cli-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("file.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
