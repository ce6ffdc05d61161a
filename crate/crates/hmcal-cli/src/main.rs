//! Command-line driver: calibrate a simulator against a target series, run
//! sensitivity sweeps, score candidate series, or run the packaged demo.

mod config;
mod demo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmcal::bundle;
use hmcal::histmatch::{self, Termination};
use hmcal::metrics;
use hmcal::sim::{TimeGrid, TimeSeries};
use hmcal::sweep::{self, Factor};

#[derive(Parser)]
#[command(name = "hmcal", version, about = "Calibration engine for time-series simulators")]
struct Cli {
    /// Bound on engine-internal parallelism (worker threads).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one calibration from a config file and write the result bundle.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sensitivity sweep (and DPS comparison) from a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cap replications at 5 for a quick smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// Score a candidate series against a target series (single-column CSVs).
    Metrics {
        candidate: PathBuf,
        target: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the built-in illustrative calibration and write plot data.
    Demo {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// CLI failure with its exit code: 2 config, 3 simulator, 4 i/o.
enum AppError {
    Config(String),
    Simulator(String),
    Io(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Simulator(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Simulator(m) | AppError::Io(m) => m,
        }
    }
}

fn io_err<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> AppError + '_ {
    move |e| AppError::Io(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: setting --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Calibrate { config, seed, out } => cmd_calibrate(&config, seed, out.as_deref()),
        Command::Sweep {
            config,
            seed,
            out,
            quick,
        } => cmd_sweep(&config, seed, out.as_deref(), quick),
        Command::Metrics {
            candidate,
            target,
            out,
        } => cmd_metrics(&candidate, &target, out.as_deref()),
        Command::Demo { seed, out } => demo::cmd_demo(seed, &out),
    }
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<config::RunConfig, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("reading {}: {e}", path.display())))?;
    config::parse(&text, seed, out)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

fn write_echo(cfg: &config::RunConfig, resolved_dps: &[usize], dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(io_err("creating output directory"))?;
    let default = hmcal::sim::default_grid();
    let grid = &cfg.sim.grid;
    if grid != &default {
        let g = grid.values();
        let step = g[1] - g[0];
        let equidistant = g
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() < 1e-12 * step.abs());
        if !equidistant {
            let mut text = String::new();
            for v in g {
                text.push_str(&bundle::fmt_f64(*v));
                text.push('\n');
            }
            std::fs::write(dir.join("grid_echo.txt"), text).map_err(io_err("writing grid echo"))?;
        }
    }
    std::fs::write(dir.join("config.echo"), config::echo(cfg, resolved_dps))
        .map_err(io_err("writing config.echo"))?;
    Ok(())
}

fn cmd_calibrate(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), AppError> {
    let cfg = load_config(path, seed, out)?;
    if cfg.seed_was_drawn {
        println!("seed drawn from entropy: {} (recorded in config.echo)", cfg.hm.seed);
    }
    let target = cfg.load_target().map_err(AppError::Simulator)?;
    let result = histmatch::run(&cfg.sim, &target, &cfg.hm).map_err(|e| match e {
        hmcal::HmError::Config(c) => AppError::Config(c.to_string()),
        hmcal::HmError::NothingEvaluated(s) => AppError::Simulator(s.to_string()),
    })?;

    write_echo(&cfg, &result.dps, &cfg.out_dir)?;
    bundle::write_run_bundle(&cfg.out_dir, &result, &target, &cfg.sim.bounds)
        .map_err(io_err("writing result bundle"))?;
    let report = metrics::report(&result.best_series, &target);
    bundle::write_metrics_csv(
        &cfg.out_dir.join("metrics.csv"),
        &[("x_opt".to_string(), report)],
    )
    .map_err(io_err("writing metrics.csv"))?;

    let coords: Vec<String> = result.x_opt.coords().iter().map(|c| bundle::fmt_f64(*c)).collect();
    println!("x_opt = ({})", coords.join(", "));
    println!("log_delta = {}", bundle::fmt_f64(result.log_delta_opt()));
    println!("delta = {}", bundle::fmt_f64(result.delta_opt));
    println!("n_evaluations = {}", result.n_evaluations);
    println!("termination = {:?}", result.termination);
    println!("bundle written to {}", cfg.out_dir.display());

    if let Termination::SimulatorFailure(m) = &result.termination {
        return Err(AppError::Simulator(format!(
            "run aborted after {} evaluations: {m}",
            result.n_evaluations
        )));
    }
    Ok(())
}

fn cmd_sweep(path: &Path, seed: Option<u64>, out: Option<&Path>, quick: bool) -> Result<(), AppError> {
    let cfg = load_config(path, seed, out)?;
    let Some(plan) = config::sweep_plan(&cfg, quick) else {
        return Err(AppError::Config(format!(
            "{}: a [sweep] section is required for the sweep command",
            path.display()
        )));
    };
    if cfg.seed_was_drawn {
        println!("seed drawn from entropy: {} (recorded in config.echo)", cfg.hm.seed);
    }
    let target = cfg.load_target().map_err(AppError::Simulator)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err("creating output directory"))?;
    let resolved = histmatch::resolve_dps(&cfg.hm, cfg.sim.grid.len())
        .map_err(|e| AppError::Config(e.to_string()))?;
    write_echo(&cfg, &resolved, &cfg.out_dir)?;

    // raw rows stream to disk as they commit, so an aborted sweep leaves a
    // valid prefix behind
    use std::io::Write as _;
    let raw_path = cfg.out_dir.join("sweep_raw.csv");
    let mut raw = std::io::BufWriter::new(
        std::fs::File::create(&raw_path).map_err(io_err("creating sweep_raw.csv"))?,
    );
    writeln!(raw, "{}", bundle::sweep_raw_header()).map_err(io_err("writing sweep_raw.csv"))?;
    let mut sink_error: Option<std::io::Error> = None;
    let result = sweep::run_sweep(&cfg.sim, &target, &plan, &mut |row| {
        if sink_error.is_none() {
            if let Err(e) = writeln!(raw, "{}", bundle::sweep_raw_line(row)).and_then(|()| raw.flush()) {
                sink_error = Some(e);
            }
        }
    });
    if let Some(e) = sink_error {
        return Err(AppError::Io(format!("writing sweep_raw.csv: {e}")));
    }

    bundle::write_sweep_medians(&cfg.out_dir.join("sweep_medians.csv"), &result)
        .map_err(io_err("writing sweep_medians.csv"))?;
    let factors = [Factor::N1, Factor::C, Factor::Tk, Factor::M];
    for (i, &a) in factors.iter().enumerate() {
        for &b in &factors[i + 1..] {
            let table = sweep::marginal_medians(&result, a, b);
            let name = format!("fig5_{}_{}.csv", a.name(), b.name());
            bundle::write_marginal_csv(&cfg.out_dir.join(&name), a.name(), b.name(), &table)
                .map_err(io_err("writing fig5 table"))?;
        }
    }

    if let Some(tk) = cfg.sweep.as_ref().and_then(|s| s.dps_comparison_tk) {
        let reps = if quick {
            cfg.sweep.as_ref().unwrap().dps_comparison_replications.min(5)
        } else {
            cfg.sweep.as_ref().unwrap().dps_comparison_replications
        };
        let cmp = sweep::dps_comparison(&cfg.sim, &target, tk, reps, cfg.hm.seed, &plan.base);
        bundle::write_dps_comparison_csv(&cfg.out_dir.join("fig6_dps.csv"), &cmp)
            .map_err(io_err("writing fig6_dps.csv"))?;
        println!(
            "dps comparison: fixed median N {} vs variable {}; fixed median log_delta {} vs variable {}",
            bundle::fmt_f64(cmp.median_fixed_n()),
            bundle::fmt_f64(cmp.median_variable_n()),
            bundle::fmt_f64(cmp.median_fixed_log_delta()),
            bundle::fmt_f64(cmp.median_variable_log_delta()),
        );
    }

    let failures: usize = result.cells.iter().map(|c| c.failures).sum();
    println!(
        "sweep finished: {} cells x {} replicates, {} failures; bundle written to {}",
        result.cells.len(),
        plan.replications,
        failures,
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_metrics(candidate: &Path, target: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let read_series = |path: &Path| -> Result<Vec<f64>, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("reading {}: {e}", path.display())))?;
        config::parse_series_file(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    };
    let cand = read_series(candidate)?;
    let targ = read_series(target)?;
    if cand.len() != targ.len() {
        return Err(AppError::Config(format!(
            "length mismatch: {} has {} values, {} has {}",
            candidate.display(),
            cand.len(),
            target.display(),
            targ.len()
        )));
    }
    if cand.len() < 2 {
        return Err(AppError::Config("series need at least 2 values".into()));
    }
    let grid = TimeGrid::new((1..=cand.len()).map(|i| i as f64).collect())
        .map_err(|e| AppError::Config(e.to_string()))?;
    let cand = TimeSeries::new(grid.clone(), cand).map_err(|e| AppError::Config(e.to_string()))?;
    let targ = TimeSeries::new(grid, targ).map_err(|e| AppError::Config(e.to_string()))?;
    let report = metrics::report(&cand, &targ);

    let show = |name: &str, v: &metrics::MetricResult| match v {
        Ok(v) => println!("{name} = {}", bundle::fmt_f64(*v)),
        Err(e) => println!("{name} = undefined ({e})"),
    };
    show("delta", &report.delta);
    show("rmse", &report.rmse);
    show("r2", &report.r2);
    show("nse", &report.nse);
    show("ppts_5_95", &report.ppts_5_95);
    show("ppts_1_100", &report.ppts_1_100);
    let excluded = metrics::ppts_excluded_count(&cand);
    if excluded > 0 {
        println!("ppts_excluded = {excluded} (|candidate| below the denominator guard)");
    }

    let out_dir = out.unwrap_or(Path::new("out"));
    bundle::write_metrics_csv(
        &out_dir.join("metrics.csv"),
        &[("candidate".to_string(), report)],
    )
    .map_err(io_err("writing metrics.csv"))?;
    println!("metrics written to {}", out_dir.join("metrics.csv").display());
    Ok(())
}
