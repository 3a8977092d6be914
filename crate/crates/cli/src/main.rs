use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use parbot::plot::{error_overlay, log_charts, render_svg, write_charts};
use parbot::sim::log::{read_csv_file, write_csv_file};
use parbot::sim::{run_comparison, run_scenario, Scenario, SimLog};
use parbot::validate::{validate_all, ValidateOptions};

#[derive(Debug, Parser)]
#[command(name = "parbot", version, about = "Adaptive tracking of parallel robots: simulation, comparison, validation, plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario; writes `<stem>.csv` and `<stem>_metrics.json`.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Adaptive and baseline runs of one scenario with a shared error overlay.
    Compare {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sampled identity and structural property suites on both robots.
    Validate {
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Zero the Coriolis matrix of every model (negative control).
        #[arg(long, hide = true)]
        zero_coriolis: bool,
    },
    /// Render SVG charts of a simulation log.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Failure split into the two nonzero exit codes.
enum Failure {
    /// Bad input: config, scenario, log schema, missing file.
    Usage(anyhow::Error),
    /// Validation failure or simulation fault.
    Runtime(anyhow::Error),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: parbot::Error) -> Failure {
    Failure::Runtime(anyhow::anyhow!("fault: {}: {e}", e.kind()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn format_axes(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn load(config: &Path) -> Result<Scenario, Failure> {
    Scenario::load(config).map_err(usage)
}

fn save_log(log: &SimLog, sc: &Scenario, out: &Path, name: &str) -> anyhow::Result<parbot::sim::Metrics> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv = out.join(format!("{name}.csv"));
    write_csv_file(&log.rows, log.n, log.m, &csv)?;
    let metrics = log.metrics(sc.tail_fraction, sc.settle_band);
    std::fs::write(out.join(format!("{name}_metrics.json")), metrics.to_json() + "\n")?;
    println!("wrote {}", csv.display());
    Ok(metrics)
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut sc = load(config)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let log = run_scenario(&sc).map_err(runtime)?;
    let metrics = save_log(&log, &sc, out, &stem(config)).map_err(Failure::Runtime)?;
    println!("tail max error [m]: {}", format_axes(&metrics.tail_max_error));
    Ok(())
}

fn cmd_compare(config: &Path, out: &Path) -> Result<(), Failure> {
    let sc = load(config)?;
    let (adaptive, baseline) = run_comparison(&sc).map_err(runtime)?;
    let name = stem(config);
    let write = || -> anyhow::Result<()> {
        let ma = save_log(&adaptive, &sc, out, &format!("{name}_adaptive"))?;
        let mb = save_log(&baseline, &sc, out, &format!("{name}_baseline"))?;
        let chart = error_overlay(adaptive.n, ("adaptive", &adaptive.rows), ("baseline", &baseline.rows));
        let svg = out.join(format!("{name}_error_compare.svg"));
        std::fs::write(&svg, render_svg(&chart))?;
        println!("wrote {}", svg.display());
        println!("adaptive tail max error [m]: {}", format_axes(&ma.tail_max_error));
        println!("baseline tail max error [m]: {}", format_axes(&mb.tail_max_error));
        Ok(())
    };
    write().map_err(Failure::Runtime)
}

fn cmd_validate(samples: u64, seed: u64, zero_coriolis: bool) -> Result<(), Failure> {
    let opts = ValidateOptions { samples: samples as usize, seed, zero_coriolis };
    let report = validate_all(&opts).map_err(runtime)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("property validation failed")))
    }
}

fn cmd_plot(csv: &Path, out: &Path) -> Result<(), Failure> {
    let log = read_csv_file(csv).map_err(usage)?;
    let charts = log_charts(&log.rows, log.n, log.m);
    let paths = write_charts(&charts, out, &stem(csv)).map_err(|e| Failure::Runtime(e.into()))?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, &out, seed),
        Command::Compare { config, out } => cmd_compare(&config, &out),
        Command::Validate { samples, seed, zero_coriolis } => cmd_validate(samples, seed, zero_coriolis),
        Command::Plot { csv, out } => cmd_plot(&csv, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
