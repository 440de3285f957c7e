//! Command-line driver: run, baseline, fit, check, plot.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use npd::commands::{
    check_table, cmd_baseline, cmd_check, cmd_fit, cmd_plot, cmd_run, ExecOpts,
};
use npd::config::parse_config;
use npd::report::fit_table;

/// Pseudo-spectral electrodiffusion runs on a periodic box, with decay-rate
/// and entropy diagnostics.
#[derive(Parser)]
#[command(name = "npd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Output directory (default: $NPD_OUTPUT_ROOT/<config stem> or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 = auto. The current build computes sequentially,
    /// so all values give identical results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Force sequential reductions for bitwise-reproducible output files.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured simulation run.
    Run {
        /// Path to the TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Resume from a checkpoint instead of building initial data.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Replay the exact heat flow of the run's initial data over a series.
    Baseline {
        /// Series file written by `run`.
        #[arg(long)]
        series: PathBuf,
        /// Initial-state checkpoint (default: init.ckpt next to the series).
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit decay/growth laws on a series and print the verdict table.
    Fit {
        #[arg(long)]
        series: PathBuf,
        /// Claims file; defaults to the built-in claims.
        #[arg(long)]
        fit_spec: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Short verification burst: identities, conservation, convergence.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Emit plot scripts and plain-text extracts for a series.
    Plot {
        #[arg(long)]
        series: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn default_out(common: &CommonOpts, hint: Option<&PathBuf>) -> PathBuf {
    if let Some(out) = &common.out {
        return out.clone();
    }
    let root = std::env::var_os("NPD_OUTPUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    match hint.and_then(|p| p.file_stem()) {
        Some(stem) => root.join(stem),
        None => root,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            common,
            resume,
        } => (|| {
            let text = std::fs::read_to_string(&config)?;
            let parsed = parse_config(&text)?;
            let opts = ExecOpts {
                out_dir: default_out(&common, Some(&config)),
                threads: common.threads,
                deterministic: common.deterministic,
                resume,
            };
            let artifacts = cmd_run(&parsed, &opts)?;
            println!(
                "run complete: {} steps (dt = {}), {} records -> {}",
                artifacts.steps,
                artifacts.dt,
                artifacts.records,
                artifacts.series_path.display()
            );
            Ok(())
        })(),
        Command::Baseline {
            series,
            init,
            common,
        } => (|| {
            let init = init.unwrap_or_else(|| {
                series
                    .parent()
                    .unwrap_or_else(|| std::path::Path::new("."))
                    .join("init.ckpt")
            });
            let out = default_out(&common, Some(&series));
            let path = cmd_baseline(&series, &init, &out)?;
            println!("baseline series -> {}", path.display());
            Ok(())
        })(),
        Command::Fit {
            series,
            fit_spec,
            common,
        } => (|| {
            let out = default_out(&common, Some(&series));
            let (report, path) = cmd_fit(&series, fit_spec.as_deref(), &out)?;
            print!("{}", fit_table(&report));
            println!("fit report -> {}", path.display());
            if !report.all_pass {
                return Err(npd::Error::CheckFailed("one or more claims failed".into()));
            }
            Ok(())
        })(),
        Command::Check { config, common } => (|| {
            let text = std::fs::read_to_string(&config)?;
            let parsed = parse_config(&text)?;
            let out = default_out(&common, Some(&config));
            let report = cmd_check(&parsed, &out)?;
            print!("{}", check_table(&report));
            Ok(())
        })(),
        Command::Plot { series, common } => (|| {
            let out = default_out(&common, Some(&series));
            let files = cmd_plot(&series, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
