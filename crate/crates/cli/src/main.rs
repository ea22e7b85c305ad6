//! `scatinv`: batch driver for forward scattering, Born readouts and recovery runs.
//!
//! Exit status: 0 success, 1 I/O failure, 2 invalid config or data, 3 numerical abort.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::Failure;
use config::{AutoOr, Experiment, Overrides};
use output::RunOutput;
use scatinv_core::Execution;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "scatinv", version, about = "Recover NLS nonlinearities from scattering data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; the shipped default is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the data-parallel loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Readout scale: replaces the pipeline sigma and the born sigma list.
    #[arg(long)]
    sigma: Option<f64>,
    /// Tikhonov strength, a number or "auto".
    #[arg(long, value_parser = AutoOr::parse)]
    reg: Option<AutoOr>,
    /// Vertical line Re z = c of the Fourier route, a number or "auto".
    #[arg(long = "c-line", value_parser = AutoOr::parse)]
    c_line: Option<AutoOr>,
}

#[derive(Subcommand)]
enum Command {
    /// Grid free flow against the closed-form Gaussian solution.
    Propagate(Common),
    /// Scattering map: free identity, gauge and amplitude-scan checks.
    Scatter(Common),
    /// Sigma-scan of concentrated pairings against Born values.
    Born(Common),
    /// Distribution-function table and Monte Carlo cross-check.
    Mu(Common),
    /// Laplace transform cross-checks, decay bounds and outer report.
    Laplace(Common),
    /// Exact convolution data of the configured nonlinearity.
    Synthesize(Common),
    /// Deconvolution and reconstruction of the potential.
    Recover {
        #[command(flatten)]
        common: Common,
        /// CSV with columns a, d_value, noise; synthesized from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Scattering, localized readout and recovery end to end.
    Pipeline(Common),
    /// Check a config without running anything.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

struct Source {
    name: String,
    text: String,
}

fn load(path: Option<&Path>) -> Result<Source, Failure> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            Ok(Source { name: p.display().to_string(), text })
        }
        None => Ok(Source { name: "<default config>".into(), text: config::DEFAULT_CONFIG.into() }),
    }
}

fn prepare(src: &Source, overrides: &Overrides) -> Result<(config::Report, Experiment), Failure> {
    let cfg = config::parse(&src.text).map_err(|e| {
        let at = e.line.map_or(String::new(), |l| format!(":{l}"));
        Failure::Invalid(vec![format!("{}{at}: {}", src.name, e.message.trim_end())])
    })?;
    let report = config::validate(cfg, &src.text, overrides);
    match report.experiment.clone() {
        Some(exp) if report.ok() => Ok((report, exp)),
        _ => Err(Failure::Invalid(report.issues.iter().map(|i| i.render(&src.name)).collect())),
    }
}

fn set_threads(n: Option<usize>) {
    let Some(n) = n else { return };
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        eprintln!("warning: thread pool not configured: {e}");
    }
    #[cfg(not(feature = "parallel"))]
    eprintln!("warning: built without the parallel feature, ignoring --threads {n}");
}

fn run(name: &str, common: &Common, data: Option<&Path>) -> Result<(), Failure> {
    set_threads(common.threads);
    let src = load(common.config.as_deref())?;
    let overrides = Overrides { seed: common.seed, sigma: common.sigma, reg: common.reg, c_line: common.c_line };
    let (_, exp) = prepare(&src, &overrides)?;
    let dir = common
        .out
        .clone()
        .or_else(|| exp.cfg.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("scatinv-out"));
    let mut out = RunOutput::create(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let exec = Execution::default();
    eprintln!("scatinv {name}: config {} -> {}", src.name, dir.display());
    match name {
        "propagate" => commands::propagate(&exp, &mut out, exec),
        "scatter" => commands::scatter(&exp, &mut out, exec),
        "born" => commands::born(&exp, &mut out, exec),
        "mu" => commands::mu(&exp, &mut out, exec),
        "laplace" => commands::laplace(&exp, &mut out, exec),
        "synthesize" => commands::synthesize(&exp, &mut out, exec),
        "recover" => commands::recover(&exp, &mut out, exec, data),
        "pipeline" => commands::pipeline(&exp, &mut out, exec),
        other => unreachable!("unknown subcommand {other}"),
    }?;
    let path = out.finish(name, &src.name, src.text.as_bytes(), exp.cfg.seed, &overrides)?;
    eprintln!("scatinv {name}: wrote {}", path.display());
    Ok(())
}

fn validate_only(config: Option<&Path>) -> Result<(), Failure> {
    let src = load(config)?;
    let cfg = config::parse(&src.text).map_err(|e| {
        let at = e.line.map_or(String::new(), |l| format!(":{l}"));
        Failure::Invalid(vec![format!("{}{at}: {}", src.name, e.message.trim_end())])
    })?;
    let report = config::validate(cfg, &src.text, &Overrides::default());
    for (check, ok) in &report.checks {
        println!("{check}: {}", if *ok { "ok" } else { "FAILED" });
    }
    if report.ok() {
        println!("{}: valid", src.name);
        Ok(())
    } else {
        Err(Failure::Invalid(report.issues.iter().map(|i| i.render(&src.name)).collect()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Propagate(c) => run("propagate", c, None),
        Command::Scatter(c) => run("scatter", c, None),
        Command::Born(c) => run("born", c, None),
        Command::Mu(c) => run("mu", c, None),
        Command::Laplace(c) => run("laplace", c, None),
        Command::Synthesize(c) => run("synthesize", c, None),
        Command::Recover { common, data } => run("recover", common, data.as_deref()),
        Command::Pipeline(c) => run("pipeline", c, None),
        Command::Validate { config } => validate_only(config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(lines) => {
                    for l in lines {
                        eprintln!("error: {l}");
                    }
                }
                Failure::Numerical { stage, error } => eprintln!("error: numerical abort in stage {stage}: {error}"),
                Failure::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
