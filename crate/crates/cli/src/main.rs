//! `star-rsma`: single runs, parameter sweeps, statistics self-check and
//! channel dumps.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use star_rsma::ao::{run, write_trace_csv};
use star_rsma::channel::{draw_channels, write_channels};
use star_rsma::experiments::{emit_csv, emit_plot, run_sweep, validate_stats, Scheme, SweepAxis, SweepSpec, ValidateOptions};
use star_rsma::rates::average_rates;
use star_rsma::hwi_stats::{EffectiveChannelStats, PhaseNoiseStats};
use star_rsma::scenario::ScenarioConfig;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Worker threads for sweeps; defaults to the number of cores.
const WORKERS_ENV: &str = "STAR_RSMA_WORKERS";

#[derive(Parser)]
#[command(name = "star-rsma", version, about = "Robust FP-AO beamforming for STAR-RIS aided RSMA with hardware impairments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario JSON; missing fields take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Field override, e.g. `--set p_max=10 --set ris_mode=conventional`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioConfig::from_json(&text)?
            }
            None => ScenarioConfig::default(),
        };
        Ok(base.with_overrides(&self.overrides)?.validated()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario and print the achieved sum rate.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Per-iteration log (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweep one axis over paired channel draws.
    Sweep {
        /// SweepSpec JSON; replaces the axis/values/schemes/draws flags.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
        #[arg(long, default_value_t = star_rsma::experiments::DEFAULT_DRAWS)]
        draws: usize,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Monte-Carlo check of the phase-noise statistics and lifting identities.
    ValidateStats {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Debug hook: use this off-diagonal second moment in the model.
        #[arg(long, hide = true)]
        tamper_off_diagonal: Option<f64>,
    },
    /// Write the channel realization of a scenario in the binary dump format.
    DumpChannels {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    SweepAxis::from_name(s).ok_or_else(|| format!("unknown axis `{s}` (elements, power, hwi)"))
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    let names: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
    Scheme::from_name(s).ok_or_else(|| format!("unknown scheme `{s}` ({})", names.join(", ")))
}

fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV}={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn cmd_run(scenario: &ScenarioArgs, trace: Option<&PathBuf>) -> Result<()> {
    let cfg = scenario.load()?;
    let (_, ch) = draw_channels(&cfg)?;
    let r = run(&cfg, &ch)?;
    let stats = EffectiveChannelStats::compute(&ch, &r.star, &PhaseNoiseStats::closed_form(cfg.n))?;
    let rates = average_rates(&stats, &r.precoder, &cfg)?;
    println!("sum_rate_bps_hz {:.6}", r.objective_bits);
    println!("design_objective_bps_hz {:.6}", r.design_objective_bits);
    println!("initial_objective_bps_hz {:.6}", r.initial_objective_bits);
    println!("iterations {} converged {} seconds {:.2}", r.iterations, r.converged, r.seconds);
    println!("private_rates {:?}", rates.iter().map(|(p, _)| format!("{p:.4}")).collect::<Vec<_>>());
    println!("common_alloc {:?}", r.precoder.c_alloc.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    if let Some(path) = trace {
        write_trace_csv(&r.trace, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    spec_path: Option<&Path>,
    axis: Option<SweepAxis>,
    values: Vec<f64>,
    schemes: Vec<Scheme>,
    draws: usize,
    scenario: &ScenarioArgs,
    csv: &Path,
    svg: Option<&Path>,
) -> Result<()> {
    let spec = match spec_path {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => {
            let Some(axis) = axis else { bail!("either --spec or --axis is required") };
            let schemes = if schemes.is_empty() { Scheme::ALL.to_vec() } else { schemes };
            SweepSpec { axis, values, schemes, n_channel_draws: draws, base_config: scenario.load()? }
        }
    };
    let result = run_sweep(&spec)?;
    for c in &result.cells {
        println!(
            "{:<20} {}={:<8} mean {:.4} std {:.4} iters {:.1} ok {} fail {}",
            c.scheme.name(),
            result.axis.name(),
            c.value,
            c.mean_rate(),
            c.std_rate(),
            c.mean_iterations(),
            c.n_ok(),
            c.n_fail()
        );
    }
    emit_csv(&result, csv)?;
    if let Some(svg) = svg {
        emit_plot(&result, svg)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = init_workers().and_then(|()| match &cli.command {
        Command::Run { scenario, trace } => cmd_run(scenario, trace.as_ref()).map(|()| true),
        Command::Sweep { spec, axis, values, schemes, draws, scenario, csv, svg } => {
            cmd_sweep(spec.as_deref(), *axis, values.clone(), schemes.clone(), *draws, scenario, csv, svg.as_deref()).map(|()| true)
        }
        Command::ValidateStats { scenario, samples, instances, tamper_off_diagonal } => scenario.load().map(|cfg| {
            let opts = ValidateOptions {
                moment_samples: *samples,
                instances: *instances,
                tamper_off_diagonal: *tamper_off_diagonal,
                ..ValidateOptions::default()
            };
            let report = validate_stats(&cfg, &opts);
            for c in &report.checks {
                println!("{c}");
            }
            report.passed()
        }),
        Command::DumpChannels { scenario, out } => (|| {
            let cfg = scenario.load()?;
            let (_, ch) = draw_channels(&cfg)?;
            write_channels(&ch, BufWriter::new(File::create(out)?))?;
            Ok(true)
        })(),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
