use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mfc_core::diagnostics::{self, DiagnosticSettings, SignalRegistry};
use mfc_core::differentiator::EstimatorSpec;
use mfc_core::simloop::{Comparison, Scenario, TimeSeries};
use mfc_core::{config, scenarios, simloop};

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "mfc",
    version,
    about = "Model-free control simulations and estimator diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one closed-loop scenario and write its time series.
    Run {
        #[command(flatten)]
        source: ScenarioArgs,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario with and without the F estimate and compare tracking.
    Compare {
        #[command(flatten)]
        source: ScenarioArgs,
        /// Output directory for model_free.csv, classic_pid.csv and summary.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the derivative estimator on a test signal.
    Estimator(EstimatorArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(
        long,
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `channels.0.gains.kp=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    /// Taylor order N.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Integration order; defaults to N + 2.
    #[arg(long)]
    nu: Option<usize>,
    /// Window length in seconds.
    #[arg(long, default_value_t = 0.5)]
    window: f64,
    /// Sampling period in seconds.
    #[arg(long, default_value_t = 1e-3)]
    period: f64,
    /// `polynomial:c0,c1,..`, `sine:amp,freq[,phase]` or `csv:path[#column]`.
    #[arg(long)]
    signal: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    /// Output directory for trace.csv and kernel.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn load(args: &ScenarioArgs) -> anyhow::Result<Scenario> {
    let base = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            config::load_scenario(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(name)) => scenarios::builtin(name)?,
        (None, None) => anyhow::bail!("either --config or --scenario is required"),
    };
    let mut sc = config::apply_overrides(&base, &args.overrides)?;
    if let Some(seed) = args.seed {
        sc.sim.seed = seed;
    }
    sc.validate()?;
    Ok(sc)
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.6e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn summary(series: &TimeSeries, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "rmse      {}", fmt_list(&series.rmse()))?;
    writeln!(w, "max |u|   {}", fmt_list(&series.max_abs_u()))?;
    match series.diverged_at {
        Some(t) => writeln!(w, "diverged  yes (t = {t} s)"),
        None => writeln!(w, "diverged  no"),
    }
}

fn cmd_run(source: &ScenarioArgs, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let sc = load(source)?;
    let series = simloop::run(&sc)?;
    match out {
        Some(path) => {
            series.export_csv(path)?;
            summary(&series, &mut io::stdout())?;
        }
        None => {
            series.write_csv(io::stdout().lock())?;
            summary(&series, &mut io::stderr())?;
        }
    }
    Ok(if series.diverged() {
        ExitCode::from(EXIT_DIVERGED)
    } else {
        ExitCode::SUCCESS
    })
}

fn write_summary(cmp: &Comparison, path: &Path) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["mode", "seed", "output", "rmse", "diverged"])?;
    for (mode, series, rmse) in [
        ("model_free", &cmp.model_free, &cmp.rmse_model_free),
        ("classic_pid", &cmp.classic, &cmp.rmse_classic),
    ] {
        for (j, r) in rmse.iter().enumerate() {
            wtr.write_record([
                mode.to_string(),
                series.seed.to_string(),
                (j + 1).to_string(),
                format!("{r:.16e}"),
                series.diverged().to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn cmd_compare(source: &ScenarioArgs, out: &Path) -> anyhow::Result<ExitCode> {
    let sc = load(source)?;
    let cmp = simloop::compare(&sc)?;
    fs::create_dir_all(out)?;
    cmp.model_free.export_csv(out.join("model_free.csv"))?;
    cmp.classic.export_csv(out.join("classic_pid.csv"))?;
    write_summary(&cmp, &out.join("summary.csv"))?;

    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{:<12} {:>6} {:>6} {:>14} {:>9}",
        "mode", "seed", "output", "rmse", "diverged"
    )?;
    for (name, series, rmse) in [
        ("model_free", &cmp.model_free, &cmp.rmse_model_free),
        ("classic_pid", &cmp.classic, &cmp.rmse_classic),
    ] {
        for (j, r) in rmse.iter().enumerate() {
            writeln!(
                stdout,
                "{name:<12} {:>6} {:>6} {r:>14.6e} {:>9}",
                series.seed,
                j + 1,
                series.diverged()
            )?;
        }
    }
    Ok(if cmp.model_free.diverged() {
        ExitCode::from(EXIT_DIVERGED)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_estimator(args: &EstimatorArgs) -> anyhow::Result<ExitCode> {
    let mut spec = EstimatorSpec::new(args.order, args.window, args.period);
    if let Some(nu) = args.nu {
        spec = spec.with_integration_order(nu);
    }
    let signal = SignalRegistry::builtin().parse(&args.signal)?;
    let settings = DiagnosticSettings {
        spec,
        duration: args.duration,
        noise_std: args.noise,
        seed: args.seed,
    };
    let report = diagnostics::run(signal.as_ref(), &settings)?;
    report.export(&args.out)?;

    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "samples per window {}",
        report.kernel.sample_count()
    )?;
    if report.stats.is_empty() {
        writeln!(stdout, "no analytic derivatives for this signal")?;
    } else {
        writeln!(
            stdout,
            "{:<6} {:>14} {:>14} {:>14}",
            "order", "max error", "error var", "raw diff var"
        )?;
        for s in &report.stats {
            writeln!(
                stdout,
                "{:<6} {:>14.6e} {:>14.6e} {:>14.6e}",
                s.order, s.max_error, s.error_variance, s.raw_difference_variance
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MFC_LOG", "warn")).init();
    // clap exits with 2 on usage errors, which is taken by divergence here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run { source, out } => cmd_run(source, out.as_deref()),
        Command::Compare { source, out } => cmd_compare(source, out),
        Command::Estimator(args) => cmd_estimator(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_CONFIG)
    })
}
