//! Command-line front end: run one scenario, sweep severities for an A/B
//! comparison, or write the bundled benchmark scenario config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use scalesim::engine::RunSummary;
use scalesim::{benchmark_config, DisruptionConfig, Mode, ScenarioConfig};

/// Exit code for configuration and usage errors.
const EXIT_CONFIG: u8 = 1;
/// Exit code for runtime failures.
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "scalesim",
    version,
    about = "Disruption-aware autoscaling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario and write its artifacts.
    Run(RunArgs),
    /// Run both modes across severities and emit a comparison table.
    Compare(CompareArgs),
    /// Scenario config utilities.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's mode (secure|baseline).
    #[arg(long)]
    mode: Option<String>,
    /// Disruption severity: none, low, medium, high, or a percentage.
    #[arg(long)]
    severity: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Scenario config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated severities (none, low, medium, high, or percentages).
    #[arg(long)]
    severities: String,
    /// Runs per mode/severity cell; run k uses seed base_seed + k.
    #[arg(long, default_value_t = 10)]
    repeats: u32,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write the bundled benchmark scenario config.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parsed `--severity` value.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Severity {
    None,
    Pct(f64),
}

impl Severity {
    fn parse(text: &str) -> Result<Severity, String> {
        match text.to_ascii_lowercase().as_str() {
            "none" => Ok(Severity::None),
            "low" => Ok(Severity::Pct(25.0)),
            "medium" => Ok(Severity::Pct(50.0)),
            "high" => Ok(Severity::Pct(75.0)),
            other => {
                let pct: f64 = other
                    .parse()
                    .map_err(|_| format!("unknown severity `{text}`"))?;
                if (0.0..100.0).contains(&pct) {
                    Ok(Severity::Pct(pct))
                } else {
                    Err(format!(
                        "severity percentage {pct} out of range: expected 0 <= PCT < 100"
                    ))
                }
            }
        }
    }

    fn label(&self) -> String {
        match self {
            Severity::None => "none".to_string(),
            Severity::Pct(p) => format!("{p:.0}"),
        }
    }

    /// Applies this severity to a config, overriding any disruption block.
    fn apply(&self, config: &mut ScenarioConfig) {
        match self {
            Severity::None => config.disruption = None,
            Severity::Pct(pct) => {
                let time_seconds = config
                    .disruption
                    .as_ref()
                    .map(|d| d.time_seconds)
                    .unwrap_or(330);
                config.disruption = Some(DisruptionConfig {
                    time_seconds,
                    target_wastage_percent: *pct,
                });
            }
        }
    }
}

fn parse_mode(text: &str) -> Result<Mode, String> {
    match text.to_ascii_lowercase().as_str() {
        "secure" => Ok(Mode::Secure),
        "baseline" => Ok(Mode::Baseline),
        other => Err(format!("unknown mode `{other}`: expected secure|baseline")),
    }
}

fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<(), (u8, anyhow::Error)> {
    let mut config = load_config(&args.config).map_err(|e| (EXIT_CONFIG, e))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = &args.mode {
        config.mode = parse_mode(mode).map_err(|e| (EXIT_CONFIG, anyhow::anyhow!(e)))?;
    }
    if let Some(severity) = &args.severity {
        let severity = Severity::parse(severity).map_err(|e| (EXIT_CONFIG, anyhow::anyhow!(e)))?;
        severity.apply(&mut config);
    }
    let result = run_checked(&config, Some(&args.out))?;
    eprintln!(
        "run complete: mode={} ticks={} -> {}",
        result.summary.mode,
        result.summary.ticks,
        args.out.display()
    );
    Ok(())
}

fn run_checked(
    config: &ScenarioConfig,
    out: Option<&Path>,
) -> Result<scalesim::RunResult, (u8, anyhow::Error)> {
    scalesim::run(config, out).map_err(|err| match err {
        scalesim::EngineError::Config(e) => (EXIT_CONFIG, anyhow::Error::new(e)),
        other => (EXIT_RUNTIME, anyhow::Error::new(other)),
    })
}

/// Per-cell aggregate of `repeats` runs.
struct Cell {
    mode: Mode,
    severity: Severity,
    summaries: Vec<RunSummary>,
}

impl Cell {
    fn mean<F: Fn(&RunSummary) -> f64>(&self, f: F) -> f64 {
        self.summaries.iter().map(&f).sum::<f64>() / self.summaries.len() as f64
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<(), (u8, anyhow::Error)> {
    let base = load_config(&args.config).map_err(|e| (EXIT_CONFIG, e))?;
    if args.repeats == 0 {
        return Err((EXIT_CONFIG, anyhow::anyhow!("--repeats must be positive")));
    }
    let severities: Vec<Severity> = args
        .severities
        .split(',')
        .map(|s| Severity::parse(s.trim()).map_err(|e| (EXIT_CONFIG, anyhow::anyhow!(e))))
        .collect::<Result<_, _>>()?;

    let mut cells: Vec<Cell> = Vec::new();
    for severity in &severities {
        for mode in [Mode::Baseline, Mode::Secure] {
            let mut summaries = Vec::with_capacity(args.repeats as usize);
            for k in 0..args.repeats {
                let mut config = base.clone();
                config.mode = mode;
                config.seed = base.seed + u64::from(k);
                severity.apply(&mut config);
                let run_dir =
                    args.out
                        .join(format!("{}_{}_{}", mode, severity.label(), config.seed));
                let result = run_checked(&config, Some(&run_dir))?;
                summaries.push(result.summary);
            }
            cells.push(Cell {
                mode,
                severity: *severity,
                summaries,
            });
        }
    }

    let mut table = String::from(
        "mode,severity,seed_count,supply_cpu,overutil_pct,overutil_mcpu,underprov_mcpu,overprov_mcpu,overutil_mcpu_improvement_pct\n",
    );
    for cell in &cells {
        let improvement = match cell.mode {
            Mode::Baseline => String::new(),
            Mode::Secure => {
                let baseline = cells
                    .iter()
                    .find(|c| c.mode == Mode::Baseline && c.severity == cell.severity)
                    .expect("baseline cell exists for every severity");
                let base_overutil = baseline.mean(|s| s.mean_overutil_mcpu);
                if base_overutil > 0.0 {
                    let secure_overutil = cell.mean(|s| s.mean_overutil_mcpu);
                    format!(
                        "{:.1}",
                        100.0 * (base_overutil - secure_overutil) / base_overutil
                    )
                } else {
                    String::new()
                }
            }
        };
        table.push_str(&format!(
            "{},{},{},{:.1},{:.1},{:.1},{:.1},{:.1},{}\n",
            cell.mode,
            cell.severity.label(),
            cell.summaries.len(),
            cell.mean(|s| s.mean_supply_cpu),
            cell.mean(|s| s.mean_overutil_pct),
            cell.mean(|s| s.mean_overutil_mcpu),
            cell.mean(|s| s.mean_underprov_mcpu),
            cell.mean(|s| s.mean_overprov_mcpu),
            improvement,
        ));
    }
    std::fs::create_dir_all(&args.out)
        .and_then(|_| std::fs::write(args.out.join("comparison.csv"), &table))
        .map_err(|e| (EXIT_RUNTIME, anyhow::Error::new(e)))?;
    eprint!("{table}");
    Ok(())
}

fn cmd_scenario_init(out: &Path) -> Result<(), (u8, anyhow::Error)> {
    let config = benchmark_config();
    let body = serde_json::to_string_pretty(&config).expect("config serializes infallibly");
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| (EXIT_RUNTIME, anyhow::Error::new(e)))?;
    }
    std::fs::write(out, body + "\n").map_err(|e| (EXIT_RUNTIME, anyhow::Error::new(e)))?;
    eprintln!("wrote benchmark scenario to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders --help/--version through the same path.
            let code = if err.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Scenario { command } => match command {
            ScenarioCommand::Init { out } => cmd_scenario_init(out),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
