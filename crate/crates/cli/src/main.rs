//! `rla` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation error, 4 infeasible
//! request, 5 I/O error.

mod table;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rla_core::dispatch::{run_session, run_sweep, AmbientProfile, Disturbance, ScenarioConfig, SweepMetric};
use rla_core::fleet::{fixture, generate_fleet, ledger_to_csv, load_fleet, Fleet, FleetFile, GeneratorSpec, FIXTURE_NAMES};
use rla_core::model::{PowerGrid, RewardSchedule, SeasonMode};
use rla_core::solver::milp::export_milp;
use rla_core::solver::{enumerate_options, reachable_reduction_set, DrrRequest, ObjectiveConfig};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Infeasible(m) | CliError::Io(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "rla", version, about = "Residential load aggregator: curtailment sessions, sweeps and model export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one demand-reduction session and report per-resident outcomes.
    Run(RunArgs),
    /// Run independent sessions over an amount × duration grid.
    Sweep(SweepArgs),
    /// Write the first step of a request as an LP-format MILP.
    ExportMilp(ExportArgs),
    /// Show the reductions the fleet can deliver in one step.
    Capability(CapabilityArgs),
    /// Generate a seeded synthetic fleet file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Cooling,
    Heating,
}

impl From<Mode> for SeasonMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Cooling => SeasonMode::Cooling,
            Mode::Heating => SeasonMode::Heating,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Accuracy relaxation around the requested amount.
    #[arg(long, env = "RLA_DELTA", default_value_t = 0.05)]
    delta: f64,
    /// Weight on squared comfort margins, micro-cents.
    #[arg(long, env = "RLA_COMFORT_WEIGHT", default_value_t = ObjectiveConfig::DEFAULT_COMFORT_WEIGHT)]
    comfort_weight: u64,
    /// Big-M constant of the exported model, °F.
    #[arg(long, env = "RLA_BIG_M", default_value_t = ObjectiveConfig::DEFAULT_BIG_M)]
    big_m: f64,
    /// Strict-inequality offset of the exported model, °F.
    #[arg(long, env = "RLA_EPSILON", default_value_t = ObjectiveConfig::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Power grid resolution, units per kW.
    #[arg(long, default_value_t = 10)]
    units_per_kw: u32,
}

impl ModelArgs {
    fn objective(&self) -> Result<ObjectiveConfig, CliError> {
        let config = ObjectiveConfig {
            comfort_weight: self.comfort_weight,
            big_m: self.big_m,
            strict_epsilon: self.epsilon,
            grid: PowerGrid::new(self.units_per_kw).map_err(validation)?,
        };
        config.validate().map_err(validation)?;
        Ok(config)
    }

    /// Effective values, plus any environment overrides that were set.
    fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::from([
            ("delta".to_string(), self.delta.to_string()),
            ("comfort_weight".to_string(), self.comfort_weight.to_string()),
            ("big_m".to_string(), self.big_m.to_string()),
            ("epsilon".to_string(), self.epsilon.to_string()),
        ]);
        for var in ["RLA_DELTA", "RLA_COMFORT_WEIGHT", "RLA_BIG_M", "RLA_EPSILON"] {
            if let Ok(v) = std::env::var(var) {
                m.insert(format!("env.{var}"), v);
            }
        }
        m
    }
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Bundled fixture name (table3, mixed) or path to a fleet CSV/JSON file.
    #[arg(long, default_value = "table3")]
    fleet: String,
    /// Constant ambient temperature, °F.
    #[arg(long)]
    ambient: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Cooling)]
    mode: Mode,
    /// Scenario JSON: ambient, seed, disturbance, rates_cents.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bound of the uniform sensor disturbance, °F.
    #[arg(long)]
    disturbance: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Demand reduction, kW.
    #[arg(long)]
    amount: f64,
    /// Request duration, minutes (multiple of 5).
    #[arg(long, default_value_t = 20)]
    duration: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report file; CSV output also writes `<stem>.steps.csv`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Ledger export, one row per resident.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated amounts, kW.
    #[arg(long, value_delimiter = ',', required = true)]
    amounts: Vec<f64>,
    /// Comma-separated durations, minutes.
    #[arg(long, value_delimiter = ',', required = true)]
    durations: Vec<u32>,
    /// Directory for grid.json, sweep_long.csv, cmft_matrix.csv and
    /// reward_matrix.csv.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    amount: f64,
    /// LP file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CapabilityArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Print every reachable reduction.
    #[arg(long)]
    list: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generator spec JSON; `--count`/`--seed` override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Fleet file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    ambient: Option<AmbientProfile>,
    seed: Option<u64>,
    disturbance: Option<Disturbance>,
    rates_cents: Option<[f64; 3]>,
}

const DEFAULT_AMBIENT_F: f64 = 94.0;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

struct Loaded {
    fleet: Fleet,
    scenario: ScenarioConfig,
    mode: SeasonMode,
    delta: f64,
    metadata: BTreeMap<String, String>,
}

fn load(args: &ScenarioArgs) -> Result<Loaded, CliError> {
    let objective = args.model.objective()?;
    let file = match fixture(&args.fleet) {
        Some(f) if !Path::new(&args.fleet).exists() => f,
        _ => {
            let text = read(Path::new(&args.fleet)).map_err(|e| {
                CliError::Io(format!("{} (bundled fleets: {})", e.message(), FIXTURE_NAMES.join(", ")))
            })?;
            FleetFile::parse(&text).map_err(validation)?
        }
    };
    let fleet = load_fleet(&file, &objective.grid).map_err(validation)?;

    let extra: ScenarioFile = match &args.scenario {
        Some(path) => serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        None => ScenarioFile::default(),
    };
    let ambient = match (args.ambient, extra.ambient) {
        (Some(t), _) => AmbientProfile::Constant(t),
        (None, Some(a)) => a,
        (None, None) => AmbientProfile::Constant(DEFAULT_AMBIENT_F),
    };
    let mut scenario = ScenarioConfig::for_fleet(&fleet, ambient);
    scenario.objective = objective;
    scenario.seed = args.seed.or(extra.seed).unwrap_or(0);
    scenario.disturbance = args.disturbance.map(|bound_f| Disturbance { bound_f }).or(extra.disturbance);
    if let Some([r1, r2, r3]) = extra.rates_cents {
        scenario.schedule = RewardSchedule::new(r1, r2, r3).map_err(validation)?;
    }

    let mut metadata = args.model.metadata();
    metadata.insert("fleet".into(), args.fleet.clone());
    Ok(Loaded { fleet, scenario, mode: args.mode.into(), delta: args.model.delta, metadata })
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let l = load(&args.scenario)?;
    let request = DrrRequest::new(args.amount, l.delta, args.duration, l.mode).map_err(validation)?;
    let mut report = run_session(&l.fleet, &request, &l.scenario).map_err(validation)?;
    report.metadata = l.metadata;

    emit(&table::session(&report));
    if let Some(path) = &args.output {
        match args.format {
            Format::Json => write(path, &report.to_json_string())?,
            Format::Csv => {
                write(path, &report.residents_csv())?;
                write(&path.with_extension("steps.csv"), &report.steps_csv())?;
            }
        }
    }
    if let Some(path) = &args.ledger {
        write(path, &ledger_to_csv(&report.ledger))?;
    }
    match &report.abort {
        None => Ok(()),
        Some(a) => Err(CliError::Infeasible(format!("step {} infeasible: {}", a.step, a.diagnostic))),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.amounts.is_empty() || args.durations.is_empty() {
        return Err(CliError::Usage("sweep axes must be non-empty".into()));
    }
    let l = load(&args.scenario)?;
    let mut grid = run_sweep(&l.fleet, &args.amounts, &args.durations, l.delta, l.mode, &l.scenario).map_err(validation)?;
    grid.metadata = l.metadata;

    emit(&table::sweep(&grid));
    if let Some(dir) = &args.output_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write(&dir.join("grid.json"), &grid.to_json_string())?;
        write(&dir.join("sweep_long.csv"), &grid.long_csv())?;
        write(&dir.join("cmft_matrix.csv"), &grid.matrix_csv(SweepMetric::AverageCmft))?;
        write(&dir.join("reward_matrix.csv"), &grid.matrix_csv(SweepMetric::TotalReward))?;
    }
    if grid.any_success() {
        Ok(())
    } else {
        Err(CliError::Infeasible("every sweep cell failed".into()))
    }
}

fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let l = load(&args.scenario)?;
    let request = DrrRequest::new(args.amount, l.delta, 5, l.mode).map_err(validation)?;
    let states = l.scenario.initial.iter().map(|t| t.with_ambient(l.scenario.ambient.at(0))).collect::<Vec<_>>();
    let text = export_milp(&l.fleet.profiles, &states, &request, &l.scenario.schedule, &l.scenario.objective)
        .map_err(validation)?;
    match &args.output {
        Some(path) => write(path, &text),
        None => {
            emit(&text);
            Ok(())
        }
    }
}

fn cmd_capability(args: &CapabilityArgs) -> Result<(), CliError> {
    let l = load(&args.scenario)?;
    let grid = l.scenario.objective.grid;
    let states = l.fleet.states(l.scenario.ambient.at(0));
    let options = l
        .fleet
        .profiles
        .iter()
        .zip(&states)
        .map(|(p, s)| enumerate_options(p, s, &l.scenario.schedule, &l.scenario.objective, l.mode))
        .collect::<Result<Vec<_>, _>>()
        .map_err(validation)?;
    let set = reachable_reduction_set(&options);
    let kw: Vec<f64> = set.iter().map(|&u| grid.to_kw(u)).collect();
    let max = kw.last().copied().unwrap_or(0.0);
    if args.format == Some(Format::Json) {
        let value = serde_json::json!({ "max_reduction_kw": max, "reachable_count": kw.len(), "reachable_kw": kw });
        emit(&format!("{}\n", serde_json::to_string_pretty(&value).expect("json values serialise")));
        return Ok(());
    }
    let mut text = format!(
        "residents: {}\nmax reduction: {max} kW\nreachable reductions: {} values on a 1/{} kW grid\n",
        l.fleet.len(),
        kw.len(),
        grid.units_per_kw()
    );
    if args.list {
        for v in &kw {
            text.push_str(&format!("{v}\n"));
        }
    }
    emit(&text);
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(path) => serde_json::from_str::<GeneratorSpec>(&read(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        None => {
            let count = args.count.ok_or_else(|| CliError::Usage("--count is required without --spec".into()))?;
            GeneratorSpec::new(count, args.seed.unwrap_or(0))
        }
    };
    if let Some(c) = args.count {
        spec.count = c;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let file = generate_fleet(&spec).map_err(validation)?;
    let text = match args.format {
        Format::Csv => file.to_csv_string(),
        Format::Json => file.to_json_string(),
    };
    match &args.output {
        Some(path) => write(path, &text),
        None => {
            emit(&text);
            Ok(())
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ExportMilp(a) => cmd_export(a),
        Command::Capability(a) => cmd_capability(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rla: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
