//! `adl`: command-line runner for activity-model enumeration, sensor-data
//! evaluation, trace simulation and emergency detection.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adl_core::activity_model::ComplexActivityDefinition;
use adl_core::dataset::{load_csv, ColumnMapping, FeatureSet};
use adl_core::edscca::{
    classify_trace, traces_from_json, traces_to_json, DecisionConfig, KnowledgeBase, MarkerMatch,
};
use adl_core::evaluation::render_report;
use adl_core::knn::Vote;
use adl_core::labels::Behavior;
use adl_core::pipeline::{
    run_behavior, run_emergency, EvalConfig, EvalOutcome, BEHAVIOR_K, EMERGENCY_K,
};
use adl_core::trace_sim::{generate, SimConfig, SubsetPolicy};
use adl_core::zone_model::{zones_from_dataset, LyingRule, Zone, ZoneMap};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_VALIDATION: u8 = 65;
const EXIT_IO: u8 = 74;

#[derive(Debug, Parser)]
#[command(
    name = "adl",
    version,
    about = "Activity-of-daily-living models and emergency detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count (and optionally list) the performable instances of a definition.
    Enumerate(EnumerateArgs),
    /// Train and score the behavior classifier.
    EvalBehavior(EvalArgs),
    /// Train and score the emergency classifier.
    EvalEmergency(EvalArgs),
    /// Classify activity traces as emergency or not.
    Detect(DetectArgs),
    /// Generate synthetic traces from a definition.
    Simulate(SimulateArgs),
    /// Build a knowledge base file from definition files.
    Kb(KbArgs),
    /// Print the zone map inferred from a data file.
    Zones(ZonesArgs),
}

#[derive(Debug, Args, Serialize)]
struct EnumerateArgs {
    /// Definition file (JSON).
    def: PathBuf,
    /// Also print every instance as a JSON line.
    #[arg(long)]
    dump: bool,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// Labelled sensor CSV.
    #[arg(long)]
    data: PathBuf,
    /// JSON column mapping; defaults to the standard header names.
    #[arg(long)]
    columns: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    /// Neighbors (11 for behavior, 5 for emergency when omitted).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "inverse")]
    vote: String,
    /// "behavior", "emergency" or a comma list such as accel_x,accel_y,zone.
    #[arg(long)]
    features: Option<String>,
    #[arg(long, default_value_t = 3.0)]
    outlier_z: f64,
    /// Skip outlier removal.
    #[arg(long)]
    no_outliers: bool,
    /// Min-max scale features using the training ranges.
    #[arg(long)]
    min_max: bool,
    /// Output directory for report.txt, predictions.csv, confusion.json and
    /// run_config.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Markers {
    All,
    Any,
}

#[derive(Debug, Args, Serialize)]
struct DetectArgs {
    /// Trace file (JSON array).
    #[arg(long)]
    traces: PathBuf,
    /// Definition files; repeat for several.
    #[arg(long, conflicts_with = "kb")]
    defs: Vec<PathBuf>,
    /// Knowledge base file written by `adl kb`.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Zone map (JSON).
    #[arg(long, conflicts_with = "data")]
    zones: Option<PathBuf>,
    /// Infer the zone map from a labelled CSV instead.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Minimum lying duration before an incompatible lying run counts.
    #[arg(long, default_value_t = 0)]
    lie_duration: u64,
    #[arg(long, value_enum, default_value_t = Markers::All)]
    markers: Markers,
    /// Output directory for verdicts.jsonl, summary.json and run_config.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Policy {
    All,
    RandomN,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Definition file (JSON).
    def: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Policy::All)]
    policy: Policy,
    /// Subsets to draw with --policy random-n.
    #[arg(long, default_value_t = 0)]
    n: usize,
    /// Behavior observed after the last atomic (lying, standing, sitting, walking).
    #[arg(long)]
    tail: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    mismatch_rate: f64,
    /// Behavior recorded on the atomic events.
    #[arg(long, default_value = "standing")]
    action_behavior: String,
    /// Output directory for traces.json and run_config.json; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct KbArgs {
    /// Definition files.
    #[arg(required = true)]
    defs: Vec<PathBuf>,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ZonesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    columns: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
}

impl From<adl_core::Error> for CliError {
    fn from(e: adl_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {}", dir.display(), e)))
}

fn load_def(path: &Path) -> CliResult<ComplexActivityDefinition> {
    ComplexActivityDefinition::from_json(&read_text(path)?)
        .map_err(|e| invalid(format!("{}: {}", path.display(), e)))
}

fn mapping(columns: &Option<PathBuf>) -> CliResult<ColumnMapping> {
    match columns {
        Some(p) => Ok(ColumnMapping::from_path(p)?),
        None => Ok(ColumnMapping::default()),
    }
}

fn parse_behavior(s: &str) -> CliResult<Behavior> {
    s.parse()
        .map_err(|e: adl_core::Error| invalid(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Parameters echoed next to every run's outputs.
#[derive(Serialize)]
struct RunConfig<'a, A: Serialize, R: Serialize> {
    command: &'a str,
    args: &'a A,
    resolved: R,
}

fn write_run_config<A: Serialize, R: Serialize>(
    dir: &Path,
    command: &str,
    args: &A,
    resolved: R,
) -> CliResult<()> {
    let cfg = RunConfig {
        command,
        args,
        resolved,
    };
    write_text(&dir.join("run_config.json"), &to_json(&cfg))
}

fn cmd_enumerate(args: &EnumerateArgs, out: &mut impl Write) -> CliResult<()> {
    let def = load_def(&args.def)?;
    let c = def.counts()?;
    writeln!(out, "alpha={} beta={} gamma={}", c.alpha, c.beta, c.gamma)?;
    writeln!(
        out,
        "a_t={} b_t={} c_t={} d_t={}",
        c.a_t, c.b_t, c.c_t, c.d_t
    )?;
    writeln!(out, "threshold_weight={:.6}", def.threshold_weight())?;
    if args.dump {
        for inst in def.enumerate_instances()? {
            writeln!(
                out,
                "{}",
                serde_json::to_string(&inst).expect("serializable")
            )?;
        }
    }
    Ok(())
}

fn eval_config(args: &EvalArgs, emergency: bool) -> CliResult<EvalConfig> {
    let base = if emergency {
        EvalConfig::emergency_default()
    } else {
        EvalConfig::behavior_default()
    };
    let features = match &args.features {
        Some(f) => f.parse::<FeatureSet>()?,
        None => base.features.clone(),
    };
    Ok(EvalConfig {
        seed: args.seed,
        train_fraction: args.train_fraction,
        k: args
            .k
            .unwrap_or(if emergency { EMERGENCY_K } else { BEHAVIOR_K }),
        vote: args.vote.parse::<Vote>()?,
        features,
        outlier_z: (!args.no_outliers).then_some(args.outlier_z),
        min_max_scaling: args.min_max,
        behavior_k: BEHAVIOR_K,
    })
}

fn cmd_eval(args: &EvalArgs, emergency: bool, out: &mut impl Write) -> CliResult<()> {
    let cfg = eval_config(args, emergency)?;
    let records = load_csv(&args.data, &mapping(&args.columns)?)?;
    let outcome: EvalOutcome = if emergency {
        run_emergency(&records, &cfg)?
    } else {
        run_behavior(&records, &cfg)?
    };
    let title = if emergency {
        "emergency model"
    } else {
        "behavior model"
    };
    let mut report = render_report(title, &outcome.matrix)?;
    report.push_str(&format!(
        "\nrecords: {} in, {} after outlier removal, {} train, {} test\n",
        outcome.records_in, outcome.records_after_outliers, outcome.train_size, outcome.test_size
    ));
    out.write_all(report.as_bytes())?;

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_text(&dir.join("report.txt"), &report)?;
        let mut csv = Vec::new();
        outcome.table.write_csv(&mut csv)?;
        fs::write(dir.join("predictions.csv"), csv)?;
        #[derive(Serialize)]
        struct Confusion<'a> {
            matrix: &'a adl_core::evaluation::ConfusionMatrix,
            metrics: &'a adl_core::evaluation::MetricsReport,
            model: &'a adl_core::knn::ModelSummary,
        }
        let confusion = Confusion {
            matrix: &outcome.matrix,
            metrics: &outcome.metrics,
            model: &outcome.model,
        };
        write_text(&dir.join("confusion.json"), &to_json(&confusion))?;
        let name = if emergency {
            "eval-emergency"
        } else {
            "eval-behavior"
        };
        write_run_config(dir, name, args, &cfg)?;
    }
    Ok(())
}

fn default_zones() -> ZoneMap {
    let bedroom = Zone {
        name: "bedroom".into(),
        allowed_activities: Default::default(),
        allowed_behaviors: Behavior::ALL.into_iter().collect(),
    };
    ZoneMap::new([bedroom], ["bedroom".to_string()]).expect("static map")
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    trace: usize,
    zone: &'a str,
    outcome: String,
    branch: String,
    reason: &'a str,
}

fn cmd_detect(args: &DetectArgs, out: &mut impl Write) -> CliResult<()> {
    let traces = traces_from_json(&read_text(&args.traces)?)?;
    let kb = match &args.kb {
        Some(p) => KnowledgeBase::from_json(&read_text(p)?)?,
        None => {
            let defs = args
                .defs
                .iter()
                .map(|p| load_def(p))
                .collect::<CliResult<Vec<_>>>()?;
            KnowledgeBase::from_definitions(&defs)
        }
    };
    let zones = match (&args.zones, &args.data) {
        (Some(p), _) => ZoneMap::from_json(&read_text(p)?)?,
        (None, Some(d)) => zones_from_dataset(&load_csv(d, &mapping(&args.columns)?)?),
        (None, None) => default_zones(),
    };
    let cfg = DecisionConfig {
        markers: match args.markers {
            Markers::All => MarkerMatch::All,
            Markers::Any => MarkerMatch::Any,
        },
        lying: LyingRule {
            min_lie_duration: args.lie_duration,
        },
    };

    let mut lines = String::new();
    let mut by_outcome: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_branch: BTreeMap<String, usize> = BTreeMap::new();
    for (i, t) in traces.iter().enumerate() {
        let v = classify_trace(&kb, &zones, t, &cfg)
            .map_err(|e| invalid(format!("trace {}: {}", i, e)))?;
        *by_outcome.entry(v.outcome.to_string()).or_default() += 1;
        *by_branch.entry(v.branch.to_string()).or_default() += 1;
        let line = VerdictLine {
            trace: i,
            zone: &t.zone,
            outcome: v.outcome.to_string(),
            branch: v.branch.to_string(),
            reason: &v.reason,
        };
        lines.push_str(&serde_json::to_string(&line).expect("serializable"));
        lines.push('\n');
    }
    out.write_all(lines.as_bytes())?;

    #[derive(Serialize)]
    struct Summary {
        traces: usize,
        outcomes: BTreeMap<String, usize>,
        branches: BTreeMap<String, usize>,
    }
    let summary = Summary {
        traces: traces.len(),
        outcomes: by_outcome,
        branches: by_branch,
    };
    eprintln!(
        "{} traces: {} emergency, {} non-emergency",
        summary.traces,
        summary.outcomes.get("emergency").unwrap_or(&0),
        summary.outcomes.get("non-emergency").unwrap_or(&0)
    );
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_text(&dir.join("verdicts.jsonl"), &lines)?;
        write_text(&dir.join("summary.json"), &to_json(&summary))?;
        write_run_config(dir, "detect", args, cfg)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut impl Write) -> CliResult<()> {
    let def = load_def(&args.def)?;
    let cfg = SimConfig {
        seed: args.seed,
        subset_policy: match args.policy {
            Policy::All => SubsetPolicy::All,
            Policy::RandomN => SubsetPolicy::RandomN(args.n),
        },
        behavior_tail: args.tail.as_deref().map(parse_behavior).transpose()?,
        mismatch_rate: args.mismatch_rate,
        action_behavior: parse_behavior(&args.action_behavior)?,
    };
    let traces = generate(&def, &cfg)?;
    let mut text = traces_to_json(&traces);
    text.push('\n');
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            write_text(&dir.join("traces.json"), &text)?;
            write_run_config(dir, "simulate", args, &cfg)?;
            writeln!(
                out,
                "{} traces written to {}",
                traces.len(),
                dir.join("traces.json").display()
            )?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_kb(args: &KbArgs, out: &mut impl Write) -> CliResult<()> {
    let defs = args
        .defs
        .iter()
        .map(|p| load_def(p))
        .collect::<CliResult<Vec<_>>>()?;
    let mut text = KnowledgeBase::from_definitions(&defs).to_json();
    text.push('\n');
    match &args.out {
        Some(p) => write_text(p, &text),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn cmd_zones(args: &ZonesArgs, out: &mut impl Write) -> CliResult<()> {
    let records = load_csv(&args.data, &mapping(&args.columns)?)?;
    let mut text = zones_from_dataset(&records).to_json();
    text.push('\n');
    Ok(out.write_all(text.as_bytes())?)
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Enumerate(a) => cmd_enumerate(a, &mut out),
        Command::EvalBehavior(a) => cmd_eval(a, false, &mut out),
        Command::EvalEmergency(a) => cmd_eval(a, true, &mut out),
        Command::Detect(a) => cmd_detect(a, &mut out),
        Command::Simulate(a) => cmd_simulate(a, &mut out),
        Command::Kb(a) => cmd_kb(a, &mut out),
        Command::Zones(a) => cmd_zones(a, &mut out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(EXIT_IO)
        }
    }
}
