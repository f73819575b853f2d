use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde::Serialize;

use kinmetric_core::cohort::{CohortReport, Dimension};
use kinmetric_core::ingest::{
    self, baseline_records, load_bundle_with, pair_records, ranking_records, read_bundle,
    write_bundle, write_ground_truth, write_records, write_report, write_scores, Format,
    IngestError,
};
use kinmetric_core::model::{DatasetBundle, ObservationScalars};
use kinmetric_core::pipeline::{analyze, Analysis};
use kinmetric_core::synthgen::{detection_power, generate, SynthConfig, SynthError};

#[derive(Parser)]
#[command(name = "kinmetric", version, about = "Research productivity, percentile ranking and surname-link cohort analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Only log errors.
    #[arg(long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log progress as well as warnings.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset directory and list every violation.
    Validate(ValidateArgs),
    /// Write citation baselines and productivity scorecards.
    Score(RunArgs),
    /// Write scorecards and within-cohort percentile ranks.
    Rank(RunArgs),
    /// Write detected child/parent pairs.
    Detect(RunArgs),
    /// Write the overall children-vs-controls table.
    Compare(RunArgs),
    /// Run the whole chain and write all six tables and the pairs.
    Report(RunArgs),
    /// Generate a synthetic dataset with planted pairs.
    Synth(SynthArgs),
    /// Estimate recall and false-positive rate of pair detection.
    Power(PowerArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset directory.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Scalar configuration file replacing the directory's config.toml.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Where to write metadata.json, if anywhere.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset directory.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Scalar configuration file replacing the directory's config.toml.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output format for tables and records.
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the generated dataset.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Generator configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PowerArgs {
    /// Output directory for power.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Generator configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    replications: u64,
}

#[derive(Debug)]
enum CliError {
    Ingest(IngestError),
    Synth(SynthError),
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Ingest(e) => e.fmt(f),
            CliError::Synth(e) => e.fmt(f),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Ingest(e)
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Synth(e)
    }
}

#[derive(Serialize)]
struct Timestamps {
    census_date: String,
    window_start: i32,
    window_end: i32,
    entry_start: i32,
    entry_end: i32,
}

impl Timestamps {
    fn of(s: &ObservationScalars) -> Self {
        Timestamps {
            census_date: s.census_date.clone(),
            window_start: s.window_start,
            window_end: s.window_end,
            entry_start: s.entry_start,
            entry_end: s.entry_end,
        }
    }
}

#[derive(Serialize)]
struct Metadata<C: Serialize> {
    version: &'static str,
    command: &'static str,
    config_echo: C,
    timestamps: Timestamps,
    skipped_publications: usize,
    warnings: Vec<String>,
}

fn write_metadata<C: Serialize>(
    out: &Path,
    command: &'static str,
    config_echo: C,
    scalars: &ObservationScalars,
    skipped_publications: usize,
    warnings: Vec<String>,
) -> Result<(), CliError> {
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_echo,
        timestamps: Timestamps::of(scalars),
        skipped_publications,
        warnings,
    };
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    let path = out.join("metadata.json");
    fs::write(&path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn prepare_out(input: Option<&Path>, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    if let Some(input) = input {
        let same = fs::canonicalize(input).ok() == fs::canonicalize(out).ok();
        if same {
            return Err(CliError::Other("output directory must differ from the input directory".into()));
        }
    }
    Ok(())
}

fn load(input: &Path, config: Option<&Path>) -> Result<DatasetBundle, CliError> {
    let bundle = load_bundle_with(input, config)?;
    info!(
        "loaded {} researchers and {} publications",
        bundle.researchers.len(),
        bundle.publications.len()
    );
    Ok(bundle)
}

fn warnings(analysis: &Analysis, reports: &[CohortReport]) -> Vec<String> {
    let mut w: Vec<String> = analysis
        .scoring
        .skipped_publications
        .iter()
        .map(|id| format!("publication `{id}` skipped: no cited baseline in any of its categories"))
        .collect();
    if !analysis.ranking.unranked.is_empty() {
        w.push(format!(
            "{} eligible researchers have no rank at the end of the window",
            analysis.ranking.unranked.len()
        ));
    }
    for r in reports {
        for note in r.notes.iter().filter(|n| n.contains("not tested") || n.contains("dropped")) {
            w.push(format!("{}: {note}", r.dimension.table_name()));
        }
    }
    w
}

fn file(out: &Path, stem: &str, format: Format) -> PathBuf {
    out.join(format!("{stem}.{}", format.extension()))
}

fn run_validate(args: &ValidateArgs) -> Result<bool, CliError> {
    let bundle = read_bundle(&args.input, args.config.as_deref())?;
    let report = bundle.validate();
    print!("{report}");
    if let Some(out) = &args.out {
        prepare_out(Some(&args.input), out)?;
        let warnings = report.violations.iter().map(ToString::to_string).collect();
        write_metadata(out, "validate", &bundle.config.scalars, &bundle.config.scalars, 0, warnings)?;
    }
    Ok(report.is_valid())
}

fn run_pipeline(name: &'static str, args: &RunArgs) -> Result<(), CliError> {
    prepare_out(Some(&args.input), &args.out)?;
    let bundle = load(&args.input, args.config.as_deref())?;
    let analysis = analyze(&bundle);
    let (out, format) = (args.out.as_path(), args.format);
    let mut reports = Vec::new();
    match name {
        "score" => {
            write_records(&file(out, "baselines", format), &baseline_records(&analysis.baseline), format)?;
            write_scores(&file(out, "scores", format), &analysis.scoring.cards, format)?;
            println!("scored {} researchers", analysis.scoring.cards.len());
        }
        "rank" => {
            write_scores(&file(out, "scores", format), &analysis.scoring.cards, format)?;
            write_records(&file(out, "rankings", format), &ranking_records(&analysis.ranking), format)?;
            println!(
                "ranked {} researchers in {} eligible fields",
                analysis.ranking.scores.len(),
                analysis.ranking.eligible_sds.len()
            );
        }
        "detect" => {
            write_records(&file(out, "pairs", format), &pair_records(&analysis.detection.pairs), format)?;
            println!(
                "{} links, {} pairs",
                analysis.detection.links.len(),
                analysis.detection.pairs.len()
            );
        }
        "compare" | "report" => {
            let dims: &[Dimension] = if name == "compare" { &[Dimension::Overall] } else { &Dimension::ALL };
            for &d in dims {
                let report = analysis.report(&bundle, d);
                write_report(&report, &file(out, d.table_name(), format), format)?;
                reports.push(report);
            }
            if name == "report" {
                write_records(&file(out, "pairs", format), &pair_records(&analysis.detection.pairs), format)?;
            }
            println!("wrote {} tables to {}", reports.len(), out.display());
        }
        _ => unreachable!("pipeline commands are fixed"),
    }
    write_metadata(
        out,
        name,
        &bundle.config.scalars,
        &bundle.config.scalars,
        analysis.scoring.skipped_publications.len(),
        warnings(&analysis, &reports),
    )
}

fn synth_config(path: Option<&Path>, seed: Option<u64>) -> Result<SynthConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let raw = fs::read_to_string(p).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?;
            toml::from_str(&raw).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let cfg = synth_config(args.config.as_deref(), args.seed)?;
    prepare_out(None, &args.out)?;
    let (bundle, truth) = generate(&cfg)?;
    write_bundle(&bundle, &args.out)?;
    write_ground_truth(&args.out.join(ingest::GROUND_TRUTH), &truth.id_pairs())?;
    write_metadata(&args.out, "synth", &cfg, &cfg.observation, 0, Vec::new())?;
    println!(
        "generated {} researchers, {} publications, {} planted pairs",
        bundle.researchers.len(),
        bundle.publications.len(),
        truth.pairs.len()
    );
    Ok(())
}

fn run_power(args: &PowerArgs) -> Result<(), CliError> {
    let cfg = synth_config(args.config.as_deref(), args.seed)?;
    prepare_out(None, &args.out)?;
    let summary = detection_power(&cfg, args.replications as usize)?;
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    let path = args.out.join("power.json");
    fs::write(&path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    write_metadata(&args.out, "power", &cfg, &cfg.observation, 0, Vec::new())?;
    let recall = summary.recall.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
    println!(
        "replications {}: recall {recall}, false-positive rate {:.4}",
        summary.replications, summary.false_positive_rate
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let result = match &cli.command {
        Command::Validate(args) => run_validate(args).map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }),
        Command::Score(args) => run_pipeline("score", args).map(|_| ExitCode::SUCCESS),
        Command::Rank(args) => run_pipeline("rank", args).map(|_| ExitCode::SUCCESS),
        Command::Detect(args) => run_pipeline("detect", args).map(|_| ExitCode::SUCCESS),
        Command::Compare(args) => run_pipeline("compare", args).map(|_| ExitCode::SUCCESS),
        Command::Report(args) => run_pipeline("report", args).map(|_| ExitCode::SUCCESS),
        Command::Synth(args) => run_synth(args).map(|_| ExitCode::SUCCESS),
        Command::Power(args) => run_power(args).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Ingest(IngestError::Validation(report))) => {
            error!("dataset failed validation");
            eprint!("{report}");
            ExitCode::from(1)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
