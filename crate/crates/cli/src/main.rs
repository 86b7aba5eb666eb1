//! `vrleak` — synthesize, ingest, privatize, and evaluate VR telemetry.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or experiment
//! specs, 3 for data errors (missing files, malformed CSV, empty datasets).

use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use vrleak_core::experiment::{
    build_standard_matrix, emit_report, run_experiment_with_scores, run_matrix, ExperimentSpec,
    ExperimentError, Report, ReportFormat,
};
use vrleak_core::io::{load_dataset, write_dataset, SchemaConfig};
use vrleak_core::metrics::{compute_roc, roc_to_csv, ScoreSet};
use vrleak_core::model::{filter_subjects, Dataset, ModelError};
use vrleak_core::privacy::{
    apply_privacy, estimate_anthropometrics, MechanismParams, PrivacyConfig, PrivacyError,
};
use vrleak_core::synth::{generate_population, GeneratorConfig, SynthError};

#[derive(Parser)]
#[command(name = "vrleak", version, about = "Cross-sensor privacy leakage evaluation for VR telemetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset and write it as canonical CSV.
    Synth {
        /// Generator config JSON; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load CSV telemetry through a column-mapping schema and write it in
    /// canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Column-mapping schema JSON (defaults to <input>/schema.json).
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a privacy configuration to every session and write the
    /// privatized dataset.
    Privatize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// PrivacyConfig JSON.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment spec or the standard 20-experiment matrix and
    /// write report.json and report.csv.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Named matrix to run ("standard").
        #[arg(long, conflicts_with = "spec")]
        matrix: Option<String>,
        /// Single ExperimentSpec JSON file.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Matrix seed (single specs carry their own).
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        folds: usize,
        /// Mechanism parameter JSON overriding the defaults for a matrix run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit an existing report.json in another format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the pooled ROC of one experiment as CSV (threshold,far,frr).
    Roc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Experiment id inside the standard matrix (e.g. E15).
        #[arg(long, conflicts_with = "spec")]
        experiment: Option<String>,
        /// Or an explicit ExperimentSpec JSON file.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Errors are split by exit code: configuration problems exit 2, data
/// problems exit 3.
enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) => m,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidSchema(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PrivacyError> for CliError {
    fn from(e: PrivacyError) -> Self {
        match e {
            PrivacyError::InvalidB(_)
            | PrivacyError::InvalidBounds(_)
            | PrivacyError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::ParityViolation(_)
            | ExperimentError::EmptySelection
            | ExperimentError::DuplicateExperimentId(_) => CliError::Config(e.to_string()),
            ExperimentError::Privacy(p) => p.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn read_json_config<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let body = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&body)
        .map_err(|e| CliError::Config(format!("invalid {what} {}: {e}", path.display())))
}

fn load_schema(input: &Path, schema: Option<&Path>) -> Result<SchemaConfig, CliError> {
    let path = match schema {
        Some(p) => p.to_path_buf(),
        None => {
            let fallback = input.join("schema.json");
            if !fallback.is_file() {
                return Err(CliError::Config(format!(
                    "no --schema given and {} does not exist",
                    fallback.display()
                )));
            }
            fallback
        }
    };
    let schema: SchemaConfig = read_json_config(&path, "schema")?;
    schema.validate().map_err(CliError::from)?;
    Ok(schema)
}

fn load_input(input: &Path, schema: Option<&Path>) -> Result<Dataset, CliError> {
    let schema = load_schema(input, schema)?;
    Ok(load_dataset(input, &schema)?)
}

fn spec_from_matrix(
    matrix: &str,
    seed: u64,
    params: &MechanismParams,
) -> Result<Vec<ExperimentSpec>, CliError> {
    match matrix {
        "standard" => Ok(build_standard_matrix(seed, params)),
        other => Err(CliError::Config(format!(
            "unknown matrix {other:?}; only \"standard\" is defined"
        ))),
    }
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Synth { config, seed, out } => {
            let mut cfg: GeneratorConfig = match config {
                Some(p) => read_json_config(&p, "generator config")?,
                None => GeneratorConfig::default(),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let dataset = generate_population(&cfg)?;
            write_dataset(&dataset, &out)?;
            println!(
                "wrote {} recordings ({} subjects) to {}",
                dataset.recordings.len(),
                dataset.subjects().len(),
                out.display()
            );
        }
        Command::Ingest { input, schema, out } => {
            let dataset = load_input(&input, schema.as_deref())?;
            write_dataset(&dataset, &out)?;
            println!(
                "ingested {} recordings ({} subjects) into {}",
                dataset.recordings.len(),
                dataset.subjects().len(),
                out.display()
            );
        }
        Command::Privatize { input, schema, config, seed, out } => {
            let dataset = load_input(&input, schema.as_deref())?;
            let mut cfg: PrivacyConfig = read_json_config(&config, "privacy config")?;
            cfg.params.validate()?;
            if let Some(s) = seed {
                cfg.noise_seed = s;
            }
            let mut privatized = Vec::with_capacity(dataset.recordings.len());
            for r in &dataset.recordings {
                let est = if cfg.motion_private {
                    let first = dataset.sessions_of(&r.subject_id)[0];
                    Some(estimate_anthropometrics(first, cfg.params.bounds_m)?)
                } else {
                    None
                };
                privatized.push(apply_privacy(r, &cfg, est.as_ref())?);
            }
            let privatized = Dataset { recordings: privatized };
            write_dataset(&privatized, &out)?;
            println!(
                "privatized {} recordings (gaze: {}, motion: {}) into {}",
                privatized.recordings.len(),
                cfg.gaze_private,
                cfg.motion_private,
                out.display()
            );
        }
        Command::Run { input, schema, matrix, spec, seed, folds, config, out } => {
            let dataset = load_input(&input, schema.as_deref())?;
            let dataset = filter_subjects(&dataset, 2, 15.0);
            if dataset.recordings.is_empty() {
                return Err(CliError::Data(
                    "no subjects remain after the inclusion rules".into(),
                ));
            }
            let params: MechanismParams = match config {
                Some(p) => read_json_config(&p, "mechanism params")?,
                None => MechanismParams::default(),
            };
            let specs = match (matrix, spec) {
                (Some(m), None) => spec_from_matrix(&m, seed, &params)?,
                (None, Some(p)) => vec![read_json_config::<ExperimentSpec>(&p, "experiment spec")?],
                _ => {
                    return Err(CliError::Config(
                        "pass exactly one of --matrix or --spec".into(),
                    ))
                }
            };
            let report = run_matrix(&dataset, &specs, folds)?;
            fs::create_dir_all(&out)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
            emit_report(&report, ReportFormat::Json, &out.join("report.json"))?;
            emit_report(&report, ReportFormat::Csv, &out.join("report.csv"))?;
            println!(
                "ran {} experiment(s) over {} subjects; report in {}",
                report.results.len(),
                report.dataset.subjects,
                out.display()
            );
        }
        Command::Report { input, format, out } => {
            let body = fs::read_to_string(&input)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", input.display())))?;
            let report: Report = serde_json::from_str(&body)
                .map_err(|e| CliError::Data(format!("invalid report {}: {e}", input.display())))?;
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            emit_report(&report, format, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Roc { input, schema, experiment, spec, seed, folds, out } => {
            let dataset = load_input(&input, schema.as_deref())?;
            let dataset = filter_subjects(&dataset, 2, 15.0);
            let spec = match (experiment, spec) {
                (Some(id), None) => {
                    let matrix = build_standard_matrix(seed, &MechanismParams::default());
                    matrix
                        .into_iter()
                        .find(|s| s.experiment_id == id)
                        .ok_or_else(|| {
                            CliError::Config(format!("{id:?} is not in the standard matrix"))
                        })?
                }
                (None, Some(p)) => read_json_config::<ExperimentSpec>(&p, "experiment spec")?,
                _ => {
                    return Err(CliError::Config(
                        "pass exactly one of --experiment or --spec".into(),
                    ))
                }
            };
            let (result, fold_scores) = run_experiment_with_scores(&dataset, &spec, folds)?;
            let mut pooled = ScoreSet::default();
            for fs in &fold_scores {
                pooled.genuine.extend(&fs.scores.genuine);
                pooled.impostor.extend(&fs.scores.impostor);
            }
            let roc = compute_roc(&pooled).map_err(|e| CliError::Data(e.to_string()))?;
            fs::write(&out, roc_to_csv(&roc))
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
            println!(
                "{}: EER {:.2}% ± {:.2}, Rank-1 IR {:.2}% ± {:.2}; ROC in {}",
                result.experiment_id,
                result.summary.eer_mean_pct,
                result.summary.eer_std_pct,
                result.summary.ir_mean_pct,
                result.summary.ir_std_pct,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
