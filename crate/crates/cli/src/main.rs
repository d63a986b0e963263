//! `workr`: synthesize logs, build feature tables, evaluate models and run
//! ablation grids.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or configuration error.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use workr::features::{FeatureTable, GroupMask, CSV_SLOT_SECONDS};
use workr::harness::{
    ablation_grid, emit_table, summarize, ExperimentRunner, ModelKind, ResultRow, ResultTable,
};
use workr::ingest::{default_required_kinds, parse_annotations, parse_sensor_log};
use workr::pipeline::featurize;
use workr::synthgen::{default_profiles, describe, generate, load_profiles};
use workr::WorkrError;

use config::CliConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl From<WorkrError> for CliError {
    fn from(e: WorkrError) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "workr",
    version,
    about = "Occupation inference from smartphone sensor logs"
)]
struct Cli {
    /// Base random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reject malformed input lines and unknown app categories instead of skipping them
    #[arg(long, global = true)]
    strict: bool,
    /// Output path: a directory for `synth`, otherwise the file receiving the table or CSV instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format
    #[arg(long, global = true, value_parser = ["markdown", "csv"])]
    format: Option<String>,
    /// JSON file with configuration overrides; explicit flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Echo the fully resolved configuration to stderr
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic sensor and annotation logs
    Synth(SynthArgs),
    /// Turn sensor and annotation logs into an unnormalized feature CSV
    Featurize(FeaturizeArgs),
    /// Evaluate one feature/latent configuration
    Evaluate(EvaluateArgs),
    /// Run an ablation grid
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Users per occupation class
    #[arg(long, alias = "users")]
    users_per_class: Option<usize>,
    /// Days of data per user
    #[arg(long)]
    days: Option<usize>,
    /// JSON array of occupation profiles replacing the built-in ones
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Print the profile table instead of generating
    #[arg(long)]
    describe: bool,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    sensors: PathBuf,
    annotations: PathBuf,
    /// Window length in seconds
    #[arg(long)]
    slot_len: Option<i64>,
    /// Window stride in seconds
    #[arg(long)]
    stride: Option<i64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    features_csv: PathBuf,
    #[arg(long, value_parser = ["gbm", "nb"])]
    model: Option<String>,
    /// Preprocessed feature groups, letters of PAST or `none`
    #[arg(long)]
    features: Option<String>,
    /// Feature groups encoded by the VAE, letters of PAST or `none`
    #[arg(long)]
    latent: Option<String>,
    /// Runs with seeds seed, seed+1, ...
    #[arg(long)]
    repeats: Option<usize>,
    /// Directory receiving the model, VAE and normalizer of the first run
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Record the wall-clock time in the table metadata
    #[arg(long)]
    timestamp: bool,
}

#[derive(Args, Debug)]
struct AblateArgs {
    features_csv: PathBuf,
    #[arg(long, value_parser = ["preprocessed", "latent"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["gbm", "nb"])]
    model: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Record the wall-clock time in the table metadata
    #[arg(long)]
    timestamp: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", path.display())))
}

fn parse_mask(s: &str) -> Result<Option<GroupMask>, CliError> {
    if s.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        Ok(Some(s.parse()?))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = CliConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.strict {
        cfg.strict = true;
    }
    if let Some(f) = &cli.format {
        cfg.format = f.parse()?;
    }
    let command_name;
    match &cli.command {
        Command::Synth(a) => {
            command_name = "synth";
            if let Some(n) = a.users_per_class {
                cfg.synth.n_users_per_class = n;
            }
            if let Some(d) = a.days {
                cfg.synth.days = d;
            }
            if let Some(p) = &a.profiles {
                cfg.profiles = Some(load_profiles(open(p)?)?);
            }
        }
        Command::Featurize(a) => {
            command_name = "featurize";
            if let Some(v) = a.slot_len {
                cfg.window.slot_len = v;
            }
            if let Some(v) = a.stride {
                cfg.window.stride = v;
            }
        }
        Command::Evaluate(a) => {
            command_name = "evaluate";
            if let Some(m) = &a.model {
                cfg.model = m.parse()?;
            }
            if let Some(f) = &a.features {
                cfg.features = f.clone();
            }
            if let Some(l) = &a.latent {
                cfg.latent = l.clone();
            }
            if let Some(r) = a.repeats {
                cfg.repeats = r;
            }
            cfg.timestamp |= a.timestamp;
        }
        Command::Ablate(a) => {
            command_name = "ablate";
            if let Some(m) = &a.mode {
                cfg.mode = m.parse()?;
            }
            if let Some(m) = &a.model {
                cfg.model = m.parse()?;
            }
            if let Some(r) = a.repeats {
                cfg.repeats = r;
            }
            cfg.timestamp |= a.timestamp;
        }
    }
    cfg.resolve()?;
    if cli.verbose {
        let echo = json!({ "command": command_name, "out": cli.out, "config": &cfg });
        eprintln!(
            "{}",
            serde_json::to_string_pretty(&echo).expect("config serializes")
        );
    }

    match cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a.describe, cli.out.as_deref()),
        Command::Featurize(a) => {
            cmd_featurize(&cfg, &a.sensors, &a.annotations, cli.out.as_deref())
        }
        Command::Evaluate(a) => cmd_evaluate(
            &cfg,
            &a.features_csv,
            a.model_out.as_deref(),
            cli.out.as_deref(),
        ),
        Command::Ablate(a) => cmd_ablate(&cfg, &a.features_csv, cli.out.as_deref()),
    }
}

fn cmd_synth(cfg: &CliConfig, describe_only: bool, out: Option<&Path>) -> Result<(), CliError> {
    let profiles = cfg.profiles.clone().unwrap_or_else(default_profiles);
    if describe_only {
        return write_text(&describe(&profiles), out);
    }
    let data = generate(&profiles, &cfg.synth)?;
    let dir = out.unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let sensors = dir.join("sensors.jsonl");
    let annotations = dir.join("annotations.jsonl");
    data.write_jsonl(create(&sensors)?, create(&annotations)?)?;
    let users = profiles.len() * cfg.synth.n_users_per_class;
    println!(
        "users: {users}\nrecords_written: {}\nannotations_written: {}\nsensors: {}\nannotations: {}",
        data.records.len(),
        data.annotations.len(),
        sensors.display(),
        annotations.display()
    );
    Ok(())
}

fn cmd_featurize(
    cfg: &CliConfig,
    sensors: &Path,
    annotations: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let sensor_reader = open(sensors)?;
    let annotation_reader = open(annotations)?;
    let (records, mut report) = parse_sensor_log(sensor_reader, cfg.strict)?;
    let (anns, ann_report) = parse_annotations(annotation_reader, cfg.strict)?;
    let table = featurize(
        &records,
        &anns,
        cfg.window,
        &default_required_kinds(),
        cfg.strict,
        &mut report,
    )?;
    match out {
        Some(path) => table.write_csv(create(path)?)?,
        None => table.write_csv(std::io::stdout().lock())?,
    }
    eprintln!(
        "records_read: {}\nrecords_rejected: {}\nannotations_read: {}\nannotations_rejected: {}\n\
         windows_built: {}\nwindows_labeled: {}\nwindows_dropped_missing: {}\nrows_written: {}",
        report.records_read,
        report.records_rejected,
        ann_report.records_read,
        ann_report.records_rejected,
        report.windows_built,
        report.windows_labeled,
        report.windows_dropped_missing,
        table.rows.len()
    );
    Ok(())
}

fn read_table(path: &Path) -> Result<FeatureTable, CliError> {
    Ok(FeatureTable::read_csv(open(path)?, CSV_SLOT_SECONDS)?)
}

fn table_for(cfg: &CliConfig) -> ResultTable {
    let mut t = ResultTable::new(&cfg.experiment);
    if cfg.timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        t.metadata.timestamp = Some(format!("unix:{secs}"));
    }
    t
}

fn cmd_evaluate(
    cfg: &CliConfig,
    features_csv: &Path,
    model_out: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let features = parse_mask(&cfg.features)?;
    let latent = parse_mask(&cfg.latent)?;
    if features.is_none() && latent.is_none() {
        return Err(usage("--features and --latent cannot both be none"));
    }
    let table = read_table(features_csv)?;
    let mut runner = ExperimentRunner::new(&table, cfg.experiment.clone())?;
    let mut runs = Vec::new();
    for (i, seed) in cfg.experiment.seeds.iter().enumerate() {
        let fitted = runner.fit(features, latent, cfg.model, *seed)?;
        if i == 0 {
            if let Some(dir) = model_out {
                std::fs::create_dir_all(dir)?;
                let name = match cfg.model {
                    ModelKind::Gbm => "gbm.json",
                    ModelKind::Nb => "nb.json",
                };
                fitted.model.save(create(&dir.join(name))?)?;
                if let Some(vae) = &fitted.vae {
                    vae.save(create(&dir.join("vae.json"))?)?;
                }
                let mut w = create(&dir.join("normalizer.json"))?;
                serde_json::to_writer(&mut w, runner.normalizer())
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                w.flush()?;
            }
        }
        runs.push(fitted.metrics);
    }
    let mut result = table_for(cfg);
    result.rows.push(ResultRow {
        features,
        latent,
        model: cfg.model,
        summary: summarize(&runs)?,
    });
    write_text(&emit_table(&result, cfg.format), out)
}

fn cmd_ablate(cfg: &CliConfig, features_csv: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let table = read_table(features_csv)?;
    let mut result = ablation_grid(&table, cfg.mode, cfg.model, &cfg.experiment)?;
    result.metadata.timestamp = table_for(cfg).metadata.timestamp;
    write_text(&emit_table(&result, cfg.format), out)
}

fn write_text(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
