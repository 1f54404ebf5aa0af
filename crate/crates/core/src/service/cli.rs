//! `vismodel serve | fit | check`.
//!
//! Exit status is 0 on success and 2 on any engine error, with the
//! [`ApiError`] JSON written to stderr.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::{router, run_check, ApiError, PipelineRequest, SessionState};
use crate::chart::ChartSpec;
use crate::dataset::{load_csv_with, Dataset, LoadOptions, DEFAULT_DISCRETE_THRESHOLD};
use crate::error::{Error, Result};
use crate::family::FamilyKind;
use crate::fit::{coefficient_table, fit_model, Coefficient, FittedModel};
use crate::formula::{describe_model, ModelSpec};
use crate::predict::DEFAULT_DRAWS;

pub const PORT_ENV: &str = "VISMODEL_PORT";
pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, Parser)]
#[command(name = "vismodel", version, about = "Visual model checks for tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Fit one model and write it as JSON.
    Fit(FitArgs),
    /// Fit models, draw predictions, and write a check layout.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of CSV files preloaded with their file stem as id.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Seed for sampling requests that do not name one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Numeric columns with at most this many distinct values are discrete.
    #[arg(long, default_value_t = DEFAULT_DISCRETE_THRESHOLD)]
    pub discrete_threshold: usize,
    /// Filters and transforms as JSON `{"filters": [...], "transforms": [...]}` (file or inline).
    #[arg(long)]
    pub pipeline: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub location: String,
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub label: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Chart spec JSON (file or inline), e.g. `{"x": "study_time", "y": "absences"}`.
    #[arg(long)]
    pub chart: String,
    /// JSON array of `{label, family, location, scale}` (file or inline).
    #[arg(long, default_value = "[]")]
    pub models: String,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving layout.json, predictions.csv and models.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// One model entry of `check --models`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub label: String,
    pub family: String,
    pub location: String,
    #[serde(default)]
    pub scale: Option<String>,
}

impl ModelEntry {
    pub fn spec(&self) -> Result<ModelSpec> {
        let family: FamilyKind = self.family.parse()?;
        ModelSpec::parse(family, &self.location, self.scale.as_deref(), self.label.clone())
    }
}

/// FittedModel JSON with the natural-language description and, for converged
/// fits, the coefficient table.
#[derive(Debug, Serialize)]
pub struct FitOutput<'a> {
    #[serde(flatten)]
    pub model: &'a FittedModel,
    pub description: Vec<String>,
    pub coefficients: Option<Vec<Coefficient>>,
}

#[derive(Debug, Serialize)]
struct ModelSummary<'a> {
    label: &'a str,
    family: FamilyKind,
    location: String,
    scale: Option<String>,
    converged: bool,
    diagnostic: &'a Option<String>,
    log_lik: f64,
    iterations: usize,
    n_obs: usize,
    n_dropped: usize,
    description: Vec<String>,
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound {
            kind: "file",
            id: path.display().to_string(),
        },
        _ => Error::Internal(format!("{}: {e}", path.display())),
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Internal(format!("{}: {e}", path.display())))
}

/// JSON given inline or as a path to a file.
fn json_arg<T: for<'de> Deserialize<'de>>(what: &str, arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        arg.to_string()
    } else {
        read_file(Path::new(arg))?
    };
    serde_json::from_str(&text).map_err(|e| Error::Syntax {
        position: e.column(),
        message: format!("{what}: {e}"),
    })
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Internal(e.to_string()))
}

pub fn load_data(args: &DataArgs) -> Result<Dataset> {
    let text = read_file(&args.data)?;
    let name = args
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let d = load_csv_with(
        text.as_bytes(),
        &name,
        LoadOptions {
            discrete_threshold: args.discrete_threshold,
        },
    )?;
    match &args.pipeline {
        Some(p) => {
            let req: PipelineRequest = json_arg("pipeline", p)?;
            d.apply_pipeline(&req.filters, &req.transforms)
        }
        None => Ok(d),
    }
}

fn summary(m: &FittedModel) -> ModelSummary<'_> {
    ModelSummary {
        label: m.label(),
        family: m.spec.family,
        location: m.spec.location.to_string(),
        scale: m.spec.scale.as_ref().map(|s| s.to_string()),
        converged: m.converged,
        diagnostic: &m.diagnostic,
        log_lik: m.log_lik,
        iterations: m.iterations,
        n_obs: m.n_obs,
        n_dropped: m.n_dropped,
        description: describe_model(&m.spec),
    }
}

pub fn run_fit(args: &FitArgs) -> Result<String> {
    let d = load_data(&args.data)?;
    let family: FamilyKind = args.family.parse()?;
    let label = args.label.clone().unwrap_or_else(|| args.location.trim().to_string());
    let spec = ModelSpec::parse(family, &args.location, args.scale.as_deref(), label)?;
    let m = fit_model(&d, &spec)?;
    let out = FitOutput {
        model: &m,
        description: describe_model(&spec),
        coefficients: coefficient_table(&m).ok(),
    };
    let json = to_json(&out)?;
    if let Some(path) = &args.out {
        write_file(path, &json)?;
    }
    Ok(json)
}

/// Writes the check artifacts and returns a one-line summary per model.
pub fn run_check_command(args: &CheckArgs) -> Result<Vec<String>> {
    let d = load_data(&args.data)?;
    let chart: ChartSpec = json_arg("chart", &args.chart)?;
    let entries: Vec<ModelEntry> = json_arg("models", &args.models)?;
    let specs = entries.iter().map(ModelEntry::spec).collect::<Result<Vec<_>>>()?;
    let models = specs
        .iter()
        .map(|s| fit_model(&d, s))
        .collect::<Result<Vec<_>>>()?;
    let resp = run_check(&d, &models, &chart, args.draws, args.seed)?;

    fs::create_dir_all(&args.out)
        .map_err(|e| Error::Internal(format!("{}: {e}", args.out.display())))?;
    write_file(&args.out.join("layout.json"), to_json(&resp.layout)?)?;
    write_file(&args.out.join("predictions.csv"), resp.predictions.to_csv_string()?)?;
    let summaries: Vec<ModelSummary> = models.iter().map(summary).collect();
    write_file(&args.out.join("models.json"), to_json(&summaries)?)?;

    Ok(models
        .iter()
        .map(|m| {
            format!(
                "{}: converged={} log_lik={:.6} n_obs={}",
                m.label(),
                m.converged,
                m.log_lik,
                m.n_obs
            )
        })
        .collect())
}

fn load_data_dir(state: &SessionState, dir: &Path) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::NotFound {
        kind: "directory",
        id: format!("{}: {e}", dir.display()),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    for path in paths {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let text = read_file(&path)?;
        let d = load_csv_with(text.as_bytes(), &stem, LoadOptions::default())?;
        log::info!("loaded {} ({} rows) as `{stem}`", path.display(), d.n_rows());
        state.insert_dataset_as(stem, d);
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<()> {
    let state = SessionState::new(args.seed);
    if let Some(dir) = &args.data_dir {
        load_data_dir(&state, dir)?;
    }
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("address: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Internal(format!("bind {addr}: {e}")))?;
        log::info!("listening on http://{addr}");
        axum::serve(listener, router(Arc::new(state)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::Internal(e.to_string()))
    })
}

fn report(e: Error) -> i32 {
    let api = ApiError::from(e);
    eprintln!("{}", serde_json::to_string(&api).unwrap_or_else(|_| api.message.clone()));
    2
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Serve(a) => serve(a),
        Command::Fit(a) => run_fit(a).map(|json| {
            if a.out.is_none() {
                println!("{json}");
            }
        }),
        Command::Check(a) => run_check_command(a).map(|lines| {
            for l in lines {
                println!("{l}");
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}
