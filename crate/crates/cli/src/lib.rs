//! `lineup` command line: run experiments, serve artifacts, write fixtures
//! and export CSV reports.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use lineup_core::compare::build_scatter_panel;
use lineup_core::data::synth_dataset;
use lineup_core::experiment::{load_artifact, run_experiment, save_artifact, DataSource};
use lineup_core::metrics::Metric;
use lineup_core::{ExperimentArtifact, ExperimentConfig, DEFAULT_THRESHOLD};
use lineup_server::AppState;

#[derive(Debug, Parser)]
#[command(name = "lineup", version, about = "Train a model grid and compare its members")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the full grid on a CSV file and save the artifact.
    Run(RunArgs),
    /// Serve one artifact, or a directory of artifacts, over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic CSV with a linear labelling rule.
    Synth(SynthArgs),
    /// Export metrics, quadrant counts and global importances as CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label: String,
    #[arg(long)]
    pub positive: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub hpo_budget: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns 0 on success, 2 on a usage error and 1 on any other failure.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("LINEUP_LOG", "info"))
        .format_timestamp(None)
        .try_init();
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(a) => run(a),
        Command::Serve(a) => serve(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    }
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::new(
        DataSource::Csv {
            path: a.data,
            label_column: a.label,
            positive_label: a.positive,
        },
        a.seed,
    );
    config.hpo_budget = a.hpo_budget;
    let artifact = run_experiment(&config)?;
    let manifest = save_artifact(&artifact, &a.out)?;
    log::info!("experiment {} written to {}", artifact.id, manifest.display());
    println!("{}", artifact.id);
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let state = AppState::load_dir(&a.artifact).with_context(|| format!("loading {}", a.artifact.display()))?;
    for exp in state.experiments() {
        log::info!("loaded {} ({} models)", exp.artifact.id, exp.artifact.models.len());
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(lineup_server::serve(Arc::new(state), SocketAddr::new(a.host, a.port)))?;
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let (ds, _) = synth_dataset(a.n, a.m, a.seed)?;
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    ds.raw().write_csv(std::io::BufWriter::new(file))?;
    log::info!("wrote {} rows to {}", a.n, a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let artifact = load_artifact(&a.artifact)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_metrics(&artifact, &a.out.join("metrics.csv"))?;
    write_quadrants(&artifact, &a.out.join("quadrant_counts.csv"))?;
    write_global_fi(&artifact, &a.out.join("global_fi.csv"))?;
    log::info!("report written to {}", a.out.display());
    Ok(())
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_metrics(artifact: &ExperimentArtifact, path: &Path) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["model_id".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    header.extend(["tp", "fp", "tn", "fn"].map(String::from));
    header.extend(Metric::ALL.iter().map(|m| format!("{}_rank", m.name())));
    w.write_record(&header)?;
    for (row, ranks) in artifact.metrics.rows.iter().zip(&artifact.metrics.ranks) {
        let mut rec = vec![row.model_id.clone()];
        rec.extend(Metric::ALL.iter().map(|m| opt(m.value(row))));
        rec.extend([row.tp, row.fp, row.tn, row.fn_].map(|c| c.to_string()));
        rec.extend(Metric::ALL.iter().map(|m| opt(ranks.get(*m))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Every unordered pair of models plus each model against itself.
fn write_quadrants(artifact: &ExperimentArtifact, path: &Path) -> anyhow::Result<()> {
    let labels = artifact.test_labels();
    let mut w = csv_writer(path)?;
    w.write_record(["x_model", "y_model", "q1", "q2", "q3", "q4"])?;
    let preds = &artifact.predictions;
    for (i, px) in preds.iter().enumerate() {
        for py in &preds[i..] {
            if px.instance_ids != py.instance_ids {
                bail!("{} and {} were scored on different rows", px.model_id, py.model_id);
            }
            let panel = build_scatter_panel(
                &px.model_id,
                &py.model_id,
                &px.instance_ids,
                &px.probabilities,
                &py.probabilities,
                &labels,
                DEFAULT_THRESHOLD,
            )?;
            let mut rec = vec![px.model_id.clone(), py.model_id.clone()];
            rec.extend(panel.quadrant_counts.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_global_fi(artifact: &ExperimentArtifact, path: &Path) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["model_id", "feature", "importance"])?;
    for v in &artifact.global_fi {
        for (name, value) in v.feature_names.iter().zip(&v.values) {
            w.write_record([v.model_id.as_str(), name, &value.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

