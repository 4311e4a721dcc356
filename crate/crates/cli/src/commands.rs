//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use lcic::metrics::{hellinger_sq_mc, DEFAULT_MC_REPEATS, DEFAULT_MC_SAMPLES, MIN_MC_SAMPLES};
use lcic::mixture::{assign_clusters, clustering_accuracy, em_fit, EmInit, EmOptions, MixtureModel};
use lcic::{fit_lcic, Density, Method, RngState, Sampler};
use serde::Serialize;

use crate::experiments::{default_features, run_experiment, ClusterSetup, ExperimentConfig, RowKind, Scenario};
use crate::io::{self, open_output};
use crate::model::DensitySpec;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

trait OrExit<T> {
    /// Bad input: exit code 2.
    fn usage(self) -> Result<T, Failure>;
    /// The computation itself failed: exit code 3.
    fn failed(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_USAGE,
            error: e.into(),
        })
    }
    fn failed(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_FAILURE,
            error: e.into(),
        })
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: lcic::Error| e.to_string())
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err("split ratio must lie in (0, 1)".into())
    }
}

fn parse_mc_samples(s: &str) -> Result<usize, String> {
    let k: usize = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if k >= MIN_MC_SAMPLES {
        Ok(k)
    } else {
        Err(format!("need at least {MIN_MC_SAMPLES} samples per repeat"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "lcic", version, about = "Log-concave independent components density estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an LC-IC estimate to a CSV sample and write it as JSON.
    Fit(FitArgs),
    /// Log-density of a model at each row of a CSV.
    Eval(EvalArgs),
    /// Draw samples from a fitted or ground-truth model.
    Sample(SampleArgs),
    /// Monte-Carlo squared Hellinger distance between two models.
    Hellinger(HellingerArgs),
    /// Run a seeded experiment grid and write a CSV report.
    Experiment(ExperimentArgs),
    /// Cluster a CSV with an EM mixture of LC-IC components.
    Cluster(ClusterArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Samples, one per row (`-` for stdin).
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fraction of the sample used for the unmixing matrix.
    #[arg(long, default_value_t = 0.5, value_parser = parse_ratio)]
    pub split_ratio: f64,
    /// pca, fourier or auto.
    #[arg(long, default_value = "auto", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip one header line.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub points: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub model: PathBuf,
    #[arg(short, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HellingerArgs {
    /// Model that is sampled from.
    pub a: PathBuf,
    pub b: PathBuf,
    /// Draws per repeat.
    #[arg(short = 'K', long = "samples", default_value_t = DEFAULT_MC_SAMPLES, value_parser = parse_mc_samples)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_MC_REPEATS as u64, value_parser = clap::value_parser!(u64).range(2..))]
    pub repeats: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub scenario: Scenario,
    /// Report CSV; timing and journal files are written next to it.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_ratio)]
    pub ratios: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(short = 'K', long = "samples", default_value_t = DEFAULT_MC_SAMPLES, value_parser = parse_mc_samples)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_MC_REPEATS)]
    pub repeats: usize,
    /// Dataset for the cluster scenario (`wdbc.data` layout).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Initial hard labels for the all-feature cluster run.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Feature names for the low-dimensional cluster run.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Keep cells already recorded in the journal.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Samples, one per row.
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Columns to use, by header name or 0-based index.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[arg(short, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 4)]
    pub resample_factor: usize,
    /// Initial hard labels, one per row; random initialization otherwise.
    #[arg(long)]
    pub init_labels: Option<PathBuf>,
    /// Ground-truth labels; adds the matched accuracy to the summary.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cluster label per row.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// JSON summary with weights, log-likelihood trace and accuracy.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Fitted mixture as JSON.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

fn write_text(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    let mut out = open_output(path).usage()?;
    out.write_all(text.as_bytes()).usage()?;
    out.flush().usage()
}

fn fit(a: FitArgs) -> Result<(), Failure> {
    let x = io::read_matrix(&a.input, a.header).usage()?;
    let est = fit_lcic(&x, a.split_ratio, a.method, &mut RngState::new(a.seed)).failed()?;
    write_text(a.output.as_ref(), &(est.to_json().failed()? + "\n"))
}

fn check_dims(expected: usize, found: usize) -> Result<(), Failure> {
    if expected == found {
        Ok(())
    } else {
        Err(lcic::Error::DimensionMismatch { expected, found }).usage()
    }
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let model = DensitySpec::load(&a.model).usage()?;
    let x = io::read_matrix(&a.points, a.header).usage()?;
    check_dims(model.dim(), x.ncols())?;
    let x = x.as_standard_layout();
    let values = lcic::par::map_range(x.nrows(), |i| model.log_density(x.row(i).as_slice().unwrap()));
    let mut out = open_output(a.output.as_ref()).usage()?;
    io::write_column(&mut out, &values).usage()?;
    out.flush().usage()
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    let model = DensitySpec::load(&a.model).usage()?;
    let x = model.sample(a.n as usize, &mut RngState::new(a.seed));
    let mut out = open_output(a.output.as_ref()).usage()?;
    io::write_matrix(&mut out, &x).usage()?;
    out.flush().usage()
}

fn hellinger(a: HellingerArgs) -> Result<(), Failure> {
    let p = DensitySpec::load(&a.a).usage()?;
    let q = DensitySpec::load(&a.b).usage()?;
    check_dims(p.dim(), q.dim())?;
    let est = hellinger_sq_mc(&p, &q, &p, a.k, a.repeats as usize, &mut RngState::new(a.seed)).failed()?;
    let text = serde_json::to_string_pretty(&est).failed()? + "\n";
    write_text(a.output.as_ref(), &text)
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::new(a.scenario, a.output);
    if let Some(v) = a.dims {
        cfg.dims = v;
    }
    if let Some(v) = a.sizes {
        cfg.sizes = v;
    }
    if let Some(v) = a.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = a.ratios {
        cfg.ratios = v;
    }
    if let Some(m) = a.method {
        cfg.method = m;
    }
    cfg.mc_samples = a.k;
    cfg.mc_repeats = a.repeats;
    cfg.resume = a.resume;
    if let Some(data) = a.data {
        cfg.cluster = Some(ClusterSetup {
            data,
            init_labels: a.labels,
            features: a.features.unwrap_or_else(default_features),
        });
    }
    cfg.validate().usage()?;
    let out = run_experiment(&cfg).failed()?;
    for rec in out.records.iter().filter(|r| r.kind == RowKind::Summary) {
        eprintln!(
            "{} d={} n={} r={} {}: {}",
            rec.method.as_deref().unwrap_or("-"),
            rec.d.map_or("-".into(), |v| v.to_string()),
            rec.n.map_or("-".into(), |v| v.to_string()),
            rec.r.map_or("-".into(), |v| v.to_string()),
            rec.metric,
            rec.value.map_or("-".into(), io::fmt_f64),
        );
    }
    eprintln!("report: {}\ntiming: {}", out.report.display(), out.timing.display());
    if out.failed_cells > 0 {
        return Err(anyhow!("{} cell(s) failed; see the status column", out.failed_cells)).failed();
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClusterSummary {
    k: usize,
    iters: usize,
    weights: Vec<f64>,
    log_likelihood: Vec<f64>,
    /// Rows outside every component's support in the last E-step.
    outside_support: usize,
    accuracy: Option<f64>,
}

fn pick_columns(table: io::Table, columns: Option<Vec<String>>) -> anyhow::Result<lcic::SampleMatrix> {
    let Some(columns) = columns else {
        return Ok(table.data);
    };
    let idx = columns
        .iter()
        .map(|c| {
            let by_name = table.header.as_ref().and_then(|h| h.iter().position(|n| n == c));
            by_name
                .or_else(|| c.parse::<usize>().ok().filter(|&i| i < table.data.ncols()))
                .ok_or_else(|| anyhow!("no column {c:?}"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(table.data.select(ndarray::Axis(1), &idx))
}

fn read_labels_for(path: &std::path::Path, n: usize) -> anyhow::Result<Vec<usize>> {
    let labels = io::read_labels(path)?;
    if labels.len() != n {
        anyhow::bail!("{}: {} labels for {n} rows", path.display(), labels.len());
    }
    Ok(labels)
}

fn cluster(a: ClusterArgs) -> Result<(), Failure> {
    let table = io::read_table(&a.data, a.header).usage()?;
    let x = pick_columns(table, a.columns).usage()?;
    let init = match &a.init_labels {
        Some(p) => EmInit::Labels(read_labels_for(p, x.nrows()).usage()?),
        None => EmInit::Random,
    };
    let truth = a.truth.as_ref().map(|p| read_labels_for(p, x.nrows())).transpose().usage()?;
    let opts = EmOptions {
        k: a.k,
        iters: a.iters,
        resample_factor: a.resample_factor,
        init,
        ..EmOptions::default()
    };
    let fit = em_fit(&x, &opts, &mut RngState::new(a.seed)).failed()?;
    let labels = assign_clusters(&fit.model, &x).failed()?;
    let accuracy = truth.map(|t| clustering_accuracy(&labels, &t)).transpose().failed()?;

    let mut out = open_output(a.output.as_ref()).usage()?;
    for l in &labels {
        writeln!(out, "{l}").usage()?;
    }
    out.flush().usage()?;
    if let Some(path) = &a.summary {
        let summary = ClusterSummary {
            k: a.k,
            iters: a.iters,
            weights: fit.model.weights.clone(),
            log_likelihood: fit.log_likelihood.clone(),
            outside_support: fit.responsibilities.outside.len(),
            accuracy,
        };
        write_text(Some(path), &(serde_json::to_string_pretty(&summary).failed()? + "\n"))?;
    }
    if let Some(path) = &a.model_out {
        let model: &MixtureModel = &fit.model;
        write_text(Some(path), &(serde_json::to_string_pretty(model).failed()? + "\n"))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit(a) => fit(a),
        Command::Eval(a) => eval(a),
        Command::Sample(a) => sample(a),
        Command::Hellinger(a) => hellinger(a),
        Command::Experiment(a) => experiment(a),
        Command::Cluster(a) => cluster(a),
    }
}

/// Caps the global worker pool at `LCIC_THREADS` when set.
fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("LCIC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("LCIC_THREADS={v:?} is not a positive integer"))
        .usage()?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().failed()?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults_are_parsed() {
        let cli = Cli::try_parse_from(["lcic", "fit", "x.csv"]).unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        assert_eq!((a.split_ratio, a.method, a.seed, a.header), (0.5, Method::Auto, 0, false));
        let cli = Cli::try_parse_from(["lcic", "hellinger", "a.json", "b.json"]).unwrap();
        let Command::Hellinger(a) = cli.command else { panic!() };
        assert_eq!((a.k, a.repeats), (10_000, 50));
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        for args in [
            vec!["lcic", "fit", "x.csv", "--split-ratio", "1.5"],
            vec!["lcic", "fit", "x.csv", "--method", "provided"],
            vec!["lcic", "sample", "m.json", "-n", "0"],
            vec!["lcic", "hellinger", "a", "b", "-K", "5"],
        ] {
            let err = Cli::try_parse_from(&args).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_USAGE, "{args:?}");
        }
    }

    #[test]
    fn columns_by_name_or_index() {
        let t = io::parse_table("a,b,c\n1,2,3\n4,5,6\n", true).unwrap();
        let x = pick_columns(t.clone(), Some(vec!["c".into(), "0".into()])).unwrap();
        assert_eq!(x, ndarray::array![[3.0, 1.0], [6.0, 4.0]]);
        assert!(pick_columns(t, Some(vec!["z".into()])).is_err());
    }
}
