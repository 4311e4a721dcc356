//! Seeded experiment grids with a deterministic CSV report, a separate
//! timing table and an append-only journal for resuming.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lcic::estimator::fit_lcic;
use lcic::metrics::{hellinger_sq_mc, kl_domination_suite, tv_domination_suite, DEFAULT_MC_REPEATS, DEFAULT_MC_SAMPLES};
use lcic::mixture::{assign_clusters, clustering_accuracy, em_fit, EmInit, EmOptions};
use lcic::rng::mix64;
use lcic::sim::{haar_orthogonal, sample_ground_truth};
use lcic::{GroundTruthModel, MarginalSpec, Method, OrthonormalFrame, RngState, SampleMatrix};
use serde::{Deserialize, Serialize};

use crate::io::read_labels;
use crate::wdbc::{Wdbc, DEFAULT_PAIR, FEATURES};

pub const KL_INSTANCES: usize = 100;
pub const TV_INSTANCES: usize = 50;
pub const PAIR_ITERS: usize = 20;
pub const FULL_ITERS: usize = 15;
/// Largest `d` for which `Diag(15, 14, …)` stays positive.
pub const MAX_GAUSSIAN_DIM: usize = 15;
/// Largest `d` for which `Gamma(6 − (i − 1), 1)` keeps shape ≥ 1.
pub const MAX_GAMMA_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    GaussianCompare,
    GammaCompare,
    SplitRatio,
    StabilityVerify,
    Cluster,
}

impl Scenario {
    fn primary_metric(self) -> &'static str {
        match self {
            Scenario::StabilityVerify => "violations",
            Scenario::Cluster => "accuracy",
            _ => "h2",
        }
    }
}

/// Inputs for the clustering scenario.
#[derive(Debug, Clone)]
pub struct ClusterSetup {
    /// `wdbc.data`-style file.
    pub data: PathBuf,
    /// Hard labels initializing the all-feature run; that run is skipped
    /// without them.
    pub init_labels: Option<PathBuf>,
    /// Columns of the low-dimensional run.
    pub features: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub ratios: Vec<f64>,
    pub method: Method,
    pub mc_samples: usize,
    pub mc_repeats: usize,
    pub output: PathBuf,
    pub cluster: Option<ClusterSetup>,
    /// Reuse cells already present in the journal.
    pub resume: bool,
}

impl ExperimentConfig {
    /// The published grid for each scenario.
    pub fn new(scenario: Scenario, output: PathBuf) -> Self {
        let (dims, sizes, ratios) = match scenario {
            Scenario::SplitRatio => (
                vec![2, 3, 4, 5, 6, 7, 8, 9, 10, 15],
                vec![2000],
                (1..=9).map(|i| i as f64 / 10.0).collect(),
            ),
            _ => (vec![2, 3, 4], vec![100, 500, 1000, 2000, 3000], vec![0.5]),
        };
        let seeds = match scenario {
            Scenario::StabilityVerify => vec![0],
            _ => (0..5).collect(),
        };
        Self {
            scenario,
            dims,
            sizes,
            seeds,
            ratios,
            method: Method::Pca,
            mc_samples: DEFAULT_MC_SAMPLES,
            mc_repeats: DEFAULT_MC_REPEATS,
            output,
            cluster: None,
            resume: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seed list is empty");
        }
        if self.mc_samples < lcic::metrics::MIN_MC_SAMPLES || self.mc_repeats < 2 {
            bail!("need K >= {} and repeats >= 2", lcic::metrics::MIN_MC_SAMPLES);
        }
        match self.scenario {
            Scenario::GaussianCompare | Scenario::GammaCompare | Scenario::SplitRatio => {
                if self.dims.is_empty() || self.sizes.is_empty() || self.ratios.is_empty() {
                    bail!("dims, sizes and ratios must be non-empty");
                }
                if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
                    bail!("split ratio {r} outside (0, 1)");
                }
                let max = if self.scenario == Scenario::GammaCompare {
                    MAX_GAMMA_DIM
                } else {
                    MAX_GAUSSIAN_DIM
                };
                if let Some(d) = self.dims.iter().find(|d| **d == 0 || **d > max) {
                    bail!("dimension {d} outside 1..={max} for this scenario");
                }
            }
            Scenario::StabilityVerify => {}
            Scenario::Cluster => {
                let setup = self.cluster.as_ref().context("cluster scenario needs --data")?;
                if setup.features.is_empty() || setup.features.len() >= FEATURES.len() {
                    bail!("feature list must name between 1 and {} columns", FEATURES.len() - 1);
                }
            }
        }
        Ok(())
    }
}

/// One grid point. Fields that do not apply to a scenario are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: Scenario,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub seed: u64,
}

impl Cell {
    fn sort_key(&self) -> (Scenario, usize, usize, u64, u64) {
        (
            self.scenario,
            self.d.unwrap_or(0),
            self.n.unwrap_or(0),
            self.r.map_or(0, f64::to_bits),
            self.seed,
        )
    }

    pub fn id(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        format!(
            "{}/d={}/n={}/r={}/seed={}",
            serde_json::to_value(self.scenario).unwrap().as_str().unwrap(),
            opt(self.d.map(|v| v.to_string())),
            opt(self.n.map(|v| v.to_string())),
            opt(self.r.map(|v| format!("{v:?}"))),
            self.seed
        )
    }

    fn key_hash(&self, with_ratio: bool) -> u64 {
        let mut h = mix64(self.scenario as u64 + 1);
        let r = if with_ratio { self.r.map_or(0, f64::to_bits) } else { 0 };
        for part in [self.d.unwrap_or(0) as u64, self.n.unwrap_or(0) as u64, r] {
            h = mix64(h ^ part);
        }
        h
    }

    /// Data stream, shared by all split ratios of the same `(d, n, seed)` so
    /// ratios are compared on identical samples.
    fn data_rng(&self) -> RngState {
        RngState::from_seed_stream(self.seed, self.key_hash(false))
    }

    fn fit_rng(&self) -> RngState {
        RngState::from_seed_stream(self.seed, self.key_hash(true) ^ 0x5EED)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Cell,
    Summary,
}

/// One report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub kind: RowKind,
    pub scenario: Scenario,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub metric: String,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub status: String,
    pub detail: String,
}

impl Record {
    fn cell(cell: &Cell, metric: &str, value: f64, std_error: Option<f64>, method: Option<String>) -> Self {
        Self {
            kind: RowKind::Cell,
            scenario: cell.scenario,
            d: cell.d,
            n: cell.n,
            r: cell.r,
            seed: Some(cell.seed),
            method,
            metric: metric.into(),
            value: Some(value),
            std_error,
            status: "ok".into(),
            detail: String::new(),
        }
    }

    fn failed(cell: &Cell, error: &anyhow::Error) -> Self {
        Self {
            value: None,
            status: "failed".into(),
            detail: format!("{error:#}"),
            ..Self::cell(cell, cell.scenario.primary_metric(), 0.0, None, None)
        }
    }

    fn summary(scenario: Scenario, d: Option<usize>, n: Option<usize>, r: Option<f64>, metric: &str, value: f64, se: Option<f64>) -> Self {
        Self {
            kind: RowKind::Summary,
            scenario,
            d,
            n,
            r,
            seed: None,
            method: None,
            metric: metric.into(),
            value: Some(value),
            std_error: se,
            status: "ok".into(),
            detail: String::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Journal line: everything a finished cell produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    cell: Cell,
    records: Vec<Record>,
    wall_seconds: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TimingRow {
    scenario: Scenario,
    d: Option<usize>,
    n: Option<usize>,
    r: Option<f64>,
    seed: u64,
    wall_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<Record>,
    pub failed_cells: usize,
    pub report: PathBuf,
    pub timing: PathBuf,
    pub journal: PathBuf,
}

impl ExperimentOutcome {
    pub fn summary(&self, metric: &str) -> Vec<&Record> {
        self.records
            .iter()
            .filter(|r| r.kind == RowKind::Summary && r.metric == metric)
            .collect()
    }
}

/// `report.csv` → `report.<suffix>` next to it.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Data loaded once for the clustering scenario.
struct ClusterInputs {
    pair: SampleMatrix,
    full: SampleMatrix,
    init: Option<Vec<usize>>,
    truth: Vec<usize>,
}

fn load_cluster(setup: &ClusterSetup) -> Result<ClusterInputs> {
    let data = Wdbc::load(&setup.data)?;
    let init = match &setup.init_labels {
        Some(p) => {
            let labels = read_labels(p)?;
            if labels.len() != data.len() {
                bail!("{} labels for {} records", labels.len(), data.len());
            }
            Some(labels)
        }
        None => None,
    };
    Ok(ClusterInputs {
        pair: data.select(&setup.features)?,
        full: data.features.clone(),
        init,
        truth: data.diagnosis,
    })
}

pub fn default_features() -> Vec<String> {
    DEFAULT_PAIR.iter().map(|s| s.to_string()).collect()
}

fn cells(cfg: &ExperimentConfig, cluster: Option<&ClusterInputs>) -> Vec<Cell> {
    let mut out = Vec::new();
    match cfg.scenario {
        Scenario::StabilityVerify => {
            for &seed in &cfg.seeds {
                out.push(Cell {
                    scenario: cfg.scenario,
                    d: None,
                    n: None,
                    r: None,
                    seed,
                });
            }
        }
        Scenario::Cluster => {
            let c = cluster.expect("cluster inputs loaded");
            let mut runs = vec![c.pair.ncols()];
            if c.init.is_some() {
                runs.push(c.full.ncols());
            }
            for d in runs {
                for &seed in &cfg.seeds {
                    out.push(Cell {
                        scenario: cfg.scenario,
                        d: Some(d),
                        n: Some(c.truth.len()),
                        r: None,
                        seed,
                    });
                }
            }
        }
        _ => {
            for &d in &cfg.dims {
                for &n in &cfg.sizes {
                    for &r in &cfg.ratios {
                        for &seed in &cfg.seeds {
                            out.push(Cell {
                                scenario: cfg.scenario,
                                d: Some(d),
                                n: Some(n),
                                r: Some(r),
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Ground truth of the simulated scenarios.
pub fn truth_model(scenario: Scenario, d: usize, rng: &mut RngState) -> Result<GroundTruthModel> {
    Ok(match scenario {
        Scenario::GammaCompare => {
            let marginals = (0..d)
                .map(|i| MarginalSpec::gamma(6.0 - i as f64, 1.0, false))
                .collect::<lcic::Result<Vec<_>>>()?;
            GroundTruthModel::new(vec![0.0; d], OrthonormalFrame::identity(d), marginals)?
        }
        _ => {
            let variances: Vec<f64> = (0..d).map(|i| 15.0 - i as f64).collect();
            GroundTruthModel::gaussian(&variances, haar_orthogonal(d, rng))?
        }
    })
}

type CellOutput = (Vec<Record>, Option<f64>);

fn density_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellOutput> {
    let (d, n, r) = (cell.d.unwrap(), cell.n.unwrap(), cell.r.unwrap());
    let mut data_rng = cell.data_rng();
    let truth = truth_model(cell.scenario, d, &mut data_rng)?;
    let x = sample_ground_truth(&truth, n, &mut data_rng);
    let mut rng = cell.fit_rng();
    let start = Instant::now();
    let est = fit_lcic(&x, r, cfg.method, &mut rng)?;
    let wall = start.elapsed().as_secs_f64();
    let h = hellinger_sq_mc(&truth, &est, &truth, cfg.mc_samples, cfg.mc_repeats, &mut rng)?;
    let rec = Record::cell(cell, "h2", h.value, Some(h.std_error), Some(est.method.to_string()));
    Ok((vec![rec], Some(wall)))
}

fn stability_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellOutput> {
    let mut rng = cell.fit_rng();
    let start = Instant::now();
    let kl = kl_domination_suite(KL_INSTANCES, &mut rng)?;
    let tv = tv_domination_suite(TV_INSTANCES, cfg.mc_samples, cfg.mc_repeats, &mut rng)?;
    let wall = start.elapsed().as_secs_f64();
    let mut out = Vec::new();
    for (name, rep) in [("kl", &kl), ("tv", &tv)] {
        let with_n = |mut r: Record| {
            r.n = Some(rep.instances);
            r.method = Some(name.into());
            r
        };
        out.push(with_n(Record::cell(cell, "violations", rep.violations as f64, None, None)));
        out.push(with_n(Record::cell(cell, "worst_ratio", rep.worst_ratio, None, None)));
    }
    Ok((out, Some(wall)))
}

fn cluster_cell(inputs: &ClusterInputs, cell: &Cell) -> Result<CellOutput> {
    let full = cell.d == Some(inputs.full.ncols());
    let (x, init, iters) = if full {
        (&inputs.full, EmInit::Labels(inputs.init.clone().unwrap()), FULL_ITERS)
    } else {
        (&inputs.pair, EmInit::Random, PAIR_ITERS)
    };
    let opts = EmOptions {
        k: 2,
        iters,
        init,
        method: Method::Pca,
        ..EmOptions::default()
    };
    let mut rng = cell.fit_rng();
    let start = Instant::now();
    let fit = em_fit(x, &opts, &mut rng)?;
    let wall = start.elapsed().as_secs_f64();
    let labels = assign_clusters(&fit.model, x)?;
    let acc = clustering_accuracy(&labels, &inputs.truth)?;
    let ll = *fit.log_likelihood.last().unwrap_or(&f64::NAN);
    let method = Some("pca".to_string());
    Ok((
        vec![
            Record::cell(cell, "accuracy", acc, None, method.clone()),
            Record::cell(cell, "log_likelihood", ll, None, method),
        ],
        Some(wall),
    ))
}

fn run_cell(cfg: &ExperimentConfig, cluster: Option<&ClusterInputs>, cell: Cell) -> Entry {
    let result = match cell.scenario {
        Scenario::StabilityVerify => stability_cell(cfg, &cell),
        Scenario::Cluster => cluster_cell(cluster.expect("cluster inputs loaded"), &cell),
        _ => density_cell(cfg, &cell),
    };
    match result {
        Ok((records, wall_seconds)) => Entry {
            cell,
            records,
            wall_seconds,
        },
        Err(e) => Entry {
            cell,
            records: vec![Record::failed(&cell, &e)],
            wall_seconds: None,
        },
    }
}

fn read_journal(path: &Path) -> Result<HashMap<String, Entry>> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
    };
    for line in BufReader::new(file).lines() {
        // a torn last line from a crash is simply recomputed
        if let Ok(entry) = serde_json::from_str::<Entry>(&line?) {
            done.insert(entry.cell.id(), entry);
        }
    }
    Ok(done)
}

fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Averages over seeds, plus `r_star` per `(d, n)` for split-ratio grids.
fn summarize(scenario: Scenario, cell_records: &[Record]) -> Vec<Record> {
    type Group = (usize, usize, u64, String, String);
    let mut groups: BTreeMap<Group, (Option<usize>, Option<usize>, Option<f64>, Vec<f64>)> = BTreeMap::new();
    for rec in cell_records.iter().filter(|r| r.ok()) {
        let key = (
            rec.d.unwrap_or(0),
            rec.n.unwrap_or(0),
            rec.r.map_or(0, f64::to_bits),
            rec.method.clone().unwrap_or_default(),
            rec.metric.clone(),
        );
        let slot = groups.entry(key).or_insert((rec.d, rec.n, rec.r, Vec::new()));
        slot.3.push(rec.value.unwrap());
    }
    let mut out = Vec::new();
    for ((_, _, _, method, metric), (d, n, r, values)) in &groups {
        let (mean, se) = mean_and_se(values);
        let mut rec = Record::summary(scenario, *d, *n, *r, &format!("mean_{metric}"), mean, se);
        if scenario == Scenario::StabilityVerify {
            rec.method = Some(method.clone());
            if metric == "violations" {
                rec.metric = "total_violations".into();
                rec.value = Some(values.iter().sum());
                rec.std_error = None;
            }
        }
        out.push(rec);
    }
    if scenario == Scenario::SplitRatio {
        let mut best: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for rec in out.iter().filter(|r| r.metric == "mean_h2") {
            let (r, mean) = (rec.r.unwrap(), rec.value.unwrap());
            let slot = best.entry((rec.d.unwrap(), rec.n.unwrap())).or_insert((r, mean));
            if mean < slot.1 || (mean == slot.1 && r < slot.0) {
                *slot = (r, mean);
            }
        }
        for ((d, n), (r, _)) in best {
            out.push(Record::summary(scenario, Some(d), Some(n), None, "r_star", r, None));
        }
    }
    out
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every pending cell (in parallel when built with `parallel`), then
/// writes the report, sorted by cell key, and the timing table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let cluster = match (&cfg.scenario, &cfg.cluster) {
        (Scenario::Cluster, Some(setup)) => Some(load_cluster(setup)?),
        _ => None,
    };
    let journal_path = sibling(&cfg.output, "journal.jsonl");
    let mut done = if cfg.resume {
        read_journal(&journal_path)?
    } else {
        HashMap::new()
    };
    let journal = OpenOptions::new()
        .create(true)
        .append(cfg.resume)
        .write(true)
        .truncate(!cfg.resume)
        .open(&journal_path)
        .with_context(|| format!("opening {}", journal_path.display()))?;
    let journal = Mutex::new(journal);

    let all = cells(cfg, cluster.as_ref());
    let pending: Vec<Cell> = all.iter().filter(|c| !done.contains_key(&c.id())).copied().collect();
    let fresh = lcic::par::map_vec(pending, |cell| -> Result<Entry> {
        let entry = run_cell(cfg, cluster.as_ref(), cell);
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let mut j = journal.lock().unwrap();
        j.write_all(line.as_bytes())?;
        j.flush()?;
        Ok(entry)
    });
    for entry in fresh {
        let entry = entry?;
        done.insert(entry.cell.id(), entry);
    }

    let mut entries: Vec<&Entry> = all.iter().map(|c| &done[&c.id()]).collect();
    entries.sort_by_key(|e| e.cell.sort_key());
    let failed_cells = entries.iter().filter(|e| e.records.iter().any(|r| !r.ok())).count();
    let mut records: Vec<Record> = entries.iter().flat_map(|e| e.records.iter().cloned()).collect();
    records.extend(summarize(cfg.scenario, &records));

    write_csv(&cfg.output, &records)?;
    let timing = sibling(&cfg.output, "timing.csv");
    write_csv(
        &timing,
        entries.iter().map(|e| TimingRow {
            scenario: e.cell.scenario,
            d: e.cell.d,
            n: e.cell.n,
            r: e.cell.r,
            seed: e.cell.seed,
            wall_seconds: e.wall_seconds,
        }),
    )?;
    Ok(ExperimentOutcome {
        records,
        failed_cells,
        report: cfg.output.clone(),
        timing,
        journal: journal_path,
    })
}
