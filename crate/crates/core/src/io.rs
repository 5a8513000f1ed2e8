//! File formats: dense matrix CSV (no header), edge-list TSV with a
//! `# d=<n>` header, dataset CSV (one row per variable), the JSON fit
//! config, and fit exports.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::colide::{AdamConfig, FitResult, RoundTrace, Schedule, SolverConfig, StageTrace, Variant};
use crate::error::{Error, Result};
use crate::graphs::WeightedDigraph;
use crate::nomad::{MomConfig, NomadConfig, SvarmConfig, SvarmFit};
use crate::scores::NoiseEstimate;
use crate::semsim::{Dataset, TimeSeries};

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(path, format!("row {}, column {}: not a number: {f:?}", r + 1, c + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::parse(path, "empty matrix"));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::parse(path, format!("row {} has {} entries, expected {ncols}", r + 1, rows[r].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::parse(path, "non-finite entry"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_error(path, e))?;
    for row in m.row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Weighted edge list, `src<TAB>dst<TAB>weight` after a `# d=<n>` line.
pub fn write_edge_list(path: impl AsRef<Path>, w: &WeightedDigraph) -> Result<()> {
    let mut out = format!("# d={}\n", w.d());
    for (i, j, v) in w.edges() {
        out.push_str(&format!("{i}\t{j}\t{v}\n"));
    }
    write_text(path, &out)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<WeightedDigraph> {
    let path = path.as_ref();
    parse_edge_list(path, &read_text(path)?)
}

/// Parses edge-list text; `path` only labels errors.
pub fn parse_edge_list(path: &Path, text: &str) -> Result<WeightedDigraph> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let d = lines
        .next()
        .and_then(|(_, l)| l.trim().strip_prefix('#'))
        .and_then(|l| l.trim().strip_prefix("d="))
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::parse(path, "first line must be `# d=<n>` with n >= 1"))?;
    let mut w = DMatrix::zeros(d, d);
    for (k, line) in lines {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let bad = || Error::parse(path, format!("line {}: expected src<TAB>dst<TAB>weight", k + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        if i >= d || j >= d {
            return Err(Error::parse(path, format!("line {}: node index out of range for d={d}", k + 1)));
        }
        w[(i, j)] = v;
    }
    WeightedDigraph::new(w).map_err(|e| Error::parse(path, e.to_string()))
}

/// Weighted graph from either format, chosen by extension (`.tsv` is an edge
/// list, anything else a dense CSV).
pub fn read_graph(path: impl AsRef<Path>) -> Result<WeightedDigraph> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "tsv") {
        read_edge_list(path)
    } else {
        WeightedDigraph::new(read_matrix_csv(path)?).map_err(|e| Error::parse(path, e.to_string()))
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    Dataset::new(read_matrix_csv(path)?).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn read_time_series(path: impl AsRef<Path>, tau_max: usize) -> Result<TimeSeries> {
    let path = path.as_ref();
    TimeSeries::new(read_matrix_csv(path)?, tau_max).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_text(path, &text)
}

pub fn create_dir(path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(path, e.to_string())
    }
}

/// Fit configuration shared by every method. Unset fields fall back to the
/// defaults of the chosen solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub variant: Option<Variant>,
    pub lambda: Option<f64>,
    pub schedule: Option<Schedule>,
    pub optimizer: Option<AdamConfig>,
    pub edge_threshold: Option<f64>,
    pub tol: Option<f64>,
    pub checkpoint: Option<usize>,
    pub seed: Option<u64>,
    pub s: Option<f64>,
    pub mom: Option<MomConfig>,
    pub tau_max: Option<usize>,
    pub lambda_a: Option<f64>,
    pub lag_threshold: Option<f64>,
}

const TOP_KEYS: &[&str] = &[
    "variant",
    "lambda",
    "schedule",
    "optimizer",
    "edge_threshold",
    "tol",
    "checkpoint",
    "seed",
    "s",
    "mom",
    "tau_max",
    "lambda_a",
    "lag_threshold",
];
const ADAM_KEYS: &[&str] = &["step", "beta1", "beta2", "eps"];
const MOM_KEYS: &[&str] = &["alpha0", "c0", "gamma", "eta", "eps_h", "outer_max", "inner_tol", "inner_max"];
const STAGE_KEYS: &[&str] = &["mu", "s", "t_max"];

fn allowed_keys(schema_path: &str) -> Option<&'static [&'static str]> {
    match schema_path {
        "" => Some(TOP_KEYS),
        "optimizer" => Some(ADAM_KEYS),
        "mom" => Some(MOM_KEYS),
        "schedule[]" => Some(STAGE_KEYS),
        _ => None,
    }
}

// Collects every unknown key, e.g. `mom.gama` or `schedule[1].tmax`.
fn walk(v: &Value, schema: &str, shown: &str, bad: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            let Some(keys) = allowed_keys(schema) else { return };
            for (k, child) in map {
                let shown_k = if shown.is_empty() { k.clone() } else { format!("{shown}.{k}") };
                if keys.contains(&k.as_str()) {
                    let schema_k = if schema.is_empty() { k.clone() } else { format!("{schema}.{k}") };
                    walk(child, &schema_k, &shown_k, bad);
                } else {
                    bad.push(shown_k);
                }
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                walk(item, &format!("{schema}[]"), &format!("{shown}[{i}]"), bad);
            }
        }
        _ => {}
    }
}

impl FitConfig {
    pub fn from_value(v: &Value) -> Result<Self> {
        if !v.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let mut bad = Vec::new();
        walk(v, "", "", &mut bad);
        if !bad.is_empty() {
            return Err(Error::UnknownKeys { keys: bad });
        }
        serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let v: Value = serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn solver(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = &self.schedule {
            c.schedule = v.clone();
        }
        if let Some(v) = self.optimizer {
            c.optimizer = v;
        }
        if let Some(v) = self.edge_threshold {
            c.edge_threshold = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.checkpoint {
            c.checkpoint = v;
        }
        c
    }

    pub fn nomad(&self) -> NomadConfig {
        let mut c = NomadConfig::default();
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = self.edge_threshold {
            c.edge_threshold = v;
        }
        if let Some(v) = self.mom {
            c.mom = v;
        }
        c
    }

    pub fn svarm(&self) -> SvarmConfig {
        let mut c = SvarmConfig::default();
        if let Some(v) = self.tau_max {
            c.tau_max = v;
        }
        if let Some(v) = self.lambda {
            c.lambda_w = v;
        }
        if let Some(v) = self.lambda_a {
            c.lambda_a = v;
        }
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = self.edge_threshold {
            c.edge_threshold = v;
        }
        if let Some(v) = self.lag_threshold {
            c.lag_threshold = v;
        }
        if let Some(v) = self.mom {
            c.mom = v;
        }
        c
    }
}

#[derive(Serialize)]
struct FitSidecar<'a> {
    method: &'a str,
    edge_count: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<&'a NoiseEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigmas: Option<&'a [f64]>,
    stages: &'a [StageTrace],
    rounds: &'a [RoundTrace],
    removed_edges: &'a [(usize, usize, f64)],
}

/// Writes `weights.csv` (thresholded), `weights_raw.csv`, `edges.tsv` and
/// the `fit.json` sidecar into `dir`.
pub fn export_fit(dir: impl AsRef<Path>, method: &str, fit: &FitResult) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    write_matrix_csv(dir.join("weights.csv"), fit.w.weights())?;
    write_matrix_csv(dir.join("weights_raw.csv"), &fit.w_raw)?;
    write_edge_list(dir.join("edges.tsv"), &fit.w)?;
    let (sigma, sigmas) = match &fit.noise {
        Some(NoiseEstimate::Ev { sigma, .. }) => (Some(*sigma), None),
        Some(NoiseEstimate::Nv { sigmas, .. }) => (None, Some(sigmas.as_slice())),
        None => (None, None),
    };
    let side = FitSidecar {
        method,
        edge_count: fit.w.edge_count(),
        converged: fit.converged,
        noise: fit.noise.as_ref(),
        sigma,
        sigmas,
        stages: &fit.stages,
        rounds: &fit.rounds,
        removed_edges: &fit.removed_edges,
    };
    write_json(dir.join("fit.json"), &side)
}

#[derive(Serialize)]
struct SvarmManifest<'a> {
    method: &'a str,
    tau_max: usize,
    files: Vec<String>,
    edge_count: usize,
    converged: bool,
    stages: &'a [StageTrace],
    rounds: &'a [RoundTrace],
    removed_edges: &'a [(usize, usize, f64)],
}

/// Writes `W.csv`, `A_1.csv`..`A_τ.csv` and `manifest.json` into `dir`.
pub fn export_svarm(dir: impl AsRef<Path>, method: &str, fit: &SvarmFit) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let mut files = vec!["W.csv".to_string()];
    write_matrix_csv(dir.join("W.csv"), fit.w.weights())?;
    for (k, a) in fit.lags.iter().enumerate() {
        let name = format!("A_{}.csv", k + 1);
        write_matrix_csv(dir.join(&name), a)?;
        files.push(name);
    }
    write_edge_list(dir.join("edges.tsv"), &fit.w)?;
    let man = SvarmManifest {
        method,
        tau_max: fit.lags.len(),
        files,
        edge_count: fit.w.edge_count(),
        converged: fit.converged,
        stages: &fit.stages,
        rounds: &fit.rounds,
        removed_edges: &fit.removed_edges,
    };
    write_json(dir.join("manifest.json"), &man)
}
