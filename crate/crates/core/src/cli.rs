//! Experiment harness behind the `colide` binary: synthetic grids, trials,
//! fitting and evaluation commands, and Sachs ingestion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::colide::{fit_colide, fit_dagma_ols, FitResult, Variant};
use crate::error::{Error, Result};
use crate::graphs::{
    assign_weights, random_er_dag, random_er_digraph, random_sf_dag, threshold_edges, BinaryDag, WeightSign,
    WeightedDigraph,
};
use crate::io::{self, FitConfig};
use crate::metrics::{support_f1, MetricsReport};
use crate::nomad::{fit_dagma_svarm, fit_nomad, fit_nomad_svarm, SvarmFit};
use crate::semsim::{sample_linear_sem, sample_svarm, svarm_companion_radius, Dataset, NoiseFamily, NoiseSpec, TimeSeries};

pub const SCHEMA_LINE: &str = "# schema=1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ColideEv,
    ColideNv,
    DagmaOls,
    Nomad,
    NomadSvarm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::ColideEv, Method::ColideNv, Method::DagmaOls, Method::Nomad, Method::NomadSvarm];

    pub fn name(self) -> &'static str {
        match self {
            Method::ColideEv => "colide-ev",
            Method::ColideNv => "colide-nv",
            Method::DagmaOls => "dagma-ols",
            Method::Nomad => "nomad",
            Method::NomadSvarm => "nomad-svarm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Output of [`fit_method`]: an i.i.d. fit or a structural VAR fit.
#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Static(FitResult),
    Svarm(SvarmFit),
}

impl Fitted {
    pub fn w(&self) -> &WeightedDigraph {
        match self {
            Fitted::Static(f) => &f.w,
            Fitted::Svarm(f) => &f.w,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Fitted::Static(f) => f.converged,
            Fitted::Svarm(f) => f.converged,
        }
    }
}

/// Runs `method` on `x` (d × n). `dagma-ols` with `tau_max` set fits the
/// lagged design instead of the i.i.d. one.
pub fn fit_method(method: Method, cfg: &FitConfig, x: &DMatrix<f64>) -> Result<Fitted> {
    let colide_variant = |v: Variant| -> Result<Variant> {
        match cfg.variant {
            Some(c) if c != v => Err(Error::Config(format!("config variant {c:?} conflicts with method {method}"))),
            _ => Ok(v),
        }
    };
    match method {
        Method::ColideEv => Ok(Fitted::Static(fit_colide(&Dataset::new(x.clone())?, colide_variant(Variant::Ev)?, &cfg.solver())?)),
        Method::ColideNv => Ok(Fitted::Static(fit_colide(&Dataset::new(x.clone())?, colide_variant(Variant::Nv)?, &cfg.solver())?)),
        Method::DagmaOls => match cfg.tau_max {
            Some(tau) => {
                let series = TimeSeries::new(x.clone(), tau)?;
                let lag_thr = cfg.svarm().lag_threshold;
                Ok(Fitted::Svarm(fit_dagma_svarm(&series, tau, lag_thr, &cfg.solver())?))
            }
            None => Ok(Fitted::Static(fit_dagma_ols(&Dataset::new(x.clone())?, &cfg.solver())?)),
        },
        Method::Nomad => Ok(Fitted::Static(fit_nomad(&Dataset::new(x.clone())?, &cfg.nomad())?)),
        Method::NomadSvarm => {
            let scfg = cfg.svarm();
            let series = TimeSeries::new(x.clone(), scfg.tau_max)?;
            Ok(Fitted::Svarm(fit_nomad_svarm(&series, &scfg)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Er,
    Sf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub kind: GraphKind,
    /// Mean total degree; scale-free graphs attach `degree / 2` edges per node.
    pub degree: f64,
}

impl GraphSpec {
    pub fn label(&self) -> String {
        let k = match self.kind {
            GraphKind::Er => "er",
            GraphKind::Sf => "sf",
        };
        format!("{k}{}", self.degree)
    }
}

/// Noise variances: one shared σ² or a range to draw per-node variances from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Ev(f64),
    Nv([f64; 2]),
}

impl Variance {
    pub fn label(&self) -> String {
        match self {
            Variance::Ev(v) => format!("ev:{v}"),
            Variance::Nv([lo, hi]) => format!("nv:{lo}-{hi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSetting {
    pub family: NoiseFamily,
    pub variance: Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub low: f64,
    pub high: f64,
    pub sign: WeightSign,
}

fn default_burn_in() -> usize {
    500
}

/// Lag matrices of a structural VAR: each `A_τ` has an Erdős–Rényi support
/// of the given mean degree and weights of magnitude in `[low, high]` with
/// random sign, shrunk by 0.8 until the process is stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSpec {
    pub tau_max: usize,
    pub degree: f64,
    pub low: f64,
    pub high: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

/// One synthetic design. With `lags`, `n` is the series length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub graph: GraphSpec,
    pub d: usize,
    pub n: usize,
    pub noise: NoiseSetting,
    pub weights: WeightSpec,
    #[serde(default)]
    pub lags: Option<LagSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub truth: WeightedDigraph,
    pub lags: Vec<DMatrix<f64>>,
    pub sigmas: Vec<f64>,
    /// d × n samples, or d × t_max series when lags are present.
    pub x: DMatrix<f64>,
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        positive(self.graph.degree, "graph degree")?;
        if self.d < 2 || self.n < 2 {
            return Err(Error::Config(format!("need d >= 2 and n >= 2, got d={} n={}", self.d, self.n)));
        }
        match self.noise.variance {
            Variance::Ev(v) => positive(v, "noise variance")?,
            Variance::Nv([lo, hi]) => {
                positive(lo, "noise variance range")?;
                if hi < lo {
                    return Err(Error::Config(format!("variance range [{lo}, {hi}] is empty")));
                }
            }
        }
        if !(self.weights.low >= 0.0 && self.weights.low <= self.weights.high) {
            return Err(Error::Config("weights need 0 <= low <= high".into()));
        }
        if let Some(l) = &self.lags {
            positive(l.degree, "lag degree")?;
            if l.tau_max == 0 || !(l.low >= 0.0 && l.low <= l.high) || self.n <= l.tau_max + 1 {
                return Err(Error::Config("lags need tau_max >= 1, 0 <= low <= high, n > tau_max + 1".into()));
            }
        }
        Ok(())
    }
}

/// Draws truth and data for `spec`. Everything comes from one RNG seeded
/// with `seed`: graph, weights, noise scales, lags, then samples.
pub fn simulate(spec: &SimSpec, seed: u64) -> Result<Simulated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d;
    let dag = match spec.graph.kind {
        GraphKind::Er => random_er_dag(d, spec.graph.degree, &mut rng)?,
        GraphKind::Sf => random_sf_dag(d, ((spec.graph.degree / 2.0).round() as usize).max(1), &mut rng)?,
    };
    let truth = assign_weights(&dag, spec.weights.low, spec.weights.high, spec.weights.sign, &mut rng)?;
    let sigmas: Vec<f64> = match spec.noise.variance {
        Variance::Ev(v) => vec![v.sqrt(); d],
        Variance::Nv([lo, hi]) if lo == hi => vec![lo.sqrt(); d],
        Variance::Nv([lo, hi]) => (0..d).map(|_| rng.random_range(lo..hi).sqrt()).collect(),
    };
    let noise = NoiseSpec::new(spec.noise.family, sigmas.clone())?;
    let Some(lspec) = spec.lags else {
        let data = sample_linear_sem(&truth, &noise, spec.n, &mut rng)?;
        return Ok(Simulated { truth, lags: Vec::new(), sigmas, x: data.x().clone() });
    };
    let mut lags: Vec<DMatrix<f64>> = Vec::with_capacity(lspec.tau_max);
    for _ in 0..lspec.tau_max {
        let mut a = DMatrix::zeros(d, d);
        for (i, j) in random_er_digraph(d, lspec.degree, &mut rng)? {
            let m = if lspec.high > lspec.low { rng.random_range(lspec.low..lspec.high) } else { lspec.low };
            a[(i, j)] = if rng.random::<bool>() { m } else { -m };
        }
        lags.push(a);
    }
    let mut shrinks = 0;
    while svarm_companion_radius(truth.weights(), &lags)? >= 1.0 {
        if shrinks == 200 {
            return Err(Error::Config("could not draw a stable lag system".into()));
        }
        for a in &mut lags {
            *a *= 0.8;
        }
        shrinks += 1;
    }
    let series = sample_svarm(&truth, &lags, &noise, spec.n, lspec.burn_in, &mut rng)?;
    Ok(Simulated { truth, lags, sigmas, x: series.x })
}

#[derive(Serialize)]
struct SimManifest<'a> {
    seed: u64,
    spec: &'a SimSpec,
    sigmas: &'a [f64],
    files: Vec<String>,
}

/// Writes `truth.tsv`, `weights.csv`, `data.csv`, lag matrices `A_k.csv` when
/// present, and `manifest.json`.
pub fn cmd_simulate(spec: &SimSpec, seed: u64, out: &Path) -> Result<Simulated> {
    let sim = simulate(spec, seed)?;
    io::create_dir(out)?;
    io::write_edge_list(out.join("truth.tsv"), &sim.truth)?;
    io::write_matrix_csv(out.join("weights.csv"), sim.truth.weights())?;
    io::write_matrix_csv(out.join("data.csv"), &sim.x)?;
    let mut files: Vec<String> = ["truth.tsv", "weights.csv", "data.csv"].map(String::from).to_vec();
    for (k, a) in sim.lags.iter().enumerate() {
        let name = format!("A_{}.csv", k + 1);
        io::write_matrix_csv(out.join(&name), a)?;
        files.push(name);
    }
    let man = SimManifest { seed, spec, sigmas: &sim.sigmas, files };
    io::write_json(out.join("manifest.json"), &man)?;
    Ok(sim)
}

/// Reads `data` (d × n CSV), fits `method` and exports the result to `out`.
pub fn cmd_fit(data: &Path, method: Method, cfg: &FitConfig, out: &Path) -> Result<Fitted> {
    let x = io::read_matrix_csv(data)?;
    let fitted = fit_method(method, cfg, &x)?;
    match &fitted {
        Fitted::Static(f) => io::export_fit(out, method.name(), f)?,
        Fitted::Svarm(f) => io::export_svarm(out, method.name(), f)?,
    }
    io::write_json(out.join("config.json"), cfg)?;
    Ok(fitted)
}

/// Scores an estimate (dense CSV or edge-list TSV) against a truth graph,
/// optionally thresholding the estimate first. Writes `metrics.json` into
/// `out` when given.
pub fn cmd_eval(estimate: &Path, truth: &Path, threshold: Option<f64>, out: Option<&Path>) -> Result<MetricsReport> {
    let mut est = io::read_graph(estimate)?;
    let truth = io::read_graph(truth)?;
    if let Some(t) = threshold {
        est = threshold_edges(&est, t)?;
    }
    let report = MetricsReport::compute(&est, &truth)?;
    if let Some(dir) = out {
        io::create_dir(dir)?;
        io::write_json(dir.join("metrics.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    /// Column value in the results; defaults to the method name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub config: Value,
}

impl MethodSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.method.name())
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        match &self.config {
            Value::Null => Ok(FitConfig::default()),
            v => FitConfig::from_value(v),
        }
    }
}

/// Cartesian grid `d × noise × seed × method` over one graph/weight design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub graph: GraphSpec,
    pub d: Vec<usize>,
    pub n: usize,
    pub noise: Vec<NoiseSetting>,
    pub weights: WeightSpec,
    #[serde(default)]
    pub lags: Option<LagSpec>,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
}

/// One (grid point, seed, method) cell of a bench run.
#[derive(Debug, Clone)]
pub struct Trial {
    pub spec: SimSpec,
    pub seed: u64,
    pub label: String,
    pub method: Method,
    pub config: FitConfig,
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let g: Self = serde_json::from_str(&io::read_text(path)?).map_err(|e| Error::parse(path, e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.is_empty() || self.noise.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("grid lists d, noise, methods and seeds must be nonempty".into()));
        }
        for p in self.points() {
            p.validate()?;
        }
        let mut labels = Vec::new();
        for m in &self.methods {
            m.fit_config()?;
            if labels.contains(&m.label()) {
                return Err(Error::Config(format!("duplicate method label {:?}", m.label())));
            }
            labels.push(m.label());
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SimSpec> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &noise in &self.noise {
                out.push(SimSpec { graph: self.graph, d, n: self.n, noise, weights: self.weights, lags: self.lags });
            }
        }
        out
    }

    /// Trials in canonical order. Time-series grids hand their lag order to
    /// methods that do not set one.
    pub fn trials(&self) -> Result<Vec<Trial>> {
        let mut out = Vec::new();
        for spec in self.points() {
            for &seed in &self.seeds {
                for m in &self.methods {
                    let mut config = m.fit_config()?;
                    if let Some(l) = &self.lags {
                        if matches!(m.method, Method::DagmaOls | Method::NomadSvarm) && config.tau_max.is_none() {
                            config.tau_max = Some(l.tau_max);
                        }
                    }
                    out.push(Trial { spec, seed, label: m.label().to_string(), method: m.method, config });
                }
            }
        }
        Ok(out)
    }
}

/// One row of the bench results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub method: String,
    pub graph: String,
    pub d: usize,
    pub n: usize,
    pub noise: NoiseFamily,
    pub variance: String,
    pub seed: u64,
    pub shd: Option<usize>,
    pub shd_c: Option<usize>,
    pub fdr: Option<f64>,
    pub tpr: Option<f64>,
    pub f1: Option<f64>,
    pub sid: Option<usize>,
    pub nmse: Option<f64>,
    pub n_edges_est: Option<usize>,
    pub n_edges_true: usize,
    /// Support F1 of the lag matrices (time-series fits only).
    pub lag_f1: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
    /// Wall-clock fit time; kept out of `trials.csv` so that file stays
    /// byte-reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

pub fn run_trial(trial: &Trial) -> TrialRecord {
    let spec = &trial.spec;
    let mut rec = TrialRecord {
        method: trial.label.clone(),
        graph: spec.graph.label(),
        d: spec.d,
        n: spec.n,
        noise: spec.noise.family,
        variance: spec.noise.variance.label(),
        seed: trial.seed,
        shd: None,
        shd_c: None,
        fdr: None,
        tpr: None,
        f1: None,
        sid: None,
        nmse: None,
        n_edges_est: None,
        n_edges_true: 0,
        lag_f1: None,
        converged: None,
        error: None,
        seconds: 0.0,
    };
    let sim = match simulate(spec, trial.seed) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(format!("simulate: {e}"));
            return rec;
        }
    };
    rec.n_edges_true = sim.truth.edge_count();
    let start = Instant::now();
    let fitted = fit_method(trial.method, &trial.config, &sim.x);
    rec.seconds = start.elapsed().as_secs_f64();
    let fitted = match fitted {
        Ok(f) => f,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.converged = Some(fitted.converged());
    match MetricsReport::compute(fitted.w(), &sim.truth) {
        Ok(m) => {
            rec.shd = Some(m.shd);
            rec.shd_c = Some(m.shd_c);
            rec.fdr = Some(m.fdr);
            rec.tpr = Some(m.tpr);
            rec.f1 = Some(m.f1);
            rec.sid = Some(m.sid);
            rec.nmse = m.nmse;
            rec.n_edges_est = Some(m.n_edges_est);
        }
        Err(e) => rec.error = Some(format!("metrics: {e}")),
    }
    if let Fitted::Svarm(f) = &fitted {
        rec.lag_f1 = support_f1(&f.lags, &sim.lags).ok();
    }
    rec
}

/// Linear-interpolation quantiles of the successful trials in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            median: quantile(&v, 0.5),
            p25: quantile(&v, 0.25),
            p75: quantile(&v, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub method: String,
    pub d: usize,
    pub noise: NoiseFamily,
    pub variance: String,
    pub trials: usize,
    pub failures: usize,
    pub metrics: BTreeMap<&'static str, Quantiles>,
}

type Extract = fn(&TrialRecord) -> Option<f64>;

const SUMMARY_FIELDS: [(&str, Extract); 9] = [
    ("shd", |r| r.shd.map(|v| v as f64)),
    ("shd_c", |r| r.shd_c.map(|v| v as f64)),
    ("fdr", |r| r.fdr),
    ("tpr", |r| r.tpr),
    ("f1", |r| r.f1),
    ("sid", |r| r.sid.map(|v| v as f64)),
    ("nmse", |r| r.nmse),
    ("lag_f1", |r| r.lag_f1),
    ("seconds", |r| r.error.is_none().then_some(r.seconds)),
];

/// Per-(method, d, noise) quantiles, cells in first-appearance order.
pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<(CellSummary, Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        let same = |c: &CellSummary| c.method == r.method && c.d == r.d && c.noise == r.noise && c.variance == r.variance;
        match cells.iter_mut().find(|(c, _)| same(c)) {
            Some((_, rows)) => rows.push(r),
            None => cells.push((
                CellSummary {
                    method: r.method.clone(),
                    d: r.d,
                    noise: r.noise,
                    variance: r.variance.clone(),
                    trials: 0,
                    failures: 0,
                    metrics: BTreeMap::new(),
                },
                vec![r],
            )),
        }
    }
    cells
        .into_iter()
        .map(|(mut c, rows)| {
            c.trials = rows.len();
            c.failures = rows.iter().filter(|r| r.error.is_some()).count();
            for (name, get) in SUMMARY_FIELDS {
                let vals: Vec<f64> = rows.iter().filter_map(|r| get(r)).collect();
                if let Some(q) = Quantiles::of(&vals) {
                    c.metrics.insert(name, q);
                }
            }
            c
        })
        .collect()
}

/// `trials.csv` contents: the schema line, a header and one row per record.
pub fn records_csv(records: &[TrialRecord]) -> Result<String> {
    let mut buf = format!("{SCHEMA_LINE}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in records {
            w.serialize(r).map_err(|e| Error::Config(format!("record serialization: {e}")))?;
        }
        w.flush().map_err(|e| Error::Config(format!("record serialization: {e}")))?;
    }
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<CellSummary>,
}

/// Runs every trial of `grid` on `workers` threads. Records come back in
/// canonical trial order whatever the scheduling, so `trials.csv` does not
/// depend on the worker count. Failed trials keep their row with `error` set.
pub fn run_bench(grid: &ExperimentGrid, workers: usize) -> Result<BenchOutput> {
    grid.validate()?;
    let trials = grid.trials()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| trials.par_iter().map(run_trial).collect());
    let summary = summarize(&records);
    Ok(BenchOutput { records, summary })
}

/// [`run_bench`] plus `trials.csv`, `timings.csv` and `summary.json` in `out`.
pub fn cmd_bench(grid: &ExperimentGrid, out: &Path, workers: usize) -> Result<BenchOutput> {
    let res = run_bench(grid, workers)?;
    io::create_dir(out)?;
    io::write_text(out.join("trials.csv"), &records_csv(&res.records)?)?;
    let mut timings = String::from("method,d,variance,seed,seconds\n");
    for r in &res.records {
        timings.push_str(&format!("{},{},{},{},{}\n", r.method, r.d, r.variance, r.seed, r.seconds));
    }
    io::write_text(out.join("timings.csv"), &timings)?;
    io::write_json(out.join("summary.json"), &res.summary)?;
    Ok(res)
}

/// Canonical Sachs node order; the bundled truth indexes nodes in this order.
pub const SACHS_NODES: [&str; 11] = ["Raf", "Mek", "Plcg", "PIP2", "PIP3", "Erk", "Akt", "PKA", "PKC", "P38", "Jnk"];

const SACHS_TRUTH: &str = include_str!("../resources/sachs_truth.tsv");

// Header spellings seen in the published files and common re-releases.
const SACHS_ALIASES: [&[&str]; 11] = [
    &["raf", "praf"],
    &["mek", "pmek", "mek1/2"],
    &["plcg", "plcgamma", "plc"],
    &["pip2"],
    &["pip3"],
    &["erk", "p44/42", "erk1/2", "perk"],
    &["akt", "pakts473", "pakt"],
    &["pka"],
    &["pkc"],
    &["p38", "pp38"],
    &["jnk", "pjnk"],
];

fn sachs_index(header: &str) -> Option<usize> {
    let h = header.trim().trim_matches('"').to_ascii_lowercase();
    SACHS_ALIASES.iter().position(|names| names.contains(&h.as_str()))
}

/// The 17-edge consensus network in [`SACHS_NODES`] order.
pub fn sachs_truth() -> BinaryDag {
    let w = io::parse_edge_list(Path::new("resources/sachs_truth.tsv"), SACHS_TRUTH).expect("bundled truth parses");
    BinaryDag::from_support(&w).expect("bundled truth is acyclic")
}

/// Reads a raw Sachs table (one named column per protein, comma- or
/// tab-separated), reorders columns to [`SACHS_NODES`], transposes to d × n
/// and centers each variable. `standardize` also scales to unit variance.
pub fn read_sachs(path: &Path, standardize: bool) -> Result<Dataset> {
    let text = io::read_text(path)?;
    let first = text.lines().next().unwrap_or("");
    let delim = if first.contains('\t') { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new().delimiter(delim).trim(csv::Trim::All).from_reader(text.as_bytes());
    let expected = || SACHS_NODES.join(", ");
    let headers = rdr.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    let cols: Vec<Option<usize>> = headers.iter().map(sachs_index).collect();
    let mut seen = [false; 11];
    for (h, c) in headers.iter().zip(&cols) {
        match c {
            Some(k) if !seen[*k] => seen[*k] = true,
            Some(_) => return Err(Error::Ingestion(format!("duplicate column {h:?}; expected headers: {}", expected()))),
            None => return Err(Error::Ingestion(format!("unrecognized column {h:?}; expected headers: {}", expected()))),
        }
    }
    if seen.iter().any(|s| !s) {
        let missing: Vec<&str> = SACHS_NODES.iter().zip(seen).filter(|(_, s)| !s).map(|(n, _)| *n).collect();
        return Err(Error::Ingestion(format!("missing columns {missing:?}; expected headers: {}", expected())));
    }
    let mut samples: Vec<[f64; 11]> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let mut row = [0.0; 11];
        for (field, c) in rec.iter().zip(&cols) {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, format!("row {}: bad value {field:?}", r + 2)))?;
            row[c.expect("checked above")] = v;
        }
        samples.push(row);
    }
    if samples.len() < 2 {
        return Err(Error::Ingestion("need at least two samples".into()));
    }
    let n = samples.len();
    let mut x = DMatrix::from_fn(11, n, |i, k| samples[k][i]);
    for (i, mut row) in x.row_iter_mut().enumerate() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        if standardize {
            let sd = (row.norm_squared() / n as f64).sqrt();
            if sd == 0.0 {
                return Err(Error::Ingestion(format!("column {} is constant", SACHS_NODES[i])));
            }
            row /= sd;
        }
    }
    Dataset::new(x)
}

#[derive(Serialize)]
struct SachsManifest<'a> {
    source: String,
    columns: [&'a str; 11],
    d: usize,
    n: usize,
    centered: bool,
    standardized: bool,
    truth_edges: usize,
}

/// Writes `data.csv` (11 × n), `truth.tsv` and `manifest.json` recording the
/// preprocessing.
pub fn cmd_sachs(raw: &Path, out: &Path, standardize: bool) -> Result<Dataset> {
    let data = read_sachs(raw, standardize)?;
    let truth = sachs_truth();
    io::create_dir(out)?;
    io::write_matrix_csv(out.join("data.csv"), data.x())?;
    let tw = WeightedDigraph::new(truth.to_matrix())?;
    io::write_edge_list(out.join("truth.tsv"), &tw)?;
    let man = SachsManifest {
        source: raw.display().to_string(),
        columns: SACHS_NODES,
        d: data.d(),
        n: data.n(),
        centered: true,
        standardized: standardize,
        truth_edges: truth.edge_count(),
    };
    io::write_json(out.join("manifest.json"), &man)?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SimSpec {
        SimSpec {
            graph: GraphSpec { kind: GraphKind::Er, degree: 1.0 },
            d: 2,
            n: 50,
            noise: NoiseSetting { family: NoiseFamily::Gaussian, variance: Variance::Ev(1.0) },
            weights: WeightSpec { low: 0.5, high: 2.0, sign: WeightSign::Mixed },
            lags: None,
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("notears".parse::<Method>().is_err());
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let s = tiny_spec();
        assert_eq!(simulate(&s, 7).unwrap(), simulate(&s, 7).unwrap());
        assert_ne!(simulate(&s, 7).unwrap().x, simulate(&s, 8).unwrap().x);
    }

    #[test]
    fn nv_sigmas_fall_in_range() {
        let mut s = tiny_spec();
        s.d = 30;
        s.noise.variance = Variance::Nv([0.5, 10.0]);
        let sim = simulate(&s, 1).unwrap();
        assert!(sim.sigmas.iter().all(|v| (0.5..10.0).contains(&(v * v))));
        assert!(sim.sigmas.iter().any(|v| *v != sim.sigmas[0]));
    }

    #[test]
    fn lagged_designs_are_stable_series() {
        let mut s = tiny_spec();
        s.d = 5;
        s.n = 200;
        s.lags = Some(LagSpec { tau_max: 2, degree: 2.0, low: 0.1, high: 0.5, burn_in: 50 });
        let sim = simulate(&s, 3).unwrap();
        assert_eq!(sim.lags.len(), 2);
        assert_eq!(sim.x.shape(), (5, 200));
        assert!(svarm_companion_radius(sim.truth.weights(), &sim.lags).unwrap() < 1.0);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.median, q.p25, q.p75), (2.5, 1.75, 3.25));
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn grid_rejects_bad_input() {
        let ok = r#"{"graph": {"kind": "er", "degree": 1}, "d": [3], "n": 20,
            "noise": [{"family": "gaussian", "variance": {"ev": 1}}],
            "weights": {"low": 0.5, "high": 2, "sign": "mixed"},
            "methods": [{"method": "nomad"}], "seeds": [0, 1]}"#;
        let g = ExperimentGrid::from_json(ok).unwrap();
        assert_eq!(g.trials().unwrap().len(), 2);
        let empty = ok.replace("\"seeds\": [0, 1]", "\"seeds\": []");
        assert!(ExperimentGrid::from_json(&empty).is_err());
        let typo = ok.replace("{\"method\": \"nomad\"}", "{\"method\": \"nomad\", \"config\": {\"lambada\": 1}}");
        assert!(matches!(ExperimentGrid::from_json(&typo), Err(Error::UnknownKeys { .. })));
        let dup = ok.replace("{\"method\": \"nomad\"}", "{\"method\": \"nomad\"}, {\"method\": \"nomad\"}");
        assert!(ExperimentGrid::from_json(&dup).is_err());
    }

    #[test]
    fn sachs_truth_has_seventeen_edges() {
        let t = sachs_truth();
        assert_eq!((t.d(), t.edge_count()), (11, 17));
        // PKC -> PKA -> Raf -> Mek -> Erk
        assert!(t.has_edge(8, 7) && t.has_edge(7, 0) && t.has_edge(0, 1) && t.has_edge(1, 5));
    }

    #[test]
    fn sachs_headers_map_to_canonical_order() {
        assert_eq!(sachs_index("praf"), Some(0));
        assert_eq!(sachs_index(" p44/42 "), Some(5));
        assert_eq!(sachs_index("pakts473"), Some(6));
        assert_eq!(sachs_index("Jnk"), Some(10));
        assert_eq!(sachs_index("foo"), None);
    }
}
