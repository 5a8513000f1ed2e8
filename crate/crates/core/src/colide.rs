//! Central-path solvers: CoLiDE (EV and NV), the OLS baseline on the same
//! path, and the online/mini-batch variant.
//!
//! Each stage `(μ, s, T)` runs up to `T` iterations of: one Adam step on
//! `μ·S(W) + H_ldet(W; s)`, then the closed-form noise update. Steps that
//! leave `{ρ(W∘W) < s}` are retried with a halved step size, which then
//! stays halved for the rest of the stage.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{break_cycles, threshold_matrix, WeightedDigraph};
use crate::linalg::{zero_diagonal, PositiveLu};
use crate::scores::{sigma0_ev_cov, sigma0_nv_cov, sign0, NoiseEstimate};
use crate::semsim::{sample_cov, Dataset};

/// Consecutive step halvings allowed before giving up on the domain.
pub const MAX_HALVINGS: usize = 50;
/// Amount added to `s` while the stage start lies outside its domain.
pub const S_BUMP: f64 = 0.1;
const MAX_S_BUMPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub mu: f64,
    pub s: f64,
    pub t_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Stage>", into = "Vec<Stage>")]
pub struct Schedule {
    stages: Vec<Stage>,
}

impl Schedule {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Parameter("schedule needs at least one stage".into()));
        }
        for (k, st) in stages.iter().enumerate() {
            if !(st.mu > 0.0) || !(st.s > 0.0) || st.t_max == 0 {
                return Err(Error::Parameter(format!("stage {k} needs mu > 0, s > 0, t_max >= 1")));
            }
            if k > 0 && st.mu >= stages[k - 1].mu {
                return Err(Error::Parameter("mu must strictly decrease across stages".into()));
            }
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Same `μ` and `s` sequence with every `T_k` multiplied by `factor`
    /// (rounded, at least 1).
    pub fn scaled(&self, factor: f64) -> Self {
        let stages = self
            .stages
            .iter()
            .map(|st| Stage {
                t_max: ((st.t_max as f64 * factor).round() as usize).max(1),
                ..*st
            })
            .collect();
        Self { stages }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        let mu = [1.0, 0.1, 0.01, 0.001];
        let s = [1.0, 0.9, 0.8, 0.7];
        let t = [20_000, 20_000, 20_000, 70_000];
        Self {
            stages: (0..4).map(|k| Stage { mu: mu[k], s: s[k], t_max: t[k] }).collect(),
        }
    }
}

impl TryFrom<Vec<Stage>> for Schedule {
    type Error = Error;
    fn try_from(v: Vec<Stage>) -> Result<Self> {
        Schedule::new(v)
    }
}

impl From<Schedule> for Vec<Stage> {
    fn from(s: Schedule) -> Self {
        s.stages
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            step: 3e-4,
            beta1: 0.99,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment state for one matrix parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: DMatrix<f64>,
    v: DMatrix<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, rows: usize, cols: usize) -> Self {
        Self {
            cfg,
            m: DMatrix::zeros(rows, cols),
            v: DMatrix::zeros(rows, cols),
            t: 0,
        }
    }

    /// Folds `grad` into the moments and returns the bias-corrected
    /// direction `m̂ / (sqrt(v̂) + eps)`.
    pub fn direction(&mut self, grad: &DMatrix<f64>) -> DMatrix<f64> {
        let AdamConfig { beta1, beta2, eps, .. } = self.cfg;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let mut dir = DMatrix::zeros(grad.nrows(), grad.ncols());
        for k in 0..grad.len() {
            let g = grad[k];
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            dir[k] = (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + eps);
        }
        dir
    }

    pub fn steps_taken(&self) -> usize {
        self.t as usize
    }
}

/// One Adam update of `w` along `grad` with the configured step size.
pub fn optimizer_step(w: &mut DMatrix<f64>, grad: &DMatrix<f64>, state: &mut Adam) {
    let dir = state.direction(grad);
    *w -= dir * state.cfg.step;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ev,
    Nv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub schedule: Schedule,
    pub optimizer: AdamConfig,
    pub edge_threshold: f64,
    /// Relative tolerance shared by both early-stop rules.
    pub tol: f64,
    /// Iterations between objective checkpoints; 0 disables the check.
    pub checkpoint: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            schedule: Schedule::default(),
            optimizer: AdamConfig::default(),
            edge_threshold: 0.3,
            tol: 1e-6,
            checkpoint: 1000,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.edge_threshold >= 0.0) {
            return Err(Error::Parameter("edge threshold must be >= 0".into()));
        }
        let o = &self.optimizer;
        if !(o.step > 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return Err(Error::Parameter("optimizer needs step > 0, betas in [0, 1), eps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    /// Relative W step or checkpoint objective change fell below `tol`.
    Tolerance,
    /// `T_k` iterations were used.
    Cap,
    /// A finite batch stream ran out.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTrace {
    pub mu: f64,
    /// The `s` actually used, after any domain bumps.
    pub s: f64,
    pub s_bumps: usize,
    pub iters: usize,
    pub stop: StopReason,
    pub objective: f64,
    pub h_value: f64,
    pub step_halvings: usize,
    pub final_step: f64,
    pub noise: Option<NoiseEstimate>,
}

/// One outer round of the method of multipliers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub alpha: f64,
    pub c: f64,
    pub h_value: f64,
    pub inner_iters: usize,
    pub inner_converged: bool,
    pub lagrangian: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Thresholded, acyclic estimate.
    pub w: WeightedDigraph,
    pub w_raw: DMatrix<f64>,
    pub noise: Option<NoiseEstimate>,
    pub stages: Vec<StageTrace>,
    pub rounds: Vec<RoundTrace>,
    /// Edges deleted after thresholding to break leftover cycles.
    pub removed_edges: Vec<(usize, usize, f64)>,
    pub converged: bool,
}

/// Thresholds `w_raw` and removes any leftover cycles.
pub(crate) fn finalize(w_raw: &DMatrix<f64>, threshold: f64) -> (WeightedDigraph, Vec<(usize, usize, f64)>) {
    let mut w = threshold_matrix(w_raw, threshold);
    zero_diagonal(&mut w);
    let removed = break_cycles(&mut w);
    (WeightedDigraph { weights: w }, removed)
}

/// Noise block of the score: none (OLS), one scale, or one per node.
#[derive(Debug, Clone, PartialEq)]
enum Concomitant {
    None,
    Ev { sigma: f64, floor: f64 },
    Nv { sigmas: Vec<f64>, floor: Vec<f64> },
}

impl Concomitant {
    fn init(variant: Option<Variant>, cov: &DMatrix<f64>) -> Self {
        match variant {
            None => Concomitant::None,
            Some(Variant::Ev) => {
                let floor = sigma0_ev_cov(cov).value;
                Concomitant::Ev { sigma: init_scale(floor), floor }
            }
            Some(Variant::Nv) => {
                let floor = sigma0_nv_cov(cov).value;
                Concomitant::Nv {
                    sigmas: floor.iter().map(|f| init_scale(*f)).collect(),
                    floor,
                }
            }
        }
    }

    /// Smooth gradient from `ciw = C (I - W)`, diagonal zeroed.
    fn smooth_grad(&self, ciw: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = match self {
            Concomitant::None => -ciw,
            Concomitant::Ev { sigma, .. } => ciw / -sigma,
            Concomitant::Nv { sigmas, .. } => {
                let mut g = -ciw;
                for (j, s) in sigmas.iter().enumerate() {
                    g.column_mut(j).scale_mut(1.0 / s);
                }
                g
            }
        };
        zero_diagonal(&mut g);
        g
    }

    fn score(&self, w: &DMatrix<f64>, ciw: &DMatrix<f64>, lambda: f64) -> f64 {
        let r = resid_diag(w, ciw);
        let l1 = lambda * w.iter().map(|x| x.abs()).sum::<f64>();
        let d = w.ncols() as f64;
        l1 + match self {
            Concomitant::None => 0.5 * r.iter().sum::<f64>(),
            Concomitant::Ev { sigma, .. } => r.iter().sum::<f64>() / (2.0 * sigma) + d * sigma / 2.0,
            Concomitant::Nv { sigmas, .. } => {
                r.iter().zip(sigmas).map(|(r, s)| 0.5 * r / s + 0.5 * s).sum::<f64>()
            }
        }
    }

    fn update(&mut self, w: &DMatrix<f64>, ciw: &DMatrix<f64>) {
        match self {
            Concomitant::None => {}
            Concomitant::Ev { sigma, floor } => {
                let tr: f64 = resid_diag(w, ciw).iter().sum();
                *sigma = (tr.max(0.0) / w.ncols() as f64).sqrt().max(*floor);
            }
            Concomitant::Nv { sigmas, floor } => {
                for ((s, r), f) in sigmas.iter_mut().zip(resid_diag(w, ciw)).zip(floor.iter()) {
                    *s = r.max(0.0).sqrt().max(*f);
                }
            }
        }
    }

    fn estimate(&self) -> Option<NoiseEstimate> {
        match self {
            Concomitant::None => None,
            Concomitant::Ev { sigma, floor } => Some(NoiseEstimate::Ev {
                sigma: *sigma,
                floor: *floor,
            }),
            Concomitant::Nv { sigmas, floor } => Some(NoiseEstimate::Nv {
                sigmas: sigmas.clone(),
                floor: floor.clone(),
            }),
        }
    }
}

fn init_scale(floor: f64) -> f64 {
    // a fully degenerate floor would make the first step divide by zero
    if floor > 0.0 {
        floor * 1e2
    } else {
        1.0
    }
}

/// `diag((E-W)ᵀ C (E-W))` given `ciw = C (E - W)`, where `E` is the identity
/// padded with zero rows when `W` stacks lag blocks below the square part.
fn resid_diag(w: &DMatrix<f64>, ciw: &DMatrix<f64>) -> Vec<f64> {
    (0..w.ncols())
        .map(|j| {
            (0..w.nrows())
                .map(|i| {
                    let iw = if i == j { 1.0 - w[(i, j)] } else { -w[(i, j)] };
                    iw * ciw[(i, j)]
                })
                .sum()
        })
        .collect()
}

fn cov_times_iw(cov: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    cov * (DMatrix::<f64>::identity(w.nrows(), w.ncols()) - w)
}

/// Factorization of `sI - W∘W` for the square top block `W`.
fn ldet_factor(w: &DMatrix<f64>, s: f64) -> Option<PositiveLu> {
    let d = w.ncols();
    let top = w.rows(0, d).map(|x| x * x);
    PositiveLu::factor(&(DMatrix::<f64>::identity(d, d) * s - top))
}

/// Iterate (square `W`, possibly with lag blocks stacked below), the log-det
/// factorization of its top block, and the per-stage step state.
struct PathState {
    w: DMatrix<f64>,
    lu: PositiveLu,
    s: f64,
    adam: Adam,
    lr: f64,
    halvings: usize,
}

impl PathState {
    /// Enters a stage: fresh Adam state, step reset, `s` raised until `w`
    /// lies inside the domain.
    fn start_stage(w: DMatrix<f64>, stage: &Stage, cfg: &AdamConfig) -> Result<(Self, usize)> {
        let mut s = stage.s;
        let mut bumps = 0;
        let lu = loop {
            if let Some(lu) = ldet_factor(&w, s) {
                break lu;
            }
            if bumps == MAX_S_BUMPS {
                return Err(Error::DomainUnrecoverable { halvings: 0 });
            }
            s += S_BUMP;
            bumps += 1;
        };
        let adam = Adam::new(*cfg, w.nrows(), w.ncols());
        Ok((
            Self {
                w,
                lu,
                s,
                adam,
                lr: cfg.step,
                halvings: 0,
            },
            bumps,
        ))
    }

    fn h_value(&self) -> f64 {
        self.w.ncols() as f64 * self.s.ln() - self.lu.log_det()
    }

    /// One backtracked Adam step; returns the relative change of W.
    fn step(&mut self, smooth: &DMatrix<f64>, mu: f64, lambda: f64) -> Result<f64> {
        let minv = self.lu.inverse();
        let mut g = DMatrix::zeros(self.w.nrows(), self.w.ncols());
        for k in 0..g.len() {
            let wk = self.w[k];
            g[k] = mu * (smooth[k] + lambda * sign0(wk));
        }
        let d = self.w.ncols();
        for j in 0..d {
            for i in 0..d {
                g[(i, j)] += 2.0 * self.w[(i, j)] * minv[(j, i)];
            }
        }
        zero_diagonal(&mut g);
        let dir = self.adam.direction(&g);
        let mut consecutive = 0;
        loop {
            let mut cand = &self.w - &dir * self.lr;
            zero_diagonal(&mut cand);
            if let Some(lu) = ldet_factor(&cand, self.s) {
                let change = (&cand - &self.w).norm() / self.w.norm().max(f64::MIN_POSITIVE);
                self.w = cand;
                self.lu = lu;
                return Ok(change);
            }
            consecutive += 1;
            self.halvings += 1;
            if consecutive > MAX_HALVINGS {
                return Err(Error::DomainUnrecoverable { halvings: MAX_HALVINGS });
            }
            self.lr *= 0.5;
        }
    }
}

fn check_data(data: &Dataset) -> Result<()> {
    if data.d() < 2 {
        return Err(Error::Parameter("structure learning needs d >= 2".into()));
    }
    Ok(())
}

/// Raw central-path output before thresholding.
pub(crate) struct PathOutput {
    pub w_raw: DMatrix<f64>,
    pub noise: Option<NoiseEstimate>,
    pub stages: Vec<StageTrace>,
}

/// Central path for the `rows x d` parameter against the `rows x rows`
/// second-moment matrix `cov`; the first `d` rows form `W`.
pub(crate) fn run_path(cov: &DMatrix<f64>, d: usize, variant: Option<Variant>, cfg: &SolverConfig) -> Result<PathOutput> {
    cfg.validate()?;
    let mut conc = Concomitant::init(variant, &cov.view((0, 0), (d, d)).into_owned());
    let mut w = DMatrix::zeros(cov.nrows(), d);
    let mut stages = Vec::new();
    for stage in cfg.schedule.stages() {
        let (mut st, s_bumps) = PathState::start_stage(w, stage, &cfg.optimizer)?;
        let mut ciw = cov_times_iw(cov, &st.w);
        let mut last_obj = f64::NAN;
        let mut stop = StopReason::Cap;
        let mut iters = 0;
        while iters < stage.t_max {
            let smooth = conc.smooth_grad(&ciw);
            let change = st.step(&smooth, stage.mu, cfg.lambda)?;
            iters += 1;
            ciw = cov_times_iw(cov, &st.w);
            conc.update(&st.w, &ciw);
            if change < cfg.tol {
                stop = StopReason::Tolerance;
                break;
            }
            if cfg.checkpoint > 0 && iters % cfg.checkpoint == 0 {
                let obj = stage.mu * conc.score(&st.w, &ciw, cfg.lambda) + st.h_value();
                if ((last_obj - obj) / last_obj).abs() <= cfg.tol {
                    stop = StopReason::Tolerance;
                    break;
                }
                last_obj = obj;
            }
        }
        stages.push(StageTrace {
            mu: stage.mu,
            s: st.s,
            s_bumps,
            iters,
            stop,
            objective: stage.mu * conc.score(&st.w, &ciw, cfg.lambda) + st.h_value(),
            h_value: st.h_value(),
            step_halvings: st.halvings,
            final_step: st.lr,
            noise: conc.estimate(),
        });
        w = st.w;
    }
    Ok(PathOutput {
        w_raw: w,
        noise: conc.estimate(),
        stages,
    })
}

fn fit_square(data: &Dataset, variant: Option<Variant>, cfg: &SolverConfig) -> Result<FitResult> {
    check_data(data)?;
    let out = run_path(data.cov(), data.d(), variant, cfg)?;
    let (w, removed) = finalize(&out.w_raw, cfg.edge_threshold);
    Ok(FitResult {
        w,
        w_raw: out.w_raw,
        noise: out.noise,
        stages: out.stages,
        rounds: Vec::new(),
        removed_edges: removed,
        converged: true,
    })
}

/// CoLiDE with an equal (EV) or per-node (NV) concomitant noise scale.
pub fn fit_colide(data: &Dataset, variant: Variant, cfg: &SolverConfig) -> Result<FitResult> {
    fit_square(data, Some(variant), cfg)
}

/// Same central path on the OLS+ℓ1 score, with no noise estimate.
pub fn fit_dagma_ols(data: &Dataset, cfg: &SolverConfig) -> Result<FitResult> {
    fit_square(data, None, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineMode {
    CovRecursion,
    SufficientStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineConfig {
    pub solver: SolverConfig,
    pub mode: OnlineMode,
    /// Restart the residual accumulator `e_t` at each stage boundary.
    pub reset_stats_per_stage: bool,
    /// Keep every k-th iterate in the trajectory (the last one is always kept).
    pub record_every: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            mode: OnlineMode::CovRecursion,
            reset_stats_per_stage: true,
            record_every: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePoint {
    /// Number of batches consumed.
    pub t: usize,
    pub w: DMatrix<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineFit {
    pub trajectory: Vec<OnlinePoint>,
    pub result: FitResult,
    /// Covariance after the last batch.
    pub cov: DMatrix<f64>,
}

/// Endless stream of width-`n_b` windows over the columns of `x`, wrapping
/// around at the end.
pub fn ring_batches(x: &DMatrix<f64>, n_b: usize) -> impl Iterator<Item = DMatrix<f64>> + '_ {
    let n = x.ncols();
    let mut pos = 0;
    std::iter::from_fn(move || {
        if n_b == 0 || n == 0 {
            return None;
        }
        let b = DMatrix::from_fn(x.nrows(), n_b, |i, k| x[(i, (pos + k) % n)]);
        pos = (pos + n_b) % n;
        Some(b)
    })
}

/// Online CoLiDE-EV: each stage iteration consumes one batch, refreshes the
/// running covariance, takes one W step on it and updates σ per `mode`.
pub fn fit_online<I>(stream: I, cfg: &OnlineConfig) -> Result<OnlineFit>
where
    I: IntoIterator<Item = DMatrix<f64>>,
{
    let scfg = &cfg.solver;
    scfg.validate()?;
    let mut stream = stream.into_iter().peekable();
    let first = stream
        .peek()
        .ok_or_else(|| Error::Parameter("empty batch stream".into()))?;
    let (d, n_b) = (first.nrows(), first.ncols());
    if d < 2 || n_b == 0 {
        return Err(Error::Shape(format!("batches must be d x n_b with d >= 2, n_b >= 1, got {d}x{n_b}")));
    }

    let mut cov = DMatrix::zeros(d, d);
    let mut t = 0usize;
    let mut e_sum = 0.0;
    let mut e_count = 0usize;
    let mut sigma = f64::NAN;
    let mut floor = 0.0;
    let mut w = DMatrix::zeros(d, d);
    let mut trajectory = Vec::new();
    let mut stages = Vec::new();
    let mut exhausted = false;

    for stage in scfg.schedule.stages() {
        if exhausted {
            break;
        }
        let (mut st, s_bumps) = PathState::start_stage(w, stage, &scfg.optimizer)?;
        if cfg.reset_stats_per_stage {
            e_sum = 0.0;
            e_count = 0;
        }
        let mut stop = StopReason::Cap;
        let mut iters = 0;
        let mut last_obj = f64::NAN;
        while iters < stage.t_max {
            let Some(batch) = stream.next() else {
                stop = StopReason::Exhausted;
                exhausted = true;
                break;
            };
            if batch.nrows() != d || batch.ncols() != n_b {
                return Err(Error::Shape(format!(
                    "batch {t} is {}x{}, expected {d}x{n_b}",
                    batch.nrows(),
                    batch.ncols()
                )));
            }
            t += 1;
            let bcov = sample_cov(&batch);
            cov = (cov * (t - 1) as f64 + bcov) / t as f64;
            floor = sigma0_ev_cov(&cov).value;
            if t == 1 {
                sigma = init_scale(floor);
            }
            if cfg.mode == OnlineMode::SufficientStats {
                let resid = &batch - st.w.transpose() * &batch;
                e_sum += resid.norm_squared() / (n_b * d) as f64;
                e_count += 1;
            }
            let ciw = cov_times_iw(&cov, &st.w);
            let conc = Concomitant::Ev { sigma, floor };
            let change = st.step(&conc.smooth_grad(&ciw), stage.mu, scfg.lambda)?;
            iters += 1;
            let ciw = cov_times_iw(&cov, &st.w);
            sigma = match cfg.mode {
                OnlineMode::CovRecursion => {
                    let tr: f64 = resid_diag(&st.w, &ciw).iter().sum();
                    (tr.max(0.0) / d as f64).sqrt().max(floor)
                }
                OnlineMode::SufficientStats => (e_sum / e_count as f64).sqrt().max(floor),
            };
            if cfg.record_every > 0 && t.is_multiple_of(cfg.record_every) {
                trajectory.push(OnlinePoint { t, w: st.w.clone(), sigma });
            }
            if change < scfg.tol {
                stop = StopReason::Tolerance;
                break;
            }
            if scfg.checkpoint > 0 && iters % scfg.checkpoint == 0 {
                let obj = stage.mu * Concomitant::Ev { sigma, floor }.score(&st.w, &ciw, scfg.lambda) + st.h_value();
                if ((last_obj - obj) / last_obj).abs() <= scfg.tol {
                    stop = StopReason::Tolerance;
                    break;
                }
                last_obj = obj;
            }
        }
        let ciw = cov_times_iw(&cov, &st.w);
        let conc = Concomitant::Ev { sigma, floor };
        stages.push(StageTrace {
            mu: stage.mu,
            s: st.s,
            s_bumps,
            iters,
            stop,
            objective: stage.mu * conc.score(&st.w, &ciw, scfg.lambda) + st.h_value(),
            h_value: st.h_value(),
            step_halvings: st.halvings,
            final_step: st.lr,
            noise: conc.estimate(),
        });
        w = st.w;
    }
    if trajectory.last().map(|p| p.t) != Some(t) {
        trajectory.push(OnlinePoint { t, w: w.clone(), sigma });
    }
    let (w_final, removed) = finalize(&w, scfg.edge_threshold);
    Ok(OnlineFit {
        trajectory,
        result: FitResult {
            w: w_final,
            w_raw: w,
            noise: Some(NoiseEstimate::Ev { sigma, floor }),
            stages,
            rounds: Vec::new(),
            removed_edges: removed,
            converged: true,
        },
        cov,
    })
}
