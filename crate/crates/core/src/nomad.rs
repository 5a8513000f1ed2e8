//! Non-negative DAG learning by the method of multipliers on
//! `L_c(W, α) = S₊(W) + α H₊(W; s) + (c/2) H₊(W; s)²`, and its joint
//! instantaneous/lagged variant for structural VAR models.
//!
//! The inner problem is solved by projected (proximal for the lag blocks)
//! gradient descent with Armijo backtracking. Trial points outside
//! `{ρ(W) < s}` are rejected by halving the step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::acyclicity::{h_ldet_nonneg, AcyclicityEval};
use crate::colide::{finalize, run_path, FitResult, RoundTrace, SolverConfig, StageTrace, MAX_HALVINGS};
use crate::error::{Error, Result};
use crate::graphs::{threshold_matrix, WeightedDigraph};
use crate::linalg::{zero_diagonal, PositiveLu};
use crate::scores::residual_parts;
use crate::semsim::{Dataset, TimeSeries};

// Armijo reductions tolerated before the inner loop declares a stall.
const MAX_ARMIJO: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomConfig {
    pub alpha0: f64,
    pub c0: f64,
    pub gamma: f64,
    pub eta: f64,
    pub eps_h: f64,
    pub outer_max: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
}

impl Default for MomConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.0,
            c0: 1.0,
            gamma: 5.0,
            eta: 0.5,
            eps_h: 1e-8,
            outer_max: 30,
            inner_tol: 1e-6,
            inner_max: 5000,
        }
    }
}

impl MomConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) || !(self.gamma >= 1.0) || !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Parameter("MoM needs c0 > 0, gamma >= 1, eta in (0, 1)".into()));
        }
        if !(self.eps_h > 0.0) || !(self.inner_tol > 0.0) || self.outer_max == 0 || self.inner_max == 0 {
            return Err(Error::Parameter("MoM tolerances and iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NomadConfig {
    pub lambda: f64,
    /// Log-det parameter of `H₊`.
    pub s: f64,
    pub edge_threshold: f64,
    pub mom: MomConfig,
}

impl Default for NomadConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            s: 1.0,
            edge_threshold: 0.1,
            mom: MomConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvarmConfig {
    pub tau_max: usize,
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub s: f64,
    pub edge_threshold: f64,
    pub lag_threshold: f64,
    pub mom: MomConfig,
}

impl Default for SvarmConfig {
    fn default() -> Self {
        Self {
            tau_max: 1,
            lambda_w: 0.01,
            lambda_a: 0.01,
            s: 1.0,
            edge_threshold: 0.1,
            lag_threshold: 0.05,
            mom: MomConfig::default(),
        }
    }
}

/// Multiplier, penalty and the history of constraint residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierState {
    pub alpha: f64,
    pub c: f64,
    pub residual_history: Vec<f64>,
}

impl MultiplierState {
    pub fn new(cfg: &MomConfig) -> Self {
        Self {
            alpha: cfg.alpha0,
            c: cfg.c0,
            residual_history: Vec::new(),
        }
    }

    /// Dual ascent `α += c·h`, then `c *= γ` unless `h <= η·h_prev`.
    /// Returns whether the penalty grew.
    pub fn update(&mut self, h: f64, cfg: &MomConfig) -> bool {
        self.alpha += self.c * h;
        let grow = match self.residual_history.last() {
            Some(&prev) => h > cfg.eta * prev,
            None => false,
        };
        if grow {
            self.c *= cfg.gamma;
        }
        self.residual_history.push(h);
        grow
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianEval {
    pub value: f64,
    pub gradient: DMatrix<f64>,
    pub h: AcyclicityEval,
}

/// `L_c(W, α)` and its gradient `∇S₊ + (α + c H₊) ∇H₊`, diagonal zeroed.
pub fn augmented_lagrangian(w: &DMatrix<f64>, alpha: f64, c: f64, data: &Dataset, lambda: f64, s: f64) -> Result<LagrangianEval> {
    if w.nrows() != data.d() || w.ncols() != data.d() {
        return Err(Error::Shape(format!("W is {:?}, data has d={}", w.shape(), data.d())));
    }
    let h = h_ldet_nonneg(w, s)?;
    let (c_iw, resid) = residual_parts(w, data.cov());
    let value = 0.5 * resid.trace() + lambda * w.sum() + alpha * h.value + 0.5 * c * h.value * h.value;
    let mut gradient = -c_iw + &h.gradient * (alpha + c * h.value);
    gradient.add_scalar_mut(lambda);
    zero_diagonal(&mut gradient);
    Ok(LagrangianEval { value, gradient, h })
}

/// Smooth part of the augmented Lagrangian over `B = [W; A_1; ...]` with
/// second-moment matrix `m`.
struct Inner<'a> {
    m: &'a DMatrix<f64>,
    d: usize,
    lambda_w: f64,
    lambda_a: f64,
    s: f64,
    alpha: f64,
    c: f64,
}

struct Point {
    b: DMatrix<f64>,
    value: f64,
    r: DMatrix<f64>,
    lu: PositiveLu,
    h: f64,
}

struct InnerOutcome {
    iters: usize,
    converged: bool,
}

impl Inner<'_> {
    fn eval(&self, b: DMatrix<f64>) -> Option<Point> {
        let d = self.d;
        let top = b.rows(0, d);
        let lu = PositiveLu::factor(&(DMatrix::<f64>::identity(d, d) * self.s - top))?;
        let h = (d as f64 * self.s.ln() - lu.log_det()).max(0.0);
        let e_b = DMatrix::<f64>::identity(b.nrows(), d) - &b;
        let r = self.m * &e_b;
        let ls = 0.5 * e_b.component_mul(&r).sum();
        let value = ls + self.lambda_w * top.sum() + self.alpha * h + 0.5 * self.c * h * h;
        Some(Point { b, value, r, lu, h })
    }

    fn grad(&self, p: &Point) -> DMatrix<f64> {
        let d = self.d;
        let mut g = -&p.r;
        let coef = self.alpha + self.c * p.h;
        let inv = p.lu.inverse();
        for j in 0..d {
            for i in 0..d {
                g[(i, j)] += self.lambda_w + coef * inv[(j, i)];
            }
        }
        zero_diagonal(&mut g);
        g
    }

    /// Projection onto `W >= 0` with zero diagonal, soft-thresholding of the
    /// lag rows.
    fn prox(&self, mut b: DMatrix<f64>, step: f64) -> DMatrix<f64> {
        let d = self.d;
        let shrink = step * self.lambda_a;
        for j in 0..d {
            for i in 0..b.nrows() {
                let x = b[(i, j)];
                b[(i, j)] = if i < d {
                    if i == j {
                        0.0
                    } else {
                        x.max(0.0)
                    }
                } else {
                    x.signum() * (x.abs() - shrink).max(0.0)
                };
            }
        }
        b
    }

    fn l1_lags(&self, b: &DMatrix<f64>) -> f64 {
        self.lambda_a * b.rows(self.d, b.nrows() - self.d).iter().map(|x| x.abs()).sum::<f64>()
    }

    fn minimize(&self, start: Point, step: &mut f64, cfg: &MomConfig) -> Result<(Point, InnerOutcome)> {
        let mut p = start;
        for it in 1..=cfg.inner_max {
            let g = self.grad(&p);
            let mut domain_fails = 0;
            let mut armijo_fails = 0;
            let next = loop {
                let cand = self.prox(&p.b - &g * *step, *step);
                let diff = &cand - &p.b;
                let dn = diff.norm();
                if dn == 0.0 {
                    return Ok((p, InnerOutcome { iters: it, converged: true }));
                }
                match self.eval(cand) {
                    None => {
                        domain_fails += 1;
                        if domain_fails > MAX_HALVINGS {
                            return Err(Error::DomainUnrecoverable { halvings: MAX_HALVINGS });
                        }
                    }
                    Some(q) => {
                        let bound = p.value + g.dot(&diff) + dn * dn / (2.0 * *step);
                        if q.value <= bound + 1e-12 * p.value.abs() {
                            break q;
                        }
                        armijo_fails += 1;
                        if armijo_fails > MAX_ARMIJO {
                            return Ok((p, InnerOutcome { iters: it, converged: false }));
                        }
                    }
                }
                *step *= 0.5;
            };
            let rel = (&next.b - &p.b).norm() / p.b.norm().max(1.0);
            p = next;
            *step *= 2.0;
            if rel < cfg.inner_tol {
                return Ok((p, InnerOutcome { iters: it, converged: true }));
            }
        }
        Ok((p, InnerOutcome { iters: cfg.inner_max, converged: false }))
    }
}

struct MomOutput {
    b: DMatrix<f64>,
    rounds: Vec<RoundTrace>,
    converged: bool,
}

fn run_mom(m: &DMatrix<f64>, d: usize, lambda_w: f64, lambda_a: f64, s: f64, cfg: &MomConfig) -> Result<MomOutput> {
    cfg.validate()?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Parameter(format!("s must be positive, got {s}")));
    }
    if !(lambda_w >= 0.0) || !(lambda_a >= 0.0) {
        return Err(Error::Parameter("penalty weights must be >= 0".into()));
    }
    let mut state = MultiplierState::new(cfg);
    let mut inner = Inner {
        m,
        d,
        lambda_w,
        lambda_a,
        s,
        alpha: state.alpha,
        c: state.c,
    };
    let mut point = inner
        .eval(DMatrix::zeros(m.nrows(), d))
        .expect("zero matrix lies in every log-det domain");
    let mut step = 1.0 / m.diagonal().max().max(f64::MIN_POSITIVE);
    let mut rounds = Vec::new();
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for _ in 0..cfg.outer_max {
        inner.alpha = state.alpha;
        inner.c = state.c;
        // the multipliers changed, so re-evaluate the objective at the start
        point = inner.eval(point.b).expect("accepted iterates stay in the domain");
        let (p, outcome) = inner.minimize(point, &mut step, cfg)?;
        point = p;
        let h = point.h;
        rounds.push(RoundTrace {
            alpha: state.alpha,
            c: state.c,
            h_value: h,
            inner_iters: outcome.iters,
            inner_converged: outcome.converged,
            lagrangian: point.value + inner.l1_lags(&point.b),
        });
        if best.as_ref().is_none_or(|(bh, _)| h <= *bh) {
            best = Some((h, point.b.clone()));
        }
        if h < cfg.eps_h && outcome.converged {
            return Ok(MomOutput {
                b: point.b,
                rounds,
                converged: true,
            });
        }
        state.update(h, cfg);
    }
    Ok(MomOutput {
        b: best.expect("at least one round").1,
        rounds,
        converged: false,
    })
}

/// Non-negative DAG estimate by the method of multipliers.
pub fn fit_nomad(data: &Dataset, cfg: &NomadConfig) -> Result<FitResult> {
    let d = data.d();
    if d < 2 {
        return Err(Error::Parameter("structure learning needs d >= 2".into()));
    }
    let out = run_mom(data.cov(), d, cfg.lambda, 0.0, cfg.s, &cfg.mom)?;
    let (w, removed) = finalize(&out.b, cfg.edge_threshold);
    Ok(FitResult {
        w,
        w_raw: out.b,
        noise: None,
        stages: Vec::new(),
        rounds: out.rounds,
        removed_edges: removed,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvarmFit {
    /// Thresholded acyclic instantaneous matrix.
    pub w: WeightedDigraph,
    /// Thresholded lag matrices `A_1..A_τ`.
    pub lags: Vec<DMatrix<f64>>,
    pub w_raw: DMatrix<f64>,
    pub lags_raw: Vec<DMatrix<f64>>,
    pub rounds: Vec<RoundTrace>,
    pub stages: Vec<StageTrace>,
    pub removed_edges: Vec<(usize, usize, f64)>,
    pub converged: bool,
}

/// Second moment `Z Zᵀ / n_eff` of the stacked design
/// `Z = [X_t; X_{t-1}; ...; X_{t-τ}]` over `t = τ..T-1`.
pub fn svarm_moment(series: &TimeSeries, tau_max: usize) -> Result<DMatrix<f64>> {
    let (d, t_max) = (series.d(), series.len());
    if t_max <= tau_max + 1 {
        return Err(Error::Parameter(format!("series of length {t_max} is too short for lag order {tau_max}")));
    }
    let n_eff = t_max - tau_max;
    let z = DMatrix::from_fn(d * (tau_max + 1), n_eff, |r, k| {
        let (lag, i) = (r / d, r % d);
        series.x[(i, k + tau_max - lag)]
    });
    Ok(&z * z.transpose() / n_eff as f64)
}

fn split_lags(b: &DMatrix<f64>, d: usize, tau_max: usize) -> Vec<DMatrix<f64>> {
    (1..=tau_max).map(|k| b.rows(k * d, d).into_owned()).collect()
}

/// Joint non-negative `W` and unconstrained lag matrices for a structural
/// VAR of order `cfg.tau_max`.
pub fn fit_nomad_svarm(series: &TimeSeries, cfg: &SvarmConfig) -> Result<SvarmFit> {
    let d = series.d();
    let m = svarm_moment(series, cfg.tau_max)?;
    let out = run_mom(&m, d, cfg.lambda_w, cfg.lambda_a, cfg.s, &cfg.mom)?;
    let w_raw = out.b.rows(0, d).into_owned();
    let (w, removed) = finalize(&w_raw, cfg.edge_threshold);
    let lags_raw = split_lags(&out.b, d, cfg.tau_max);
    Ok(SvarmFit {
        w,
        lags: lags_raw.iter().map(|a| threshold_matrix(a, cfg.lag_threshold)).collect(),
        w_raw,
        lags_raw,
        rounds: out.rounds,
        stages: Vec::new(),
        removed_edges: removed,
        converged: out.converged,
    })
}

/// Sign-agnostic baseline on the same lagged design: the OLS+ℓ1 central
/// path with `H_ldet` on `W` and the ℓ1 subgradient on every block.
pub fn fit_dagma_svarm(series: &TimeSeries, tau_max: usize, lag_threshold: f64, cfg: &SolverConfig) -> Result<SvarmFit> {
    let d = series.d();
    if d < 2 {
        return Err(Error::Parameter("structure learning needs d >= 2".into()));
    }
    let m = svarm_moment(series, tau_max)?;
    let out = run_path(&m, d, None, cfg)?;
    let w_raw = out.w_raw.rows(0, d).into_owned();
    let (w, removed) = finalize(&w_raw, cfg.edge_threshold);
    let lags_raw = split_lags(&out.w_raw, d, tau_max);
    Ok(SvarmFit {
        w,
        lags: lags_raw.iter().map(|a| threshold_matrix(a, lag_threshold)).collect(),
        w_raw,
        lags_raw,
        rounds: Vec::new(),
        stages: out.stages,
        removed_edges: removed,
        converged: true,
    })
}
