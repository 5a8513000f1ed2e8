//! Score functions on the cached sample covariance, plus the closed-form
//! concomitant noise updates.
//!
//! Every score reports the gradient of its smooth part (diagonal zeroed,
//! since self-loops are never estimated) and, separately, the ℓ1 weight. A
//! first-order solver adds `l1_weight * sign(W)` itself; a proximal solver
//! would soft-threshold instead.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::zero_diagonal;
use crate::semsim::Dataset;

/// Floor factor relative to the data scale for `σ0` and `Σ0`.
pub const FLOOR_FACTOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEval {
    pub value: f64,
    /// Gradient of the smooth part of the score.
    pub grad: DMatrix<f64>,
    /// Weight of the `‖W‖₁` term not contained in `grad`.
    pub l1_weight: f64,
}

impl ScoreEval {
    /// `grad + l1_weight * sign(W)` (sign(0) = 0), diagonal zeroed.
    pub fn subgradient(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = &self.grad + w.map(|x| self.l1_weight * sign0(x));
        zero_diagonal(&mut g);
        g
    }
}

pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Noise lower bound together with a flag set when the data are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Floor<T> {
    pub value: T,
    pub degenerate: bool,
}

/// Current noise estimate of a concomitant fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseEstimate {
    Ev { sigma: f64, floor: f64 },
    Nv { sigmas: Vec<f64>, floor: Vec<f64> },
}

fn check_shapes(w: &DMatrix<f64>, data: &Dataset) -> Result<()> {
    if w.nrows() != data.d() || w.ncols() != data.d() {
        return Err(Error::Shape(format!(
            "W is {}x{} but data has d={}",
            w.nrows(),
            w.ncols(),
            data.d()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

fn l1(w: &DMatrix<f64>) -> f64 {
    w.iter().map(|x| x.abs()).sum()
}

/// `C (I - W)` and the residual covariance `(I - W)ᵀ C (I - W)`.
pub(crate) fn residual_parts(w: &DMatrix<f64>, cov: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = w.nrows();
    let iw = DMatrix::<f64>::identity(d, d) - w;
    let c_iw = cov * &iw;
    let resid = iw.transpose() * &c_iw;
    (c_iw, resid)
}

fn neg_with_zero_diag(mut g: DMatrix<f64>) -> DMatrix<f64> {
    g.neg_mut();
    zero_diagonal(&mut g);
    g
}

/// `½ tr((I-W)ᵀ C (I-W)) + λ‖W‖₁`.
pub fn score_ols_l1(w: &DMatrix<f64>, data: &Dataset, lambda: f64) -> Result<ScoreEval> {
    check_shapes(w, data)?;
    check_lambda(lambda)?;
    Ok(ols_on_cov(w, data.cov(), lambda))
}

pub(crate) fn ols_on_cov(w: &DMatrix<f64>, cov: &DMatrix<f64>, lambda: f64) -> ScoreEval {
    let (c_iw, resid) = residual_parts(w, cov);
    ScoreEval {
        value: 0.5 * resid.trace() + lambda * l1(w),
        grad: neg_with_zero_diag(c_iw),
        l1_weight: lambda,
    }
}

/// `‖X‖_F / sqrt(d n) × 10⁻²`.
pub fn sigma0_ev(data: &Dataset) -> Floor<f64> {
    sigma0_ev_cov(data.cov())
}

pub(crate) fn sigma0_ev_cov(cov: &DMatrix<f64>) -> Floor<f64> {
    // ‖X‖_F² / (d n) = tr(C) / d
    let value = (cov.trace() / cov.nrows() as f64).max(0.0).sqrt() * FLOOR_FACTOR;
    Floor {
        value,
        degenerate: !(value > 0.0),
    }
}

/// `sqrt(diag(C)) × 10⁻²`, element-wise.
pub fn sigma0_nv(data: &Dataset) -> Floor<Vec<f64>> {
    sigma0_nv_cov(data.cov())
}

pub(crate) fn sigma0_nv_cov(cov: &DMatrix<f64>) -> Floor<Vec<f64>> {
    let value: Vec<f64> = cov.diagonal().iter().map(|c| c.max(0.0).sqrt() * FLOOR_FACTOR).collect();
    let degenerate = value.iter().any(|v| !(*v > 0.0));
    Floor { value, degenerate }
}

/// `(1/2σ) tr((I-W)ᵀ C (I-W)) + dσ/2 + λ‖W‖₁`.
pub fn score_colide_ev(w: &DMatrix<f64>, sigma: f64, data: &Dataset, lambda: f64) -> Result<ScoreEval> {
    check_shapes(w, data)?;
    check_lambda(lambda)?;
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(colide_ev_on_cov(w, sigma, data.cov(), lambda))
}

pub(crate) fn colide_ev_on_cov(w: &DMatrix<f64>, sigma: f64, cov: &DMatrix<f64>, lambda: f64) -> ScoreEval {
    let d = w.nrows() as f64;
    let (c_iw, resid) = residual_parts(w, cov);
    ScoreEval {
        value: resid.trace() / (2.0 * sigma) + d * sigma / 2.0 + lambda * l1(w),
        grad: neg_with_zero_diag(c_iw / sigma),
        l1_weight: lambda,
    }
}

/// `max(sqrt(tr((I-W)ᵀ C (I-W)) / d), σ0)`.
pub fn sigma_hat_ev(w: &DMatrix<f64>, data: &Dataset, floor: f64) -> Result<f64> {
    check_shapes(w, data)?;
    Ok(sigma_hat_ev_cov(w, data.cov(), floor))
}

pub(crate) fn sigma_hat_ev_cov(w: &DMatrix<f64>, cov: &DMatrix<f64>, floor: f64) -> f64 {
    let (_, resid) = residual_parts(w, cov);
    (resid.trace().max(0.0) / w.nrows() as f64).sqrt().max(floor)
}

fn check_sigmas(sigmas: &[f64], d: usize) -> Result<()> {
    if sigmas.len() != d {
        return Err(Error::Shape(format!("{} noise scales for d={d}", sigmas.len())));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Parameter("noise scales must be positive".into()));
    }
    Ok(())
}

/// `½ tr((I-W)ᵀ C (I-W) Σ⁻¹) + ½ tr(Σ) + λ‖W‖₁` with `Σ = diag(sigmas)`.
pub fn score_colide_nv(w: &DMatrix<f64>, sigmas: &[f64], data: &Dataset, lambda: f64) -> Result<ScoreEval> {
    check_shapes(w, data)?;
    check_lambda(lambda)?;
    check_sigmas(sigmas, data.d())?;
    Ok(colide_nv_on_cov(w, sigmas, data.cov(), lambda))
}

pub(crate) fn colide_nv_on_cov(w: &DMatrix<f64>, sigmas: &[f64], cov: &DMatrix<f64>, lambda: f64) -> ScoreEval {
    let (mut c_iw, resid) = residual_parts(w, cov);
    let weighted: f64 = resid.diagonal().iter().zip(sigmas).map(|(r, s)| r / s).sum();
    for (j, s) in sigmas.iter().enumerate() {
        c_iw.column_mut(j).scale_mut(1.0 / s);
    }
    ScoreEval {
        value: 0.5 * weighted + 0.5 * sigmas.iter().sum::<f64>() + lambda * l1(w),
        grad: neg_with_zero_diag(c_iw),
        l1_weight: lambda,
    }
}

/// `max(sqrt(diag((I-W)ᵀ C (I-W))), Σ0)` element-wise.
pub fn sigma_hat_nv(w: &DMatrix<f64>, data: &Dataset, floor: &[f64]) -> Result<Vec<f64>> {
    check_shapes(w, data)?;
    if floor.len() != data.d() {
        return Err(Error::Shape("floor length must equal d".into()));
    }
    Ok(sigma_hat_nv_cov(w, data.cov(), floor))
}

pub(crate) fn sigma_hat_nv_cov(w: &DMatrix<f64>, cov: &DMatrix<f64>, floor: &[f64]) -> Vec<f64> {
    let (_, resid) = residual_parts(w, cov);
    resid
        .diagonal()
        .iter()
        .zip(floor)
        .map(|(r, f)| r.max(0.0).sqrt().max(*f))
        .collect()
}

/// `½ tr((I-W)ᵀ C (I-W)) + λ Σ W_ij` for `W >= 0`; the linear penalty is
/// smooth on the orthant and lives in `grad`.
pub fn score_nonneg(w: &DMatrix<f64>, data: &Dataset, lambda: f64) -> Result<ScoreEval> {
    check_shapes(w, data)?;
    check_lambda(lambda)?;
    if w.iter().any(|x| *x < 0.0) {
        return Err(Error::Domain("non-negative score evaluated at a negative entry".into()));
    }
    Ok(nonneg_on_cov(w, data.cov(), lambda))
}

pub(crate) fn nonneg_on_cov(w: &DMatrix<f64>, cov: &DMatrix<f64>, lambda: f64) -> ScoreEval {
    let (c_iw, resid) = residual_parts(w, cov);
    let mut grad = -c_iw;
    grad.add_scalar_mut(lambda);
    zero_diagonal(&mut grad);
    ScoreEval {
        value: 0.5 * resid.trace() + lambda * w.sum(),
        grad,
        l1_weight: 0.0,
    }
}

/// Residual standard deviations `sqrt(diag((I-W)ᵀ C (I-W)))` without floor.
pub fn residual_scales(w: &DMatrix<f64>, data: &Dataset) -> Result<DVector<f64>> {
    check_shapes(w, data)?;
    let (_, resid) = residual_parts(w, data.cov());
    Ok(resid.diagonal().map(|r| r.max(0.0).sqrt()))
}
