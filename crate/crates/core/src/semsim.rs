//! Forward simulation of linear SEMs and structural VAR time series.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gumbel, StandardNormal};

use crate::error::{Error, Result};
use crate::graphs::{topological_order, WeightedDigraph};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Exponential,
    Gumbel,
}

/// Exogenous noise: a family plus per-node standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigmas: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Parameter("noise standard deviations must be positive".into()));
        }
        Ok(Self { family, sigmas })
    }

    /// Equal-variance noise with standard deviation `sigma` on `d` nodes.
    pub fn equal(family: NoiseFamily, d: usize, sigma: f64) -> Result<Self> {
        Self::new(family, vec![sigma; d])
    }

    /// Zero-mean, unit-variance draw of the family, scaled by `sigma`.
    fn draw<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> f64 {
        let z: f64 = match self.family {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Exponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            NoiseFamily::Gumbel => {
                let g: f64 = Gumbel::new(0.0, 1.0).expect("unit gumbel").sample(rng);
                (g - EULER_GAMMA) * 6f64.sqrt() / std::f64::consts::PI
            }
        };
        sigma * z
    }

    fn draw_matrix<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.sigmas.len();
        // column-major fill: one sample (all nodes) at a time
        let mut z = DMatrix::zeros(d, n);
        for t in 0..n {
            for i in 0..d {
                z[(i, t)] = self.draw(self.sigmas[i], rng);
            }
        }
        z
    }
}

/// `d x n` samples (columns are observations) with the uncentered sample
/// covariance `(1/n) X Xᵀ` cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Shape(format!("dataset must be nonempty, got {}x{}", x.nrows(), x.ncols())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("dataset has non-finite entries".into()));
        }
        let cov = sample_cov(&x);
        Ok(Self { x, cov })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }
}

/// Multivariate series, column `t` is the observation at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub x: DMatrix<f64>,
    pub tau_max: usize,
}

impl TimeSeries {
    pub fn new(x: DMatrix<f64>, tau_max: usize) -> Result<Self> {
        if x.ncols() <= tau_max {
            return Err(Error::Parameter(format!(
                "series length {} must exceed lag order {tau_max}",
                x.ncols()
            )));
        }
        Ok(Self { x, tau_max })
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

/// `(1/n) X Xᵀ`, no centering.
pub fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols().max(1) as f64;
    (x * x.transpose()) / n
}

fn check_noise(w: &WeightedDigraph, noise: &NoiseSpec) -> Result<()> {
    if noise.sigmas.len() != w.d() {
        return Err(Error::Shape(format!(
            "noise has {} entries for a {}-node graph",
            noise.sigmas.len(),
            w.d()
        )));
    }
    Ok(())
}

/// Draws `n` i.i.d. samples of `x = Wᵀx + z`, propagating in topological order.
pub fn sample_linear_sem<R: Rng + ?Sized>(
    w: &WeightedDigraph,
    noise: &NoiseSpec,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be >= 1".into()));
    }
    check_noise(w, noise)?;
    let order = topological_order(w)?;
    let z = noise.draw_matrix(n, rng);
    let x = propagate(w.weights(), &order, z);
    Dataset::new(x)
}

// Solves X = WᵀX + B row by row in topological order.
fn propagate(w: &DMatrix<f64>, order: &[usize], mut b: DMatrix<f64>) -> DMatrix<f64> {
    let d = w.nrows();
    for &j in order {
        for i in 0..d {
            let wij = w[(i, j)];
            if wij != 0.0 {
                for c in 0..b.ncols() {
                    let v = b[(i, c)];
                    b[(j, c)] += wij * v;
                }
            }
        }
    }
    b
}

/// Spectral radius of the companion matrix of the reduced-form VAR
/// `x_t = Σ_τ Φ_τ x_{t-τ} + ...` with `Φ_τ = (I - Wᵀ)⁻¹ A_τᵀ`.
pub fn svarm_companion_radius(w: &DMatrix<f64>, lags: &[DMatrix<f64>]) -> Result<f64> {
    let d = w.nrows();
    let p = lags.len();
    if p == 0 {
        return Ok(0.0);
    }
    let ident = DMatrix::<f64>::identity(d, d);
    let inv = (&ident - w.transpose())
        .try_inverse()
        .ok_or_else(|| Error::Parameter("I - Wᵀ is singular".into()))?;
    let mut comp = DMatrix::zeros(d * p, d * p);
    for (k, a) in lags.iter().enumerate() {
        let phi = &inv * a.transpose();
        comp.view_mut((0, k * d), (d, d)).copy_from(&phi);
    }
    for k in 1..p {
        comp.view_mut((k * d, (k - 1) * d), (d, d)).copy_from(&ident);
    }
    let eig = comp.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Simulates `x_t = Wᵀx_t + Σ_τ A_τᵀ x_{t-τ} + z_t` from a zero initial state,
/// discarding `burn_in` leading steps.
pub fn sample_svarm<R: Rng + ?Sized>(
    w: &WeightedDigraph,
    lags: &[DMatrix<f64>],
    noise: &NoiseSpec,
    t_max: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<TimeSeries> {
    check_noise(w, noise)?;
    let d = w.d();
    let tau_max = lags.len();
    if lags.iter().any(|a| a.nrows() != d || a.ncols() != d) {
        return Err(Error::Shape("lag matrices must be d x d".into()));
    }
    if t_max <= tau_max {
        return Err(Error::Parameter(format!("t_max {t_max} must exceed tau_max {tau_max}")));
    }
    let order = topological_order(w)?;
    let rho = svarm_companion_radius(w.weights(), lags)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let total = burn_in + t_max;
    let mut x = DMatrix::<f64>::zeros(d, total);
    let lag_t: Vec<DMatrix<f64>> = lags.iter().map(|a| a.transpose()).collect();
    for t in 0..total {
        let mut b = DMatrix::<f64>::zeros(d, 1);
        for i in 0..d {
            b[(i, 0)] = noise.draw(noise.sigmas[i], rng);
        }
        for (k, at) in lag_t.iter().enumerate() {
            let tau = k + 1;
            if t >= tau {
                b += at * x.column(t - tau);
            }
        }
        let col = propagate(w.weights(), &order, b);
        x.column_mut(t).copy_from(&col.column(0));
    }
    TimeSeries::new(x.columns(burn_in, t_max).into_owned(), tau_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_node(w01: f64) -> WeightedDigraph {
        WeightedDigraph::new(DMatrix::from_row_slice(2, 2, &[0.0, w01, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn sample_cov_examples() {
        assert_eq!(sample_cov(&DMatrix::identity(3, 3)), DMatrix::identity(3, 3) / 3.0);
        assert_eq!(sample_cov(&DMatrix::zeros(2, 4)), DMatrix::zeros(2, 2));
        let x = DMatrix::from_row_slice(3, 5, &[
            0.3, -1.2, 2.0, 0.5, 0.1, 1.1, 0.0, -0.7, 0.4, 2.2, -0.6, 0.8, 0.9, -1.5, 0.3,
        ]);
        let c = sample_cov(&x);
        for i in 0..3 {
            for j in 0..3 {
                let direct: f64 = (0..5).map(|t| x[(i, t)] * x[(j, t)]).sum::<f64>() / 5.0;
                assert!((c[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_noise_covariance_is_identity() {
        let w = WeightedDigraph::zeros(3);
        let noise = NoiseSpec::equal(NoiseFamily::Gaussian, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = sample_linear_sem(&w, &noise, 10_000, &mut rng).unwrap();
        let diff = data.cov() - DMatrix::<f64>::identity(3, 3);
        assert!(diff.amax() < 0.1, "{diff}");
    }

    #[test]
    fn two_node_population_covariance() {
        let w = 0.8;
        let noise = NoiseSpec::equal(NoiseFamily::Gaussian, 2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let data = sample_linear_sem(&two_node(w), &noise, n, &mut rng).unwrap();
        let pop = [[1.0, w], [w, 1.0 + w * w]];
        // std error of an uncentered Gaussian second moment: sqrt((S_ii S_jj + S_ij^2)/n)
        for i in 0..2 {
            for j in 0..2 {
                let se = ((pop[i][i] * pop[j][j] + pop[i][j] * pop[i][j]) / n as f64).sqrt();
                assert!((data.cov()[(i, j)] - pop[i][j]).abs() < 5.0 * se);
            }
        }
    }

    #[test]
    fn heteroscedastic_residual_variances() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.2;
        w[(1, 2)] = -0.7;
        w[(0, 2)] = 0.5;
        let w = WeightedDigraph::new(w).unwrap();
        let variances = [0.5, 4.0, 10.0];
        let noise = NoiseSpec::new(NoiseFamily::Gaussian, variances.iter().map(|v: &f64| v.sqrt()).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = sample_linear_sem(&w, &noise, 100_000, &mut rng).unwrap();
        let resid = data.x() - w.weights().transpose() * data.x();
        let rc = sample_cov(&resid);
        for i in 0..3 {
            assert!((rc[(i, i)] / variances[i] - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn non_gaussian_noise_is_centered_and_scaled() {
        for family in [NoiseFamily::Exponential, NoiseFamily::Gumbel] {
            let noise = NoiseSpec::equal(family, 2, 2.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let data = sample_linear_sem(&WeightedDigraph::zeros(2), &noise, 100_000, &mut rng).unwrap();
            for i in 0..2 {
                let m = data.x().row(i).mean();
                assert!(m.abs() < 0.05, "{family:?} mean {m}");
                assert!((data.cov()[(i, i)] / 4.0 - 1.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn sem_is_deterministic_per_seed() {
        let noise = NoiseSpec::equal(NoiseFamily::Gumbel, 2, 1.0).unwrap();
        let a = sample_linear_sem(&two_node(1.0), &noise, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_linear_sem(&two_node(1.0), &noise, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sem_rejects_cycles_and_bad_shapes() {
        let w = WeightedDigraph::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let noise = NoiseSpec::equal(NoiseFamily::Gaussian, 2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_linear_sem(&w, &noise, 10, &mut rng), Err(Error::Cyclic { .. })));
        let noise3 = NoiseSpec::equal(NoiseFamily::Gaussian, 3, 1.0).unwrap();
        assert!(sample_linear_sem(&two_node(1.0), &noise3, 10, &mut rng).is_err());
        assert!(NoiseSpec::new(NoiseFamily::Gaussian, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn ar1_variance() {
        let a = 0.6;
        let noise = NoiseSpec::equal(NoiseFamily::Gaussian, 1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ts = sample_svarm(
            &WeightedDigraph::zeros(1),
            &[DMatrix::from_element(1, 1, a)],
            &noise,
            100_000,
            200,
            &mut rng,
        )
        .unwrap();
        let var = ts.x.row(0).map(|v| v * v).mean();
        assert!((var * (1.0 - a * a) - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn zero_lags_give_iid_sem_samples() {
        let noise = NoiseSpec::equal(NoiseFamily::Gaussian, 2, 1.0).unwrap();
        let ts = sample_svarm(&two_node(0.9), &[DMatrix::zeros(2, 2)], &noise, 50_000, 0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let c = sample_cov(&ts.x);
        assert!((c[(0, 1)] - 0.9).abs() < 0.05);
        assert!((c[(1, 1)] - 1.81).abs() < 0.08);
    }

    #[test]
    fn unstable_svarm_is_rejected() {
        let noise = NoiseSpec::equal(NoiseFamily::Gaussian, 1, 1.0).unwrap();
        let r = sample_svarm(
            &WeightedDigraph::zeros(1),
            &[DMatrix::from_element(1, 1, 1.05)],
            &noise,
            100,
            0,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(r, Err(Error::Unstable { .. })));
    }
}
