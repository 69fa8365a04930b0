//! Gaussian-process regression with a Matern-5/2 ARD kernel: marginal
//! likelihood with analytic gradients, hyperparameter fitting by bounded
//! quasi-Newton restarts, predictive distributions, and noiseless
//! conditioning on a sampled optimum.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::optimize::{maximize_bounded, OptimizeControl};

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = crate::alpha::LN_2PI;

/// Jitter ladder applied to the kernel matrix diagonal when Cholesky fails;
/// noiseless conditioning makes the matrix singular near duplicate inputs.
const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Matern-5/2 ARD kernel hyperparameters plus a constant mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    /// One positive length-scale per input dimension.
    pub lengthscales: Vec<f64>,
    /// Prior variance `k(x, x)`.
    pub amplitude: f64,
    /// Observation-noise variance.
    pub noise_variance: f64,
    pub mean_constant: f64,
}

impl GpHyperparams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.lengthscales.len(),
            });
        }
        if !self.lengthscales.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(Error::InvalidArgument("length-scales must be positive".into()));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidArgument("amplitude must be positive".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        if !self.mean_constant.is_finite() {
            return Err(Error::InvalidArgument("mean constant must be finite".into()));
        }
        Ok(())
    }

    /// Prior defaults used when too little data is available for fitting:
    /// length-scales at 20% of each dimension's range.
    pub fn defaults_for(data: &Dataset) -> Self {
        let bounds = data.bounds();
        Self {
            lengthscales: (0..bounds.dim())
                .map(|d| (0.2 * bounds.range(d)).max(1e-6))
                .collect(),
            amplitude: 1.0,
            noise_variance: 1e-6,
            mean_constant: data.output_mean(),
        }
    }
}

/// Gaussian predictive distribution of the latent function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveGaussian {
    pub mean: f64,
    /// Latent (noise-free) variance, clamped to `[0, amplitude]`.
    pub variance: f64,
    /// `variance` plus the observation-noise variance.
    pub with_noise_variance: f64,
}

/// Controls for marginal-likelihood fitting.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Random restarts in addition to the heuristic initial point.
    pub restarts: usize,
    /// Quasi-Newton iteration cap per restart.
    pub max_iters: usize,
    pub seed: u64,
    /// Known-noise mode: pin the noise variance instead of fitting it.
    pub fixed_noise: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 60,
            seed: 0,
            fixed_noise: None,
        }
    }
}

/// Gradient of the log marginal likelihood in natural parameterization.
#[derive(Debug, Clone)]
pub struct LmlGradient {
    pub lengthscales: Vec<f64>,
    pub amplitude: f64,
    pub noise_variance: f64,
    pub mean_constant: f64,
}

/// Matern-5/2 ARD kernel value between two points.
pub fn kernel_eval(x: &[f64], x2: &[f64], hp: &GpHyperparams) -> Result<f64> {
    if x.len() != x2.len() || x.len() != hp.lengthscales.len() {
        return Err(Error::DimensionMismatch {
            expected: hp.lengthscales.len(),
            got: if x.len() != hp.lengthscales.len() { x.len() } else { x2.len() },
        });
    }
    hp.validate(x.len())?;
    Ok(matern52(scaled_distance(x, x2, &hp.lengthscales), hp.amplitude))
}

fn scaled_distance(x: &[f64], x2: &[f64], lengthscales: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((a, b), l) in x.iter().zip(x2).zip(lengthscales) {
        let d = (a - b) / l;
        acc += d * d;
    }
    acc.sqrt()
}

fn matern52(r: f64, amplitude: f64) -> f64 {
    let sr = SQRT5 * r;
    amplitude * (1.0 + sr + 5.0 * r * r / 3.0) * (-sr).exp()
}

/// Immutable fitted GP: data, hyperparameters, and the Cholesky factor of the
/// regularized kernel matrix. Conditioning produces a new model.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: Dataset,
    hp: GpHyperparams,
    /// Per-point observation-noise variance; conditioning appends zeros.
    point_noise: Vec<f64>,
    /// Lower-triangular factor of `K + diag(point_noise) + jitter I`.
    chol: Array2<f64>,
    /// `(K + diag(point_noise))^-1 (y - mean)`.
    alpha_vec: Array1<f64>,
    jitter: f64,
}

impl GpModel {
    /// Builds a model from data and hyperparameters with homoscedastic noise.
    pub fn new(data: Dataset, hp: GpHyperparams) -> Result<Self> {
        let noise = vec![hp.noise_variance; data.len()];
        Self::with_point_noise(data, hp, noise)
    }

    fn with_point_noise(data: Dataset, hp: GpHyperparams, point_noise: Vec<f64>) -> Result<Self> {
        hp.validate(data.dim())?;
        if !data.outputs().iter().all(|y| y.is_finite()) {
            return Err(Error::Data("non-finite outputs".into()));
        }
        let n = data.len();
        let mut k = kernel_matrix(data.inputs(), &hp);
        for i in 0..n {
            k[[i, i]] += point_noise[i];
        }
        let (chol, jitter) = cholesky_with_jitter(&k)?;
        let resid = Array1::from_iter(data.outputs().iter().map(|y| y - hp.mean_constant));
        let alpha_vec = chol_solve(&chol, &resid);
        Ok(Self {
            data,
            hp,
            point_noise,
            chol,
            alpha_vec,
            jitter,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[cfg(test)]
    pub(crate) fn chol(&self) -> &Array2<f64> {
        &self.chol
    }

    /// Predictive distribution of the latent function at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<PredictiveGaussian> {
        Ok(self.predict_parts(x)?.0)
    }

    /// Predictive plus the forward-solved cross-covariance `L^-1 k_n(x)`,
    /// reused by acquisition code for rank-one conditioning.
    pub(crate) fn predict_parts(&self, x: &[f64]) -> Result<(PredictiveGaussian, Array1<f64>)> {
        if x.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: x.len(),
            });
        }
        let n = self.data.len();
        if n == 0 {
            return Ok((
                PredictiveGaussian {
                    mean: self.hp.mean_constant,
                    variance: self.hp.amplitude,
                    with_noise_variance: self.hp.amplitude + self.hp.noise_variance,
                },
                Array1::zeros(0),
            ));
        }
        let k_vec = self.cross_cov(x);
        let u = forward_solve(&self.chol, &k_vec);
        let mean = self.hp.mean_constant + k_vec.dot(&self.alpha_vec);
        let variance = (self.hp.amplitude - u.dot(&u)).clamp(0.0, self.hp.amplitude);
        Ok((
            PredictiveGaussian {
                mean,
                variance,
                with_noise_variance: variance + self.hp.noise_variance,
            },
            u,
        ))
    }

    pub(crate) fn cross_cov(&self, x: &[f64]) -> Array1<f64> {
        Array1::from_iter(
            self.data
                .inputs()
                .iter()
                .map(|xi| matern52(scaled_distance(x, xi, &self.hp.lengthscales), self.hp.amplitude)),
        )
    }

    /// New model with the pair `(x_star, y_star)` incorporated as a noiseless
    /// observation.
    pub fn condition_on_optimum(&self, x_star: &[f64], y_star: f64) -> Result<GpModel> {
        let mut data = self.data.clone();
        data.push(x_star.to_vec(), y_star)?;
        let mut noise = self.point_noise.clone();
        noise.push(0.0);
        GpModel::with_point_noise(data, self.hp.clone(), noise)
    }
}

fn kernel_matrix(inputs: &[Vec<f64>], hp: &GpHyperparams) -> Array2<f64> {
    let n = inputs.len();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = hp.amplitude;
        for j in 0..i {
            let v = matern52(scaled_distance(&inputs[i], &inputs[j], &hp.lengthscales), hp.amplitude);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Lower Cholesky factor, walking the jitter ladder on failure.
pub(crate) fn cholesky_with_jitter(a: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        if let Some(l) = cholesky_lower(a, jitter) {
            return Ok((l, jitter));
        }
    }
    Err(Error::Numeric(format!(
        "Cholesky failed for a {n}x{n} kernel matrix after maximum jitter",
        n = a.nrows()
    )))
}

fn cholesky_lower(a: &Array2<f64>, jitter: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

fn forward_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for j in 0..i {
            sum -= l[[i, j]] * x[j];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

fn back_solve_transposed(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut sum = b[i];
        for j in (i + 1)..n {
            sum -= l[[j, i]] * x[j];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// Solves `(L L^T) x = b`.
fn chol_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    back_solve_transposed(l, &forward_solve(l, b))
}

/// Explicit inverse from the Cholesky factor; used by the gradient's trace term.
fn chol_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    // Invert L by forward solves on unit vectors, then A^-1 = L^-T L^-1.
    let mut l_inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        let mut e = Array1::zeros(n);
        e[col] = 1.0;
        let x = forward_solve(l, &e);
        for row in 0..n {
            l_inv[[row, col]] = x[row];
        }
    }
    let mut inv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in i.max(j)..n {
                sum += l_inv[[k, i]] * l_inv[[k, j]];
            }
            inv[[i, j]] = sum;
            inv[[j, i]] = sum;
        }
    }
    inv
}

/// Log marginal likelihood of `data` under homoscedastic noise.
pub fn log_marginal_likelihood(data: &Dataset, hp: &GpHyperparams) -> Result<f64> {
    hp.validate(data.dim())?;
    let n = data.len();
    let mut k = kernel_matrix(data.inputs(), hp);
    for i in 0..n {
        k[[i, i]] += hp.noise_variance;
    }
    let (chol, _) = cholesky_with_jitter(&k)?;
    let resid = Array1::from_iter(data.outputs().iter().map(|y| y - hp.mean_constant));
    let alpha = chol_solve(&chol, &resid);
    let log_det: f64 = (0..n).map(|i| chol[[i, i]].ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * resid.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI)
}

/// Log marginal likelihood and its gradient with respect to each hyperparameter
/// (natural parameterization).
pub fn lml_and_grad(data: &Dataset, hp: &GpHyperparams) -> Result<(f64, LmlGradient)> {
    hp.validate(data.dim())?;
    let n = data.len();
    let dim = data.dim();
    let inputs = data.inputs();

    let k_noise_free = kernel_matrix(inputs, hp);
    let mut k = k_noise_free.clone();
    for i in 0..n {
        k[[i, i]] += hp.noise_variance;
    }
    let (chol, _) = cholesky_with_jitter(&k)?;
    let resid = Array1::from_iter(data.outputs().iter().map(|y| y - hp.mean_constant));
    let alpha = chol_solve(&chol, &resid);
    let log_det: f64 = (0..n).map(|i| chol[[i, i]].ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * resid.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;

    let k_inv = chol_inverse(&chol);

    // d(lml)/d(theta) = 0.5 [a^T (dK) a - tr(K^-1 dK)] accumulated pairwise,
    // with dK/d(l_d)[i,j] = amp (5/3)(1 + sqrt5 r) exp(-sqrt5 r) sq_d / l_d^3.
    let mut g_len = vec![0.0; dim];
    let mut g_amp = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - k_inv[[i, j]];
            let r = scaled_distance(&inputs[i], &inputs[j], &hp.lengthscales);
            let e = hp.amplitude * (5.0 / 3.0) * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
            for d in 0..dim {
                let diff = inputs[i][d] - inputs[j][d];
                let l = hp.lengthscales[d];
                g_len[d] += 0.5 * w * e * diff * diff / (l * l * l);
            }
            g_amp += 0.5 * w * k_noise_free[[i, j]] / hp.amplitude;
        }
    }
    let g_noise = 0.5 * (alpha.dot(&alpha) - (0..n).map(|i| k_inv[[i, i]]).sum::<f64>());
    let g_mean = alpha.sum();

    Ok((
        lml,
        LmlGradient {
            lengthscales: g_len,
            amplitude: g_amp,
            noise_variance: g_noise,
            mean_constant: g_mean,
        },
    ))
}

/// Fits hyperparameters by maximizing the marginal likelihood.
pub fn fit(data: &Dataset, cfg: &FitConfig) -> Result<GpModel> {
    fit_from(data, cfg, None)
}

/// As [`fit`], optionally warm-started from a previous optimum; the warm
/// start replaces the heuristic initial point.
pub fn fit_from(data: &Dataset, cfg: &FitConfig, warm: Option<&GpHyperparams>) -> Result<GpModel> {
    if !data.outputs().iter().all(|y| y.is_finite()) {
        return Err(Error::Data("non-finite outputs".into()));
    }
    if data.len() < 2 {
        // MLE is degenerate below two observations; fall back to priors.
        let mut hp = GpHyperparams::defaults_for(data);
        if let Some(noise) = cfg.fixed_noise {
            hp.noise_variance = noise.max(0.0);
        }
        return GpModel::new(data.clone(), hp);
    }

    let bounds = data.bounds();
    let dim = bounds.dim();
    let var_y = data.output_variance().max(1e-8);

    // Optimization variables: log length-scales, log amplitude, and (unless
    // pinned) log noise variance. The constant mean is profiled analytically.
    let fit_noise = cfg.fixed_noise.is_none();
    let n_vars = dim + 1 + usize::from(fit_noise);
    let mut lower = Vec::with_capacity(n_vars);
    let mut upper = Vec::with_capacity(n_vars);
    for d in 0..dim {
        let range = bounds.range(d).max(1e-6);
        lower.push((1e-3 * range).ln());
        upper.push((1e3 * range).ln());
    }
    lower.push((1e-3 * var_y).ln());
    upper.push((1e3 * var_y).ln());
    if fit_noise {
        lower.push(1e-8f64.ln());
        upper.push(var_y.max(1e-8).ln());
    }

    let theta_to_hp = |theta: &[f64]| -> GpHyperparams {
        GpHyperparams {
            lengthscales: theta[..dim].iter().map(|t| t.exp()).collect(),
            amplitude: theta[dim].exp(),
            noise_variance: if fit_noise {
                theta[dim + 1].exp()
            } else {
                cfg.fixed_noise.unwrap_or(0.0).max(0.0)
            },
            mean_constant: 0.0, // profiled below
        }
    };

    let objective = |theta: &[f64]| -> f64 {
        let mut hp = theta_to_hp(theta);
        match profile_mean(data, &mut hp) {
            Ok(()) => log_marginal_likelihood(data, &hp).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let gradient = |theta: &[f64]| -> Vec<f64> {
        let mut hp = theta_to_hp(theta);
        if profile_mean(data, &mut hp).is_err() {
            return vec![0.0; theta.len()];
        }
        match lml_and_grad(data, &hp) {
            Ok((_, g)) => {
                let mut out = Vec::with_capacity(theta.len());
                for d in 0..dim {
                    out.push(g.lengthscales[d] * hp.lengthscales[d]);
                }
                out.push(g.amplitude * hp.amplitude);
                if fit_noise {
                    out.push(g.noise_variance * hp.noise_variance);
                }
                out
            }
            Err(_) => vec![0.0; theta.len()],
        }
    };

    // Heuristic start (or warm start) plus seeded random restarts.
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(cfg.restarts + 1);
    let init = match warm {
        Some(hp) if hp.lengthscales.len() == dim => {
            let mut theta: Vec<f64> = hp.lengthscales.iter().map(|l| l.ln()).collect();
            theta.push(hp.amplitude.ln());
            if fit_noise {
                theta.push(hp.noise_variance.max(1e-8).ln());
            }
            theta
        }
        _ => {
            let mut theta: Vec<f64> = (0..dim).map(|d| (0.2 * bounds.range(d).max(1e-6)).ln()).collect();
            theta.push(var_y.ln());
            if fit_noise {
                theta.push((1e-2 * var_y).max(1e-8).ln());
            }
            theta
        }
    };
    starts.push(init);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draw_log = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    for _ in 1..cfg.restarts.max(1) {
        let mut theta = Vec::with_capacity(n_vars);
        for d in 0..dim {
            let range = bounds.range(d).max(1e-6);
            theta.push(draw_log(&mut rng, (0.05 * range).ln(), (2.0 * range).ln()));
        }
        theta.push(draw_log(&mut rng, (0.1 * var_y).ln(), (10.0 * var_y).ln()));
        if fit_noise {
            theta.push(draw_log(&mut rng, 1e-8f64.max(1e-6 * var_y).ln(), (0.5 * var_y).ln()));
        }
        starts.push(theta);
    }

    let ctrl = OptimizeControl {
        max_iters: cfg.max_iters,
        grad_tol: 1e-5,
        f_tol: 1e-9,
    };
    let mut best_theta = starts[0].clone();
    let mut best_val = objective(&best_theta);
    for start in &starts {
        let (theta, val) = maximize_bounded(&objective, Some(&gradient), start, &lower, &upper, &ctrl);
        if val > best_val {
            best_val = val;
            best_theta = theta;
        }
    }
    if !best_val.is_finite() {
        return Err(Error::Numeric("marginal likelihood is non-finite at every start".into()));
    }

    let mut hp = theta_to_hp(&best_theta);
    profile_mean(data, &mut hp)?;
    GpModel::new(data.clone(), hp)
}

/// Sets `hp.mean_constant` to its closed-form optimum
/// `(1^T A^-1 y) / (1^T A^-1 1)` for the given kernel parameters.
fn profile_mean(data: &Dataset, hp: &mut GpHyperparams) -> Result<()> {
    let n = data.len();
    let mut k = kernel_matrix(data.inputs(), hp);
    for i in 0..n {
        k[[i, i]] += hp.noise_variance;
    }
    let (chol, _) = cholesky_with_jitter(&k)?;
    let y = Array1::from_iter(data.outputs().iter().copied());
    let ones = Array1::ones(n);
    let ainv_y = chol_solve(&chol, &y);
    let ainv_1 = chol_solve(&chol, &ones);
    let denom = ones.dot(&ainv_1);
    if denom.abs() < 1e-300 {
        return Err(Error::Numeric("degenerate mean profile".into()));
    }
    hp.mean_constant = ones.dot(&ainv_y) / denom;
    Ok(())
}
