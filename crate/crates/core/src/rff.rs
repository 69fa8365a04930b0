//! Approximate samples of the problem's solution `{x_star, y_star}` drawn
//! from the GP posterior: a random-Fourier-feature approximation of the
//! Matern-5/2 kernel, weight-space posterior sampling, and numerical
//! maximization of the sampled functions.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::Bounds;
use crate::error::{Error, Result};
use crate::gp::{GpHyperparams, GpModel};
use crate::optimize::{maximize_bounded, OptimizeControl};
use crate::seed;

static DRAW_CALLS: AtomicU64 = AtomicU64::new(0);

/// Number of [`draw_optimum_set`] invocations so far; lets tests verify that
/// solution samples are generated once per acquisition batch rather than once
/// per ensemble component.
pub fn optimum_draw_count() -> u64 {
    DRAW_CALLS.load(Ordering::Relaxed)
}

/// Random Fourier feature basis for the Matern-5/2 ARD kernel.
///
/// The kernel's spectral density is a multivariate Student-t with five
/// degrees of freedom, scaled per dimension by the inverse length-scale;
/// frequencies are drawn as normal over the square root of a gamma variate.
#[derive(Debug, Clone)]
pub struct RffBasis {
    /// `M x D` spectral frequencies.
    frequencies: Array2<f64>,
    /// `M` phases in `[0, 2 pi)`.
    phases: Array1<f64>,
    amplitude: f64,
}

impl RffBasis {
    pub fn num_features(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Feature map `phi(x) = sqrt(2 amplitude / M) cos(W x + b)`.
    pub fn features(&self, x: &[f64]) -> Array1<f64> {
        let m = self.num_features();
        let scale = (2.0 * self.amplitude / m as f64).sqrt();
        let mut out = Array1::zeros(m);
        for i in 0..m {
            let mut arg = self.phases[i];
            for (d, xd) in x.iter().enumerate() {
                arg += self.frequencies[[i, d]] * xd;
            }
            out[i] = scale * arg.cos();
        }
        out
    }

    /// Features for a batch of points, one row per point.
    pub fn features_batch(&self, points: &[Vec<f64>]) -> Array2<f64> {
        let m = self.num_features();
        let scale = (2.0 * self.amplitude / m as f64).sqrt();
        let mut out = Array2::zeros((points.len(), m));
        for (row, x) in points.iter().enumerate() {
            for i in 0..m {
                let mut arg = self.phases[i];
                for (d, xd) in x.iter().enumerate() {
                    arg += self.frequencies[[i, d]] * xd;
                }
                out[[row, i]] = scale * arg.cos();
            }
        }
        out
    }
}

/// Draws an RFF basis for the given hyperparameters; deterministic per seed.
pub fn build_rff(hp: &GpHyperparams, num_features: usize, seed: u64) -> Result<RffBasis> {
    if num_features == 0 {
        return Err(Error::InvalidArgument("num_features must be >= 1".into()));
    }
    let dim = hp.lengthscales.len();
    hp.validate(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Student-t with 5 degrees of freedom as normal / sqrt(gamma), one gamma
    // variate shared across dimensions per feature.
    let gamma = Gamma::new(2.5, 1.0 / 2.5).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut frequencies = Array2::zeros((num_features, dim));
    let mut phases = Array1::zeros(num_features);
    for i in 0..num_features {
        let g: f64 = gamma.sample(&mut rng);
        let root = g.max(1e-12).sqrt();
        for d in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            // Standard t_5 scaled by the inverse length-scale; this matches
            // the kernel curvature E[w^2] = 5 / (3 l^2).
            frequencies[[i, d]] = z / (hp.lengthscales[d] * root);
        }
        phases[i] = rng.gen_range(0.0..std::f64::consts::TAU);
    }
    Ok(RffBasis {
        frequencies,
        phases,
        amplitude: hp.amplitude,
    })
}

/// One deterministic function drawn from the weight-space posterior.
#[derive(Debug, Clone)]
pub struct PosteriorFunctionSample {
    basis: Arc<RffBasis>,
    weights: Array1<f64>,
    mean_constant: f64,
}

impl PosteriorFunctionSample {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.mean_constant + self.basis.features(x).dot(&self.weights)
    }

    /// Analytic gradient of the sampled function.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.basis.num_features();
        let dim = self.basis.dim();
        let scale = (2.0 * self.basis.amplitude / m as f64).sqrt();
        let mut grad = vec![0.0; dim];
        for i in 0..m {
            let mut arg = self.basis.phases[i];
            for (d, xd) in x.iter().enumerate() {
                arg += self.basis.frequencies[[i, d]] * xd;
            }
            let factor = -scale * arg.sin() * self.weights[i];
            for d in 0..dim {
                grad[d] += factor * self.basis.frequencies[[i, d]];
            }
        }
        grad
    }

    pub fn basis(&self) -> &RffBasis {
        &self.basis
    }

    /// Values at pre-computed feature rows; rows must come from this sample's basis.
    pub fn values_from_features(&self, features: &Array2<f64>) -> Array1<f64> {
        features.dot(&self.weights) + self.mean_constant
    }
}

/// Draws one posterior function through the basis.
///
/// Prior weights are standard normal; data conditions them through the
/// feature matrix with the model's observation noise.
pub fn sample_posterior_function(
    model: &GpModel,
    basis: &Arc<RffBasis>,
    seed: u64,
) -> Result<PosteriorFunctionSample> {
    let plan = WeightPosterior::prepare(model, basis)?;
    plan.draw(seed)
}

/// Factorized weight-space posterior allowing repeated cheap draws through a
/// shared basis.
pub(crate) struct WeightPosterior {
    basis: Arc<RffBasis>,
    mean_constant: f64,
    noise_sd: f64,
    /// `n x M` feature matrix of the training inputs.
    phi: Array2<f64>,
    /// Residuals `y - mean`.
    resid: Array1<f64>,
    /// Lower Cholesky factor of `Phi Phi^T + (sigma^2 + jitter) I`, empty when n = 0.
    gram_chol: Array2<f64>,
}

impl WeightPosterior {
    pub(crate) fn prepare(model: &GpModel, basis: &Arc<RffBasis>) -> Result<Self> {
        let hp = model.hyperparams();
        if basis.dim() != model.data().dim() {
            return Err(Error::DimensionMismatch {
                expected: model.data().dim(),
                got: basis.dim(),
            });
        }
        let n = model.data().len();
        let mean_constant = hp.mean_constant;
        let noise_sd = hp.noise_variance.max(0.0).sqrt();
        let phi = basis.features_batch(model.data().inputs());
        let resid = Array1::from_iter(model.data().outputs().iter().map(|y| y - mean_constant));
        let gram_chol = if n == 0 {
            Array2::zeros((0, 0))
        } else {
            let mut gram = phi.dot(&phi.t());
            for i in 0..n {
                gram[[i, i]] += hp.noise_variance;
            }
            cholesky_ladder(&mut gram)?
        };
        Ok(Self {
            basis: Arc::clone(basis),
            mean_constant,
            noise_sd,
            phi,
            resid,
            gram_chol,
        })
    }

    pub(crate) fn draw(&self, seed: u64) -> Result<PosteriorFunctionSample> {
        let m = self.basis.num_features();
        let n = self.resid.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Array1::from_iter((0..m).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        }));
        if n > 0 {
            // Exact conditional draw: w = z + Phi^T G^-1 (r - Phi z - sigma e).
            let mut target = self.resid.clone() - self.phi.dot(&weights);
            if self.noise_sd > 0.0 {
                for t in target.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *t -= self.noise_sd * e;
                }
            }
            let solved = chol_solve(&self.gram_chol, &target);
            weights = weights + self.phi.t().dot(&solved);
        }
        Ok(PosteriorFunctionSample {
            basis: Arc::clone(&self.basis),
            weights,
            mean_constant: self.mean_constant,
        })
    }
}

fn cholesky_ladder(a: &mut Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    for &jitter in &[0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4] {
        if let Some(l) = try_chol(a, jitter) {
            return Ok(l);
        }
    }
    Err(Error::Numeric(format!("weight-space Gram matrix of size {n} is not positive definite")))
}

fn try_chol(a: &Array2<f64>, jitter: f64) -> Option<Array2<f64>> {
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

fn chol_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for j in 0..i {
            sum -= l[[i, j]] * x[j];
        }
        x[i] = sum / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for j in (i + 1)..n {
            sum -= l[[j, i]] * x[j];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// One sampled solution of the optimization problem.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimumSample {
    pub x_star: Vec<f64>,
    pub y_star: f64,
}

/// Budget for locating a sampled function's maximum.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    /// Quasi-uniform candidates per input dimension.
    pub candidates_per_dim: usize,
    /// Gradient-based refinements launched from the best candidates.
    pub ascent_starts: usize,
    /// Iteration cap per refinement.
    pub ascent_steps: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            candidates_per_dim: 1000,
            ascent_starts: 5,
            ascent_steps: 100,
        }
    }
}

/// Halton sequence with a seeded Cranley-Patterson rotation; quasi-uniform
/// and deterministic per seed.
fn halton_candidates(bounds: &Bounds, count: usize, seed: u64) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let dim = bounds.dim();
    assert!(dim <= PRIMES.len(), "halton bases exhausted at dim {dim}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let mut u = radical_inverse(i as u64 + 1, PRIMES[d]) + shifts[d];
                    if u >= 1.0 {
                        u -= 1.0;
                    }
                    bounds.lower()[d] + u * bounds.range(d)
                })
                .collect()
        })
        .collect()
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut fraction = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * fraction;
        index /= base;
        fraction /= base as f64;
    }
    result
}

/// Maximizes a posterior function sample over the bounds.
pub fn locate_sample_optimum(
    sample: &PosteriorFunctionSample,
    bounds: &Bounds,
    budget: &SearchBudget,
    seed: u64,
) -> Result<OptimumSample> {
    if bounds.dim() != sample.basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.basis.dim(),
            got: bounds.dim(),
        });
    }
    if (0..bounds.dim()).any(|d| bounds.range(d) <= 0.0) {
        return Err(Error::InvalidArgument("bounds must be non-degenerate".into()));
    }
    let count = budget.candidates_per_dim.max(1) * bounds.dim();
    let candidates = halton_candidates(bounds, count, seed);
    let values: Vec<f64> = candidates.iter().map(|x| sample.value(x)).collect();
    Ok(refine_from_candidates(sample, bounds, budget, &candidates, &values))
}

/// Gradient refinement from the best candidates; the best raw candidate is
/// always retained, so the result dominates the candidate grid.
fn refine_from_candidates(
    sample: &PosteriorFunctionSample,
    bounds: &Bounds,
    budget: &SearchBudget,
    candidates: &[Vec<f64>],
    values: &[f64],
) -> OptimumSample {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut best_x = candidates[order[0]].clone();
    let mut best_v = values[order[0]];
    if budget.ascent_steps > 0 {
        let f = |x: &[f64]| sample.value(x);
        let g = |x: &[f64]| sample.gradient(x);
        let ctrl = OptimizeControl::with_max_iters(budget.ascent_steps);
        for &idx in order.iter().take(budget.ascent_starts.max(1)) {
            let (x, v) = maximize_bounded(&f, Some(&g), &candidates[idx], bounds.lower(), bounds.upper(), &ctrl);
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
    }
    OptimumSample {
        y_star: sample.value(&best_x),
        x_star: best_x,
    }
}

/// Draws `s` solution samples from the model's posterior.
///
/// All samples in one call share a basis of `m` features, so the expensive
/// feature and Gram computations are done once per acquisition batch; each
/// sample has its own weight draw.
pub fn draw_optimum_set(
    model: &GpModel,
    s: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<OptimumSample>> {
    draw_optimum_set_with(model, s, m, seed, &SearchBudget::default())
}

/// As [`draw_optimum_set`] with an explicit search budget.
pub fn draw_optimum_set_with(
    model: &GpModel,
    s: usize,
    m: usize,
    seed: u64,
    budget: &SearchBudget,
) -> Result<Vec<OptimumSample>> {
    DRAW_CALLS.fetch_add(1, Ordering::Relaxed);
    if s == 0 {
        return Ok(Vec::new());
    }
    let bounds = model.data().bounds().clone();
    if (0..bounds.dim()).any(|d| bounds.range(d) <= 0.0) {
        return Err(Error::InvalidArgument("bounds must be non-degenerate".into()));
    }
    let basis = Arc::new(build_rff(model.hyperparams(), m, seed::mix(seed, 0xbeef))?);
    let posterior = WeightPosterior::prepare(model, &basis)?;

    let count = budget.candidates_per_dim.max(1) * bounds.dim();
    let candidates = halton_candidates(&bounds, count, seed::mix(seed, 0xcafe));
    let features = basis.features_batch(&candidates);

    let mut out = Vec::with_capacity(s);
    for idx in 0..s {
        let sample = posterior.draw(seed::mix(seed, idx as u64))?;
        let values = sample.values_from_features(&features);
        out.push(refine_from_candidates(
            &sample,
            &bounds,
            budget,
            &candidates,
            values.as_slice().expect("contiguous values"),
        ));
    }
    Ok(out)
}
