//! Brute-force validation of the acquisition approximation on
//! one-dimensional problems: an exact-acquisition estimate built from
//! compatible posterior draws, kernel density estimation, and quadrature,
//! plus acquisition-landscape statistics (local-maxima counts).

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{
    ensemble_prepare, ensemble_value, jes_value, AcqOptimizerConfig, AcquisitionContext,
    NOISELESS_CONDITIONING_FLOOR,
};
use crate::data::{Bounds, Dataset};
use crate::error::{Error, Result};
use crate::gp::{GpHyperparams, GpModel};
use crate::quadrature::simpson_uniform;
use crate::rff::{build_rff, sample_posterior_function, OptimumSample};
use crate::seed;
use crate::stats::mean_stderr;
use crate::truncated::std_normal_pdf;

/// Bandwidth rule for the conditional-density estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KdeBandwidth {
    Silverman,
    Fixed(f64),
}

/// Configuration of the exact-acquisition oracle.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Solution samples over which the expectation is averaged.
    pub num_solution_samples: usize,
    /// Pool multiplier: total posterior draws = samples x this factor.
    pub num_function_draws_per_sample: usize,
    /// Compatibility window on the optimum location, as a fraction of the
    /// input range.
    pub compatibility_tol_x: f64,
    /// Compatibility window on the optimum value, in units of
    /// `sqrt(amplitude)`.
    pub compatibility_tol_y: f64,
    pub kde_bandwidth: KdeBandwidth,
    /// Points of the fixed Simpson rule (forced odd, >= 64 required).
    pub quadrature_points: usize,
    /// Minimum compatible draws before the tolerances are widened.
    pub min_compatible: usize,
    /// Doublings of the tolerances attempted before giving up on a sample.
    pub max_widenings: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            num_solution_samples: 500,
            num_function_draws_per_sample: 4,
            compatibility_tol_x: 0.02,
            compatibility_tol_y: 0.05,
            kde_bandwidth: KdeBandwidth::Silverman,
            quadrature_points: 129,
            min_compatible: 30,
            max_widenings: 4,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_solution_samples == 0 || self.num_function_draws_per_sample == 0 {
            return Err(Error::Config("oracle sample counts must be >= 1".into()));
        }
        if self.compatibility_tol_x <= 0.0 || self.compatibility_tol_y <= 0.0 {
            return Err(Error::Config("compatibility tolerances must be positive".into()));
        }
        if self.quadrature_points < 64 {
            return Err(Error::Config("quadrature_points must be >= 64".into()));
        }
        Ok(())
    }
}

/// Gaussian kernel density over a set of sampled values, with the model's
/// observation noise folded into the bandwidth.
#[derive(Debug, Clone)]
pub struct Kde1d {
    points: Vec<f64>,
    bandwidth: f64,
}

impl Kde1d {
    /// Builds the estimator; `extra_variance` (observation noise) widens the
    /// bandwidth since noise convolution of a Gaussian KDE is again a
    /// Gaussian KDE.
    pub fn new(points: Vec<f64>, rule: KdeBandwidth, extra_variance: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("KDE needs at least one point".into()));
        }
        let h = match rule {
            KdeBandwidth::Fixed(h) => h,
            KdeBandwidth::Silverman => silverman_bandwidth(&points),
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Numeric(format!("degenerate KDE bandwidth {h}")));
        }
        Ok(Self {
            points,
            bandwidth: (h * h + extra_variance).sqrt(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let inv = 1.0 / self.bandwidth;
        self.points
            .iter()
            .map(|p| std_normal_pdf((y - p) * inv))
            .sum::<f64>()
            * inv
            / self.points.len() as f64
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self.points.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo - 10.0 * self.bandwidth, hi + 10.0 * self.bandwidth)
    }

    /// Quadrature mean of the density.
    pub fn quadrature_mean(&self, points: usize) -> f64 {
        let (lo, hi) = self.support();
        let n = points | 1;
        let step = (hi - lo) / (n - 1) as f64;
        let values: Vec<f64> = (0..n).map(|i| {
            let y = lo + step * i as f64;
            y * self.pdf(y)
        }).collect();
        simpson_uniform(&values, step)
    }

    /// Quadrature of the density over its support; should be 1 up to the rule's error.
    pub fn quadrature_mass(&self, points: usize) -> f64 {
        let (lo, hi) = self.support();
        let n = points | 1;
        let step = (hi - lo) / (n - 1) as f64;
        let values: Vec<f64> = (0..n).map(|i| self.pdf(lo + step * i as f64)).collect();
        simpson_uniform(&values, step)
    }
}

/// Silverman's rule of thumb with the interquartile-range guard.
fn silverman_bandwidth(points: &[f64]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().sum::<f64>() / n;
    let sd = (points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let q = |f: f64| {
        let pos = f * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let scale = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    // Degenerate spreads (all compatible draws nearly equal) still need a
    // positive bandwidth.
    (0.9 * scale * n.powf(-0.2)).max(1e-6)
}

/// Exact-acquisition estimate for a 1-D model: posterior draws evaluated on a
/// grid, solution samples from their optima, conditional densities from
/// compatible draws, and quadrature over the observable.
pub struct ExactAcquisitionOracle {
    grid: Vec<f64>,
    /// Pool of posterior draws evaluated on the grid, `pool x grid`.
    pool_values: Array2<f64>,
    /// Grid maximum of each pool draw.
    pool_optima: Vec<OptimumSample>,
    /// Solution samples the expectation averages over.
    solutions: Vec<OptimumSample>,
    /// Unconditioned predictive `(mean, variance)` on the grid.
    base: Vec<(f64, f64)>,
    noise_variance: f64,
    x_range: f64,
    amplitude: f64,
    cfg: OracleConfig,
}

/// Curves produced by the oracle for a set of divergence orders.
#[derive(Debug, Clone)]
pub struct OracleCurves {
    pub alphas: Vec<f64>,
    /// One exact-acquisition curve per order, over the build grid.
    pub curves: Vec<Vec<f64>>,
    /// Exact ensemble: per-order curves normalized by their own maxima.
    pub ensemble: Vec<f64>,
    /// Solution samples skipped for lack of compatible draws.
    pub skipped_samples: usize,
    /// Samples that needed widened tolerances.
    pub widened_samples: usize,
}

impl ExactAcquisitionOracle {
    /// Draws the pool and takes the first `num_solution_samples` pool optima
    /// as solution samples.
    pub fn build(model: &GpModel, grid: Vec<f64>, cfg: OracleConfig, seed_value: u64) -> Result<Self> {
        Self::build_inner(model, grid, None, cfg, seed_value)
    }

    /// As [`build`](Self::build) with externally supplied solution samples.
    pub fn build_with_solutions(
        model: &GpModel,
        grid: Vec<f64>,
        solutions: Vec<OptimumSample>,
        cfg: OracleConfig,
        seed_value: u64,
    ) -> Result<Self> {
        Self::build_inner(model, grid, Some(solutions), cfg, seed_value)
    }

    fn build_inner(
        model: &GpModel,
        grid: Vec<f64>,
        solutions: Option<Vec<OptimumSample>>,
        cfg: OracleConfig,
        seed_value: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if model.data().dim() != 1 {
            return Err(Error::InvalidArgument(
                "the exact-acquisition oracle supports one-dimensional problems only".into(),
            ));
        }
        if grid.len() < 3 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("grid must be strictly increasing with >= 3 points".into()));
        }

        // The pool holds exact joint posterior draws over the grid, via the
        // dense Cholesky of the posterior covariance. This keeps the oracle
        // free of the feature-approximation error of the sampler it checks.
        let g_count = grid.len();
        let mut means = Vec::with_capacity(g_count);
        let mut base = Vec::with_capacity(g_count);
        let mut u_vecs = Vec::with_capacity(g_count);
        for x in &grid {
            let (p, u) = model.predict_parts(&[*x])?;
            means.push(p.mean);
            base.push((p.mean, p.variance));
            u_vecs.push(u);
        }
        let hp = model.hyperparams();
        let mut cov = Array2::zeros((g_count, g_count));
        for i in 0..g_count {
            for j in 0..=i {
                let prior = crate::gp::kernel_eval(&[grid[i]], &[grid[j]], hp)?;
                let value = prior - u_vecs[i].dot(&u_vecs[j]);
                cov[[i, j]] = value;
                cov[[j, i]] = value;
            }
        }
        let chol = grid_cholesky(&mut cov)?;

        let pool_size = cfg.num_solution_samples * cfg.num_function_draws_per_sample;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(seed_value, 0x11));
        let mut pool_values = Array2::zeros((pool_size, g_count));
        let mut pool_optima = Vec::with_capacity(pool_size);
        for p in 0..pool_size {
            let z: Vec<f64> = (0..g_count)
                .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
                .collect();
            let mut best = (0usize, f64::NEG_INFINITY);
            for g in 0..g_count {
                let mut value = means[g];
                for k in 0..=g {
                    value += chol[[g, k]] * z[k];
                }
                pool_values[[p, g]] = value;
                if value > best.1 {
                    best = (g, value);
                }
            }
            pool_optima.push(OptimumSample {
                x_star: vec![grid[best.0]],
                y_star: best.1,
            });
        }

        let solutions = solutions.unwrap_or_else(|| pool_optima[..cfg.num_solution_samples].to_vec());
        let x_range = grid[g_count - 1] - grid[0];
        Ok(Self {
            grid,
            pool_values,
            pool_optima,
            solutions,
            base,
            noise_variance: model.hyperparams().noise_variance,
            x_range,
            amplitude: model.hyperparams().amplitude,
            cfg,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn solutions(&self) -> &[OptimumSample] {
        &self.solutions
    }

    /// Pool draws compatible with solution sample `s_idx`: grid argmax within
    /// the x-window and maximum within the y-window, tolerances scaled by
    /// `widen` doublings. Capped at 400 draws.
    fn compatible_indices(&self, s_idx: usize, widen: u32) -> Vec<usize> {
        let scale = (1u64 << widen) as f64;
        let tol_x = self.cfg.compatibility_tol_x * self.x_range * scale;
        let tol_y = self.cfg.compatibility_tol_y * self.amplitude.sqrt() * scale;
        let target = &self.solutions[s_idx];
        let mut out = Vec::new();
        for (p, opt) in self.pool_optima.iter().enumerate() {
            if (opt.x_star[0] - target.x_star[0]).abs() <= tol_x
                && (opt.y_star - target.y_star).abs() <= tol_y
            {
                out.push(p);
                if out.len() >= 400 {
                    break;
                }
            }
        }
        out
    }

    fn compatible_with_widening(&self, s_idx: usize) -> Result<(Vec<usize>, u32)> {
        for widen in 0..=self.cfg.max_widenings as u32 {
            let idx = self.compatible_indices(s_idx, widen);
            if idx.len() >= self.cfg.min_compatible {
                return Ok((idx, widen));
            }
        }
        let got = self.compatible_indices(s_idx, self.cfg.max_widenings as u32).len();
        Err(Error::InsufficientSamples {
            got,
            need: self.cfg.min_compatible,
        })
    }

    /// Conditional density of the latent value at grid point `g_idx` given
    /// solution sample `s_idx`, estimated from compatible draws.
    pub fn conditional_density(&self, s_idx: usize, g_idx: usize) -> Result<Kde1d> {
        let (idx, _) = self.compatible_with_widening(s_idx)?;
        let values: Vec<f64> = idx.iter().map(|&p| self.pool_values[[p, g_idx]]).collect();
        Kde1d::new(values, self.cfg.kde_bandwidth, self.noise_variance)
    }

    /// Compatible-draw count and the widening level it required.
    pub fn compatibility_diagnostics(&self, s_idx: usize) -> Result<(usize, u32)> {
        self.compatible_with_widening(s_idx).map(|(idx, widen)| (idx.len(), widen))
    }

    /// Exact curves for every requested order, sharing the pool, the
    /// compatibility filtering, and the per-point density estimates.
    ///
    /// Samples with too few compatible draws even after widening contribute
    /// no conditioning information (their ratio factor is one).
    pub fn curves(&self, alphas: &[f64]) -> Result<OracleCurves> {
        for &alpha in alphas {
            crate::alpha::validate_alpha(alpha)?;
        }
        let g_count = self.grid.len();
        let mut factor_sums = vec![vec![0.0f64; g_count]; alphas.len()];
        let mut skipped = 0usize;
        let mut widened = 0usize;

        for s_idx in 0..self.solutions.len() {
            let (idx, widen) = match self.compatible_with_widening(s_idx) {
                Ok(pair) => pair,
                Err(_) => {
                    skipped += 1;
                    for sums in factor_sums.iter_mut() {
                        for v in sums.iter_mut() {
                            *v += 1.0;
                        }
                    }
                    continue;
                }
            };
            if widen > 0 {
                widened += 1;
            }
            for g_idx in 0..g_count {
                let values: Vec<f64> = idx.iter().map(|&p| self.pool_values[[p, g_idx]]).collect();
                let kde = Kde1d::new(values, self.cfg.kde_bandwidth, self.noise_variance)?;
                let (mean, var) = self.base[g_idx];
                let var = var + self.noise_variance + NOISELESS_CONDITIONING_FLOOR;
                let sd = var.sqrt();
                let (kde_lo, kde_hi) = kde.support();
                let lo = (mean - 12.0 * sd).min(kde_lo);
                let hi = (mean + 12.0 * sd).max(kde_hi);
                let n = self.cfg.quadrature_points | 1;
                let step = (hi - lo) / (n - 1) as f64;
                // Cache the two densities once per quadrature node; every
                // order reuses them.
                let mut p_vals = Vec::with_capacity(n);
                let mut q_vals = Vec::with_capacity(n);
                for i in 0..n {
                    let y = lo + step * i as f64;
                    let z = (y - mean) / sd;
                    p_vals.push((-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()));
                    q_vals.push(kde.pdf(y));
                }
                for (a_idx, &alpha) in alphas.iter().enumerate() {
                    let integrand: Vec<f64> = p_vals
                        .iter()
                        .zip(&q_vals)
                        .map(|(&p, &q)| {
                            if p <= 0.0 || q <= 0.0 {
                                0.0
                            } else {
                                p.powf(1.0 - alpha) * q.powf(alpha)
                            }
                        })
                        .collect();
                    factor_sums[a_idx][g_idx] += simpson_uniform(&integrand, step).min(1.0);
                }
            }
        }

        let s = self.solutions.len() as f64;
        let curves: Vec<Vec<f64>> = alphas
            .iter()
            .enumerate()
            .map(|(a_idx, &alpha)| {
                factor_sums[a_idx]
                    .iter()
                    .map(|sum| ((1.0 - sum / s) / ((1.0 - alpha) * alpha)).max(0.0))
                    .collect()
            })
            .collect();

        let mut ensemble = vec![0.0; g_count];
        for curve in &curves {
            let max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max > 1e-12 {
                for (e, v) in ensemble.iter_mut().zip(curve) {
                    *e += v / max;
                }
            }
        }

        Ok(OracleCurves {
            alphas: alphas.to_vec(),
            curves,
            ensemble,
            skipped_samples: skipped,
            widened_samples: widened,
        })
    }
}

/// Conditional density of the latent value at scalar `x` given one solution
/// sample, via a one-off oracle pool.
pub fn oracle_conditional_density(
    model: &GpModel,
    sample: &OptimumSample,
    x: f64,
    cfg: &OracleConfig,
    seed_value: u64,
) -> Result<Kde1d> {
    let oracle = one_off_oracle(model, sample, x, cfg, seed_value)?;
    let g_idx = nearest_grid_index(oracle.grid(), x);
    oracle.conditional_density(0, g_idx)
}

/// Exact acquisition at scalar `x` for one order, via a one-off oracle pool.
pub fn oracle_aes(
    model: &GpModel,
    x: f64,
    alpha: f64,
    cfg: &OracleConfig,
    seed_value: u64,
) -> Result<f64> {
    let bounds = model.data().bounds();
    let grid = linspace(bounds.lower()[0], bounds.upper()[0], 201);
    let oracle = ExactAcquisitionOracle::build(model, grid, cfg.clone(), seed_value)?;
    let g_idx = nearest_grid_index(oracle.grid(), x);
    let curves = oracle.curves(&[alpha])?;
    Ok(curves.curves[0][g_idx])
}

fn one_off_oracle(
    model: &GpModel,
    sample: &OptimumSample,
    x: f64,
    cfg: &OracleConfig,
    seed_value: u64,
) -> Result<ExactAcquisitionOracle> {
    let bounds = model.data().bounds();
    let mut grid = linspace(bounds.lower()[0], bounds.upper()[0], 201);
    // Make sure the query point itself is on the grid.
    if !grid.iter().any(|g| (g - x).abs() < 1e-12) {
        grid.push(x);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    ExactAcquisitionOracle::build_with_solutions(model, grid, vec![sample.clone()], cfg.clone(), seed_value)
}

/// Jittered Cholesky of the (possibly rank-deficient) posterior covariance
/// restricted to the grid.
fn grid_cholesky(cov: &mut Array2<f64>) -> Result<Array2<f64>> {
    crate::gp::cholesky_with_jitter(cov).map(|(l, _)| l)
}

fn nearest_grid_index(grid: &[f64], x: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - x).abs().partial_cmp(&(*b - x).abs()).unwrap())
        .map(|(i, _)| i)
        .expect("non-empty grid")
}

/// Uniform grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Strict interior local maxima of grid values; a plateau counts at most once,
/// attributed to its first index, and boundary-touching runs never count.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let n = values.len();
    if n < 3 {
        return 0;
    }
    let mut count = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if i > 0 && j + 1 < n && values[i - 1] < values[i] && values[j + 1] < values[i] {
            count += 1;
        }
        i = j + 1;
    }
    count
}

/// Both quadrature forms of the mutual information for a discretized toy:
/// a mixture `p(y) = sum_k w_k N(y | m_k, v_k)` over a discrete optimum
/// variable. Returns `(entropy_difference, kl_form)`, which agree up to
/// quadrature error.
pub fn mutual_information_forms(
    weights: &[f64],
    conditionals: &[(f64, f64)],
    quad_points: usize,
) -> (f64, f64) {
    assert_eq!(weights.len(), conditionals.len());
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();

    let lo = conditionals
        .iter()
        .map(|(m, v)| m - 14.0 * v.sqrt())
        .fold(f64::INFINITY, f64::min);
    let hi = conditionals
        .iter()
        .map(|(m, v)| m + 14.0 * v.sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let n = quad_points | 1;
    let step = (hi - lo) / (n - 1) as f64;

    let gauss = |y: f64, m: f64, v: f64| (-0.5 * (y - m) * (y - m) / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let mixture = |y: f64| -> f64 {
        w.iter()
            .zip(conditionals)
            .map(|(wk, (m, v))| wk * gauss(y, *m, *v))
            .sum()
    };

    // Entropy difference: H[p] - sum_k w_k H[N_k], the mixture entropy by
    // quadrature and the component entropies in closed form.
    let mix_entropy_vals: Vec<f64> = (0..n)
        .map(|i| {
            let y = lo + step * i as f64;
            let p = mixture(y);
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .collect();
    let mix_entropy = simpson_uniform(&mix_entropy_vals, step);
    let comp_entropy: f64 = w
        .iter()
        .zip(conditionals)
        .map(|(wk, (_, v))| wk * 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * v).ln())
        .sum();
    let entropy_difference = mix_entropy - comp_entropy;

    // KL form: sum_k w_k int N_k ln(N_k / p).
    let mut kl_form = 0.0;
    for (wk, (m, v)) in w.iter().zip(conditionals) {
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let y = lo + step * i as f64;
                let nk = gauss(y, *m, *v);
                let p = mixture(y);
                if nk > 0.0 && p > 0.0 {
                    nk * (nk / p).ln()
                } else {
                    0.0
                }
            })
            .collect();
        kl_form += wk * simpson_uniform(&vals, step);
    }
    (entropy_difference, kl_form)
}

/// Configuration of the one-dimensional landscape reproduction: a handful of
/// training points drawn from a fixed-hyperparameter GP draw on a symmetric
/// domain, the standard solution-sample count, and a dense evaluation grid.
#[derive(Debug, Clone)]
pub struct LandscapeConfig {
    pub domain: (f64, f64),
    pub n_train: usize,
    pub num_solution_samples: usize,
    pub grid_size: usize,
    pub num_features: usize,
    /// Observation-noise variance of the generative process and the model.
    pub noise_variance: f64,
    pub lengthscale: f64,
    pub amplitude: f64,
    /// Refit the model by maximum marginal likelihood instead of using the
    /// generative hyperparameters.
    pub fit_model: bool,
    pub alphas: Vec<f64>,
    pub acq: AcqOptimizerConfig,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            domain: (-5.0, 5.0),
            n_train: 8,
            num_solution_samples: 32,
            grid_size: 1000,
            num_features: 1024,
            noise_variance: 0.0,
            lengthscale: 2.0,
            amplitude: 1.0,
            fit_model: false,
            alphas: crate::acquisition::default_alpha_grid(),
            acq: AcqOptimizerConfig::default(),
        }
    }
}

/// One landscape repetition: model plus acquisition context.
pub fn landscape_problem(cfg: &LandscapeConfig, seed_value: u64) -> Result<(GpModel, AcquisitionContext)> {
    let bounds = Bounds::new(vec![cfg.domain.0], vec![cfg.domain.1])?;
    let hp = GpHyperparams {
        lengthscales: vec![cfg.lengthscale],
        amplitude: cfg.amplitude,
        noise_variance: cfg.noise_variance.max(1e-6),
        mean_constant: 0.0,
    };
    // Generative draw from the prior.
    let prior = GpModel::new(Dataset::new(bounds.clone()), hp.clone())?;
    let basis = Arc::new(build_rff(&hp, cfg.num_features, seed::mix(seed_value, 0x21))?);
    let truth = sample_posterior_function(&prior, &basis, seed::mix(seed_value, 0x22))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(seed_value, 0x23));
    let mut data = Dataset::new(bounds.clone());
    for _ in 0..cfg.n_train {
        let x = bounds.sample(&mut rng);
        let mut y = truth.value(&x);
        if cfg.noise_variance > 0.0 {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            y += cfg.noise_variance.sqrt() * z;
        }
        data.push(x, y)?;
    }

    let model = if cfg.fit_model {
        // Known-noise mode: the declared observation noise is pinned so the
        // handful of training points cannot drive the noise estimate to zero.
        let fit_cfg = crate::gp::FitConfig {
            restarts: 5,
            seed: seed::mix(seed_value, 0x25),
            fixed_noise: Some(cfg.noise_variance.max(1e-6)),
            ..crate::gp::FitConfig::default()
        };
        crate::gp::fit(&data, &fit_cfg)?
    } else {
        GpModel::new(data, hp)?
    };
    let conditioning_noise = if cfg.noise_variance > 0.0 {
        model.hyperparams().noise_variance
    } else {
        NOISELESS_CONDITIONING_FLOOR
    };
    let ctx = AcquisitionContext::from_model(
        model.clone(),
        cfg.num_solution_samples,
        cfg.num_features,
        seed::mix(seed_value, 0x24),
        conditioning_noise,
    )?;
    Ok((model, ctx))
}

/// Per-repetition local-maxima counts for each method.
#[derive(Debug, Clone)]
pub struct LandscapeOutcome {
    /// Method name -> one count per repetition.
    pub counts: BTreeMap<String, Vec<usize>>,
    pub reps: usize,
}

impl LandscapeOutcome {
    /// Mean and standard error of the counts per method.
    pub fn summary(&self) -> Vec<(String, f64, f64)> {
        self.counts
            .iter()
            .map(|(name, counts)| {
                let values: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
                let (mean, se) = mean_stderr(&values);
                (name.clone(), mean, se)
            })
            .collect()
    }
}

/// Counts acquisition local maxima over `reps` independent landscape draws
/// for the entropy-difference baseline and the normalized ensemble.
pub fn landscape_experiment(cfg: &LandscapeConfig, reps: usize, seed_value: u64) -> Result<LandscapeOutcome> {
    let mut counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    counts.insert("jes".into(), Vec::with_capacity(reps));
    counts.insert("ensemble".into(), Vec::with_capacity(reps));
    let grid = linspace(cfg.domain.0, cfg.domain.1, cfg.grid_size);

    for rep in 0..reps {
        let rep_seed = seed::rep_seed(seed_value, rep as u64);
        let (_, ctx) = landscape_problem(cfg, rep_seed)?;

        let jes_curve: Vec<f64> = grid
            .iter()
            .map(|x| jes_value(&ctx, &[*x]))
            .collect::<Result<_>>()?;
        counts.get_mut("jes").unwrap().push(count_local_maxima(&jes_curve));

        let spec = ensemble_prepare(&ctx, &cfg.alphas, &cfg.acq, seed::mix(rep_seed, 0x31))?;
        let ens_curve: Vec<f64> = grid
            .iter()
            .map(|x| ensemble_value(&spec, &ctx, &[*x]))
            .collect::<Result<_>>()?;
        counts.get_mut("ensemble").unwrap().push(count_local_maxima(&ens_curve));
    }
    Ok(LandscapeOutcome { counts, reps })
}
