//! Acquisition functions: the alpha-divergence acquisition at a fixed order,
//! its normalized ensemble over a grid of orders, entropy-search baselines,
//! and the shared acquisition maximizer.
//!
//! The conditional predictive given a sampled solution `{x_star, y_star}` is
//! approximated by conditioning on the pair as a noiseless observation and
//! truncating the density above `y_star`; its natural parameters feed the
//! closed-form ratio integral from [`crate::alpha`].

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alpha::{log_alpha_integral_factor, validate_alpha, GaussianNatural};
use crate::data::Bounds;
use crate::error::{Error, Result};
use crate::gp::{GpModel, PredictiveGaussian};
use crate::optimize::{maximize_bounded, OptimizeControl};
use crate::rff::{draw_optimum_set, OptimumSample};
use crate::seed;
use crate::truncated::{truncated_entropy_reduction, truncated_moments};

/// Variance floor standing in for the noise when the problem is declared
/// noiseless; keeps the conditioned natural parameters finite.
pub const NOISELESS_CONDITIONING_FLOOR: f64 = 1e-8;

/// Raw-candidate and refinement budget for acquisition maximization.
#[derive(Debug, Clone)]
pub struct AcqOptimizerConfig {
    /// Uniform raw candidates used to seed the quasi-Newton refinements.
    pub raw_candidates: usize,
    /// Refinement starts chosen by softmax weighting over candidate values.
    pub restarts: usize,
    /// Quasi-Newton iteration cap per restart.
    pub max_iters: usize,
    pub softmax_temperature: f64,
}

impl Default for AcqOptimizerConfig {
    fn default() -> Self {
        Self {
            raw_candidates: 200,
            restarts: 1,
            max_iters: 200,
            softmax_temperature: 1.0,
        }
    }
}

/// Shared evaluation state for the information acquisitions at one model
/// state: the solution samples and, per sample, the cached quantities needed
/// to condition the predictive on `(x_star_s, y_star_s)` by a rank-one update.
#[derive(Debug)]
pub struct AcquisitionContext {
    model: GpModel,
    samples: Vec<OptimumSample>,
    /// Noise variance entering the natural parameters.
    noise_variance: f64,
    /// Per sample: `L^-1 k_n(x_star_s)`.
    u_stars: Vec<Array1<f64>>,
    /// Per sample: unconditioned predictive mean at `x_star_s`.
    m_stars: Vec<f64>,
    /// Per sample: unconditioned predictive variance at `x_star_s`, floored.
    v_stars: Vec<f64>,
}

/// Per-point evaluation cache: the unconditioned natural parameters and the
/// per-sample conditioned ones, reusable across every divergence order.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub eta: GaussianNatural,
    pub eta_stars: Vec<GaussianNatural>,
    /// Unconditioned latent predictive.
    pub predictive: PredictiveGaussian,
    /// Per sample: truncated conditioned variance plus noise.
    pub vtr_plus_noise: Vec<f64>,
    /// Per sample: total variance removed from the unconditioned predictive
    /// by conditioning and truncation, free of cancellation.
    pub var_drops: Vec<f64>,
    pub noise_variance: f64,
}

impl AcquisitionContext {
    /// Builds the context from existing solution samples.
    ///
    /// `noise_variance` is the observation noise used in the natural
    /// parameters: the fitted value in noisy problems, or
    /// [`NOISELESS_CONDITIONING_FLOOR`] when the problem is declared noiseless.
    pub fn new(model: GpModel, samples: Vec<OptimumSample>, noise_variance: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "information acquisitions need at least one solution sample".into(),
            ));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        let mut u_stars = Vec::with_capacity(samples.len());
        let mut m_stars = Vec::with_capacity(samples.len());
        let mut v_stars = Vec::with_capacity(samples.len());
        for s in &samples {
            let (pred, u) = model.predict_parts(&s.x_star)?;
            u_stars.push(u);
            m_stars.push(pred.mean);
            v_stars.push(pred.variance.max(1e-12));
        }
        Ok(Self {
            model,
            samples,
            noise_variance,
            u_stars,
            m_stars,
            v_stars,
        })
    }

    /// Draws `s` solution samples once and builds the context around them.
    pub fn from_model(model: GpModel, s: usize, m: usize, seed: u64, noise_variance: f64) -> Result<Self> {
        let samples = draw_optimum_set(&model, s, m, seed)?;
        Self::new(model, samples, noise_variance)
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn samples(&self) -> &[OptimumSample] {
        &self.samples
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn bounds(&self) -> &Bounds {
        self.model.data().bounds()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Conditioned latent predictive at `x` given sample `s_idx`, via the
    /// rank-one update of the base model (no refactorization). Returns the
    /// conditioned mean and variance plus the variance removed by the update,
    /// the latter computed without cancellation.
    fn conditioned_predictive(&self, s_idx: usize, x: &[f64], base: &PredictiveGaussian, u: &Array1<f64>) -> (f64, f64, f64) {
        let sample = &self.samples[s_idx];
        let k_cross = crate::gp::kernel_eval(x, &sample.x_star, self.model.hyperparams())
            .expect("dimensions checked at context build");
        let cov = k_cross - u.dot(&self.u_stars[s_idx]);
        let v_star = self.v_stars[s_idx];
        let mean = base.mean + cov / v_star * (sample.y_star - self.m_stars[s_idx]);
        let drop = (cov * cov / v_star).min(base.variance);
        (mean, base.variance - drop, drop)
    }

    /// Natural parameters of the approximate conditional predictive
    /// `p(y | D, x, {x_star_s, y_star_s})`: condition on the pair noiselessly,
    /// truncate at `y_star_s`, and widen by the noise variance.
    pub fn conditional_naturals(&self, s_idx: usize, x: &[f64]) -> Result<GaussianNatural> {
        let (base, u) = self.model.predict_parts(x)?;
        let (m_cond, v_cond, _) = self.conditioned_predictive(s_idx, x, &base, &u);
        let tm = truncated_moments(m_cond, v_cond, self.samples[s_idx].y_star);
        GaussianNatural::from_mean_variance(tm.mean_tr, tm.var_tr + self.noise_variance)
    }

    /// Evaluates everything the acquisitions need at one point.
    pub fn point_eval(&self, x: &[f64]) -> Result<PointEval> {
        let (base, u) = self.model.predict_parts(x)?;
        let eta = GaussianNatural::from_mean_variance(base.mean, base.variance + self.noise_variance)?;
        let mut eta_stars = Vec::with_capacity(self.samples.len());
        let mut vtr_plus_noise = Vec::with_capacity(self.samples.len());
        let mut var_drops = Vec::with_capacity(self.samples.len());
        for s_idx in 0..self.samples.len() {
            let (m_cond, v_cond, rank_one_drop) = self.conditioned_predictive(s_idx, x, &base, &u);
            let tm = truncated_moments(m_cond, v_cond, self.samples[s_idx].y_star);
            let variance = tm.var_tr + self.noise_variance;
            eta_stars.push(GaussianNatural::from_mean_variance(tm.mean_tr, variance)?);
            vtr_plus_noise.push(variance);
            var_drops.push(rank_one_drop + tm.var_drop);
        }
        Ok(PointEval {
            eta,
            eta_stars,
            predictive: base,
            vtr_plus_noise,
            var_drops,
            noise_variance: self.noise_variance,
        })
    }
}

/// Alpha-divergence acquisition value from a cached point evaluation:
/// `(1 - (1/S) sum_s exp{(alpha-1) g(eta) - alpha g(eta_s*) + g((1-alpha) eta + alpha eta_s*)})
///  / ((1-alpha) alpha)`, clipped at zero against floating-point cancellation.
pub fn aes_from_point(pe: &PointEval, alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    // 1 - mean(exp(E_s)) evaluated as -mean(expm1(E_s)): relative precision
    // survives in weak-information regions where every factor is close to 1.
    let mut acc = 0.0;
    for eta_star in &pe.eta_stars {
        acc += log_alpha_integral_factor(&pe.eta, eta_star, alpha).exp_m1();
    }
    Ok((-acc / pe.eta_stars.len() as f64 / ((1.0 - alpha) * alpha)).max(0.0))
}

/// Alpha-divergence acquisition at `x` for order `alpha`.
pub fn aes_value(ctx: &AcquisitionContext, x: &[f64], alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    aes_from_point(&ctx.point_eval(x)?, alpha)
}

/// Entropy-difference acquisition conditioning on the full sampled pair:
/// `(1/S) sum_s 0.5 ln((v + sigma^2) / (v_tr,s + sigma^2))`.
pub fn jes_value(ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    let pe = ctx.point_eval(x)?;
    Ok(jes_from_point(&pe))
}

/// As [`jes_value`] from a cached point evaluation.
pub fn jes_from_point(pe: &PointEval) -> f64 {
    // (v + s2) / (vtr + s2) = 1 + drop / (vtr + s2); ln_1p keeps vanishing
    // entropy reductions exact.
    let mean = pe
        .vtr_plus_noise
        .iter()
        .zip(&pe.var_drops)
        .map(|(vtr, drop)| 0.5 * (drop / vtr).ln_1p())
        .sum::<f64>()
        / pe.vtr_plus_noise.len() as f64;
    mean.max(0.0)
}

/// Max-value entropy baseline: truncates the unconditioned predictive at each
/// sampled `y_star_s` without incorporating the pair as data.
pub fn mes_value(ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    let (base, _) = ctx.model.predict_parts(x)?;
    let mean = ctx
        .samples
        .iter()
        .map(|s| truncated_entropy_reduction(base.mean, base.variance, s.y_star, ctx.noise_variance))
        .sum::<f64>()
        / ctx.samples.len() as f64;
    Ok(mean)
}

/// Default divergence-order grid: eleven values equally spaced in `(0, 1)`
/// with the endpoints pulled in to 0.001 and 0.999.
pub fn default_alpha_grid() -> Vec<f64> {
    vec![0.001, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.999]
}

/// Normalization state of the ensemble acquisition: per-order maximizers and
/// the weights `w_alpha` equal to each component's maximum value.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    pub maximizers: Vec<Vec<f64>>,
}

/// Maximizes each per-order component over the bounds and records its weight.
/// Components with a vanishing maximum are dropped with a warning.
///
/// The context (and therefore the solution-sample set) is shared across all
/// orders; samples are generated once per batch, not once per order.
pub fn ensemble_prepare(
    ctx: &AcquisitionContext,
    alphas: &[f64],
    cfg: &AcqOptimizerConfig,
    seed_value: u64,
) -> Result<EnsembleSpec> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("ensemble needs at least one alpha".into()));
    }
    for &alpha in alphas {
        validate_alpha(alpha)?;
    }
    let bounds = ctx.bounds().clone();
    let mut spec = EnsembleSpec {
        alphas: Vec::new(),
        weights: Vec::new(),
        maximizers: Vec::new(),
    };
    for (i, &alpha) in alphas.iter().enumerate() {
        let f = |x: &[f64]| aes_value(ctx, x, alpha).unwrap_or(f64::NEG_INFINITY);
        let (x_max, w) = optimize_acquisition(&f, &bounds, cfg, seed::mix(seed_value, i as u64))?;
        if w <= 1e-12 {
            log::warn!("dropping ensemble component alpha={alpha}: flat acquisition (max {w:.3e})");
            continue;
        }
        spec.alphas.push(alpha);
        spec.weights.push(w);
        spec.maximizers.push(x_max);
    }
    if spec.alphas.is_empty() {
        return Err(Error::Numeric("every ensemble component is degenerate".into()));
    }
    Ok(spec)
}

/// Ensemble acquisition `sum_alpha aes(x; alpha) / w_alpha` over the
/// components retained by [`ensemble_prepare`].
pub fn ensemble_value(spec: &EnsembleSpec, ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    let pe = ctx.point_eval(x)?;
    ensemble_from_point(spec, &pe)
}

/// As [`ensemble_value`] from a cached point evaluation.
pub fn ensemble_from_point(spec: &EnsembleSpec, pe: &PointEval) -> Result<f64> {
    let mut acc = 0.0;
    for (alpha, w) in spec.alphas.iter().zip(&spec.weights) {
        acc += aes_from_point(pe, *alpha)? / w;
    }
    Ok(acc)
}

/// Maximizes an acquisition over the bounds: uniform raw candidates, softmax
/// selection of refinement starts, bounded quasi-Newton with numerical
/// gradients, and a guarantee that the result dominates every raw candidate.
pub fn optimize_acquisition<F: Fn(&[f64]) -> f64>(
    f: &F,
    bounds: &Bounds,
    cfg: &AcqOptimizerConfig,
    seed_value: u64,
) -> Result<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    let count = cfg.raw_candidates.max(1);
    let candidates: Vec<Vec<f64>> = (0..count).map(|_| bounds.sample(&mut rng)).collect();
    let values: Vec<f64> = candidates.iter().map(|x| f(x)).collect();

    let finite_max = values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !finite_max.is_finite() {
        return Err(Error::Numeric("acquisition is non-finite at every raw candidate".into()));
    }

    // Softmax-weighted start selection via Gumbel top-k; degenerate weights
    // collapse to the argmax.
    let temp = cfg.softmax_temperature.max(1e-12);
    let mut keyed: Vec<(f64, usize)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, v)| {
            let u: f64 = rng.gen_range(1e-12..1.0);
            let gumbel = -(-u.ln()).ln();
            ((v - finite_max) / temp + gumbel, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut best_x = None;
    let mut best_v = f64::NEG_INFINITY;
    let ctrl = OptimizeControl::with_max_iters(cfg.max_iters);
    type NoGrad = fn(&[f64]) -> Vec<f64>;
    for &(_, idx) in keyed.iter().take(cfg.restarts.max(1)) {
        let (x, v) = maximize_bounded::<_, NoGrad>(f, None, &candidates[idx], bounds.lower(), bounds.upper(), &ctrl);
        if v > best_v {
            best_v = v;
            best_x = Some(x);
        }
    }

    // The refined point must dominate the raw candidate set.
    let (argmax, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if best_v < values[argmax] || best_x.is_none() {
        best_v = values[argmax];
        best_x = Some(candidates[argmax].clone());
    }
    Ok((best_x.expect("candidate always present"), best_v))
}

/// Uniform random point in the box; deterministic per seed.
pub fn random_acquisition(bounds: &Bounds, seed_value: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    bounds.sample(&mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::gp::GpHyperparams;
    use crate::quadrature::adaptive_simpson;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toy_model_1d(noise: f64) -> GpModel {
        let mut data = Dataset::new(Bounds::unit(1));
        for (x, y) in [(0.1, 0.3), (0.45, 1.0), (0.8, -0.5)] {
            data.push(vec![x], y).unwrap();
        }
        let hp = GpHyperparams {
            lengthscales: vec![0.2],
            amplitude: 1.0,
            noise_variance: noise,
            mean_constant: 0.0,
        };
        GpModel::new(data, hp).unwrap()
    }

    fn toy_context(noise: f64, cond_noise: f64, s: usize) -> AcquisitionContext {
        let model = toy_model_1d(noise);
        AcquisitionContext::from_model(model, s, 256, 7, cond_noise).unwrap()
    }

    #[test]
    fn aes_is_zero_when_conditionals_match_the_prior() {
        let eta = GaussianNatural::from_mean_variance(0.2, 1.3).unwrap();
        let pe = PointEval {
            eta,
            eta_stars: vec![eta; 8],
            predictive: PredictiveGaussian {
                mean: 0.2,
                variance: 1.3,
                with_noise_variance: 1.3,
            },
            vtr_plus_noise: vec![1.3; 8],
            var_drops: vec![0.0; 8],
            noise_variance: 0.0,
        };
        for alpha in [0.001, 0.5, 0.999] {
            assert_abs_diff_eq!(aes_from_point(&pe, alpha).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(jes_from_point(&pe), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn aes_matches_per_sample_quadrature() {
        // Oracle: numerically integrate p(y) (p_s(y)/p(y))^alpha per sample
        // and assemble the acquisition from the averaged factors.
        let ctx = toy_context(0.0, NOISELESS_CONDITIONING_FLOOR, 32);
        let alpha = 0.5;
        for x in [0.05, 0.3, 0.62, 0.95] {
            let pe = ctx.point_eval(&[x]).unwrap();
            let m = pe.eta.mean();
            let v = pe.eta.variance();
            let mut acc = 0.0;
            for eta_star in &pe.eta_stars {
                let ms = eta_star.mean();
                let vs = eta_star.variance();
                let sd = v.sqrt().max(vs.sqrt());
                let lo = m.min(ms) - 14.0 * sd;
                let hi = m.max(ms) + 14.0 * sd;
                let integrand = |y: f64| {
                    let p = (-0.5 * (y - m) * (y - m) / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                    let ps = (-0.5 * (y - ms) * (y - ms) / vs).exp() / (2.0 * std::f64::consts::PI * vs).sqrt();
                    if p <= 0.0 || ps <= 0.0 {
                        0.0
                    } else {
                        p * (ps / p).powf(alpha)
                    }
                };
                // Split at the conditional's support so the adaptive rule
                // cannot step over a near-degenerate spike.
                let split_lo = (ms - 20.0 * vs.sqrt()).clamp(lo, hi);
                let split_hi = (ms + 20.0 * vs.sqrt()).clamp(lo, hi);
                acc += adaptive_simpson(&integrand, lo, split_lo, 1e-13, 40)
                    + adaptive_simpson(&integrand, split_lo, split_hi, 1e-13, 40)
                    + adaptive_simpson(&integrand, split_hi, hi, 1e-13, 40);
            }
            let oracle = ((1.0 - acc / pe.eta_stars.len() as f64) / ((1.0 - alpha) * alpha)).max(0.0);
            let got = aes_value(&ctx, &[x], alpha).unwrap();
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn aes_is_continuous_in_alpha() {
        let ctx = toy_context(0.0, NOISELESS_CONDITIONING_FLOOR, 16);
        for x in [0.2, 0.55, 0.9] {
            let a = aes_value(&ctx, &[x], 0.999).unwrap();
            let b = aes_value(&ctx, &[x], 0.995).unwrap();
            let scale = a.abs().max(b.abs()).max(1e-12);
            assert!(
                (a - b).abs() / scale <= 0.05,
                "alpha jump at x={x}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn aes_rejects_out_of_range_alpha() {
        let ctx = toy_context(0.0, NOISELESS_CONDITIONING_FLOOR, 4);
        assert!(aes_value(&ctx, &[0.5], 0.0).is_err());
        assert!(aes_value(&ctx, &[0.5], 1.0).is_err());
        assert!(aes_value(&ctx, &[0.5], -0.2).is_err());
    }

    #[test]
    fn conditional_naturals_at_the_sampled_optimum_are_sharp() {
        let ctx = toy_context(0.0, NOISELESS_CONDITIONING_FLOOR, 8);
        for (idx, s) in ctx.samples().iter().enumerate() {
            let eta = ctx.conditional_naturals(idx, &s.x_star).unwrap();
            assert!(eta.eta2 >= 1e6, "eta2 {} too small at the sampled optimum", eta.eta2);
        }
    }

    #[test]
    fn conditional_naturals_round_trip_variance() {
        let ctx = toy_context(0.05, 0.05, 8);
        let x = [0.33];
        let pe = ctx.point_eval(&x).unwrap();
        for (eta_star, vtr) in pe.eta_stars.iter().zip(&pe.vtr_plus_noise) {
            assert_abs_diff_eq!(eta_star.variance(), *vtr, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_naturals_far_away_reduce_to_truncated_prior() {
        // Far from both the data and the sampled optimum the conditioned
        // predictive reverts to the prior truncated at y_star.
        let bounds = Bounds::new(vec![0.0], vec![200.0]).unwrap();
        let hp = GpHyperparams {
            lengthscales: vec![0.5],
            amplitude: 1.0,
            noise_variance: 0.0,
            mean_constant: 0.0,
        };
        let model = GpModel::new(Dataset::new(bounds), hp).unwrap();
        let sample = OptimumSample {
            x_star: vec![10.0],
            y_star: 1.4,
        };
        let ctx = AcquisitionContext::new(model, vec![sample], NOISELESS_CONDITIONING_FLOOR).unwrap();
        let eta = ctx.conditional_naturals(0, &[190.0]).unwrap();
        let tm = truncated_moments(0.0, 1.0, 1.4);
        let expected = GaussianNatural::from_mean_variance(tm.mean_tr, tm.var_tr + NOISELESS_CONDITIONING_FLOOR).unwrap();
        assert_abs_diff_eq!(eta.mean(), expected.mean(), epsilon = 1e-6);
        assert_abs_diff_eq!(eta.variance(), expected.variance(), epsilon = 1e-6);
    }

    #[test]
    fn rank_one_conditioning_matches_full_refactorization() {
        // Dual route: the cached rank-one update must agree with rebuilding
        // the model with the pair appended noiselessly.
        let ctx = toy_context(0.02, 0.02, 6);
        for (idx, s) in ctx.samples().iter().enumerate() {
            let full = ctx.model().condition_on_optimum(&s.x_star, s.y_star).unwrap();
            for x in [0.07, 0.4, 0.73, 0.98] {
                let (base, u) = ctx.model().predict_parts(&[x]).unwrap();
                let (m_fast, v_fast, _) = ctx.conditioned_predictive(idx, &[x], &base, &u);
                let p_full = full.predict(&[x]).unwrap();
                assert_abs_diff_eq!(m_fast, p_full.mean, epsilon = 1e-6);
                assert_abs_diff_eq!(v_fast, p_full.variance, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn jes_decreases_under_added_noise() {
        let model = toy_model_1d(0.0);
        let samples = draw_optimum_set(&model, 12, 256, 3).unwrap();
        let noiseless = AcquisitionContext::new(model.clone(), samples.clone(), NOISELESS_CONDITIONING_FLOOR).unwrap();
        let noisy = AcquisitionContext::new(model, samples, 1.0).unwrap();
        for x in [0.15, 0.5, 0.85] {
            let a = jes_value(&noiseless, &[x]).unwrap();
            let b = jes_value(&noisy, &[x]).unwrap();
            assert!(b < a, "noise should damp the entropy difference: {a} vs {b}");
            assert!(a >= 0.0 && b >= 0.0);
        }
    }

    #[test]
    fn mes_vanishes_for_huge_sampled_maxima() {
        let model = toy_model_1d(0.01);
        let samples = vec![
            OptimumSample { x_star: vec![0.2], y_star: 1e6 },
            OptimumSample { x_star: vec![0.7], y_star: 1e6 },
        ];
        let ctx = AcquisitionContext::new(model, samples, 0.01).unwrap();
        assert_abs_diff_eq!(mes_value(&ctx, &[0.4]).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn mes_equals_jes_with_unconditioned_moments_substituted() {
        // White-box hook: running the entropy-difference core on the
        // unconditioned predictive reproduces the max-value baseline.
        let ctx = toy_context(0.05, 0.05, 8);
        for x in [0.12, 0.5, 0.9] {
            let base = ctx.model().predict(&[x]).unwrap();
            let by_hand = ctx
                .samples()
                .iter()
                .map(|s| truncated_entropy_reduction(base.mean, base.variance, s.y_star, 0.05))
                .sum::<f64>()
                / ctx.num_samples() as f64;
            assert_abs_diff_eq!(mes_value(&ctx, &[x]).unwrap(), by_hand, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimizer_finds_concave_quadratic_maximum() {
        let c = [0.62, 0.31];
        let f = |x: &[f64]| -x.iter().zip(&c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum::<f64>();
        let (x, v) = optimize_acquisition(&f, &Bounds::unit(2), &AcqOptimizerConfig::default(), 5).unwrap();
        assert_abs_diff_eq!(x[0], c[0], epsilon = 1e-4);
        assert_abs_diff_eq!(x[1], c[1], epsilon = 1e-4);
        assert!(v > -1e-7);
    }

    #[test]
    fn optimizer_sends_linear_acquisition_to_the_boundary() {
        let f = |x: &[f64]| x[0] - 0.5 * x[1];
        let (x, _) = optimize_acquisition(&f, &Bounds::unit(2), &AcqOptimizerConfig::default(), 6).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn optimizer_supports_more_restarts() {
        let f = |x: &[f64]| (8.0 * x[0]).sin() + x[0];
        let cfg = AcqOptimizerConfig {
            restarts: 5,
            ..AcqOptimizerConfig::default()
        };
        let (x, v) = optimize_acquisition(&f, &Bounds::unit(1), &cfg, 11).unwrap();
        assert!((0.0..=1.0).contains(&x[0]));
        assert!(v.is_finite());
    }

    #[test]
    fn optimizer_dominates_every_raw_candidate() {
        let f = |x: &[f64]| (13.0 * x[0]).sin() * (7.0 * x[1]).cos();
        let cfg = AcqOptimizerConfig::default();
        let (_, v) = optimize_acquisition(&f, &Bounds::unit(2), &cfg, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..cfg.raw_candidates {
            let x = Bounds::unit(2).sample(&mut rng);
            assert!(v >= f(&x) - 1e-12);
        }
    }

    #[test]
    fn optimizer_rejects_fully_non_finite_acquisitions() {
        let f = |_: &[f64]| f64::NAN;
        assert!(optimize_acquisition(&f, &Bounds::unit(1), &AcqOptimizerConfig::default(), 1).is_err());
    }

    #[test]
    fn random_acquisition_is_uniform_and_deterministic() {
        let bounds = Bounds::unit(2);
        let n = 100_000;
        let mut sums = [0.0; 2];
        for i in 0..n {
            let x = random_acquisition(&bounds, i);
            sums[0] += x[0];
            sums[1] += x[1];
        }
        for s in sums {
            assert!((s / n as f64 - 0.5).abs() < 0.01);
        }
        assert_eq!(random_acquisition(&bounds, 42), random_acquisition(&bounds, 42));
        let degenerate = Bounds::new(vec![0.3], vec![0.3]).unwrap();
        assert_eq!(random_acquisition(&degenerate, 1), vec![0.3]);
    }

    #[test]
    fn singleton_ensemble_normalizes_to_its_component() {
        let ctx = toy_context(0.0, NOISELESS_CONDITIONING_FLOOR, 8);
        let cfg = AcqOptimizerConfig::default();
        let spec = ensemble_prepare(&ctx, &[0.5], &cfg, 3).unwrap();
        assert_eq!(spec.alphas.len(), 1);
        for x in [0.1, 0.42, 0.77] {
            let want = aes_value(&ctx, &[x], 0.5).unwrap() / spec.weights[0];
            assert_abs_diff_eq!(ensemble_value(&spec, &ctx, &[x]).unwrap(), want, epsilon = 1e-12);
        }
        let at_max = ensemble_value(&spec, &ctx, &spec.maximizers[0]).unwrap();
        assert_abs_diff_eq!(at_max, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn duplicated_alphas_share_weights_and_stack() {
        // A noisy context keeps the acquisition unimodal enough for each
        // duplicated component to find the same global maximum.
        let ctx = toy_context(0.1, 0.1, 8);
        let cfg = AcqOptimizerConfig {
            raw_candidates: 500,
            restarts: 6,
            ..AcqOptimizerConfig::default()
        };
        let spec = ensemble_prepare(&ctx, &[0.4, 0.4, 0.4], &cfg, 9).unwrap();
        for w in &spec.weights {
            let rel = (w - spec.weights[0]).abs() / spec.weights[0];
            assert!(rel < 1e-4, "weights diverged: {:?}", spec.weights);
        }
        let single = ensemble_prepare(&ctx, &[0.4], &cfg, 9).unwrap();
        for x in [0.2, 0.6] {
            let stacked = ensemble_value(&spec, &ctx, &[x]).unwrap();
            let base = ensemble_value(&single, &ctx, &[x]).unwrap();
            assert_abs_diff_eq!(stacked, 3.0 * base, epsilon = 1e-4 * stacked.abs().max(1.0));
        }
    }

    #[test]
    fn ensemble_value_is_the_sum_of_normalized_components() {
        let ctx = toy_context(0.0, NOISELESS_CONDITIONING_FLOOR, 8);
        let cfg = AcqOptimizerConfig::default();
        let alphas = default_alpha_grid();
        let spec = ensemble_prepare(&ctx, &alphas, &cfg, 13).unwrap();
        for i in 0..20 {
            let x = [i as f64 / 19.0];
            let direct: f64 = spec
                .alphas
                .iter()
                .zip(&spec.weights)
                .map(|(a, w)| aes_value(&ctx, &x, *a).unwrap() / w)
                .sum();
            assert_abs_diff_eq!(ensemble_value(&spec, &ctx, &x).unwrap(), direct, epsilon = 1e-12);
        }
        // Every component contributes about one at its own maximizer.
        for (i, x_max) in spec.maximizers.iter().enumerate() {
            let contribution = aes_value(&ctx, x_max, spec.alphas[i]).unwrap() / spec.weights[i];
            assert_abs_diff_eq!(contribution, 1.0, epsilon = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn acquisitions_are_non_negative_and_finite(
            mean in -3.0f64..3.0,
            variance in 0.01f64..4.0,
            noise in 0.0f64..0.5,
            shifts in prop::collection::vec((-2.0f64..2.0, 0.05f64..1.5, -1.0f64..3.0), 1..12),
            alpha in 1e-4f64..(1.0 - 1e-4),
        ) {
            let noise = noise.max(NOISELESS_CONDITIONING_FLOOR);
            let eta = GaussianNatural::from_mean_variance(mean, variance + noise).unwrap();
            let mut eta_stars = Vec::new();
            let mut vtr = Vec::new();
            let mut drops = Vec::new();
            for (dm, scale, y_star) in shifts {
                // Conditioned moments: a shifted, shrunk Gaussian truncated at y_star.
                let cond_var = variance * scale.min(1.0);
                let tm = truncated_moments(mean + dm, cond_var, y_star);
                let v = tm.var_tr + noise;
                eta_stars.push(GaussianNatural::from_mean_variance(tm.mean_tr, v).unwrap());
                vtr.push(v);
                drops.push((variance - cond_var) + tm.var_drop);
            }
            let pe = PointEval {
                eta,
                eta_stars,
                predictive: PredictiveGaussian { mean, variance, with_noise_variance: variance + noise },
                vtr_plus_noise: vtr,
                var_drops: drops,
                noise_variance: noise,
            };
            let aes = aes_from_point(&pe, alpha).unwrap();
            prop_assert!(aes.is_finite() && aes >= 0.0);
            let jes = jes_from_point(&pe);
            prop_assert!(jes.is_finite() && jes >= 0.0);
        }
    }
}
