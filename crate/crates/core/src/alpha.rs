//! Alpha-divergence primitives: the alpha-logarithm, Gaussian natural
//! parameters with their log-normalizer, and the closed-form ratio integral
//! that the divergence-based acquisition values reduce to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible divergence order; the `1/((1-alpha) alpha)` prefactor
/// is ill-conditioned outside `[ALPHA_MIN, ALPHA_MAX]`.
pub const ALPHA_MIN: f64 = 1e-4;
/// Largest admissible divergence order.
pub const ALPHA_MAX: f64 = 1.0 - 1e-4;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Validates that `alpha` lies in the supported open-interval grid.
pub fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || !(ALPHA_MIN..=ALPHA_MAX).contains(&alpha) {
        return Err(Error::Domain(format!(
            "alpha must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {alpha}"
        )));
    }
    Ok(())
}

/// Natural parameters `(eta1, eta2) = (mean/variance, 1/variance)` of a
/// univariate Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNatural {
    pub eta1: f64,
    pub eta2: f64,
}

impl GaussianNatural {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        if !eta1.is_finite() || !eta2.is_finite() || eta2 <= 0.0 {
            return Err(Error::Domain(format!(
                "invalid natural parameters ({eta1}, {eta2}); eta2 must be positive"
            )));
        }
        Ok(Self { eta1, eta2 })
    }

    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::Domain(format!("variance must be positive, got {variance}")));
        }
        Self::new(mean / variance, 1.0 / variance)
    }

    pub fn mean(&self) -> f64 {
        self.eta1 / self.eta2
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.eta2
    }

    /// Convex combination `(1 - t) * self + t * other` in natural-parameter space.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        Self {
            eta1: (1.0 - t) * self.eta1 + t * other.eta1,
            eta2: (1.0 - t) * self.eta2 + t * other.eta2,
        }
    }
}

/// The alpha-logarithm `(x^(1-alpha) - 1) / (1 - alpha)`, defined for `alpha != 1`
/// and converging to `ln x` as `alpha -> 1`.
pub fn alpha_log(x: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("alpha_log requires x > 0, got {x}")));
    }
    if !alpha.is_finite() || alpha == 1.0 {
        return Err(Error::Domain(format!("alpha_log requires finite alpha != 1, got {alpha}")));
    }
    let one_minus = 1.0 - alpha;
    // exp_m1/ln keeps precision when alpha is close to 1.
    Ok((one_minus * x.ln()).exp_m1() / one_minus)
}

/// Log-normalizer `g(eta) = 0.5 ln(2 pi) - 0.5 ln(eta2) + 0.5 eta1^2 / eta2`
/// of a univariate Gaussian in natural parameters.
pub fn log_normalizer(eta: &GaussianNatural) -> f64 {
    0.5 * LN_2PI - 0.5 * eta.eta2.ln() + 0.5 * eta.eta1 * eta.eta1 / eta.eta2
}

/// Closed form of `int p(y) (p_star(y) / p(y))^alpha dy` for Gaussians `p`
/// (natural parameters `eta`) and `p_star` (natural parameters `eta_star`):
/// `exp{(alpha - 1) g(eta) - alpha g(eta_star) + g((1 - alpha) eta + alpha eta_star)}`.
///
/// The value lies in `(0, 1]`, with 1 exactly when the distributions coincide.
pub fn alpha_integral_factor(
    eta: &GaussianNatural,
    eta_star: &GaussianNatural,
    alpha: f64,
) -> Result<f64> {
    validate_alpha(alpha)?;
    let exponent = log_alpha_integral_factor(eta, eta_star, alpha);
    Ok(exponent.exp())
}

/// Log of [`alpha_integral_factor`]; always `<= 0` up to rounding.
pub fn log_alpha_integral_factor(
    eta: &GaussianNatural,
    eta_star: &GaussianNatural,
    alpha: f64,
) -> f64 {
    let mixed = eta.mix(eta_star, alpha);
    (alpha - 1.0) * log_normalizer(eta) - alpha * log_normalizer(eta_star) + log_normalizer(&mixed)
}

/// Amari alpha-divergence between univariate Gaussians given as
/// `(mean, variance)` pairs:
/// `D_alpha(p || q) = (1 - int q^(1-alpha) p^alpha) / ((1 - alpha) alpha)`.
pub fn gaussian_alpha_divergence(p: (f64, f64), q: (f64, f64), alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    let eta_p = GaussianNatural::from_mean_variance(p.0, p.1)?;
    let eta_q = GaussianNatural::from_mean_variance(q.0, q.1)?;
    // The integral is the ratio-form factor with q as the base measure.
    let factor = alpha_integral_factor(&eta_q, &eta_p, alpha)?;
    Ok(((1.0 - factor) / ((1.0 - alpha) * alpha)).max(0.0))
}

/// Closed-form `KL(p || q)` between univariate Gaussians `(mean, variance)`.
pub fn gaussian_kl(p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    if p.1 <= 0.0 || q.1 <= 0.0 {
        return Err(Error::Domain("variances must be positive".into()));
    }
    Ok(0.5 * ((q.1 / p.1).ln() + (p.1 + (p.0 - q.0).powi(2)) / q.1 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_pdf(y: f64, mean: f64, var: f64) -> f64 {
        (-0.5 * (y - mean) * (y - mean) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    /// Quadrature oracle for the ratio integral, over a range wide enough to
    /// cover both densities' 12-sigma supports.
    fn ratio_integral_quadrature(eta: &GaussianNatural, eta_star: &GaussianNatural, alpha: f64) -> f64 {
        let (m, v) = (eta.mean(), eta.variance());
        let (ms, vs) = (eta_star.mean(), eta_star.variance());
        let sd = v.sqrt().max(vs.sqrt());
        let lo = (m.min(ms)) - 12.0 * sd;
        let hi = (m.max(ms)) + 12.0 * sd;
        let f = |y: f64| {
            let p = gaussian_pdf(y, m, v);
            let ps = gaussian_pdf(y, ms, vs);
            if p <= 0.0 || ps <= 0.0 {
                0.0
            } else {
                p * (ps / p).powf(alpha)
            }
        };
        adaptive_simpson(&f, lo, hi, 1e-12, 40)
    }

    #[test]
    fn natural_round_trip_is_identity() {
        let eta = GaussianNatural::from_mean_variance(-2.3, 0.7).unwrap();
        let eta2 = GaussianNatural::from_mean_variance(eta.mean(), eta.variance()).unwrap();
        assert_abs_diff_eq!(eta.eta1, eta2.eta1, epsilon = 1e-12);
        assert_abs_diff_eq!(eta.eta2, eta2.eta2, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_positive_eta2() {
        assert!(GaussianNatural::new(0.0, 0.0).is_err());
        assert!(GaussianNatural::new(0.0, -1.0).is_err());
        assert!(GaussianNatural::from_mean_variance(0.0, 0.0).is_err());
    }

    #[test]
    fn alpha_log_of_one_is_zero() {
        for alpha in [0.001, 0.3, 0.999, -2.0, 5.0] {
            assert_eq!(alpha_log(1.0, alpha).unwrap(), 0.0);
        }
    }

    #[test]
    fn alpha_log_half_order() {
        // (4^0.5 - 1) / 0.5 = 2.
        assert_abs_diff_eq!(alpha_log(4.0, 0.5).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_log_approaches_natural_log() {
        let got = alpha_log(2.0, 1.0 - 1e-7).unwrap();
        assert_abs_diff_eq!(got, std::f64::consts::LN_2, epsilon = 1e-6);
        // Uniform convergence on [0.1, 10].
        for i in 0..100 {
            let x = 0.1 + 9.9 * i as f64 / 99.0;
            assert_abs_diff_eq!(alpha_log(x, 1.0 - 1e-9).unwrap(), x.ln(), epsilon = 1e-7);
        }
    }

    #[test]
    fn alpha_log_rejects_domain_violations() {
        assert!(alpha_log(0.0, 0.5).is_err());
        assert!(alpha_log(-1.0, 0.5).is_err());
        assert!(alpha_log(2.0, 1.0).is_err());
    }

    #[test]
    fn log_normalizer_matches_quadrature() {
        // Oracle: g(eta) = ln int exp(eta1 y - 0.5 eta2 y^2) dy.
        let oracle = |eta: &GaussianNatural| {
            let m = eta.mean();
            let sd = eta.variance().sqrt();
            let f = |y: f64| (eta.eta1 * y - 0.5 * eta.eta2 * y * y).exp();
            adaptive_simpson(&f, m - 14.0 * sd, m + 14.0 * sd, 1e-13, 40).ln()
        };

        let standard = GaussianNatural::new(0.0, 1.0).unwrap();
        let g = log_normalizer(&standard);
        assert_abs_diff_eq!(g, oracle(&standard), epsilon = 1e-9);
        assert_abs_diff_eq!(g, 0.918_938_533_204_672_7, epsilon = 1e-12);

        let skewed = GaussianNatural::new(0.5, 0.5).unwrap();
        let g = log_normalizer(&skewed);
        assert_abs_diff_eq!(g, oracle(&skewed), epsilon = 1e-9);
        assert_abs_diff_eq!(g, 1.515_512_123_484_645_4, epsilon = 1e-10);
    }

    #[test]
    fn log_normalizer_decreases_in_eta2() {
        let g1 = log_normalizer(&GaussianNatural::new(0.0, 1.0).unwrap());
        let g2 = log_normalizer(&GaussianNatural::new(0.0, 2.0).unwrap());
        assert!(g2 < g1);
    }

    #[test]
    fn integral_factor_is_one_at_equality() {
        let eta = GaussianNatural::from_mean_variance(0.3, 2.0).unwrap();
        for alpha in [0.001, 0.25, 0.5, 0.75, 0.999] {
            assert_abs_diff_eq!(alpha_integral_factor(&eta, &eta, alpha).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn integral_factor_near_alpha_one_is_near_one() {
        // As alpha -> 1 the integrand tends to p_star, which normalizes to 1.
        let eta = GaussianNatural::from_mean_variance(0.0, 1.0).unwrap();
        let eta_star = GaussianNatural::from_mean_variance(1.0, 0.5).unwrap();
        let factor = alpha_integral_factor(&eta, &eta_star, ALPHA_MAX).unwrap();
        assert_abs_diff_eq!(factor, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn integral_factor_matches_quadrature_on_fixed_case() {
        let eta = GaussianNatural::from_mean_variance(0.0, 1.0).unwrap();
        let eta_star = GaussianNatural::from_mean_variance(1.0, 0.5).unwrap();
        let got = alpha_integral_factor(&eta, &eta_star, 0.5).unwrap();
        let want = ratio_integral_quadrature(&eta, &eta_star, 0.5);
        assert_abs_diff_eq!(got, want, epsilon = 1e-8);
    }

    #[test]
    fn integral_factor_matches_quadrature_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let eta = GaussianNatural::from_mean_variance(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.05..4.0),
            )
            .unwrap();
            let eta_star = GaussianNatural::from_mean_variance(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.05..4.0),
            )
            .unwrap();
            let alpha = rng.gen_range(ALPHA_MIN..ALPHA_MAX);
            let got = alpha_integral_factor(&eta, &eta_star, alpha).unwrap();
            let want = ratio_integral_quadrature(&eta, &eta_star, alpha);
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
            assert!(got > 0.0 && got <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn divergence_zero_iff_equal() {
        assert_eq!(gaussian_alpha_divergence((0.0, 1.0), (0.0, 1.0), 0.3).unwrap(), 0.0);
        assert!(gaussian_alpha_divergence((0.0, 1.0), (0.1, 1.0), 0.3).unwrap() > 0.0);
    }

    #[test]
    fn divergence_at_half_is_hellinger() {
        // Oracle: 2 int (sqrt(p) - sqrt(q))^2 dy by quadrature; closed form
        // 4 (1 - exp(-1/8)) for unit-variance Gaussians one apart.
        let p = (0.0, 1.0);
        let q = (1.0, 1.0);
        let f = |y: f64| {
            let sp = gaussian_pdf(y, p.0, p.1).sqrt();
            let sq = gaussian_pdf(y, q.0, q.1).sqrt();
            2.0 * (sp - sq) * (sp - sq)
        };
        let hellinger = adaptive_simpson(&f, -14.0, 15.0, 1e-12, 40);
        let closed = 4.0 * (1.0 - (-0.125f64).exp());
        let got = gaussian_alpha_divergence(p, q, 0.5).unwrap();
        assert_abs_diff_eq!(closed, 0.470_012_389_661_618_2, epsilon = 1e-12);
        assert_abs_diff_eq!(got, hellinger, epsilon = 1e-8);
        assert_abs_diff_eq!(got, closed, epsilon = 1e-10);
    }

    #[test]
    fn divergence_limits_approach_kl() {
        let p = (0.0, 1.0);
        let q = (1.0, 1.0);
        let direct = gaussian_kl(p, q).unwrap();
        assert_abs_diff_eq!(direct, 0.5, epsilon = 1e-12);
        let reversed = gaussian_kl(q, p).unwrap();
        assert_abs_diff_eq!(gaussian_alpha_divergence(p, q, 0.999).unwrap(), direct, epsilon = 1e-2);
        assert_abs_diff_eq!(gaussian_alpha_divergence(p, q, 0.001).unwrap(), reversed, epsilon = 1e-2);
    }

    #[test]
    fn divergence_non_negative_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let p = (rng.gen_range(-4.0..4.0), rng.gen_range(0.01..5.0));
            let q = (rng.gen_range(-4.0..4.0), rng.gen_range(0.01..5.0));
            let alpha = rng.gen_range(ALPHA_MIN..ALPHA_MAX);
            let d = gaussian_alpha_divergence(p, q, alpha).unwrap();
            assert!(d >= 0.0, "negative divergence {d} for {p:?} {q:?} alpha {alpha}");
        }
    }

    #[test]
    fn divergence_rejects_bad_inputs() {
        assert!(gaussian_alpha_divergence((0.0, -1.0), (0.0, 1.0), 0.5).is_err());
        assert!(gaussian_alpha_divergence((0.0, 1.0), (0.0, 1.0), 0.0).is_err());
        assert!(gaussian_alpha_divergence((0.0, 1.0), (0.0, 1.0), 1.0).is_err());
    }
}
