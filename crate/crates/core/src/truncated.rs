//! Moments of an upper-truncated Gaussian and the entropy-reduction core
//! shared by the conditional-entropy acquisition baselines.

use statrs::function::erf::erfc;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Hazard-like ratio `phi(beta) / Phi(beta)`, with an asymptotic series for
/// the deep lower tail where both terms underflow.
fn pdf_over_cdf(beta: f64) -> f64 {
    if beta < -30.0 {
        // phi/Phi ~ -beta - 1/beta + 2/beta^3 as beta -> -inf.
        -beta - 1.0 / beta + 2.0 / (beta * beta * beta)
    } else {
        std_normal_pdf(beta) / std_normal_cdf(beta)
    }
}

/// Mean and variance of `N(mean, variance)` truncated to `(-inf, y_star]`,
/// with the standardized truncation point `beta = (y_star - mean) / sqrt(variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mean_tr: f64,
    pub var_tr: f64,
    /// Variance removed by the truncation, `variance - var_tr`, computed
    /// without cancellation so vanishing truncations stay exact.
    pub var_drop: f64,
    pub beta: f64,
}

/// Moments of the upper-truncated Gaussian:
/// `m_tr = m - sqrt(v) phi(beta) / Phi(beta)` and
/// `v_tr = v [1 - beta phi/Phi - (phi/Phi)^2]`.
///
/// Degenerate inputs (`variance <= 1e-12`) return the untruncated moments
/// with the mean clipped at `y_star`.
pub fn truncated_moments(mean: f64, variance: f64, y_star: f64) -> TruncatedMoments {
    if variance <= 1e-12 {
        return TruncatedMoments {
            mean_tr: mean.min(y_star),
            var_tr: variance.max(0.0),
            var_drop: 0.0,
            beta: 0.0,
        };
    }
    let sd = variance.sqrt();
    let beta = (y_star - mean) / sd;
    let lambda = pdf_over_cdf(beta);
    let mean_tr = mean - sd * lambda;
    let drop = (variance * lambda * (beta + lambda)).clamp(0.0, variance);
    TruncatedMoments {
        mean_tr,
        var_tr: variance - drop,
        var_drop: drop,
        beta,
    }
}

/// Entropy drop `0.5 ln((v + sigma^2) / (v_tr + sigma^2))` from truncating a
/// predictive `N(mean, variance)` at `y_star`, both sides widened by the
/// observation noise. Non-negative since truncation shrinks the variance;
/// evaluated as `ln_1p` of the relative variance drop for precision in the
/// weak-truncation regime.
pub fn truncated_entropy_reduction(mean: f64, variance: f64, y_star: f64, noise_variance: f64) -> f64 {
    let tm = truncated_moments(mean, variance, y_star);
    (0.5 * (tm.var_drop / (tm.var_tr + noise_variance)).ln_1p()).max(0.0)
}
