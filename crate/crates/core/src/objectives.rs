//! Objective-function zoo: synthetic GP-drawn objectives, standard
//! maximization benchmarks, a noise wrapper with a noiseless channel for
//! regret evaluation, and a grid-plus-refinement global-maximum finder.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Bounds, Dataset};
use crate::error::{Error, Result};
use crate::gp::{GpHyperparams, GpModel};
use crate::optimize::{maximize_bounded, OptimizeControl};
use crate::rff::{build_rff, sample_posterior_function, PosteriorFunctionSample};
use crate::seed;

/// Hartmann coefficient tables and the other benchmark constants below follow
/// the standard global-optimization test-function literature; the in-repo
/// grid oracle verifies every documented optimum rather than trusting it.
const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
const HARTMANN_C: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

#[derive(Clone)]
enum ObjectiveKind {
    /// Deterministic prior draw from an RFF-approximated GP.
    SyntheticGp(Arc<PosteriorFunctionSample>),
    Hartmann3,
    Hartmann6,
    /// Negated Styblinski-Tang.
    StyblinskiTang,
    /// Cosine mixture.
    CosineMixture,
    /// Deterministic multimodal 5-D stand-in for expensive tuning objectives.
    Surrogate5,
    /// Caller-supplied deterministic function.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            ObjectiveKind::SyntheticGp(_) => "SyntheticGp",
            ObjectiveKind::Hartmann3 => "Hartmann3",
            ObjectiveKind::Hartmann6 => "Hartmann6",
            ObjectiveKind::StyblinskiTang => "StyblinskiTang",
            ObjectiveKind::CosineMixture => "CosineMixture",
            ObjectiveKind::Surrogate5 => "Surrogate5",
            ObjectiveKind::Custom(_) => "Custom",
        };
        f.write_str(label)
    }
}

/// A deterministic objective with box bounds and an optional verified maximum.
#[derive(Debug, Clone)]
pub struct Objective {
    name: String,
    bounds: Bounds,
    kind: ObjectiveKind,
    known_max: Option<(Vec<f64>, f64)>,
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn known_max(&self) -> Option<&(Vec<f64>, f64)> {
        self.known_max.as_ref()
    }

    /// Noiseless objective value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match &self.kind {
            ObjectiveKind::SyntheticGp(sample) => sample.value(x),
            ObjectiveKind::Hartmann3 => hartmann(x, &HARTMANN3_A, &HARTMANN3_P),
            ObjectiveKind::Hartmann6 => hartmann(x, &HARTMANN6_A, &HARTMANN6_P),
            ObjectiveKind::StyblinskiTang => {
                -0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>()
            }
            ObjectiveKind::CosineMixture => {
                0.1 * x.iter().map(|v| (5.0 * std::f64::consts::PI * v).cos()).sum::<f64>()
                    - x.iter().map(|v| v * v).sum::<f64>()
            }
            ObjectiveKind::Surrogate5 => x
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    ((4.0 * std::f64::consts::PI * v) + 0.5 * (i + 1) as f64).sin()
                        * (-2.0 * (v - 0.5) * (v - 0.5)).exp()
                })
                .sum::<f64>(),
            ObjectiveKind::Custom(f) => f(x),
        }
    }

    /// Wraps a caller-supplied deterministic function as an objective.
    pub fn from_fn<F>(name: impl Into<String>, bounds: Bounds, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            bounds,
            kind: ObjectiveKind::Custom(Arc::new(f)),
            known_max: None,
        }
    }

    /// Locates and stores the global maximum via the grid oracle.
    pub fn with_known_max(mut self, grid_size: usize) -> Self {
        let (x_opt, f_opt) = find_global_max(&self, grid_size);
        self.known_max = Some((x_opt, f_opt));
        self
    }

    /// Records an externally known maximum without running the grid oracle.
    pub fn with_recorded_max(mut self, x_opt: Vec<f64>, f_opt: f64) -> Self {
        self.known_max = Some((x_opt, f_opt));
        self
    }
}

fn hartmann<const D: usize>(x: &[f64], a: &[[f64; D]; 4], p: &[[f64; D]; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let mut inner = 0.0;
        for j in 0..D {
            let diff = x[j] - p[i][j];
            inner += a[i][j] * diff * diff;
        }
        acc += HARTMANN_C[i] * (-inner).exp();
    }
    acc
}

/// A GP-drawn objective on `[0, 1]^dim`: a fixed RFF prior draw, deterministic
/// per seed, so the surrogate model family matches the objective exactly.
///
/// Omitted hyperparameters default to length-scales of 0.25, unit amplitude,
/// and no noise.
pub fn make_synthetic_gp_objective(
    dim: usize,
    seed_value: u64,
    hp: Option<GpHyperparams>,
    num_features: usize,
) -> Result<Objective> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let bounds = Bounds::unit(dim);
    let hp = hp.unwrap_or(GpHyperparams {
        lengthscales: vec![0.25; dim],
        amplitude: 1.0,
        noise_variance: 0.0,
        mean_constant: 0.0,
    });
    hp.validate(dim)?;
    let prior = GpModel::new(Dataset::new(bounds.clone()), hp.clone())?;
    let basis = Arc::new(build_rff(&hp, num_features, seed::mix(seed_value, 0x0b))?);
    let sample = sample_posterior_function(&prior, &basis, seed::mix(seed_value, 0x0d))?;
    Ok(Objective {
        name: format!("synthetic-gp-{dim}d"),
        bounds,
        kind: ObjectiveKind::SyntheticGp(Arc::new(sample)),
        known_max: None,
    })
}

/// Looks up a benchmark objective by name and verifies its maximum with the
/// grid oracle.
pub fn benchmark(name: &str) -> Result<Objective> {
    let obj = match name {
        "hartmann3" => Objective {
            name: name.into(),
            bounds: Bounds::unit(3),
            kind: ObjectiveKind::Hartmann3,
            known_max: None,
        },
        "hartmann6" => Objective {
            name: name.into(),
            bounds: Bounds::unit(6),
            kind: ObjectiveKind::Hartmann6,
            known_max: None,
        },
        "styblinski-tang4" => Objective {
            name: name.into(),
            bounds: Bounds::symmetric(4, 5.0)?,
            kind: ObjectiveKind::StyblinskiTang,
            known_max: None,
        },
        "cosine8" => Objective {
            name: name.into(),
            bounds: Bounds::symmetric(8, 1.0)?,
            kind: ObjectiveKind::CosineMixture,
            known_max: None,
        },
        "surrogate5" => Objective {
            name: name.into(),
            bounds: Bounds::unit(5),
            kind: ObjectiveKind::Surrogate5,
            known_max: None,
        },
        other => {
            return Err(Error::InvalidArgument(format!("unknown benchmark '{other}'")));
        }
    };
    let grid = 10_000 * obj.dim();
    Ok(obj.with_known_max(grid))
}

/// Registry lookup for CLI configs: benchmark names plus
/// `synthetic-gp-<D>d`, whose draw is controlled by `seed`.
pub fn resolve_objective(name: &str, seed_value: u64) -> Result<Objective> {
    if let Some(dim) = name
        .strip_prefix("synthetic-gp-")
        .and_then(|rest| rest.strip_suffix('d'))
        .and_then(|d| d.parse::<usize>().ok())
    {
        let obj = make_synthetic_gp_objective(dim, seed_value, None, 2048)?;
        return Ok(obj.with_known_max(10_000 * dim));
    }
    benchmark(name)
}

/// Names resolvable by [`resolve_objective`].
pub fn list_objectives() -> Vec<&'static str> {
    vec![
        "hartmann3",
        "hartmann6",
        "styblinski-tang4",
        "cosine8",
        "surrogate5",
        "synthetic-gp-<D>d",
    ]
}

/// Global maximum by quasi-uniform grid search plus quasi-Newton refinement
/// from the best candidates. `grid_size` is the total candidate count; the
/// box center is always included as a candidate.
pub fn find_global_max(obj: &Objective, grid_size: usize) -> (Vec<f64>, f64) {
    let bounds = obj.bounds();
    let mut candidates = halton_grid(bounds, grid_size.max(1));
    candidates.push(
        bounds
            .lower()
            .iter()
            .zip(bounds.upper())
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect(),
    );
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, x)| (obj.eval(x), i))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let f = |x: &[f64]| obj.eval(x);
    let ctrl = OptimizeControl::with_max_iters(150);
    type NoGrad = fn(&[f64]) -> Vec<f64>;
    let mut best_x = candidates[scored[0].1].clone();
    let mut best_v = scored[0].0;
    for &(_, idx) in scored.iter().take(10) {
        let (x, v) =
            maximize_bounded::<_, NoGrad>(&f, None, &candidates[idx], bounds.lower(), bounds.upper(), &ctrl);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    (best_x, best_v)
}

fn halton_grid(bounds: &Bounds, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let dim = bounds.dim();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let u = radical_inverse(i as u64 + 1, PRIMES[d]);
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

/// An objective observed through additive Gaussian noise, with the noiseless
/// channel still available for regret evaluation.
#[derive(Debug, Clone)]
pub struct NoisyObjective {
    base: Objective,
    noise_variance: f64,
    rng: ChaCha8Rng,
}

impl NoisyObjective {
    pub fn new(base: Objective, noise_variance: f64, seed_value: u64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        Ok(Self {
            base,
            noise_variance,
            rng: ChaCha8Rng::seed_from_u64(seed_value),
        })
    }

    pub fn base(&self) -> &Objective {
        &self.base
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Noisy observation `y = f(x) + eps`.
    pub fn observe(&mut self, x: &[f64]) -> Result<f64> {
        if !self.base.bounds().contains(x) {
            return Err(Error::InvalidArgument(format!("query {x:?} outside bounds")));
        }
        let value = self.base.eval(x);
        if self.noise_variance == 0.0 {
            return Ok(value);
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        Ok(value + self.noise_variance.sqrt() * z)
    }

    /// Noiseless channel for regret accounting.
    pub fn noiseless(&self, x: &[f64]) -> f64 {
        self.base.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn synthetic_objective_is_deterministic_per_seed() {
        let a = make_synthetic_gp_objective(4, 5, None, 256).unwrap();
        let b = make_synthetic_gp_objective(4, 5, None, 256).unwrap();
        let c = make_synthetic_gp_objective(4, 6, None, 256).unwrap();
        assert_eq!(a.dim(), 4);
        assert_eq!(a.bounds().lower(), &[0.0; 4]);
        let probe = [0.3, 0.1, 0.9, 0.5];
        assert_eq!(a.eval(&probe), b.eval(&probe));
        assert_ne!(a.eval(&probe), c.eval(&probe));
    }

    #[test]
    fn synthetic_objective_variance_matches_the_prior() {
        // In four dimensions the box spans enough correlation lengths for one
        // draw's spatial variance to self-average toward the amplitude.
        let obj = make_synthetic_gp_objective(4, 11, None, 2048).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0)).collect();
                obj.eval(&x)
            })
            .collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.2, "sample variance {var} too far from amplitude 1");
    }

    #[test]
    fn hartmann3_maximum_matches_the_grid_oracle() {
        let obj = benchmark("hartmann3").unwrap();
        let (x_opt, f_opt) = obj.known_max().unwrap();
        assert_abs_diff_eq!(*f_opt, 3.86278, epsilon = 2e-4);
        assert!(obj.bounds().contains(x_opt));
    }

    #[test]
    fn hartmann6_maximum_matches_the_grid_oracle() {
        let obj = benchmark("hartmann6").unwrap();
        let (_, f_opt) = obj.known_max().unwrap();
        assert_abs_diff_eq!(*f_opt, 3.32237, epsilon = 2e-4);
    }

    #[test]
    fn styblinski_tang_maximum_matches_separable_oracle() {
        // Oracle: maximize the negated one-dimensional term on a dense grid
        // with local refinement, then multiply by the dimension.
        let term = |x: f64| -0.5 * (x.powi(4) - 16.0 * x * x + 5.0 * x);
        let mut best_x = -5.0;
        let mut best = f64::NEG_INFINITY;
        for i in 0..1_000_000 {
            let x = -5.0 + 10.0 * i as f64 / 999_999.0;
            let v = term(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        // One Newton step on the quartic sharpens the grid argmax.
        for _ in 0..50 {
            let d1 = -0.5 * (4.0 * best_x.powi(3) - 32.0 * best_x + 5.0);
            let d2 = -0.5 * (12.0 * best_x * best_x - 32.0);
            best_x -= d1 / d2;
        }
        let per_dim = term(best_x);
        let obj = benchmark("styblinski-tang4").unwrap();
        let (_, f_opt) = obj.known_max().unwrap();
        assert_abs_diff_eq!(*f_opt, 4.0 * per_dim, epsilon = 1e-5);
        assert_abs_diff_eq!(*f_opt, 156.664_662_815, epsilon = 1e-3);
    }

    #[test]
    fn cosine_mixture_maximum_is_at_the_origin() {
        let obj = benchmark("cosine8").unwrap();
        let (x_opt, f_opt) = obj.known_max().unwrap();
        let documented = obj.eval(&vec![0.0; 8]);
        assert_abs_diff_eq!(documented, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(*f_opt, documented, epsilon = 1e-6);
        for v in x_opt {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn unknown_benchmark_name_is_rejected() {
        assert!(benchmark("rosenbrock").is_err());
    }

    #[test]
    fn registry_resolves_synthetic_names() {
        let obj = resolve_objective("synthetic-gp-4d", 3).unwrap();
        assert_eq!(obj.dim(), 4);
        assert!(obj.known_max().is_some());
        assert!(resolve_objective("synthetic-gp-xd", 3).is_err());
    }

    #[test]
    fn grid_oracle_finds_a_parabola_optimum() {
        let obj = Objective::from_fn("parabola1", Bounds::unit(1), |x| -(x[0] - 0.3) * (x[0] - 0.3));
        let (x_opt, f_opt) = find_global_max(&obj, 10_000);
        assert_abs_diff_eq!(x_opt[0], 0.3, epsilon = 1e-5);
        assert!(f_opt > -1e-9);
    }

    #[test]
    fn grid_oracle_separates_componentwise_optima() {
        let centers = [0.2, 0.65, 0.9];
        let obj = Objective::from_fn("parabola3", Bounds::unit(3), move |x| {
            -x.iter().zip(&centers).map(|(xi, c)| (xi - c) * (xi - c)).sum::<f64>()
        });
        let (x_opt, _) = find_global_max(&obj, 30_000);
        for (xi, c) in x_opt.iter().zip(&centers) {
            assert_abs_diff_eq!(xi, c, epsilon = 1e-4);
        }
    }

    #[test]
    fn grid_oracle_is_stable_under_refinement() {
        let obj = make_synthetic_gp_objective(4, 21, None, 512).unwrap();
        let (_, a) = find_global_max(&obj, 20_000);
        let (_, b) = find_global_max(&obj, 40_000);
        assert!((a - b).abs() < 1e-4, "refined optimum moved: {a} vs {b}");
    }

    #[test]
    fn noiseless_wrapper_returns_exact_values() {
        let obj = benchmark("hartmann3").unwrap();
        let mut noisy = NoisyObjective::new(obj.clone(), 0.0, 1).unwrap();
        let x = [0.2, 0.5, 0.7];
        assert_eq!(noisy.observe(&x).unwrap(), obj.eval(&x));
        assert!(noisy.observe(&[2.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn noisy_wrapper_has_the_declared_variance() {
        let obj = benchmark("hartmann3").unwrap();
        let x = [0.4, 0.4, 0.4];
        let truth = obj.eval(&x);
        let mut noisy = NoisyObjective::new(obj, 0.1, 7).unwrap();
        let n = 10_000;
        let values: Vec<f64> = (0..n).map(|_| noisy.observe(&x).unwrap()).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 0.1).abs() < 0.01, "sample variance {var}");
        assert!((mean - truth).abs() < 3.0 * (0.1f64 / n as f64).sqrt());
    }

    #[test]
    fn noise_stream_is_deterministic_per_seed() {
        let obj = benchmark("surrogate5").unwrap();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        let mut a = NoisyObjective::new(obj.clone(), 0.5, 13).unwrap();
        let mut b = NoisyObjective::new(obj, 0.5, 13).unwrap();
        for _ in 0..10 {
            assert_eq!(a.observe(&x).unwrap(), b.observe(&x).unwrap());
        }
    }

    #[test]
    fn known_max_dominates_dense_probes() {
        for name in ["hartmann3", "styblinski-tang4", "surrogate5"] {
            let obj = benchmark(name).unwrap();
            let (_, f_opt) = obj.known_max().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..2_000 {
                let x = obj.bounds().sample(&mut rng);
                assert!(
                    obj.eval(&x) <= f_opt + 1e-6,
                    "{name}: probe beat the recorded maximum"
                );
            }
        }
    }
}
