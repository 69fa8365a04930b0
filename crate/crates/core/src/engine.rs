//! The outer optimization loop: acquisition-driven querying, per-iteration
//! refits, recommendation rules, regret accounting, and run-record
//! serialization to JSON lines and flat CSV.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    aes_value, ensemble_prepare, ensemble_value, jes_value, mes_value, optimize_acquisition,
    random_acquisition, AcqOptimizerConfig, AcquisitionContext, NOISELESS_CONDITIONING_FLOOR,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::{fit_from, FitConfig, GpModel};
use crate::objectives::{NoisyObjective, Objective};
use crate::seed;

/// Acquisition strategy for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Alpha-divergence acquisition at a fixed order.
    Aes { alpha: f64 },
    /// Normalized combination over a grid of orders.
    Ensemble,
    Jes,
    Mes,
    Random,
}

impl Method {
    /// Parses `random`, `jes`, `mes`, `ensemble`, or `aes:<alpha>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Method::Random),
            "jes" => Ok(Method::Jes),
            "mes" => Ok(Method::Mes),
            "ensemble" => Ok(Method::Ensemble),
            other => {
                if let Some(alpha) = other.strip_prefix("aes:") {
                    let alpha: f64 = alpha
                        .parse()
                        .map_err(|_| Error::Config(format!("bad alpha in method '{other}'")))?;
                    crate::alpha::validate_alpha(alpha)?;
                    Ok(Method::Aes { alpha })
                } else {
                    Err(Error::Config(format!("unknown method '{other}'")))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Aes { alpha } => format!("aes:{alpha}"),
            Method::Ensemble => "ensemble".into(),
            Method::Jes => "jes".into(),
            Method::Mes => "mes".into(),
            Method::Random => "random".into(),
        }
    }

    fn needs_samples(&self) -> bool {
        !matches!(self, Method::Random)
    }
}

/// Observation-noise declaration for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseMode {
    Noiseless,
    Noisy { variance: f64 },
}

impl NoiseMode {
    pub fn variance(&self) -> f64 {
        match self {
            NoiseMode::Noiseless => 0.0,
            NoiseMode::Noisy { variance } => *variance,
        }
    }

    pub fn is_noisy(&self) -> bool {
        matches!(self, NoiseMode::Noisy { .. })
    }
}

/// Configuration of one optimization run.
#[derive(Debug, Clone)]
pub struct BoConfig {
    pub method: Method,
    /// Number of acquisition-driven evaluations after the initial design.
    pub budget: usize,
    pub n_initial: usize,
    /// Solution samples per acquisition batch.
    pub num_solution_samples: usize,
    /// RFF features for posterior sampling.
    pub num_features: usize,
    pub noise_mode: NoiseMode,
    /// Known-noise mode: pin the fitted noise to the declared variance.
    pub fix_noise_to_truth: bool,
    pub acq_optimizer: AcqOptimizerConfig,
    /// Restarts for the first hyperparameter fit; refits warm-start.
    pub fit_restarts: usize,
    /// Divergence-order grid for the ensemble method.
    pub alphas: Vec<f64>,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            method: Method::Ensemble,
            budget: 100,
            n_initial: 25,
            num_solution_samples: 32,
            num_features: 1024,
            noise_mode: NoiseMode::Noiseless,
            fix_noise_to_truth: false,
            acq_optimizer: AcqOptimizerConfig::default(),
            fit_restarts: 5,
            alphas: crate::acquisition::default_alpha_grid(),
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        if self.n_initial == 0 {
            return Err(Error::Config("n_initial must be >= 1".into()));
        }
        if self.method.needs_samples() && self.num_solution_samples == 0 {
            return Err(Error::Config(
                "information acquisitions need num_solution_samples >= 1".into(),
            ));
        }
        if let NoiseMode::Noisy { variance } = self.noise_mode {
            if !(variance.is_finite() && variance >= 0.0) {
                return Err(Error::Config("noise variance must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// One iteration of a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub query: Vec<f64>,
    pub observation: f64,
    pub recommendation: Vec<f64>,
    /// Noiseless objective value at the recommendation.
    pub recommended_value: f64,
    pub regret: Option<f64>,
    pub wall_clock_secs: f64,
}

/// Full trace of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub objective: String,
    pub seed: u64,
    pub failed: bool,
    pub error: Option<String>,
    pub iterations: Vec<IterationRecord>,
}

impl RunRecord {
    pub fn final_regret(&self) -> Option<f64> {
        self.iterations.last().and_then(|it| it.regret)
    }

    /// Equality of every reproducible field; wall-clock times are excluded.
    pub fn same_trace(&self, other: &RunRecord) -> bool {
        self.method == other.method
            && self.objective == other.objective
            && self.seed == other.seed
            && self.failed == other.failed
            && self.iterations.len() == other.iterations.len()
            && self.iterations.iter().zip(&other.iterations).all(|(a, b)| {
                a.iteration == b.iteration
                    && a.query == b.query
                    && a.observation == b.observation
                    && a.recommendation == b.recommendation
                    && a.recommended_value == b.recommended_value
                    && a.regret == b.regret
            })
    }

    /// One JSON object per iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for it in &self.iterations {
            let line = serde_json::json!({
                "method": self.method,
                "objective": self.objective,
                "seed": self.seed,
                "failed": self.failed,
                "iteration": it.iteration,
                "query": it.query,
                "observation": it.observation,
                "recommendation": it.recommendation,
                "recommended_value": it.recommended_value,
                "regret": it.regret,
                "wall_clock_secs": it.wall_clock_secs,
            });
            writeln!(w, "{line}").map_err(|e| Error::Data(e.to_string()))?;
        }
        Ok(())
    }

    /// Flat CSV rows; vectors are semicolon-joined.
    pub fn csv_rows(&self) -> Vec<RunCsvRow> {
        self.iterations
            .iter()
            .map(|it| RunCsvRow {
                method: self.method.clone(),
                objective: self.objective.clone(),
                seed: self.seed,
                iteration: it.iteration,
                query: join_vec(&it.query),
                observation: it.observation,
                recommendation: join_vec(&it.recommendation),
                recommended_value: it.recommended_value,
                regret: it.regret,
                wall_clock_secs: it.wall_clock_secs,
            })
            .collect()
    }
}

fn join_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Flat CSV projection of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCsvRow {
    pub method: String,
    pub objective: String,
    pub seed: u64,
    pub iteration: usize,
    pub query: String,
    pub observation: f64,
    pub recommendation: String,
    pub recommended_value: f64,
    pub regret: Option<f64>,
    pub wall_clock_secs: f64,
}

/// Recommendation rule: the best observation in the noiseless setting, the
/// observation with the best predictive mean in the noisy setting. The
/// returned point is always one of the observed inputs.
pub fn recommend(model: Option<&GpModel>, data: &Dataset, noisy: bool) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("recommendation needs at least one observation".into()));
    }
    if !noisy {
        let (idx, _) = data
            .outputs()
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &y)| if y > acc.1 { (i, y) } else { acc });
        return Ok(data.inputs()[idx].clone());
    }
    let model = model.ok_or_else(|| {
        Error::InvalidArgument("noisy recommendation needs a fitted model to denoise".into())
    })?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in data.inputs().iter().enumerate() {
        let mean = model.predict(x)?.mean;
        if mean > best.1 {
            best = (i, mean);
        }
    }
    Ok(data.inputs()[best.0].clone())
}

/// Log-scale relative regret
/// `log10(max(f_opt - f(x_rec), eps) / max(|f_opt|, eps))` with `eps = 1e-12`.
pub fn regret(obj: &Objective, x_rec: &[f64]) -> Result<f64> {
    let (_, f_opt) = obj
        .known_max()
        .ok_or_else(|| Error::Config(format!("objective '{}' has no recorded maximum", obj.name())))?;
    let eps = 1e-12;
    let gap = (f_opt - obj.eval(x_rec)).max(eps);
    Ok((gap / f_opt.abs().max(eps)).log10())
}

/// Runs one optimization loop. Model or objective failures abort the loop and
/// return the partial record flagged as failed.
pub fn run(obj: &Objective, cfg: &BoConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let mut record = RunRecord {
        method: cfg.method.label(),
        objective: obj.name().to_string(),
        seed: cfg.seed,
        failed: false,
        error: None,
        iterations: Vec::with_capacity(cfg.budget),
    };
    match run_inner(obj, cfg, &mut record) {
        Ok(()) => Ok(record),
        Err(e) => {
            record.failed = true;
            record.error = Some(e.to_string());
            Ok(record)
        }
    }
}

fn run_inner(obj: &Objective, cfg: &BoConfig, record: &mut RunRecord) -> Result<()> {
    let bounds = obj.bounds().clone();
    let noisy = cfg.noise_mode.is_noisy();
    let mut objective = NoisyObjective::new(obj.clone(), cfg.noise_mode.variance(), seed::mix(cfg.seed, 0x01))?;

    // Initial design: uniform random points.
    let mut data = Dataset::new(bounds.clone());
    {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, 0x02));
        for _ in 0..cfg.n_initial {
            let x = bounds.sample(&mut rng);
            let y = objective.observe(&x)?;
            data.push(x, y)?;
        }
    }

    let fixed_noise = match (cfg.noise_mode, cfg.fix_noise_to_truth) {
        (NoiseMode::Noisy { variance }, true) => Some(variance),
        _ => None,
    };
    let needs_model = cfg.method.needs_samples() || noisy;
    let mut warm: Option<GpModel> = None;

    for t in 1..=cfg.budget {
        let started = Instant::now();
        let iter_seed = seed::mix(cfg.seed, 0x1000 + t as u64);

        // Refit every iteration; warm starts keep later fits cheap.
        let model = if needs_model {
            let fit_cfg = FitConfig {
                restarts: if warm.is_some() { 1 } else { cfg.fit_restarts },
                seed: seed::mix(iter_seed, 0x0f),
                fixed_noise,
                ..FitConfig::default()
            };
            Some(fit_from(&data, &fit_cfg, warm.as_ref().map(|m| m.hyperparams()))?)
        } else {
            None
        };

        let query = match &cfg.method {
            Method::Random => random_acquisition(&bounds, iter_seed),
            method => {
                let model = model.as_ref().expect("information methods fit a model");
                let conditioning_noise = if noisy {
                    model.hyperparams().noise_variance
                } else {
                    NOISELESS_CONDITIONING_FLOOR
                };
                let ctx = AcquisitionContext::from_model(
                    model.clone(),
                    cfg.num_solution_samples,
                    cfg.num_features,
                    seed::mix(iter_seed, 0x05),
                    conditioning_noise,
                )?;
                let acq_seed = seed::mix(iter_seed, 0x06);
                let result = match method {
                    Method::Jes => optimize_acquisition(
                        &|x: &[f64]| jes_value(&ctx, x).unwrap_or(f64::NEG_INFINITY),
                        &bounds,
                        &cfg.acq_optimizer,
                        acq_seed,
                    ),
                    Method::Mes => optimize_acquisition(
                        &|x: &[f64]| mes_value(&ctx, x).unwrap_or(f64::NEG_INFINITY),
                        &bounds,
                        &cfg.acq_optimizer,
                        acq_seed,
                    ),
                    Method::Aes { alpha } => {
                        let alpha = *alpha;
                        optimize_acquisition(
                            &|x: &[f64]| aes_value(&ctx, x, alpha).unwrap_or(f64::NEG_INFINITY),
                            &bounds,
                            &cfg.acq_optimizer,
                            acq_seed,
                        )
                    }
                    Method::Ensemble => ensemble_prepare(&ctx, &cfg.alphas, &cfg.acq_optimizer, acq_seed)
                        .and_then(|spec| {
                            optimize_acquisition(
                                &|x: &[f64]| ensemble_value(&spec, &ctx, x).unwrap_or(f64::NEG_INFINITY),
                                &bounds,
                                &cfg.acq_optimizer,
                                seed::mix(iter_seed, 0x07),
                            )
                        }),
                    Method::Random => unreachable!(),
                };
                match result {
                    Ok((x, _)) => x,
                    Err(_) => random_acquisition(&bounds, seed::mix(iter_seed, 0x08)),
                }
            }
        };

        let observation = objective.observe(&query)?;
        data.push(query.clone(), observation)?;

        // The recommendation reflects the augmented dataset; in the noisy
        // setting the model is refreshed with the new point under the current
        // hyperparameters (the full refit happens next iteration).
        let recommendation = if noisy {
            let hp = match &model {
                Some(m) => m.hyperparams().clone(),
                None => {
                    let fit_cfg = FitConfig {
                        restarts: cfg.fit_restarts,
                        seed: seed::mix(iter_seed, 0x0f),
                        fixed_noise,
                        ..FitConfig::default()
                    };
                    fit_from(&data, &fit_cfg, None)?.hyperparams().clone()
                }
            };
            let updated = GpModel::new(data.clone(), hp)?;
            let rec = recommend(Some(&updated), &data, true)?;
            warm = Some(updated);
            rec
        } else {
            warm = model;
            recommend(None, &data, false)?
        };

        let recommended_value = objective.noiseless(&recommendation);
        let regret_value = if obj.known_max().is_some() {
            Some(regret(obj, &recommendation)?)
        } else {
            None
        };

        record.iterations.push(IterationRecord {
            iteration: t,
            query,
            observation,
            recommendation,
            recommended_value,
            regret: regret_value,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        });
    }
    Ok(())
}
