use alphaes::oracle::*;
use alphaes::seed;

#[test]
fn probe_oracle_internals() {
    let cfg = LandscapeConfig {
        num_solution_samples: 8,
        num_features: 256,
        ..LandscapeConfig::default()
    };
    let (model, _ctx) = landscape_problem(&cfg, 5).unwrap();
    let grid = linspace(-5.0, 5.0, 60);
    let ocfg = OracleConfig {
        num_solution_samples: 40,
        num_function_draws_per_sample: 6,
        num_features: 256,
        quadrature_points: 65,
        ..OracleConfig::default()
    };
    let oracle = ExactAcquisitionOracle::build(&model, grid.clone(), ocfg, seed::mix(5, 0x0C)).unwrap();
    let g_idx = 0; // x = -5
    let marginal = model.predict(&[grid[g_idx]]).unwrap();
    eprintln!("marginal at x={}: mean={:.4} var={:.4}", grid[g_idx], marginal.mean, marginal.variance);
    for s_idx in 0..5 {
        let (count, widen) = oracle.compatibility_diagnostics(s_idx).unwrap();
        let kde = oracle.conditional_density(s_idx, g_idx).unwrap();
        let km = kde.quadrature_mean(2001);
        let sol = &oracle.solutions()[s_idx];
        eprintln!(
            "s{}: x*={:.3} y*={:.3} compat={} widen={} kde_mean={:.4} bw={:.4}",
            s_idx, sol.x_star[0], sol.y_star, count, widen, km, kde.bandwidth()
        );
    }
}
