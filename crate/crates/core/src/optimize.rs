//! Box-constrained quasi-Newton maximization.
//!
//! A dense BFGS with gradient projection and backtracking line search, sized
//! for the low-dimensional problems in this crate (inputs up to ~12 dims,
//! hyperparameter vectors up to ~15). Callers supply an analytic gradient or
//! fall back to central finite differences.

/// Iteration and tolerance controls for [`maximize_bounded`].
#[derive(Debug, Clone)]
pub struct OptimizeControl {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub grad_tol: f64,
    /// Relative objective-change threshold.
    pub f_tol: f64,
}

impl Default for OptimizeControl {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            f_tol: 1e-10,
        }
    }
}

impl OptimizeControl {
    pub fn with_max_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }
}

/// Central-difference gradient of `f`, with one-sided steps where the box
/// truncates a stencil arm.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        let hi = (x[i] + h).min(upper[i]);
        let lo = (x[i] - h).max(lower[i]);
        if hi <= lo {
            g[i] = 0.0;
            continue;
        }
        probe[i] = hi;
        let fp = f(&probe);
        probe[i] = lo;
        let fm = f(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (hi - lo);
    }
    g
}

/// Maximizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// Returns the best point visited and its value; the start point is always a
/// candidate, so the result never regresses below `f(x0)`.
pub fn maximize_bounded<F, G>(
    f: &F,
    grad: Option<&G>,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    ctrl: &OptimizeControl,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x: Vec<f64> = x0
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect();

    let eval_grad = |x: &[f64]| -> Vec<f64> {
        match grad {
            Some(g) => g(x),
            None => numeric_gradient(f, x, lower, upper),
        }
    };

    let mut fx = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut g = eval_grad(&x);

    // Inverse Hessian approximation of the negated objective, row-major.
    let mut h_inv = identity(n);

    for _ in 0..ctrl.max_iters {
        let pg = projected_gradient(&x, &g, lower, upper);
        if inf_norm(&pg) < ctrl.grad_tol {
            break;
        }

        // Ascent direction d = H * g, with components frozen at active bounds.
        let mut d = mat_vec(&h_inv, &g, n);
        for i in 0..n {
            if pg[i] == 0.0 {
                d[i] = 0.0;
            }
        }
        // Fall back to steepest ascent when curvature information is unusable.
        if dot(&d, &g) <= 0.0 || !d.iter().all(|v| v.is_finite()) {
            h_inv = identity(n);
            d = pg.clone();
        }

        // Backtracking line search with an Armijo condition on the actual
        // (clamped) displacement.
        let mut t = 1.0;
        let mut x_new = x.clone();
        let mut f_new = f64::NEG_INFINITY;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = (x[i] + t * d[i]).clamp(lower[i], upper[i]);
            }
            let step_gain: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
            if step_gain <= 0.0 {
                t *= 0.5;
                continue;
            }
            f_new = f(&x_new);
            if f_new.is_finite() && f_new >= fx + 1e-4 * step_gain {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }

        let g_new = eval_grad(&x_new);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        // Minimization convention for the curvature pair: y = (-g_new) - (-g).
        let y: Vec<f64> = (0..n).map(|i| g[i] - g_new[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y).max(1e-300) {
            bfgs_update(&mut h_inv, &s, &y, sy, n);
        }

        let f_change = (f_new - fx).abs();
        x = x_new.clone();
        fx = f_new;
        g = g_new;
        if f_change <= ctrl.f_tol * (1.0 + fx.abs()) {
            break;
        }
    }

    (x, fx)
}

/// Ascent direction components that respect the active set: zero where the
/// gradient pushes outside the box at an active bound.
fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let eps = 1e-12;
    (0..x.len())
        .map(|i| {
            let span = (upper[i] - lower[i]).max(1.0);
            if (x[i] - lower[i]) <= eps * span && g[i] < 0.0 {
                0.0
            } else if (upper[i] - x[i]) <= eps * span && g[i] > 0.0 {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j]
                - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type NoGrad = fn(&[f64]) -> Vec<f64>;

    #[test]
    fn finds_interior_quadratic_maximum() {
        let c = [0.3, -0.6, 0.1];
        let f = |x: &[f64]| -x.iter().zip(&c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum::<f64>();
        let lower = [-1.0; 3];
        let upper = [1.0; 3];
        let (x, v) = maximize_bounded::<_, NoGrad>(&f, None, &[0.9, 0.9, -0.9], &lower, &upper, &OptimizeControl::default());
        for (xi, ci) in x.iter().zip(&c) {
            assert_abs_diff_eq!(xi, ci, epsilon = 1e-4);
        }
        assert!(v > -1e-8);
    }

    #[test]
    fn linear_objective_ends_on_the_boundary() {
        let f = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1];
        let (x, _) = maximize_bounded::<_, NoGrad>(&f, None, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &OptimizeControl::default());
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn analytic_gradient_path_matches_numeric() {
        let f = |x: &[f64]| -(x[0] * x[0] + 2.0 * x[1] * x[1]) + x[0];
        let g = |x: &[f64]| vec![-2.0 * x[0] + 1.0, -4.0 * x[1]];
        let lower = [-2.0, -2.0];
        let upper = [2.0, 2.0];
        let (xa, _) = maximize_bounded(&f, Some(&g), &[1.5, 1.5], &lower, &upper, &OptimizeControl::default());
        let (xn, _) = maximize_bounded::<_, NoGrad>(&f, None, &[1.5, 1.5], &lower, &upper, &OptimizeControl::default());
        assert_abs_diff_eq!(xa[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(xa[1], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(xn[0], 0.5, epsilon = 1e-4);
    }

    #[test]
    fn never_regresses_below_start_value() {
        // A hostile non-smooth objective; the optimizer may stall but must
        // return at least the start point's value.
        let f = |x: &[f64]| if x[0] > 0.35 { -1e6 } else { x[0] };
        let (_, v) = maximize_bounded::<_, NoGrad>(&f, None, &[0.3], &[0.0], &[1.0], &OptimizeControl::default());
        assert!(v >= 0.3);
    }
}
