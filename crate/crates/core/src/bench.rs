//! Convergence studies, error norms, order regression and energy traces.

use crate::cq::{conv_left, cq_weights};
use crate::error::{FviError, Result};
use crate::fracops::rl_power_sin_series;
use crate::grid::GridSeries;
use crate::integrators::{
    fvi_galerkin_run, fvi_midpoint_run, CorrectionSpec, FviProblem, GridSpec, SchemeKind,
    Trajectory,
};
use crate::models::{energy, BenchmarkProblem, LagrangianModel};

/// Maximum norm of the pointwise error over all main nodes.
pub fn global_error(traj: &Trajectory, exact: impl Fn(f64) -> Vec<f64>) -> f64 {
    let h = traj.step();
    traj.main_nodes()
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let e = exact(k as f64 * h);
            x.iter()
                .zip(&e)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// A convergence study: one benchmark, one scheme, one BDF order, run over
/// a decreasing list of step sizes.
#[derive(Clone)]
pub struct ConvergenceStudy {
    pub benchmark: BenchmarkProblem,
    pub scheme: SchemeKind,
    pub bdf_order: usize,
    pub step_sizes: Vec<f64>,
    pub correction: Option<CorrectionSpec>,
    /// Fit only the last `tail` points when set (pre-asymptotic grids can
    /// pollute saturation fits); default fits every point.
    pub tail: Option<usize>,
}

impl ConvergenceStudy {
    pub fn new(
        benchmark: BenchmarkProblem,
        scheme: SchemeKind,
        bdf_order: usize,
        step_sizes: Vec<f64>,
    ) -> Result<Self> {
        if step_sizes.len() < 4 {
            return Err(FviError::InvalidConfiguration(
                "a convergence study needs at least 4 step sizes".into(),
            ));
        }
        if step_sizes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(FviError::InvalidConfiguration(
                "step sizes must be strictly decreasing".into(),
            ));
        }
        Ok(Self { benchmark, scheme, bdf_order, step_sizes, correction: None, tail: None })
    }

    /// The paper-style dyadic grids `h = T / 2^i` for `i` in the range.
    pub fn dyadic(
        benchmark: BenchmarkProblem,
        scheme: SchemeKind,
        bdf_order: usize,
        exponents: std::ops::RangeInclusive<u32>,
    ) -> Result<Self> {
        let t = benchmark.horizon;
        let steps: Vec<f64> = exponents.map(|i| t / (1u64 << i) as f64).collect();
        Self::new(benchmark, scheme, bdf_order, steps)
    }
}

/// Fitted convergence order with per-pair slopes and fit quality.
#[derive(Debug, Clone)]
pub struct OrderReport {
    pub slope: f64,
    pub pair_slopes: Vec<f64>,
    pub r_squared: f64,
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Least-squares slope of `log error` against `log h`, optionally over the
/// last `tail` points only. Pair slopes always cover the full list.
pub fn fit_loglog(step_sizes: &[f64], errors: &[f64], tail: Option<usize>) -> Result<OrderReport> {
    if step_sizes.len() != errors.len() || step_sizes.len() < 2 {
        return Err(FviError::InvalidConfiguration(
            "order fit needs matching lists of at least two points".into(),
        ));
    }
    if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(FviError::Degenerate(
            "order fit requires finite positive errors".into(),
        ));
    }
    let start = tail.map(|t| step_sizes.len().saturating_sub(t)).unwrap_or(0);
    let lh: Vec<f64> = step_sizes[start..].iter().map(|h| h.ln()).collect();
    let le: Vec<f64> = errors[start..].iter().map(|e| e.ln()).collect();
    let n = lh.len() as f64;
    let mh = lh.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let sxy: f64 = lh.iter().zip(&le).map(|(x, y)| (x - mh) * (y - me)).sum();
    let sxx: f64 = lh.iter().map(|x| (x - mh) * (x - mh)).sum();
    let slope = sxy / sxx;
    let syy: f64 = le.iter().map(|y| (y - me) * (y - me)).sum();
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    let pair_slopes = errors
        .windows(2)
        .zip(step_sizes.windows(2))
        .map(|(e, s)| (e[0] / e[1]).ln() / (s[0] / s[1]).ln())
        .collect();
    Ok(OrderReport {
        slope,
        pair_slopes,
        r_squared,
        step_sizes: step_sizes.to_vec(),
        errors: errors.to_vec(),
    })
}

/// Runs the integrator at every step size and fits the global-error slope.
pub fn run_convergence(study: &ConvergenceStudy) -> Result<OrderReport> {
    let exact = study.benchmark.exact.ok_or_else(|| {
        FviError::InvalidConfiguration(format!(
            "benchmark '{}' has no exact solution",
            study.benchmark.id
        ))
    })?;
    let mut errors = Vec::with_capacity(study.step_sizes.len());
    for &h in &study.step_sizes {
        let mut problem =
            FviProblem::from_benchmark(&study.benchmark, study.bdf_order, GridSpec::StepSize(h))?;
        if let Some(corr) = &study.correction {
            problem = problem.with_correction(corr.clone());
        }
        let traj = match &study.scheme {
            SchemeKind::Midpoint => fvi_midpoint_run(&problem),
            SchemeKind::Galerkin(scheme) => fvi_galerkin_run(&problem, scheme),
        }
        .map_err(|e| match e {
            FviError::StepFailure { step, iterations, residual, reason } => {
                FviError::StepFailure {
                    step,
                    iterations,
                    residual,
                    reason: format!("{reason} (at h = {h})"),
                }
            }
            other => other,
        })?;
        errors.push(global_error(&traj, |t| vec![exact(t)]));
    }
    fit_loglog(&study.step_sizes, &errors, study.tail)
}

/// Fraction of the horizon excluded near `t = 0` when measuring operator
/// errors in saturation studies. The first grid rows of a plain convolution
/// quadrature carry an `O(h^{beta+alpha-1})` startup error that would
/// otherwise mask the `min(beta, p)` law being measured.
pub const SATURATION_WINDOW_START: f64 = 0.25;

/// Empirical convergence order of the left convolution applied to
/// `f(t) = t^{beta-1} sin t` on `[0, 1]`, measured on `t >=`
/// [`SATURATION_WINDOW_START`] against the Gamma-series oracle over the
/// dyadic grids `h = 2^{-3}..2^{-10}`. The fitted slope saturates at
/// `min(beta, p)`.
pub fn cq_saturation_study(beta: f64, bdf_order: usize, alpha: f64) -> Result<OrderReport> {
    let mut step_sizes = Vec::new();
    let mut errors = Vec::new();
    for i in 3..=10 {
        let n = 1usize << i;
        let h = 1.0 / n as f64;
        // f(0) = 0 for every beta > 0 since sin t ~ t wins near the origin
        let f = GridSeries::sample(n, h, |t| {
            if t == 0.0 {
                0.0
            } else {
                t.powf(beta - 1.0) * t.sin()
            }
        })?;
        let w = cq_weights(alpha, bdf_order, h, n)?;
        let g = conv_left(&w, &f)?;
        let mut err = 0.0_f64;
        for k in 0..=n {
            let t = g.time(k);
            if t < SATURATION_WINDOW_START {
                continue;
            }
            let exact = rl_power_sin_series(alpha, beta, t);
            err = err.max((g.values()[k] - exact).abs());
        }
        step_sizes.push(h);
        errors.push(err);
    }
    fit_loglog(&step_sizes, &errors, None)
}

/// Staggered discrete energy along a trajectory: one value per interval,
/// evaluated at the interval midpoint with the difference-quotient velocity
/// `(x_{k+1} - x_k)/h`. For the midpoint scheme on the undamped oscillator
/// this quantity is conserved exactly.
pub fn energy_trace(traj: &Trajectory, model: &dyn LagrangianModel) -> Result<GridSeries> {
    let h = traj.step();
    let d = model.dim();
    let x = traj.main_nodes();
    let mut q = vec![0.0; d];
    let mut v = vec![0.0; d];
    let values: Vec<f64> = (0..traj.steps())
        .map(|k| {
            for c in 0..d {
                q[c] = 0.5 * (x[k][c] + x[k + 1][c]);
                v[c] = (x[k + 1][c] - x[k][c]) / h;
            }
            energy(model, (k as f64 + 0.5) * h, &q, &v)
        })
        .collect();
    GridSeries::with_start(values, h, 0.5 * h)
}

/// Means of `trace` over consecutive windows of `window` samples
/// (incomplete trailing windows are dropped).
pub fn windowed_means(trace: &GridSeries, window: usize) -> Vec<f64> {
    trace
        .values()
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect()
}
