//! Stepping schemes for the damped discrete Euler-Lagrange equations.
//!
//! Both integrators march the main-node equation
//!
//! `D_last L_d(prev interval) + D_1 L_d(current interval) = mu h J^{-(alpha+beta)} x_k`
//!
//! where the discrete fractional term is the causal convolution over main
//! nodes `x_0..x_k` only. The midpoint variant has one unknown per step;
//! the Galerkin variant solves for the inner nodes and the next main node
//! simultaneously. Optionally a starting-quadrature row is added to the
//! fractional term; its reference to `x_{k+1}` is folded into the step
//! unknowns, and any reference beyond that is resolved by outer sweeps.

use std::sync::Arc;

use crate::cq::{cq_weights, starting_quadrature_with_basis, CqWeights, StartingQuadrature};
use crate::error::{FviError, Result};
use crate::grid::GridSeries;
use crate::linalg::{inf_norm_vec, solve_dense};
use crate::models::{BenchmarkProblem, GalerkinLd, GalerkinScheme, LagrangianModel, MidpointLd};

/// How the per-step Jacobian is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    /// Assemble from the model's second partials; falls back to finite
    /// differences when the model does not provide them.
    Analytic,
    FiniteDifference,
}

/// Newton iteration controls.
#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Absolute tolerance on the residual max-norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub jacobian: JacobianMode,
    /// Line-search halvings allowed per iteration.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 50,
            jacobian: JacobianMode::Analytic,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonDiagnostics {
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton with step halving. `jacobian`, when given, fills a
/// row-major `n x n` matrix at the current iterate; otherwise a central
/// finite-difference Jacobian is built from the residual.
pub fn newton_solve(
    mut residual: impl FnMut(&[f64], &mut [f64]),
    mut jacobian: Option<&mut dyn FnMut(&[f64], &mut [f64])>,
    guess: &[f64],
    config: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonDiagnostics)> {
    let n = guess.len();
    let mut x = guess.to_vec();
    let mut r = vec![0.0; n];
    residual(&x, &mut r);
    let mut rnorm = inf_norm_vec(&r);
    if !rnorm.is_finite() {
        return Err(FviError::Degenerate("non-finite residual at initial guess".into()));
    }
    let mut jac = vec![0.0; n * n];
    for iter in 0..config.max_iterations {
        if rnorm < config.tolerance {
            return Ok((x, NewtonDiagnostics { iterations: iter, residual: rnorm }));
        }
        match jacobian.as_mut() {
            Some(j) => j(&x, &mut jac),
            None => fd_jacobian(&mut residual, &x, &r, &mut jac),
        }
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut work = jac.clone();
        solve_dense(&mut work, &mut delta)?;

        let mut lambda = 1.0;
        let mut accepted = false;
        let mut candidate = vec![0.0; n];
        let mut rc = vec![0.0; n];
        for _ in 0..=config.max_halvings {
            for i in 0..n {
                candidate[i] = x[i] + lambda * delta[i];
            }
            residual(&candidate, &mut rc);
            let cnorm = inf_norm_vec(&rc);
            if cnorm.is_finite() && (cnorm < rnorm || cnorm < config.tolerance) {
                x.copy_from_slice(&candidate);
                r.copy_from_slice(&rc);
                rnorm = cnorm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(FviError::StepFailure {
                step: 0,
                iterations: iter + 1,
                residual: rnorm,
                reason: "line search stalled".into(),
            });
        }
    }
    if rnorm < config.tolerance {
        let iters = config.max_iterations;
        return Ok((x, NewtonDiagnostics { iterations: iters, residual: rnorm }));
    }
    Err(FviError::StepFailure {
        step: 0,
        iterations: config.max_iterations,
        residual: rnorm,
        reason: "maximum Newton iterations exceeded".into(),
    })
}

fn fd_jacobian(
    residual: &mut impl FnMut(&[f64], &mut [f64]),
    x: &[f64],
    _r0: &[f64],
    jac: &mut [f64],
) {
    let n = x.len();
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; n];
    let mut rm = vec![0.0; n];
    for j in 0..n {
        let eps = 1e-7 * x[j].abs().max(1.0);
        xp[j] = x[j] + eps;
        residual(&xp, &mut rp);
        xp[j] = x[j] - eps;
        residual(&xp, &mut rm);
        xp[j] = x[j];
        for i in 0..n {
            jac[i * n + j] = (rp[i] - rm[i]) / (2.0 * eps);
        }
    }
}

/// Which conservative discretization a run uses.
#[derive(Debug, Clone)]
pub enum SchemeKind {
    Midpoint,
    Galerkin(GalerkinScheme),
}

/// Grid selection: either the number of steps or the step size
/// (the other is derived from the horizon).
#[derive(Debug, Clone, Copy)]
pub enum GridSpec {
    Steps(usize),
    StepSize(f64),
}

/// Starting-quadrature correction attached to the fractional term.
#[derive(Debug, Clone)]
pub struct CorrectionSpec {
    /// Exactness exponents; must contain 0. Integer `0..=s` is the plain
    /// choice; data behaving like `t^e` near the origin wants `e` included.
    pub exponents: Vec<f64>,
}

impl CorrectionSpec {
    /// Plain monomial basis `t^0..t^s`.
    pub fn degree(s: usize) -> Self {
        Self { exponents: (0..=s).map(|q| q as f64).collect() }
    }
}

/// A fully specified fractional variational problem on a uniform grid.
#[derive(Clone)]
pub struct FviProblem {
    pub model: Arc<dyn LagrangianModel + Send + Sync>,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub bdf_order: usize,
    pub steps: usize,
    pub step: f64,
    pub x0: Vec<f64>,
    /// Initial momentum `p_0 = dL/dqdot(0, x0, v0)`.
    pub p0: Vec<f64>,
    pub correction: Option<CorrectionSpec>,
    pub newton: NewtonConfig,
}

impl FviProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: Arc<dyn LagrangianModel + Send + Sync>,
        mu: f64,
        alpha: f64,
        beta: f64,
        bdf_order: usize,
        steps: usize,
        step: f64,
        x0: Vec<f64>,
        p0: Vec<f64>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(FviError::InvalidConfiguration(format!(
                "fractional orders must lie in [0, 1], got alpha = {alpha}, beta = {beta}"
            )));
        }
        if alpha + beta > 2.0 {
            return Err(FviError::InvalidConfiguration(
                "combined damping order alpha + beta exceeds 2".into(),
            ));
        }
        if mu < 0.0 {
            return Err(FviError::InvalidConfiguration("damping mu must be nonnegative".into()));
        }
        if steps < 2 {
            return Err(FviError::InvalidConfiguration("need at least two steps".into()));
        }
        if !(step > 0.0) {
            return Err(FviError::InvalidConfiguration(format!("step must be positive, got {step}")));
        }
        if x0.len() != model.dim() || p0.len() != model.dim() {
            return Err(FviError::DimensionMismatch(format!(
                "initial data dimension {} does not match model dimension {}",
                x0.len(),
                model.dim()
            )));
        }
        if !model.is_mass_regular() {
            return Err(FviError::Degenerate("model mass matrix is not regular".into()));
        }
        Ok(Self {
            model,
            mu,
            alpha,
            beta,
            bdf_order,
            steps,
            step,
            x0,
            p0,
            correction: None,
            newton: NewtonConfig::default(),
        })
    }

    /// Builds a problem from a catalog entry. The grid must tile the
    /// benchmark horizon: `N h = T` to within 1e-12 relative.
    pub fn from_benchmark(bench: &BenchmarkProblem, bdf_order: usize, grid: GridSpec) -> Result<Self> {
        let horizon = bench.horizon;
        let (steps, step) = match grid {
            GridSpec::Steps(n) => (n, horizon / n as f64),
            GridSpec::StepSize(h) => {
                let n = (horizon / h).round() as usize;
                if n < 2 || (n as f64 * h - horizon).abs() > 1e-12 * horizon.max(1.0) {
                    return Err(FviError::InvalidConfiguration(format!(
                        "step {h} does not tile the horizon {horizon}"
                    )));
                }
                (n, h)
            }
        };
        let mut p0 = vec![0.0; bench.model.dim()];
        bench.model.d_dqdot(0.0, &bench.x0, &bench.v0, &mut p0);
        Self::new(
            bench.model.clone(),
            bench.mu,
            bench.alpha,
            bench.alpha,
            bdf_order,
            steps,
            step,
            bench.x0.clone(),
            p0,
        )
    }

    pub fn with_correction(mut self, spec: CorrectionSpec) -> Self {
        self.correction = Some(spec);
        self
    }

    pub fn with_newton(mut self, config: NewtonConfig) -> Self {
        self.newton = config;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.step
    }

    /// Order of the damping operator `J^{-(alpha+beta)}`.
    pub fn damping_order(&self) -> f64 {
        -(self.alpha + self.beta)
    }

    fn damping(&self) -> Result<Damping> {
        let order = self.damping_order();
        let weights = cq_weights(order, self.bdf_order, self.step, self.steps)?;
        let correction = match &self.correction {
            Some(spec) => Some(starting_quadrature_with_basis(
                order,
                self.bdf_order,
                self.step,
                self.steps,
                &spec.exponents,
            )?),
            None => None,
        };
        Ok(Damping { weights, correction })
    }
}

/// Result of a run: main nodes, Galerkin inner nodes per interval, and the
/// per-step Newton diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    main: Vec<Vec<f64>>,
    inner: Vec<Vec<f64>>,
    step: f64,
    diagnostics: Vec<StepDiagnostics>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub step_index: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl Trajectory {
    pub fn main_nodes(&self) -> &[Vec<f64>] {
        &self.main
    }

    /// Inner nodes of interval `k` (empty for one-unknown schemes).
    pub fn inner_nodes(&self, k: usize) -> &[f64] {
        &self.inner[k]
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.main.len() - 1
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    /// Scalar series of component `c` on the main grid.
    pub fn component(&self, c: usize) -> Result<GridSeries> {
        GridSeries::new(self.main.iter().map(|x| x[c]).collect(), self.step)
    }
}

struct Damping {
    weights: CqWeights,
    correction: Option<StartingQuadrature>,
}

impl Damping {
    /// `J~ x` at row `k` (without the `mu h` factor). `candidate` supplies
    /// `x_{k+1}` when a correction row reaches it; `fallback` supplies any
    /// deeper forward reference (previous sweep).
    fn operator_value(
        &self,
        k: usize,
        main: &[Vec<f64>],
        candidate: Option<&[f64]>,
        fallback: Option<&[Vec<f64>]>,
        out: &mut [f64],
    ) {
        let d = out.len();
        let w = self.weights.weights();
        for c in 0..d {
            out[c] = (0..=k).map(|n| w[n] * main[k - n][c]).sum();
        }
        if let Some(sq) = &self.correction {
            let scale = self.weights.step().powf(self.weights.alpha());
            let row = sq.row(k);
            for (n, wn) in row.iter().enumerate() {
                let node: &[f64] = if n <= k {
                    &main[n]
                } else if n == k + 1 {
                    match candidate {
                        Some(u) => u,
                        None => continue,
                    }
                } else {
                    match fallback {
                        Some(prev) => &prev[n],
                        None => continue,
                    }
                };
                for c in 0..d {
                    out[c] += scale * wn * node[c];
                }
            }
        }
    }

    /// Coefficient multiplying `x_{k+1}` inside the operator at row `k`.
    fn candidate_coefficient(&self, k: usize) -> f64 {
        match &self.correction {
            Some(sq) if k + 1 < sq.node_count() => {
                self.weights.step().powf(self.weights.alpha()) * sq.row(k)[k + 1]
            }
            _ => 0.0,
        }
    }

    /// Whether rows reference nodes beyond the step unknowns, requiring
    /// outer sweeps over the whole trajectory.
    fn needs_sweeps(&self) -> bool {
        self.correction
            .as_ref()
            .map(|sq| sq.node_count() > 3)
            .unwrap_or(false)
    }
}

/// Midpoint fractional variational integrator.
pub fn fvi_midpoint_run(problem: &FviProblem) -> Result<Trajectory> {
    let damping = problem.damping()?;
    run_with_sweeps(problem, &damping, |prob, damp, fallback| {
        midpoint_pass(prob, damp, fallback)
    })
}

/// Galerkin fractional variational integrator over the given scheme.
pub fn fvi_galerkin_run(problem: &FviProblem, scheme: &GalerkinScheme) -> Result<Trajectory> {
    let damping = problem.damping()?;
    run_with_sweeps(problem, &damping, |prob, damp, fallback| {
        galerkin_pass(prob, scheme, damp, fallback)
    })
}

fn run_with_sweeps(
    problem: &FviProblem,
    damping: &Damping,
    pass: impl Fn(&FviProblem, Option<&Damping>, Option<&[Vec<f64>]>) -> Result<Trajectory>,
) -> Result<Trajectory> {
    if problem.correction.is_none() {
        return pass(problem, Some(damping), None);
    }
    if !damping.needs_sweeps() {
        return pass(problem, Some(damping), None);
    }
    // correction rows reach beyond the step unknowns: iterate whole-run
    // sweeps, feeding the previous trajectory into the forward references
    let mut prev = pass(problem, None, None)?;
    let tol = 10.0 * problem.newton.tolerance;
    for _ in 0..25 {
        let next = pass(problem, Some(damping), Some(&prev.main))?;
        let change = next
            .main
            .iter()
            .zip(&prev.main)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        prev = next;
        if change < tol {
            return Ok(prev);
        }
    }
    Err(FviError::StepFailure {
        step: 0,
        iterations: 25,
        residual: f64::NAN,
        reason: "correction sweeps did not converge".into(),
    })
}

fn midpoint_pass(
    problem: &FviProblem,
    damping: Option<&Damping>,
    fallback: Option<&[Vec<f64>]>,
) -> Result<Trajectory> {
    let model = problem.model.as_ref();
    let d = model.dim();
    let h = problem.step;
    let n = problem.steps;
    let ld = MidpointLd::new(model, h)?;
    let analytic = problem.newton.jacobian == JacobianMode::Analytic
        && model.second_partials().is_some();

    let mut main: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    main.push(problem.x0.clone());
    let mut diagnostics = Vec::with_capacity(n);

    // initialization: p0 + D1 L_d(x0, x1) = 0
    let guess: Vec<f64> = problem
        .x0
        .iter()
        .zip(&problem.p0)
        .map(|(x, p)| x + h * p)
        .collect();
    let x0 = problem.x0.clone();
    let p0 = problem.p0.clone();
    let mut jac_fn = |u: &[f64], jac: &mut [f64]| {
        let _ = u;
        ld.d2_block(1, 2, jac);
    };
    let (x1, diag) = newton_solve(
        |u, r| {
            ld.d1(0.0, &x0, u, r);
            for (ri, pi) in r.iter_mut().zip(&p0) {
                *ri += pi;
            }
        },
        analytic.then_some(&mut jac_fn as &mut dyn FnMut(&[f64], &mut [f64])),
        &guess,
        &problem.newton,
    )
    .map_err(|e| tag_step(e, 0))?;
    diagnostics.push(StepDiagnostics { step_index: 0, iterations: diag.iterations, residual: diag.residual });
    main.push(x1);

    let mut d2_prev = vec![0.0; d];
    for k in 1..n {
        let t_k = k as f64 * h;
        ld.d2(t_k - h, &main[k - 1], &main[k], &mut d2_prev);
        let cand_coef = damping.map(|dm| dm.candidate_coefficient(k)).unwrap_or(0.0);
        let mu_h = problem.mu * h;

        // the fractional term is constant within the solve apart from the
        // correction column that may touch the unknown x_{k+1}
        let mut frac_const = vec![0.0; d];
        if let Some(dm) = damping {
            dm.operator_value(k, &main, None, fallback, &mut frac_const);
        }

        let guess = main[k].clone();
        let x_k = main[k].clone();
        let d2c = d2_prev.clone();
        let mut residual = |u: &[f64], r: &mut [f64]| {
            ld.d1(t_k, &x_k, u, r);
            for i in 0..d {
                r[i] += d2c[i] - mu_h * (frac_const[i] + cand_coef * u[i]);
            }
        };
        let mut jac_fn = |_u: &[f64], jac: &mut [f64]| {
            ld.d2_block(1, 2, jac);
            for i in 0..d {
                jac[i * d + i] -= mu_h * cand_coef;
            }
        };
        let (sol, diag) = newton_solve(
            &mut residual,
            analytic.then_some(&mut jac_fn as &mut dyn FnMut(&[f64], &mut [f64])),
            &guess,
            &problem.newton,
        )
        .map_err(|e| tag_step(e, k))?;
        diagnostics.push(StepDiagnostics {
            step_index: k,
            iterations: diag.iterations,
            residual: diag.residual,
        });
        main.push(sol);
    }

    Ok(Trajectory { main, inner: vec![Vec::new(); n], step: h, diagnostics })
}

fn galerkin_pass(
    problem: &FviProblem,
    scheme: &GalerkinScheme,
    damping: Option<&Damping>,
    fallback: Option<&[Vec<f64>]>,
) -> Result<Trajectory> {
    let model = problem.model.as_ref();
    let d = model.dim();
    let s = scheme.degree();
    let h = problem.step;
    let n = problem.steps;
    let ld = GalerkinLd::new(model, scheme, h)?;
    let analytic = problem.newton.jacobian == JacobianMode::Analytic
        && model.second_partials().is_some();
    let unknowns = s * d;

    let mut main: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    main.push(problem.x0.clone());
    let mut inner: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut diagnostics = Vec::with_capacity(n);

    // nodes buffer: x_k^0 .. x_k^s flattened
    let assemble_nodes = |x0: &[f64], u: &[f64], nodes: &mut [f64]| {
        nodes[..d].copy_from_slice(x0);
        nodes[d..].copy_from_slice(u);
    };

    // analytic Jacobian over the unknown block (x^1..x^s): residual row i
    // differentiates D_{i+1} L_d, unknown column j is node nu = j + 1
    let jac_analytic = |ld: &GalerkinLd, extra_diag: f64, jac: &mut [f64]| {
        let mut block = vec![0.0; d * d];
        for row in 0..s {
            for col in 0..s {
                let filled = ld.d2_block(row, col + 1, &mut block);
                debug_assert!(filled);
                for r in 0..d {
                    for c in 0..d {
                        jac[(row * d + r) * unknowns + col * d + c] = block[r * d + c];
                    }
                }
            }
        }
        // damping candidate column acts on the last unknown block (x^s)
        if extra_diag != 0.0 {
            for r in 0..d {
                jac[r * unknowns + (s - 1) * d + r] += extra_diag;
            }
        }
    };

    // initialization block: p0 + D1 L_d(x_0^*) = 0, D_i L_d = 0 (i = 2..s)
    {
        let mut guess = vec![0.0; unknowns];
        for nu in 1..=s {
            let dnu = scheme.control_points()[nu];
            for c in 0..d {
                guess[(nu - 1) * d + c] = problem.x0[c] + dnu * h * problem.p0[c];
            }
        }
        let x0 = problem.x0.clone();
        let p0 = problem.p0.clone();
        let mut nodes = vec![0.0; (s + 1) * d];
        let mut part = vec![0.0; d];
        let mut residual = |u: &[f64], r: &mut [f64]| {
            assemble_nodes(&x0, u, &mut nodes);
            ld.d_nu(0.0, &nodes, 0, &mut part);
            for c in 0..d {
                r[c] = p0[c] + part[c];
            }
            for i in 1..s {
                ld.d_nu(0.0, &nodes, i, &mut part);
                r[i * d..(i + 1) * d].copy_from_slice(&part);
            }
        };
        let mut jac_fn = |_u: &[f64], jac: &mut [f64]| jac_analytic(&ld, 0.0, jac);
        let (u, diag) = newton_solve(
            &mut residual,
            analytic.then_some(&mut jac_fn as &mut dyn FnMut(&[f64], &mut [f64])),
            &guess,
            &problem.newton,
        )
        .map_err(|e| tag_step(e, 0))?;
        diagnostics.push(StepDiagnostics { step_index: 0, iterations: diag.iterations, residual: diag.residual });
        inner.push(u[..(s - 1).max(0) * d].to_vec());
        main.push(u[(s - 1) * d..].to_vec());
    }

    for k in 1..n {
        let t_k = k as f64 * h;
        // previous interval is fully known
        let mut prev_nodes = vec![0.0; (s + 1) * d];
        prev_nodes[..d].copy_from_slice(&main[k - 1]);
        prev_nodes[d..s * d].copy_from_slice(&inner[k - 1]);
        prev_nodes[s * d..].copy_from_slice(&main[k]);
        let mut d_last = vec![0.0; d];
        ld.d_nu(t_k - h, &prev_nodes, s, &mut d_last);

        let mut frac_const = vec![0.0; d];
        if let Some(dm) = damping {
            dm.operator_value(k, &main, None, fallback, &mut frac_const);
        }
        let cand_coef = damping.map(|dm| dm.candidate_coefficient(k)).unwrap_or(0.0);
        let mu_h = problem.mu * h;

        // guess: previous interval shifted by the last main-node increment
        let mut guess = vec![0.0; unknowns];
        for c in 0..d {
            let shift = main[k][c] - main[k - 1][c];
            for nu in 1..s {
                guess[(nu - 1) * d + c] = inner[k - 1][(nu - 1) * d + c] + shift;
            }
            guess[(s - 1) * d + c] = main[k][c] + shift;
        }

        let xk = main[k].clone();
        let mut nodes = vec![0.0; (s + 1) * d];
        let mut part = vec![0.0; d];
        let d_last_c = d_last.clone();
        let mut residual = |u: &[f64], r: &mut [f64]| {
            assemble_nodes(&xk, u, &mut nodes);
            ld.d_nu(t_k, &nodes, 0, &mut part);
            let next = &u[(s - 1) * d..];
            for c in 0..d {
                r[c] = d_last_c[c] + part[c]
                    - mu_h * (frac_const[c] + cand_coef * next[c]);
            }
            for i in 1..s {
                ld.d_nu(t_k, &nodes, i, &mut part);
                r[i * d..(i + 1) * d].copy_from_slice(&part);
            }
        };
        let mut jac_fn = |_u: &[f64], jac: &mut [f64]| jac_analytic(&ld, -mu_h * cand_coef, jac);
        let (u, diag) = newton_solve(
            &mut residual,
            analytic.then_some(&mut jac_fn as &mut dyn FnMut(&[f64], &mut [f64])),
            &guess,
            &problem.newton,
        )
        .map_err(|e| tag_step(e, k))?;
        diagnostics.push(StepDiagnostics { step_index: k, iterations: diag.iterations, residual: diag.residual });
        inner.push(u[..(s - 1) * d].to_vec());
        main.push(u[(s - 1) * d..].to_vec());
    }

    Ok(Trajectory { main, inner, step: h, diagnostics })
}

fn tag_step(err: FviError, step: usize) -> FviError {
    match err {
        FviError::StepFailure { iterations, residual, reason, .. } => {
            FviError::StepFailure { step, iterations, residual, reason }
        }
        other => other,
    }
}

/// Maximum discrete Euler-Lagrange residual of a finished run, re-evaluated
/// from the stored trajectory (the certification check).
pub fn residual_certificate(
    problem: &FviProblem,
    scheme: &SchemeKind,
    traj: &Trajectory,
) -> Result<f64> {
    let damping = problem.damping()?;
    let model = problem.model.as_ref();
    let d = model.dim();
    let h = problem.step;
    let n = problem.steps;
    let main = traj.main_nodes();
    let mut frac = vec![0.0; d];
    let mut worst = 0.0_f64;
    match scheme {
        SchemeKind::Midpoint => {
            let ld = MidpointLd::new(model, h)?;
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            for k in 1..n {
                let t_k = k as f64 * h;
                ld.d1(t_k, &main[k], &main[k + 1], &mut a);
                ld.d2(t_k - h, &main[k - 1], &main[k], &mut b);
                damping.operator_value(k, main, Some(&main[k + 1]), Some(main), &mut frac);
                for c in 0..d {
                    worst = worst.max((a[c] + b[c] - problem.mu * h * frac[c]).abs());
                }
            }
        }
        SchemeKind::Galerkin(scheme) => {
            let ld = GalerkinLd::new(model, scheme, h)?;
            let s = scheme.degree();
            let mut nodes_prev = vec![0.0; (s + 1) * d];
            let mut nodes_cur = vec![0.0; (s + 1) * d];
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            for k in 1..n {
                let t_k = k as f64 * h;
                fill_nodes(traj, k - 1, d, s, &mut nodes_prev);
                fill_nodes(traj, k, d, s, &mut nodes_cur);
                ld.d_nu(t_k - h, &nodes_prev, s, &mut a);
                ld.d_nu(t_k, &nodes_cur, 0, &mut b);
                damping.operator_value(k, main, Some(&main[k + 1]), Some(main), &mut frac);
                for c in 0..d {
                    worst = worst.max((a[c] + b[c] - problem.mu * h * frac[c]).abs());
                }
                for i in 1..s {
                    ld.d_nu(t_k, &nodes_cur, i, &mut b);
                    worst = worst.max(inf_norm_vec(&b));
                }
            }
        }
    }
    Ok(worst)
}

fn fill_nodes(traj: &Trajectory, k: usize, d: usize, s: usize, nodes: &mut [f64]) {
    nodes[..d].copy_from_slice(&traj.main_nodes()[k]);
    nodes[d..s * d].copy_from_slice(traj.inner_nodes(k));
    nodes[s * d..].copy_from_slice(&traj.main_nodes()[k + 1]);
}

/// Report of the time-reversal identity check.
#[derive(Debug, Clone)]
pub struct ReversalReport {
    pub max_residual: f64,
    pub residuals: Vec<f64>,
}

/// Substitutes `y_k = x_{N-k}` into the advanced-time equation
/// `D1 L_d(y_k, y_{k+1}) + D2 L_d(y_{k-1}, y_k) = mu h J_+ y_k`
/// (right convolution, same weights) and reports the residuals. For a
/// midpoint trajectory of a velocity-even model this is an identity up to
/// the solver tolerance.
pub fn fvi_reversed_check(problem: &FviProblem, traj: &Trajectory) -> Result<ReversalReport> {
    let model = problem.model.as_ref();
    let d = model.dim();
    let h = problem.step;
    let n = problem.steps;
    let ld = MidpointLd::new(model, h)?;
    let weights = cq_weights(problem.damping_order(), problem.bdf_order, h, n)?;
    let w = weights.weights();
    let main = traj.main_nodes();
    let y = |k: usize| -> &Vec<f64> { &main[n - k] };

    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut residuals = Vec::with_capacity(n.saturating_sub(1));
    let mut worst = 0.0_f64;
    for k in 1..n {
        let t_k = k as f64 * h;
        ld.d1(t_k, y(k), y(k + 1), &mut a);
        ld.d2(t_k - h, y(k - 1), y(k), &mut b);
        let mut r_max = 0.0_f64;
        for c in 0..d {
            let frac: f64 = (0..=n - k).map(|m| w[m] * y(k + m)[c]).sum();
            let r = a[c] + b[c] - problem.mu * h * frac;
            r_max = r_max.max(r.abs());
        }
        residuals.push(r_max);
        worst = worst.max(r_max);
    }
    Ok(ReversalReport { max_residual: worst, residuals })
}

/// Baseline non-variational integrators: explicit and implicit Euler on the
/// first-order form, with the fractional term discretized by BDF1
/// convolution quadrature. Assumes an identity mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerVariant {
    Explicit,
    Implicit,
}

pub fn euler_baseline_run(problem: &FviProblem, variant: EulerVariant) -> Result<Trajectory> {
    let model = problem.model.as_ref();
    let d = model.dim();
    let h = problem.step;
    let n = problem.steps;
    let weights = cq_weights(problem.damping_order(), 1, h, n)?;
    let w = weights.weights();

    let mut main: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    main.push(problem.x0.clone());
    let mut v = problem.p0.clone();
    let mut diagnostics = Vec::with_capacity(n);
    let mut force = vec![0.0; d];

    for k in 0..n {
        let t_k = k as f64 * h;
        match variant {
            EulerVariant::Explicit => {
                model.d_dq(t_k, &main[k], &v, &mut force);
                let mut frac = vec![0.0; d];
                for c in 0..d {
                    frac[c] = (0..=k).map(|m| w[m] * main[k - m][c]).sum();
                }
                let x_next: Vec<f64> =
                    main[k].iter().zip(&v).map(|(x, vi)| x + h * vi).collect();
                for c in 0..d {
                    v[c] += h * (force[c] - problem.mu * frac[c]);
                }
                main.push(x_next);
                diagnostics.push(StepDiagnostics { step_index: k, iterations: 0, residual: 0.0 });
            }
            EulerVariant::Implicit => {
                // unknowns: (x_{k+1}, v_{k+1})
                let mut guess = Vec::with_capacity(2 * d);
                guess.extend(main[k].iter().zip(&v).map(|(x, vi)| x + h * vi));
                guess.extend(v.iter().copied());
                let t_next = t_k + h;
                let main_ref = &main;
                let v_old = v.clone();
                let mu = problem.mu;
                let mut residual = |u: &[f64], r: &mut [f64]| {
                    let (x_next, v_next) = u.split_at(d);
                    let mut f = vec![0.0; d];
                    model.d_dq(t_next, x_next, v_next, &mut f);
                    for c in 0..d {
                        let mut frac = w[0] * x_next[c];
                        for m in 1..=k + 1 {
                            frac += w[m] * main_ref[k + 1 - m][c];
                        }
                        r[c] = x_next[c] - main_ref[k][c] - h * v_next[c];
                        r[d + c] = v_next[c] - v_old[c] - h * (f[c] - mu * frac);
                    }
                };
                let (u, diag) = newton_solve(&mut residual, None, &guess, &problem.newton)
                    .map_err(|e| tag_step(e, k))?;
                main.push(u[..d].to_vec());
                v.copy_from_slice(&u[d..]);
                diagnostics.push(StepDiagnostics {
                    step_index: k,
                    iterations: diag.iterations,
                    residual: diag.residual,
                });
            }
        }
    }
    Ok(Trajectory { main, inner: vec![Vec::new(); n], step: h, diagnostics })
}
