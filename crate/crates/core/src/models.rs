//! Mechanical models and the two conservative discretizations.
//!
//! A [`LagrangianModel`] supplies `L(t, q, qdot)` with analytic first
//! partials (and optionally constant second partials, which make the step
//! systems of the built-in quadratic models linear). The two discrete
//! Lagrangians are the midpoint two-point rule and the Galerkin rule built
//! from polynomial control points plus a quadrature rule on the unit
//! interval.

use std::sync::Arc;

use crate::error::{FviError, Result};
use crate::fracops::gamma;

/// Mechanical model `L(t, q, qdot)` on `R^d`.
pub trait LagrangianModel {
    fn dim(&self) -> usize;

    fn lagrangian(&self, t: f64, q: &[f64], qdot: &[f64]) -> f64;

    /// `dL/dq` written into `out`.
    fn d_dq(&self, t: f64, q: &[f64], qdot: &[f64], out: &mut [f64]);

    /// `dL/dqdot` written into `out`.
    fn d_dqdot(&self, t: f64, q: &[f64], qdot: &[f64], out: &mut [f64]);

    /// Constant second partials for quadratic models; `None` switches the
    /// integrators to finite-difference Jacobians.
    fn second_partials(&self) -> Option<SecondPartials> {
        None
    }

    /// External forcing `f(t)` when the model is of the driven form
    /// `L = |qdot|^2/2 - |q|^2/2 + q . f(t)`.
    fn forcing(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// Whether `d2L/dqdot2` is invertible (needed by the stepping schemes).
    fn is_mass_regular(&self) -> bool {
        true
    }
}

/// Row-major `d x d` second partials of `L`.
#[derive(Debug, Clone)]
pub struct SecondPartials {
    pub d2_dq_dq: Vec<f64>,
    pub d2_dq_dqdot: Vec<f64>,
    pub d2_dqdot_dqdot: Vec<f64>,
}

/// Legendre energy `E = qdot . dL/dqdot - L`.
pub fn energy(model: &dyn LagrangianModel, t: f64, q: &[f64], qdot: &[f64]) -> f64 {
    let mut p = vec![0.0; model.dim()];
    model.d_dqdot(t, q, qdot, &mut p);
    let kinetic: f64 = p.iter().zip(qdot).map(|(a, b)| a * b).sum();
    kinetic - model.lagrangian(t, q, qdot)
}

/// `L = |qdot|^2/2 - |q|^2/2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicOscillator {
    dim: usize,
}

impl HarmonicOscillator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LagrangianModel for HarmonicOscillator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lagrangian(&self, _t: f64, q: &[f64], qdot: &[f64]) -> f64 {
        let v2: f64 = qdot.iter().map(|v| v * v).sum();
        let q2: f64 = q.iter().map(|x| x * x).sum();
        0.5 * (v2 - q2)
    }

    fn d_dq(&self, _t: f64, q: &[f64], _qdot: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(q) {
            *o = -x;
        }
    }

    fn d_dqdot(&self, _t: f64, _q: &[f64], qdot: &[f64], out: &mut [f64]) {
        out.copy_from_slice(qdot);
    }

    fn second_partials(&self) -> Option<SecondPartials> {
        Some(quadratic_partials(self.dim))
    }
}

/// `L = qdot^2/2 - q^2/2 + q f(t)` in one dimension.
#[derive(Debug, Clone, Copy)]
pub struct ForcedOscillator {
    forcing: fn(f64) -> f64,
}

impl ForcedOscillator {
    pub fn new(forcing: fn(f64) -> f64) -> Self {
        Self { forcing }
    }
}

impl LagrangianModel for ForcedOscillator {
    fn dim(&self) -> usize {
        1
    }

    fn lagrangian(&self, t: f64, q: &[f64], qdot: &[f64]) -> f64 {
        0.5 * (qdot[0] * qdot[0] - q[0] * q[0]) + q[0] * (self.forcing)(t)
    }

    fn d_dq(&self, t: f64, q: &[f64], _qdot: &[f64], out: &mut [f64]) {
        out[0] = -q[0] + (self.forcing)(t);
    }

    fn d_dqdot(&self, _t: f64, _q: &[f64], qdot: &[f64], out: &mut [f64]) {
        out[0] = qdot[0];
    }

    fn second_partials(&self) -> Option<SecondPartials> {
        Some(quadratic_partials(1))
    }

    fn forcing(&self, t: f64) -> Option<Vec<f64>> {
        Some(vec![(self.forcing)(t)])
    }
}

fn quadratic_partials(dim: usize) -> SecondPartials {
    let mut d2_dq_dq = vec![0.0; dim * dim];
    let mut d2_dqdot_dqdot = vec![0.0; dim * dim];
    for i in 0..dim {
        d2_dq_dq[i * dim + i] = -1.0;
        d2_dqdot_dqdot[i * dim + i] = 1.0;
    }
    SecondPartials {
        d2_dq_dq,
        d2_dq_dqdot: vec![0.0; dim * dim],
        d2_dqdot_dqdot,
    }
}

/// A benchmark bundles a model with its damping order, damping strength,
/// horizon, initial data and (when available) exact solution.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub id: &'static str,
    pub model: Arc<dyn LagrangianModel + Send + Sync>,
    /// Fractional order of each half of the damping pair; the damping
    /// operator has order `alpha + beta = 2 * alpha`.
    pub alpha: f64,
    pub mu: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub exact: Option<fn(f64) -> f64>,
}

fn torvik_quarter_forcing(t: f64) -> f64 {
    // drives x(t) = t^3 at damping order 1/2
    t * t * t + 6.0 * t + (3.2 / gamma(0.5)) * t * t * t.sqrt()
}

fn torvik_three_quarter_forcing(t: f64) -> f64 {
    // drives x(t) = t^{5/2} at damping order 3/2
    3.75 * t.sqrt() + 1.875 * std::f64::consts::PI.sqrt() * t + t * t * t.sqrt()
}

fn damped_oscillator_exact(t: f64) -> f64 {
    // underdamped closed form of x'' + 0.2 x' + x = 0, x(0)=0, x'(0)=1.2
    let omega = 0.99_f64.sqrt();
    (1.2 / omega) * (-0.1 * t).exp() * (omega * t).sin()
}

fn cubic_exact(t: f64) -> f64 {
    t * t * t
}

fn five_half_exact(t: f64) -> f64 {
    t * t * t.sqrt()
}

/// The built-in benchmark catalog.
pub fn builtin_models() -> Vec<BenchmarkProblem> {
    vec![
        BenchmarkProblem {
            id: "damped-osc",
            model: Arc::new(HarmonicOscillator::new(1)),
            alpha: 0.5,
            mu: 0.2,
            horizon: 16.0,
            x0: vec![0.0],
            v0: vec![1.2],
            exact: Some(damped_oscillator_exact),
        },
        BenchmarkProblem {
            id: "torvik-14",
            model: Arc::new(ForcedOscillator::new(torvik_quarter_forcing)),
            alpha: 0.25,
            mu: 1.0,
            horizon: 1.0,
            x0: vec![0.0],
            v0: vec![0.0],
            exact: Some(cubic_exact),
        },
        BenchmarkProblem {
            id: "torvik-34",
            model: Arc::new(ForcedOscillator::new(torvik_three_quarter_forcing)),
            alpha: 0.75,
            mu: 1.0,
            horizon: 1.0,
            x0: vec![0.0],
            v0: vec![0.0],
            exact: Some(five_half_exact),
        },
    ]
}

pub fn model_by_id(id: &str) -> Result<BenchmarkProblem> {
    builtin_models()
        .into_iter()
        .find(|m| m.id == id)
        .ok_or_else(|| FviError::UnknownModel(id.to_string()))
}

/// Polynomial degree, control points and quadrature rule of a Galerkin
/// discrete Lagrangian, with the Lagrange basis tabulated at the
/// quadrature nodes (unit-interval parametrization).
#[derive(Debug, Clone)]
pub struct GalerkinScheme {
    control_points: Vec<f64>,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    basis: Vec<Vec<f64>>,       // [i][nu] = l_nu(c_i)
    basis_deriv: Vec<Vec<f64>>, // [i][nu] = l'_nu(c_i)
}

impl GalerkinScheme {
    pub fn new(
        control_points: Vec<f64>,
        quad_nodes: Vec<f64>,
        quad_weights: Vec<f64>,
    ) -> Result<Self> {
        if control_points.len() < 2 {
            return Err(FviError::InvalidConfiguration(
                "need at least two control points".into(),
            ));
        }
        if control_points[0] != 0.0 || *control_points.last().unwrap() != 1.0 {
            return Err(FviError::InvalidConfiguration(
                "control points must start at 0 and end at 1".into(),
            ));
        }
        if control_points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FviError::InvalidConfiguration(
                "control points must be strictly increasing".into(),
            ));
        }
        if quad_nodes.len() != quad_weights.len() || quad_nodes.is_empty() {
            return Err(FviError::InvalidConfiguration(
                "quadrature nodes and weights must match and be nonempty".into(),
            ));
        }
        let bsum: f64 = quad_weights.iter().sum();
        if (bsum - 1.0).abs() > 1e-12 {
            return Err(FviError::InvalidConfiguration(format!(
                "quadrature weights must sum to 1 on the unit interval, got {bsum}"
            )));
        }
        let basis = quad_nodes
            .iter()
            .map(|&c| {
                (0..control_points.len())
                    .map(|nu| lagrange_value(&control_points, nu, c))
                    .collect()
            })
            .collect();
        let basis_deriv = quad_nodes
            .iter()
            .map(|&c| {
                (0..control_points.len())
                    .map(|nu| lagrange_derivative(&control_points, nu, c))
                    .collect()
            })
            .collect();
        Ok(Self { control_points, quad_nodes, quad_weights, basis, basis_deriv })
    }

    /// Degree-2 polynomial on equispaced control points with two-point
    /// Gauss quadrature; the order-4 member of the family.
    pub fn order4_gauss2() -> Self {
        let c = 3.0_f64.sqrt() / 6.0;
        Self::new(
            vec![0.0, 0.5, 1.0],
            vec![0.5 - c, 0.5 + c],
            vec![0.5, 0.5],
        )
        .expect("static scheme data is valid")
    }

    /// Degree-1 polynomial with midpoint quadrature; algebraically identical
    /// to the midpoint two-point discrete Lagrangian.
    pub fn midpoint_s1() -> Self {
        Self::new(vec![0.0, 1.0], vec![0.5], vec![1.0]).expect("static scheme data is valid")
    }

    /// Polynomial degree `s`.
    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn control_points(&self) -> &[f64] {
        &self.control_points
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn basis_at_nodes(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn basis_deriv_at_nodes(&self) -> &[Vec<f64>] {
        &self.basis_deriv
    }

    /// `l_nu(tau)` on the unit interval.
    pub fn basis_value(&self, nu: usize, tau: f64) -> f64 {
        lagrange_value(&self.control_points, nu, tau)
    }

    /// `l'_nu(tau)` on the unit interval.
    pub fn basis_derivative(&self, nu: usize, tau: f64) -> f64 {
        lagrange_derivative(&self.control_points, nu, tau)
    }
}

fn lagrange_value(nodes: &[f64], nu: usize, tau: f64) -> f64 {
    let mut acc = 1.0;
    for (j, &dj) in nodes.iter().enumerate() {
        if j != nu {
            acc *= (tau - dj) / (nodes[nu] - dj);
        }
    }
    acc
}

fn lagrange_derivative(nodes: &[f64], nu: usize, tau: f64) -> f64 {
    let mut acc = 0.0;
    for (m, &dm) in nodes.iter().enumerate() {
        if m == nu {
            continue;
        }
        let mut term = 1.0 / (nodes[nu] - dm);
        for (j, &dj) in nodes.iter().enumerate() {
            if j != nu && j != m {
                term *= (tau - dj) / (nodes[nu] - dj);
            }
        }
        acc += term;
    }
    acc
}

/// Midpoint two-point discrete Lagrangian
/// `L_d(q_a, q_b) = h L(t + h/2, (q_a + q_b)/2, (q_b - q_a)/h)`.
pub struct MidpointLd<'a> {
    model: &'a dyn LagrangianModel,
    step: f64,
}

impl<'a> MidpointLd<'a> {
    pub fn new(model: &'a dyn LagrangianModel, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(FviError::InvalidConfiguration(format!(
                "step must be positive, got {step}"
            )));
        }
        Ok(Self { model, step })
    }

    fn midpoint(&self, q_a: &[f64], q_b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let q: Vec<f64> = q_a.iter().zip(q_b).map(|(a, b)| 0.5 * (a + b)).collect();
        let v: Vec<f64> = q_a
            .iter()
            .zip(q_b)
            .map(|(a, b)| (b - a) / self.step)
            .collect();
        (q, v)
    }

    pub fn value(&self, t: f64, q_a: &[f64], q_b: &[f64]) -> f64 {
        let (q, v) = self.midpoint(q_a, q_b);
        self.step * self.model.lagrangian(t + 0.5 * self.step, &q, &v)
    }

    /// `D1 L_d = h (dL/dq / 2 - dL/dqdot / h)` at the midpoint.
    pub fn d1(&self, t: f64, q_a: &[f64], q_b: &[f64], out: &mut [f64]) {
        self.slot(t, q_a, q_b, -1.0, out);
    }

    /// `D2 L_d = h (dL/dq / 2 + dL/dqdot / h)` at the midpoint.
    pub fn d2(&self, t: f64, q_a: &[f64], q_b: &[f64], out: &mut [f64]) {
        self.slot(t, q_a, q_b, 1.0, out);
    }

    fn slot(&self, t: f64, q_a: &[f64], q_b: &[f64], sign: f64, out: &mut [f64]) {
        let d = self.model.dim();
        let (q, v) = self.midpoint(q_a, q_b);
        let tm = t + 0.5 * self.step;
        let mut lq = vec![0.0; d];
        let mut lv = vec![0.0; d];
        self.model.d_dq(tm, &q, &v, &mut lq);
        self.model.d_dqdot(tm, &q, &v, &mut lv);
        for i in 0..d {
            out[i] = self.step * (0.5 * lq[i] + sign * lv[i] / self.step);
        }
    }

    /// Jacobian block `d(D_slot L_d)/d(q_arg)` for quadratic models,
    /// row-major `d x d`. `slot`/`arg` follow the two-argument layout
    /// (1-based, matching `d1`/`d2`).
    pub fn d2_block(&self, slot: usize, arg: usize, out: &mut [f64]) -> bool {
        let Some(sp) = self.model.second_partials() else {
            return false;
        };
        let d = self.model.dim();
        let h = self.step;
        let sa = if slot == 1 { -1.0 } else { 1.0 };
        let sb = if arg == 1 { -1.0 } else { 1.0 };
        for i in 0..d {
            for j in 0..d {
                let qq = sp.d2_dq_dq[i * d + j];
                let qv = sp.d2_dq_dqdot[i * d + j];
                let vq = sp.d2_dq_dqdot[j * d + i];
                let vv = sp.d2_dqdot_dqdot[i * d + j];
                out[i * d + j] = h
                    * (0.25 * qq + sb * 0.5 * qv / h + sa * 0.5 * vq / h
                        + sa * sb * vv / (h * h));
            }
        }
        true
    }
}

/// Galerkin discrete Lagrangian over `s + 1` control nodes:
/// `L_d(x^0..x^s) = h sum_i b_i L(t + c_i h, q_d(c_i), q_d'(c_i))`.
pub struct GalerkinLd<'a> {
    model: &'a dyn LagrangianModel,
    scheme: &'a GalerkinScheme,
    step: f64,
}

impl<'a> GalerkinLd<'a> {
    pub fn new(
        model: &'a dyn LagrangianModel,
        scheme: &'a GalerkinScheme,
        step: f64,
    ) -> Result<Self> {
        if !(step > 0.0) {
            return Err(FviError::InvalidConfiguration(format!(
                "step must be positive, got {step}"
            )));
        }
        Ok(Self { model, scheme, step })
    }

    pub fn node_count(&self) -> usize {
        self.scheme.degree() + 1
    }

    fn interpolate(&self, nodes: &[f64], i: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.model.dim();
        let basis = &self.scheme.basis_at_nodes()[i];
        let deriv = &self.scheme.basis_deriv_at_nodes()[i];
        let mut q = vec![0.0; d];
        let mut v = vec![0.0; d];
        for nu in 0..self.node_count() {
            for c in 0..d {
                q[c] += nodes[nu * d + c] * basis[nu];
                v[c] += nodes[nu * d + c] * deriv[nu] / self.step;
            }
        }
        (q, v)
    }

    /// `nodes` is the flattened `(s+1) x d` block `x^0..x^s`.
    pub fn value(&self, t: f64, nodes: &[f64]) -> f64 {
        debug_assert_eq!(nodes.len(), self.node_count() * self.model.dim());
        let mut acc = 0.0;
        for (i, (&c, &b)) in self
            .scheme
            .quad_nodes()
            .iter()
            .zip(self.scheme.quad_weights())
            .enumerate()
        {
            let (q, v) = self.interpolate(nodes, i);
            acc += b * self.model.lagrangian(t + c * self.step, &q, &v);
        }
        self.step * acc
    }

    /// `D_{nu+1} L_d = h sum_i b_i (dL/dq l_nu(c_i) + dL/dqdot l'_nu(c_i)/h)`.
    pub fn d_nu(&self, t: f64, nodes: &[f64], nu: usize, out: &mut [f64]) {
        let d = self.model.dim();
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut lq = vec![0.0; d];
        let mut lv = vec![0.0; d];
        for (i, (&c, &b)) in self
            .scheme
            .quad_nodes()
            .iter()
            .zip(self.scheme.quad_weights())
            .enumerate()
        {
            let (q, v) = self.interpolate(nodes, i);
            let ti = t + c * self.step;
            self.model.d_dq(ti, &q, &v, &mut lq);
            self.model.d_dqdot(ti, &q, &v, &mut lv);
            let basis = self.scheme.basis_at_nodes()[i][nu];
            let deriv = self.scheme.basis_deriv_at_nodes()[i][nu];
            for cdim in 0..d {
                out[cdim] += self.step
                    * b
                    * (lq[cdim] * basis + lv[cdim] * deriv / self.step);
            }
        }
    }

    /// Jacobian block `d(D_{nu+1} L_d)/d(x^mu)` for quadratic models.
    pub fn d2_block(&self, nu: usize, mu: usize, out: &mut [f64]) -> bool {
        let Some(sp) = self.model.second_partials() else {
            return false;
        };
        let d = self.model.dim();
        let h = self.step;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &b) in self.scheme.quad_weights().iter().enumerate() {
            let lnu = self.scheme.basis_at_nodes()[i][nu];
            let dnu = self.scheme.basis_deriv_at_nodes()[i][nu];
            let lmu = self.scheme.basis_at_nodes()[i][mu];
            let dmu = self.scheme.basis_deriv_at_nodes()[i][mu];
            for r in 0..d {
                for cdim in 0..d {
                    let qq = sp.d2_dq_dq[r * d + cdim];
                    let qv = sp.d2_dq_dqdot[r * d + cdim];
                    let vq = sp.d2_dq_dqdot[cdim * d + r];
                    let vv = sp.d2_dqdot_dqdot[r * d + cdim];
                    out[r * d + cdim] += h
                        * b
                        * (qq * lnu * lmu
                            + qv * lnu * dmu / h
                            + vq * dnu * lmu / h
                            + vv * dnu * dmu / (h * h));
                }
            }
        }
        true
    }
}
