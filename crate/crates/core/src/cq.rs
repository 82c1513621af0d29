//! Convolution quadrature from BDF generating functions.
//!
//! The discrete left/right operators approximate the Riemann-Liouville
//! integral `J^alpha` (negative `alpha` yields the fractional derivative).
//! Weights are the Maclaurin coefficients of `(gamma_p(z)/h)^{-alpha}`,
//! where `gamma_p` is the generating polynomial of the order-`p` backward
//! differentiation formula. Starting quadratures append per-row correction
//! weights that make the operator exact on a chosen set of power functions,
//! which removes the low-order startup error on data behaving like
//! `t^e g(t)` near the origin.

use crate::error::{FviError, Result};
use crate::fracops::rl_integral_monomial;
use crate::grid::GridSeries;
use crate::linalg::{compensated_sum, condition_inf, solve_dense};

/// Maximum supported BDF order. BDF7 and beyond are not zero-stable.
pub const MAX_BDF_ORDER: usize = 6;

/// Generating polynomial `gamma_p(z) = sum_{k=1}^{p} (1-z)^k / k` of the
/// order-`p` backward differentiation formula, stored by powers of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdfGeneratingPolynomial {
    order: usize,
    coefficients: Vec<f64>,
}

impl BdfGeneratingPolynomial {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_BDF_ORDER {
            return Err(FviError::InvalidBdfOrder(order));
        }
        let mut coefficients = vec![0.0; order + 1];
        let mut binom = vec![0.0; order + 1];
        for k in 1..=order {
            // binomial row for (1 - z)^k
            binom[0] = 1.0;
            for j in 1..=k {
                binom[j] = binom[j - 1] * ((k - j + 1) as f64) / (j as f64) * -1.0;
            }
            for j in 0..=k {
                coefficients[j] += binom[j] / k as f64;
            }
        }
        Ok(Self { order, coefficients })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficient of `z^k`, `k = 0..=p`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Constant term `gamma_p(0) = H_p`, the `p`-th harmonic number.
    pub fn constant_term(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }
}

/// Convenience wrapper mirroring the operation name.
pub fn bdf_generating_polynomial(order: usize) -> Result<BdfGeneratingPolynomial> {
    BdfGeneratingPolynomial::new(order)
}

/// Convolution-quadrature weights `omega_0..omega_N` for the operator
/// `J^alpha` on step `h`: the Maclaurin coefficients of
/// `(gamma_p(z)/h)^{-alpha}`.
#[derive(Debug, Clone)]
pub struct CqWeights {
    alpha: f64,
    bdf_order: usize,
    step: f64,
    weights: Vec<f64>,
}

impl CqWeights {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bdf_order(&self) -> usize {
        self.bdf_order
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest representable grid index `N`.
    pub fn len_n(&self) -> usize {
        self.weights.len() - 1
    }
}

/// Generates CQ weights with the power-of-a-series recurrence
/// (J. C. P. Miller): with `a(z) = gamma_p(z)/h` and `g = -alpha`,
///
/// `c_0 = a_0^g`, `c_n = (1/(n a_0)) sum_{k=1}^{min(n,p)} ((g+1)k - n) a_k c_{n-k}`.
///
/// Exact in exact arithmetic and `O(p N)` in time.
pub fn cq_weights(alpha: f64, bdf_order: usize, step: f64, n: usize) -> Result<CqWeights> {
    let poly = BdfGeneratingPolynomial::new(bdf_order)?;
    if !(step > 0.0) {
        return Err(FviError::InvalidConfiguration(format!(
            "step must be positive, got {step}"
        )));
    }
    if poly.constant_term() <= 0.0 {
        return Err(FviError::InvalidConfiguration(
            "generating polynomial has nonpositive constant term".into(),
        ));
    }
    let a: Vec<f64> = poly.coefficients().iter().map(|c| c / step).collect();
    let g = -alpha;
    let mut w = vec![0.0; n + 1];
    w[0] = a[0].powf(g);
    for m in 1..=n {
        let mut acc = 0.0;
        for k in 1..=m.min(bdf_order) {
            acc += ((g + 1.0) * k as f64 - m as f64) * a[k] * w[m - k];
        }
        w[m] = acc / (m as f64 * a[0]);
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(FviError::Degenerate(
            "non-finite convolution weight produced".into(),
        ));
    }
    Ok(CqWeights { alpha, bdf_order, step, weights: w })
}

/// Left (retarded) discrete convolution: `g_k = sum_{n=0}^{k} omega_n f_{k-n}`.
pub fn conv_left(w: &CqWeights, f: &GridSeries) -> Result<GridSeries> {
    check_lengths(w, f)?;
    let v = f.values();
    let omega = w.weights();
    let g = (0..v.len())
        .map(|k| (0..=k).map(|n| omega[n] * v[k - n]).sum())
        .collect();
    GridSeries::new(g, f.step())
}

/// Right (advanced) discrete convolution: `g_k = sum_{n=0}^{N-k} omega_n f_{k+n}`.
/// Uses the same weights as the left operator.
pub fn conv_right(w: &CqWeights, f: &GridSeries) -> Result<GridSeries> {
    check_lengths(w, f)?;
    let v = f.values();
    let omega = w.weights();
    let n = v.len() - 1;
    let g = (0..=n)
        .map(|k| (0..=n - k).map(|m| omega[m] * v[k + m]).sum())
        .collect();
    GridSeries::new(g, f.step())
}

fn check_lengths(w: &CqWeights, f: &GridSeries) -> Result<()> {
    if w.len_n() < f.intervals() {
        return Err(FviError::DimensionMismatch(format!(
            "weights cover N = {} but the series has N = {}",
            w.len_n(),
            f.intervals()
        )));
    }
    if (w.step() - f.step()).abs() > 1e-12 * w.step().abs().max(1.0) {
        return Err(FviError::DimensionMismatch(format!(
            "weights were generated for h = {} but the series has h = {}",
            w.step(),
            f.step()
        )));
    }
    Ok(())
}

/// Starting-quadrature correction weights. Row `k` holds the weights
/// `varpi_{k,0..s}` applied to the first `s + 1` samples so that the
/// corrected operator reproduces `J^alpha [t^e]` exactly at `t_k` for each
/// exponent `e` in the basis.
#[derive(Debug, Clone)]
pub struct StartingQuadrature {
    alpha: f64,
    bdf_order: usize,
    step: f64,
    exponents: Vec<f64>,
    rows: Vec<Vec<f64>>,
    condition: f64,
}

impl StartingQuadrature {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bdf_order(&self) -> usize {
        self.bdf_order
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Exactness basis exponents (the corrected operator is exact on `t^e`).
    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// Number of correction columns, `s + 1`.
    pub fn node_count(&self) -> usize {
        self.exponents.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Infinity-norm condition estimate of the exactness system.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Correction term `h^alpha sum_n varpi_{k,n} f_n` for row `k`.
    pub fn correction(&self, k: usize, head: &[f64]) -> f64 {
        let scale = self.step.powf(self.alpha);
        scale
            * self.rows[k]
                .iter()
                .zip(head)
                .map(|(w, f)| w * f)
                .sum::<f64>()
    }
}

/// Starting quadrature with the default monomial basis `t^q`, `q = 0..=s`.
pub fn starting_quadrature(
    alpha: f64,
    bdf_order: usize,
    step: f64,
    n: usize,
    s: usize,
) -> Result<StartingQuadrature> {
    let exponents: Vec<f64> = (0..=s).map(|q| q as f64).collect();
    starting_quadrature_with_basis(alpha, bdf_order, step, n, &exponents)
}

/// Starting quadrature exact on `t^e` for each `e` in `exponents` (distinct,
/// nonnegative, containing 0 so the node `t_0 = 0` carries information).
/// Data behaving like `t^{beta-1} g(t)` with fractional `beta` needs the
/// fractional exponents in the basis to recover the full BDF order.
pub fn starting_quadrature_with_basis(
    alpha: f64,
    bdf_order: usize,
    step: f64,
    n: usize,
    exponents: &[f64],
) -> Result<StartingQuadrature> {
    if exponents.is_empty() || exponents.len() > 8 {
        return Err(FviError::InvalidConfiguration(format!(
            "correction basis must have 1..=8 exponents, got {}",
            exponents.len()
        )));
    }
    if n + 1 < exponents.len() {
        return Err(FviError::InvalidConfiguration(format!(
            "grid with N = {n} cannot host {} correction nodes",
            exponents.len()
        )));
    }
    if !exponents.contains(&0.0) {
        return Err(FviError::InvalidConfiguration(
            "correction basis must contain the exponent 0".into(),
        ));
    }
    for (i, e) in exponents.iter().enumerate() {
        if *e < 0.0 {
            return Err(FviError::InvalidConfiguration(format!(
                "correction exponents must be nonnegative, got {e}"
            )));
        }
        if exponents[..i].iter().any(|o| (o - e).abs() < 1e-12) {
            return Err(FviError::InvalidConfiguration(format!(
                "correction exponent {e} repeated"
            )));
        }
    }

    let w = cq_weights(alpha, bdf_order, step, n)?;
    let omega = w.weights();
    let m = exponents.len();

    // Exactness system on unit nodes: sum_n varpi_{k,n} n^e = rhs_{k,e},
    // with rhs scaled by h^{-alpha-e} so the matrix is h-independent.
    let mut matrix = vec![0.0; m * m];
    for (qi, e) in exponents.iter().enumerate() {
        for node in 0..m {
            matrix[qi * m + node] = unit_power(node as f64, *e);
        }
    }
    let condition = condition_inf(&matrix, m);
    if !condition.is_finite() {
        return Err(FviError::Degenerate(
            "starting-quadrature exactness system is singular".into(),
        ));
    }

    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t_k = k as f64 * step;
        let mut rhs = vec![0.0; m];
        for (qi, e) in exponents.iter().enumerate() {
            let exact = rl_integral_monomial(alpha, e + 1.0, t_k);
            // defect = exact - sum omega_n t_{k-n}^e, summed compensated:
            // the terms cancel almost completely and the residual is divided
            // by h^{alpha+e}, which can amplify plain-summation noise badly.
            let defect = compensated_sum(
                (0..=k)
                    .map(|nn| -omega[nn] * unit_power((k - nn) as f64 * step, *e))
                    .chain(std::iter::once(exact)),
            );
            rhs[qi] = defect / step.powf(alpha + e);
        }
        let mut work = matrix.clone();
        solve_dense(&mut work, &mut rhs)?;
        rows.push(rhs);
    }
    Ok(StartingQuadrature {
        alpha,
        bdf_order,
        step,
        exponents: exponents.to_vec(),
        rows,
        condition,
    })
}

/// `x^e` with the grid convention `0^0 = 1`.
fn unit_power(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        x.powf(e)
    }
}

/// Corrected left convolution
/// `g_k = sum_{n<=k} omega_n f_{k-n} + h^alpha sum_{n<=s} varpi_{k,n} f_n`.
pub fn corrected_conv_left(
    w: &CqWeights,
    sq: &StartingQuadrature,
    f: &GridSeries,
) -> Result<GridSeries> {
    if sq.rows.len() < f.values().len() {
        return Err(FviError::DimensionMismatch(format!(
            "correction rows cover N = {} but the series has N = {}",
            sq.rows.len() - 1,
            f.intervals()
        )));
    }
    if f.values().len() < sq.node_count() {
        return Err(FviError::DimensionMismatch(
            "series shorter than the correction stencil".into(),
        ));
    }
    let plain = conv_left(w, f)?;
    let head = &f.values()[..sq.node_count()];
    let values = plain
        .values()
        .iter()
        .enumerate()
        .map(|(k, g)| g + sq.correction(k, head))
        .collect();
    GridSeries::new(values, f.step())
}
