//! Continuous-side oracles: closed-form Riemann-Liouville values for power
//! functions and an independent refined numerical reference for series.
//!
//! Everything downstream (discrete operators, integrators, benchmarks)
//! takes its reference values from here, so the crate has exactly one
//! Gamma implementation and one set of conventions.

use crate::error::{FviError, Result};
use crate::grid::GridSeries;

/// Euler Gamma function via the Lanczos approximation (g = 7, 9 terms),
/// with the reflection formula for arguments below 1/2.
///
/// Relative accuracy is around 1e-14 on the ranges used here; poles at
/// nonpositive integers return NaN.
pub fn gamma(x: f64) -> f64 {
    const G_COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = G_COEF[0];
    for (i, c) in G_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Reciprocal Gamma, zero at the poles.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Closed-form Riemann-Liouville integral of a power function:
/// `J^alpha [t^{beta-1}](t) = Gamma(beta)/Gamma(beta+alpha) t^{beta+alpha-1}`.
///
/// Negative `alpha` is the fractional derivative. A pole of the denominator
/// Gamma yields 0 (the power is annihilated). `beta` must not be a
/// nonpositive integer; that precondition violation returns NaN.
///
/// At `t = 0` the value is taken to be 0 whenever the exponent
/// `beta + alpha - 1` is nonzero (also for negative exponents, where the
/// analytic continuation diverges; the convention keeps the starting-
/// quadrature exactness systems finite and is never hit by the benchmark
/// data, which vanish at the origin).
pub fn rl_integral_monomial(alpha: f64, beta: f64, t: f64) -> f64 {
    if beta <= 0.0 && beta == beta.floor() {
        return f64::NAN;
    }
    let coef = gamma(beta) * recip_gamma(beta + alpha);
    if coef == 0.0 {
        return 0.0;
    }
    let exponent = beta + alpha - 1.0;
    if t == 0.0 {
        return if exponent == 0.0 { coef } else { 0.0 };
    }
    coef * t.powf(exponent)
}

/// `J^alpha [t^{beta-1} sin t](t)` by termwise application of the
/// Gamma-function formula to the sine series. Intended for `t` in `[0, 4]`
/// or so; the alternating series loses accuracy for large `t`.
pub fn rl_power_sin_series(alpha: f64, beta: f64, t: f64) -> f64 {
    let mut sum = 0.0;
    let mut inv_fact = 1.0; // 1/(2m+1)!
    for m in 0..60 {
        let odd = (2 * m + 1) as f64;
        if m > 0 {
            inv_fact /= (odd - 1.0) * odd;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * inv_fact * rl_integral_monomial(alpha, beta + odd, t);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) && m > 2 {
            break;
        }
    }
    sum
}

/// High-resolution numerical reference for `D^alpha f`, `alpha` in `[0, 1]`:
/// evaluates `J^{1-alpha}` on a grid refined by `refinement` with a
/// product-trapezoid rule (piecewise-linear data against the exact kernel),
/// then differentiates by central differences and restricts back to the
/// original grid. Independent of the convolution-quadrature path; used only
/// as a fallback oracle where no closed form exists.
pub fn rl_derivative_series(alpha: f64, f: &GridSeries, refinement: usize) -> Result<GridSeries> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FviError::InvalidConfiguration(format!(
            "derivative order must lie in [0, 1], got {alpha}"
        )));
    }
    if refinement < 4 {
        return Err(FviError::InvalidConfiguration(format!(
            "refinement must be at least 4, got {refinement}"
        )));
    }
    let n = f.intervals();
    let h = f.step();
    let hr = h / refinement as f64;
    let nr = n * refinement;
    let fine: Vec<f64> = (0..=nr).map(|j| interp_cubic(f, j as f64 * hr)).collect();

    let sigma = 1.0 - alpha;
    let integral: Vec<f64> = if sigma == 0.0 {
        fine.clone()
    } else {
        product_trapezoid_integral(&fine, hr, sigma)
    };

    // central differences on the refined grid, one-sided at the ends
    let deriv = |j: usize| -> f64 {
        if j == 0 {
            (-3.0 * integral[0] + 4.0 * integral[1] - integral[2]) / (2.0 * hr)
        } else if j == nr {
            (3.0 * integral[nr] - 4.0 * integral[nr - 1] + integral[nr - 2]) / (2.0 * hr)
        } else {
            (integral[j + 1] - integral[j - 1]) / (2.0 * hr)
        }
    };
    let coarse: Vec<f64> = (0..=n).map(|k| deriv(k * refinement)).collect();
    GridSeries::new(coarse, h)
}

/// `J^sigma` of piecewise-linear data by exact integration of the kernel
/// `(t - tau)^{sigma - 1}` against each linear piece.
fn product_trapezoid_integral(values: &[f64], h: f64, sigma: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let inv_gamma = recip_gamma(sigma);
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let t = k as f64 * h;
        let mut acc = 0.0;
        for j in 0..k {
            let uj = t - j as f64 * h; // distance to the left end of the piece
            let uj1 = t - (j + 1) as f64 * h;
            let a = (uj.powf(sigma) - uj1.powf(sigma)) / sigma;
            let b = uj * a - (uj.powf(sigma + 1.0) - uj1.powf(sigma + 1.0)) / (sigma + 1.0);
            let slope = (values[j + 1] - values[j]) / h;
            acc += values[j] * a + slope * b;
        }
        out[k] = inv_gamma * acc;
    }
    out
}

/// Cubic Lagrange interpolation of a grid series at arbitrary time.
fn interp_cubic(f: &GridSeries, t: f64) -> f64 {
    let n = f.intervals();
    let h = f.step();
    let v = f.values();
    if n < 3 {
        // fall back to linear for very short series
        let k = ((t / h).floor() as usize).min(n - 1);
        let w = (t - k as f64 * h) / h;
        return v[k] * (1.0 - w) + v[k + 1] * w;
    }
    let cell = ((t / h).floor() as isize).clamp(0, n as isize - 1) as usize;
    let base = cell.saturating_sub(1).min(n - 3);
    let mut acc = 0.0;
    for i in 0..4 {
        let ti = (base + i) as f64 * h;
        let mut l = 1.0;
        for j in 0..4 {
            if j != i {
                let tj = (base + j) as f64 * h;
                l *= (t - tj) / (ti - tj);
            }
        }
        acc += v[base + i] * l;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reference_values() {
        assert_relative_eq!(gamma(0.5), std::f64::consts::PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma(1.0), 1.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(2.5), 1.329_340_388_179_137_2, max_relative = 1e-13);
        assert_relative_eq!(gamma(1.5), 0.886_226_925_452_758_06, max_relative = 1e-13);
        assert_relative_eq!(gamma(6.0), 120.0, max_relative = 1e-13);
        // reflection: Gamma(-1/2) = -2 sqrt(pi)
        assert_relative_eq!(
            gamma(-0.5),
            -2.0 * std::f64::consts::PI.sqrt(),
            max_relative = 1e-13
        );
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-3.0).is_nan());
        assert_eq!(recip_gamma(-2.0), 0.0);
    }

    #[test]
    fn monomial_integral_examples() {
        // ordinary integral of t at t = 1
        assert_relative_eq!(rl_integral_monomial(1.0, 2.0, 1.0), 0.5, max_relative = 1e-13);
        // half integral of t at t = 1: 4 / (3 sqrt(pi))
        assert_relative_eq!(
            rl_integral_monomial(0.5, 2.0, 1.0),
            0.752_252_778_063_674_97,
            max_relative = 1e-13
        );
        // half derivative of t at t = 1: 2 / sqrt(pi)
        assert_relative_eq!(
            rl_integral_monomial(-0.5, 2.0, 1.0),
            1.128_379_167_095_512_6,
            max_relative = 1e-13
        );
        // derivative of a constant is annihilated by the Gamma pole
        assert_eq!(rl_integral_monomial(-1.0, 1.0, 0.7), 0.0);
        // alpha = 0 is the identity
        assert_relative_eq!(rl_integral_monomial(0.0, 3.0, 0.5), 0.25, max_relative = 1e-13);
    }

    #[test]
    fn continuous_semigroup_on_monomials() {
        // J^a J^b t^{q-1} = J^{a+b} t^{q-1} through the Gamma algebra
        for &(a, b, q) in &[(0.3, 0.6, 1.5), (0.5, 0.5, 2.0), (-0.25, 0.75, 3.0)] {
            for &t in &[0.3, 1.0, 2.5] {
                let inner = rl_integral_monomial(b, q, t);
                // J^b t^{q-1} is a power with beta' = q + b, scaled
                let scale = gamma(q) * recip_gamma(q + b);
                let outer = scale * rl_integral_monomial(a, q + b, t);
                let direct = rl_integral_monomial(a + b, q, t);
                assert_relative_eq!(outer, direct, max_relative = 1e-12);
                assert!(inner.is_finite());
            }
        }
    }

    #[test]
    fn derivative_series_identity_cases() {
        let f = GridSeries::sample(32, 1.0 / 32.0, |t| t * t * (1.0 - t)).unwrap();
        // alpha = 0: D^0 f = f
        let d0 = rl_derivative_series(0.0, &f, 8).unwrap();
        for (a, b) in d0.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        // alpha = 1: D^1 f = df/dt
        let d1 = rl_derivative_series(1.0, &f, 8).unwrap();
        for (k, a) in d1.values().iter().enumerate() {
            let t = f.time(k);
            let exact = 2.0 * t - 3.0 * t * t;
            assert!((a - exact).abs() < 2e-3, "k={k}: {a} vs {exact}");
        }
    }

    #[test]
    fn derivative_series_matches_closed_form() {
        // D^{1/2} t = Gamma(2)/Gamma(3/2) t^{1/2}
        let f = GridSeries::sample(64, 1.0 / 64.0, |t| t).unwrap();
        let d = rl_derivative_series(0.5, &f, 16).unwrap();
        for k in 4..=64 {
            let exact = rl_integral_monomial(-0.5, 2.0, f.time(k));
            let got = d.values()[k];
            assert!(
                (got - exact).abs() < 2e-3 * exact.abs().max(1.0),
                "k={k}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn derivative_series_rejects_small_refinement() {
        let f = GridSeries::sample(8, 0.125, |t| t).unwrap();
        assert!(rl_derivative_series(0.5, &f, 3).is_err());
        assert!(rl_derivative_series(1.5, &f, 8).is_err());
    }

    #[test]
    fn power_sin_series_small_t() {
        // J^0 [sin](t) = sin t
        for &t in &[0.1, 0.5, 1.0] {
            assert_relative_eq!(rl_power_sin_series(0.0, 1.0, t), t.sin(), max_relative = 1e-12);
        }
    }
}
