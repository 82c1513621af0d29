//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with its measured quantities and elapsed time.
//!
//! Run with `cargo test -p fvicq --test acceptance -- --nocapture` to see
//! the lines. Criterion 06 is a known-red target: the damped schemes cap
//! at global order two because the fractional term couples to main nodes
//! only (a second-order quadrature of the coupling in the underlying
//! discrete action); the starting correction cannot lift that, so the
//! fitted order stays near 2 while the target asks for at least 2.5.

use std::time::Instant;

use fvicq::bench::{
    cq_saturation_study, energy_trace, global_error, run_convergence, windowed_means,
    ConvergenceStudy,
};
use fvicq::cq::{conv_left, conv_right, cq_weights};
use fvicq::integrators::{
    fvi_galerkin_run, fvi_midpoint_run, fvi_reversed_check, CorrectionSpec, FviProblem, GridSpec,
    SchemeKind,
};
use fvicq::models::{model_by_id, GalerkinLd, GalerkinScheme, MidpointLd};
use fvicq::GridSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    label: &'static str,
    limit_s: f64,
    start: Instant,
}

impl Criterion {
    fn begin(label: &'static str, limit_s: f64) -> Self {
        Self { label, limit_s, start: Instant::now() }
    }

    fn finish(self, pass: bool, detail: String) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{} {} ({elapsed:.2} s): {detail}", self.label, verdict);
        assert!(
            elapsed < self.limit_s,
            "{} exceeded its runtime budget: {elapsed:.2} s >= {} s",
            self.label,
            self.limit_s
        );
        assert!(pass, "{} failed: {detail}", self.label);
    }
}

#[test]
fn criterion_01_discrete_identities() {
    let c = Criterion::begin("criterion 01 (semigroup + summation by parts)", 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut series_count = 0usize;
    let mut worst = 0.0_f64;
    for &n in &[16usize, 64, 256] {
        for &alpha in &[0.1, 0.25, 0.5] {
            for &beta in &[0.1, 0.25, 0.5] {
                for p in 1..=3usize {
                    for _ in 0..2 {
                        let h = 0.125;
                        let f = GridSeries::new(
                            (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                            h,
                        )
                        .unwrap();
                        let g = GridSeries::new(
                            (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                            h,
                        )
                        .unwrap();
                        series_count += 1;

                        let wa = cq_weights(alpha, p, h, n).unwrap();
                        let wb = cq_weights(beta, p, h, n).unwrap();
                        let wab = cq_weights(alpha + beta, p, h, n).unwrap();

                        // semigroup, left and right
                        let two = conv_left(&wa, &conv_left(&wb, &f).unwrap()).unwrap();
                        let one = conv_left(&wab, &f).unwrap();
                        for (x, y) in two.values().iter().zip(one.values()) {
                            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
                        }
                        let two = conv_right(&wa, &conv_right(&wb, &g).unwrap()).unwrap();
                        let one = conv_right(&wab, &g).unwrap();
                        for (x, y) in two.values().iter().zip(one.values()) {
                            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
                        }

                        // summation by parts
                        let jf = conv_left(&wa, &f).unwrap();
                        let jg = conv_right(&wa, &g).unwrap();
                        let lhs: f64 =
                            g.values().iter().zip(jf.values()).map(|(a, b)| a * b).sum();
                        let rhs: f64 =
                            jg.values().iter().zip(f.values()).map(|(a, b)| a * b).sum();
                        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
                    }
                }
            }
        }
    }
    let pass = worst <= 1e-10 && series_count >= 100;
    c.finish(pass, format!("{series_count} random series, worst relative defect {worst:.2e}"));
}

#[test]
fn criterion_02_gruenwald_equivalence() {
    let c = Criterion::begin("criterion 02 (Gruenwald-Letnikov weights)", 1.0);
    let mut worst = 0.0_f64;
    for &alpha in &[0.25, -0.25, 0.5, -0.5, 0.75, -0.75] {
        let w = cq_weights(alpha, 1, 1.0, 200).unwrap();
        let mut binom = 1.0;
        for (n, &x) in w.weights().iter().enumerate() {
            if n > 0 {
                binom *= (-alpha - (n as f64 - 1.0)) / n as f64;
            }
            let expect = if n % 2 == 0 { binom } else { -binom };
            worst = worst.max((x - expect).abs());
        }
    }
    c.finish(worst <= 1e-12, format!("worst absolute deviation {worst:.2e} over n <= 200"));
}

#[test]
fn criterion_03_cq_saturation() {
    let c = Criterion::begin("criterion 03 (CQ saturation at min(beta, p))", 30.0);
    let mut detail = String::new();
    let mut pass = true;
    for &(beta, p) in &[(1.0, 1usize), (3.0, 3), (4.0, 4), (5.0, 5)] {
        let report = cq_saturation_study(beta, p, -0.5).unwrap();
        let target = beta.min(p as f64);
        let ok = (report.slope - target).abs() <= 0.2;
        pass &= ok;
        detail.push_str(&format!(
            "(beta={beta}, p={p}): fitted {:.2} vs {target} {}; ",
            report.slope,
            if ok { "ok" } else { "MISS" }
        ));
    }
    c.finish(pass, detail);
}

fn table_orders(
    scheme: &SchemeKind,
    corrected: Option<CorrectionSpec>,
) -> Vec<(String, usize, f64)> {
    let mut rows = Vec::new();
    for &(id, lo, hi) in &[("damped-osc", 4u32, 11u32), ("torvik-14", 1, 8), ("torvik-34", 1, 8)] {
        let bench = model_by_id(id).unwrap();
        for p in 1..=3usize {
            let mut study =
                ConvergenceStudy::dyadic(bench.clone(), scheme.clone(), p, lo..=hi).unwrap();
            study.correction = corrected.clone();
            let report = run_convergence(&study).unwrap();
            rows.push((id.to_string(), p, report.slope));
        }
    }
    rows
}

#[test]
fn criterion_04_midpoint_table() {
    let c = Criterion::begin("criterion 04 (midpoint convergence orders)", 120.0);
    let rows = table_orders(&SchemeKind::Midpoint, None);
    let mut pass = true;
    let mut detail = String::new();
    for (id, p, slope) in rows {
        let ok = match (id.as_str(), p) {
            ("damped-osc", 1) | ("torvik-14", 1) | ("torvik-34", 1) => (slope - 1.0).abs() <= 0.2,
            ("damped-osc", _) | ("torvik-14", _) => (slope - 2.0).abs() <= 0.2,
            ("torvik-34", _) => (1.6..=2.0).contains(&slope),
            _ => unreachable!(),
        };
        pass &= ok;
        detail.push_str(&format!("{id}/BDF{p}: {slope:.2}{}; ", if ok { "" } else { " MISS" }));
    }
    c.finish(pass, detail);
}

#[test]
fn criterion_05_galerkin_table() {
    let c = Criterion::begin("criterion 05 (order-4 Galerkin convergence orders)", 300.0);
    let rows = table_orders(&SchemeKind::Galerkin(GalerkinScheme::order4_gauss2()), None);
    let mut pass = true;
    let mut detail = String::new();
    for (id, p, slope) in rows {
        let target = if p == 1 { 1.0 } else { 2.0 };
        let ok = (slope - target).abs() <= 0.2;
        pass &= ok;
        detail.push_str(&format!("{id}/BDF{p}: {slope:.2}{}; ", if ok { "" } else { " MISS" }));
    }
    c.finish(pass, detail);
}

#[test]
fn criterion_06_corrected_bdf3() {
    let c = Criterion::begin("criterion 06 (corrected BDF3 on torvik-34)", 60.0);
    let bench = model_by_id("torvik-34").unwrap();
    let mut study = ConvergenceStudy::dyadic(
        bench,
        SchemeKind::Galerkin(GalerkinScheme::order4_gauss2()),
        3,
        1..=8,
    )
    .unwrap();
    // exactness basis adapted to the t^{5/2} solution; the plain integer
    // basis does not even remove the startup defect on this data
    study.correction = Some(CorrectionSpec { exponents: vec![0.0, 1.0, 2.5] });
    let report = run_convergence(&study).unwrap();
    let pass = report.slope >= 2.5;
    c.finish(
        pass,
        format!(
            "fitted order {:.2} (target >= 2.5); errors {:?}",
            report.slope,
            report.errors.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_07_dissipation_structure() {
    let c = Criterion::begin("criterion 07 (energy dissipation and conservation)", 1.0);
    let bench = model_by_id("damped-osc").unwrap();
    let problem = FviProblem::from_benchmark(&bench, 1, GridSpec::StepSize(0.125)).unwrap();
    let traj = fvi_midpoint_run(&problem).unwrap();
    let trace = energy_trace(&traj, problem.model.as_ref()).unwrap();
    // one oscillator period is 2 pi: about 50 samples at h = 0.125
    let window = (2.0 * std::f64::consts::PI / 0.125).round() as usize;
    let means = windowed_means(&trace, window);
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let initial = trace.values()[0];
    let final_e = *trace.values().last().unwrap();
    let damped_ok = decreasing && final_e < 0.05 * initial;

    // undamped run: same grid, mu = 0
    let undamped = FviProblem::new(
        problem.model.clone(),
        0.0,
        0.5,
        0.5,
        1,
        problem.steps,
        problem.step,
        problem.x0.clone(),
        problem.p0.clone(),
    )
    .unwrap();
    let traj0 = fvi_midpoint_run(&undamped).unwrap();
    let trace0 = energy_trace(&traj0, undamped.model.as_ref()).unwrap();
    let e0 = trace0.values()[0];
    let drift = trace0
        .values()
        .iter()
        .map(|e| (e - e0).abs() / e0)
        .fold(0.0, f64::max);
    let undamped_ok = drift <= 0.02;

    c.finish(
        damped_ok && undamped_ok,
        format!(
            "window means {means:?}, final/initial {:.3}, undamped drift {drift:.2e}",
            final_e / initial
        ),
    );
}

#[test]
fn criterion_08_time_reversal_residual() {
    let c = Criterion::begin("criterion 08 (time-reversal residual)", 1.0);
    let bench = model_by_id("damped-osc").unwrap();
    let problem = FviProblem::from_benchmark(&bench, 1, GridSpec::Steps(128)).unwrap();
    let traj = fvi_midpoint_run(&problem).unwrap();
    let report = fvi_reversed_check(&problem, &traj).unwrap();
    c.finish(
        report.max_residual <= 1e-8,
        format!("max reversed-equation residual {:.2e}", report.max_residual),
    );
}

#[test]
fn criterion_09_scheme_degeneration() {
    let c = Criterion::begin("criterion 09 (degree-1 Galerkin equals midpoint)", 1.0);
    let bench = model_by_id("damped-osc").unwrap();
    let problem = FviProblem::from_benchmark(&bench, 1, GridSpec::Steps(128)).unwrap();
    let mid = fvi_midpoint_run(&problem).unwrap();
    let gal = fvi_galerkin_run(&problem, &GalerkinScheme::midpoint_s1()).unwrap();
    let mut worst = 0.0_f64;
    for (a, b) in mid.main_nodes().iter().zip(gal.main_nodes()) {
        worst = worst.max((a[0] - b[0]).abs());
    }
    c.finish(worst <= 1e-10, format!("max trajectory deviation {worst:.2e}"));
}

#[test]
fn criterion_10_partials_vs_finite_differences() {
    let c = Criterion::begin("criterion 10 (analytic partials vs finite differences)", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let scheme = GalerkinScheme::order4_gauss2();
    let benches = [
        model_by_id("damped-osc").unwrap(),
        model_by_id("torvik-14").unwrap(),
        model_by_id("torvik-34").unwrap(),
    ];
    let eps = 1e-6;
    let mut checked = 0usize;
    let mut worst = 0.0_f64;
    while checked < 1000 {
        let bench = &benches[checked % benches.len()];
        let model = bench.model.as_ref();
        let t: f64 = rng.random_range(0.05..1.0);
        let h: f64 = rng.random_range(0.05..0.5);
        let q: f64 = rng.random_range(-2.0..2.0);
        let v: f64 = rng.random_range(-2.0..2.0);
        let qb: f64 = rng.random_range(-2.0..2.0);

        let mut lq = [0.0];
        model.d_dq(t, &[q], &[v], &mut lq);
        let fd = (model.lagrangian(t, &[q + eps], &[v]) - model.lagrangian(t, &[q - eps], &[v]))
            / (2.0 * eps);
        worst = worst.max((lq[0] - fd).abs() / lq[0].abs().max(fd.abs()).max(1.0));
        let mut lv = [0.0];
        model.d_dqdot(t, &[q], &[v], &mut lv);
        let fd = (model.lagrangian(t, &[q], &[v + eps]) - model.lagrangian(t, &[q], &[v - eps]))
            / (2.0 * eps);
        worst = worst.max((lv[0] - fd).abs() / lv[0].abs().max(fd.abs()).max(1.0));
        checked += 2;

        let ld = MidpointLd::new(model, h).unwrap();
        let mut g = [0.0];
        ld.d1(t, &[q], &[qb], &mut g);
        let fd =
            (ld.value(t, &[q + eps], &[qb]) - ld.value(t, &[q - eps], &[qb])) / (2.0 * eps);
        worst = worst.max((g[0] - fd).abs() / g[0].abs().max(fd.abs()).max(1.0));
        ld.d2(t, &[q], &[qb], &mut g);
        let fd =
            (ld.value(t, &[q], &[qb + eps]) - ld.value(t, &[q], &[qb - eps])) / (2.0 * eps);
        worst = worst.max((g[0] - fd).abs() / g[0].abs().max(fd.abs()).max(1.0));
        checked += 2;

        let gld = GalerkinLd::new(model, &scheme, h).unwrap();
        let nodes = [q, v, qb];
        let nu = rng.random_range(0..3usize);
        let mut g = [0.0];
        gld.d_nu(t, &nodes, nu, &mut g);
        let mut plus = nodes;
        let mut minus = nodes;
        plus[nu] += eps;
        minus[nu] -= eps;
        let fd = (gld.value(t, &plus) - gld.value(t, &minus)) / (2.0 * eps);
        worst = worst.max((g[0] - fd).abs() / g[0].abs().max(fd.abs()).max(1.0));
        checked += 1;
    }
    c.finish(
        worst <= 1e-6,
        format!("{checked} evaluations, worst relative deviation {worst:.2e}"),
    );
}
