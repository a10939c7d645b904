//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eigenspline::bspline::{basis_value, derivative, fit, refine, uniform_knots, SplineModel};
use eigenspline::characteristic::{eigen_spectrum, CoefficientVector, DEFAULT_CLUSTER_TOL};
use eigenspline::datagen::{spring_mass_series, SpringParams};
use eigenspline::gensol::BasisLayout;
use eigenspline::linalg::linspace;
use eigenspline::nullspace::{
    gradient_matrix, normalize_and_sparsify, null_coefficients, Pivot, DEFAULT_N_SAMPLES, DEFAULT_RANK_TOL,
    DEFAULT_ZERO_TOL, SPRING_ONE_TOL,
};
use eigenspline::pipeline::{
    benchmark_edc, benchmark_spring, EdcOptions, Profile, RunConfig, RunReport, SpringCell, SpringOptions,
    SpringTable,
};

const BASE_SEED: u64 = 1;
const CELL_BUDGET_S: f64 = 300.0;

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Verdict {
    fn new(id: u32, title: &'static str) -> Self {
        Verdict {
            id,
            title,
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.pass = false;
            self.details.push(format!("FAIL {detail}"));
        } else {
            self.details.push(detail);
        }
    }
}

fn spring_config(profile: Profile) -> RunConfig {
    let mut cfg = RunConfig::spring().with_profile(profile).with_seed(BASE_SEED);
    cfg.basis_layout = BasisLayout::ExtendedPhase;
    cfg
}

fn run_spring(profile: Profile, noise: Option<bool>) -> SpringTable {
    let mut opts = SpringOptions::new(spring_config(profile));
    opts.noise = noise;
    benchmark_spring(&opts).expect("spring benchmark runs")
}

fn label(c: &SpringCell) -> String {
    format!("{}/{}", c.regime.name(), if c.noise { "noisy" } else { "clean" })
}

fn stage_seconds(r: &RunReport) -> f64 {
    let t = r.timings;
    t.genetic_search + t.general_solution + t.spline + t.null_space
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn recovery(id: u32, title: &'static str, cells: &[&SpringCell], tol: f64, masked: bool) -> Verdict {
    let mut v = Verdict::new(id, title);
    for c in cells {
        let Some(report) = &c.report else {
            v.check(
                false,
                format!("{}: {}", label(c), c.error.as_deref().unwrap_or("no report")),
            );
            continue;
        };
        let errs = c.relative_errors.as_ref().unwrap();
        let worst = errs.iter().fold(0.0f64, |a, e| a.max(*e));
        let coeffs = c.coefficients.as_ref().unwrap();
        v.check(
            worst <= tol,
            format!(
                "{}: c = {} vs {}, worst rel err {worst:.3}",
                label(c),
                fmt(coeffs),
                fmt(&c.truth)
            ),
        );
        if masked {
            let mask = &report.discovered.sparsity_mask[3..];
            v.check(
                mask.iter().all(|&m| m == 0.0),
                format!("{}: mask orders 3-5 {}", label(c), fmt(mask)),
            );
        }
        let secs = stage_seconds(report);
        v.check(secs <= CELL_BUDGET_S, format!("{}: {secs:.1} s", label(c)));
    }
    v
}

fn criterion_1(ci: &SpringTable) -> Verdict {
    let cells: Vec<&SpringCell> = ci
        .cells
        .iter()
        .filter(|c| !c.noise && c.regime.name() != "overdamped")
        .collect();
    recovery(1, "noise-free spring recovery", &cells, 0.05, true)
}

fn criterion_2(ci: &SpringTable) -> Verdict {
    let cells: Vec<&SpringCell> = ci.cells.iter().filter(|c| c.noise).collect();
    recovery(2, "noisy spring recovery", &cells, 0.20, false)
}

fn criterion_3(ci: &SpringTable, full: &SpringTable) -> Verdict {
    let mut v = Verdict::new(3, "general-solution fidelity");
    for (table, bound, name) in [(ci, 1e-5, "ci"), (full, 1e-6, "full")] {
        for c in table.cells.iter().filter(|c| c.noise) {
            match &c.report {
                Some(r) => {
                    let mse = r.general_solution.mse;
                    v.check(
                        mse <= bound,
                        format!("{name} {}: mse {mse:.3e} (<= {bound:e})", label(c)),
                    );
                }
                None => v.check(false, format!("{name} {}: {:?}", label(c), c.error)),
            }
        }
    }
    v
}

fn criterion_4(tables: &[&SpringTable]) -> Verdict {
    let mut v = Verdict::new(4, "spline tolerance");
    let mut worst_phi = 0.0f64;
    let mut runs = 0;
    for c in tables.iter().flat_map(|t| &t.cells) {
        let Some(r) = &c.report else {
            v.check(false, format!("{}: no report", label(c)));
            continue;
        };
        runs += 1;
        worst_phi = worst_phi.max(r.spline.max_phi);
        let h = &r.spline.sse_history;
        let monotone = h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300);
        if !monotone {
            v.check(false, format!("{}: residual history {:?}", label(c), h));
        }
        if r.spline.max_phi > 1e-6 {
            v.check(false, format!("{}: max phi {:e}", label(c), r.spline.max_phi));
        }
    }
    v.check(true, format!("{runs} runs, worst phi {worst_phi:.2e}"));
    v
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new(5, "EDC rate constants");
    let mut cfg = RunConfig::kinetics()
        .with_profile(Profile::Ci)
        .with_seed(BASE_SEED);
    cfg.basis_layout = BasisLayout::ExtendedPhase;
    let table = benchmark_edc(&EdcOptions::new(cfg)).expect("edc benchmark runs");
    for row in &table.rows {
        let (Some(se), Some(c), Some(mask)) = (row.squared_error, &row.coefficients, &row.sparsity_mask)
        else {
            v.check(false, format!("{}: {:?}", row.component, row.error));
            continue;
        };
        v.check(
            se <= 2e-3,
            format!(
                "{}: rate {:.5} vs {:.5}, squared error {se:.2e}",
                row.component, c[0], row.reference_rate
            ),
        );
        v.check(
            c[2].abs() < 0.01,
            format!("{}: |c2| = {:.2e}", row.component, c[2].abs()),
        );
        let high = &mask[3..];
        v.check(
            high.iter().all(|&m| m == 0.0),
            format!("{}: mask orders 3-7 {}", row.component, fmt(high)),
        );
    }
    v
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<Complex<f64>> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc >= 0.0 {
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        vec![Complex::new(q / c2, 0.0), Complex::new(c0 / q, 0.0)]
    } else {
        let re = -c1 / (2.0 * c2);
        let im = (-disc).sqrt() / (2.0 * c2.abs());
        vec![Complex::new(re, im), Complex::new(re, -im)]
    }
}

fn signed_unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lead = v
        .iter()
        .find(|x| x.abs() > 1e-4 * n)
        .copied()
        .unwrap_or(1.0)
        .signum();
    v.iter().map(|x| lead * x / n).collect()
}

fn criterion_6() -> Verdict {
    let mut v = Verdict::new(6, "property suite");
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
    let nonzero = |rng: &mut ChaCha8Rng| {
        let m: f64 = rng.random_range(0.1..10.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    };

    // (a) spectrum vs quadratic formula
    let mut worst = 0.0f64;
    let mut draws = 0;
    while draws < 1000 {
        let (c0, c1, c2): (f64, f64, f64) = (
            nonzero(&mut rng),
            rng.random_range(-10.0..10.0),
            nonzero(&mut rng),
        );
        if (c1 * c1 - 4.0 * c2 * c0).abs() <= 1e-6 * c1.abs().max(1.0).powi(2) {
            continue;
        }
        draws += 1;
        let c = CoefficientVector::new(vec![c0, c1, c2]).unwrap();
        let mut got = eigen_spectrum(&c, DEFAULT_CLUSTER_TOL).unwrap().roots();
        let mut want = quadratic_roots(c0, c1, c2);
        let key = |z: &Complex<f64>| (z.re, z.im);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).norm() / w.norm());
        }
    }
    v.check(
        worst <= 1e-8,
        format!("(a) 1000 quadratics, worst rel err {worst:.1e}"),
    );

    // (b) partition of unity and polynomial reproduction
    let mut pou = 0.0f64;
    for _ in 0..500 {
        let degree = rng.random_range(1..7);
        let kv = uniform_knots(-1.0, 4.0, degree, degree + 1 + rng.random_range(0..20)).unwrap();
        let x = rng.random_range(-1.0..4.0);
        let sum: f64 = (0..kv.n_basis())
            .map(|s| basis_value(&kv, s, degree + 1, x).unwrap())
            .sum();
        pou = pou.max((sum - 1.0).abs());
    }
    let mut repro = 0.0f64;
    for _ in 0..100 {
        let degree = rng.random_range(1..7);
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.random_range(-2.0..2.0)).collect();
        let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let xs = linspace(0.0, 2.0, 200);
        let ys: Vec<f64> = xs.iter().map(|&x| poly(x)).collect();
        let m = fit(&xs, &ys, &uniform_knots(0.0, 2.0, degree, degree + 5).unwrap()).unwrap();
        for x in linspace(0.0, 2.0, 37) {
            repro = repro.max((m.evaluate(x).unwrap() - poly(x)).abs());
        }
    }
    v.check(
        pou <= 1e-12,
        format!("(b) partition of unity, worst |sum - 1| {pou:.1e}"),
    );
    v.check(
        repro <= 1e-9,
        format!("(b) polynomial reproduction, worst error {repro:.1e}"),
    );

    // (c) derivatives vs central differences at span midpoints
    let mut fd_worst = 0.0f64;
    for _ in 0..100 {
        let degree = rng.random_range(2..7);
        let kv = uniform_knots(0.0, 5.0, degree, 14).unwrap();
        let control: Vec<f64> = (0..14).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = SplineModel::new(kv.clone(), control).unwrap();
        for p in 1..degree {
            let mids: Vec<(f64, f64)> = kv
                .nonempty_spans()
                .iter()
                .map(|&s| (kv.knots()[s], kv.knots()[s + 1]))
                .map(|(a, b)| (0.5 * (a + b), 1e-3 * (b - a)))
                .collect();
            let exact: Vec<f64> = mids.iter().map(|&(x, _)| derivative(&m, p, x).unwrap()).collect();
            let scale = exact.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            for (&(x, h), e) in mids.iter().zip(&exact) {
                let f = |t: f64| derivative(&m, p - 1, t).unwrap();
                let fd = (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h);
                fd_worst = fd_worst.max((e - fd).abs() / e.abs().max(1e-2 * scale));
            }
        }
    }
    v.check(
        fd_worst <= 1e-5,
        format!("(c) finite differences, worst rel err {fd_worst:.1e}"),
    );

    // (d) scale invariance of the null vector
    let ts = spring_mass_series(&SpringParams::benchmark_underdamped()).unwrap();
    let null_for = |a: f64| {
        let ys: Vec<f64> = ts.ys().iter().map(|y| a * y).collect();
        let kv = uniform_knots(0.0, 20.0, 5, 120).unwrap();
        let m = fit(ts.xs(), &ys, &kv).unwrap();
        let g = gradient_matrix(&m, 2, DEFAULT_N_SAMPLES).unwrap();
        signed_unit(&null_coefficients(&g, DEFAULT_RANK_TOL).unwrap().raw_null_vector)
    };
    let base = null_for(1.0);
    let mut scale_worst = 0.0f64;
    for a in [1e-3, 0.5, 7.0, 1e4] {
        for (x, y) in null_for(a).iter().zip(&base) {
            scale_worst = scale_worst.max((x - y).abs());
        }
    }
    v.check(
        scale_worst <= 1e-8,
        format!("(d) scale invariance, worst change {scale_worst:.1e}"),
    );

    // (e) random stable second-order systems
    let mut rec_worst = 0.0f64;
    for _ in 0..50 {
        let (r1, r2) = (rng.random_range(-2.0..-0.1), rng.random_range(-2.0..-0.1));
        let params = SpringParams {
            mass: 1.0,
            damping: -(r1 + r2),
            stiffness: r1 * r2,
            ..SpringParams::benchmark_critical()
        };
        let ts = spring_mass_series(&params).unwrap();
        let kv = uniform_knots(0.0, 20.0, 5, 200).unwrap();
        let r = refine(ts.xs(), ts.ys(), &fit(ts.xs(), ts.ys(), &kv).unwrap(), 1e-6, 12).unwrap();
        let g = gradient_matrix(&r.model, 2, DEFAULT_N_SAMPLES).unwrap();
        let d = null_coefficients(&g, DEFAULT_RANK_TOL).unwrap();
        let n = normalize_and_sparsify(&d, Pivot::LowestSurvivingOrder, DEFAULT_ZERO_TOL, SPRING_ONE_TOL)
            .unwrap();
        let truth = [1.0, params.damping / params.stiffness, 1.0 / params.stiffness];
        for (got, want) in n.coefficients.as_slice().iter().zip(truth) {
            rec_worst = rec_worst.max((got - want).abs() / want);
        }
    }
    v.check(
        rec_worst <= 0.05,
        format!("(e) 50 second-order systems, worst rel err {rec_worst:.1e}"),
    );

    let secs = clock.elapsed().as_secs_f64();
    v.check(secs <= 120.0, format!("{secs:.1} s"));
    v
}

fn criterion_7(first: &SpringTable, first_secs: f64) -> Verdict {
    let mut v = Verdict::new(7, "determinism");
    let clock = Instant::now();
    let second = run_spring(Profile::Ci, None);
    let secs = first_secs + clock.elapsed().as_secs_f64();
    let (a, b) = (first.to_json(), second.to_json());
    v.check(
        a == b,
        format!("two bench-spring runs, {} bytes, identical: {}", a.len(), a == b),
    );
    v.check(secs <= 600.0, format!("{secs:.1} s total"));
    v
}

fn criterion_8(ci: &SpringTable) -> Verdict {
    let mut v = Verdict::new(8, "sparsity without regularization");
    for c in ci.cells.iter().filter(|c| !c.noise) {
        let Some(r) = &c.report else {
            v.check(false, format!("{}: no report", label(c)));
            continue;
        };
        let high = &r.discovered.raw_null_vector[3..];
        let worst = high.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        v.check(
            worst < 1e-4,
            format!("{}: unit-norm orders 3-5 max {worst:.2e}", label(c)),
        );
    }
    v
}

fn main() -> ExitCode {
    let clock = Instant::now();
    let ci = run_spring(Profile::Ci, None);
    let ci_secs = clock.elapsed().as_secs_f64();
    let full = run_spring(Profile::Full, Some(true));

    let verdicts = [
        criterion_1(&ci),
        criterion_2(&ci),
        criterion_3(&ci, &full),
        criterion_4(&[&ci, &full]),
        criterion_5(),
        criterion_6(),
        criterion_7(&ci, ci_secs),
        criterion_8(&ci),
    ];

    println!();
    for v in &verdicts {
        for d in &v.details {
            println!("    criterion {}: {d}", v.id);
        }
    }
    println!();
    for v in &verdicts {
        println!(
            "criterion {} [{}] {}",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.title
        );
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "\n{} of {} criteria pass",
        verdicts.len() - failed,
        verdicts.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
