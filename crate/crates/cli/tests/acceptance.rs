//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test -p plab-cli --test acceptance -- AC5 AC6`.
//! Criteria listed in `KNOWN_RED` are reported but do not fail the target
//! unless `PLAB_ACCEPTANCE_STRICT=1` is set; README.md explains why they fail.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use plab_core::besov::{embedding_check, oscillation_table, power_transform_ratio};
use plab_core::calibration::{max_ratio, sample_balls, seeded_rng, validate_ratio};
use plab_core::decay::{
    decay_profile, fit_beta, iterative_lemma_check, nonlin_comparison_defect, reverse_holder_ratio,
    theorem31_terms, transfer_ratio, DecayProfile, Quantity, SeminormKind,
};
use plab_core::field::gradient;
use plab_core::orlicz::{
    a_map, alpha_exponent, eta_exponent, phi_conj_shifted, phi_shifted, phi_shifted_derivative, v_map,
};
use plab_core::solver::{
    conjugate_solution, manufactured_forcing, solve_p_harmonic, solve_p_poisson, CatalogueEntry, ExactSolution,
    TrigSeries,
};
use plab_core::{
    Ball, DirichletProblem, DyadicLadder, ExponentCtx, Grid2D, ScalarField, SmoothnessParams, SolverOptions, Vec2,
    VectorField,
};
use rand::Rng;
use serde_json::json;

const KNOWN_RED: [&str; 2] = ["AC9", "AC10"];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ctx(p: f64) -> ExponentCtx {
    ExponentCtx::new(p).unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn flux(u: &ScalarField, c: &ExponentCtx) -> VectorField {
    gradient(u).map(|q| a_map(c, q))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A manufactured `p`-Poisson problem: smooth `u*` with a non-zero mean
/// slope and a divergence-free perturbation of the flux.
struct Manufactured {
    u: ScalarField,
    forcing: VectorField,
}

fn manufactured(c: &ExponentCtx, g: &Grid2D, u_seed: u64, psi_seed: u64) -> Manufactured {
    let ustar = TrigSeries::random(u_seed, 3, 5.0, 0.5).with_linear(Vec2::new(1.0, 0.5), 0.0);
    let psi = TrigSeries::random(psi_seed, 3, 5.0, 0.3);
    let exact = ExactSolution::new(CatalogueEntry::Trig(ustar), c).unwrap();
    let (data, _) = exact.sample(g).unwrap();
    let forcing = manufactured_forcing(&exact, c, g, Some(&psi)).unwrap();
    let prob = DirichletProblem::new(*c, data, Some(forcing.clone())).unwrap();
    let u = solve_p_poisson(&prob, &opts()).unwrap().u;
    Manufactured { u, forcing }
}

// ---------------------------------------------------------------- AC1-AC3

fn ac1() -> Outcome {
    let a2 = alpha_exponent(2.0).unwrap();
    let e2 = eta_exponent(2.0).unwrap();
    let mut ok = (a2 - 1.0).abs() <= 1e-12 && (e2 - 1.0).abs() <= 1e-12;
    let mut worst: f64 = f64::INFINITY;
    for p in [2.0, 2.5, 3.0, 5.0, 10.0] {
        let margin = alpha_exponent(p).unwrap() - 1.0 / (p - 1.0);
        worst = worst.min(margin);
        ok &= margin >= 0.0;
    }
    let limit = alpha_exponent(1e6).unwrap() * 1e6 / 2.0;
    let target = (33f64.sqrt() - 3.0) / 4.0;
    ok &= (limit - target).abs() <= 1e-3;
    outcome(
        ok,
        format!("alpha(2)={a2}, eta(2)={e2}, min alpha-1/(p-1)={worst:.4}, alpha·p/2 at 1e6={limit:.6} vs {target:.6}"),
    )
}

fn brute_legendre(c: &ExponentCtx, a: f64, t: f64) -> f64 {
    let f = |s: f64| s * t - phi_shifted(c, a, s).unwrap();
    let mut hi = 1.0;
    while phi_shifted_derivative(c, a, hi).unwrap() < t {
        hi *= 2.0;
    }
    let (mut lo, g) = (0.0, (5f64.sqrt() - 1.0) / 2.0);
    for _ in 0..200 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    f(0.5 * (lo + hi))
}

fn ac2() -> Outcome {
    let mut worst_id: f64 = 0.0;
    let mut worst_legendre: f64 = 0.0;
    for p in [1.5, 2.0, 3.0, 4.5] {
        let c = ctx(p);
        let mut rng = seeded_rng(7);
        for _ in 0..10_000 {
            let r = 10f64.powf(rng.gen_range(-3.0..3.0));
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let q = Vec2::new(r * th.cos(), r * th.sin());
            let target = r.powf(p);
            worst_id = worst_id
                .max((a_map(&c, q).dot(q) - target).abs() / target)
                .max((v_map(&c, q).norm_sq() - target).abs() / target);
        }
        for i in 0..50 {
            for j in 0..50 {
                let a = 0.05 + 0.06 * i as f64;
                let t = 0.02 + 0.08 * j as f64;
                let exact = phi_conj_shifted(&c, a, t).unwrap();
                worst_legendre = worst_legendre.max((exact - brute_legendre(&c, a, t)).abs());
            }
        }
    }
    outcome(
        worst_id <= 1e-10 && worst_legendre <= 1e-6,
        format!("identity rel err {worst_id:.2e}, Legendre abs err {worst_legendre:.2e}"),
    )
}

fn ac3() -> Outcome {
    let mut worst: f64 = 0.0;
    for c0 in [0.1, 0.5, 1.0, 3.0, 10.0] {
        for beta in [0.1, 0.3, 0.5, 0.8, 0.95] {
            worst = worst.max(iterative_lemma_check(c0, beta, 500).unwrap());
        }
    }
    outcome(worst <= 1.0, format!("max ratio {worst:.4}"))
}

// ---------------------------------------------------------------- AC4

fn sine_l2_error(cells: usize) -> f64 {
    let c = ctx(2.0);
    let g = Grid2D::square(0.0, 1.0, cells).unwrap();
    let pi = std::f64::consts::PI;
    let exact = ExactSolution::new(CatalogueEntry::Trig(TrigSeries::product(1.0, pi, pi)), &c).unwrap();
    let (ue, _) = exact.sample(&g).unwrap();
    let forcing = manufactured_forcing(&exact, &c, &g, None).unwrap();
    let prob = DirichletProblem::new(c, ue.clone(), Some(forcing)).unwrap();
    let u = solve_p_poisson(&prob, &opts()).unwrap().u;
    let sq: f64 = (0..g.len()).map(|k| (u.at(k) - ue.at(k)).powi(2)).sum();
    (sq * g.h() * g.h()).sqrt()
}

fn ac4() -> Outcome {
    let ratio = sine_l2_error(64) / sine_l2_error(128);
    let c = ctx(3.0);
    let g = Grid2D::square(1.0, 2.0, 256).unwrap();
    let exact = ExactSolution::new(CatalogueEntry::Radial, &c).unwrap();
    let (data, ge) = exact.sample(&g).unwrap();
    let u = solve_p_harmonic(&c, &data, &opts()).unwrap().u;
    let gu = gradient(&u);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..g.len() {
        num += (gu.at(k) - ge.at(k)).norm_sq();
        den += ge.at(k).norm_sq();
    }
    let grad_err = (num / den).sqrt();
    outcome(
        (3.5..=4.5).contains(&ratio) && grad_err < 0.02,
        format!("p=2 refinement ratio {ratio:.3}, p=3 radial gradient error {grad_err:.2e}"),
    )
}

// ---------------------------------------------------------------- AC5, AC6

fn ac5() -> Outcome {
    let g = Grid2D::square(0.0, 1.0, 256).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 3.0, 4.5] {
        let c = ctx(p);
        let mut betas = Vec::new();
        for seed in 0..5u64 {
            let s = TrigSeries::random(seed, 4, 6.0, 1.0);
            let h = solve_p_harmonic(&c, &g.sample(|q| s.value(q)), &opts()).unwrap().u;
            let a_grad = flux(&h, &c);
            let mut rng = seeded_rng(100 + seed);
            for _ in 0..2 {
                let x = Vec2::new(rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7));
                let profile = decay_profile(&a_grad, x, 0.25, 0.5, 5, 1.0, Quantity::AGrad).unwrap();
                betas.push(fit_beta(&profile).beta);
            }
        }
        let m = median(betas);
        ok &= m >= 0.8 && (p != 2.0 || (m - 1.0).abs() <= 0.1);
        parts.push(format!("p={p}: median beta {m:.3}"));
    }
    outcome(ok, parts.join(", "))
}

fn profile_beta(f: &VectorField, q: Quantity) -> f64 {
    let profile: DecayProfile = decay_profile(f, Vec2::ZERO, 0.5, 0.5, 6, 1.0, q).unwrap();
    fit_beta(&profile).beta
}

fn ac6() -> Outcome {
    let c = ctx(1.5);
    let g = Grid2D::square(-1.0, 1.0, 256).unwrap();
    let h = solve_p_harmonic(&c, &g.sample(|q| q.x * q.x - q.y * q.y), &opts()).unwrap().u;
    let gh = gradient(&h);
    let grad_beta = profile_beta(&gh, Quantity::Grad);
    let flux_beta = profile_beta(&gh.map(|q| a_map(&c, q)), Quantity::AGrad);
    let eta3 = eta_exponent(3.0).unwrap();
    let conj = conjugate_solution(&h, &c).unwrap();
    let gz = gradient(&conj.z);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..g.len() {
        let q = g.node_position(k);
        if q.x.abs() < 0.8 && q.y.abs() < 0.8 {
            let back = a_map(&c.conjugate(), gz.at(k).rot90_inv());
            num += (back - gh.at(k)).norm();
            den += gh.at(k).norm();
        }
    }
    let round_trip = num / den;
    outcome(
        grad_beta >= 0.8 && flux_beta <= eta3 + 0.1 && round_trip <= 0.05,
        format!(
            "grad beta {grad_beta:.3}, A(grad) beta {flux_beta:.3} (eta(3)+0.1 = {:.3}), round trip L1 error {:.2e}",
            eta3 + 0.1,
            round_trip
        ),
    )
}

// ---------------------------------------------------------------- AC7, AC8

fn calibrate_validate(pairs: &[(f64, f64)]) -> (f64, f64) {
    let (train, check) = pairs.split_at(pairs.len() / 2);
    let c = max_ratio(train.iter().copied());
    (c, validate_ratio(check.iter().copied(), c, 1.2).rate())
}

fn ac7() -> Outcome {
    let c = ctx(3.0);
    let g = Grid2D::square(1.0, 2.0, 128).unwrap();
    let s = TrigSeries::random(11, 3, 5.0, 0.5).with_linear(Vec2::new(1.0, 0.5), 0.0);
    let h = solve_p_harmonic(&c, &g.sample(|q| s.value(q)), &opts()).unwrap().u;
    let gh = gradient(&h);
    let rh: Vec<(f64, f64)> = sample_balls(1, 20, &g, (0.1, 0.2), 2.05)
        .iter()
        .map(|b| {
            let r = reverse_holder_ratio(&gh, b, &c).unwrap();
            (r.lhs, r.rhs)
        })
        .collect();
    let problem = manufactured(&c, &g, 21, 22);
    let nc: Vec<(f64, f64)> = sample_balls(2, 20, &g, (0.2, 0.3), 1.05)
        .iter()
        .map(|b| nonlin_comparison_defect(&problem.u, &problem.forcing, b, &c, &opts()).unwrap())
        .collect();
    let (c_rh, rate_rh) = calibrate_validate(&rh);
    let (c_nc, rate_nc) = calibrate_validate(&nc);
    outcome(
        rate_rh >= 0.95 && rate_nc >= 0.95,
        format!(
            "reverse Hölder c={c_rh:.3} pass {:.0}%, comparison c={c_nc:.3} pass {:.0}%",
            100.0 * rate_rh,
            100.0 * rate_nc
        ),
    )
}

fn ac8() -> Outcome {
    const BETA: f64 = 0.9;
    let c = ctx(3.0);
    let g = Grid2D::square(1.0, 2.0, 128).unwrap();
    let suites: Vec<(VectorField, VectorField, Vec<Ball>)> = (0..5u64)
        .map(|s| {
            let m = manufactured(&c, &g, 100 + s, 200 + s);
            (flux(&m.u, &c), m.forcing, sample_balls(300 + s, 10, &g, (0.2, 0.3), 1.05))
        })
        .collect();
    let terms = |theta0: f64, train: bool| -> Vec<_> {
        suites
            .iter()
            .flat_map(|(a, f, balls)| {
                let chosen = if train { &balls[..2] } else { &balls[2..] };
                chosen.iter().map(move |b| theorem31_terms(a, f, b, &c, theta0).unwrap())
            })
            .collect()
    };
    let (theta0, constant) = [0.5, 0.25, 0.125]
        .into_iter()
        .map(|t| {
            let c = terms(t, true).iter().map(|x| x.required_constant(BETA)).fold(0.0, f64::max);
            (t, c)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let held_out = terms(theta0, false);
    let passed = held_out.iter().filter(|t| t.residual(BETA, constant) >= 0.0).count();
    let rate = passed as f64 / held_out.len() as f64;
    outcome(
        held_out.len() == 40 && rate >= 0.95,
        format!("theta0={theta0}, c={constant:.4}, residual >= 0 on {passed}/{}", held_out.len()),
    )
}

// ---------------------------------------------------------------- AC9-AC11

fn ac9() -> Outcome {
    let c = ctx(3.0);
    let rows = [
        SmoothnessParams::new(0.5, 2.0, 2.0, 1.5),
        SmoothnessParams::new(0.9, 1.2, 1.2, 1.5),
        SmoothnessParams::new(0.5, 1.0, f64::INFINITY, 1.5),
    ];
    let admissible: Vec<bool> = rows.iter().map(|r| embedding_check(r, c.p_conj())).collect();
    let ball = Ball::new(Vec2::new(1.5, 1.5), 0.25).unwrap();
    let mut maxima = vec![[0.0f64; 2]; rows.len()];
    for (gi, cells) in [128, 256].into_iter().enumerate() {
        let g = Grid2D::square(1.0, 2.0, cells).unwrap();
        for s in 0..10u64 {
            let m = manufactured(&c, &g, 400 + s, 500 + s);
            let a = flux(&m.u, &c);
            for (i, row) in rows.iter().enumerate() {
                if admissible[i] {
                    let r = transfer_ratio(&a, &m.forcing, &ball, row, 4, &c, SeminormKind::Besov).unwrap();
                    maxima[i][gi] = maxima[i][gi].max(r.ratio);
                }
            }
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if !admissible[i] {
            ok = false;
            parts.push(format!("(s={}, rho={}, q={}) fails the embedding at p'={}", row.s, row.rho, row.q, c.p_conj()));
            continue;
        }
        let [m128, m256] = maxima[i];
        let change = (m256 - m128).abs() / m128;
        ok &= m128.is_finite() && m256.is_finite() && change < 0.25;
        parts.push(format!("(s={}, rho={}, q={}) max {m128:.3} -> {m256:.3}", row.s, row.rho, row.q));
    }
    outcome(ok, parts.join("; "))
}

fn ac10() -> Outcome {
    let g = Grid2D::square(-1.0, 1.0, 512).unwrap();
    let ball = Ball::new(Vec2::ZERO, 0.5).unwrap();
    let ladder = DyadicLadder::for_ball(&ball, 6).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [0.3, 0.6] {
        let f = g.sample(|q| q.x.abs().powf(sigma));
        let table = oscillation_table(&f, &ball, 1.0, &ladder).unwrap();
        let short = table.truncated(4);
        let value = |t: &plab_core::besov::OscillationTable, s: f64| t.besov(s, f64::INFINITY, f64::INFINITY).value;
        let (lo, hi) = (sigma - 0.2, sigma + 0.2);
        let stable = (value(&table, lo) - value(&short, lo)).abs() / value(&short, lo);
        let growth = value(&table, hi) / value(&short, hi);
        ok &= stable < 0.05 && growth >= 1.5;
        parts.push(format!("sigma={sigma}: change {:.2}%, growth {growth:.3}", 100.0 * stable));
    }
    outcome(ok, parts.join(", "))
}

fn ac11() -> Outcome {
    let g = Grid2D::square(0.0, 1.0, 128).unwrap();
    let ball = Ball::new(Vec2::new(0.5, 0.5), 0.25).unwrap();
    let ladder = DyadicLadder::for_ball(&ball, 4).unwrap();
    let params = SmoothnessParams::new(0.5, 2.0, 2.0, 2.0);
    let field = |seed: u64| {
        let s = TrigSeries::random(seed, 4, 8.0, 1.0);
        g.sample(|q| s.gradient(q))
    };
    let (l1, r1) = power_transform_ratio(&field(1), &ball, &params, 1.0, &ladder).unwrap();
    let identity = (l1 - r1).abs() / r1;
    let alpha = ctx(3.0).p_conj() / 2.0;
    let suite_max = |suite: u64| {
        max_ratio((0..20).map(|k| power_transform_ratio(&field(1000 * (suite + 1) + k), &ball, &params, alpha, &ladder).unwrap()))
    };
    let (m1, m2) = (suite_max(0), suite_max(1));
    outcome(
        identity <= 1e-10 && rel_close(m1, m2, 0.2),
        format!("alpha=1 mismatch {identity:.1e}, suite maxima {m1:.3} and {m2:.3}"),
    )
}

// ---------------------------------------------------------------- AC12

fn run_plab(config: &Path, command: &str, out: &Path, jobs: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_plab"))
        .args([command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs])
        .status()
        .unwrap()
        .success()
}

fn ac12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "p": 3,
        "grid": {"nx": 193, "ny": 193, "x0": 1.0, "y0": 1.0, "h": 1.0 / 160.0},
        "forcing": {"manufactured": {
            "solution": {"random": {"modes": 3, "max_wavenumber": 5.0, "amplitude": 0.5, "linear": [1.0, 0.5]}},
            "psi": {"random": {"modes": 3, "max_wavenumber": 5.0, "amplitude": 0.3, "stream": 1}}
        }},
        "balls": {"sampler": {"count": 4, "radius_range": [0.21, 0.25], "margin": 2.05}},
        "smoothness": [{"s": 0.5, "rho": 2, "q": 2, "w": 1.5}, {"s": 0.5, "rho": 1, "q": "inf", "w": 1.5}],
        "scales": 4,
        "decay": {"K": 4},
        "seed": 12
    });
    let path = dir.path().join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    let files = [("decay", vec!["decay.csv", "decay_summary.json"]), ("transfer", vec!["transfer.csv", "transfer_summary.json"])];
    let mut ok = true;
    let mut compared = 0;
    for (command, names) in files {
        let runs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "4")]
            .into_iter()
            .map(|(tag, jobs)| {
                let out = dir.path().join(format!("{command}-{tag}"));
                ok &= run_plab(&path, command, &out, jobs);
                out
            })
            .collect();
        for name in names {
            let first = fs::read(runs[0].join(name)).unwrap_or_default();
            ok &= !first.is_empty();
            for other in &runs[1..] {
                ok &= fs::read(other.join(name)).unwrap_or_default() == first;
                compared += 1;
            }
        }
    }
    outcome(ok, format!("{compared} file comparisons across repeated and --jobs 4 runs"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("AC1", Duration::from_secs(1), ac1),
        ("AC2", Duration::from_secs(10), ac2),
        ("AC3", Duration::from_secs(1), ac3),
        ("AC4", Duration::from_secs(300), ac4),
        ("AC5", Duration::from_secs(600), ac5),
        ("AC6", Duration::from_secs(300), ac6),
        ("AC7", Duration::from_secs(600), ac7),
        ("AC8", Duration::from_secs(600), ac8),
        ("AC9", Duration::from_secs(900), ac9),
        ("AC10", Duration::from_secs(60), ac10),
        ("AC11", Duration::from_secs(300), ac11),
        ("AC12", Duration::from_secs(300), ac12),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let strict = std::env::var("PLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = Vec::new();
    for (name, budget, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == name) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = result.passed && in_time;
        let timing = if in_time {
            format!("{:.1} s", elapsed.as_secs_f64())
        } else {
            format!("{:.1} s, over the {} s budget", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!("{name:<5} {} ({timing}) {}", if passed { "PASS" } else { "FAIL" }, result.detail);
        if !passed && (strict || !KNOWN_RED.contains(&name)) {
            unexpected.push(name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
