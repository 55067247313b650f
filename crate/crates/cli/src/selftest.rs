//! Built-in invariant suite. Every check is seeded, so the report is the same
//! on every run.

use plab_core::calibration::seeded_rng;
use plab_core::decay::iterative_lemma_check;
use plab_core::orlicz::{
    a_inv, a_map, alpha_exponent, da_matrix, eta_exponent, phi_conj_shifted, phi_shifted, phi_shifted_derivative,
    t_alpha, v_inv, v_map,
};
use plab_core::solver::{solve_p_harmonic, TrigSeries};
use plab_core::{Ball, ExponentCtx, Grid2D, SolverOptions, Vec2};
use rand::Rng;

use crate::{CliError, Fault};

const SAMPLES: usize = 2000;
const EXPONENTS: [f64; 4] = [1.5, 2.0, 3.0, 4.5];

type FluxMap = fn(&ExponentCtx, Vec2) -> Vec2;

fn flipped_a_map(ctx: &ExponentCtx, q: Vec2) -> Vec2 {
    let v = a_map(ctx, q);
    Vec2::new(-v.x, -v.y)
}

/// One named check with the map it should treat as `A`.
struct Check {
    name: &'static str,
    run: fn(FluxMap) -> Result<(), String>,
}

const CHECKS: [Check; 10] = [
    Check { name: "exponents", run: exponents },
    Check { name: "flux_identity", run: flux_identity },
    Check { name: "v_identity", run: v_identity },
    Check { name: "monotonicity", run: monotonicity },
    Check { name: "inverse_maps", run: inverse_maps },
    Check { name: "power_group_law", run: power_group_law },
    Check { name: "jacobian_spectrum", run: jacobian_spectrum },
    Check { name: "legendre_transform", run: legendre_transform },
    Check { name: "iterative_lemma", run: iterative_lemma },
    Check { name: "field_symmetry", run: field_symmetry },
];

const SOLVE_CHECK: Check = Check { name: "affine_solve", run: affine_solve };

fn samples(seed: u64) -> impl Iterator<Item = (Vec2, Vec2)> {
    let mut rng = seeded_rng(seed);
    (0..SAMPLES).map(move |_| {
        let mut draw = || {
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Vec2::new(r * a.cos(), r * a.sin())
        };
        (draw(), draw())
    })
}

fn ctx(p: f64) -> ExponentCtx {
    ExponentCtx::new(p).expect("valid exponent")
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn exponents(_: FluxMap) -> Result<(), String> {
    let a2 = alpha_exponent(2.0).map_err(|e| e.to_string())?;
    let e2 = eta_exponent(2.0).map_err(|e| e.to_string())?;
    if (a2 - 1.0).abs() > 1e-12 || (e2 - 1.0).abs() > 1e-12 {
        return Err(format!("alpha(2) = {a2}, eta(2) = {e2}"));
    }
    for p in [2.0, 2.5, 3.0, 5.0, 10.0] {
        let a = alpha_exponent(p).map_err(|e| e.to_string())?;
        if a < 1.0 / (p - 1.0) {
            return Err(format!("alpha({p}) = {a} < 1/(p-1)"));
        }
    }
    Ok(())
}

fn flux_identity(a: FluxMap) -> Result<(), String> {
    for p in EXPONENTS {
        let c = ctx(p);
        for (q, _) in samples(1) {
            let (lhs, rhs) = (a(&c, q).dot(q), q.norm().powf(p));
            if !close(lhs, rhs, 1e-10) {
                return Err(format!("p={p}: A(Q)·Q = {lhs}, |Q|^p = {rhs}"));
            }
        }
    }
    Ok(())
}

fn v_identity(_: FluxMap) -> Result<(), String> {
    for p in EXPONENTS {
        let c = ctx(p);
        for (q, _) in samples(2) {
            let (lhs, rhs) = (v_map(&c, q).norm_sq(), q.norm().powf(p));
            if !close(lhs, rhs, 1e-10) {
                return Err(format!("p={p}: |V(Q)|² = {lhs}, |Q|^p = {rhs}"));
            }
        }
    }
    Ok(())
}

fn monotonicity(a: FluxMap) -> Result<(), String> {
    for p in EXPONENTS {
        let c = ctx(p);
        for (x, y) in samples(3) {
            let m = (a(&c, x) - a(&c, y)).dot(x - y);
            if !(m > 0.0) {
                return Err(format!("p={p}: (A(P)−A(Q))·(P−Q) = {m}"));
            }
        }
    }
    Ok(())
}

fn inverse_maps(_: FluxMap) -> Result<(), String> {
    for p in EXPONENTS {
        let c = ctx(p);
        for (q, _) in samples(4) {
            let ea = (a_inv(&c, a_map(&c, q)) - q).norm();
            let ev = (v_inv(&c, v_map(&c, q)) - q).norm();
            if ea > 1e-10 * q.norm() || ev > 1e-10 * q.norm() {
                return Err(format!("p={p}: inverse errors {ea:e}, {ev:e}"));
            }
        }
    }
    Ok(())
}

fn power_group_law(_: FluxMap) -> Result<(), String> {
    for (alpha, beta) in [(0.5, 3.0), (1.5, 0.4), (2.0, 0.75)] {
        for (q, _) in samples(5) {
            let twice = t_alpha(alpha, q).and_then(|v| t_alpha(beta, v)).map_err(|e| e.to_string())?;
            let once = t_alpha(alpha * beta, q).map_err(|e| e.to_string())?;
            if (twice - once).norm() > 1e-10 * once.norm() {
                return Err(format!("T_{beta}∘T_{alpha} differs from T_{} at {q:?}", alpha * beta));
            }
        }
    }
    Ok(())
}

fn jacobian_spectrum(_: FluxMap) -> Result<(), String> {
    for p in EXPONENTS {
        let c = ctx(p);
        for (q, _) in samples(6) {
            let m = da_matrix(&c, q).map_err(|e| e.to_string())?;
            let [lo, hi] = m.sym_eigenvalues();
            let s = q.norm().powf(p - 2.0);
            let (want_lo, want_hi) = if p < 2.0 { ((p - 1.0) * s, s) } else { (s, (p - 1.0) * s) };
            if !close(lo, want_lo, 1e-9) || !close(hi, want_hi, 1e-9) {
                return Err(format!("p={p}: eigenvalues {lo}, {hi}, expected {want_lo}, {want_hi}"));
            }
        }
    }
    Ok(())
}

/// `sup_s (s t − φ_a(s))` by bracketing the stationary point and golden
/// section search.
fn brute_legendre(c: &ExponentCtx, a: f64, t: f64) -> f64 {
    let f = |s: f64| s * t - phi_shifted(c, a, s).expect("non-negative");
    let mut hi = 1.0;
    while phi_shifted_derivative(c, a, hi).expect("non-negative") < t {
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

fn legendre_transform(_: FluxMap) -> Result<(), String> {
    for p in EXPONENTS {
        let c = ctx(p);
        for i in 0..8 {
            for j in 0..8 {
                let a = 0.1 + 0.4 * i as f64;
                let t = 0.05 + 0.5 * j as f64;
                let exact = phi_conj_shifted(&c, a, t).map_err(|e| e.to_string())?;
                let brute = brute_legendre(&c, a, t);
                if (exact - brute).abs() > 1e-6 * exact.max(1.0) {
                    return Err(format!("p={p}, a={a}, t={t}: {exact} vs {brute}"));
                }
            }
        }
    }
    Ok(())
}

fn iterative_lemma(_: FluxMap) -> Result<(), String> {
    for c0 in [0.1, 0.5, 1.0, 3.0, 10.0] {
        for beta in [0.1, 0.3, 0.5, 0.8, 0.95] {
            let r = iterative_lemma_check(c0, beta, 500).map_err(|e| e.to_string())?;
            if r > 1.0 {
                return Err(format!("c0={c0}, beta={beta}: ratio {r}"));
            }
        }
    }
    Ok(())
}

fn field_symmetry(_: FluxMap) -> Result<(), String> {
    let g = Grid2D::square(-1.0, 1.0, 40).map_err(|e| e.to_string())?;
    let ball = Ball::new(Vec2::ZERO, 0.6).map_err(|e| e.to_string())?;
    for seed in 0..5 {
        let s = TrigSeries::random(seed, 3, 6.0, 1.0);
        let f = g.sample(|q| s.value(q));
        let mirrored = g.sample(|q| s.value(Vec2::new(-q.x, q.y)));
        let rotated = g.sample(|q| s.value(Vec2::new(-q.y, q.x)));
        for w in [1.0, 2.0, 3.0] {
            let base = f.oscillation(&ball, w).map_err(|e| e.to_string())?;
            for (name, other) in [
                ("reflection", mirrored.oscillation(&ball, w)),
                ("rotation", rotated.oscillation(&ball, w)),
                ("constant shift", f.offset(3.5).oscillation(&ball, w)),
            ] {
                let v = other.map_err(|e| e.to_string())?;
                if !close(v, base, 1e-10) {
                    return Err(format!("{name}: oscillation {v} vs {base} (seed {seed}, w={w})"));
                }
            }
            let scaled = f.scaled(-2.5).oscillation(&ball, w).map_err(|e| e.to_string())?;
            if !close(scaled, 2.5 * base, 1e-10) {
                return Err(format!("scaling: {scaled} vs {} (seed {seed}, w={w})", 2.5 * base));
            }
        }
    }
    Ok(())
}

fn affine_solve(_: FluxMap) -> Result<(), String> {
    let g = Grid2D::square(0.0, 1.0, 12).map_err(|e| e.to_string())?;
    let data = g.sample(|q| 0.7 * q.x - 1.3 * q.y + 0.2);
    for p in [1.5, 3.0] {
        let u = solve_p_harmonic(&ctx(p), &data, &SolverOptions::default())
            .map_err(|e| e.to_string())?
            .u;
        let err = (0..g.len()).map(|k| (u.at(k) - data.at(k)).abs()).fold(0.0, f64::max);
        if err > 1e-9 {
            return Err(format!("p={p}: affine data moved by {err:e}"));
        }
    }
    Ok(())
}

/// Run every check; returns the report lines and the names that failed.
pub fn report(fault: Option<Fault>) -> (Vec<String>, Vec<&'static str>) {
    let flux: FluxMap = match fault {
        Some(Fault::AMapSign) => flipped_a_map,
        None => a_map,
    };
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for check in CHECKS.iter().chain([&SOLVE_CHECK]) {
        match (check.run)(flux) {
            Ok(()) => lines.push(format!("PASS {}", check.name)),
            Err(why) => {
                lines.push(format!("FAIL {}: {why}", check.name));
                failed.push(check.name);
            }
        }
    }
    let total = CHECKS.len() + 1;
    lines.push(format!("selftest: {}/{total} passed", total - failed.len()));
    (lines, failed)
}

pub fn run(fault: Option<Fault>) -> Result<(), CliError> {
    let (lines, failed) = report(fault);
    for l in &lines {
        println!("{l}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Selftest(failed.join(", ")))
    }
}
