//! Measurements of oscillation decay and of the comparison inequalities
//! behind it: decay profiles with fitted exponents, non-degeneracy
//! classification, reverse Hölder ratios, comparison defects, the iteration
//! lemma, the oscillation estimate with forcing and the transfer ratio.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::besov::{
    besov_seminorm, embedding_check, embedding_check_triebel, triebel_seminorm, DyadicLadder,
    SmoothnessParams,
};
use crate::error::{Error, Result};
use crate::field::{
    a_average, gradient, nondegeneracy_ratio, Ball, Field, FieldValue, ScalarField, VectorField,
};
use crate::orlicz::{a_map, h_remainder, phi_conj_shifted, v_map, ExponentCtx, Vec2};
use crate::solver::{comparison_solve, solve_linearized, DirichletProblem, SolverOptions};

/// Oscillations below this are treated as zero.
pub const ZERO_OSCILLATION: f64 = 1e-12;

/// Minimum number of radii in a profile.
pub const MIN_PROFILE_LEN: usize = 4;

/// Default non-degeneracy threshold; the theory leaves it unspecified.
pub const DEFAULT_EPSILON_DG: f64 = 1e-2;

/// Which field a profile measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "A_grad")]
    AGrad,
    #[serde(rename = "grad")]
    Grad,
    #[serde(rename = "V_grad")]
    VGrad,
    F,
    #[serde(rename = "scalar")]
    Scalar,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::AGrad => "A_grad",
            Quantity::Grad => "grad",
            Quantity::VGrad => "V_grad",
            Quantity::F => "F",
            Quantity::Scalar => "scalar",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub center: Vec2,
    pub t0: f64,
    pub theta: f64,
    /// `t_k = θ^k t0`, strictly decreasing.
    pub radii: Vec<f64>,
    pub osc_values: Vec<f64>,
    pub w: f64,
    pub quantity: Quantity,
    /// Radii dropped by the resolution guard.
    pub dropped: usize,
}

/// `osc_w g(x, θ^k t0)` for `k < K`, dropping radii below four grid spacings.
pub fn decay_profile<T: FieldValue>(
    g: &Field<T>,
    x: Vec2,
    t0: f64,
    theta: f64,
    scales: usize,
    w: f64,
    quantity: Quantity,
) -> Result<DecayProfile> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Parameter(format!("theta must lie in (0,1), got {theta}")));
    }
    let outer = Ball::new(x, t0)?;
    if !g.grid().contains_ball(&outer) {
        return Err(Error::Parameter(format!(
            "ball of radius {t0} at ({}, {}) leaves the grid",
            x.x, x.y
        )));
    }
    let h = g.grid().h();
    let mut radii = Vec::new();
    let mut osc_values = Vec::new();
    let mut dropped = 0;
    for k in 0..scales {
        let t = t0 * theta.powi(k as i32);
        if t < 4.0 * h * (1.0 - 1e-12) {
            dropped += 1;
            continue;
        }
        radii.push(t);
        osc_values.push(g.oscillation(&Ball::new(x, t)?, w)?);
    }
    if dropped > 0 {
        log::warn!("decay profile at ({}, {}): {dropped} radii below 4h dropped", x.x, x.y);
    }
    if radii.len() < MIN_PROFILE_LEN {
        return Err(Error::InsufficientScales(format!(
            "{} usable radii, at least {MIN_PROFILE_LEN} required",
            radii.len()
        )));
    }
    Ok(DecayProfile {
        center: x,
        t0,
        theta,
        radii,
        osc_values,
        w,
        quantity,
        dropped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    /// Every oscillation vanished; the exponent is reported as `+∞`.
    ExactDecay,
    /// Fewer than four non-zero values remain.
    Saturated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Largest absolute residual of the log-log fit.
    pub max_deviation: f64,
    pub points: usize,
    pub status: FitStatus,
}

/// Least-squares slope of `log osc` against `log t`.
pub fn fit_beta(profile: &DecayProfile) -> BetaFit {
    fit_log_log(&profile.radii, &profile.osc_values)
}

/// Least-squares slope of `log y` against `log x` over pairs with `y` above
/// [`ZERO_OSCILLATION`].
pub fn fit_log_log(x: &[f64], y: &[f64]) -> BetaFit {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v >= ZERO_OSCILLATION)
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    let blank = |status, beta| BetaFit {
        beta,
        intercept: f64::NAN,
        r2: f64::NAN,
        max_deviation: f64::NAN,
        points: pts.len(),
        status,
    };
    if pts.is_empty() {
        return blank(FitStatus::ExactDecay, f64::INFINITY);
    }
    if pts.len() < MIN_PROFILE_LEN {
        return blank(FitStatus::Saturated, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - beta * p.0).powi(2)).sum();
    let max_deviation = pts
        .iter()
        .map(|p| (p.1 - intercept - beta * p.0).abs())
        .fold(0.0, f64::max);
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    BetaFit {
        beta,
        intercept,
        r2,
        max_deviation,
        points: pts.len(),
        status: FitStatus::Fitted,
    }
}

/// Summary of one profile against the decay law `osc(t_k) ≤ c (t_k/t0)^β osc(t0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub fitted_beta: f64,
    pub fit: BetaFit,
    pub per_step_ratios: Vec<f64>,
    /// Smallest `c` for which the decay law holds on this profile.
    pub decay_constant: f64,
    /// `c (t_k/t0)^β osc(t0) − osc(t_k)` per radius, with the constant above.
    pub inequality_residuals: Vec<f64>,
    pub epsilon_dg_used: f64,
    pub classification: Vec<Classification>,
}

impl DecayReport {
    pub fn new(profile: &DecayProfile, beta: f64, epsilon_dg: f64, classification: Vec<Classification>) -> Self {
        let fit = fit_beta(profile);
        let osc = &profile.osc_values;
        let per_step_ratios = osc
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect();
        let t0 = profile.radii[0];
        let law: Vec<f64> = profile.radii.iter().map(|t| (t / t0).powf(beta) * osc[0]).collect();
        let decay_constant = crate::calibration::max_ratio(osc.iter().copied().zip(law.iter().copied()));
        let inequality_residuals = law.iter().zip(osc).map(|(l, o)| decay_constant * l - o).collect();
        Self {
            fitted_beta: fit.beta,
            fit,
            per_step_ratios,
            decay_constant,
            inequality_residuals,
            epsilon_dg_used: epsilon_dg,
            classification,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NonDegenerate,
    Degenerate,
    DegenerateZero,
}

/// Non-degenerate iff `⨍|V(g) − ⟨V(g)⟩|² ≤ ε_DG ⨍|V(g)|²` on `B`.
pub fn classify_ball(g: &VectorField, ball: &Ball, ctx: &ExponentCtx, epsilon_dg: f64) -> Result<Classification> {
    match nondegeneracy_ratio(g, ball, ctx) {
        Ok(r) if r <= epsilon_dg => Ok(Classification::NonDegenerate),
        Ok(_) => Ok(Classification::Degenerate),
        Err(Error::DegenerateZero) => Ok(Classification::DegenerateZero),
        Err(e) => Err(e),
    }
}

/// Two sides of an inequality and their quotient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioOutcome {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, `0` when both vanish, `+∞` when only `rhs` does.
    pub ratio: f64,
    pub anomaly: bool,
}

impl RatioOutcome {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        const TINY: f64 = 1e-14;
        if rhs < TINY {
            if lhs < TINY {
                return Self {
                    lhs,
                    rhs,
                    ratio: 0.0,
                    anomaly: false,
                };
            }
            return Self {
                lhs,
                rhs,
                ratio: f64::INFINITY,
                anomaly: true,
            };
        }
        Self {
            lhs,
            rhs,
            ratio: lhs / rhs,
            anomaly: false,
        }
    }
}

/// `osc_{p'} A(∇h)` on `B` against `osc_1 A(∇h)` on `2B`.
pub fn reverse_holder_ratio(h_grad: &VectorField, ball: &Ball, ctx: &ExponentCtx) -> Result<RatioOutcome> {
    let doubled = ball.scaled(2.0)?;
    if !h_grad.grid().contains_ball(&doubled) {
        return Err(Error::Parameter("the doubled ball must lie inside the grid".into()));
    }
    let flux = h_grad.map(|q| a_map(ctx, q));
    let lhs = flux.oscillation(ball, ctx.p_conj())?;
    let rhs = flux.oscillation(&doubled, 1.0)?;
    Ok(RatioOutcome::new(lhs, rhs))
}

fn ball_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    s / n as f64
}

/// `(⨍_B |V(∇u) − V(∇h)|², ⨍_B φ*_{|A(∇u)|}(|F − ⟨F⟩_B|))` with `h` the
/// `p`-harmonic replacement of `u` on `B`.
pub fn nonlin_comparison_defect(
    u: &ScalarField,
    forcing: &VectorField,
    ball: &Ball,
    ctx: &ExponentCtx,
    opts: &SolverOptions,
) -> Result<(f64, f64)> {
    let h = comparison_solve(u, ball, ctx, opts)?.u;
    let gu = gradient(u);
    let gh = gradient(&h);
    let nodes = u.grid().nodes_in_ball(ball);
    let f_mean = forcing.ball_average(ball)?;
    let lhs = ball_mean(nodes.iter().map(|&k| (v_map(ctx, gu.at(k)) - v_map(ctx, gh.at(k))).norm_sq()));
    let rhs = nodes
        .iter()
        .map(|&k| {
            let shift = a_map(ctx, gu.at(k)).norm();
            phi_conj_shifted(ctx, shift, (forcing.at(k) - f_mean).norm())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((lhs, ball_mean(rhs.into_iter())))
}

/// Terms of the linear comparison estimate around `Q = ⟨∇u⟩^A_B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearComparison {
    /// `|Q|^{(p−2)p'} ⨍_B |∇u − ∇z|^{p'}`
    pub lhs: f64,
    /// `⨍_B |H(∇u, Q)|^{p'}`
    pub h_term: f64,
    /// `⨍_B |F − ⟨F⟩_B|^{p'}`
    pub f_term: f64,
    pub q: Vec2,
}

/// Compare `u` with the solution `z` of `−div(DA(Q)∇z) = 0`, `z = u` off `B`.
/// A vanishing `A`-average yields [`Error::DegenerateZero`].
pub fn linear_comparison_defect(
    u: &ScalarField,
    forcing: &VectorField,
    ball: &Ball,
    ctx: &ExponentCtx,
    opts: &SolverOptions,
) -> Result<LinearComparison> {
    let gu = gradient(u);
    let q = a_average(&gu, ball, ctx)?;
    let scale = gu.max_magnitude();
    if q.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateZero);
    }
    let prob = DirichletProblem::ball(*ctx, u.clone(), None, ball)?;
    let z = solve_linearized(&prob, q, opts)?;
    let gz = gradient(&z);
    let pc = ctx.p_conj();
    let nodes = u.grid().nodes_in_ball(ball);
    let f_mean = forcing.ball_average(ball)?;
    let weight = q.norm().powf((ctx.p() - 2.0) * pc);
    let lhs = weight * ball_mean(nodes.iter().map(|&k| (gu.at(k) - gz.at(k)).norm().powf(pc)));
    let h_vals = nodes
        .iter()
        .map(|&k| h_remainder(ctx, gu.at(k), q).map(|v| v.norm().powf(pc)))
        .collect::<Result<Vec<_>>>()?;
    let f_term = ball_mean(nodes.iter().map(|&k| (forcing.at(k) - f_mean).norm().powf(pc)));
    Ok(LinearComparison {
        lhs,
        h_term: ball_mean(h_vals.into_iter()),
        f_term,
        q,
    })
}

/// Largest `b_m / (2^{-mβ} exp(c0/(1 − 2^{-β})))` along the extremal sequence
/// `b_0 = 1`, `b_m = c0 2^{-mβ} Σ_{k<m} b_k`, for `m ≤ M`.
pub fn iterative_lemma_check(c0: f64, beta: f64, m_max: usize) -> Result<f64> {
    if !(c0 > 0.0 && beta > 0.0) || m_max < 2 {
        return Err(Error::Parameter(format!(
            "need c0 > 0, beta > 0, M >= 2; got {c0}, {beta}, {m_max}"
        )));
    }
    let bound = (c0 / (1.0 - 2f64.powf(-beta))).exp();
    let mut sum = 1.0;
    let mut worst = 1.0 / bound;
    for m in 1..=m_max {
        let decay = 2f64.powf(-(m as f64) * beta);
        let b = c0 * decay * sum;
        sum += b;
        worst = worst.max(b / (decay * bound));
    }
    Ok(worst)
}

/// Ingredients of `osc_{p'}A(∇u)(θ0 B) ≤ θ0^β osc_{p'}A(∇u)(B) + c osc_{p'}F(B)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Terms {
    pub theta0: f64,
    pub lhs: f64,
    pub decay_term: f64,
    pub forcing_term: f64,
}

impl Theorem31Terms {
    /// Right side minus left side.
    pub fn residual(&self, beta: f64, c: f64) -> f64 {
        self.theta0.powf(beta) * self.decay_term + c * self.forcing_term - self.lhs
    }

    /// Smallest `c` making the residual non-negative (`0` if none is needed).
    pub fn required_constant(&self, beta: f64) -> f64 {
        let excess = self.lhs - self.theta0.powf(beta) * self.decay_term;
        if excess <= 0.0 {
            0.0
        } else if self.forcing_term > 0.0 {
            excess / self.forcing_term
        } else {
            f64::INFINITY
        }
    }
}

pub fn theorem31_terms(
    a_grad: &VectorField,
    forcing: &VectorField,
    ball: &Ball,
    ctx: &ExponentCtx,
    theta0: f64,
) -> Result<Theorem31Terms> {
    if !(theta0 > 0.0 && theta0 < 1.0) {
        return Err(Error::Parameter(format!("theta0 must lie in (0,1), got {theta0}")));
    }
    let pc = ctx.p_conj();
    Ok(Theorem31Terms {
        theta0,
        lhs: a_grad.oscillation(&ball.scaled(theta0)?, pc)?,
        decay_term: a_grad.oscillation(ball, pc)?,
        forcing_term: forcing.oscillation(ball, pc)?,
    })
}

/// Residual of the oscillation estimate with a given constant `c`.
pub fn theorem31_residual(
    a_grad: &VectorField,
    forcing: &VectorField,
    ball: &Ball,
    ctx: &ExponentCtx,
    theta0: f64,
    beta: f64,
    c: f64,
) -> Result<f64> {
    Ok(theorem31_terms(a_grad, forcing, ball, ctx, theta0)?.residual(beta, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormKind {
    Besov,
    Triebel,
}

/// `(|A(∇u)|_{B}, |F|_{2B} + osc_{p'}A(∇u)(2B))` for one parameter row.
pub fn transfer_ratio(
    a_grad: &VectorField,
    forcing: &VectorField,
    ball: &Ball,
    params: &SmoothnessParams,
    scales: usize,
    ctx: &ExponentCtx,
    kind: SeminormKind,
) -> Result<RatioOutcome> {
    let pc = ctx.p_conj();
    let admissible = match kind {
        SeminormKind::Besov => embedding_check(params, pc),
        SeminormKind::Triebel => embedding_check_triebel(params, pc),
    };
    if !admissible {
        return Err(Error::Parameter(format!(
            "parameters (s={}, rho={}, q={}) fail the embedding condition for p' = {pc}",
            params.s, params.rho, params.q
        )));
    }
    let doubled = ball.scaled(2.0)?;
    if !a_grad.grid().contains_ball(&doubled) {
        return Err(Error::Parameter("the doubled ball must lie inside the grid".into()));
    }
    let inner = DyadicLadder::for_ball(ball, scales)?;
    let outer = DyadicLadder::for_ball(&doubled, scales)?;
    let seminorm = |f: &VectorField, b: &Ball, l: &DyadicLadder| match kind {
        SeminormKind::Besov => besov_seminorm(f, b, params, l),
        SeminormKind::Triebel => triebel_seminorm(f, b, params, l),
    };
    let lhs = seminorm(a_grad, ball, &inner)?;
    let rhs = seminorm(forcing, &doubled, &outer)? + a_grad.oscillation(&doubled, pc)?;
    Ok(RatioOutcome::new(lhs, rhs))
}

/// One line of the per-ball decay CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub center_x: f64,
    pub center_y: f64,
    pub t0: f64,
    pub theta: f64,
    pub k: usize,
    pub t_k: f64,
    pub osc: f64,
    pub quantity: Quantity,
    pub w: f64,
}

impl DecayProfile {
    pub fn rows(&self) -> Vec<DecayRow> {
        self.radii
            .iter()
            .zip(&self.osc_values)
            .map(|(&t, &osc)| DecayRow {
                center_x: self.center.x,
                center_y: self.center.y,
                t0: self.t0,
                theta: self.theta,
                k: ((t / self.t0).ln() / self.theta.ln()).round() as usize,
                t_k: t,
                osc,
                quantity: self.quantity,
                w: self.w,
            })
            .collect()
    }
}

/// Shortest decimal that reads back to the same `f64` is not guaranteed to
/// have a fixed width; reports use 17 significant digits instead.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Decay rows as CSV, sorted by `(center, t0, k, quantity)`, with the seed in
/// a leading comment line.
pub fn write_decay_csv<W: Write>(out: &mut W, rows: &[DecayRow], seed: u64) -> Result<()> {
    let mut sorted: Vec<&DecayRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (a.center_x, a.center_y, a.t0, a.k)
            .partial_cmp(&(b.center_x, b.center_y, b.t0, b.k))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.quantity.cmp(&b.quantity))
    });
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "center_x,center_y,t0,theta,k,t_k,osc,quantity,w")?;
    for r in sorted {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(r.center_x),
            fmt17(r.center_y),
            fmt17(r.t0),
            fmt17(r.theta),
            r.k,
            fmt17(r.t_k),
            fmt17(r.osc),
            r.quantity.as_str(),
            fmt17(r.w)
        )?;
    }
    Ok(())
}
