//! Subcommand drivers.

use std::collections::BTreeMap;
use std::path::Path;

use log::{info, warn};
use plab_core::besov::{embedding_check, embedding_check_triebel, oscillation_table, OscillationTable};
use plab_core::decay::{
    classify_ball, decay_profile, fit_beta, transfer_ratio, write_decay_csv, Classification, DecayProfile,
    DecayReport, DecayRow, FitStatus, Quantity, SeminormKind,
};
use plab_core::field::gradient;
use plab_core::field::write_dump;
use plab_core::orlicz::a_map;
use plab_core::{Ball, DyadicLadder, Error, ScalarField, SmoothnessParams, Vec2, VectorField};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GridSpec, Loaded};
use crate::inputs::{self, Inputs};
use crate::output::{num, opt_num, write_json, write_plot_table, Csv};
use crate::{CliError, RunOptions};

pub struct Context<'a> {
    pub loaded: &'a Loaded,
    pub out: &'a Path,
    pub opts: &'a RunOptions,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.loaded.config.effective_seed()
    }

    /// Run `f` on `--jobs` workers; results keep the input order.
    fn par_map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Result<Vec<U>, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.opts.jobs)
            .build()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
        Ok(pool.install(|| items.par_iter().map(f).collect()))
    }
}

/// A field of either rank, as measured by the decay and seminorm commands.
#[derive(Clone, Copy)]
enum Measured<'a> {
    Scalar(&'a ScalarField),
    Vector(&'a VectorField),
}

impl Measured<'_> {
    fn profile(&self, x: Vec2, t0: f64, theta: f64, k: usize, w: f64, q: Quantity) -> plab_core::Result<DecayProfile> {
        match self {
            Measured::Scalar(f) => decay_profile(*f, x, t0, theta, k, w, q),
            Measured::Vector(f) => decay_profile(*f, x, t0, theta, k, w, q),
        }
    }

    fn table(&self, ball: &Ball, w: f64, ladder: &DyadicLadder) -> plab_core::Result<OscillationTable> {
        match self {
            Measured::Scalar(f) => oscillation_table(*f, ball, w, ladder),
            Measured::Vector(f) => oscillation_table(*f, ball, w, ladder),
        }
    }
}

/// Owned copies of every quantity a command may ask for.
struct QuantityFields {
    u: ScalarField,
    grad: VectorField,
    a_grad: VectorField,
    v_grad: VectorField,
    forcing: Option<VectorField>,
}

impl QuantityFields {
    fn new(inputs: &Inputs) -> Self {
        Self {
            u: inputs.u.clone(),
            grad: inputs.grad.clone(),
            a_grad: inputs.a_grad(),
            v_grad: inputs.v_grad(),
            forcing: inputs.forcing.clone(),
        }
    }

    fn get(&self, q: Quantity) -> Result<Measured<'_>, CliError> {
        Ok(match q {
            Quantity::AGrad => Measured::Vector(&self.a_grad),
            Quantity::Grad => Measured::Vector(&self.grad),
            Quantity::VGrad => Measured::Vector(&self.v_grad),
            Quantity::Scalar => Measured::Scalar(&self.u),
            Quantity::F => Measured::Vector(
                self.forcing
                    .as_ref()
                    .ok_or_else(|| CliError::Config("quantity F requested but no forcing is configured".into()))?,
            ),
        })
    }
}

/// Reason codes for balls and rows that were not measured.
fn guard_reason(e: &Error) -> Option<&'static str> {
    match e {
        Error::InsufficientScales(_) => Some("insufficient_scales"),
        Error::InsufficientResolution { .. } => Some("insufficient_resolution"),
        _ => None,
    }
}

fn eps_key(e: f64) -> String {
    format!("{e:e}")
}

fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::NonDegenerate => "non_degenerate",
        Classification::Degenerate => "degenerate",
        Classification::DegenerateZero => "degenerate_zero",
    }
}

fn fit_status_name(s: FitStatus) -> &'static str {
    match s {
        FitStatus::Fitted => "fitted",
        FitStatus::ExactDecay => "exact_decay",
        FitStatus::Saturated => "saturated",
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

// ---------------------------------------------------------------- solve

#[derive(Serialize)]
struct ErrorNorms {
    l2: f64,
    l2_relative: f64,
    max: f64,
    grad_l2_relative: f64,
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    seed: u64,
    p: f64,
    grid: GridSpec,
    unknowns: usize,
    converged: bool,
    final_residual: f64,
    iterations: &'a [plab_core::solver::IterationRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorNorms>,
}

fn error_norms(u: &ScalarField, grad: &VectorField, exact: &plab_core::solver::ExactSolution) -> Result<ErrorNorms, CliError> {
    let (ue, ge) = exact.sample(u.grid())?;
    let h2 = u.grid().h().powi(2);
    let (mut e2, mut n2, mut emax, mut ge2, mut gn2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..u.grid().len() {
        let d = u.at(k) - ue.at(k);
        e2 += d * d;
        n2 += ue.at(k).powi(2);
        emax = emax.max(d.abs());
        ge2 += (grad.at(k) - ge.at(k)).norm_sq();
        gn2 += ge.at(k).norm_sq();
    }
    let rel = |a: f64, b: f64| if b > 0.0 { (a / b).sqrt() } else { a.sqrt() };
    Ok(ErrorNorms {
        l2: (h2 * e2).sqrt(),
        l2_relative: rel(e2, n2),
        max: emax,
        grad_l2_relative: rel(ge2, gn2),
    })
}

pub fn solve(c: &Context) -> Result<(), CliError> {
    let prob = inputs::problem(c.loaded)?;
    let sol = plab_core::solver::solve_p_poisson(&prob, &c.loaded.config.solver)?;
    let ctx = c.loaded.config.ctx()?;
    let grad = gradient(&sol.u);
    write_dump(&sol.u, &c.out.join("u"))?;
    write_dump(&grad, &c.out.join("grad_u"))?;
    write_dump(&grad.map(|q| a_map(&ctx, q)), &c.out.join("A_grad"))?;
    write_dump(&grad.map(|q| plab_core::orlicz::v_map(&ctx, q)), &c.out.join("V_grad"))?;
    let error = inputs::exact_solution(c.loaded)?
        .map(|e| error_norms(&sol.u, &grad, &e))
        .transpose()?;
    let report = ConvergenceReport {
        seed: c.seed(),
        p: ctx.p(),
        grid: c.loaded.config.grid,
        unknowns: prob.unknown_count(),
        converged: true,
        final_residual: sol.record.final_residual(),
        iterations: &sol.record.iterations,
        error,
    };
    write_json(c.out, "convergence.json", &report)?;
    if c.opts.plot_tables {
        let g = *sol.u.grid();
        let blocks: Vec<Vec<Vec<f64>>> = (0..g.ny())
            .map(|j| {
                (0..g.nx())
                    .map(|i| {
                        let q = g.position(i, j);
                        vec![q.x, q.y, sol.u.get(i, j)]
                    })
                    .collect()
            })
            .collect();
        write_plot_table(c.out, "u.dat", &["x", "y", "u"], &blocks)?;
    }
    info!(
        "solved in {} iterations, residual {:.3e}",
        sol.record.iterations.len().saturating_sub(1),
        sol.record.final_residual()
    );
    Ok(())
}

// ---------------------------------------------------------------- decay

#[derive(Clone, Serialize)]
struct FitSummary {
    status: &'static str,
    beta: Option<f64>,
    r2: Option<f64>,
    points: usize,
    decay_constant: Option<f64>,
}

#[derive(Serialize)]
struct BallSummary {
    center: [f64; 2],
    t0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<&'static str>,
    fits: BTreeMap<&'static str, FitSummary>,
    classification: BTreeMap<String, &'static str>,
}

struct BallOutcome {
    summary: BallSummary,
    rows: Vec<DecayRow>,
    profiles: Vec<DecayProfile>,
    constants: BTreeMap<&'static str, f64>,
}

#[derive(Serialize)]
struct DecaySummary {
    seed: u64,
    p: f64,
    theta: f64,
    #[serde(rename = "K")]
    k: usize,
    w: Option<f64>,
    epsilon_dg: f64,
    beta_calibration: f64,
    balls: usize,
    failed_balls: usize,
    fitted_beta_median: BTreeMap<&'static str, Option<f64>>,
    fitted_count: BTreeMap<&'static str, usize>,
    exact_decay_count: BTreeMap<&'static str, usize>,
    all_exact_decay: BTreeMap<&'static str, bool>,
    calibrated_constants: BTreeMap<&'static str, Option<f64>>,
    classification_histogram: BTreeMap<String, BTreeMap<&'static str, usize>>,
    per_ball: Vec<BallSummary>,
    notes: Vec<&'static str>,
}

const V_GRAD_NOTE: &str = "V_grad slopes are measured values; no decay rate is assumed for V(grad u).";

pub fn decay(c: &Context) -> Result<(), CliError> {
    let cfg = &c.loaded.config;
    let d = &cfg.decay;
    let inputs = inputs::load(c.loaded)?;
    let balls = cfg.balls(&inputs.grid)?;
    let fields = QuantityFields::new(&inputs);
    let measured: Vec<(Quantity, Measured)> = d
        .quantities
        .iter()
        .map(|&q| fields.get(q).map(|m| (q, m)))
        .collect::<Result<_, _>>()?;
    let mut thresholds: Vec<f64> = d.epsilon_sweep.iter().copied().chain([d.epsilon_dg]).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let ctx = inputs.ctx;

    let outcomes = c.par_map(&balls, |ball| -> Result<BallOutcome, CliError> {
        let center = ball.center();
        let mut classification = BTreeMap::new();
        let mut at_threshold = Classification::NonDegenerate;
        let skipped = |reason| BallOutcome {
            summary: BallSummary {
                center: [center.x, center.y],
                t0: ball.radius(),
                skipped: Some(reason),
                fits: BTreeMap::new(),
                classification: BTreeMap::new(),
            },
            rows: Vec::new(),
            profiles: Vec::new(),
            constants: BTreeMap::new(),
        };
        for &eps in &thresholds {
            let cl = match classify_ball(&fields.grad, ball, &ctx, eps) {
                Ok(cl) => cl,
                Err(e) => match guard_reason(&e) {
                    Some(reason) => return Ok(skipped(reason)),
                    None => return Err(e.into()),
                },
            };
            if eps == d.epsilon_dg {
                at_threshold = cl;
            }
            classification.insert(eps_key(eps), classification_name(cl));
        }
        let mut outcome = BallOutcome {
            summary: BallSummary {
                center: [center.x, center.y],
                t0: ball.radius(),
                skipped: None,
                fits: BTreeMap::new(),
                classification,
            },
            rows: Vec::new(),
            profiles: Vec::new(),
            constants: BTreeMap::new(),
        };
        for (q, m) in &measured {
            let profile = match m.profile(center, ball.radius(), d.theta, d.k, d.w, *q) {
                Ok(p) => p,
                Err(e) => match guard_reason(&e) {
                    Some(reason) => {
                        warn!("ball at ({}, {}) skipped: {e}", center.x, center.y);
                        return Ok(skipped(reason));
                    }
                    None => return Err(e.into()),
                },
            };
            let report = DecayReport::new(&profile, d.beta, d.epsilon_dg, vec![at_threshold]);
            let fit = fit_beta(&profile);
            outcome.summary.fits.insert(
                q.as_str(),
                FitSummary {
                    status: fit_status_name(fit.status),
                    beta: finite(fit.beta),
                    r2: finite(fit.r2),
                    points: fit.points,
                    decay_constant: finite(report.decay_constant),
                },
            );
            outcome.constants.insert(q.as_str(), report.decay_constant);
            outcome.rows.extend(profile.rows());
            outcome.profiles.push(profile);
        }
        Ok(outcome)
    })?;
    let outcomes: Vec<BallOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;

    let failed = outcomes.iter().filter(|o| o.summary.skipped.is_some()).count();
    let mut summary = DecaySummary {
        seed: c.seed(),
        p: ctx.p(),
        theta: d.theta,
        k: d.k,
        w: finite(d.w),
        epsilon_dg: d.epsilon_dg,
        beta_calibration: d.beta,
        balls: balls.len(),
        failed_balls: failed,
        fitted_beta_median: BTreeMap::new(),
        fitted_count: BTreeMap::new(),
        exact_decay_count: BTreeMap::new(),
        all_exact_decay: BTreeMap::new(),
        calibrated_constants: BTreeMap::new(),
        classification_histogram: BTreeMap::new(),
        per_ball: Vec::new(),
        notes: Vec::new(),
    };
    for (q, _) in &measured {
        let name = q.as_str();
        let fits: Vec<&FitSummary> = outcomes.iter().filter_map(|o| o.summary.fits.get(name)).collect();
        let betas: Vec<f64> = fits.iter().filter(|f| f.status == "fitted").filter_map(|f| f.beta).collect();
        let exact = fits.iter().filter(|f| f.status == "exact_decay").count();
        summary.fitted_count.insert(name, betas.len());
        summary.fitted_beta_median.insert(name, median(betas));
        summary.exact_decay_count.insert(name, exact);
        summary.all_exact_decay.insert(name, !fits.is_empty() && exact == fits.len());
        let constant = outcomes
            .iter()
            .filter_map(|o| o.constants.get(name).copied())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        summary.calibrated_constants.insert(name, constant.and_then(finite));
        if *q == Quantity::VGrad {
            summary.notes.push(V_GRAD_NOTE);
        }
    }
    for eps in &thresholds {
        let key = eps_key(*eps);
        let mut hist: BTreeMap<&'static str, usize> = ["non_degenerate", "degenerate", "degenerate_zero"]
            .into_iter()
            .map(|k| (k, 0))
            .collect();
        for o in &outcomes {
            if let Some(cl) = o.summary.classification.get(&key) {
                *hist.get_mut(cl).expect("known class") += 1;
            }
        }
        summary.classification_histogram.insert(key, hist);
    }

    let rows: Vec<DecayRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let mut csv = Vec::new();
    write_decay_csv(&mut csv, &rows, c.seed())?;
    std::fs::write(c.out.join("decay.csv"), csv)?;
    if c.opts.plot_tables {
        let blocks: Vec<Vec<Vec<f64>>> = outcomes
            .iter()
            .flat_map(|o| o.profiles.iter())
            .map(|p| p.radii.iter().zip(&p.osc_values).map(|(&t, &v)| vec![t, v]).collect())
            .collect();
        write_plot_table(c.out, "decay.dat", &["t_k", "osc"], &blocks)?;
    }
    summary.per_ball = outcomes.into_iter().map(|o| o.summary).collect();
    write_json(c.out, "decay_summary.json", &summary)?;

    if 2 * failed > balls.len() {
        return Err(CliError::Resolution {
            failed,
            total: balls.len(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------- besov and transfer

fn kind_name(k: SeminormKind) -> &'static str {
    match k {
        SeminormKind::Besov => "besov",
        SeminormKind::Triebel => "triebel",
    }
}

/// Why a parameter row cannot be evaluated, before touching any field.
fn row_precheck(params: &SmoothnessParams, kind: SeminormKind, p_conj: f64) -> Option<&'static str> {
    let (valid, embeds) = match kind {
        SeminormKind::Besov => (params.validate_besov(), embedding_check(params, p_conj)),
        SeminormKind::Triebel => (params.validate_triebel(), embedding_check_triebel(params, p_conj)),
    };
    if valid.is_err() {
        Some("invalid_parameters")
    } else if !embeds {
        Some("embedding_violated")
    } else {
        None
    }
}

fn param_cells(ball: &Ball, scales: usize, kind: SeminormKind, p: &SmoothnessParams) -> Vec<String> {
    vec![
        num(ball.center().x),
        num(ball.center().y),
        num(ball.radius()),
        scales.to_string(),
        kind_name(kind).into(),
        num(p.s),
        num(p.rho),
        num(p.q),
        num(p.w),
    ]
}

const PARAM_HEADER: [&str; 9] = ["center_x", "center_y", "R", "J", "kind", "s", "rho", "q", "w"];

fn rows_required(c: &Context) -> Result<(), CliError> {
    let cfg = &c.loaded.config;
    if cfg.smoothness.is_empty() || cfg.seminorms.is_empty() {
        return Err(CliError::Config("smoothness and seminorms must be non-empty".into()));
    }
    Ok(())
}

struct BesovRow {
    cells: Vec<String>,
    value: Option<f64>,
    status: &'static str,
    per_scale: Vec<f64>,
}

#[derive(Serialize)]
struct RowSummary {
    kind: &'static str,
    params: SmoothnessParams,
    evaluated: usize,
    skipped: BTreeMap<&'static str, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anomalies: Option<usize>,
}

#[derive(Serialize)]
struct RowsReport {
    seed: u64,
    p: f64,
    quantity: &'static str,
    scales: usize,
    balls: usize,
    rows: Vec<RowSummary>,
}

/// `(kind, params)` in configuration order.
fn param_rows(c: &Context) -> Vec<(SeminormKind, SmoothnessParams)> {
    let cfg = &c.loaded.config;
    cfg.seminorms
        .iter()
        .flat_map(|&k| cfg.smoothness.iter().map(move |&p| (k, p)))
        .collect()
}

pub fn besov(c: &Context) -> Result<(), CliError> {
    rows_required(c)?;
    let cfg = &c.loaded.config;
    let inputs = inputs::load(c.loaded)?;
    let balls = cfg.balls(&inputs.grid)?;
    let fields = QuantityFields::new(&inputs);
    let field = fields.get(cfg.besov_quantity)?;
    let p_conj = inputs.ctx.p_conj();
    let scales = cfg.scales;
    let rows = param_rows(c);

    let per_ball = c.par_map(&balls, |ball| -> Result<Vec<BesovRow>, CliError> {
        let mut tables: Vec<(f64, Result<OscillationTable, &'static str>)> = Vec::new();
        let mut out = Vec::new();
        for &(kind, params) in &rows {
            let mut row = BesovRow {
                cells: param_cells(ball, scales, kind, &params),
                value: None,
                status: "ok",
                per_scale: Vec::new(),
            };
            if let Some(reason) = row_precheck(&params, kind, p_conj) {
                row.status = reason;
                out.push(row);
                continue;
            }
            let table = match tables.iter().position(|(w, _)| *w == params.w) {
                Some(i) => &tables[i].1,
                None => {
                    let t = DyadicLadder::for_ball(ball, scales)
                        .and_then(|l| field.table(ball, params.w, &l))
                        .map_err(|e| guard_reason(&e).ok_or(e));
                    let t = match t {
                        Ok(t) => Ok(t),
                        Err(Ok(reason)) => Err(reason),
                        Err(Err(e)) => return Err(e.into()),
                    };
                    tables.push((params.w, t));
                    &tables.last().expect("just pushed").1
                }
            };
            match table {
                Err(reason) => row.status = reason,
                Ok(t) => match kind {
                    SeminormKind::Besov => {
                        let est = t.besov(params.s, params.rho, params.q);
                        row.value = Some(est.value);
                        row.per_scale = est.per_scale;
                    }
                    SeminormKind::Triebel => row.value = Some(t.triebel(params.s, params.rho, params.q)),
                },
            }
            out.push(row);
        }
        Ok(out)
    })?;
    let per_ball: Vec<Vec<BesovRow>> = per_ball.into_iter().collect::<Result<_, _>>()?;

    let mut header: Vec<String> = PARAM_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(["value".into(), "status".into()]);
    header.extend((0..scales).map(|j| format!("a_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(c.seed(), &header);
    let mut summaries: Vec<RowSummary> = rows
        .iter()
        .map(|&(kind, params)| RowSummary {
            kind: kind_name(kind),
            params,
            evaluated: 0,
            skipped: BTreeMap::new(),
            max_value: None,
            max_ratio: None,
            anomalies: None,
        })
        .collect();
    let mut plot = vec![Vec::new(); rows.len()];
    for (b, ball_rows) in per_ball.iter().enumerate() {
        for (i, row) in ball_rows.iter().enumerate() {
            let mut cells = row.cells.clone();
            cells.push(opt_num(row.value));
            cells.push(row.status.into());
            cells.extend((0..scales).map(|j| opt_num(row.per_scale.get(j).copied())));
            csv.row(&cells);
            let s = &mut summaries[i];
            match row.value {
                Some(v) => {
                    s.evaluated += 1;
                    s.max_value = Some(s.max_value.map_or(v, |m: f64| m.max(v)));
                    plot[i].push(vec![b as f64, balls[b].radius(), v]);
                }
                None => *s.skipped.entry(row.status).or_default() += 1,
            }
        }
    }
    csv.write(c.out, "besov.csv")?;
    if c.opts.plot_tables {
        write_plot_table(c.out, "besov.dat", &["ball", "R", "value"], &plot)?;
    }
    let total = summaries.iter().map(|s| s.evaluated + s.skipped.values().sum::<usize>()).sum();
    let evaluated: usize = summaries.iter().map(|s| s.evaluated).sum();
    write_json(
        c.out,
        "besov_summary.json",
        &RowsReport {
            seed: c.seed(),
            p: inputs.ctx.p(),
            quantity: cfg.besov_quantity.as_str(),
            scales,
            balls: balls.len(),
            rows: summaries,
        },
    )?;
    if evaluated == 0 {
        return Err(CliError::AllRowsSkipped(total));
    }
    Ok(())
}

struct TransferRow {
    cells: Vec<String>,
    outcome: Option<plab_core::decay::RatioOutcome>,
    status: &'static str,
}

pub fn transfer(c: &Context) -> Result<(), CliError> {
    rows_required(c)?;
    let cfg = &c.loaded.config;
    let inputs = inputs::load(c.loaded)?;
    let balls = cfg.balls(&inputs.grid)?;
    let a_grad = inputs.a_grad();
    let forcing = inputs
        .forcing
        .clone()
        .unwrap_or_else(|| VectorField::constant(inputs.grid, Vec2::ZERO));
    let ctx = inputs.ctx;
    let scales = cfg.scales;
    let rows = param_rows(c);

    let per_ball = c.par_map(&balls, |ball| -> Result<Vec<TransferRow>, CliError> {
        let doubled_inside = ball.scaled(2.0).map(|d| inputs.grid.contains_ball(&d)).unwrap_or(false);
        let mut out = Vec::new();
        for &(kind, params) in &rows {
            let mut row = TransferRow {
                cells: param_cells(ball, scales, kind, &params),
                outcome: None,
                status: "ok",
            };
            if let Some(reason) = row_precheck(&params, kind, ctx.p_conj()) {
                row.status = reason;
            } else if !doubled_inside {
                row.status = "doubled_ball_outside";
            } else {
                match transfer_ratio(&a_grad, &forcing, ball, &params, scales, &ctx, kind) {
                    Ok(o) => row.outcome = Some(o),
                    Err(e) => match guard_reason(&e) {
                        Some(reason) => row.status = reason,
                        None => return Err(e.into()),
                    },
                }
            }
            out.push(row);
        }
        Ok(out)
    })?;
    let per_ball: Vec<Vec<TransferRow>> = per_ball.into_iter().collect::<Result<_, _>>()?;

    let mut header: Vec<&str> = PARAM_HEADER.to_vec();
    header.extend(["lhs", "rhs", "ratio", "anomaly", "status"]);
    let mut csv = Csv::new(c.seed(), &header);
    let mut summaries: Vec<RowSummary> = rows
        .iter()
        .map(|&(kind, params)| RowSummary {
            kind: kind_name(kind),
            params,
            evaluated: 0,
            skipped: BTreeMap::new(),
            max_value: None,
            max_ratio: None,
            anomalies: Some(0),
        })
        .collect();
    let mut plot = vec![Vec::new(); rows.len()];
    for ball_rows in &per_ball {
        for (i, row) in ball_rows.iter().enumerate() {
            let mut cells = row.cells.clone();
            match row.outcome {
                Some(o) => cells.extend([num(o.lhs), num(o.rhs), num(o.ratio), o.anomaly.to_string()]),
                None => cells.extend([String::new(), String::new(), String::new(), String::new()]),
            }
            cells.push(row.status.into());
            csv.row(&cells);
            let s = &mut summaries[i];
            match row.outcome {
                Some(o) => {
                    s.evaluated += 1;
                    if o.anomaly {
                        *s.anomalies.as_mut().expect("set above") += 1;
                    }
                    s.max_ratio = Some(s.max_ratio.map_or(o.ratio, |m: f64| m.max(o.ratio)));
                    plot[i].push(vec![o.rhs, o.lhs, o.ratio]);
                }
                None => *s.skipped.entry(row.status).or_default() += 1,
            }
        }
    }
    csv.write(c.out, "transfer.csv")?;
    if c.opts.plot_tables {
        write_plot_table(c.out, "transfer.dat", &["rhs", "lhs", "ratio"], &plot)?;
    }
    let total = summaries.iter().map(|s| s.evaluated + s.skipped.values().sum::<usize>()).sum();
    let evaluated: usize = summaries.iter().map(|s| s.evaluated).sum();
    write_json(
        c.out,
        "transfer_summary.json",
        &RowsReport {
            seed: c.seed(),
            p: ctx.p(),
            quantity: Quantity::AGrad.as_str(),
            scales,
            balls: balls.len(),
            rows: summaries,
        },
    )?;
    if evaluated == 0 {
        return Err(CliError::AllRowsSkipped(total));
    }
    Ok(())
}

// ---------------------------------------------------------------- catalogue

const CATALOGUE: [(&str, &str); 5] = [
    ("affine", "a·x + b; parameters a = [a1, a2], b"),
    ("radial", "r^((p-2)/(p-1)); p-harmonic away from the origin, p ≠ 2"),
    ("harmonic_poly", "x² − y²"),
    ("log_radial", "log r; 2-harmonic away from the origin"),
    ("trig", "Σ amp·sin(kx·x + px)·sin(ky·y + py); boundary data and manufactured solutions"),
];

pub fn catalogue_listing() -> String {
    CATALOGUE.iter().map(|(name, what)| format!("{name:<14}{what}\n")).collect()
}

/// Sample the configured boundary data (and its exact gradient when known).
pub fn catalogue(c: &Context) -> Result<(), CliError> {
    let u = inputs::boundary_data(c.loaded)?;
    let grid = *u.grid();
    let grad = match inputs::exact_solution(c.loaded)? {
        Some(e) => e.sample(&grid)?.1,
        None => gradient(&u),
    };
    write_dump(&u, &c.out.join("catalogue_u"))?;
    write_dump(&grad, &c.out.join("catalogue_grad"))?;
    Ok(())
}
