//! Discrete `p`-Poisson problems `−div A(∇u) = −div F` with Dirichlet data.
//!
//! The discrete energy `Σ_T w [φ(|∇u_T|) − F_T·∇u_T]` over the corner
//! triangles of [`mesh`] is minimised by Newton's method with Armijo
//! backtracking. Linear systems are factorised with a sparse Cholesky
//! decomposition whose symbolic part is computed once per problem.

mod catalogue;
mod conjugate;
mod mesh;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Ball, Field, Grid2D, ScalarField, VectorField};
use crate::orlicz::{a_map, da_matrix_floored, ExponentCtx, Mat2, Vec2};
use mesh::Mesh;
use sparse::SpdSystem;

pub use catalogue::{catalogue, manufactured_forcing, CatalogueEntry, ExactSolution, TrigSeries};
pub use conjugate::{conjugate_solution, ConjugateSolution, CONJUGATE_RESIDUAL_THRESHOLD};

/// Smallest comparison-ball mask accepted by [`comparison_solve`].
pub const MIN_COMPARISON_NODES: usize = 100;

/// Newton also stops when its update is below this multiple of
/// `ε_mach · ‖u‖_∞`: the residual is then at the roundoff level of the grid.
pub const ROUNDOFF_FACTOR: f64 = 256.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Target for `‖∇E‖_∞ / h²`, the energy gradient rescaled to the size of
    /// a pointwise PDE residual. Iteration also ends once the Newton update
    /// reaches roundoff, see [`ROUNDOFF_FACTOR`].
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking factor of the line search.
    pub newton_damping: f64,
    /// Floor on `|∇u|` inside the Hessian only.
    pub hessian_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            newton_damping: 0.5,
            hessian_floor: 1e-12,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.newton_damping > 0.0 && self.newton_damping < 1.0) {
            return Err(Error::Parameter(format!(
                "newton_damping must lie in (0,1), got {}",
                self.newton_damping
            )));
        }
        if !(self.hessian_floor >= 0.0 && self.hessian_floor.is_finite()) {
            return Err(Error::Parameter(format!(
                "hessian_floor must be non-negative, got {}",
                self.hessian_floor
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Unknowns are the nodes selected by `mask`; every other node keeps the
/// value of `data`. Values of `data` on mask nodes serve as the initial guess
/// when [`DirichletProblem::warm_start`] is set.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    ctx: ExponentCtx,
    data: ScalarField,
    forcing: Option<VectorField>,
    mask: Vec<bool>,
    warm_start: bool,
}

impl DirichletProblem {
    /// All interior nodes of the grid rectangle are unknown.
    pub fn new(ctx: ExponentCtx, data: ScalarField, forcing: Option<VectorField>) -> Result<Self> {
        let g = *data.grid();
        let mask = (0..g.len()).map(|k| !g.is_boundary_node(k)).collect();
        Self::with_mask(ctx, data, forcing, mask)
    }

    /// Unknowns are the nodes strictly inside `ball`.
    pub fn ball(ctx: ExponentCtx, data: ScalarField, forcing: Option<VectorField>, ball: &Ball) -> Result<Self> {
        let g = *data.grid();
        if !g.contains_ball(ball) {
            return Err(Error::Parameter("ball must lie inside the grid rectangle".into()));
        }
        let mut mask = vec![false; g.len()];
        for k in g.nodes_in_ball(ball) {
            mask[k] = true;
        }
        Self::with_mask(ctx, data, forcing, mask)
    }

    pub fn with_mask(
        ctx: ExponentCtx,
        data: ScalarField,
        forcing: Option<VectorField>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let g = *data.grid();
        if mask.len() != g.len() {
            return Err(Error::GridMismatch(format!(
                "mask has {} entries for {} nodes",
                mask.len(),
                g.len()
            )));
        }
        if let Some(f) = &forcing {
            if f.grid() != &g {
                return Err(Error::GridMismatch("forcing and data live on different grids".into()));
            }
        }
        if mask.iter().enumerate().any(|(k, &m)| m && g.is_boundary_node(k)) {
            return Err(Error::Parameter("mask may not contain grid boundary nodes".into()));
        }
        if !mask_is_connected(&g, &mask) {
            return Err(Error::Parameter("mask nodes must form a connected set".into()));
        }
        Ok(Self {
            ctx,
            data,
            forcing,
            mask,
            warm_start: false,
        })
    }

    /// Start Newton from the mask values of `data` instead of a `p = 2` solve.
    pub fn warm_start(mut self, on: bool) -> Self {
        self.warm_start = on;
        self
    }

    pub fn ctx(&self) -> &ExponentCtx {
        &self.ctx
    }
    pub fn grid(&self) -> &Grid2D {
        self.data.grid()
    }
    pub fn data(&self) -> &ScalarField {
        &self.data
    }
    pub fn forcing(&self) -> Option<&VectorField> {
        self.forcing.as_ref()
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn unknown_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn mask_is_connected(g: &Grid2D, mask: &[bool]) -> bool {
    let Some(start) = mask.iter().position(|&m| m) else {
        return false;
    };
    let mut seen = vec![false; mask.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(k) = stack.pop() {
        count += 1;
        let (i, j) = g.coords(k);
        let mut visit = |ii: usize, jj: usize| {
            let n = g.index(ii, jj);
            if mask[n] && !seen[n] {
                seen[n] = true;
                stack.push(n);
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        if i + 1 < g.nx() {
            visit(i + 1, j);
        }
        if j > 0 {
            visit(i, j - 1);
        }
        if j + 1 < g.ny() {
            visit(i, j + 1);
        }
    }
    count == mask.iter().filter(|&&m| m).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    /// Step length accepted by the line search (0 for the initial state).
    pub step: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iterations: Vec<IterationRecord>,
}

impl ConvergenceRecord {
    pub fn final_residual(&self) -> f64 {
        self.iterations.last().map_or(f64::INFINITY, |r| r.residual)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: ScalarField,
    pub record: ConvergenceRecord,
}

/// The assembled discrete problem: triangles, unknown numbering, forcing.
struct Discrete<'a> {
    prob: &'a DirichletProblem,
    mesh: Mesh,
    unknown: Vec<Option<usize>>,
    nodes: Vec<usize>,
    forcing: Vec<Vec2>,
}

struct Evaluation {
    energy: f64,
    /// Sum of absolute energy contributions, the scale of roundoff in `energy`.
    magnitude: f64,
    gradient: Vec<f64>,
    tri_grads: Vec<Vec2>,
}

impl<'a> Discrete<'a> {
    fn new(prob: &'a DirichletProblem) -> Self {
        let g = *prob.grid();
        let mesh = Mesh::new(g, |k| prob.mask[k]);
        let mut unknown = vec![None; g.len()];
        let mut nodes = Vec::new();
        for (k, &m) in prob.mask.iter().enumerate() {
            if m {
                unknown[k] = Some(nodes.len());
                nodes.push(k);
            }
        }
        let forcing = match &prob.forcing {
            Some(f) => mesh.triangle_means(f),
            None => vec![Vec2::ZERO; mesh.triangles.len()],
        };
        Self {
            prob,
            mesh,
            unknown,
            nodes,
            forcing,
        }
    }

    fn scatter(&self, full: &mut [f64], x: &[f64]) {
        for (&k, &v) in self.nodes.iter().zip(x) {
            full[k] = v;
        }
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&k| full[k]).collect()
    }

    fn energy_only(&self, u: &[f64]) -> (f64, f64) {
        let p = self.prob.ctx.p();
        let w = self.mesh.weight;
        let mut e = 0.0;
        let mut m = 0.0;
        for (t, f) in self.mesh.triangles.iter().zip(&self.forcing) {
            let g = t.gradient(u);
            let a = g.norm().powf(p) / p;
            let b = f.dot(g);
            e += w * (a - b);
            m += w * (a + b.abs());
        }
        (e, m)
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let ctx = &self.prob.ctx;
        let p = ctx.p();
        let w = self.mesh.weight;
        let mut energy = 0.0;
        let mut magnitude = 0.0;
        let mut gradient = vec![0.0; self.nodes.len()];
        let mut tri_grads = Vec::with_capacity(self.mesh.triangles.len());
        for (t, f) in self.mesh.triangles.iter().zip(&self.forcing) {
            let g = t.gradient(u);
            let a = g.norm().powf(p) / p;
            let b = f.dot(g);
            energy += w * (a - b);
            magnitude += w * (a + b.abs());
            let flux = a_map(ctx, g) - *f;
            for l in 0..3 {
                if let Some(r) = self.unknown[t.nodes[l]] {
                    gradient[r] += w * flux.dot(t.basis[l]);
                }
            }
            tri_grads.push(g);
        }
        Evaluation {
            energy,
            magnitude,
            gradient,
            tri_grads,
        }
    }

    fn residual_of(&self, gradient: &[f64]) -> f64 {
        let h = self.prob.grid().h();
        gradient.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (h * h)
    }

    /// `Σ_T w ∇φ_a·M_T∇φ_b` restricted to unknowns; data nodes move to the
    /// right-hand side.
    fn linear_rhs(&self, coeff: &[Mat2], u: &[f64]) -> Vec<f64> {
        let w = self.mesh.weight;
        let mut rhs = vec![0.0; self.nodes.len()];
        for ((t, m), f) in self.mesh.triangles.iter().zip(coeff).zip(&self.forcing) {
            let mut known = Vec2::ZERO;
            for l in 0..3 {
                if self.unknown[t.nodes[l]].is_none() {
                    known += t.basis[l] * u[t.nodes[l]];
                }
            }
            let flux = *f - m.mul_vec(known);
            for l in 0..3 {
                if let Some(r) = self.unknown[t.nodes[l]] {
                    rhs[r] += w * flux.dot(t.basis[l]);
                }
            }
        }
        rhs
    }
}

/// Factorise with growing diagonal shifts until Cholesky succeeds.
fn robust_solve(sys: &SpdSystem, disc: &Discrete, coeff: &[Mat2], rhs: &[f64]) -> Result<Vec<f64>> {
    let vals = sys.assemble(&disc.mesh, &disc.unknown, coeff, 0.0);
    match sys.solve(&vals, rhs) {
        Ok(x) => return Ok(x),
        Err(e) => log::debug!("unshifted factorisation failed: {e}"),
    }
    let scale = sys.max_diagonal(&vals).max(f64::MIN_POSITIVE);
    let mut shift = 1e-12 * scale;
    for _ in 0..8 {
        let vals = sys.assemble(&disc.mesh, &disc.unknown, coeff, shift);
        if let Ok(x) = sys.solve(&vals, rhs) {
            log::debug!("factorisation succeeded with diagonal shift {shift:.3e}");
            return Ok(x);
        }
        shift *= 100.0;
    }
    Err(Error::LinearSolve("Hessian could not be factorised".into()))
}

fn laplace_initial_guess(disc: &Discrete, sys: &SpdSystem, u: &mut [f64]) -> Result<()> {
    let coeff = vec![Mat2::IDENTITY; disc.mesh.triangles.len()];
    let w = disc.mesh.weight;
    let mut rhs = vec![0.0; disc.nodes.len()];
    for t in &disc.mesh.triangles {
        let mut known = Vec2::ZERO;
        for l in 0..3 {
            if disc.unknown[t.nodes[l]].is_none() {
                known += t.basis[l] * u[t.nodes[l]];
            }
        }
        for l in 0..3 {
            if let Some(r) = disc.unknown[t.nodes[l]] {
                rhs[r] -= w * known.dot(t.basis[l]);
            }
        }
    }
    let x = robust_solve(sys, disc, &coeff, &rhs)?;
    disc.scatter(u, &x);
    Ok(())
}

/// Minimise the discrete `p`-Dirichlet energy with forcing.
pub fn solve_p_poisson(prob: &DirichletProblem, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    let disc = Discrete::new(prob);
    let sys = SpdSystem::new(&disc.mesh, &disc.unknown, disc.nodes.len())?;
    let mut u: Vec<f64> = prob.data.values().to_vec();
    if !prob.warm_start {
        laplace_initial_guess(&disc, &sys, &mut u)?;
    }
    let ctx = prob.ctx;
    let mut eval = disc.evaluate(&u);
    let mut residual = disc.residual_of(&eval.gradient);
    let mut record = ConvergenceRecord::default();
    record.iterations.push(IterationRecord {
        iter: 0,
        energy: eval.energy,
        residual,
        step: 0.0,
    });
    log::debug!("newton start: energy {:.12e} residual {residual:.3e}", eval.energy);

    let mut iter = 0;
    while residual > opts.tol {
        if iter == opts.max_iter {
            return Err(Error::SolverFailure {
                iterations: iter,
                residual,
            });
        }
        iter += 1;
        if !(eval.energy.is_finite() && residual.is_finite()) {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite energy or residual at iteration {iter}"
            )));
        }
        let coeff: Vec<Mat2> = eval
            .tri_grads
            .iter()
            .map(|&g| da_matrix_floored(&ctx, g, opts.hessian_floor))
            .collect::<Result<_>>()?;
        let neg_grad: Vec<f64> = eval.gradient.iter().map(|v| -v).collect();
        let dir = robust_solve(&sys, &disc, &coeff, &neg_grad)?;
        let x0 = disc.gather(&u);
        let u_scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let update = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if update <= ROUNDOFF_FACTOR * f64::EPSILON * u_scale {
            log::debug!("newton {iter}: update {update:.3e} at roundoff level; residual {residual:.3e}");
            break;
        }

        let try_direction = |dir: &[f64], first: f64| -> Option<(Vec<f64>, f64)> {
            let slope: f64 = eval.gradient.iter().zip(dir).map(|(g, d)| g * d).sum();
            if !(slope < 0.0) {
                return None;
            }
            let slack = 1e3 * f64::EPSILON * eval.magnitude;
            let mut s = first;
            let mut trial = u.clone();
            for _ in 0..60 {
                let x: Vec<f64> = x0.iter().zip(dir).map(|(a, d)| a + s * d).collect();
                disc.scatter(&mut trial, &x);
                let (e, _) = disc.energy_only(&trial);
                if e.is_finite() && e <= eval.energy + 1e-4 * s * slope + slack {
                    return Some((trial, s));
                }
                s *= opts.newton_damping;
            }
            None
        };

        let accepted = match try_direction(&dir, 1.0) {
            Some(hit) => Some(hit),
            None => {
                log::debug!("newton direction rejected at iteration {iter}; trying gradient descent");
                let diag = sys.max_diagonal(&sys.assemble(&disc.mesh, &disc.unknown, &coeff, 0.0));
                let scale = if diag > 0.0 { 1.0 / diag } else { 1.0 };
                let sd: Vec<f64> = neg_grad.iter().map(|g| g * scale).collect();
                try_direction(&sd, 1.0)
            }
        };

        let (next, step) = match accepted {
            Some(hit) => hit,
            None => {
                // Energy differences are below roundoff; keep the full Newton
                // step only if it still reduces the residual.
                let mut trial = u.clone();
                let x: Vec<f64> = x0.iter().zip(&dir).map(|(a, d)| a + d).collect();
                disc.scatter(&mut trial, &x);
                let e = disc.evaluate(&trial);
                if disc.residual_of(&e.gradient) < residual {
                    (trial, 1.0)
                } else {
                    return Err(Error::SolverFailure {
                        iterations: iter,
                        residual,
                    });
                }
            }
        };
        u = next;
        eval = disc.evaluate(&u);
        residual = disc.residual_of(&eval.gradient);
        log::debug!(
            "newton {iter}: energy {:.12e} residual {residual:.3e} step {step}",
            eval.energy
        );
        record.iterations.push(IterationRecord {
            iter,
            energy: eval.energy,
            residual,
            step,
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite solution".into()));
    }
    Ok(Solution {
        u: Field::from_parts_unchecked(*prob.grid(), u),
        record,
    })
}

/// `p`-harmonic function on the grid rectangle with the boundary values of `boundary`.
pub fn solve_p_harmonic(ctx: &ExponentCtx, boundary: &ScalarField, opts: &SolverOptions) -> Result<Solution> {
    let prob = DirichletProblem::new(*ctx, boundary.clone(), None)?;
    solve_p_poisson(&prob, opts)
}

/// Solve `−div(DA(Q)∇z) = −div F` with the data, mask and forcing of `prob`.
pub fn solve_linearized(prob: &DirichletProblem, q: Vec2, opts: &SolverOptions) -> Result<ScalarField> {
    opts.validate()?;
    let m = da_matrix_floored(&prob.ctx, q, 0.0)?;
    let [lo, _] = m.sym_eigenvalues();
    if !(lo > 0.0) {
        return Err(Error::Singular(format!(
            "DA(Q) is not positive definite for Q = ({}, {})",
            q.x, q.y
        )));
    }
    let disc = Discrete::new(prob);
    let sys = SpdSystem::new(&disc.mesh, &disc.unknown, disc.nodes.len())?;
    let coeff = vec![m; disc.mesh.triangles.len()];
    let mut u: Vec<f64> = prob.data.values().to_vec();
    let rhs = disc.linear_rhs(&coeff, &u);
    let vals = sys.assemble(&disc.mesh, &disc.unknown, &coeff, 0.0);
    let x = sys.solve(&vals, &rhs)?;
    let rel = sys.relative_residual(&vals, &x, &rhs);
    if rel > 1e-12 {
        log::warn!("linearized solve relative residual {rel:.3e}");
    }
    disc.scatter(&mut u, &x);
    Ok(Field::from_parts_unchecked(*prob.grid(), u))
}

/// `p`-harmonic replacement of `u` on the nodes strictly inside `ball`.
pub fn comparison_solve(
    u: &ScalarField,
    ball: &Ball,
    ctx: &ExponentCtx,
    opts: &SolverOptions,
) -> Result<Solution> {
    let prob = DirichletProblem::ball(*ctx, u.clone(), None, ball)?;
    let n = prob.unknown_count();
    if n < MIN_COMPARISON_NODES {
        return Err(Error::InsufficientResolution {
            found: n,
            required: MIN_COMPARISON_NODES,
        });
    }
    solve_p_poisson(&prob.warm_start(true), opts)
}

/// Discrete energy of `u` for `prob` (data nodes are read from `u`).
pub fn discrete_energy(prob: &DirichletProblem, u: &ScalarField) -> f64 {
    Discrete::new(prob).energy_only(u.values()).0
}

/// `‖∇E(u)‖_∞ / h²` over the unknowns of `prob`.
pub fn discrete_residual(prob: &DirichletProblem, u: &ScalarField) -> f64 {
    let disc = Discrete::new(prob);
    disc.residual_of(&disc.evaluate(u.values()).gradient)
}
