//! Scalar and vector fields on uniform 2D grids, and the ball statistics
//! (averages, oscillations, `A`-/`V`-averages) taken over them.
//!
//! Ball integrals use node inclusion: a node contributes to a ball average
//! iff it lies strictly inside the open ball. Balls are implicitly
//! intersected with the grid rectangle.

mod io;

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orlicz::{a_inv, a_map, v_inv, v_map, ExponentCtx, Vec2};

pub use io::{read_dump, read_dump_any, write_dump, AnyField, DumpHeader};

/// Fewest in-ball nodes accepted by [`Field::ball_average`] and friends.
pub const MIN_BALL_NODES: usize = 16;

/// Uniform grid with spacing `h` on both axes. Node `(i, j)` sits at
/// `(x0 + i h, y0 + j h)` and is stored at index `j * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    x0: f64,
    y0: f64,
    h: f64,
    nx: usize,
    ny: usize,
}

impl Grid2D {
    pub fn new(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {h}")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Parameter(format!(
                "grid needs at least 2 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::Parameter("grid origin must be finite".into()));
        }
        Ok(Self { x0, y0, h, nx, ny })
    }

    /// `[lo, hi]²` split into `cells × cells` squares (`cells + 1` nodes per axis).
    pub fn square(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells == 0 {
            return Err(Error::Parameter(format!(
                "square grid needs lo < hi and cells > 0, got [{lo}, {hi}] with {cells}"
            )));
        }
        Self::new(lo, lo, (hi - lo) / cells as f64, cells + 1, cells + 1)
    }

    #[inline]
    pub fn x0(&self) -> f64 {
        self.x0
    }
    #[inline]
    pub fn y0(&self) -> f64 {
        self.y0
    }
    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }
    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn x_max(&self) -> f64 {
        self.x0 + (self.nx - 1) as f64 * self.h
    }
    pub fn y_max(&self) -> f64 {
        self.y0 + (self.ny - 1) as f64 * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    #[inline]
    pub fn node_position(&self, k: usize) -> Vec2 {
        let (i, j) = self.coords(k);
        self.position(i, j)
    }

    pub fn is_boundary_node(&self, k: usize) -> bool {
        let (i, j) = self.coords(k);
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// True if the rectangle contains the point (closed).
    pub fn contains_point(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x_max() && p.y >= self.y0 && p.y <= self.y_max()
    }

    /// True if the closed ball lies inside the grid rectangle.
    pub fn contains_ball(&self, b: &Ball) -> bool {
        let c = b.center;
        let r = b.radius;
        let tol = 1e-12 * self.h;
        c.x - r >= self.x0 - tol
            && c.x + r <= self.x_max() + tol
            && c.y - r >= self.y0 - tol
            && c.y + r <= self.y_max() + tol
    }

    /// Index range of nodes along one axis whose coordinate lies in `(lo, hi)`.
    fn axis_range(origin: f64, h: f64, n: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let first = ((lo - origin) / h).floor().max(0.0);
        let last = ((hi - origin) / h).ceil().min((n - 1) as f64);
        if first > last || last < 0.0 {
            return None;
        }
        Some((first as usize, last as usize))
    }

    /// Row-major list of node indices strictly inside the open ball.
    pub fn nodes_in_ball(&self, b: &Ball) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_node_in_ball(b, |k| out.push(k));
        out
    }

    pub(crate) fn for_each_node_in_ball(&self, b: &Ball, mut f: impl FnMut(usize)) {
        let c = b.center;
        let r = b.radius;
        let r2 = r * r;
        let Some((j0, j1)) = Self::axis_range(self.y0, self.h, self.ny, c.y - r, c.y + r) else {
            return;
        };
        let Some((i0, i1)) = Self::axis_range(self.x0, self.h, self.nx, c.x - r, c.x + r) else {
            return;
        };
        for j in j0..=j1 {
            let dy = self.y0 + j as f64 * self.h - c.y;
            let dy2 = dy * dy;
            if dy2 >= r2 {
                continue;
            }
            for i in i0..=i1 {
                let dx = self.x0 + i as f64 * self.h - c.x;
                if dx * dx + dy2 < r2 {
                    f(self.index(i, j));
                }
            }
        }
    }

    /// Node nearest to a point, clamped into the grid.
    pub fn nearest_node(&self, p: Vec2) -> usize {
        let i = ((p.x - self.x0) / self.h).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.y - self.y0) / self.h).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        self.index(i, j)
    }

    pub fn sample<T, F>(&self, f: F) -> Field<T>
    where
        T: FieldValue,
        F: Fn(Vec2) -> T,
    {
        let values = (0..self.len()).map(|k| f(self.node_position(k))).collect();
        Field { grid: *self, values }
    }
}

/// Open Euclidean ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: Vec2,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Parameter(format!("ball radius must be positive, got {radius}")));
        }
        if !center.is_finite() {
            return Err(Error::Parameter("ball center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn center(&self) -> Vec2 {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The concentric ball with radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Ball> {
        Ball::new(self.center, self.radius * factor)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm_sq() < self.radius * self.radius
    }
}

/// Values a field can carry: reals or planar vectors.
pub trait FieldValue:
    Copy
    + Default
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    const COMPONENTS: usize;
    /// Euclidean magnitude.
    fn magnitude(self) -> f64;
    fn component(self, c: usize) -> f64;
    fn with_component(self, c: usize, v: f64) -> Self;
    fn from_components(c: &[f64]) -> Self;
    fn finite(self) -> bool;
}

impl FieldValue for f64 {
    const COMPONENTS: usize = 1;
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn component(self, _c: usize) -> f64 {
        self
    }
    fn with_component(self, _c: usize, v: f64) -> Self {
        v
    }
    fn from_components(c: &[f64]) -> Self {
        c[0]
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl FieldValue for Vec2 {
    const COMPONENTS: usize = 2;
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn component(self, c: usize) -> f64 {
        if c == 0 {
            self.x
        } else {
            self.y
        }
    }
    fn with_component(self, c: usize, v: f64) -> Self {
        if c == 0 {
            Vec2::new(v, self.y)
        } else {
            Vec2::new(self.x, v)
        }
    }
    fn from_components(c: &[f64]) -> Self {
        Vec2::new(c[0], c[1])
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

/// Values sampled at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid2D,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec2>;

impl<T: FieldValue> Field<T> {
    pub fn new(grid: Grid2D, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.finite()) {
            return Err(Error::Domain(format!("non-finite field value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub(crate) fn from_parts_unchecked(grid: Grid2D, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, k: usize) -> T {
        self.values[k]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn offset(&self, c: T) -> Self {
        self.map(|v| v + c)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.magnitude()).fold(0.0, f64::max)
    }

    /// Mean over the nodes inside `ball`.
    pub fn ball_average(&self, ball: &Ball) -> Result<T> {
        let nodes = self.ball_nodes(ball)?;
        Ok(mean_over(&self.values, &nodes))
    }

    /// `(⨍_B |f - ⟨f⟩_B|^w)^{1/w}`, or the largest deviation for `w = ∞`.
    pub fn oscillation(&self, ball: &Ball, w: f64) -> Result<f64> {
        check_oscillation_exponent(w)?;
        let nodes = self.ball_nodes(ball)?;
        Ok(oscillation_over(&self.values, &nodes, w))
    }

    /// Oscillation about the mean alongside the infimum over all constants.
    ///
    /// The infimum is found by cyclic golden-section search per component,
    /// started from the mean, so the second entry never exceeds the first.
    pub fn mean_equivalence_check(&self, ball: &Ball, w: f64) -> Result<(f64, f64)> {
        if !(w.is_finite() && w >= 1.0) {
            return Err(Error::Parameter(format!(
                "mean/infimum comparison needs 1 <= w < inf, got {w}"
            )));
        }
        let nodes = self.ball_nodes(ball)?;
        let mean = mean_over(&self.values, &nodes);
        let objective = |c: T| deviation_norm(&self.values, &nodes, c, w);
        let about_mean = objective(mean);

        let mut best = mean;
        let mut best_val = about_mean;
        for _cycle in 0..40 {
            let before = best_val;
            for comp in 0..T::COMPONENTS {
                let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
                    let v = self.values[k].component(comp);
                    (lo.min(v), hi.max(v))
                });
                let base = best;
                let t = golden_section(lo, hi, |t| objective(base.with_component(comp, t)));
                let cand = base.with_component(comp, t);
                let val = objective(cand);
                if val < best_val {
                    best = cand;
                    best_val = val;
                }
            }
            if before - best_val <= 1e-15 * before.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok((about_mean, best_val))
    }

    fn ball_nodes(&self, ball: &Ball) -> Result<Vec<usize>> {
        let nodes = self.grid.nodes_in_ball(ball);
        if nodes.len() < MIN_BALL_NODES {
            return Err(Error::InsufficientResolution {
                found: nodes.len(),
                required: MIN_BALL_NODES,
            });
        }
        Ok(nodes)
    }
}

pub(crate) fn check_oscillation_exponent(w: f64) -> Result<()> {
    if w.is_nan() || w < 1.0 {
        return Err(Error::Parameter(format!("oscillation exponent must be >= 1, got {w}")));
    }
    Ok(())
}

/// Mean taken relative to the first value, so constant data averages exactly.
pub(crate) fn mean_over<T: FieldValue>(values: &[T], nodes: &[usize]) -> T {
    let base = values[nodes[0]];
    let mut acc = T::default();
    for &k in nodes {
        acc = acc + (values[k] - base);
    }
    base + acc * (1.0 / nodes.len() as f64)
}

/// `(mean |f - c|^w)^{1/w}` over the node set; max deviation for `w = ∞`.
pub(crate) fn deviation_norm<T: FieldValue>(values: &[T], nodes: &[usize], c: T, w: f64) -> f64 {
    if w.is_infinite() {
        return nodes
            .iter()
            .map(|&k| (values[k] - c).magnitude())
            .fold(0.0, f64::max);
    }
    let n = nodes.len() as f64;
    if w == 1.0 {
        nodes.iter().map(|&k| (values[k] - c).magnitude()).sum::<f64>() / n
    } else if w == 2.0 {
        let s: f64 = nodes
            .iter()
            .map(|&k| {
                let d = (values[k] - c).magnitude();
                d * d
            })
            .sum();
        (s / n).sqrt()
    } else {
        let s: f64 = nodes
            .iter()
            .map(|&k| (values[k] - c).magnitude().powf(w))
            .sum();
        (s / n).powf(1.0 / w)
    }
}

pub(crate) fn oscillation_over<T: FieldValue>(values: &[T], nodes: &[usize], w: f64) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let mean = mean_over(values, nodes);
    deviation_norm(values, nodes, mean, w)
}

/// Minimiser of a unimodal function on `[lo, hi]`.
fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    if !(hi > lo) {
        return lo;
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..200 {
        if hi - lo <= 1e-13 * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// First derivative along one axis: central in the interior, second-order
/// one-sided at the ends (plain difference when only two nodes exist).
#[inline]
fn axis_derivative(n: usize, h: f64, at: impl Fn(usize) -> f64, i: usize) -> f64 {
    if n == 2 {
        return (at(1) - at(0)) / h;
    }
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    }
}

fn partial_x(values: &[f64], g: &Grid2D, i: usize, j: usize) -> f64 {
    axis_derivative(g.nx, g.h, |ii| values[g.index(ii, j)], i)
}

fn partial_y(values: &[f64], g: &Grid2D, i: usize, j: usize) -> f64 {
    axis_derivative(g.ny, g.h, |jj| values[g.index(i, jj)], j)
}

/// Nodal gradient; exact for affine fields (and for quadratics in the interior).
pub fn gradient(u: &ScalarField) -> VectorField {
    let g = u.grid;
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.push(Vec2::new(
                partial_x(&u.values, &g, i, j),
                partial_y(&u.values, &g, i, j),
            ));
        }
    }
    Field::from_parts_unchecked(g, out)
}

/// Nodal divergence using the same stencils as [`gradient`].
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let xs: Vec<f64> = v.values.iter().map(|q| q.x).collect();
    let ys: Vec<f64> = v.values.iter().map(|q| q.y).collect();
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.push(partial_x(&xs, &g, i, j) + partial_y(&ys, &g, i, j));
        }
    }
    Field::from_parts_unchecked(g, out)
}

/// `A`-average: the vector whose `A`-image is the ball mean of `A(g)`.
pub fn a_average(g: &VectorField, ball: &Ball, ctx: &ExponentCtx) -> Result<Vec2> {
    let mapped = g.map(|q| a_map(ctx, q));
    Ok(a_inv(ctx, mapped.ball_average(ball)?))
}

/// `V`-average: the vector whose `V`-image is the ball mean of `V(g)`.
pub fn v_average(g: &VectorField, ball: &Ball, ctx: &ExponentCtx) -> Result<Vec2> {
    let mapped = g.map(|q| v_map(ctx, q));
    Ok(v_inv(ctx, mapped.ball_average(ball)?))
}

/// `⨍_B |V(g) - ⟨V(g)⟩_B|² / ⨍_B |V(g)|²`.
pub fn nondegeneracy_ratio(g: &VectorField, ball: &Ball, ctx: &ExponentCtx) -> Result<f64> {
    let v = g.map(|q| v_map(ctx, q));
    let nodes = v.ball_nodes(ball)?;
    let denom: f64 = nodes.iter().map(|&k| v.values[k].norm_sq()).sum::<f64>() / nodes.len() as f64;
    if denom == 0.0 {
        return Err(Error::DegenerateZero);
    }
    let osc = oscillation_over(&v.values, &nodes, 2.0);
    Ok(osc * osc / denom)
}
