//! Besov and Triebel–Lizorkin seminorms defined through localized
//! oscillations on dyadic radii.
//!
//! For a ball `B` of radius `R` and radii `t_j = R 2^{-j}`, the localized
//! oscillation `osc^B_w g(x, t)` averages over `B_t(x) ∩ B`. The `dt/t`
//! integral becomes a sum with weight `ln 2` per scale. Inner averages use
//! the sub-lattice of nodes anchored at `x` with a stride of about `t/16`
//! grid spacings, so the cost per outer node does not grow with resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Ball, Field, FieldValue, Grid2D, VectorField};
use crate::orlicz::t_alpha;

/// Number of inner sub-lattice steps per radius.
pub const INNER_STEPS_PER_RADIUS: f64 = 16.0;

/// Serialise `f64` exponents with `+∞` written as the string `"inf"`.
pub mod inf_float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Exponents `(s, ρ, q, w)` of a seminorm instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessParams {
    pub s: f64,
    #[serde(with = "inf_float")]
    pub rho: f64,
    #[serde(with = "inf_float")]
    pub q: f64,
    #[serde(with = "inf_float")]
    pub w: f64,
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// `d (1/a − 1/b)_+` with `d = 2`.
fn excess(a: f64, b: f64) -> f64 {
    2.0 * (inv(a) - inv(b)).max(0.0)
}

impl SmoothnessParams {
    pub fn new(s: f64, rho: f64, q: f64, w: f64) -> Self {
        Self { s, rho, q, w }
    }

    /// Conditions under which the oscillation characterization of the Besov
    /// seminorm applies: `0 < s < 1`, `ρ, q > 0`, `w ≥ 1`, `2(1/ρ − 1/w)_+ < s`.
    pub fn validate_besov(&self) -> Result<()> {
        let Self { s, rho, q, w } = *self;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Parameter(format!("s must lie in (0,1), got {s}")));
        }
        if !(rho > 0.0) || !(q > 0.0) {
            return Err(Error::Parameter(format!("rho and q must be positive, got {rho}, {q}")));
        }
        if !(w >= 1.0) {
            return Err(Error::Parameter(format!("w must be at least 1, got {w}")));
        }
        if !(excess(rho, w) < s) {
            return Err(Error::Parameter(format!(
                "2(1/rho - 1/w)_+ = {} is not below s = {s}",
                excess(rho, w)
            )));
        }
        Ok(())
    }

    /// Besov conditions plus `ρ < ∞` and `2(1/q − 1/w)_+ < s`.
    pub fn validate_triebel(&self) -> Result<()> {
        self.validate_besov()?;
        if self.rho.is_infinite() {
            return Err(Error::Parameter("Triebel-Lizorkin seminorms need rho < inf".into()));
        }
        if !(excess(self.q, self.w) < self.s) {
            return Err(Error::Parameter(format!(
                "2(1/q - 1/w)_+ = {} is not below s = {}",
                excess(self.q, self.w),
                self.s
            )));
        }
        Ok(())
    }

    /// Parameters `(αs, ρ/α, q/α, w/α)` of a power-transformed field.
    pub fn powered(&self, alpha: f64) -> Self {
        Self {
            s: alpha * self.s,
            rho: self.rho / alpha,
            q: self.q / alpha,
            w: self.w / alpha,
        }
    }
}

/// Compact embedding into `L^{p'}`: `2(1/ρ − 1/p')_+ < s < 1`.
pub fn embedding_check(params: &SmoothnessParams, p_conj: f64) -> bool {
    params.s > 0.0 && params.s < 1.0 && excess(params.rho, p_conj) < params.s
}

/// [`embedding_check`] plus the fine-index condition `2(1/q − 1/p')_+ < s`.
pub fn embedding_check_triebel(params: &SmoothnessParams, p_conj: f64) -> bool {
    embedding_check(params, p_conj) && excess(params.q, p_conj) < params.s
}

/// Radii `t_j = R 2^{-j}`, `j = 0..J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLadder {
    radius: f64,
    scales: usize,
}

impl DyadicLadder {
    pub const MIN_SCALES: usize = 4;

    pub fn new(radius: f64, scales: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Parameter(format!("ladder radius must be positive, got {radius}")));
        }
        if scales < Self::MIN_SCALES {
            return Err(Error::InsufficientScales(format!(
                "{scales} scales requested, at least {} required",
                Self::MIN_SCALES
            )));
        }
        Ok(Self { radius, scales })
    }

    pub fn for_ball(ball: &Ball, scales: usize) -> Result<Self> {
        Self::new(ball.radius(), scales)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.scales).map(|j| self.radius * 0.5f64.powi(j as i32)).collect()
    }

    /// The finest radius must span at least four grid spacings.
    pub fn check(&self, grid: &Grid2D) -> Result<()> {
        let finest = self.radius * 0.5f64.powi(self.scales as i32 - 1);
        if finest < 4.0 * grid.h() * (1.0 - 1e-12) {
            return Err(Error::InsufficientScales(format!(
                "finest radius {finest:.4e} is below 4h = {:.4e}",
                4.0 * grid.h()
            )));
        }
        Ok(())
    }
}

/// `osc^B_w g(x, t_j)` for every node `x` in `B` and every ladder radius.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillationTable {
    radius: f64,
    radii: Vec<f64>,
    /// `values[j][n]`: scale `j`, `n`-th node of `B` in row-major order.
    values: Vec<Vec<f64>>,
}

/// Per-scale terms of a Besov estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovEstimate {
    pub value: f64,
    /// `a_j = ‖osc^B_w g(·, t_j)‖ / t_j^s`
    pub per_scale: Vec<f64>,
}

/// Mean-power `(⨍ |v|^ρ)^{1/ρ}`, or the maximum for `ρ = ∞`.
fn power_mean(v: impl Iterator<Item = f64>, rho: f64) -> f64 {
    if rho.is_infinite() {
        return v.fold(0.0, f64::max);
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for x in v {
        sum += x.abs().powf(rho);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).powf(1.0 / rho)
    }
}

/// `(Σ_j ln2 · a_j^q)^{1/q}`, or the maximum for `q = ∞`.
fn scale_sum(a: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        return a.fold(0.0, f64::max);
    }
    let s: f64 = a.map(|x| x.powf(q) * std::f64::consts::LN_2).sum();
    s.powf(1.0 / q)
}

impl OscillationTable {
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The table restricted to the first `scales` radii.
    pub fn truncated(&self, scales: usize) -> OscillationTable {
        let n = scales.min(self.radii.len());
        OscillationTable {
            radius: self.radius,
            radii: self.radii[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    pub fn besov(&self, s: f64, rho: f64, q: f64) -> BesovEstimate {
        let per_scale: Vec<f64> = self
            .values
            .iter()
            .zip(&self.radii)
            .map(|(osc, &t)| power_mean(osc.iter().copied(), rho) / t.powf(s))
            .collect();
        let value = self.radius.powf(s) * scale_sum(per_scale.iter().copied(), q);
        BesovEstimate { value, per_scale }
    }

    pub fn triebel(&self, s: f64, rho: f64, q: f64) -> f64 {
        let weights: Vec<f64> = self.radii.iter().map(|t| t.powf(-s)).collect();
        let nodes = self.values.first().map_or(0, Vec::len);
        let per_node = (0..nodes).map(|n| {
            scale_sum(
                self.values.iter().zip(&weights).map(|(osc, w)| osc[n] * w),
                q,
            )
        });
        self.radius.powf(s) * power_mean(per_node, rho)
    }
}

/// Localized oscillations of `g` on all ladder radii.
pub fn oscillation_table<T: FieldValue>(
    g: &Field<T>,
    ball: &Ball,
    w: f64,
    ladder: &DyadicLadder,
) -> Result<OscillationTable> {
    crate::field::check_oscillation_exponent(w)?;
    let grid = g.grid();
    ladder.check(grid)?;
    let outer = grid.nodes_in_ball(ball);
    if outer.is_empty() {
        return Err(Error::InsufficientResolution {
            found: 0,
            required: 1,
        });
    }
    let h = grid.h();
    let vals = g.values();
    let nx = grid.nx() as isize;
    let ny = grid.ny() as isize;
    let center = ball.center();
    let big_r = ball.radius();
    let mut inner: Vec<usize> = Vec::new();
    let radii = ladder.radii();
    let values = radii
        .iter()
        .map(|&t| {
            let stride = ((t / h) / INNER_STEPS_PER_RADIUS).floor().max(1.0) as isize;
            let steps = (t / h).ceil() as isize / stride;
            let mut offsets = Vec::new();
            for dj in -steps..=steps {
                for di in -steps..=steps {
                    let (dx, dy) = ((di * stride) as f64 * h, (dj * stride) as f64 * h);
                    if dx * dx + dy * dy < t * t {
                        offsets.push((di * stride, dj * stride));
                    }
                }
            }
            let reach = steps * stride;
            outer
                .iter()
                .map(|&k| {
                    let (ci, cj) = grid.coords(k);
                    let (ci, cj) = (ci as isize, cj as isize);
                    let x = grid.node_position(k);
                    let interior = (x - center).norm() + t < big_r
                        && ci - reach >= 0
                        && cj - reach >= 0
                        && ci + reach < nx
                        && cj + reach < ny;
                    inner.clear();
                    if interior {
                        inner.extend(offsets.iter().map(|&(di, dj)| ((cj + dj) * nx + ci + di) as usize));
                    } else {
                        for &(di, dj) in &offsets {
                            let (ii, jj) = (ci + di, cj + dj);
                            if ii < 0 || jj < 0 || ii >= nx || jj >= ny {
                                continue;
                            }
                            let n = grid.index(ii as usize, jj as usize);
                            if ball.contains(grid.node_position(n)) {
                                inner.push(n);
                            }
                        }
                    }
                    crate::field::oscillation_over(vals, &inner, w)
                })
                .collect()
        })
        .collect();
    Ok(OscillationTable {
        radius: ladder.radius,
        radii,
        values,
    })
}

pub fn besov_estimate<T: FieldValue>(
    g: &Field<T>,
    ball: &Ball,
    params: &SmoothnessParams,
    ladder: &DyadicLadder,
) -> Result<BesovEstimate> {
    params.validate_besov()?;
    Ok(oscillation_table(g, ball, params.w, ladder)?.besov(params.s, params.rho, params.q))
}

/// `R^s (Σ_j ln2 (‖osc^B_w g(·,t_j)‖_{L^ρ(B)} / t_j^s)^q)^{1/q}`.
pub fn besov_seminorm<T: FieldValue>(
    g: &Field<T>,
    ball: &Ball,
    params: &SmoothnessParams,
    ladder: &DyadicLadder,
) -> Result<f64> {
    Ok(besov_estimate(g, ball, params, ladder)?.value)
}

/// `R^s ‖(Σ_j ln2 (osc^B_w g(·,t_j) / t_j^s)^q)^{1/q}‖_{L^ρ(B)}`.
pub fn triebel_seminorm<T: FieldValue>(
    g: &Field<T>,
    ball: &Ball,
    params: &SmoothnessParams,
    ladder: &DyadicLadder,
) -> Result<f64> {
    params.validate_triebel()?;
    Ok(oscillation_table(g, ball, params.w, ladder)?.triebel(params.s, params.rho, params.q))
}

/// `(|T_α G| at (αs, ρ/α, q/α, w/α), |G|^α at (s, ρ, q, w))`.
pub fn power_transform_ratio(
    g: &VectorField,
    ball: &Ball,
    params: &SmoothnessParams,
    alpha: f64,
    ladder: &DyadicLadder,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0,1], got {alpha}")));
    }
    let powered = params.powered(alpha);
    powered.validate_besov()?;
    params.validate_besov()?;
    let transformed = g.map(|q| t_alpha(alpha, q).expect("alpha checked positive"));
    let lhs = besov_seminorm(&transformed, ball, &powered, ladder)?;
    let rhs = besov_seminorm(g, ball, params, ladder)?.powf(alpha);
    Ok((lhs, rhs))
}
