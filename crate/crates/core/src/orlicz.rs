//! Power-type N-functions `φ(t) = t^p / p`, their shifts and conjugates, and
//! the vector maps `A`, `V` and `T_α` built on top of them.
//!
//! Everything here is a closed-form, allocation-free function of its inputs.
//! Equivalence constants between the quantities of [`hammer_panel`] are not
//! known in closed form; they are calibrated by sampling in the test suites.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Growth exponent `p > 1` together with its Hölder conjugate `p' = p/(p-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentCtx {
    p: f64,
    p_conj: f64,
}

impl ExponentCtx {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(domain(format!("exponent p must be finite and > 1, got {p}")));
        }
        Ok(Self {
            p,
            p_conj: p / (p - 1.0),
        })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn p_conj(&self) -> f64 {
        self.p_conj
    }

    /// The context of the dual problem, with `p` and `p'` swapped.
    pub fn conjugate(&self) -> Self {
        Self {
            p: self.p_conj,
            p_conj: self.p,
        }
    }
}

/// A vector in the plane. Used both for field values and for points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by a right angle, `(a, b) ↦ (-b, a)`.
    #[inline]
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Inverse of [`Vec2::rot90`].
    #[inline]
    pub fn rot90_inv(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2::new(
            self.x * other.x,
            self.x * other.y,
            self.y * other.x,
            self.y * other.y,
        )
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// Row-major 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };
    pub const ZERO: Mat2 = Mat2 {
        m: [[0.0, 0.0], [0.0, 0.0]],
    };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, 0.0, b)
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    /// `(M ξ)·ξ`
    #[inline]
    pub fn quad_form(&self, xi: Vec2) -> f64 {
        self.mul_vec(xi).dot(xi)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let m = self.m;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn is_symmetric(&self) -> bool {
        self.m[0][1] == self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let a = self.m[0][0];
        let d = self.m[1][1];
        let b = 0.5 * (self.m[0][1] + self.m[1][0]);
        let mean = 0.5 * (a + d);
        let rad = (0.5 * (a - d)).hypot(b);
        [mean - rad, mean + rad]
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut out = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                out = out.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        out
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(domain(format!("{name} must be non-negative, got {v}")));
    }
    Ok(())
}

/// `|Q|^{α-1} Q`, with `0 ↦ 0`.
#[inline]
fn power_scale(alpha: f64, q: Vec2) -> Vec2 {
    let n = q.norm();
    if n == 0.0 {
        Vec2::ZERO
    } else {
        q * n.powf(alpha - 1.0)
    }
}

/// Shifted power N-function with exponent `r`, evaluated in closed form.
fn shifted_power(r: f64, a: f64, t: f64) -> f64 {
    if t <= a {
        if t == 0.0 {
            0.0
        } else {
            a.powf(r - 2.0) * t * t / 2.0
        }
    } else {
        let ap = a.powf(r);
        ap / 2.0 + (t.powf(r) - ap) / r
    }
}

/// `φ(t) = t^p / p`
pub fn phi(ctx: &ExponentCtx, t: f64) -> Result<f64> {
    check_nonneg("t", t)?;
    Ok(t.powf(ctx.p) / ctx.p)
}

/// Conjugate N-function `φ*(t) = t^{p'} / p'`.
pub fn phi_conj(ctx: &ExponentCtx, t: f64) -> Result<f64> {
    check_nonneg("t", t)?;
    Ok(t.powf(ctx.p_conj) / ctx.p_conj)
}

/// The shifted N-function `φ_a(t) = ∫_0^t φ'(max{a,s})/max{a,s} · s ds`.
///
/// Quadratic below the shift (`a^{p-2} t²/2` for `t ≤ a`), power-like above.
pub fn phi_shifted(ctx: &ExponentCtx, a: f64, t: f64) -> Result<f64> {
    check_nonneg("shift a", a)?;
    check_nonneg("t", t)?;
    Ok(shifted_power(ctx.p, a, t))
}

/// Derivative `φ_a'(t) = max{a,t}^{p-2} t`.
pub fn phi_shifted_derivative(ctx: &ExponentCtx, a: f64, t: f64) -> Result<f64> {
    check_nonneg("shift a", a)?;
    check_nonneg("t", t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(a.max(t).powf(ctx.p - 2.0) * t)
}

/// Convex conjugate of `φ_a`, which is exactly the conjugate function `φ*`
/// shifted by `φ'(a) = a^{p-1}`.
pub fn phi_conj_shifted(ctx: &ExponentCtx, a: f64, t: f64) -> Result<f64> {
    check_nonneg("shift a", a)?;
    check_nonneg("t", t)?;
    Ok(shifted_power(ctx.p_conj, a.powf(ctx.p - 1.0), t))
}

/// `A(Q) = |Q|^{p-2} Q`
#[inline]
pub fn a_map(ctx: &ExponentCtx, q: Vec2) -> Vec2 {
    power_scale(ctx.p - 1.0, q)
}

/// `V(Q) = |Q|^{(p-2)/2} Q`
#[inline]
pub fn v_map(ctx: &ExponentCtx, q: Vec2) -> Vec2 {
    power_scale(ctx.p / 2.0, q)
}

/// `A^{-1} = T_{1/(p-1)}`
#[inline]
pub fn a_inv(ctx: &ExponentCtx, q: Vec2) -> Vec2 {
    power_scale(1.0 / (ctx.p - 1.0), q)
}

/// `V^{-1} = T_{2/p}`
#[inline]
pub fn v_inv(ctx: &ExponentCtx, q: Vec2) -> Vec2 {
    power_scale(2.0 / ctx.p, q)
}

/// Power transform `T_α(Q) = |Q|^α Q/|Q|`, `T_α(0) = 0`.
pub fn t_alpha(alpha: f64, q: Vec2) -> Result<Vec2> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(domain(format!("power transform needs alpha > 0, got {alpha}")));
    }
    Ok(power_scale(alpha, q))
}

/// Jacobian `DA(Q) = |Q|^{p-2} (I + (p-2) Q⊗Q/|Q|²)`.
///
/// Its eigenvalues are `|Q|^{p-2}` (across `Q`) and `(p-1)|Q|^{p-2}` (along `Q`).
/// At `Q = 0` the matrix is `I` for `p = 2`, zero for `p > 2`, and undefined for `p < 2`.
pub fn da_matrix(ctx: &ExponentCtx, q: Vec2) -> Result<Mat2> {
    da_matrix_floored(ctx, q, 0.0)
}

/// [`da_matrix`] with `|Q|` replaced by `max{|Q|, floor}` in the scalar
/// prefactor. The rank-one part keeps the true direction of `Q`.
pub fn da_matrix_floored(ctx: &ExponentCtx, q: Vec2, floor: f64) -> Result<Mat2> {
    let p = ctx.p;
    let n = q.norm();
    let n_eff = n.max(floor);
    if n_eff == 0.0 {
        return if p == 2.0 {
            Ok(Mat2::IDENTITY)
        } else if p > 2.0 {
            Ok(Mat2::ZERO)
        } else {
            Err(Error::Singular(format!(
                "DA(0) is unbounded for p = {p} < 2"
            )))
        };
    }
    let s = n_eff.powf(p - 2.0);
    if n == 0.0 {
        return Ok(Mat2::IDENTITY.scale(s));
    }
    let dir = q * (1.0 / n);
    let k = p - 2.0;
    // Build entries directly so that the result is exactly symmetric.
    let off = s * k * dir.x * dir.y;
    Ok(Mat2::new(
        s * (1.0 + k * dir.x * dir.x),
        off,
        off,
        s * (1.0 + k * dir.y * dir.y),
    ))
}

/// Taylor remainder `H(P,Q) = A(P) - A(Q) - DA(Q)(P-Q)`.
pub fn h_remainder(ctx: &ExponentCtx, p: Vec2, q: Vec2) -> Result<Vec2> {
    let da = da_matrix(ctx, q)?;
    Ok(a_map(ctx, p) - a_map(ctx, q) - da.mul_vec(p - q))
}

/// The five mutually equivalent distances between `P` and `Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammerPanel {
    /// `(A(P) - A(Q))·(P - Q)`
    pub monotone: f64,
    /// `|V(P) - V(Q)|²`
    pub v_distance: f64,
    /// `(|Q| + |P|)^{p-2} |Q - P|²`
    pub weighted_distance: f64,
    /// `φ_{|Q|}(|P - Q|)`
    pub shifted_phi: f64,
    /// `φ*_{|A(Q)|}(|A(P) - A(Q)|)`
    pub shifted_conj: f64,
}

impl HammerPanel {
    pub fn entries(&self) -> [f64; 5] {
        [
            self.monotone,
            self.v_distance,
            self.weighted_distance,
            self.shifted_phi,
            self.shifted_conj,
        ]
    }

    /// Largest ratio between any two entries, `1` when all vanish.
    pub fn max_pairwise_ratio(&self) -> f64 {
        let e = self.entries();
        let max = e.iter().cloned().fold(0.0f64, f64::max);
        let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    }
}

pub fn hammer_panel(ctx: &ExponentCtx, p: Vec2, q: Vec2) -> HammerPanel {
    let ap = a_map(ctx, p);
    let aq = a_map(ctx, q);
    let diff = p - q;
    let dn = diff.norm();
    let weighted = if dn == 0.0 {
        0.0
    } else {
        (q.norm() + p.norm()).powf(ctx.p - 2.0) * dn * dn
    };
    HammerPanel {
        monotone: (ap - aq).dot(diff).max(0.0),
        v_distance: (v_map(ctx, p) - v_map(ctx, q)).norm_sq(),
        weighted_distance: weighted,
        shifted_phi: shifted_power(ctx.p, q.norm(), dn),
        shifted_conj: shifted_power(ctx.p_conj, aq.norm(), (ap - aq).norm()),
    }
}

/// Hölder exponent of gradients of planar `p`-harmonic functions obtained
/// from quasi-conformal gradient estimates, valid for `p ≥ 2`.
pub fn alpha_exponent(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(domain(format!("alpha exponent needs p > 1, got {p}")));
    }
    let k = 1.0 / (p - 1.0);
    Ok((-3.0 - k + (33.0 + 30.0 * k + k * k).sqrt()) / (2.0 * p))
}

/// Optimal regularity exponent `η(p)`: for `1 < p < 2`, `∇h ∈ C^{η(p)}` of a
/// planar `p`-harmonic `h`, and `A(∇h) ∈ C^{η(p')}`.
pub fn eta_exponent(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(domain(format!("eta exponent needs p > 1, got {p}")));
    }
    let k = 1.0 / (p - 1.0);
    Ok((1.0 + k + (1.0 + 14.0 * k + k * k).sqrt()) / 6.0)
}
