//! Closed-form solutions and manufactured forcings.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::seeded_rng;
use crate::error::{domain, Error, Result};
use crate::field::{Grid2D, ScalarField, VectorField};
use crate::orlicz::{a_map, ExponentCtx, Vec2};

/// One product term `amp · sin(kx x + px) · sin(ky y + py)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amp: f64,
    pub kx: f64,
    pub px: f64,
    pub ky: f64,
    pub py: f64,
}

/// Smooth function `c + ℓ·x + Σ terms`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: [f64; 2],
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn product(amp: f64, kx: f64, ky: f64) -> Self {
        Self {
            terms: vec![TrigTerm {
                amp,
                kx,
                px: 0.0,
                ky,
                py: 0.0,
            }],
            ..Self::default()
        }
    }

    /// `modes` terms with wavenumbers in `[0.5, max_wavenumber]`, phases
    /// uniform, and amplitudes `amplitude / modes · U(0.5, 1)`.
    pub fn random(seed: u64, modes: usize, max_wavenumber: f64, amplitude: f64) -> Self {
        let mut rng = seeded_rng(seed);
        let terms = (0..modes)
            .map(|_| TrigTerm {
                amp: amplitude / modes as f64 * rng.gen_range(0.5..1.0),
                kx: rng.gen_range(0.5..max_wavenumber),
                px: rng.gen_range(0.0..TAU),
                ky: rng.gen_range(0.5..max_wavenumber),
                py: rng.gen_range(0.0..TAU),
            })
            .collect();
        Self {
            terms,
            ..Self::default()
        }
    }

    pub fn with_linear(mut self, a: Vec2, c: f64) -> Self {
        self.linear = [a.x, a.y];
        self.constant = c;
        self
    }

    pub fn value(&self, p: Vec2) -> f64 {
        let mut v = self.constant + self.linear[0] * p.x + self.linear[1] * p.y;
        for t in &self.terms {
            v += t.amp * (t.kx * p.x + t.px).sin() * (t.ky * p.y + t.py).sin();
        }
        v
    }

    pub fn gradient(&self, p: Vec2) -> Vec2 {
        let mut g = Vec2::new(self.linear[0], self.linear[1]);
        for t in &self.terms {
            let (sx, cx) = (t.kx * p.x + t.px).sin_cos();
            let (sy, cy) = (t.ky * p.y + t.py).sin_cos();
            g += Vec2::new(t.amp * t.kx * cx * sy, t.amp * t.ky * sx * cy);
        }
        g
    }
}

/// Named closed-form functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CatalogueEntry {
    /// `a·x + b`
    Affine { a: [f64; 2], b: f64 },
    /// `r^{(p−2)/(p−1)}`
    Radial,
    /// `x² − y²`
    HarmonicPoly,
    /// `log r`
    LogRadial,
    Trig(TrigSeries),
}

/// A catalogue entry bound to an exponent, with value and exact gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    entry: CatalogueEntry,
    radial_exponent: f64,
}

impl ExactSolution {
    /// Bind `entry` to `ctx` without asking for `p`-harmonicity; used for
    /// boundary data and manufactured solutions.
    pub fn new(entry: CatalogueEntry, ctx: &ExponentCtx) -> Result<Self> {
        let p = ctx.p();
        let radial_exponent = (p - 2.0) / (p - 1.0);
        if matches!(entry, CatalogueEntry::Radial) && p == 2.0 {
            return Err(domain("the radial power solution degenerates at p = 2; use log_radial"));
        }
        Ok(Self {
            entry,
            radial_exponent,
        })
    }

    pub fn entry(&self) -> &CatalogueEntry {
        &self.entry
    }

    pub fn is_singular_at_origin(&self) -> bool {
        matches!(self.entry, CatalogueEntry::Radial | CatalogueEntry::LogRadial)
    }

    pub fn value(&self, q: Vec2) -> f64 {
        match &self.entry {
            CatalogueEntry::Affine { a, b } => a[0] * q.x + a[1] * q.y + b,
            CatalogueEntry::Radial => q.norm().powf(self.radial_exponent),
            CatalogueEntry::HarmonicPoly => q.x * q.x - q.y * q.y,
            CatalogueEntry::LogRadial => q.norm().ln(),
            CatalogueEntry::Trig(t) => t.value(q),
        }
    }

    pub fn gradient(&self, q: Vec2) -> Vec2 {
        match &self.entry {
            CatalogueEntry::Affine { a, .. } => Vec2::new(a[0], a[1]),
            CatalogueEntry::Radial => {
                let e = self.radial_exponent;
                q * (e * q.norm_sq().powf(0.5 * e - 1.0))
            }
            CatalogueEntry::HarmonicPoly => Vec2::new(2.0 * q.x, -2.0 * q.y),
            CatalogueEntry::LogRadial => q * (1.0 / q.norm_sq()),
            CatalogueEntry::Trig(t) => t.gradient(q),
        }
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.is_singular_at_origin() && grid.contains_point(Vec2::ZERO) {
            return Err(domain("radial solutions are singular at the origin, which lies in the grid"));
        }
        Ok(())
    }

    pub fn sample(&self, grid: &Grid2D) -> Result<(ScalarField, VectorField)> {
        self.check_grid(grid)?;
        Ok((grid.sample(|q| self.value(q)), grid.sample(|q| self.gradient(q))))
    }
}

/// Exact `p`-harmonic function from the catalogue, sampled with its gradient.
pub fn catalogue(entry: CatalogueEntry, ctx: &ExponentCtx, grid: &Grid2D) -> Result<(ScalarField, VectorField)> {
    let p = ctx.p();
    match entry {
        CatalogueEntry::HarmonicPoly | CatalogueEntry::LogRadial if p != 2.0 => {
            return Err(Error::Parameter(format!(
                "{entry:?} is only harmonic for p = 2, got p = {p}"
            )))
        }
        CatalogueEntry::Trig(_) => {
            return Err(Error::Parameter(
                "trigonometric series are not p-harmonic; use them as data or manufactured solutions".into(),
            ))
        }
        _ => {}
    }
    ExactSolution::new(entry, ctx)?.sample(grid)
}

/// `F = A(∇u*) + rot90(∇ψ)`, for which `u*` solves `−div A(∇u) = −div F`.
pub fn manufactured_forcing(
    exact: &ExactSolution,
    ctx: &ExponentCtx,
    grid: &Grid2D,
    psi: Option<&TrigSeries>,
) -> Result<VectorField> {
    exact.check_grid(grid)?;
    Ok(grid.sample(|q| {
        let base = a_map(ctx, exact.gradient(q));
        match psi {
            Some(s) => base + s.gradient(q).rot90(),
            None => base,
        }
    }))
}
