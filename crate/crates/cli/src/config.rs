//! JSON experiment configuration.
//!
//! One file describes one experiment. Relative paths inside it are resolved
//! against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use plab_core::besov::inf_float;
use plab_core::calibration::sample_balls;
use plab_core::decay::{Quantity, SeminormKind, DEFAULT_EPSILON_DG};
use plab_core::solver::{CatalogueEntry, TrigSeries};
use plab_core::{Ball, ExponentCtx, Grid2D, SmoothnessParams, SolverOptions, Vec2};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub domain_mask: DomainMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub forcing: ForcingSpec,
    /// Base path of a scalar dump used instead of solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balls: Option<BallSpec>,
    #[serde(default)]
    pub smoothness: Vec<SmoothnessParams>,
    #[serde(default = "default_seminorms")]
    pub seminorms: Vec<SeminormKind>,
    /// Number of dyadic scales `J` of the seminorm estimators.
    #[serde(default = "default_scales")]
    pub scales: usize,
    /// Field measured by `besov`.
    #[serde(default = "default_besov_quantity")]
    pub besov_quantity: Quantity,
    #[serde(default)]
    pub decay: DecaySpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seminorms() -> Vec<SeminormKind> {
    vec![SeminormKind::Besov]
}

fn default_scales() -> usize {
    4
}

fn default_besov_quantity() -> Quantity {
    Quantity::AGrad
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// `nx × ny` nodes with spacing `h` and lower-left corner `(x0, y0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainMask {
    #[default]
    Rectangle,
    /// Unknowns are the interior nodes inside the disk.
    Disk { center: [f64; 2], radius: f64 },
}

/// A random trigonometric series drawn from `seed + stream`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTrig {
    pub modes: usize,
    pub max_wavenumber: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub linear: [f64; 2],
    #[serde(default)]
    pub stream: u64,
}

impl RandomTrig {
    pub fn series(&self, seed: u64) -> TrigSeries {
        TrigSeries::random(
            seed.wrapping_add(self.stream),
            self.modes,
            self.max_wavenumber,
            self.amplitude,
        )
        .with_linear(Vec2::new(self.linear[0], self.linear[1]), 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Catalogue(CatalogueEntry),
    Random(RandomTrig),
    /// Base path of a scalar dump.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSpec {
    Catalogue(CatalogueEntry),
    Random(RandomTrig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSpec {
    Series(TrigSeries),
    Random(RandomTrig),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingSpec {
    #[default]
    None,
    /// `F = A(∇u*) + rot90(∇ψ)`; the boundary defaults to `u*`.
    Manufactured {
        solution: SolutionSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<SeriesSpec>,
    },
    /// Base path of a vector dump.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallEntry {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallSpec {
    Explicit(Vec<BallEntry>),
    Sampler {
        count: usize,
        radius_range: [f64; 2],
        /// Balls keep `margin · r` away from the grid edge.
        #[serde(default = "default_margin")]
        margin: f64,
        /// Falls back to the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn default_margin() -> f64 {
    1.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySpec {
    pub theta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub epsilon_dg: f64,
    /// Extra thresholds for the classification histogram.
    pub epsilon_sweep: Vec<f64>,
    #[serde(with = "inf_float")]
    pub w: f64,
    pub quantities: Vec<Quantity>,
    /// Exponent at which decay constants are calibrated.
    pub beta: f64,
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self {
            theta: 0.5,
            k: 6,
            epsilon_dg: DEFAULT_EPSILON_DG,
            epsilon_sweep: vec![1e-3, 1e-2, 1e-1],
            w: 1.0,
            quantities: vec![Quantity::AGrad, Quantity::Grad, Quantity::VGrad],
            beta: 0.9,
        }
    }
}

/// A parsed configuration together with the directory relative paths refer to.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("schema error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn load(path: &Path) -> Result<Loaded, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = Self::from_json(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { config, base_dir })
    }

    pub fn ctx(&self) -> Result<ExponentCtx, CliError> {
        ExponentCtx::new(self.p).map_err(|e| CliError::Config(format!("p: {e}")))
    }

    pub fn grid(&self) -> Result<Grid2D, CliError> {
        let g = self.grid;
        Grid2D::new(g.x0, g.y0, g.h, g.nx, g.ny).map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    /// The seed recorded in outputs; unseeded runs draw nothing at random.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn samples(&self) -> bool {
        let random_solution = |s: &SolutionSpec| matches!(s, SolutionSpec::Random(_));
        let random_psi = |s: &Option<SeriesSpec>| matches!(s, Some(SeriesSpec::Random(_)));
        matches!(self.boundary, Some(BoundarySpec::Random(_)))
            || matches!(&self.forcing, ForcingSpec::Manufactured { solution, psi } if random_solution(solution) || random_psi(psi))
            || matches!(self.balls, Some(BallSpec::Sampler { seed: None, .. }))
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self, base_dir: &Path) -> Result<(), CliError> {
        self.ctx()?;
        self.grid()?;
        self.solver
            .validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))?;
        if self.samples() && self.seed.is_none() {
            return Err(CliError::Config("seed: required because the experiment samples at random".into()));
        }
        let d = &self.decay;
        if !(d.theta > 0.0 && d.theta < 1.0) {
            return Err(CliError::Config(format!("decay.theta must lie in (0,1), got {}", d.theta)));
        }
        if !(d.epsilon_dg > 0.0) || d.epsilon_sweep.iter().any(|&e| !(e > 0.0)) {
            return Err(CliError::Config("decay.epsilon_dg values must be positive".into()));
        }
        if let DomainMask::Disk { radius, .. } = self.domain_mask {
            if !(radius > 0.0) {
                return Err(CliError::Config("domain_mask.radius must be positive".into()));
            }
        }
        if let Some(BallSpec::Sampler { count, radius_range, margin, .. }) = &self.balls {
            if *count == 0 || !(radius_range[0] > 0.0 && radius_range[0] <= radius_range[1]) || !(*margin >= 1.0) {
                return Err(CliError::Config("balls.sampler needs count > 0, 0 < r_min ≤ r_max and margin ≥ 1".into()));
            }
            let g = self.grid()?;
            let side = (g.x_max() - g.x0()).min(g.y_max() - g.y0());
            if 2.0 * margin * radius_range[0] >= side {
                return Err(CliError::Config("balls.sampler: margin·r_min leaves no room for centres".into()));
            }
        }
        for path in self.paths() {
            let base = base_dir.join(path);
            if !base.with_extension("json").is_file() || !base.with_extension("csv").is_file() {
                return Err(CliError::Config(format!("field dump {} not found", base.display())));
            }
        }
        Ok(())
    }

    fn paths(&self) -> Vec<&Path> {
        let mut out = Vec::new();
        if let Some(BoundarySpec::File(p)) = &self.boundary {
            out.push(p.as_path());
        }
        if let ForcingSpec::File(p) = &self.forcing {
            out.push(p.as_path());
        }
        if let Some(p) = &self.solution {
            out.push(p.as_path());
        }
        out
    }

    /// The experiment balls, sorted by centre and radius.
    pub fn balls(&self, grid: &Grid2D) -> Result<Vec<Ball>, CliError> {
        let mut balls = match &self.balls {
            None => return Err(CliError::Config("balls: required by this command".into())),
            Some(BallSpec::Explicit(list)) => list
                .iter()
                .map(|b| Ball::new(Vec2::new(b.center[0], b.center[1]), b.radius))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("balls: {e}")))?,
            Some(BallSpec::Sampler { count, radius_range, margin, seed }) => sample_balls(
                seed.unwrap_or(self.effective_seed()),
                *count,
                grid,
                (radius_range[0], radius_range[1]),
                *margin,
            ),
        };
        for b in &balls {
            if !grid.contains_ball(b) {
                return Err(CliError::Config(format!(
                    "balls: ball at ({}, {}) with radius {} leaves the grid",
                    b.center().x,
                    b.center().y,
                    b.radius()
                )));
            }
        }
        balls.sort_by(|a, b| ball_key(a).partial_cmp(&ball_key(b)).expect("finite balls"));
        Ok(balls)
    }
}

fn ball_key(b: &Ball) -> (f64, f64, f64) {
    (b.center().x, b.center().y, b.radius())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "p": 3,
        "grid": {"nx": 33, "ny": 33, "x0": 1, "y0": 1, "h": 0.03125},
        "domain_mask": {"kind": "disk", "center": [1.5, 1.5], "radius": 0.45},
        "forcing": {"manufactured": {
            "solution": {"random": {"modes": 3, "max_wavenumber": 5, "amplitude": 0.5, "linear": [1, 0.5]}},
            "psi": {"random": {"modes": 3, "max_wavenumber": 5, "amplitude": 0.3, "stream": 7}}
        }},
        "balls": {"sampler": {"count": 4, "radius_range": [0.1, 0.2]}},
        "smoothness": [{"s": 0.5, "rho": 1, "q": "inf", "w": 1.5}],
        "seminorms": ["besov", "triebel"],
        "decay": {"theta": 0.5, "K": 5, "quantities": ["A_grad", "F"]},
        "seed": 9
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let a = ExperimentConfig::from_json(FULL).unwrap();
        let b = ExperimentConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        assert!(b.smoothness[0].q.is_infinite());
        assert_eq!(b.decay.k, 5);
        assert_eq!(b.decay.epsilon_dg, DEFAULT_EPSILON_DG);
    }

    #[test]
    fn missing_p_is_named() {
        let text = FULL.replacen("\"p\": 3,", "", 1);
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("missing field `p`"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn sampling_needs_a_seed() {
        let text = FULL.replacen("\"seed\": 9", "\"output_dir\": \"x\"", 1);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let err = cfg.validate(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn sampled_balls_are_sorted_and_inside() {
        let cfg = ExperimentConfig::from_json(FULL).unwrap();
        let g = cfg.grid().unwrap();
        let balls = cfg.balls(&g).unwrap();
        assert_eq!(balls.len(), 4);
        assert!(balls.windows(2).all(|w| w[0].center().x <= w[1].center().x));
    }
}
