//! Shifted N-functions, discrete `p`-Poisson solvers and oscillation,
//! Besov and Triebel-Lizorkin estimators on uniform planar grids.

pub mod besov;
pub mod calibration;
pub mod decay;
pub mod error;
pub mod field;
pub mod orlicz;
pub mod solver;

pub use besov::{DyadicLadder, SmoothnessParams};
pub use error::{Error, Result};
pub use field::{Ball, Field, Grid2D, ScalarField, VectorField};
pub use orlicz::{ExponentCtx, Mat2, Vec2};
pub use solver::{ConvergenceRecord, DirichletProblem, Solution, SolverOptions};
