//! Fixtures shared by the benchmarks.

use plab_core::solver::TrigSeries;
use plab_core::{Ball, Grid2D, ScalarField, Vec2, VectorField};

/// Smooth boundary data on `[0,1]²` with `cells` cells per side.
pub fn trig_data(cells: usize, seed: u64) -> ScalarField {
    let g = Grid2D::square(0.0, 1.0, cells).expect("valid grid");
    let s = TrigSeries::random(seed, 3, 6.0, 1.0);
    g.sample(|q| s.value(q))
}

/// Gradient field of a random series on `[0,1]²`.
pub fn trig_gradient(cells: usize, seed: u64) -> VectorField {
    let g = Grid2D::square(0.0, 1.0, cells).expect("valid grid");
    let s = TrigSeries::random(seed, 3, 6.0, 1.0);
    g.sample(|q| s.gradient(q))
}

pub fn centre_ball(radius: f64) -> Ball {
    Ball::new(Vec2::new(0.5, 0.5), radius).expect("positive radius")
}
