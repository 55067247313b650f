//! Seeded sampling and the calibrate/validate protocol used for every
//! inequality whose constant is only known to exist.
//!
//! All randomness comes from ChaCha8 (a counter-based stream cipher
//! generator) seeded with an explicit `u64`, so suites are reproducible
//! across platforms and runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{Ball, Grid2D};
use crate::orlicz::Vec2;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Log-uniform sample in `[lo, hi]`, both positive.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Uniform sample on the unit circle scaled by `radius`.
pub fn on_circle<R: Rng>(rng: &mut R, radius: f64) -> Vec2 {
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    Vec2::new(radius * t.cos(), radius * t.sin())
}

/// Largest `lhs / rhs` over the pairs. Pairs where both sides vanish are
/// skipped; a positive left side over a vanishing right side gives `+∞`.
pub fn max_ratio<I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut out = 0.0f64;
    for (lhs, rhs) in pairs {
        if rhs > 0.0 {
            out = out.max(lhs / rhs);
        } else if lhs > 0.0 {
            return f64::INFINITY;
        }
    }
    out
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_spread(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub passed: usize,
    pub total: usize,
}

impl Validation {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

/// Count the pairs satisfying `lhs ≤ slack · constant · rhs`.
pub fn validate_ratio<I>(pairs: I, constant: f64, slack: f64) -> Validation
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut v = Validation { passed: 0, total: 0 };
    for (lhs, rhs) in pairs {
        v.total += 1;
        if lhs <= slack * constant * rhs {
            v.passed += 1;
        }
    }
    v
}

/// Sample balls whose closure lies inside `region` shrunk by `margin` times
/// the radius. `margin = 2` keeps the doubled ball inside as well.
pub fn sample_balls(
    seed: u64,
    count: usize,
    grid: &Grid2D,
    radius_range: (f64, f64),
    margin: f64,
) -> Vec<Ball> {
    let mut rng = seeded_rng(seed);
    let (x_lo, x_hi) = (grid.x0(), grid.x_max());
    let (y_lo, y_hi) = (grid.y0(), grid.y_max());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = if radius_range.0 == radius_range.1 {
            radius_range.0
        } else {
            rng.gen_range(radius_range.0..radius_range.1)
        };
        let pad = margin * r;
        if x_hi - x_lo <= 2.0 * pad || y_hi - y_lo <= 2.0 * pad {
            // radius too large for the requested margin; shrink the draw
            continue;
        }
        let cx = rng.gen_range(x_lo + pad..x_hi - pad);
        let cy = rng.gen_range(y_lo + pad..y_hi - pad);
        out.push(Ball::new(Vec2::new(cx, cy), r).expect("positive radius"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_ratio_conventions() {
        assert_eq!(max_ratio([(1.0, 2.0), (3.0, 1.0)]), 3.0);
        assert_eq!(max_ratio([(0.0, 0.0), (1.0, 4.0)]), 0.25);
        assert!(max_ratio([(1.0, 0.0)]).is_infinite());
        assert_eq!(max_ratio(std::iter::empty()), 0.0);
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let a: Vec<f64> = (0..5).map(|_| 0.0).scan(seeded_rng(7), |r, _| Some(r.gen())).collect();
        let b: Vec<f64> = (0..5).map(|_| 0.0).scan(seeded_rng(7), |r, _| Some(r.gen())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn balls_respect_margin() {
        let g = Grid2D::square(0.0, 1.0, 32).unwrap();
        for b in sample_balls(3, 50, &g, (0.05, 0.2), 2.0) {
            let pad = 2.0 * b.radius();
            assert!(b.center().x - pad >= 0.0 && b.center().x + pad <= 1.0);
            assert!(b.center().y - pad >= 0.0 && b.center().y + pad <= 1.0);
        }
    }

    #[test]
    fn validation_counts() {
        let v = validate_ratio([(1.0, 1.0), (2.0, 1.0), (1.1, 1.0)], 1.0, 1.2);
        assert_eq!(v, Validation { passed: 2, total: 3 });
        assert!((v.rate() - 2.0 / 3.0).abs() < 1e-15);
    }
}
