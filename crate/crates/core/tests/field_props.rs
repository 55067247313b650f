use plab_core::calibration::{max_ratio, validate_ratio};
use plab_core::field::*;
use plab_core::orlicz::*;
use plab_core::solver::TrigSeries;
use proptest::prelude::*;

fn grid() -> Grid2D {
    Grid2D::square(0.0, 1.0, 32).unwrap()
}

fn series() -> impl Strategy<Value = TrigSeries> {
    (0u64..10_000).prop_map(|seed| TrigSeries::random(seed, 3, 8.0, 1.0))
}

fn ball() -> impl Strategy<Value = Ball> {
    (0.2..0.8f64, 0.2..0.8f64, 0.15..0.35f64).prop_map(|(x, y, r)| Ball::new(Vec2::new(x, y), r).unwrap())
}

fn exponent_w() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0..4.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oscillation_ignores_constants(s in series(), b in ball(), w in exponent_w(), c in -1e3..1e3f64) {
        let f = grid().sample(|q| s.value(q));
        let base = f.oscillation(&b, w).unwrap();
        let shifted = f.offset(c).oscillation(&b, w).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-12 * (1.0 + c.abs()), "{base} {shifted}");
    }

    #[test]
    fn oscillation_is_homogeneous(s in series(), b in ball(), w in exponent_w(), lambda in -1e3..1e3f64) {
        let f = grid().sample(|q| s.gradient(q));
        let base = f.oscillation(&b, w).unwrap();
        let scaled = f.scaled(lambda).oscillation(&b, w).unwrap();
        prop_assert!((scaled - lambda.abs() * base).abs() <= 1e-12 * lambda.abs().max(1.0) * base.max(1e-300));
    }

    #[test]
    fn mean_and_infimum_oscillations_bracket(s in series(), b in ball(), w in prop_oneof![Just(1.0), Just(2.0), 1.0..4.0f64]) {
        let f = grid().sample(|q| s.gradient(q));
        let (mean_version, inf_version) = f.mean_equivalence_check(&b, w).unwrap();
        prop_assert!(inf_version <= mean_version * (1.0 + 1e-9));
        prop_assert!(mean_version <= 2.0 * inf_version * (1.0 + 1e-9));
    }

    #[test]
    fn mean_is_optimal_in_mean_square(s in series(), b in ball()) {
        let f = grid().sample(|q| s.gradient(q));
        let (mean_version, inf_version) = f.mean_equivalence_check(&b, 2.0).unwrap();
        prop_assert!((inf_version - mean_version).abs() <= 1e-8 * mean_version.max(1e-300));
    }

    #[test]
    fn summation_by_parts(s in series(), t in series()) {
        // u and G vanish on a two-node collar, so no boundary terms remain
        let g = Grid2D::square(0.0, 1.0, 24).unwrap();
        let bump = |q: Vec2| {
            let (x, y) = (q.x, q.y);
            let d = 2.0 * g.h();
            if x <= d || y <= d || x >= 1.0 - d || y >= 1.0 - d {
                0.0
            } else {
                ((x - d) * (1.0 - d - x) * (y - d) * (1.0 - d - y)).powi(3)
            }
        };
        let u = g.sample(|q| bump(q) * s.value(q));
        let v = g.sample(|q| t.gradient(q) * bump(q));
        let gu = gradient(&u);
        let dv = divergence(&v);
        let lhs: f64 = (0..g.len()).map(|k| gu.at(k).dot(v.at(k)) + u.at(k) * dv.at(k)).sum();
        let scale: f64 = (0..g.len()).map(|k| gu.at(k).norm() * v.at(k).norm()).sum();
        prop_assert!(lhs.abs() <= 1e-12 * scale.max(1e-300), "{lhs} {scale}");
    }
}

/// `⨍_B |V(g) − V(Q)|²` for the three choices of `Q`.
fn v_distances(g: &VectorField, b: &Ball, ctx: &ExponentCtx) -> [f64; 3] {
    let nodes = g.grid().nodes_in_ball(b);
    let dist = |q: Vec2| {
        let vq = v_map(ctx, q);
        nodes.iter().map(|&k| (v_map(ctx, g.at(k)) - vq).norm_sq()).sum::<f64>() / nodes.len() as f64
    };
    [
        dist(v_average(g, b, ctx).unwrap()),
        dist(g.ball_average(b).unwrap()),
        dist(a_average(g, b, ctx).unwrap()),
    ]
}

fn suite(ctx: &ExponentCtx, seed0: u64) -> Vec<(f64, f64)> {
    let g = Grid2D::square(0.0, 1.0, 48).unwrap();
    let mut out = Vec::new();
    for k in 0..20 {
        let s = TrigSeries::random(seed0 + k, 3, 6.0, 1.0).with_linear(Vec2::new(0.3 * k as f64 - 3.0, 0.5), 0.0);
        let f = g.sample(|q| s.gradient(q));
        let b = Ball::new(Vec2::new(0.5, 0.5), 0.2 + 0.01 * k as f64).unwrap();
        let d = v_distances(&f, &b, ctx);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    out.push((d[i], d[j]));
                }
            }
        }
    }
    out
}

#[test]
fn v_distance_choices_are_equivalent() {
    for p in [1.5, 2.0, 3.0, 4.5] {
        let ctx = ExponentCtx::new(p).unwrap();
        let train = suite(&ctx, 100);
        let c = max_ratio(train.iter().copied());
        assert!(c.is_finite() && c >= 1.0, "p={p}: {c}");
        let check = validate_ratio(suite(&ctx, 900), c, 1.2);
        assert!(check.rate() >= 0.95, "p={p}: c={c} {check:?}");
    }
}

#[test]
fn v_average_minimises_among_the_three() {
    let ctx = ExponentCtx::new(3.0).unwrap();
    for (lhs, rhs) in suite(&ctx, 5).chunks(6).map(|c| (c[0].0, c[0].1)) {
        // the V-average is the least-squares centre of V(g)
        assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}
