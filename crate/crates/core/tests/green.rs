use std::f64::consts::PI;

use gelfand::green::{DerivativeOrder, Domain, GreenEvaluator, DEFAULT_FD_STEP};
use gelfand::mesh::{project_to_unit_circle, Mesh};
use gelfand::{Error, Point2};
use proptest::prelude::*;

fn interior() -> impl Strategy<Value = Point2> {
    (0.0f64..0.9, 0.0f64..2.0 * PI).prop_map(|(r, t)| Point2::from_polar(r, t))
}

#[test]
fn robin_is_log_of_distance_to_circle() {
    let ev = GreenEvaluator::unit_disk();
    for r in [0.0, 0.3, 0.7, 0.95] {
        let x = Point2::new(0.0, r);
        assert!((ev.robin(x).unwrap() - (1.0 - r * r).ln() / (2.0 * PI)).abs() < 1e-14);
    }
}

#[test]
fn derivative_orders_agree_with_direct_calls() {
    let ev = GreenEvaluator::unit_disk();
    let (x, y) = (Point2::new(0.1, 0.2), Point2::new(-0.3, 0.0));
    assert_eq!(ev.green_derivatives(x, y, DerivativeOrder::GradX).unwrap(), ev.grad_x(x, y).unwrap().to_vec());
    assert_eq!(ev.green_derivatives(x, y, DerivativeOrder::GradY).unwrap().len(), 2);
    let hxy = ev.green_derivatives(x, y, DerivativeOrder::HessXY).unwrap();
    assert_eq!(hxy.len(), 4);
    assert_eq!(hxy[1], ev.hess_xy(x, y).unwrap()[0][1]);
}

#[test]
fn meshed_evaluator_is_symmetric_and_close_to_disk() {
    let mesh = Mesh::disk_uniform(64).unwrap().refine_uniform(Some(&project_to_unit_circle)).unwrap().mesh;
    let ev = GreenEvaluator::new(Domain::meshed(mesh)).unwrap();
    assert_eq!(ev.fd_step(), DEFAULT_FD_STEP);
    let disk = GreenEvaluator::unit_disk();
    let pts = [Point2::new(0.2, 0.1), Point2::new(-0.4, 0.3), Point2::new(0.0, -0.5)];
    for &x in &pts {
        for &y in &pts {
            if x == y {
                continue;
            }
            let (a, b) = (ev.green(x, y).unwrap(), ev.green(y, x).unwrap());
            assert!((a - b).abs() < 1e-12);
            assert!((a - disk.green(x, y).unwrap()).abs() < 5e-3);
        }
    }
    assert!(matches!(ev.robin(Point2::new(1.5, 0.0)), Err(Error::OutsideDomain(_))));
}

#[test]
fn green_field_matches_pointwise_values() {
    let ev = GreenEvaluator::unit_disk();
    let y = Point2::new(0.25, -0.1);
    let pts = [Point2::new(0.5, 0.5), Point2::new(-0.7, 0.0)];
    let field = ev.green_field(y, &pts).unwrap();
    for (p, v) in pts.iter().zip(&field) {
        assert!((ev.green(*p, y).unwrap() - v).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn disk_green_is_symmetric_and_positive(x in interior(), y in interior()) {
        prop_assume!(x.dist(y) > 1e-3);
        let ev = GreenEvaluator::unit_disk();
        let (a, b) = (ev.green(x, y).unwrap(), ev.green(y, x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a > 0.0);
        // G = Φ + K with Φ = −log|x − y|/(2π)
        let k = ev.regular(x, y).unwrap();
        prop_assert!((a - (-(x.dist(y)).ln() / (2.0 * PI) + k)).abs() < 1e-12);
    }

    #[test]
    fn robin_gradient_matches_differences(x in interior()) {
        let ev = GreenEvaluator::unit_disk();
        let g = ev.robin_grad(x).unwrap();
        let h = 1e-6;
        for a in 0..2 {
            let e = Point2::unit(a);
            let fd = (ev.robin(x + e * h).unwrap() - ev.robin(x - e * h).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[a]).abs() < 1e-5 * (1.0 + g[a].abs()));
        }
    }
}
