mod support;

use nalgebra::DMatrix;
use paraverify::exprlang::parse;
use paraverify::geometry::{lie_derivative_metric_at, PointGeometry};
use paraverify::manifold::{load_spec, load_spec_for, sample_points, FieldBundle, Point, Requirements, SamplePlan};
use paraverify::tensor::max_abs;
use support::{close, fd_christoffel, fd_curvature, fd_partial, flow_lie_derivative};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn fix_2d() -> FieldBundle {
    let text = std::fs::read_to_string(format!("{FIXTURES}/fix_2d.spec")).unwrap();
    load_spec_for(&text, &Requirements::NONE).unwrap().bundle
}

fn fix_pot() -> FieldBundle {
    let text = std::fs::read_to_string(format!("{FIXTURES}/fix_pot.spec")).unwrap();
    load_spec(&text).unwrap().bundle
}

fn metric_fn(b: &FieldBundle) -> impl Fn(&[f64]) -> DMatrix<f64> + '_ {
    move |y: &[f64]| b.metric_values(&Point::new(y.to_vec())).unwrap()
}

#[test]
fn christoffel_on_fix_2d() {
    let b = fix_2d();
    let pg = PointGeometry::at(&b, &Point::new(vec![1.0, 2.0])).unwrap();
    let gamma = &pg.christoffel.gamma;
    assert!((gamma[[0, 0, 0]] - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(gamma[[0, 0, 1]], 0.0);
    assert!((gamma[[1, 1, 1]] - 1.0 / 3.0).abs() < 1e-15);

    let g = metric_fn(&b);
    for x in sample_points(&SamplePlan::cube(10, 2, -0.5, 0.5, 3), 2).unwrap() {
        let got = PointGeometry::at(&b, &x).unwrap().christoffel.gamma;
        let want = fd_christoffel(&g, &x.coords, 1e-3);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(close(got[[k, i, j]], want[k][i][j], 1e-6, 1e-9), "Γ^{k}_{i}{j} at {x:?}");
                }
            }
        }
    }
}

#[test]
fn curvature_on_fix_2d_origin() {
    let b = fix_2d();
    let x = Point::new(vec![0.0, 0.0]);
    let curv = PointGeometry::at(&b, &x).unwrap().curvature;
    assert!((curv.ricci[(0, 1)] + 1.0).abs() < 1e-12);
    assert!((curv.scalar + 2.0).abs() < 1e-12);

    let fd = fd_curvature(&metric_fn(&b), &x.coords, 1e-4, 1e-3);
    assert!((fd.ricci[(0, 1)] + 1.0).abs() < 1e-6);
    assert!((fd.scalar + 2.0).abs() < 1e-6);
    // a single independent component up to the curvature symmetries
    let low = curv.riemann_low.as_slice();
    let nonzero: Vec<usize> = (0..16).filter(|&i| low[i].abs() > 1e-12).collect();
    let r0101 = curv.riemann_low[[0, 1, 0, 1]];
    for &i in &nonzero {
        assert!((low[i].abs() - r0101.abs()).abs() < 1e-12);
    }
    assert!(close(r0101, fd.riemann_low[5], 1e-6, 1e-8));
}

#[test]
fn fix_pot_curvature_is_block_confined() {
    let b = fix_pot();
    let x = Point::origin(4);
    let curv = PointGeometry::at(&b, &x).unwrap().curvature;
    let fd = fd_curvature(&metric_fn(&b), &x.coords, 1e-4, 1e-3);
    let low = curv.riemann_low.as_slice();
    for (idx, (&got, &want)) in low.iter().zip(&fd.riemann_low).enumerate() {
        let digits = [idx / 64, (idx / 16) % 4, (idx / 4) % 4, idx % 4];
        if got != 0.0 {
            assert!(digits.iter().all(|&d| d == 0 || d == 2), "nonzero outside the (x1, y1) block at {digits:?}");
        }
        assert!(close(got, want, 1e-6, 1e-8));
    }
}

#[test]
fn metric_jet_matches_differenced_values() {
    let b = fix_pot();
    let g = metric_fn(&b);
    for x in sample_points(&SamplePlan::cube(5, 4, -0.3, 0.3, 11), 4).unwrap() {
        let mj = b.metric_at(&x).unwrap();
        for k in 0..4 {
            let d = fd_partial(&g, &x.coords, k, 1e-4);
            for i in 0..4 {
                for j in 0..4 {
                    assert!(close(mj.dg[[k, i, j]], d[(i, j)], 1e-6, 1e-9));
                }
            }
            for l in 0..4 {
                let dd = fd_partial(|y: &[f64]| fd_partial(&g, y, l, 1e-3), &x.coords, k, 1e-3);
                for i in 0..4 {
                    for j in 0..4 {
                        assert!(close(mj.ddg[[k, l, i, j]], dd[(i, j)], 1e-6, 1e-8));
                    }
                }
            }
        }
    }
}

fn lie_case(b: FieldBundle, v: &[&str], x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = b.with_vector_field(v.iter().map(|s| parse(s).unwrap()).collect()).unwrap();
    let p = Point::new(x.to_vec());
    let lie = lie_derivative_metric_at(&b.metric_at(&p).unwrap(), &b.vector_at(&p).unwrap().unwrap());
    let field = |y: &[f64]| b.vector_at(&Point::new(y.to_vec())).unwrap().unwrap().v;
    let oracle = flow_lie_derivative(&metric_fn(&b), &field, x, 1e-3);
    (lie, oracle)
}

#[test]
fn killing_field_on_flat_model() {
    let x = [0.2, -0.1, 0.3, 0.05];
    let (lie, oracle) = lie_case(FieldBundle::flat(2).unwrap(), &["x1", "0", "-y1", "0"], &x);
    assert_eq!(max_abs(&lie), 0.0);
    assert!(max_abs(&oracle) < 1e-8);
}

#[test]
fn euler_field_scales_the_flat_metric() {
    let x = [0.2, -0.1, 0.3, 0.05];
    let flat = FieldBundle::flat(2).unwrap();
    let g = flat.metric_values(&Point::new(x.to_vec())).unwrap();
    let (lie, oracle) = lie_case(flat, &["x1", "x2", "y1", "y2"], &x);
    assert!(max_abs(&(&lie - &g * 2.0)) < 1e-14);
    assert!(max_abs(&(&oracle - &g * 2.0)) < 1e-7);
}

#[test]
fn lie_derivative_on_curved_metric() {
    let v = ["x1*y2 + 1", "sin(y1)", "x2^2 - y1", "0.5*x1"];
    for x in sample_points(&SamplePlan::cube(4, 4, -0.3, 0.3, 19), 4).unwrap() {
        let (lie, oracle) = lie_case(fix_pot(), &v, &x.coords);
        assert!(max_abs(&(&lie - &oracle)) < 1e-6 * (1.0 + max_abs(&lie)), "at {x:?}");
    }
}
