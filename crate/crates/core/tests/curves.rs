use hilbert16::implicit_curve::{singular_points, trace_zero_set, ComponentKind};
use hilbert16::poly::{BivariatePoly, Box2};

fn suite() -> Vec<(&'static str, BivariatePoly)> {
    [
        ("circle", "x^2 + y^2 - 1"),
        ("two vertical lines", "1 - x^2"),
        ("cubic graph", "x^3 - x - y"),
        ("hyperbola", "x*y - 1"),
        ("two ovals", "(x^2 - 4)^2 + 4*y^2 - 4"),
        ("ellipse", "x^2/4 + 2*y^2 - 1"),
    ]
    .into_iter()
    .map(|(name, text)| (name, text.parse().unwrap()))
    .collect()
}

fn window() -> Box2 {
    Box2::square(-4.0, 4.0).unwrap()
}

#[test]
fn vertex_residual_scales_with_grid() {
    let w = window();
    for grid in [64usize, 256] {
        let hx = w.width() / grid as f64;
        let hy = w.height() / grid as f64;
        for (name, p) in suite() {
            for comp in trace_zero_set(&p, w, grid).unwrap() {
                for v in &comp.polyline {
                    let i = (((v[0] - w.x_lo) / hx).floor() as usize).min(grid - 1);
                    let j = (((v[1] - w.y_lo) / hy).floor() as usize).min(grid - 1);
                    let corner_max = [(0, 0), (1, 0), (0, 1), (1, 1)]
                        .iter()
                        .map(|&(a, b)| p.eval(w.x_lo + (i + a) as f64 * hx, w.y_lo + (j + b) as f64 * hy).abs())
                        .fold(0.0, f64::max);
                    let r = p.eval(v[0], v[1]).abs();
                    assert!(r <= 10.0 * corner_max / grid as f64, "{name} grid {grid}: {r} at {v:?}");
                }
            }
        }
    }
}

#[test]
fn refinement_never_loses_components() {
    for (name, p) in suite() {
        let mut last = 0;
        for grid in [32usize, 64, 128, 256] {
            let m = trace_zero_set(&p, window(), grid).unwrap().len();
            assert!(m >= last, "{name}: M dropped from {last} to {m} at grid {grid}");
            last = m;
        }
    }
}

#[test]
fn enlarging_the_window_keeps_ovals() {
    for (name, p) in suite() {
        let small = trace_zero_set(&p, Box2::square(-3.0, 3.0).unwrap(), 192).unwrap();
        let large = trace_zero_set(&p, Box2::square(-6.0, 6.0).unwrap(), 384).unwrap();
        for oval in small.iter().filter(|c| c.kind == ComponentKind::Oval) {
            let v = oval.polyline[0];
            let nearest = large
                .iter()
                .min_by(|a, b| a.distance_to(v[0], v[1]).total_cmp(&b.distance_to(v[0], v[1])))
                .unwrap();
            assert_eq!(nearest.kind, ComponentKind::Oval, "{name}");
        }
    }
}

#[test]
fn singular_points_ignore_scaling() {
    let cases = ["x^2 - y^2", "x*y", "(x^2 + y^2)^2 - 2*(x^2 - y^2)", "x^2 + y^2 - 1"];
    for text in cases {
        let p: BivariatePoly = text.parse().unwrap();
        let a = singular_points(&p, window(), 1e-9).unwrap();
        let b = singular_points(&p.scale(3.0), window(), 3e-9).unwrap();
        assert_eq!(a.len(), b.len(), "{text}");
        for (u, v) in a.iter().zip(&b) {
            assert!((u[0] - v[0]).abs() < 1e-9 && (u[1] - v[1]).abs() < 1e-9, "{text}: {u:?} vs {v:?}");
        }
    }
}
