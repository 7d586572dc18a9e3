//! Certified real roots of 2x2 polynomial systems inside a window.
//!
//! Boxes are processed breadth-first. A box is dropped when either
//! polynomial's range enclosure excludes zero, accepted when the Krawczyk
//! operator maps it strictly inside itself (existence and uniqueness of a
//! root), and otherwise quadrisected until it falls below the minimum width,
//! at which point it is reported as undecided rather than guessed at.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{BivariatePoly, Box2, Interval, PlanarSystem, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("degenerate system: {0} is identically zero")]
    DegenerateSystem(&'static str),
    #[error("divergence is {0}; no divergence curve to meet")]
    DegenerateDivergence(DivergenceKind),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceKind {
    /// `Div == 0`: Hamiltonian system.
    IdenticallyZero,
    /// `Div` a nonzero constant: Bendixson applies.
    NonzeroConstant,
}

impl std::fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceKind::IdenticallyZero => f.write_str("identically zero"),
            DivergenceKind::NonzeroConstant => f.write_str("a nonzero constant"),
        }
    }
}

/// Classifies a divergence polynomial that admits no curve.
pub fn degenerate_divergence(div: &BivariatePoly) -> Option<DivergenceKind> {
    if div.is_zero() {
        Some(DivergenceKind::IdenticallyZero)
    } else if div.is_constant() {
        Some(DivergenceKind::NonzeroConstant)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root2 {
    pub x: f64,
    pub y: f64,
    /// The true root lies within this distance of `(x, y)`.
    pub radius: f64,
    pub simple: bool,
    pub jacobian_det: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Target residual for point-Newton refinement.
    pub tol: f64,
    /// Boxes narrower than this are returned undecided.
    pub min_width: f64,
    /// Threshold on `|det J| / (|grad p| |grad q|)`.
    pub simplicity_tol: f64,
    /// Total boxes examined before the remaining queue is returned undecided.
    pub max_boxes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, min_width: 1e-10, simplicity_tol: 1e-8, max_boxes: 1_000_000 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    /// Sorted lexicographically by `(x, y)`.
    pub roots: Vec<Root2>,
    pub undecided: Vec<Box2>,
}

impl SolveOutcome {
    /// True when every part of the window was either excluded or certified.
    pub fn is_certified(&self) -> bool {
        self.undecided.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub points: Vec<Root2>,
    /// Number of simple roots; non-simple ones are listed but not counted.
    #[serde(rename = "N")]
    pub n: usize,
    pub undecided_boxes: Vec<Box2>,
    pub window: Box2,
}

impl ContactReport {
    pub fn is_certified(&self) -> bool {
        self.undecided_boxes.is_empty()
    }
}

pub fn solve_system_2d(
    p: &BivariatePoly,
    q: &BivariatePoly,
    window: Box2,
    tol: f64,
) -> Result<SolveOutcome, SolverError> {
    solve_with(p, q, None, window, &SolverOptions::with_tol(tol))
}

/// As [`solve_system_2d`], with an optional third polynomial used only to
/// exclude boxes (a box where it cannot vanish is dropped).
pub fn solve_with(
    p: &BivariatePoly,
    q: &BivariatePoly,
    filter: Option<&BivariatePoly>,
    window: Box2,
    opts: &SolverOptions,
) -> Result<SolveOutcome, SolverError> {
    if !(opts.tol > 0.0) {
        return Err(SolverError::BadTolerance(opts.tol));
    }
    if p.is_zero() {
        return Err(SolverError::DegenerateSystem("p"));
    }
    if q.is_zero() {
        return Err(SolverError::DegenerateSystem("q"));
    }
    let sys = Pair::new(p, q, filter);
    Ok(sys.run(window, opts))
}

/// Contact points of the field with its divergence curve: simple common
/// zeros of `F . grad Div` and `Div` inside `window`.
pub fn contact_points(sys: &PlanarSystem, window: Box2, tol: f64) -> Result<ContactReport, SolverError> {
    let (tangency, div) = sys.contact_system();
    if let Some(kind) = degenerate_divergence(&div) {
        return Err(SolverError::DegenerateDivergence(kind));
    }
    if tangency.is_zero() {
        // F . grad Div vanishes identically: every point of the curve is a
        // contact point, so nothing is isolated.
        return Ok(ContactReport { points: vec![], n: 0, undecided_boxes: vec![window], window });
    }
    let out = solve_with(&tangency, &div, None, window, &SolverOptions::with_tol(tol))?;
    let n = out.roots.iter().filter(|r| r.simple).count();
    Ok(ContactReport { points: out.roots, n, undecided_boxes: out.undecided, window })
}

struct Pair<'a> {
    p: &'a BivariatePoly,
    q: &'a BivariatePoly,
    filter: Option<&'a BivariatePoly>,
    px: BivariatePoly,
    py: BivariatePoly,
    qx: BivariatePoly,
    qy: BivariatePoly,
}

enum Verdict {
    Discard,
    Root(Root2),
    Split,
    Undecided,
}

/// Enlargement applied before the Krawczyk test, so that a root lying on a
/// split line is still interior to some tested box.
const ENLARGE: f64 = 0.1;

impl<'a> Pair<'a> {
    fn new(p: &'a BivariatePoly, q: &'a BivariatePoly, filter: Option<&'a BivariatePoly>) -> Self {
        Self {
            p,
            q,
            filter,
            px: p.differentiate(Var::X),
            py: p.differentiate(Var::Y),
            qx: q.differentiate(Var::X),
            qy: q.differentiate(Var::Y),
        }
    }

    fn run(&self, window: Box2, opts: &SolverOptions) -> SolveOutcome {
        let mut level = vec![window];
        let mut examined = 0usize;
        let mut found = Vec::new();
        let mut undecided = Vec::new();
        while !level.is_empty() {
            if examined + level.len() > opts.max_boxes {
                log::warn!("solver box budget exhausted with {} boxes queued", level.len());
                undecided.extend(level);
                break;
            }
            examined += level.len();
            let verdicts: Vec<Verdict> = level.par_iter().map(|b| self.examine(b, opts)).collect();
            let mut next = Vec::new();
            for (b, v) in level.iter().zip(verdicts) {
                match v {
                    Verdict::Discard => {}
                    Verdict::Root(r) => {
                        if window.contains(r.x, r.y) {
                            found.push(r);
                        }
                    }
                    Verdict::Split => next.extend(b.quadrisect()),
                    Verdict::Undecided => undecided.push(*b),
                }
            }
            level = next;
        }
        log::debug!("solver examined {examined} boxes, {} candidate roots", found.len());
        SolveOutcome { roots: dedup(found), undecided }
    }

    fn examine(&self, b: &Box2, opts: &SolverOptions) -> Verdict {
        if !self.p.eval_interval(b).contains_zero() || !self.q.eval_interval(b).contains_zero() {
            return Verdict::Discard;
        }
        if let Some(f) = self.filter {
            if !f.eval_interval(b).contains_zero() {
                return Verdict::Discard;
            }
        }
        let grown = grow(b, ENLARGE);
        match self.krawczyk(&grown) {
            Some(Krawczyk::Inside(k)) => return Verdict::Root(self.finish(k, opts)),
            Some(Krawczyk::Disjoint) => {
                // no root in the grown box, hence none in b
                return Verdict::Discard;
            }
            _ => {}
        }
        if b.width().max(b.height()) < opts.min_width {
            Verdict::Undecided
        } else {
            Verdict::Split
        }
    }

    fn krawczyk(&self, x: &Box2) -> Option<Krawczyk> {
        let (cx, cy) = x.center();
        let j = [
            [self.px.eval(cx, cy), self.py.eval(cx, cy)],
            [self.qx.eval(cx, cy), self.qy.eval(cx, cy)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let y = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let c = Box2::from_intervals(Interval::point(cx), Interval::point(cy));
        let fc = [self.p.eval_interval(&c), self.q.eval_interval(&c)];
        let jx = [
            [self.px.eval_interval(x), self.py.eval_interval(x)],
            [self.qx.eval_interval(x), self.qy.eval_interval(x)],
        ];
        let dx = [x.x() - Interval::point(cx), x.y() - Interval::point(cy)];
        let mut k = [Interval::point(0.0); 2];
        let centre = [cx, cy];
        for r in 0..2 {
            let yf = fc[0].scale(y[r][0]) + fc[1].scale(y[r][1]);
            let mut acc = Interval::point(centre[r]) - yf;
            for col in 0..2 {
                // (I - Y J(X))[r][col]
                let ident = if r == col { 1.0 } else { 0.0 };
                let m = Interval::point(ident) - (jx[0][col].scale(y[r][0]) + jx[1][col].scale(y[r][1]));
                acc = acc + m * dx[col];
            }
            k[r] = acc;
        }
        if !k[0].is_finite() || !k[1].is_finite() {
            return None;
        }
        if x.x().interior_contains(&k[0]) && x.y().interior_contains(&k[1]) {
            return Some(Krawczyk::Inside(Box2::from_intervals(k[0], k[1])));
        }
        match (x.x().intersect(&k[0]), x.y().intersect(&k[1])) {
            (Some(_), Some(_)) => Some(Krawczyk::Overlap),
            _ => Some(Krawczyk::Disjoint),
        }
    }

    /// Tightens a certified enclosure and polishes the point estimate.
    fn finish(&self, mut enc: Box2, opts: &SolverOptions) -> Root2 {
        for _ in 0..64 {
            // Once the box is a few ulps wide the interior test can fail;
            // enc is still a valid enclosure at that point.
            let Some(Krawczyk::Inside(k)) = self.krawczyk(&enc) else {
                break;
            };
            let shrunk = k.width().max(k.height()) < 0.9 * enc.width().max(enc.height());
            enc = k;
            if !shrunk {
                break;
            }
        }
        let (mut x, mut y) = enc.center();
        for _ in 0..50 {
            let f = [self.p.eval(x, y), self.q.eval(x, y)];
            if f[0].abs() <= opts.tol * 1e-3 && f[1].abs() <= opts.tol * 1e-3 {
                break;
            }
            let j = self.jac(x, y);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 {
                break;
            }
            let nx = x - (j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let ny = y - (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
            if !enc.contains(nx, ny) || (nx == x && ny == y) {
                break;
            }
            x = nx;
            y = ny;
        }
        let radius = [
            (x - enc.x_lo).abs(),
            (enc.x_hi - x).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
        .hypot([(y - enc.y_lo).abs(), (enc.y_hi - y).abs()].into_iter().fold(0.0, f64::max));
        let j = self.jac(x, y);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = j[0][0].hypot(j[0][1]) * j[1][0].hypot(j[1][1]);
        let simple = scale > 0.0 && det.abs() / scale > opts.simplicity_tol;
        Root2 { x, y, radius, simple, jacobian_det: det }
    }

    fn jac(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [
            [self.px.eval(x, y), self.py.eval(x, y)],
            [self.qx.eval(x, y), self.qy.eval(x, y)],
        ]
    }
}

enum Krawczyk {
    Inside(Box2),
    Overlap,
    Disjoint,
}

fn grow(b: &Box2, frac: f64) -> Box2 {
    let dx = b.width() * frac;
    let dy = b.height() * frac;
    Box2 { x_lo: b.x_lo - dx, x_hi: b.x_hi + dx, y_lo: b.y_lo - dy, y_hi: b.y_hi + dy }
}

fn enclosure(r: &Root2) -> Box2 {
    Box2 { x_lo: r.x - r.radius, x_hi: r.x + r.radius, y_lo: r.y - r.radius, y_hi: r.y + r.radius }
}

/// Merges roots whose enclosures intersect, keeping the tighter one, and
/// returns them in lexicographic order.
fn dedup(mut roots: Vec<Root2>) -> Vec<Root2> {
    roots.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut out: Vec<Root2> = Vec::with_capacity(roots.len());
    for r in roots {
        if let Some(slot) = out.iter_mut().find(|o| enclosure(o).intersects(&enclosure(&r))) {
            if r.radius < slot.radius {
                *slot = r;
            }
        } else {
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_poly, van_der_pol, cubic_circle};

    fn poly(s: &str) -> BivariatePoly {
        parse_poly(s).unwrap()
    }

    #[test]
    fn circle_meets_axis() {
        let out = solve_system_2d(&poly("x^2 + y^2 - 1"), &poly("y"), Box2::square(-2.0, 2.0).unwrap(), 1e-12)
            .unwrap();
        assert!(out.is_certified());
        assert_eq!(out.roots.len(), 2);
        let (a, b) = (out.roots[0], out.roots[1]);
        assert!((a.x + 1.0).abs() < 1e-12 && a.y.abs() < 1e-12);
        assert!((b.x - 1.0).abs() < 1e-12 && b.y.abs() < 1e-12);
        assert!(a.simple && b.simple);
        assert!((a.jacobian_det + 2.0).abs() < 1e-9);
        assert!((b.jacobian_det - 2.0).abs() < 1e-9);
    }

    #[test]
    fn linear_system_single_root() {
        let out = solve_system_2d(&poly("x"), &poly("y"), Box2::square(-1.0, 1.0).unwrap(), 1e-12).unwrap();
        assert_eq!(out.roots.len(), 1);
        assert!(out.roots[0].x.abs() < 1e-14 && out.roots[0].y.abs() < 1e-14);
        assert!(out.roots[0].simple);
    }

    #[test]
    fn degenerate_inputs() {
        let w = Box2::square(-1.0, 1.0).unwrap();
        assert_eq!(solve_system_2d(&poly("0"), &poly("y"), w, 1e-9), Err(SolverError::DegenerateSystem("p")));
        assert!(matches!(solve_system_2d(&poly("x"), &poly("y"), w, 0.0), Err(SolverError::BadTolerance(_))));
    }

    #[test]
    fn van_der_pol_contacts() {
        let rep = contact_points(&van_der_pol(), Box2::square(-3.0, 3.0).unwrap(), 1e-12).unwrap();
        assert!(rep.is_certified());
        assert_eq!(rep.n, 2);
        let (a, b) = (rep.points[0], rep.points[1]);
        assert!((a.x + 1.0).abs() < 1e-12 && (a.y - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.x - 1.0).abs() < 1e-12 && (b.y + 2.0 / 3.0).abs() < 1e-12);
        assert!(a.radius <= 1e-8 && b.radius <= 1e-8);
    }

    #[test]
    fn cubic_circle_has_no_contacts() {
        let rep = contact_points(&cubic_circle(), Box2::square(-3.0, 3.0).unwrap(), 1e-12).unwrap();
        assert!(rep.is_certified());
        assert_eq!(rep.n, 0);
        assert!(rep.points.is_empty());
    }

    #[test]
    fn hamiltonian_is_degenerate() {
        let sys = PlanarSystem::parse("-y", "x").unwrap();
        assert_eq!(
            contact_points(&sys, Box2::square(-1.0, 1.0).unwrap(), 1e-9),
            Err(SolverError::DegenerateDivergence(DivergenceKind::IdenticallyZero))
        );
    }

    #[test]
    fn double_root_is_undecided_not_guessed() {
        // y = x^2 tangent to y = 0 at the origin
        let out = solve_system_2d(&poly("y - x^2"), &poly("y"), Box2::square(-1.0, 1.0).unwrap(), 1e-12).unwrap();
        assert!(out.roots.iter().all(|r| r.x.abs() < 1e-6));
        assert!(!out.is_certified() || out.roots.iter().any(|r| !r.simple));
    }

    #[test]
    fn deterministic_output() {
        let p = poly("(x - 0.3)*(x + 0.7)*(y - 0.1)");
        let q = poly("(y + 0.5)*(x - y)");
        let w = Box2::square(-2.0, 2.0).unwrap();
        let a = solve_system_2d(&p, &q, w, 1e-12).unwrap();
        let b = solve_system_2d(&p, &q, w, 1e-12).unwrap();
        assert_eq!(a, b);
    }
}
