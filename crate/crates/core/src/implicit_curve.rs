//! Zero-set tracing for bivariate polynomials.
//!
//! The window is sampled on a `(grid + 1)^2` lattice. Every lattice edge with
//! a sign change carries one crossing, located by bisection on the edge, and
//! every cell joins its crossings pairwise. Crossings are then grouped into
//! components with a union-find and walked into ordered polylines. Lattice
//! values `>= 0` count as positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{BivariatePoly, Box2, PlanarSystem, Var};
use crate::solver2d::{self, degenerate_divergence, DivergenceKind, SolverOptions};

pub const DEFAULT_GRID: usize = 512;
pub const MIN_GRID: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("polynomial is identically zero")]
    IdenticallyZero,
    #[error("grid must be at least {MIN_GRID}, got {0}")]
    GridTooSmall(usize),
    #[error("singular point search inconclusive: {} undecided boxes", .undecided.len())]
    SolverInconclusive { undecided: Vec<Box2> },
    #[error("divergence is {0}")]
    DegenerateDivergence(DivergenceKind),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentKind {
    Oval,
    LineType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveComponent {
    pub kind: ComponentKind,
    /// Closed polylines repeat their first vertex at the end.
    pub polyline: Vec<[f64; 2]>,
    pub touches_boundary: bool,
}

impl CurveComponent {
    /// Euclidean distance from `(x, y)` to the polyline.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        match self.polyline.as_slice() {
            [] => f64::INFINITY,
            [v] => (v[0] - x).hypot(v[1] - y),
            pts => pts
                .windows(2)
                .map(|w| segment_distance(w[0], w[1], [x, y]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivCurveReport {
    pub components: Vec<CurveComponent>,
    #[serde(rename = "M")]
    pub m: usize,
    pub singular_points: Vec<[f64; 2]>,
    pub generic: bool,
    pub window: Box2,
    pub grid: usize,
    /// Human-readable caveats, e.g. components cut by the window boundary.
    pub warnings: Vec<String>,
}

impl DivCurveReport {
    pub fn cell_diagonal(&self) -> f64 {
        cell_diagonal(&self.window, self.grid)
    }

    pub fn line_count(&self) -> usize {
        self.components.iter().filter(|c| c.kind == ComponentKind::LineType).count()
    }

    pub fn oval_count(&self) -> usize {
        self.m - self.line_count()
    }
}

pub fn cell_diagonal(window: &Box2, grid: usize) -> f64 {
    (window.width() / grid as f64).hypot(window.height() / grid as f64)
}

/// Lattice samples and geometry shared by the tracing passes.
struct Lattice<'a> {
    p: &'a BivariatePoly,
    window: Box2,
    n: usize,
    dx: f64,
    dy: f64,
    // row-major, (n + 1) x (n + 1), index j * (n + 1) + i
    values: Vec<f64>,
}

/// A lattice edge: horizontal edges go from `(i, j)` to `(i + 1, j)`,
/// vertical ones from `(i, j)` to `(i, j + 1)`.
type EdgeId = usize;

impl<'a> Lattice<'a> {
    fn new(p: &'a BivariatePoly, window: Box2, n: usize) -> Self {
        let dx = window.width() / n as f64;
        let dy = window.height() / n as f64;
        let mut lat = Self { p, window, n, dx, dy, values: Vec::new() };
        lat.values = (0..=n)
            .into_par_iter()
            .flat_map_iter(|j| {
                let y = lat.y_at(j);
                (0..=n).map(move |i| (i, y))
            })
            .map(|(i, y)| p.eval(lat.x_at(i), y))
            .collect();
        lat
    }

    fn x_at(&self, i: usize) -> f64 {
        if i == self.n {
            self.window.x_hi
        } else {
            self.window.x_lo + i as f64 * self.dx
        }
    }

    fn y_at(&self, j: usize) -> f64 {
        if j == self.n {
            self.window.y_hi
        } else {
            self.window.y_lo + j as f64 * self.dy
        }
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    fn positive(&self, i: usize, j: usize) -> bool {
        self.value(i, j) >= 0.0
    }

    fn h_edge(&self, i: usize, j: usize) -> EdgeId {
        j * self.n + i
    }

    fn v_edge(&self, i: usize, j: usize) -> EdgeId {
        self.n * (self.n + 1) + j * (self.n + 1) + i
    }

    fn num_edges(&self) -> usize {
        2 * self.n * (self.n + 1)
    }

    fn edge_endpoints(&self, e: EdgeId) -> ((usize, usize), (usize, usize)) {
        let h = self.n * (self.n + 1);
        if e < h {
            let (j, i) = (e / self.n, e % self.n);
            ((i, j), (i + 1, j))
        } else {
            let e = e - h;
            let (j, i) = (e / (self.n + 1), e % (self.n + 1));
            ((i, j), (i, j + 1))
        }
    }

    fn is_boundary_edge(&self, e: EdgeId) -> bool {
        let ((i0, j0), (_, j1)) = self.edge_endpoints(e);
        if j0 == j1 {
            j0 == 0 || j0 == self.n
        } else {
            i0 == 0 || i0 == self.n
        }
    }

    /// Crossing on a sign-changing edge, by bisection on `p`.
    fn crossing(&self, e: EdgeId) -> [f64; 2] {
        let ((i0, j0), (i1, j1)) = self.edge_endpoints(e);
        let a = [self.x_at(i0), self.y_at(j0)];
        let b = [self.x_at(i1), self.y_at(j1)];
        bisect_segment(self.p, a, b, self.positive(i0, j0))
    }

    /// Crossing-edge pairs produced by cell `(i, j)`.
    fn cell_segments(&self, i: usize, j: usize) -> Vec<(EdgeId, EdgeId)> {
        let bl = self.positive(i, j);
        let br = self.positive(i + 1, j);
        let tr = self.positive(i + 1, j + 1);
        let tl = self.positive(i, j + 1);
        let bottom = self.h_edge(i, j);
        let right = self.v_edge(i + 1, j);
        let top = self.h_edge(i, j + 1);
        let left = self.v_edge(i, j);
        let mut crossing = Vec::with_capacity(4);
        if bl != br {
            crossing.push(bottom);
        }
        if br != tr {
            crossing.push(right);
        }
        if tr != tl {
            crossing.push(top);
        }
        if tl != bl {
            crossing.push(left);
        }
        match crossing.len() {
            0 => vec![],
            2 => vec![(crossing[0], crossing[1])],
            _ => {
                // saddle: bl == tr != br == tl
                let cell = Box2 {
                    x_lo: self.x_at(i),
                    x_hi: self.x_at(i + 1),
                    y_lo: self.y_at(j),
                    y_hi: self.y_at(j + 1),
                };
                let corners = [self.value(i, j), self.value(i + 1, j), self.value(i + 1, j + 1), self.value(i, j + 1)];
                if resolve_saddle(self.p, &cell, corners) == SaddlePairing::CutOffBrTl {
                    vec![(bottom, right), (top, left)]
                } else {
                    vec![(left, bottom), (right, top)]
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SaddlePairing {
    /// The bl/tr sign region is connected through the cell; segments cut off
    /// the br and tl corners.
    CutOffBrTl,
    /// The br/tl sign region is connected; segments cut off bl and tr.
    CutOffBlTr,
}

/// Decides a saddle cell by subdividing it once into 2x2 subcells and
/// following the sub-segments from the outer crossings. If the subdivided
/// picture is itself ambiguous, the sign at the cell centre decides.
fn resolve_saddle(p: &BivariatePoly, cell: &Box2, corners: [f64; 4]) -> SaddlePairing {
    let (cx, cy) = cell.center();
    let centre = p.eval(cx, cy);
    let by_centre = if (centre >= 0.0) == (corners[0] >= 0.0) {
        SaddlePairing::CutOffBrTl
    } else {
        SaddlePairing::CutOffBlTr
    };
    // 3x3 sub-lattice, index [row][col], row 0 at y_lo
    let xs = [cell.x_lo, cx, cell.x_hi];
    let ys = [cell.y_lo, cy, cell.y_hi];
    let mut v = [[0.0f64; 3]; 3];
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            v[r][c] = match (r, c) {
                (0, 0) => corners[0],
                (0, 2) => corners[1],
                (2, 2) => corners[2],
                (2, 0) => corners[3],
                (1, 1) => centre,
                _ => p.eval(x, y),
            };
        }
    }
    let pos = |r: usize, c: usize| v[r][c] >= 0.0;
    // Sub-edges: horizontal (r, c)-(r, c+1) id r*2+c; vertical (r, c)-(r+1, c) id 6 + r*3 + c.
    let h = |r: usize, c: usize| r * 2 + c;
    let vt = |r: usize, c: usize| 6 + r * 3 + c;
    let mut uf = UnionFind::new(12);
    for r in 0..2 {
        for c in 0..2 {
            let (bl, br, tr, tl) = (pos(r, c), pos(r, c + 1), pos(r + 1, c + 1), pos(r + 1, c));
            let (bottom, right, top, left) = (h(r, c), vt(r, c + 1), h(r + 1, c), vt(r, c));
            let mut crossing = Vec::with_capacity(4);
            if bl != br {
                crossing.push(bottom);
            }
            if br != tr {
                crossing.push(right);
            }
            if tr != tl {
                crossing.push(top);
            }
            if tl != bl {
                crossing.push(left);
            }
            match crossing.len() {
                2 => uf.union(crossing[0], crossing[1]),
                4 => return by_centre,
                _ => {}
            }
        }
    }
    // the crossing on each outer edge sits on exactly one of its halves
    let pick = |a: usize, b: usize, a_crosses: bool| if a_crosses { a } else { b };
    let bottom = pick(h(0, 0), h(0, 1), pos(0, 0) != pos(0, 1));
    let right = pick(vt(0, 2), vt(1, 2), pos(0, 2) != pos(1, 2));
    let top = pick(h(2, 0), h(2, 1), pos(2, 0) != pos(2, 1));
    let left = pick(vt(0, 0), vt(1, 0), pos(0, 0) != pos(1, 0));
    let mut joined = |a, b| uf.find(a) == uf.find(b);
    if joined(bottom, right) && joined(top, left) && !joined(bottom, top) {
        SaddlePairing::CutOffBrTl
    } else if joined(left, bottom) && joined(right, top) && !joined(bottom, top) {
        SaddlePairing::CutOffBlTr
    } else {
        by_centre
    }
}

fn bisect_segment(p: &BivariatePoly, a: [f64; 2], b: [f64; 2], a_positive: bool) -> [f64; 2] {
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = at(0.5);
    let mut best_res = f64::INFINITY;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pt = at(mid);
        let v = p.eval(pt[0], pt[1]);
        if v.abs() < best_res {
            best_res = v.abs();
            best = pt;
        }
        if v == 0.0 {
            break;
        }
        if (v >= 0.0) == a_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, so representatives do not depend on call order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Traces `{p = 0}` inside `window` on a `grid x grid` cell lattice.
///
/// Returns an empty sequence when no sign change is found.
pub fn trace_zero_set(p: &BivariatePoly, window: Box2, grid: usize) -> Result<Vec<CurveComponent>, CurveError> {
    if p.is_zero() {
        return Err(CurveError::IdenticallyZero);
    }
    if grid < MIN_GRID {
        return Err(CurveError::GridTooSmall(grid));
    }
    let lat = Lattice::new(p, window, grid);
    let n = grid;

    // cell segments, row by row, merged in cell index order
    let segments: Vec<(EdgeId, EdgeId)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let lat = &lat;
            (0..n).flat_map(move |i| lat.cell_segments(i, j))
        })
        .collect();
    if segments.is_empty() {
        return Ok(vec![]);
    }

    let mut adjacency: Vec<[usize; 2]> = vec![[usize::MAX; 2]; lat.num_edges()];
    let mut uf = UnionFind::new(lat.num_edges());
    for &(a, b) in &segments {
        for (from, to) in [(a, b), (b, a)] {
            let slot = &mut adjacency[from];
            if slot[0] == usize::MAX {
                slot[0] = to;
            } else {
                slot[1] = to;
            }
        }
        uf.union(a, b);
    }

    // group crossing edges by component root, in edge-id order
    let mut members: std::collections::BTreeMap<usize, Vec<EdgeId>> = Default::default();
    for e in 0..lat.num_edges() {
        if adjacency[e][0] != usize::MAX {
            members.entry(uf.find(e)).or_default().push(e);
        }
    }

    let mut components: Vec<CurveComponent> = members
        .into_values()
        .map(|edges| {
            let degree = |e: EdgeId| adjacency[e].iter().filter(|&&x| x != usize::MAX).count();
            let open_end = edges.iter().copied().find(|&e| degree(e) == 1);
            let start = open_end.unwrap_or(edges[0]);
            let mut order = vec![start];
            let mut prev = usize::MAX;
            let mut cur = start;
            loop {
                let next = adjacency[cur].iter().copied().find(|&x| x != usize::MAX && x != prev);
                match next {
                    Some(nx) if nx != start => {
                        order.push(nx);
                        prev = cur;
                        cur = nx;
                    }
                    _ => break,
                }
                if order.len() > edges.len() {
                    break;
                }
            }
            let touches_boundary = open_end.is_some() || edges.iter().any(|&e| lat.is_boundary_edge(e));
            let mut polyline: Vec<[f64; 2]> = order.par_iter().map(|&e| lat.crossing(e)).collect();
            let closed = open_end.is_none() && polyline.len() > 2;
            if closed {
                polyline.push(polyline[0]);
            }
            let kind = if closed && !touches_boundary { ComponentKind::Oval } else { ComponentKind::LineType };
            CurveComponent { kind, polyline, touches_boundary }
        })
        .collect();
    components.sort_by(|a, b| {
        let ka = first_vertex_key(a);
        let kb = first_vertex_key(b);
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    Ok(components)
}

/// Lexicographically smallest vertex, used for a stable component order.
fn first_vertex_key(c: &CurveComponent) -> (f64, f64) {
    c.polyline
        .iter()
        .map(|v| (v[0], v[1]))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .unwrap_or((f64::INFINITY, f64::INFINITY))
}

/// Points of the window where `p`, `p_x` and `p_y` all vanish (within `tol`
/// for `p`). An empty result certifies that the curve is smooth inside the
/// window.
pub fn singular_points(p: &BivariatePoly, window: Box2, tol: f64) -> Result<Vec<[f64; 2]>, CurveError> {
    if !(tol > 0.0) {
        return Err(CurveError::BadTolerance(tol));
    }
    if p.is_zero() {
        return Err(CurveError::IdenticallyZero);
    }
    if p.is_constant() {
        return Ok(vec![]);
    }
    let px = p.differentiate(Var::X);
    let py = p.differentiate(Var::Y);
    let opts = SolverOptions::default();
    // With one partial identically zero, pair the other with p itself.
    let (a, b, filter) = match (px.is_zero(), py.is_zero()) {
        (false, false) => (&px, &py, Some(p)),
        (true, false) => (&py, p, None),
        (false, true) => (&px, p, None),
        (true, true) => unreachable!("non-constant polynomial has a nonzero partial"),
    };
    let out = solver2d::solve_with(a, b, filter, window, &opts).map_err(|e| match e {
        solver2d::SolverError::BadTolerance(t) => CurveError::BadTolerance(t),
        _ => CurveError::IdenticallyZero,
    })?;
    let undecided: Vec<Box2> = out
        .undecided
        .into_iter()
        .filter(|b| p.eval_interval(b).contains_zero())
        .collect();
    if !undecided.is_empty() {
        return Err(CurveError::SolverInconclusive { undecided });
    }
    let grad_tol = tol.max(1e-9 * (1.0 + px.max_abs_coeff() + py.max_abs_coeff()));
    Ok(out
        .roots
        .into_iter()
        .filter(|r| {
            p.eval(r.x, r.y).abs() <= tol
                && px.eval(r.x, r.y).abs() <= grad_tol
                && py.eval(r.x, r.y).abs() <= grad_tol
        })
        .map(|r| [r.x, r.y])
        .collect())
}

/// Divergence-curve census for a system: components, `M`, singular points
/// and the genericity flag.
pub fn div_curve_report(sys: &PlanarSystem, window: Box2, grid: usize) -> Result<DivCurveReport, CurveError> {
    let div = sys.divergence();
    if let Some(kind) = degenerate_divergence(&div) {
        return Err(CurveError::DegenerateDivergence(kind));
    }
    let components = trace_zero_set(&div, window, grid)?;
    let tol = 1e-9 * div.max_abs_coeff().max(1.0);
    let singular = singular_points(&div, window, tol)?;
    let mut warnings = Vec::new();
    let cut: Vec<usize> = components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.touches_boundary)
        .map(|(i, _)| i)
        .collect();
    if !cut.is_empty() {
        warnings.push(format!(
            "components {cut:?} reach the window boundary; widen the window to confirm they are not re-entering arcs"
        ));
    }
    if !singular.is_empty() {
        warnings.push(format!("{} singular point(s) on the divergence curve; consider perturbing", singular.len()));
    }
    Ok(DivCurveReport {
        m: components.len(),
        generic: singular.is_empty(),
        components,
        singular_points: singular,
        window,
        grid,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{cubic_circle, harmonic, parse_poly, van_der_pol};

    fn poly(s: &str) -> BivariatePoly {
        parse_poly(s).unwrap()
    }

    fn w3() -> Box2 {
        Box2::square(-3.0, 3.0).unwrap()
    }

    #[test]
    fn two_vertical_lines() {
        let comps = trace_zero_set(&poly("1 - x^2"), w3(), 64).unwrap();
        assert_eq!(comps.len(), 2);
        for (c, x0) in comps.iter().zip([-1.0, 1.0]) {
            assert_eq!(c.kind, ComponentKind::LineType);
            assert!(c.touches_boundary);
            assert!(c.polyline.iter().all(|v| (v[0] - x0).abs() < 1e-12));
        }
    }

    #[test]
    fn circle_is_an_oval() {
        let comps = trace_zero_set(&poly("2 - 4*x^2 - 4*y^2"), w3(), 64).unwrap();
        assert_eq!(comps.len(), 1);
        let c = &comps[0];
        assert_eq!(c.kind, ComponentKind::Oval);
        assert!(!c.touches_boundary);
        assert_eq!(c.polyline.first(), c.polyline.last());
        let r = 0.5f64.sqrt();
        assert!(c.polyline.iter().all(|v| (v[0].hypot(v[1]) - r).abs() < 1e-12));
    }

    #[test]
    fn no_zeros_gives_empty() {
        assert!(trace_zero_set(&poly("1"), w3(), 32).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        assert_eq!(trace_zero_set(&poly("0"), w3(), 32), Err(CurveError::IdenticallyZero));
        assert_eq!(trace_zero_set(&poly("x"), w3(), 8), Err(CurveError::GridTooSmall(8)));
    }

    #[test]
    fn crossing_lines_resolve_saddles() {
        // x*y = 0 hits every saddle case at the origin
        let comps = trace_zero_set(&poly("x*y - 0.001"), w3(), 64).unwrap();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.kind == ComponentKind::LineType));
    }

    #[test]
    fn singular_point_examples() {
        let node = singular_points(&poly("x^2 - y^2"), w3(), 1e-9).unwrap();
        assert_eq!(node.len(), 1);
        assert!(node[0][0].abs() < 1e-12 && node[0][1].abs() < 1e-12);
        assert!(singular_points(&poly("1 - x^2"), w3(), 1e-9).unwrap().is_empty());
        assert!(singular_points(&poly("2 - 4*x^2 - 4*y^2"), w3(), 1e-9).unwrap().is_empty());
    }

    #[test]
    fn report_examples() {
        let vdp = div_curve_report(&van_der_pol(), w3(), 64).unwrap();
        assert_eq!(vdp.m, 2);
        assert_eq!(vdp.line_count(), 2);
        assert!(vdp.generic);

        let cc = div_curve_report(&cubic_circle(), w3(), 64).unwrap();
        assert_eq!(cc.m, 1);
        assert_eq!(cc.oval_count(), 1);
        assert!(cc.generic);
        assert!(cc.warnings.is_empty());

        assert_eq!(
            div_curve_report(&harmonic(), w3(), 64),
            Err(CurveError::DegenerateDivergence(DivergenceKind::IdenticallyZero))
        );
    }

    #[test]
    fn distance_to_polyline() {
        let c = CurveComponent {
            kind: ComponentKind::LineType,
            polyline: vec![[0.0, 0.0], [1.0, 0.0]],
            touches_boundary: true,
        };
        assert!((c.distance_to(0.5, 2.0) - 2.0).abs() < 1e-15);
        assert!((c.distance_to(2.0, 0.0) - 1.0).abs() < 1e-15);
    }
}
