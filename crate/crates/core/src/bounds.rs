//! Counting formulas for limit cycles of degree-`n` systems.
//!
//! All arithmetic is exact integer arithmetic. The quartic formula has
//! half-integer coefficients, so it is evaluated as `2 * value` in `i128`
//! and divided only after checking evenness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::implicit_curve::{ComponentKind, DivCurveReport};
use crate::poly::PlanarSystem;
use crate::solver2d::{degenerate_divergence, ContactReport, DivergenceKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("invalid degree {0}: the bounds need degree n > 1")]
    InvalidDegree(u32),
    #[error("quartic formula is not an integer at n = {0}")]
    NonInteger(u32),
    #[error("expected a quadratic system, got degree {0}")]
    WrongDegree(u32),
    #[error("contact point ({x}, {y}) is {distance} from every traced component (tolerance {tolerance})")]
    UnassignedContact { x: f64, y: f64, distance: f64, tolerance: f64 },
    #[error("divergence curve has singular points; the behavior census needs a generic curve")]
    NonGeneric,
    #[error("divergence is not linear, so the contact census is required")]
    MissingContacts,
    #[error("integer overflow")]
    Overflow,
}

/// Maximum number of connected components of a real algebraic curve of
/// degree `k`: `1 + (k-1)(k-2)/2` for even `k`, `(k-1)(k-2)/2` for odd `k`.
///
/// The odd formula gives 0 at `k = 1`, but a line has one component, so
/// `k = 1` returns 1. `k = 0` (a constant) returns 0.
pub fn harnack_max_components(k: u32) -> u64 {
    let k = k as u64;
    match k {
        0 => 0,
        1 => 1,
        _ if k % 2 == 0 => 1 + (k - 1) * (k - 2) / 2,
        _ => (k - 1) * (k - 2) / 2,
    }
}

/// Component cap on `{Div = 0}` as used when composing the quartic bound:
/// `(n-2)(n-3)/2 + 1` for even `n` and `(n-2)(n-3)/2` for odd `n`.
///
/// This is not `harnack_max_components(n - 1)`: the parity test is applied
/// to the system degree `n`, not to the curve degree `n - 1`. The two agree
/// only at `n = 2`.
pub fn quartic_component_cap(n: u32) -> Result<u64, BoundsError> {
    if n < 2 {
        return Err(BoundsError::InvalidDegree(n));
    }
    let n = n as u64;
    let base = if n < 3 { 0 } else { (n - 2) * (n - 3) / 2 };
    Ok(if n % 2 == 0 { base + 1 } else { base })
}

pub fn bezout_bound(d1: u64, d2: u64) -> u64 {
    d1 * d2
}

/// Bezout cap on isolated solutions of the contact system of a degree-`n`
/// system: degrees `2n - 2` and `n - 1` give `2 (n - 1)^2`.
pub fn contact_bezout_cap(n: u32) -> u64 {
    let d = n.saturating_sub(1) as u64;
    bezout_bound(2 * d, d)
}

/// `1 + (n - 1)^2 (M + N)`.
pub fn master_bound(n: u32, m: u64, contacts: u64) -> Result<u64, BoundsError> {
    if n < 2 {
        return Err(BoundsError::InvalidDegree(n));
    }
    let d = (n - 1) as u64;
    d.checked_mul(d)
        .and_then(|dd| dd.checked_mul(m.checked_add(contacts)?))
        .and_then(|v| v.checked_add(1))
        .ok_or(BoundsError::Overflow)
}

/// The explicit quartic upper bound on the number of limit cycles of a
/// degree-`n` system.
pub fn quartic_bound(n: u32) -> Result<u64, BoundsError> {
    if n < 2 {
        return Err(BoundsError::InvalidDegree(n));
    }
    let m = n as i128;
    let (n4, n3, n2, n1) = (m * m * m * m, m * m * m, m * m, m);
    // twice the value, so every coefficient is an integer
    let twice = if n % 2 == 0 {
        5 * n4 - 23 * n3 + 43 * n2 - 37 * n1 + 14
    } else {
        5 * n4 - 23 * n3 + 41 * n2 - 33 * n1 + 12
    };
    if twice % 2 != 0 {
        return Err(BoundsError::NonInteger(n));
    }
    u64::try_from(twice / 2).map_err(|_| BoundsError::Overflow)
}

/// Bound for Liénard systems `x' = y - f(x), y' = g(x)` with
/// `deg f = p`, `deg g = q`: `1 + 2 (max(p, q) - 1)^2 (p - 1)`.
pub fn lienard_bound(p: u32, q: u32) -> u64 {
    let top = p.max(q).saturating_sub(1) as u64;
    1 + 2 * top * top * p.saturating_sub(1) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum QuadraticOutcome {
    NoLimitCycles { reason: String },
    Bound { at_most: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticVerdict {
    pub outcome: QuadraticOutcome,
    /// Class-level value of the Hilbert number for quadratic systems.
    pub class_h2: u64,
    pub notes: Vec<String>,
}

/// Verdict for a quadratic system.
///
/// A linear system (degree 1) is accepted as a quadratic one with vanishing
/// quadratic part; its divergence is always constant.
pub fn quadratic_verdict(
    sys: &PlanarSystem,
    contacts: Option<&ContactReport>,
) -> Result<QuadraticVerdict, BoundsError> {
    let n = sys.degree();
    if n > 2 || n == 0 {
        return Err(BoundsError::WrongDegree(n));
    }
    let class_h2 = quartic_bound(2)?;
    let div = sys.divergence();
    let mut notes = Vec::new();
    if let Some(kind) = degenerate_divergence(&div) {
        let reason = match kind {
            DivergenceKind::IdenticallyZero => "divergence vanishes identically (Hamiltonian)",
            DivergenceKind::NonzeroConstant => "divergence is a nonzero constant (Bendixson)",
        };
        return Ok(QuadraticVerdict {
            outcome: QuadraticOutcome::NoLimitCycles { reason: reason.into() },
            class_h2,
            notes,
        });
    }
    let contacts = contacts.ok_or(BoundsError::MissingContacts)?;
    let non_simple = contacts.points.iter().filter(|r| !r.simple).count();
    let outcome = if contacts.n > 0 || non_simple > 0 || !contacts.is_certified() {
        if contacts.n == 0 {
            notes.push(
                "no simple contact point, but a non-simple or undecided one remains; keeping the bound".into(),
            );
        }
        QuadraticOutcome::Bound { at_most: master_bound(2, 1, 2)? }
    } else {
        QuadraticOutcome::NoLimitCycles {
            reason: "divergence line has no contact points".into(),
        }
    };
    if let Some(exact) = line_contact_count(sys) {
        if exact != contacts.n + non_simple {
            notes.push(format!(
                "the divergence line carries {exact} contact point(s) in the whole plane, {} inside the window",
                contacts.n + non_simple
            ));
        }
    }
    Ok(QuadraticVerdict { outcome, class_h2, notes })
}

/// Number of distinct real contact points on a straight divergence line,
/// over the whole plane. Restricted to the line, `F . grad Div` is a
/// polynomial of degree at most 2 in the line parameter.
fn line_contact_count(sys: &PlanarSystem) -> Option<usize> {
    let div = sys.divergence();
    if div.degree().finite() != Some(1) {
        return None;
    }
    let (a, b, c) = (div.coeff(0, 0), div.coeff(1, 0), div.coeff(0, 1));
    let norm2 = b * b + c * c;
    let (x0, y0) = (-a * b / norm2, -a * c / norm2);
    let (dx, dy) = (-c, b);
    let (tangency, _) = sys.contact_system();
    let f = |t: f64| tangency.eval(x0 + t * dx, y0 + t * dy);
    // quadratic through t = -1, 0, 1
    let (fm, f0, fp) = (f(-1.0), f(0.0), f(1.0));
    let qa = 0.5 * (fp + fm) - f0;
    let qb = 0.5 * (fp - fm);
    let qc = f0;
    let scale = fm.abs().max(f0.abs()).max(fp.abs()).max(f64::MIN_POSITIVE);
    let tiny = 1e-12 * scale;
    if qa.abs() <= tiny {
        if qb.abs() <= tiny {
            // constant along the line: either no contacts or the whole line
            return if qc.abs() <= tiny { None } else { Some(0) };
        }
        return Some(1);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    Some(if disc > tiny * scale { 2 } else if disc.abs() <= tiny * scale { 1 } else { 0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBehaviors {
    pub component: usize,
    pub kind: ComponentKind,
    pub contacts: usize,
    pub behaviors: u64,
    /// Which limit-behavior cases the count is made of.
    pub cases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCensus {
    pub total: u64,
    pub per_component: Vec<ComponentBehaviors>,
}

/// Counts the possible limit behaviors supported by the divergence curve.
///
/// Each simple contact point is attached to its nearest component, which
/// must lie within twice the trace cell diagonal. A line-type component
/// with `x` contacts supports `x + 1` behaviors, an oval with `y >= 1`
/// contacts supports `y`, and an oval without contacts supports one.
pub fn behavior_census(report: &DivCurveReport, contacts: &ContactReport) -> Result<BehaviorCensus, BoundsError> {
    if !report.generic {
        return Err(BoundsError::NonGeneric);
    }
    let tolerance = 2.0 * report.cell_diagonal();
    let mut counts = vec![0usize; report.components.len()];
    for r in contacts.points.iter().filter(|r| r.simple) {
        let nearest = report
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.distance_to(r.x, r.y)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, d)) if d <= tolerance => counts[i] += 1,
            other => {
                return Err(BoundsError::UnassignedContact {
                    x: r.x,
                    y: r.y,
                    distance: other.map_or(f64::INFINITY, |(_, d)| d),
                    tolerance,
                })
            }
        }
    }
    let per_component: Vec<ComponentBehaviors> = report
        .components
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (c, &x))| {
            let (behaviors, cases) = component_behaviors(c.kind, x);
            ComponentBehaviors { component: i, kind: c.kind, contacts: x, behaviors, cases }
        })
        .collect();
    let total = per_component.iter().map(|c| c.behaviors).sum();
    Ok(BehaviorCensus { total, per_component })
}

fn component_behaviors(kind: ComponentKind, contacts: usize) -> (u64, Vec<String>) {
    let x = contacts as u64;
    match (kind, contacts) {
        (ComponentKind::LineType, 0) => (1, vec!["a.3: whole component without contact points".into()]),
        (ComponentKind::LineType, _) => {
            let mut cases = Vec::new();
            if x > 1 {
                cases.push(format!("a.1: {} arc(s) between consecutive contact points", x - 1));
            }
            // a window census cannot tell a truncated arc from one reaching infinity
            cases.push("a.2: 2 boundary-terminated arcs".into());
            (x + 1, cases)
        }
        (ComponentKind::Oval, 0) => (1, vec!["b.3: whole oval without contact points".into()]),
        (ComponentKind::Oval, 1) => (1, vec!["b.2: full oval closing at its single contact point".into()]),
        (ComponentKind::Oval, _) => (x, vec![format!("b.1: {x} arc(s) between consecutive contact points")]),
    }
}

/// `quartic_bound(n)` for `n = 2..=n_max` as right-aligned text columns.
pub fn quartic_table(n_max: u32) -> Result<String, BoundsError> {
    if n_max < 2 {
        return Err(BoundsError::InvalidDegree(n_max));
    }
    let rows: Vec<(u32, u64)> = (2..=n_max).map(|n| quartic_bound(n).map(|b| (n, b))).collect::<Result<_, _>>()?;
    let wn = rows.iter().map(|r| r.0.to_string().len()).max().unwrap_or(1).max(1);
    let wb = rows.iter().map(|r| r.1.to_string().len()).max().unwrap_or(1).max("H(n) <=".len());
    let mut out = format!("{:>wn$}  {:>wb$}\n", "n", "H(n) <=");
    for (n, b) in rows {
        out.push_str(&format!("{n:>wn$}  {b:>wb$}\n"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "N")]
    pub contacts: u64,
    pub master_bound: u64,
    pub quartic_bound: u64,
    pub harnack_cap_on_m: u64,
    pub bezout_cap_on_n: u64,
    pub behaviors: u64,
    pub notes: Vec<String>,
}

/// Degree-only report: `M` and `N` at their caps, so `master_bound` equals
/// `quartic_bound`.
pub fn degree_report(n: u32) -> Result<BoundReport, BoundsError> {
    let quartic = quartic_bound(n)?;
    let m = quartic_component_cap(n)?;
    let contacts = contact_bezout_cap(n);
    let mut notes = vec![format!(
        "M capped at {m} and N at 2(n-1)^2 = {contacts}; master bound at the caps equals the quartic bound"
    )];
    let harnack = harnack_max_components(n - 1);
    if harnack != m {
        notes.push(format!(
            "the quartic composition caps M at {m}, while Harnack for the degree-{} divergence curve gives {harnack}",
            n - 1
        ));
    }
    if n == 2 {
        notes.push("Harnack at degree 1 is taken as 1 (a line has one component)".into());
    }
    Ok(BoundReport {
        n,
        m,
        contacts,
        master_bound: master_bound(n, m, contacts)?,
        quartic_bound: quartic,
        harnack_cap_on_m: harnack,
        bezout_cap_on_n: contacts,
        behaviors: m + contacts,
        notes,
    })
}

/// Full report from a divergence-curve census and its contact points.
pub fn system_report(
    sys: &PlanarSystem,
    curve: &DivCurveReport,
    contacts: &ContactReport,
) -> Result<(BoundReport, BehaviorCensus), BoundsError> {
    let n = sys.degree();
    let census = behavior_census(curve, contacts)?;
    let m = curve.m as u64;
    let nn = contacts.n as u64;
    let harnack = harnack_max_components(n.saturating_sub(1));
    let bezout = contact_bezout_cap(n);
    let mut notes = curve.warnings.clone();
    notes.push(format!(
        "M and N are window counts over [{}, {}] x [{}, {}] at grid {}",
        curve.window.x_lo, curve.window.x_hi, curve.window.y_lo, curve.window.y_hi, curve.grid
    ));
    if m > harnack {
        notes.push(format!("window census M = {m} exceeds the Harnack cap {harnack}"));
    }
    if nn > bezout {
        notes.push(format!("contact count N = {nn} exceeds the Bezout cap {bezout}"));
    }
    if !contacts.is_certified() {
        notes.push(format!(
            "{} undecided solver box(es); N may be incomplete",
            contacts.undecided_boxes.len()
        ));
    }
    if n == 2 {
        notes.push("Harnack at degree 1 is taken as 1 (a line has one component)".into());
    }
    let report = BoundReport {
        n,
        m,
        contacts: nn,
        master_bound: master_bound(n, m, nn)?,
        quartic_bound: quartic_bound(n)?,
        harnack_cap_on_m: harnack,
        bezout_cap_on_n: bezout,
        behaviors: census.total,
        notes,
    };
    Ok((report, census))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implicit_curve::CurveComponent;
    use crate::poly::Box2;
    use crate::solver2d::Root2;

    #[test]
    fn harnack_values() {
        assert_eq!(harnack_max_components(4), 4);
        assert_eq!(harnack_max_components(3), 1);
        assert_eq!(harnack_max_components(2), 1);
        assert_eq!(harnack_max_components(1), 1);
        assert_eq!(harnack_max_components(0), 0);
    }

    #[test]
    fn bezout_values() {
        assert_eq!(bezout_bound(2, 1), 2);
        assert_eq!(bezout_bound(0, 5), 0);
        assert_eq!(contact_bezout_cap(2), 2);
        for n in 2..10u32 {
            assert_eq!(contact_bezout_cap(n), 2 * ((n - 1) as u64).pow(2));
        }
    }

    #[test]
    fn master_values() {
        assert_eq!(master_bound(2, 1, 2), Ok(4));
        assert_eq!(master_bound(3, 2, 2), Ok(17));
        assert_eq!(master_bound(5, 0, 0), Ok(1));
        assert_eq!(master_bound(1, 1, 1), Err(BoundsError::InvalidDegree(1)));
    }

    #[test]
    fn quartic_values() {
        assert_eq!(quartic_bound(2), Ok(4));
        assert_eq!(quartic_bound(3), Ok(33));
        assert_eq!(quartic_bound(4), Ok(181));
        assert_eq!(quartic_bound(1), Err(BoundsError::InvalidDegree(1)));
    }

    #[test]
    fn quartic_is_master_at_the_component_cap() {
        for n in 2..=20u32 {
            let cap = quartic_component_cap(n).unwrap();
            let expected = ((n as u64 - 2) * (n as u64).saturating_sub(3) / 2) + u64::from(n % 2 == 0);
            assert_eq!(cap, expected, "n = {n}");
            assert_eq!(quartic_bound(n).unwrap(), master_bound(n, cap, contact_bezout_cap(n)).unwrap());
        }
    }

    #[test]
    fn lienard_values() {
        assert_eq!(lienard_bound(3, 1), 17);
        assert_eq!(lienard_bound(1, 4), 1);
        assert_eq!(lienard_bound(2, 2), 3);
    }

    fn line(x0: f64) -> CurveComponent {
        CurveComponent {
            kind: ComponentKind::LineType,
            polyline: vec![[x0, -3.0], [x0, 3.0]],
            touches_boundary: true,
        }
    }

    fn oval() -> CurveComponent {
        let pts: Vec<[f64; 2]> = (0..=64)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 64.0;
                [t.cos(), t.sin()]
            })
            .collect();
        CurveComponent { kind: ComponentKind::Oval, polyline: pts, touches_boundary: false }
    }

    fn report(components: Vec<CurveComponent>) -> DivCurveReport {
        DivCurveReport {
            m: components.len(),
            components,
            singular_points: vec![],
            generic: true,
            window: Box2::square(-3.0, 3.0).unwrap(),
            grid: 64,
            warnings: vec![],
        }
    }

    fn contacts(points: &[(f64, f64)]) -> ContactReport {
        ContactReport {
            points: points
                .iter()
                .map(|&(x, y)| Root2 { x, y, radius: 1e-12, simple: true, jacobian_det: 1.0 })
                .collect(),
            n: points.len(),
            undecided_boxes: vec![],
            window: Box2::square(-3.0, 3.0).unwrap(),
        }
    }

    #[test]
    fn census_examples() {
        let vdp = behavior_census(&report(vec![line(-1.0), line(1.0)]), &contacts(&[(-1.0, 0.6), (1.0, -0.6)])).unwrap();
        assert_eq!(vdp.total, 4);
        let circle = behavior_census(&report(vec![oval()]), &contacts(&[])).unwrap();
        assert_eq!(circle.total, 1);
        let bare = behavior_census(&report(vec![line(0.0)]), &contacts(&[])).unwrap();
        assert_eq!(bare.total, 1);
        assert!(bare.per_component[0].cases[0].starts_with("a.3"));
    }

    #[test]
    fn census_rejects_far_contacts() {
        let err = behavior_census(&report(vec![line(0.0)]), &contacts(&[(2.0, 0.0)])).unwrap_err();
        assert!(matches!(err, BoundsError::UnassignedContact { .. }));
    }

    #[test]
    fn census_requires_generic_curve() {
        let mut r = report(vec![line(0.0)]);
        r.generic = false;
        assert_eq!(behavior_census(&r, &contacts(&[])), Err(BoundsError::NonGeneric));
    }
}
