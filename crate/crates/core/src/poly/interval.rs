//! Outward-inflated interval arithmetic and polynomial range enclosures.
//!
//! Rounding modes are not touched. Instead every operation widens its
//! result by a few ulps relative to the endpoint magnitudes, plus the width
//! factor `1 + 4 eps` and a smallest-normal pad, which bounds the rounding
//! error of a single IEEE operation.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{BivariatePoly, PolyError};

const REL: f64 = 4.0 * f64::EPSILON;
const PAD: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Widens outward to absorb the rounding of the operation that produced
    /// `self`.
    fn inflate(self) -> Self {
        let w = (self.hi - self.lo) * REL * 0.5;
        Self {
            lo: self.lo - self.lo.abs() * REL - w - PAD,
            hi: self.hi + self.hi.abs() * REL + w + PAD,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn rad(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// Strict interior containment of `other`.
    pub fn interior_contains(&self, other: &Interval) -> bool {
        self.lo < other.lo && other.hi < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn scale(self, c: f64) -> Self {
        let (a, b) = (self.lo * c, self.hi * c);
        Interval { lo: a.min(b), hi: a.max(b) }.inflate()
    }

    /// `self^k`, tight for even powers of intervals that straddle zero.
    pub fn powi(self, k: u32) -> Self {
        match k {
            0 => Interval::point(1.0),
            1 => self,
            _ => {
                let a = self.lo.abs().powi(k as i32);
                let b = self.hi.abs().powi(k as i32);
                let out = if k % 2 == 1 {
                    Interval { lo: self.lo.powi(k as i32), hi: self.hi.powi(k as i32) }
                } else if self.lo <= 0.0 && self.hi >= 0.0 {
                    Interval { lo: 0.0, hi: a.max(b) }
                } else {
                    Interval { lo: a.min(b), hi: a.max(b) }
                };
                // powi takes up to log2(k) roundings
                let mut r = out;
                for _ in 0..(32 - k.leading_zeros()) {
                    r = r.inflate();
                }
                if k % 2 == 0 {
                    r.lo = r.lo.max(0.0);
                }
                r
            }
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo + rhs.lo, hi: self.hi + rhs.hi }.inflate()
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo - rhs.hi, hi: self.hi - rhs.lo }.inflate()
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }.inflate()
    }
}

/// Axis-aligned search window `[x_lo, x_hi] x [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Box2 {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self, PolyError> {
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && a < b;
        if !ok(x_lo, x_hi) || !ok(y_lo, y_hi) {
            return Err(PolyError::InvalidBox(format!(
                "[{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]"
            )));
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    /// `[lo, hi]^2`.
    pub fn square(lo: f64, hi: f64) -> Result<Self, PolyError> {
        Self::new(lo, hi, lo, hi)
    }

    /// Square of half-width `r` centred on `(x, y)`.
    pub fn around(x: f64, y: f64, r: f64) -> Result<Self, PolyError> {
        Self::new(x - r, x + r, y - r, y + r)
    }

    pub(crate) fn from_intervals(x: Interval, y: Interval) -> Self {
        Self { x_lo: x.lo, x_hi: x.hi, y_lo: y.lo, y_hi: y.hi }
    }

    pub fn x(&self) -> Interval {
        Interval { lo: self.x_lo, hi: self.x_hi }
    }

    pub fn y(&self) -> Interval {
        Interval { lo: self.y_lo, hi: self.y_hi }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_lo <= x && x <= self.x_hi && self.y_lo <= y && y <= self.y_hi
    }

    pub fn intersects(&self, other: &Box2) -> bool {
        self.x_lo <= other.x_hi
            && other.x_lo <= self.x_hi
            && self.y_lo <= other.y_hi
            && other.y_lo <= self.y_hi
    }

    /// Splits along the longer side.
    pub fn bisect(&self) -> [Box2; 2] {
        let (cx, cy) = self.center();
        if self.width() >= self.height() {
            [
                Box2 { x_hi: cx, ..*self },
                Box2 { x_lo: cx, ..*self },
            ]
        } else {
            [
                Box2 { y_hi: cy, ..*self },
                Box2 { y_lo: cy, ..*self },
            ]
        }
    }

    /// Four quadrants in the order SW, SE, NW, NE.
    pub fn quadrisect(&self) -> [Box2; 4] {
        let (cx, cy) = self.center();
        [
            Box2 { x_hi: cx, y_hi: cy, ..*self },
            Box2 { x_lo: cx, y_hi: cy, ..*self },
            Box2 { x_hi: cx, y_lo: cy, ..*self },
            Box2 { x_lo: cx, y_lo: cy, ..*self },
        ]
    }
}

impl BivariatePoly {
    /// Range enclosure over `b`: every value `p(x, y)` with `(x, y)` in `b`
    /// lies in the result.
    pub fn eval_interval(&self, b: &Box2) -> Interval {
        self.eval_on(b.x(), b.y())
    }

    /// Natural interval extension, summed term by term with exact power
    /// enclosures for each monomial.
    pub fn eval_on(&self, x: Interval, y: Interval) -> Interval {
        let mut acc = Interval::point(0.0);
        for ((i, j), c) in self.terms() {
            let mono = x.powi(i) * y.powi(j);
            acc = acc + mono.scale(c);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;
    use proptest::prelude::*;

    #[test]
    fn monotone_range_enclosure() {
        let p = parse_poly("1 - x^2").unwrap();
        let b = Box2::new(0.0, 2.0, 0.0, 1.0).unwrap();
        let r = p.eval_interval(&b);
        assert!(r.lo <= -3.0 && r.hi >= 1.0, "{r:?}");
        assert!(r.lo > -3.001 && r.hi < 1.001, "enclosure too loose: {r:?}");
    }

    #[test]
    fn even_power_of_straddling_interval() {
        let r = Interval::new(-2.0, 1.0).powi(2);
        assert_eq!(r.lo, 0.0);
        assert!(r.hi >= 4.0 && r.hi < 4.0001);
    }

    #[test]
    fn thin_box_contains_point_value() {
        let p = parse_poly("x^5*y - 3*x^2*y^3 + 1/7*y - 2").unwrap();
        let (x, y) = (0.37, -1.21);
        let b = Box2::around(x, y, 1e-14).unwrap();
        assert!(p.eval_interval(&b).contains(p.eval(x, y)));
    }

    #[test]
    fn box_validation() {
        assert!(Box2::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Box2::new(0.0, 1.0, 2.0, -1.0).is_err());
        assert!(Box2::new(0.0, f64::NAN, 0.0, 1.0).is_err());
    }

    fn arb_poly() -> impl Strategy<Value = BivariatePoly> {
        prop::collection::vec((0u32..=6, 0u32..=6, -10.0f64..10.0), 1..10)
            .prop_map(BivariatePoly::from_terms)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn interval_soundness(
            p in arb_poly(),
            (x0, y0) in (-3.0f64..3.0, -3.0f64..3.0),
            (w, h) in (1e-12f64..2.0, 1e-12f64..2.0),
            (s, t) in (0.0f64..=1.0, 0.0f64..=1.0),
        ) {
            let b = Box2::new(x0, x0 + w, y0, y0 + h).unwrap();
            let (x, y) = ((x0 + s * w).min(b.x_hi), (y0 + t * h).min(b.y_hi));
            let r = p.eval_interval(&b);
            let v = p.eval(x, y);
            prop_assert!(r.contains(v), "{} at ({}, {}) = {} not in {:?}", p, x, y, v, r);
        }
    }
}
