//! Sparse bivariate polynomials and the planar systems built from them.
//!
//! A [`BivariatePoly`] stores only nonzero coefficients, keyed by the
//! exponent pair `(i, j)` of `x^i y^j`. Everything downstream (divergence,
//! the contact system, interval enclosures) is derived from this type.

mod interval;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use interval::{Box2, Interval};
pub use parse::parse_poly;

/// Largest total degree the parser and multiplication will produce.
pub const MAX_DEGREE: u32 = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset} (only x and y are allowed)")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("exponent overflow at byte {offset}")]
    ExponentOverflow { offset: usize },
    #[error("P and Q are both identically zero")]
    ZeroSystem,
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

/// Total degree of a polynomial. The zero polynomial has degree
/// `NegInfinity`, which orders below every finite degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    NegInfinity,
    Finite(u32),
}

impl Degree {
    pub fn finite(self) -> Option<u32> {
        match self {
            Degree::NegInfinity => None,
            Degree::Finite(d) => Some(d),
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInfinity => f.write_str("-inf"),
            Degree::Finite(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

/// One power of `y` in the Horner layout: `y^j * sum_i c_i x^i`, with the
/// `(i, c)` pairs sorted by decreasing `i`.
#[derive(Debug, Clone)]
struct HornerRow {
    j: u32,
    xs: Vec<(u32, f64)>,
}

/// Sparse real polynomial in `x` and `y`.
#[derive(Clone)]
pub struct BivariatePoly {
    terms: BTreeMap<(u32, u32), f64>,
    // rows sorted by decreasing j
    rows: Vec<HornerRow>,
}

impl PartialEq for BivariatePoly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl fmt::Debug for BivariatePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BivariatePoly({self})")
    }
}

impl BivariatePoly {
    pub fn zero() -> Self {
        Self::from_map(BTreeMap::new())
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    pub fn monomial(c: f64, i: u32, j: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((i, j), c);
        Self::from_map(terms)
    }

    /// Builds a polynomial from `(i, j, c)` triples; repeated exponents are summed.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, f64)>,
    {
        let mut map = BTreeMap::new();
        for (i, j, c) in terms {
            *map.entry((i, j)).or_insert(0.0) += c;
        }
        Self::from_map(map)
    }

    fn from_map(mut terms: BTreeMap<(u32, u32), f64>) -> Self {
        terms.retain(|_, c| *c != 0.0);
        let mut by_row: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
        for (&(i, j), &c) in &terms {
            by_row.entry(j).or_default().push((i, c));
        }
        let rows = by_row
            .into_iter()
            .rev()
            .map(|(j, mut xs)| {
                xs.reverse();
                HornerRow { j, xs }
            })
            .collect();
        Self { terms, rows }
    }

    /// Stored `((i, j), c)` pairs in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True for the zero polynomial and for nonzero constants.
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|&(i, j)| i == 0 && j == 0)
    }

    pub fn degree(&self) -> Degree {
        self.terms
            .keys()
            .map(|&(i, j)| i + j)
            .max()
            .map_or(Degree::NegInfinity, Degree::Finite)
    }

    /// Largest absolute coefficient (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Point evaluation. Terms are grouped by power of `y`; each group is a
    /// Horner scheme in `x`, and the groups are combined by Horner in `y`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let mut prev_j: Option<u32> = None;
        for row in &self.rows {
            if let Some(pj) = prev_j {
                acc *= y.powi((pj - row.j) as i32);
            }
            acc += horner(&row.xs, x);
            prev_j = Some(row.j);
        }
        if let Some(pj) = prev_j {
            acc *= y.powi(pj as i32);
        }
        acc
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_map(self.terms.iter().map(|(&k, &v)| (k, v * c)).collect())
    }

    pub fn differentiate(&self, var: Var) -> Self {
        let map = self
            .terms
            .iter()
            .filter_map(|(&(i, j), &c)| match var {
                Var::X if i > 0 => Some(((i - 1, j), c * i as f64)),
                Var::Y if j > 0 => Some(((i, j - 1), c * j as f64)),
                _ => None,
            })
            .collect();
        Self::from_map(map)
    }

    /// `self^k` by repeated multiplication.
    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }
}

fn horner(xs: &[(u32, f64)], x: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev_i: Option<u32> = None;
    for &(i, c) in xs {
        if let Some(pi) = prev_i {
            acc *= x.powi((pi - i) as i32);
        }
        acc += c;
        prev_i = Some(i);
    }
    if let Some(pi) = prev_i {
        acc *= x.powi(pi as i32);
    }
    acc
}

impl Add for &BivariatePoly {
    type Output = BivariatePoly;
    fn add(self, rhs: &BivariatePoly) -> BivariatePoly {
        let mut map = self.terms.clone();
        for (&k, &c) in &rhs.terms {
            *map.entry(k).or_insert(0.0) += c;
        }
        BivariatePoly::from_map(map)
    }
}

impl Sub for &BivariatePoly {
    type Output = BivariatePoly;
    fn sub(self, rhs: &BivariatePoly) -> BivariatePoly {
        let mut map = self.terms.clone();
        for (&k, &c) in &rhs.terms {
            *map.entry(k).or_insert(0.0) -= c;
        }
        BivariatePoly::from_map(map)
    }
}

impl Mul for &BivariatePoly {
    type Output = BivariatePoly;
    fn mul(self, rhs: &BivariatePoly) -> BivariatePoly {
        let mut map = BTreeMap::new();
        for (&(i1, j1), &c1) in &self.terms {
            for (&(i2, j2), &c2) in &rhs.terms {
                *map.entry((i1 + i2, j1 + j2)).or_insert(0.0) += c1 * c2;
            }
        }
        BivariatePoly::from_map(map)
    }
}

impl Neg for &BivariatePoly {
    type Output = BivariatePoly;
    fn neg(self) -> BivariatePoly {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for BivariatePoly {
            type Output = BivariatePoly;
            fn $m(self, rhs: BivariatePoly) -> BivariatePoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for BivariatePoly {
    type Output = BivariatePoly;
    fn neg(self) -> BivariatePoly {
        -&self
    }
}

impl std::str::FromStr for BivariatePoly {
    type Err = PolyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_poly(s)
    }
}

impl Serialize for BivariatePoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BivariatePoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_poly(&text).map_err(serde::de::Error::custom)
    }
}

/// Anything that can be evaluated as a planar vector field together with its
/// Jacobian. [`PlanarSystem`] is the main implementor.
pub trait VectorField: Sync {
    fn field(&self, x: f64, y: f64) -> [f64; 2];
    /// `[[P_x, P_y], [Q_x, Q_y]]`
    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2];
}

/// The identically zero field. Not a valid [`PlanarSystem`], but the
/// energy and integrator code accept it.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn field(&self, _: f64, _: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn jacobian(&self, _: f64, _: f64) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// `x' = P(x, y), y' = Q(x, y)` with `n = max(deg P, deg Q)`.
#[derive(Clone, Debug)]
pub struct PlanarSystem {
    p: BivariatePoly,
    q: BivariatePoly,
    n: u32,
    px: BivariatePoly,
    py: BivariatePoly,
    qx: BivariatePoly,
    qy: BivariatePoly,
}

impl PartialEq for PlanarSystem {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }
}

impl PlanarSystem {
    pub fn new(p: BivariatePoly, q: BivariatePoly) -> Result<Self, PolyError> {
        if p.is_zero() && q.is_zero() {
            return Err(PolyError::ZeroSystem);
        }
        let n = p.degree().max(q.degree()).finite().unwrap_or(0);
        Ok(Self {
            px: p.differentiate(Var::X),
            py: p.differentiate(Var::Y),
            qx: q.differentiate(Var::X),
            qy: q.differentiate(Var::Y),
            p,
            q,
            n,
        })
    }

    pub fn parse(p: &str, q: &str) -> Result<Self, PolyError> {
        Self::new(parse_poly(p)?, parse_poly(q)?)
    }

    pub fn p(&self) -> &BivariatePoly {
        &self.p
    }

    pub fn q(&self) -> &BivariatePoly {
        &self.q
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    /// `Div = P_x + Q_y`.
    pub fn divergence(&self) -> BivariatePoly {
        &self.px + &self.qy
    }

    /// The pair `(P (P_xx + Q_yx) + Q (P_xy + Q_yy), Div)`, i.e. `F . grad Div`
    /// and `Div`. Common zeros are the contact points of the field with the
    /// divergence curve.
    pub fn contact_system(&self) -> (BivariatePoly, BivariatePoly) {
        let div = self.divergence();
        let dx = div.differentiate(Var::X);
        let dy = div.differentiate(Var::Y);
        let tangency = &(&self.p * &dx) + &(&self.q * &dy);
        (tangency, div)
    }

    /// Adds an independent uniform draw from `[-delta, delta]` to every
    /// coefficient of the dense degree-`n` basis of `P` and `Q`, so that
    /// monomials absent from the input can appear but the degree never grows.
    pub fn perturb(&self, delta: f64, seed: u64) -> Self {
        if delta <= 0.0 {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = |poly: &BivariatePoly| {
            let mut terms = Vec::new();
            for total in 0..=self.n {
                for j in 0..=total {
                    let i = total - j;
                    let d: f64 = rng.random_range(-delta..=delta);
                    terms.push((i, j, poly.coeff(i, j) + d));
                }
            }
            BivariatePoly::from_terms(terms)
        };
        let p = jitter(&self.p);
        let q = jitter(&self.q);
        Self::new(p, q).expect("perturbation of a nonzero system stays nonzero")
    }
}

impl VectorField for PlanarSystem {
    fn field(&self, x: f64, y: f64) -> [f64; 2] {
        [self.p.eval(x, y), self.q.eval(x, y)]
    }

    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [
            [self.px.eval(x, y), self.py.eval(x, y)],
            [self.qx.eval(x, y), self.qy.eval(x, y)],
        ]
    }
}

/// Free-function form of [`BivariatePoly::differentiate`].
pub fn differentiate(p: &BivariatePoly, var: Var) -> BivariatePoly {
    p.differentiate(var)
}

pub fn divergence(sys: &PlanarSystem) -> BivariatePoly {
    sys.divergence()
}

pub fn contact_system(sys: &PlanarSystem) -> (BivariatePoly, BivariatePoly) {
    sys.contact_system()
}

pub fn perturb(sys: &PlanarSystem, delta: f64, seed: u64) -> PlanarSystem {
    sys.perturb(delta, seed)
}

/// Van der Pol with unit damping: `x' = y - (x^3/3 - x), y' = -x`.
pub fn van_der_pol() -> PlanarSystem {
    PlanarSystem::parse("y - (x^3/3 - x)", "-x").expect("fixture parses")
}

/// `x' = -y + x(1 - x^2 - y^2), y' = x + y(1 - x^2 - y^2)`; the unit circle
/// is an attracting limit cycle.
pub fn cubic_circle() -> PlanarSystem {
    PlanarSystem::parse("-y + x*(1 - x^2 - y^2)", "x + y*(1 - x^2 - y^2)").expect("fixture parses")
}

/// The harmonic center `x' = -y, y' = x`.
pub fn harmonic() -> PlanarSystem {
    PlanarSystem::parse("-y", "x").expect("fixture parses")
}
