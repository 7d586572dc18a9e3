//! Fixed-step RK4 integration and Poincare-map cycle finding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::VectorField;
use crate::variational::{energy_e0, DiscretizedPath, VariationalError};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_TIME_CAP: f64 = 200.0;
const BLOWUP: f64 = 1e12;
const NON_ISOLATED: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("end time must be positive and finite, got {0}")]
    BadTime(f64),
    #[error("section direction must be nonzero")]
    BadSection,
    #[error("state norm exceeded 1e12 at t = {t}")]
    Blowup { t: f64 },
    #[error("no return to the section: {0}")]
    NoReturn(String),
    #[error("return map did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("cycle is not isolated: return-map derivative {derivative} is within 1e-3 of 1")]
    NonIsolated { derivative: f64 },
    #[error("orbit samples are not uniform in time")]
    NonUniformSamples,
    #[error("orbit has no period")]
    NoPeriod,
    #[error(transparent)]
    Path(#[from] VariationalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub points: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub period: Option<f64>,
}

impl Orbit {
    /// A closed orbit from a periodic path: `K + 1` points, the last
    /// repeating the first, at uniform times over `period`.
    pub fn from_path(path: &DiscretizedPath, period: f64) -> Self {
        let k = path.k();
        let mut points = path.samples().to_vec();
        points.push(points[0]);
        let times = (0..=k).map(|i| period * i as f64 / k as f64).collect();
        Self { points, times, period: Some(period) }
    }

    pub fn closure_error(&self) -> f64 {
        let (a, b) = (self.points[0], self.points[self.points.len() - 1]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    fn is_uniform(&self) -> bool {
        let n = self.times.len();
        if n < 2 {
            return false;
        }
        let dt = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1e-300))
    }

    /// One period at `k` uniform time fractions. Exact subsampling when the
    /// stored sample count is a multiple of `k`, trigonometric
    /// interpolation otherwise.
    pub fn to_path(&self, k: usize) -> Result<DiscretizedPath, OracleError> {
        if self.period.is_none() {
            return Err(OracleError::NoPeriod);
        }
        if !self.is_uniform() {
            return Err(OracleError::NonUniformSamples);
        }
        let n = self.points.len() - 1;
        if n % k == 0 {
            let stride = n / k;
            return Ok(DiscretizedPath::new((0..k).map(|i| self.points[i * stride]).collect())?);
        }
        Ok(DiscretizedPath::new(self.points[..n].to_vec())?.resample(k)?)
    }
}

/// A line through `point` along `direction`. Crossings count when the
/// signed distance along `(d_y, -d_x)` goes from negative to nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub point: [f64; 2],
    pub direction: [f64; 2],
}

impl Section {
    pub fn new(point: [f64; 2], direction: [f64; 2]) -> Result<Self, OracleError> {
        let ok = point.iter().chain(&direction).all(|v| v.is_finite());
        if !ok || direction[0].hypot(direction[1]) == 0.0 {
            return Err(OracleError::BadSection);
        }
        Ok(Self { point, direction })
    }

    /// `x = c`, crossed with `x` increasing (`increasing = true`) or
    /// decreasing.
    pub fn vertical(c: f64, increasing: bool) -> Self {
        let s = if increasing { 1.0 } else { -1.0 };
        Self { point: [c, 0.0], direction: [0.0, s] }
    }

    /// `y = c`, crossed with `y` increasing or decreasing.
    pub fn horizontal(c: f64, increasing: bool) -> Self {
        let s = if increasing { -1.0 } else { 1.0 };
        Self { point: [0.0, c], direction: [s, 0.0] }
    }

    fn signed(&self, u: [f64; 2]) -> f64 {
        let [dx, dy] = self.direction;
        dy * (u[0] - self.point[0]) - dx * (u[1] - self.point[1])
    }

    fn coordinate(&self, u: [f64; 2]) -> f64 {
        let [dx, dy] = self.direction;
        (dx * (u[0] - self.point[0]) + dy * (u[1] - self.point[1])) / (dx * dx + dy * dy)
    }

    fn at(&self, sigma: f64) -> [f64; 2] {
        [self.point[0] + sigma * self.direction[0], self.point[1] + sigma * self.direction[1]]
    }
}

fn rk4<F: VectorField + ?Sized>(sys: &F, u: [f64; 2], h: f64) -> [f64; 2] {
    let f = |p: [f64; 2]| sys.field(p[0], p[1]);
    let k1 = f(u);
    let k2 = f([u[0] + 0.5 * h * k1[0], u[1] + 0.5 * h * k1[1]]);
    let k3 = f([u[0] + 0.5 * h * k2[0], u[1] + 0.5 * h * k2[1]]);
    let k4 = f([u[0] + h * k3[0], u[1] + h * k3[1]]);
    [
        u[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        u[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn norm(u: [f64; 2]) -> f64 {
    u[0].hypot(u[1])
}

/// RK4 trajectory from `x0` over `[0, t_end]`. The step is shrunk to
/// `t_end / ceil(t_end / h)` so the last sample lands on `t_end`.
pub fn integrate<F: VectorField + ?Sized>(sys: &F, x0: [f64; 2], t_end: f64, h: f64) -> Result<Orbit, OracleError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(OracleError::BadStep(h));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(OracleError::BadTime(t_end));
    }
    let steps = (t_end / h).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut points = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut u = x0;
    points.push(u);
    times.push(0.0);
    for i in 1..=steps {
        u = rk4(sys, u, h);
        let t = i as f64 * h;
        if !(norm(u) <= BLOWUP) {
            return Err(OracleError::Blowup { t });
        }
        points.push(u);
        times.push(t);
    }
    Ok(Orbit { points, times, period: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub h: f64,
    pub time_cap: f64,
    pub max_iters: usize,
    /// Samples per period of the returned orbit.
    pub samples: usize,
    /// Return searches give up once the state leaves this radius.
    pub escape_radius: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { h: DEFAULT_STEP, time_cap: DEFAULT_TIME_CAP, max_iters: 60, samples: 4096, escape_radius: 1e6 }
    }
}

/// Time `tau` in `(0, h]` at which the RK4 step from `u` meets the section.
fn crossing_time<F: VectorField + ?Sized>(sys: &F, sec: &Section, u: [f64; 2], h: f64) -> f64 {
    let s = |tau: f64| sec.signed(rk4(sys, u, tau));
    let (mut a, mut b) = (0.0, h);
    let (mut fa, mut fb) = (s(a), s(b));
    // Illinois regula falsi on a bracket fa < 0 <= fb
    let mut side = 0;
    for _ in 0..100 {
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        let fc = s(c);
        if fc == 0.0 || (b - a).abs() <= 1e-15 * h {
            return c;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 1e-15 * h {
            break;
        }
    }
    0.5 * (a + b)
}

/// First return of the trajectory from section coordinate `sigma`: the
/// new coordinate and the return time.
fn first_return<F: VectorField + ?Sized>(
    sys: &F,
    sec: &Section,
    sigma: f64,
    opts: &OracleOptions,
) -> Result<(f64, f64), OracleError> {
    let mut u = sec.at(sigma);
    let mut s_prev = sec.signed(u);
    let mut t = 0.0;
    // skip the start point itself
    let mut armed = s_prev < 0.0;
    while t < opts.time_cap {
        let next = rk4(sys, u, opts.h);
        if !(norm(next) <= opts.escape_radius) {
            return Err(OracleError::NoReturn(format!("trajectory escaped at t = {t:.3}")));
        }
        let s = sec.signed(next);
        if armed && s_prev < 0.0 && s >= 0.0 {
            let tau = crossing_time(sys, sec, u, opts.h);
            let hit = rk4(sys, u, tau);
            return Ok((sec.coordinate(hit), t + tau));
        }
        if s < 0.0 {
            armed = true;
        }
        s_prev = s;
        u = next;
        t += opts.h;
    }
    Err(OracleError::NoReturn(format!("no section crossing within t = {}", opts.time_cap)))
}

/// Fixed point of the first-return map to `section`, started from the
/// projection of `x0` onto it, solved by secant iteration to `|R(s) - s| <=
/// tol`.
pub fn find_limit_cycle<F: VectorField + ?Sized>(
    sys: &F,
    section: &Section,
    x0: [f64; 2],
    tol: f64,
    opts: &OracleOptions,
) -> Result<Orbit, OracleError> {
    if !(opts.h > 0.0) || !opts.h.is_finite() {
        return Err(OracleError::BadStep(opts.h));
    }
    let g = |sigma: f64| first_return(sys, section, sigma, opts).map(|(r, t)| (r - sigma, t));
    let mut s0 = section.coordinate(x0);
    let (mut g0, mut period) = g(s0)?;
    let mut s1 = s0 + g0;
    let mut iterations = 0;
    if g0.abs() > tol {
        let (mut g1, mut t1) = g(s1)?;
        while g1.abs() > tol {
            iterations += 1;
            if iterations > opts.max_iters || g1 == g0 {
                return Err(OracleError::NotConverged { iterations, residual: g1.abs() });
            }
            let s2 = s1 - g1 * (s1 - s0) / (g1 - g0);
            (s0, g0) = (s1, g1);
            s1 = s2;
            (g1, t1) = g(s1)?;
        }
        period = t1;
    } else {
        s1 = s0;
    }
    let delta = 1e-4 * (1.0 + s1.abs());
    let (gp, _) = g(s1 + delta)?;
    let (gm, _) = g(s1 - delta)?;
    let derivative = 1.0 + (gp - gm) / (2.0 * delta);
    if (derivative - 1.0).abs() < NON_ISOLATED {
        return Err(OracleError::NonIsolated { derivative });
    }
    log::debug!("cycle found after {iterations} secant steps: period {period}, R' = {derivative:e}");
    sample_period(sys, section.at(s1), period, opts)
}

fn sample_period<F: VectorField + ?Sized>(
    sys: &F,
    start: [f64; 2],
    period: f64,
    opts: &OracleOptions,
) -> Result<Orbit, OracleError> {
    let n = opts.samples.max(1);
    let sub = (period / (n as f64 * opts.h)).ceil().max(1.0) as usize;
    let tau = period / (n * sub) as f64;
    let mut points = Vec::with_capacity(n + 1);
    let mut u = start;
    points.push(u);
    for _ in 0..n {
        for _ in 0..sub {
            u = rk4(sys, u, tau);
        }
        points.push(u);
    }
    let times = (0..=n).map(|i| period * i as f64 / n as f64).collect();
    Ok(Orbit { points, times, period: Some(period) })
}

/// `E0` of the orbit sampled at `k` uniform fractions of its period.
pub fn cycle_energy_check<F: VectorField + ?Sized>(sys: &F, orbit: &Orbit, k: usize) -> Result<f64, OracleError> {
    Ok(energy_e0(&orbit.to_path(k)?, sys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{cubic_circle, harmonic, van_der_pol, ZeroField};
    use std::f64::consts::TAU;

    #[test]
    fn harmonic_rotation() {
        let o = integrate(&harmonic(), [1.0, 0.0], TAU, 1e-3).unwrap();
        let end = o.points.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-9 && end[1].abs() < 1e-9, "{end:?}");
        assert!((o.times.last().unwrap() - TAU).abs() < 1e-12);
    }

    #[test]
    fn zero_field_is_constant() {
        let o = integrate(&ZeroField, [0.3, -2.0], 1.0, 0.1).unwrap();
        assert!(o.points.iter().all(|p| *p == [0.3, -2.0]));
    }

    #[test]
    fn bad_arguments() {
        assert_eq!(integrate(&harmonic(), [1.0, 0.0], 1.0, 0.0), Err(OracleError::BadStep(0.0)));
        assert_eq!(integrate(&harmonic(), [1.0, 0.0], -1.0, 0.1), Err(OracleError::BadTime(-1.0)));
        assert_eq!(Section::new([0.0; 2], [0.0; 2]), Err(OracleError::BadSection));
    }

    #[test]
    fn blowup_is_reported() {
        let sys = crate::PlanarSystem::parse("x^2", "0").unwrap();
        assert!(matches!(integrate(&sys, [1.0, 0.0], 2.0, 1e-3), Err(OracleError::Blowup { .. })));
    }

    #[test]
    fn cubic_circle_cycle() {
        let o = find_limit_cycle(&cubic_circle(), &Section::horizontal(0.0, true), [0.5, 0.0], 1e-12, &OracleOptions::default())
            .unwrap();
        assert!((o.period.unwrap() - TAU).abs() < 1e-6);
        assert!(o.points.iter().all(|p| (p[0].hypot(p[1]) - 1.0).abs() < 1e-9));
        assert!(o.closure_error() < 1e-9);
        assert!(cycle_energy_check(&cubic_circle(), &o, 128).unwrap() <= 1e-10);
    }

    #[test]
    fn van_der_pol_cycle() {
        let sys = van_der_pol();
        let opts = OracleOptions::default();
        let a = find_limit_cycle(&sys, &Section::vertical(0.0, true), [0.0, 1.0], 1e-10, &opts).unwrap();
        let b = find_limit_cycle(&sys, &Section::vertical(0.0, true), [0.0, 1.0], 1e-10, &OracleOptions { h: 5e-4, ..opts })
            .unwrap();
        let (ta, tb) = (a.period.unwrap(), b.period.unwrap());
        assert!((ta - 6.663).abs() < 1e-3, "{ta}");
        assert!((ta - tb).abs() < 1e-3);
        assert!(cycle_energy_check(&sys, &a, 256).unwrap() <= 1e-6);
    }

    #[test]
    fn center_is_not_isolated() {
        let err = find_limit_cycle(&harmonic(), &Section::horizontal(0.0, true), [1.0, 0.0], 1e-10, &OracleOptions::default())
            .unwrap_err();
        assert!(matches!(err, OracleError::NonIsolated { .. } | OracleError::NotConverged { .. }), "{err:?}");
    }

    #[test]
    fn no_return_from_a_source() {
        let sys = crate::PlanarSystem::parse("x", "y").unwrap();
        let err = find_limit_cycle(&sys, &Section::vertical(0.0, true), [0.0, 1.0], 1e-10, &OracleOptions::default())
            .unwrap_err();
        assert!(matches!(err, OracleError::NoReturn(_)), "{err:?}");
    }
}
