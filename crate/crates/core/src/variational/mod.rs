//! Discretized periodic paths and the energy functionals
//!
//! `E0(u) = int_0^1 1/2 (P(u) y' - Q(u) x')^2 dt`
//!
//! and its perturbation
//!
//! `Eeps(u) = E0(u) + eps/2 |u|^2 + <u, v> + 1/(2 eps) |v|^2`
//!
//! in the H2 norm `|u|^2 = int |u''|^2 + |u'|^2 + |u|^2`. Derivatives are
//! spectral and integrals use the periodic rectangle rule, so every
//! gradient here is the exact gradient of the discrete objective with
//! respect to the `2K` sample coordinates, laid out as
//! `[x_0, y_0, x_1, y_1, ...]`.

mod descend;
mod morse;
mod spectral;

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::VectorField;
use spectral::Spectral;

pub use descend::{
    continuation, default_schedule, descend, descend_many, ContinuationStage, DescendOptions, DescendOutcome, StepPolicy,
    Termination, TraceRow,
};
pub use morse::{hessian, hessian_spectrum, morse_census, morse_index, HessianSpectrum, MorseCensus, MorseIndex};

pub const MIN_SAMPLES: usize = 16;
pub const DEFAULT_K: usize = 256;
pub const DEFAULT_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("a path needs at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample count must be even, got {0}")]
    OddSampleCount(usize),
    #[error("path sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("sample count mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("path is not regular: minimal speed {min_speed:e}")]
    IrregularPath { min_speed: f64 },
    #[error("descent needs a path of winding number +1, got {0}")]
    WrongWinding(i64),
    #[error("no step preserving the winding number found at iteration {iteration}")]
    WindingBroken { iteration: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("path is not critical: gradient norm {grad_norm:e} exceeds {threshold:e}")]
    NotCritical { grad_norm: f64, threshold: f64 },
    #[error("epsilon must be positive here, got {0}")]
    BadEpsilon(f64),
    #[error("requested {requested} eigenvalues of a {dim}x{dim} Hessian")]
    TooManyEigenvalues { requested: usize, dim: usize },
}

/// Samples `u(k/K)`, `k = 0..K`, of a 1-periodic plane path. The endpoint is
/// not repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct DiscretizedPath {
    samples: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    #[serde(rename = "K")]
    k: usize,
    samples: Vec<[f64; 2]>,
}

impl TryFrom<PathRepr> for DiscretizedPath {
    type Error = VariationalError;
    fn try_from(r: PathRepr) -> Result<Self, Self::Error> {
        if r.k != r.samples.len() {
            return Err(VariationalError::SizeMismatch { expected: r.k, got: r.samples.len() });
        }
        DiscretizedPath::new(r.samples)
    }
}

impl From<DiscretizedPath> for PathRepr {
    fn from(p: DiscretizedPath) -> Self {
        PathRepr { k: p.samples.len(), samples: p.samples }
    }
}

impl DiscretizedPath {
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self, VariationalError> {
        let k = samples.len();
        if k < MIN_SAMPLES {
            return Err(VariationalError::TooFewSamples(k));
        }
        if k % 2 != 0 {
            return Err(VariationalError::OddSampleCount(k));
        }
        if let Some(i) = samples.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(VariationalError::NonFiniteSample(i));
        }
        Ok(Self { samples })
    }

    /// Samples `f(t)` at `t = k/K`.
    pub fn from_fn(k: usize, f: impl Fn(f64) -> [f64; 2]) -> Result<Self, VariationalError> {
        Self::new((0..k).map(|i| f(i as f64 / k as f64)).collect())
    }

    /// Counter-clockwise circle traversed once.
    pub fn circle(k: usize, center: [f64; 2], radius: f64) -> Result<Self, VariationalError> {
        Self::from_fn(k, |t| [center[0] + radius * (TAU * t).cos(), center[1] + radius * (TAU * t).sin()])
    }

    /// Inverse of [`DiscretizedPath::flat`].
    pub fn from_flat(flat: &[f64]) -> Result<Self, VariationalError> {
        Self::new(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<[f64; 2]> {
        self.samples
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 / self.k() as f64
    }

    /// `[x_0, y_0, x_1, y_1, ...]`
    pub fn flat(&self) -> Vec<f64> {
        self.samples.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// `u(t + offset/K)`.
    pub fn shifted(&self, offset: usize) -> Self {
        let k = self.k();
        Self { samples: (0..k).map(|i| self.samples[(i + offset) % k]).collect() }
    }

    /// `u(-t)`.
    pub fn reversed(&self) -> Self {
        let k = self.k();
        Self { samples: (0..k).map(|i| self.samples[(k - i) % k]).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { samples: self.samples.iter().map(|p| [c * p[0], c * p[1]]).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &DiscretizedPath) -> Result<Self, VariationalError> {
        check_same_k(self, other)?;
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| [a[0] + c * b[0], a[1] + c * b[1]])
                .collect(),
        })
    }

    /// Trigonometric interpolation onto `new_k` samples.
    pub fn resample(&self, new_k: usize) -> Result<Self, VariationalError> {
        Self::new(spectral::resample(&self.samples, new_k))
    }

    /// Multiplies the offset of every sample from the centroid by
    /// `1 + amplitude * eta(t)`, where `eta` is a random trigonometric
    /// polynomial of modes 1 to 4 scaled to `max |eta| = 1`.
    pub fn with_radial_noise(&self, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))).collect();
        let eta: Vec<f64> = (0..self.k())
            .map(|i| {
                let t = self.t(i);
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, (a, b))| {
                        let w = TAU * (m + 1) as f64 * t;
                        a * w.cos() + b * w.sin()
                    })
                    .sum()
            })
            .collect();
        let peak = eta.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let k = self.k() as f64;
        let cx = self.samples.iter().map(|p| p[0]).sum::<f64>() / k;
        let cy = self.samples.iter().map(|p| p[1]).sum::<f64>() / k;
        Self {
            samples: self
                .samples
                .iter()
                .zip(&eta)
                .map(|(p, e)| {
                    let f = 1.0 + amplitude * e / peak;
                    [cx + f * (p[0] - cx), cy + f * (p[1] - cy)]
                })
                .collect(),
        }
    }

    /// Largest `| |u_k - c| - r |`.
    pub fn max_radial_deviation(&self, center: [f64; 2], radius: f64) -> f64 {
        self.samples
            .iter()
            .map(|p| ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs())
            .fold(0.0, f64::max)
    }
}

fn check_same_k(a: &DiscretizedPath, b: &DiscretizedPath) -> Result<(), VariationalError> {
    if a.k() != b.k() {
        return Err(VariationalError::SizeMismatch { expected: a.k(), got: b.k() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Quadrature {
    #[default]
    PeriodicRectangle,
}

/// `epsilon` and the auxiliary path `v_eps`. With `v_eps = None` the
/// auxiliary path is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub epsilon: f64,
    pub v_eps: Option<DiscretizedPath>,
    /// `K_v` in `|v_eps| <= K_v eps`, when known.
    pub v_bound: Option<f64>,
    pub quadrature: Quadrature,
}

impl EnergyConfig {
    /// `epsilon = 0`: the objective is `E0`.
    pub fn unperturbed() -> Self {
        Self { epsilon: 0.0, v_eps: None, v_bound: None, quadrature: Quadrature::PeriodicRectangle }
    }

    pub fn new(epsilon: f64, v_eps: Option<DiscretizedPath>) -> Result<Self, VariationalError> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(VariationalError::BadEpsilon(epsilon));
        }
        if epsilon == 0.0 && v_eps.is_some() {
            return Err(VariationalError::BadEpsilon(epsilon));
        }
        let v_bound = v_eps
            .as_ref()
            .filter(|_| epsilon > 0.0)
            .map(|v| h2_norm_sq(v).sqrt() / epsilon);
        Ok(Self { epsilon, v_eps, v_bound, quadrature: Quadrature::PeriodicRectangle })
    }

    /// Auxiliary path from [`make_v_eps`].
    pub fn with_auxiliary(epsilon: f64, k: usize, amplitude_factor: f64) -> Result<Self, VariationalError> {
        let v = make_v_eps(epsilon, k, amplitude_factor)?;
        let mut cfg = Self::new(epsilon, Some(v))?;
        cfg.v_bound = Some(amplitude_factor);
        Ok(cfg)
    }

    fn v_for(&self, path: &DiscretizedPath) -> Result<Option<&DiscretizedPath>, VariationalError> {
        match &self.v_eps {
            Some(v) => {
                check_same_k(path, v)?;
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self::unperturbed()
    }
}

/// `d^order u / dt^order` by trigonometric interpolation. The Nyquist mode
/// is dropped for odd orders.
pub fn derivative(path: &DiscretizedPath, order: u32) -> DiscretizedPath {
    let s = Spectral::get(path.k());
    DiscretizedPath { samples: s.derivative(&path.samples, order) }
}

fn mean(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    values.sum::<f64>() / k as f64
}

/// Pointwise quantities shared by the energy, gradient and residual.
struct Pieces {
    du: Vec<[f64; 2]>,
    /// `F_perp = (-Q, P)`
    fperp: Vec<[f64; 2]>,
    z: Vec<f64>,
}

fn pieces<F: VectorField + ?Sized>(path: &DiscretizedPath, sys: &F) -> Pieces {
    let du = Spectral::get(path.k()).derivative(&path.samples, 1);
    let mut fperp = Vec::with_capacity(path.k());
    let mut z = Vec::with_capacity(path.k());
    for (u, d) in path.samples.iter().zip(&du) {
        let [p, q] = sys.field(u[0], u[1]);
        fperp.push([-q, p]);
        z.push(p * d[1] - q * d[0]);
    }
    Pieces { du, fperp, z }
}

/// `(1/K) sum 1/2 Z_k^2` with `Z = P y' - Q x'`.
pub fn energy_e0<F: VectorField + ?Sized>(path: &DiscretizedPath, sys: &F) -> f64 {
    let pc = pieces(path, sys);
    mean(pc.z.iter().map(|z| 0.5 * z * z), path.k())
}

/// `<u, v>` in H2, by the rectangle rule.
pub fn h2_inner(u: &DiscretizedPath, v: &DiscretizedPath) -> Result<f64, VariationalError> {
    check_same_k(u, v)?;
    let s = Spectral::get(u.k());
    let dot = |a: &[[f64; 2]], b: &[[f64; 2]]| mean(a.iter().zip(b).map(|(p, q)| p[0] * q[0] + p[1] * q[1]), u.k());
    let (u1, u2) = (s.derivative(&u.samples, 1), s.derivative(&u.samples, 2));
    let (v1, v2) = (s.derivative(&v.samples, 1), s.derivative(&v.samples, 2));
    Ok(dot(&u2, &v2) + dot(&u1, &v1) + dot(&u.samples, &v.samples))
}

/// `int |u''|^2 + |u'|^2 + |u|^2`.
pub fn h2_norm_sq(path: &DiscretizedPath) -> f64 {
    h2_inner(path, path).expect("same path")
}

/// `E0 + eps/2 |u|^2 + <u, v> + 1/(2 eps) |v|^2`. Needs `eps > 0`.
pub fn energy_eeps<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
) -> Result<f64, VariationalError> {
    let eps = cfg.epsilon;
    if !(eps > 0.0) {
        return Err(VariationalError::BadEpsilon(eps));
    }
    let mut e = energy_e0(path, sys) + 0.5 * eps * h2_norm_sq(path);
    if let Some(v) = cfg.v_for(path)? {
        e += h2_inner(path, v)? + h2_norm_sq(v) / (2.0 * eps);
    }
    Ok(e)
}

/// `Eeps` when `eps > 0`, otherwise `E0`.
pub fn objective<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
) -> Result<f64, VariationalError> {
    if cfg.epsilon > 0.0 {
        energy_eeps(path, sys, cfg)
    } else {
        Ok(energy_e0(path, sys))
    }
}

/// `Z DF_perp^T u'` and `Z F_perp`, the two Z-carrying terms of the first
/// variation.
fn nonlinear_terms<F: VectorField + ?Sized>(path: &DiscretizedPath, sys: &F, pc: &Pieces) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut local = Vec::with_capacity(path.k());
    let mut flux = Vec::with_capacity(path.k());
    for (k, u) in path.samples.iter().enumerate() {
        let [[px, py], [qx, qy]] = sys.jacobian(u[0], u[1]);
        let (d, z) = (pc.du[k], pc.z[k]);
        local.push([z * (-qx * d[0] + px * d[1]), z * (-qy * d[0] + py * d[1])]);
        flux.push([z * pc.fperp[k][0], z * pc.fperp[k][1]]);
    }
    (local, flux)
}

fn gradient_e0_samples<F: VectorField + ?Sized>(path: &DiscretizedPath, sys: &F) -> Vec<[f64; 2]> {
    let pc = pieces(path, sys);
    let (local, flux) = nonlinear_terms(path, sys, &pc);
    let dflux = Spectral::get(path.k()).derivative(&flux, 1);
    let inv_k = 1.0 / path.k() as f64;
    local
        .iter()
        .zip(&dflux)
        .map(|(a, b)| [(a[0] - b[0]) * inv_k, (a[1] - b[1]) * inv_k])
        .collect()
}

fn flatten(v: &[[f64; 2]]) -> Vec<f64> {
    v.iter().flat_map(|p| [p[0], p[1]]).collect()
}

/// Gradient of [`energy_e0`] with respect to the sample coordinates.
pub fn gradient_e0<F: VectorField + ?Sized>(path: &DiscretizedPath, sys: &F) -> Vec<f64> {
    flatten(&gradient_e0_samples(path, sys))
}

/// `G w` for the H2 Gram operator `G = 1 - D1 D1 + D2 D2`.
fn h2_gram(samples: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let s = Spectral::get(samples.len());
    s.apply(samples, |idx| s.h2_weight(idx).into())
}

pub(crate) fn h2_gram_flat(flat: &[f64]) -> Vec<f64> {
    let samples: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    flatten(&h2_gram(&samples))
}

/// Gradient of [`energy_eeps`] with respect to the sample coordinates.
pub fn gradient_eeps<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
) -> Result<Vec<f64>, VariationalError> {
    let eps = cfg.epsilon;
    if !(eps > 0.0) {
        return Err(VariationalError::BadEpsilon(eps));
    }
    let mut g = gradient_e0_samples(path, sys);
    let inv_k = 1.0 / path.k() as f64;
    let gu = h2_gram(&path.samples);
    for (gk, w) in g.iter_mut().zip(&gu) {
        gk[0] += eps * inv_k * w[0];
        gk[1] += eps * inv_k * w[1];
    }
    if let Some(v) = cfg.v_for(path)? {
        let gv = h2_gram(&v.samples);
        for (gk, w) in g.iter_mut().zip(&gv) {
            gk[0] += inv_k * w[0];
            gk[1] += inv_k * w[1];
        }
    }
    Ok(flatten(&g))
}

/// Gradient of [`objective`].
pub fn objective_gradient<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
) -> Result<Vec<f64>, VariationalError> {
    if cfg.epsilon > 0.0 {
        gradient_eeps(path, sys, cfg)
    } else {
        Ok(gradient_e0(path, sys))
    }
}

/// Riesz representative of a flat gradient in the discrete H2 inner
/// product: each Fourier mode divided by `1 + (2 pi m)^2 + (2 pi m)^4`,
/// times `K`.
pub fn h2_precondition(flat_gradient: &[f64]) -> Vec<f64> {
    let samples: Vec<[f64; 2]> = flat_gradient.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let s = Spectral::get(samples.len());
    let k = samples.len() as f64;
    flatten(&s.apply(&samples, |idx| (k / s.h2_weight(idx)).into()))
}

/// L2 norm of
///
/// `eps (u'''' - u'' + u) - (Z F_perp)' + Z DF_perp^T u' + v'''' - v'' + v`.
pub fn el_residual<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
) -> Result<f64, VariationalError> {
    let k = path.k();
    let s = Spectral::get(k);
    let pc = pieces(path, sys);
    let (local, flux) = nonlinear_terms(path, sys, &pc);
    let dflux = s.derivative(&flux, 1);
    let linear = |w: &[[f64; 2]]| {
        let (d2, d4) = (s.derivative(w, 2), s.derivative(w, 4));
        (0..k).map(|i| [d4[i][0] - d2[i][0] + w[i][0], d4[i][1] - d2[i][1] + w[i][1]]).collect::<Vec<_>>()
    };
    let mut r: Vec<[f64; 2]> = (0..k).map(|i| [local[i][0] - dflux[i][0], local[i][1] - dflux[i][1]]).collect();
    if cfg.epsilon > 0.0 {
        for (ri, li) in r.iter_mut().zip(linear(&path.samples)) {
            ri[0] += cfg.epsilon * li[0];
            ri[1] += cfg.epsilon * li[1];
        }
    }
    if let Some(v) = cfg.v_for(path)? {
        for (ri, li) in r.iter_mut().zip(linear(&v.samples)) {
            ri[0] += li[0];
            ri[1] += li[1];
        }
    }
    let value = mean(r.iter().map(|p| p[0] * p[0] + p[1] * p[1]), k).sqrt();
    if !value.is_finite() {
        return Err(VariationalError::NonFinite("el_residual"));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZProfile {
    pub z: Vec<f64>,
    pub z2_mean: f64,
    pub z2_var: f64,
    /// `Div(u_k)`
    pub div: Vec<f64>,
}

impl ZProfile {
    /// `z2_var / z2_mean^2`, or `None` when `Z` vanishes.
    pub fn relative_variance(&self) -> Option<f64> {
        (self.z2_mean > 0.0).then(|| self.z2_var / (self.z2_mean * self.z2_mean))
    }
}

pub fn z_profile<F: VectorField + ?Sized>(path: &DiscretizedPath, sys: &F) -> ZProfile {
    let pc = pieces(path, sys);
    let k = path.k();
    let z2_mean = mean(pc.z.iter().map(|z| z * z), k);
    let z2_var = mean(pc.z.iter().map(|z| (z * z - z2_mean).powi(2)), k);
    let div = path
        .samples
        .iter()
        .map(|u| {
            let j = sys.jacobian(u[0], u[1]);
            j[0][0] + j[1][1]
        })
        .collect();
    ZProfile { z: pc.z, z2_mean, z2_var, div }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    pub regular: bool,
    pub number: Option<i64>,
    pub min_speed: f64,
}

/// Turning number of the tangent `u'` around the cycle, defined only when
/// `min |u'_k|` exceeds `1e-8 max |u'_k|`.
pub fn winding(path: &DiscretizedPath) -> Winding {
    let du = Spectral::get(path.k()).derivative(&path.samples, 1);
    let speeds: Vec<f64> = du.iter().map(|d| d[0].hypot(d[1])).collect();
    let max_speed = speeds.iter().copied().fold(0.0, f64::max);
    let min_speed = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    let regular = max_speed > 0.0 && min_speed > 1e-8 * max_speed;
    if !regular {
        return Winding { regular, number: None, min_speed };
    }
    let angles: Vec<f64> = du.iter().map(|d| d[1].atan2(d[0])).collect();
    let k = angles.len();
    let total: f64 = (0..k)
        .map(|i| {
            let mut d = angles[(i + 1) % k] - angles[i];
            while d > PI {
                d -= TAU;
            }
            while d <= -PI {
                d += TAU;
            }
            d
        })
        .sum();
    Winding { regular, number: Some((total / TAU).round() as i64), min_speed }
}

pub fn winding_number(path: &DiscretizedPath) -> Result<i64, VariationalError> {
    let w = winding(path);
    w.number.ok_or(VariationalError::IrregularPath { min_speed: w.min_speed })
}

/// `c eps (cos 2 pi t, sin 2 pi t)` with `c` chosen so that
/// `|v|_H2 = amplitude_factor * eps`.
pub fn make_v_eps(epsilon: f64, k: usize, amplitude_factor: f64) -> Result<DiscretizedPath, VariationalError> {
    if !(epsilon > 0.0) {
        return Err(VariationalError::BadEpsilon(epsilon));
    }
    let unit = DiscretizedPath::circle(k, [0.0, 0.0], 1.0)?;
    let c = amplitude_factor / h2_norm_sq(&unit).sqrt();
    Ok(unit.scaled(c * epsilon))
}
