//! Finite-difference Hessians, Morse indices and index censuses.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gradient_e0, h2_gram_flat, DiscretizedPath, EnergyConfig, VariationalError};
use crate::poly::VectorField;

const FD_STEP: f64 = 1e-5;

/// Dense `2K x 2K` Hessian of the discrete objective, symmetrized. Also
/// returns `|H - H^T| / |H|` (Frobenius) measured before symmetrization.
///
/// The `E0` block comes from central differences of its gradient. The H2
/// part of `Eeps` is quadratic, so its block `(eps/K) G` is assembled
/// directly; differencing it would only add rounding noise of the order of
/// its largest eigenvalue times `1e-11`.
pub fn hessian<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
) -> Result<(DMatrix<f64>, f64), VariationalError> {
    let x = path.flat();
    let dim = x.len();
    let columns: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
            let gp = gradient_e0(&DiscretizedPath::from_flat(&xp)?, sys);
            let gm = gradient_e0(&DiscretizedPath::from_flat(&xm)?, sys);
            let mut col: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect();
            if cfg.epsilon > 0.0 {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                let scale = cfg.epsilon / path.k() as f64;
                for (c, q) in col.iter_mut().zip(h2_gram_flat(&e)) {
                    *c += scale * q;
                }
            }
            Ok(col)
        })
        .collect::<Result<_, VariationalError>>()?;
    let h = DMatrix::from_fn(dim, dim, |i, j| columns[j][i]);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(VariationalError::NonFinite("hessian"));
    }
    let scale = h.norm();
    let asymmetry = if scale > 0.0 { (&h - h.transpose()).norm() / scale } else { 0.0 };
    Ok(((&h + h.transpose()) * 0.5, asymmetry))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianSpectrum {
    /// The `m` smallest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub asymmetry: f64,
}

fn sorted_eigenvalues(h: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn hessian_spectrum<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
    m: usize,
) -> Result<HessianSpectrum, VariationalError> {
    let dim = 2 * path.k();
    if m > dim {
        return Err(VariationalError::TooManyEigenvalues { requested: m, dim });
    }
    let (h, asymmetry) = hessian(path, sys, cfg)?;
    let mut ev = sorted_eigenvalues(h);
    let lambda_max = *ev.last().expect("nonempty spectrum");
    ev.truncate(m);
    Ok(HessianSpectrum { eigenvalues: ev, lambda_max, asymmetry })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseIndex {
    pub index: usize,
    pub min_eigenvalue: f64,
    pub lambda_max: f64,
    pub index_tol: f64,
    pub grad_norm: f64,
}

/// Number of Hessian eigenvalues below `-1e-6 (1 + |lambda_max|)`. The path
/// must be critical up to `10 grad_tol`.
pub fn morse_index<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
    grad_tol: f64,
) -> Result<MorseIndex, VariationalError> {
    let g = super::objective_gradient(path, sys, cfg)?;
    let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = 10.0 * grad_tol;
    if !(grad_norm <= threshold) {
        return Err(VariationalError::NotCritical { grad_norm, threshold });
    }
    let (h, _) = hessian(path, sys, cfg)?;
    let ev = sorted_eigenvalues(h);
    let lambda_max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let index_tol = 1e-6 * (1.0 + lambda_max);
    Ok(MorseIndex {
        index: ev.iter().filter(|&&l| l < -index_tol).count(),
        min_eigenvalue: ev[0],
        lambda_max,
        index_tol,
        grad_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseCensus {
    /// Index `k` to the number `M_k` of critical points of that index.
    pub counts: BTreeMap<usize, usize>,
    /// `sum (-1)^k M_k`
    pub alternating_sum: i64,
    pub warnings: Vec<String>,
}

impl MorseCensus {
    /// Whether the alternating sum equals 1, as it must over a valley.
    pub fn valley_identity_holds(&self) -> bool {
        self.alternating_sum == 1
    }
}

pub fn morse_census(indices: &[usize]) -> MorseCensus {
    let mut counts = BTreeMap::new();
    for &k in indices {
        *counts.entry(k).or_insert(0) += 1;
    }
    let alternating_sum = counts
        .iter()
        .map(|(&k, &m)| if k % 2 == 0 { m as i64 } else { -(m as i64) })
        .sum();
    let mut warnings = Vec::new();
    if alternating_sum != 1 {
        warnings.push(format!(
            "alternating sum {alternating_sum} != 1: the census misses critical points or spans several valleys"
        ));
    }
    MorseCensus { counts, alternating_sum, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ZeroField;

    #[test]
    fn census_examples() {
        let one = morse_census(&[0]);
        assert_eq!(one.alternating_sum, 1);
        assert!(one.valley_identity_holds() && one.warnings.is_empty());
        let pass = morse_census(&[0, 1, 0]);
        assert_eq!(pass.alternating_sum, 1);
        assert_eq!(pass.counts.get(&0), Some(&2));
        let broken = morse_census(&[0, 1]);
        assert_eq!(broken.alternating_sum, 0);
        assert!(!broken.valley_identity_holds());
        assert_eq!(broken.warnings.len(), 1);
    }

    #[test]
    fn pure_quadratic_spectrum() {
        let k = 16;
        let path = DiscretizedPath::circle(k, [0.0; 2], 1.0).unwrap();
        let cfg = EnergyConfig::new(1.0, None).unwrap();
        let spec = hessian_spectrum(&path, &ZeroField, &cfg, 2 * k).unwrap();
        let mut expected: Vec<f64> = (0..k)
            .flat_map(|idx| {
                let m = if idx < k / 2 { idx as f64 } else { idx as f64 - k as f64 };
                let w = std::f64::consts::TAU * m;
                let d1 = if idx == k / 2 { 0.0 } else { w * w };
                let v = (1.0 + d1 + w.powi(4)) / k as f64;
                [v, v]
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in spec.eigenvalues.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-5 * b, "{a} vs {b}");
        }
        assert!(spec.eigenvalues[0] > 0.0);
        assert!(spec.asymmetry <= 1e-6);
    }

    #[test]
    fn rejects_too_many_eigenvalues() {
        let path = DiscretizedPath::circle(16, [0.0; 2], 1.0).unwrap();
        let cfg = EnergyConfig::new(1.0, None).unwrap();
        assert!(matches!(
            hessian_spectrum(&path, &ZeroField, &cfg, 33),
            Err(VariationalError::TooManyEigenvalues { .. })
        ));
    }
}
