#![allow(dead_code)]

use std::f64::consts::TAU;

use hilbert16::poly::{BivariatePoly, PlanarSystem};
use hilbert16::variational::DiscretizedPath;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `a (x - x0) + b (y - y0)`
pub fn linear_form(a: f64, b: f64, x0: f64, y0: f64) -> BivariatePoly {
    BivariatePoly::from_terms([(1, 0, a), (0, 1, b), (0, 0, -a * x0 - b * y0)])
}

pub struct Constructed {
    pub p: BivariatePoly,
    pub q: BivariatePoly,
    pub roots: Vec<[f64; 2]>,
}

/// `p = l1 l2`, `q = m1 m2` with every pairwise intersection known. Lines
/// through a common anchor are avoided so every root is simple.
pub fn constructed(rng: &mut ChaCha8Rng) -> Constructed {
    loop {
        let mut lines = Vec::new();
        for _ in 0..4 {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let c: f64 = rng.random_range(-1.5..1.5);
            lines.push((angle.cos(), angle.sin(), c));
        }
        let meet = |l: (f64, f64, f64), m: (f64, f64, f64)| -> Option<[f64; 2]> {
            let det = l.0 * m.1 - l.1 * m.0;
            (det.abs() > 0.2).then(|| [(l.2 * m.1 - l.1 * m.2) / det, (l.0 * m.2 - l.2 * m.0) / det])
        };
        let mut roots = Vec::new();
        for &l in &lines[..2] {
            for &m in &lines[2..] {
                if let Some(r) = meet(l, m) {
                    roots.push(r);
                }
            }
        }
        if roots.len() < 4 || roots.iter().any(|r| r[0].abs() > 3.5 || r[1].abs() > 3.5) {
            continue;
        }
        let distinct = roots.iter().enumerate().all(|(i, a)| {
            roots[i + 1..].iter().all(|b| (a[0] - b[0]).hypot(a[1] - b[1]) > 0.05)
        });
        if !distinct {
            continue;
        }
        let form = |l: (f64, f64, f64)| linear_form(l.0, l.1, l.2 * l.0, l.2 * l.1);
        let p = &form(lines[0]) * &form(lines[1]);
        let q = &form(lines[2]) * &form(lines[3]);
        return Constructed { p, q, roots };
    }
}

pub fn random_system(rng: &mut ChaCha8Rng, degree: u32) -> PlanarSystem {
    let mut poly = || {
        BivariatePoly::from_terms(
            (0..=degree).flat_map(|i| (0..=degree - i).map(move |j| (i, j))).map(|(i, j)| (i, j, rng.random_range(-1.0..1.0))),
        )
    };
    let p = poly();
    PlanarSystem::new(p, poly()).unwrap()
}

/// Band-limited path with modes up to `modes`, close to a circle of radius 1.
pub fn random_path(rng: &mut ChaCha8Rng, k: usize, modes: usize, amp: f64) -> DiscretizedPath {
    let c: Vec<[f64; 4]> = (0..modes)
        .map(|_| std::array::from_fn(|_| rng.random_range(-amp..amp)))
        .collect();
    DiscretizedPath::from_fn(k, |t| {
        let mut p = [(TAU * t).cos(), (TAU * t).sin()];
        for (m, a) in c.iter().enumerate() {
            let w = TAU * (m + 1) as f64 * t;
            p[0] += a[0] * w.cos() + a[1] * w.sin();
            p[1] += a[2] * w.cos() + a[3] * w.sin();
        }
        p
    })
    .unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

pub fn fd_gradient(path: &DiscretizedPath, f: impl Fn(&DiscretizedPath) -> f64) -> Vec<f64> {
    let x = path.flat();
    let h = 1e-6;
    (0..x.len())
        .map(|j| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = f(&DiscretizedPath::from_flat(&xp).unwrap());
            let fm = f(&DiscretizedPath::from_flat(&xm).unwrap());
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

