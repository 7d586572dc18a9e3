mod common;

use common::{fd_gradient, random_path, random_system, rel_err};
use hilbert16::ode_oracle::{find_limit_cycle, OracleOptions, Section};
use hilbert16::poly::{cubic_circle, van_der_pol};
use hilbert16::variational::*;
use proptest::prelude::*;

#[test]
fn gradients_match_finite_differences() {
    let mut rng = common::rng(6);
    for case in 0..20 {
        let degree = 1 + case % 3;
        let sys = random_system(&mut rng, degree);
        let path = random_path(&mut rng, 64, 3, 0.2);
        let g = gradient_e0(&path, &sys);
        let fd = fd_gradient(&path, |p| energy_e0(p, &sys));
        let e = rel_err(&g, &fd);
        assert!(e <= 1e-5, "case {case}: E0 gradient relative error {e}");
        let cfg = EnergyConfig::new(1e-2, Some(random_path(&mut rng, 64, 2, 0.1).scaled(1e-3))).unwrap();
        let g = gradient_eeps(&path, &sys, &cfg).unwrap();
        let fd = fd_gradient(&path, |p| energy_eeps(p, &sys, &cfg).unwrap());
        let e = rel_err(&g, &fd);
        assert!(e <= 1e-5, "case {case}: Eeps gradient relative error {e}");
    }
}

#[test]
fn gradient_is_time_reversal_equivariant() {
    let mut rng = common::rng(8);
    for _ in 0..5 {
        let sys = random_system(&mut rng, 3);
        let path = random_path(&mut rng, 64, 4, 0.2);
        let g = DiscretizedPath::from_flat(&gradient_e0(&path, &sys)).unwrap().reversed();
        let gr = gradient_e0(&path.reversed(), &sys);
        assert!(rel_err(&gr, &g.flat()) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_nonnegative_and_shift_invariant(seed in any::<u64>(), offset in 0usize..64) {
        let mut rng = common::rng(seed);
        let sys = random_system(&mut rng, 3);
        let path = random_path(&mut rng, 64, 4, 0.3);
        let moved = path.shifted(offset);
        let e = energy_e0(&path, &sys);
        prop_assert!(e >= 0.0);
        prop_assert!((energy_e0(&moved, &sys) - e).abs() <= 1e-12 * e.max(1.0));
        let h = h2_norm_sq(&path);
        prop_assert!((h2_norm_sq(&moved) - h).abs() <= 1e-12 * h);
        prop_assert_eq!(winding_number(&moved).ok(), winding_number(&path).ok());
        let cfg = EnergyConfig::new(1e-3, None).unwrap();
        let r = el_residual(&path, &sys, &cfg).unwrap();
        prop_assert!((el_residual(&moved, &sys, &cfg).unwrap() - r).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn second_derivative_twice_is_fourth(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let path = random_path(&mut rng, 64, 6, 0.3);
        let twice = derivative(&derivative(&path, 2), 2);
        let four = derivative(&path, 4);
        let scale = four.flat().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in twice.flat().iter().zip(four.flat()) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn refinement_preserves_band_limited_energy(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        // K = 64: a linear field with modes below K/4 keeps Z^2 under the aliasing limit
        let linear = random_system(&mut rng, 1);
        let path = random_path(&mut rng, 64, 15, 0.02);
        let e = energy_e0(&path, &linear);
        let fine = energy_e0(&path.resample(128).unwrap(), &linear);
        prop_assert!((fine - e).abs() <= 1e-9 * e.max(1.0), "{} vs {}", e, fine);
        let cubic = random_system(&mut rng, 3);
        let path = random_path(&mut rng, 64, 4, 0.1);
        let e = energy_e0(&path, &cubic);
        let fine = energy_e0(&path.resample(128).unwrap(), &cubic);
        prop_assert!((fine - e).abs() <= 1e-9 * e.max(1.0), "{} vs {}", e, fine);
    }
}

fn assert_monotone_and_winding(out: &DescendOutcome) {
    for w in out.trace.windows(2) {
        assert!(w[1].energy <= w[0].energy, "energy rose at step {}", w[1].iter);
    }
    assert!(out.trace.iter().all(|r| r.winding == 1));
}

#[test]
fn descent_is_monotone_and_keeps_winding() {
    let sys = cubic_circle();
    let start = DiscretizedPath::circle(64, [0.0; 2], 1.3).unwrap().with_radial_noise(0.05, 1);
    for precondition in [false, true] {
        let opts = DescendOptions { h2_precondition: precondition, max_iters: 2000, ..Default::default() };
        let out = descend(&start, &sys, &EnergyConfig::unperturbed(), &opts).unwrap();
        assert!(out.accepted_steps() > 0);
        assert_monotone_and_winding(&out);
    }
    let cfg = EnergyConfig::with_auxiliary(1e-3, 64, 0.01).unwrap();
    let opts = DescendOptions { h2_precondition: true, max_iters: 2000, ..Default::default() };
    assert_monotone_and_winding(&descend(&start, &sys, &cfg, &opts).unwrap());
}

#[test]
fn exact_minimizer_takes_no_steps() {
    let unit = DiscretizedPath::circle(128, [0.0; 2], 1.0).unwrap();
    let out = descend(&unit, &cubic_circle(), &EnergyConfig::unperturbed(), &DescendOptions::default()).unwrap();
    assert_eq!(out.accepted_steps(), 0);
    assert_eq!(out.termination, Termination::Converged);
    assert_eq!(out.path, unit);
}

#[test]
fn wrong_winding_is_rejected() {
    let backwards = DiscretizedPath::circle(64, [0.0; 2], 1.0).unwrap().reversed();
    let err = descend(&backwards, &cubic_circle(), &EnergyConfig::unperturbed(), &DescendOptions::default());
    assert_eq!(err.unwrap_err(), VariationalError::WrongWinding(-1));
}

/// Rotated, noised start: the exactly symmetric circle is a saddle of the
/// phase term `<u, v>`.
fn symmetry_broken_start(k: usize) -> DiscretizedPath {
    DiscretizedPath::circle(k, [0.0; 2], 1.3).unwrap().shifted(k / 2).with_radial_noise(0.05, 3)
}

#[test]
fn descended_minimizers_have_index_zero() {
    let sys = cubic_circle();
    let k = 64;
    for (eps, amp) in [(1e-3, 0.01), (1e-4, 80.0)] {
        let cfg = EnergyConfig::with_auxiliary(eps, k, amp).unwrap();
        let opts = DescendOptions { h2_precondition: true, ..Default::default() };
        let out = descend(&symmetry_broken_start(k), &sys, &cfg, &opts).unwrap();
        assert_eq!(out.termination, Termination::Converged, "eps {eps}");
        let idx = morse_index(&out.path, &sys, &cfg, opts.grad_tol).unwrap();
        assert!(idx.min_eigenvalue >= -1e-6, "eps {eps}: {idx:?}");
        assert_eq!(idx.index, 0);
        let spec = hessian_spectrum(&out.path, &sys, &cfg, 4).unwrap();
        assert!(spec.asymmetry <= 1e-6, "asymmetry {}", spec.asymmetry);
    }
}

#[test]
fn euler_lagrange_residual_at_a_critical_path() {
    let sys = cubic_circle();
    let k = 256;
    let cfg = EnergyConfig::with_auxiliary(1e-3, k, 0.01).unwrap();
    let opts = DescendOptions { h2_precondition: true, ..Default::default() };
    let out = descend(&symmetry_broken_start(k), &sys, &cfg, &opts).unwrap();
    let r = el_residual(&out.path, &sys, &cfg).unwrap();
    assert!(r <= 1e-2, "residual {r}");
    let fine_cfg = EnergyConfig::with_auxiliary(1e-3, 2 * k, 0.01).unwrap();
    let fine = el_residual(&out.path.resample(2 * k).unwrap(), &sys, &fine_cfg).unwrap();
    // rounding in eps D4 u at the finer grid's top mode
    let floor = 1e-3 * (std::f64::consts::PI * (2 * k) as f64).powi(4) * f64::EPSILON;
    assert!(fine <= r.max(floor), "refined residual {fine} vs {r}, floor {floor}");
}

#[test]
fn van_der_pol_descent_from_noised_cycle() {
    let sys = van_der_pol();
    let orbit = find_limit_cycle(&sys, &Section::vertical(0.0, true), [0.0, 1.0], 1e-10, &OracleOptions::default()).unwrap();
    let start = orbit.to_path(64).unwrap().reversed().with_radial_noise(0.05, 7);
    let opts = DescendOptions { h2_precondition: true, max_iters: 20000, ..Default::default() };
    let out = descend(&start, &sys, &EnergyConfig::unperturbed(), &opts).unwrap();
    assert_monotone_and_winding(&out);
    assert!(out.energy <= 1e-8, "E0 {}", out.energy);
}
