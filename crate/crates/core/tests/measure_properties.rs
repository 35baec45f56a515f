use std::f64::consts::PI;

use gaf_zeros::analytics::{h_k, linear_limit_l1, mean_density, q_func, v_asymptotic, QDeriv};
use gaf_zeros::{Atom, Complex64, GridDensity, SpectralMeasure, TailClass};
use proptest::prelude::*;

/// Atoms plus a sum of Gaussian bumps on [−3, 3].
fn mixture(atoms: &[(f64, f64)], bumps: &[(f64, f64, f64)]) -> SpectralMeasure {
    let h = 1.0 / 32.0;
    let n = (6.0 / h) as usize;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let x = -3.0 + (i as f64 + 0.5) * h;
            bumps.iter().map(|&(c, mu, s)| c * (-(x - mu).powi(2) / (2.0 * s * s)).exp()).sum()
        })
        .collect();
    let density = if bumps.is_empty() {
        None
    } else {
        Some(GridDensity::new(-3.0, 3.0, h, values, vec![], Some(TailClass::Compact)).unwrap())
    };
    let atoms = atoms.iter().map(|&(location, mass)| Atom { location, mass }).collect();
    SpectralMeasure::new(atoms, density, false, 1.0).unwrap()
}

fn atoms_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 0..3).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
        v
    })
}

fn bumps_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.1f64..1.0, -1.0f64..1.0, 0.15f64..0.5), 1..3)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tilt_composes(atoms in atoms_strategy(), bumps in bumps_strategy(), y1 in -0.4f64..0.4, y2 in -0.4f64..0.4) {
        let m = mixture(&atoms, &bumps);
        let twice = m.tilt(y1).unwrap().tilt(y2).unwrap();
        let once = m.tilt(y1 + y2).unwrap();
        prop_assert!(rel(twice.total_mass(), once.total_mass()) < 1e-12);
    }

    #[test]
    fn tilt_commutes_with_convolution(atoms in atoms_strategy(), bumps in bumps_strategy(), y in -0.3f64..0.3, k in 1u32..=5) {
        let mut cases = vec![mixture(&[], &bumps)];
        if atoms.len() > 1 {
            cases.push(mixture(&atoms, &[]));
        }
        for m in cases {
            let r = m.eval_r(Complex64::new(0.0, y), 0).unwrap().re;
            let mass = m.convolve_power(k).unwrap().tilt(y).unwrap().total_mass();
            prop_assert!(rel(mass, r.powi(k as i32)) < 1e-8, "{} vs {}", mass, r.powi(k as i32));
        }
    }

    /// Atom-density cross terms are split linearly onto the density lattice,
    /// which keeps mass and mean but not the exponential moments.
    #[test]
    fn tilt_commutes_with_convolution_mixed(atoms in atoms_strategy(), bumps in bumps_strategy(), y in -0.3f64..0.3, k in 1u32..=5) {
        let m = mixture(&atoms, &bumps);
        let r = m.eval_r(Complex64::new(0.0, y), 0).unwrap().re;
        let mass = m.convolve_power(k).unwrap().tilt(y).unwrap().total_mass();
        let h = m.density().unwrap().h();
        let bound = 1e-8 + (2.0 * PI * y * h).powi(2);
        prop_assert!(rel(mass, r.powi(k as i32)) < bound, "{} vs {}", mass, r.powi(k as i32));
    }

    #[test]
    fn convolution_power_mass(atoms in atoms_strategy(), bumps in bumps_strategy(), k in 1u32..=8) {
        let m = mixture(&atoms, &bumps);
        let want = m.total_mass().powi(k as i32);
        prop_assert!(rel(m.convolve_power(k).unwrap().total_mass(), want) < 1e-8);
    }

    #[test]
    fn transform_bounded_by_mass(atoms in atoms_strategy(), bumps in bumps_strategy()) {
        let m = mixture(&atoms, &bumps);
        let r0 = m.eval_r(Complex64::new(0.0, 0.0), 0).unwrap().re;
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            prop_assert!(m.eval_r(Complex64::new(x, 0.0), 0).unwrap().norm() <= r0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn log_transform_on_axis_is_convex(atoms in atoms_strategy(), bumps in bumps_strategy()) {
        let m = mixture(&atoms, &bumps);
        let f = |y: f64| m.eval_r(Complex64::new(0.0, 2.0 * y), 0).unwrap().re.ln();
        let e = 1e-3;
        for i in 0..40 {
            let y = -0.45 + 0.9 * i as f64 / 39.0;
            prop_assert!(f(y + e) - 2.0 * f(y) + f(y - e) >= -1e-8);
        }
    }

    #[test]
    fn mean_density_is_curvature_of_log_transform(atoms in atoms_strategy(), bumps in bumps_strategy(), y in -0.4f64..0.4) {
        let m = mixture(&atoms, &bumps);
        let f = |y: f64| m.eval_r(Complex64::new(0.0, 2.0 * y), 0).unwrap().re.ln() / (4.0 * PI);
        let e = 1e-4;
        let fd = (f(y + e) - 2.0 * f(y) + f(y - e)) / (e * e);
        let l = mean_density(&m, y).unwrap();
        prop_assert!((fd - l).abs() < 1e-6 * l.max(1.0) + 1e-5, "{} vs {}", fd, l);
    }

    #[test]
    fn q_symmetries(atoms in atoms_strategy(), bumps in bumps_strategy(), x in -5.0f64..5.0, a in -0.45f64..0.45, b in -0.45f64..0.45) {
        let m = mixture(&atoms, &bumps);
        let q = q_func(&m, x, a, b, QDeriv::None).unwrap();
        prop_assert!((q - q_func(&m, x, b, a, QDeriv::None).unwrap()).abs() < 1e-12);
        prop_assert!((q - q_func(&m, -x, a, b, QDeriv::None).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&q));
    }

    #[test]
    fn h_k_nonnegative(bumps in bumps_strategy(), k in 1u32..5, l in -6.0f64..6.0) {
        let m = mixture(&[], &bumps);
        prop_assert!(h_k(&m, -0.2, 0.3, k, l).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn series_terms_nonnegative_and_partial_sums_monotone(bumps in bumps_strategy(), t in 1.0f64..50.0) {
        let m = mixture(&[], &bumps);
        let v = v_asymptotic(&m, -0.15, 0.2, t, 10).unwrap();
        prop_assert!(v.terms.iter().all(|s| s.value >= 0.0));
        prop_assert!(v.value >= 0.0);
        let lim = linear_limit_l1(&m, -0.15, 0.2, 10).unwrap();
        prop_assert!(lim.l1 > 0.0 && lim.terms.iter().all(|s| s.value >= 0.0));
    }
}

#[test]
fn sup_q_below_one_off_diagonal() {
    let m = mixture(&[(-0.7, 0.3)], &[(0.5, 0.2, 0.3)]);
    for (a, b) in [(-0.3, 0.1), (0.05, 0.4)] {
        let sup = (0..=8000).map(|i| q_func(&m, -40.0 + 0.01 * i as f64, a, b, QDeriv::None).unwrap()).fold(0.0, f64::max);
        assert!(sup < 1.0 - 1e-6, "{sup}");
    }
}
