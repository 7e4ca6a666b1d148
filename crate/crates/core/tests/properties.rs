use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use floquet_core::bands::band_group;
use floquet_core::desk::cosine_example;
use floquet_core::galerkin::{DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL};
use floquet_core::{
    assemble_fiber_matrix, compute_m_norm, fiber_spectrum, FourierMatrixSeries, Interval, OperatorSpec,
};

fn matrix(entries: &[(f64, f64)], m: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, m, |i, j| {
        let (re, im) = entries[i * m + j];
        Complex64::new(re, im)
    })
}

/// A spec with `P_2` and `P_3` built from two harmonics each.
fn random_spec() -> impl Strategy<Value = OperatorSpec> {
    proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 16).prop_map(|e| {
        let series = |chunk: &[(f64, f64)]| {
            FourierMatrixSeries::zero(2)
                .with_term(0, matrix(&chunk[..4], 2))
                .unwrap()
                .with_term(1, matrix(&chunk[4..], 2))
                .unwrap()
        };
        OperatorSpec::free(3, 2)
            .unwrap()
            .with_coefficient(2, series(&e[..8]))
            .unwrap()
            .with_coefficient(3, series(&e[8..]))
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn norm_is_homogeneous(spec in random_spec(), alpha in -5.0..5.0f64) {
        let m = compute_m_norm(&spec).m_value;
        let scaled = compute_m_norm(&spec.scaled(alpha)).m_value;
        prop_assert!((scaled - alpha.abs() * m).abs() <= 1e-12 * m.max(1.0));
    }

    #[test]
    fn norm_below_entrywise_bound(spec in random_spec()) {
        let n = compute_m_norm(&spec);
        prop_assert!(n.m_value <= n.entrywise_bound * (1.0 + 1e-12));
        prop_assert!(n.per_v.values().all(|&x| x >= 0.0));
    }

    #[test]
    fn desk_fibers_are_hermitian(m_norm in 0.0..2.0 * PI * PI, t in -1.0..=1.0f64) {
        let spec = cosine_example(m_norm);
        let f = assemble_fiber_matrix(&spec, t, 1.0, 8, DEFAULT_HERMITIAN_TOL).unwrap();
        prop_assert!(f.hermitian_deviation() < 1e-13);
        let s = fiber_spectrum(&spec, t, 1.0, 8, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL).unwrap();
        prop_assert_eq!(s.len(), (2 * 8 + 1) * f.dim());
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn end_fibers_share_a_spectrum(m_norm in 0.0..PI * PI) {
        // Multipliers at t = -1 and t = 1 coincide.
        let spec = cosine_example(m_norm);
        let a = fiber_spectrum(&spec, -1.0, 1.0, 16, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL).unwrap();
        let b = fiber_spectrum(&spec, 1.0, 1.0, 16, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL).unwrap();
        let limit = 0.5 * a.trusted_limit;
        let pick = |s: &[f64]| s.iter().copied().filter(|l| l.abs() < limit).collect::<Vec<_>>();
        let (ea, eb) = (pick(&a.eigenvalues), pick(&b.eigenvalues));
        prop_assert_eq!(ea.len(), eb.len());
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn band_groups_tile_the_indices(threshold in 1usize..5, m in (1usize..4).prop_map(|h| 2 * h), reach in 1i64..6) {
        let n = threshold as i64;
        let mut all: Vec<i64> = (-(n + reach)..=(n + reach)).flat_map(|k| band_group(k, threshold, m)).collect();
        let count = all.len();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), count);
        prop_assert!(!all.contains(&0));
        prop_assert!(all.windows(2).all(|w| w[1] - w[0] == 1 || (w[0] == -1 && w[1] == 1)));
    }

    #[test]
    fn disjointness_is_symmetric(a in -10.0..10.0f64, wa in 0.0..5.0f64, b in -10.0..10.0f64, wb in 0.0..5.0f64,
                                 ca in any::<(bool, bool)>(), cb in any::<(bool, bool)>()) {
        let x = Interval::new(a, a + wa, ca.0, ca.1);
        let y = Interval::new(b, b + wb, cb.0, cb.1);
        prop_assert_eq!(x.disjoint_from(&y, 0.0), y.disjoint_from(&x, 0.0));
        let mid = 0.5 * (x.lo.max(y.lo) + x.hi.min(y.hi));
        if x.contains(mid) && y.contains(mid) {
            prop_assert!(!x.disjoint_from(&y, 0.0));
        }
    }
}
