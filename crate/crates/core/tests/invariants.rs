use gauss_scan_core::constants::{pickands_f, ConstantEstimate, Method, Provenance};
use gauss_scan_core::scan::{scan, scan_naive};
use gauss_scan_core::theory::{clump_rate, invert_normalizer, normalizer, Setting, SettingSpec};
use gauss_scan_core::{GaussianLatticeField, PrefixSumTable, Window, WindowFamily};
use proptest::prelude::*;

fn fixed(value: f64) -> ConstantEstimate {
    ConstantEstimate { value, abs_error: 0.0, method: Method::Quadrature, params: Provenance::default() }
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=3).prop_flat_map(|d| {
        let max = match d {
            1 => 40,
            2 => 10,
            _ => 6,
        };
        proptest::collection::vec(1usize..=max, d)
    })
}

fn family_for(dims: &[usize], cube: bool, lo: usize, span: usize) -> WindowFamily {
    let m = *dims.iter().min().unwrap();
    let lo = lo.min(m).max(1);
    let hi = (lo + span).min(m);
    if cube {
        WindowFamily::cubes(dims.len(), lo, Some(hi))
    } else {
        let hi: Vec<usize> = dims.iter().map(|&n| (lo + span).min(n)).collect();
        WindowFamily::rects(vec![lo; dims.len()], Some(hi))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_sum_matches_direct_sum(dims in dims_strategy(), seed in any::<u64>(), pick in any::<u64>()) {
        let field = GaussianLatticeField::generate(&dims, seed, 0).unwrap();
        let table = PrefixSumTable::build(&field);
        let mut p = pick;
        let mut origin = Vec::new();
        let mut sides = Vec::new();
        for &n in &dims {
            let o = (p % n as u64) as usize;
            p /= 7;
            let s = 1 + (p % (n - o) as u64) as usize;
            p /= 5;
            origin.push(o);
            sides.push(s);
        }
        let w = Window::new(origin, sides).unwrap();
        let fast = table.window_sum(&w).unwrap();
        let direct = field.direct_sum(&w).unwrap();
        prop_assert!((fast - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn fast_scan_matches_naive(dims in dims_strategy(), seed in any::<u64>(), cube in any::<bool>(), lo in 1usize..4, span in 0usize..6) {
        let field = GaussianLatticeField::generate(&dims, seed, 1).unwrap();
        let fam = family_for(&dims, cube, lo, span);
        let fast = scan(&PrefixSumTable::build(&field), &fam).unwrap();
        let naive = scan_naive(&field, &fam).unwrap();
        prop_assert!((fast.max_value - naive.max_value).abs() <= 1e-9);
        prop_assert_eq!(&fast.argmax, &naive.argmax);
        prop_assert_eq!(fast.windows_scanned, naive.windows_scanned);
        prop_assert_eq!(fast.windows_scanned, fam.resolve(&dims).unwrap().window_count());
    }

    #[test]
    fn widening_the_family_never_lowers_the_max(dims in dims_strategy(), seed in any::<u64>(), lo in 1usize..4, span in 0usize..4) {
        let field = GaussianLatticeField::generate(&dims, seed, 2).unwrap();
        let table = PrefixSumTable::build(&field);
        let narrow = scan(&table, &family_for(&dims, true, lo, span)).unwrap();
        let wide = scan(&table, &family_for(&dims, false, 1, span + lo)).unwrap();
        prop_assert!(wide.max_value >= narrow.max_value - 1e-12);
    }

    #[test]
    fn negation_maps_max_to_min(dims in dims_strategy(), seed in any::<u64>()) {
        let field = GaussianLatticeField::generate(&dims, seed, 3).unwrap();
        let fam = family_for(&dims, true, 1, 3);
        let m = scan(&PrefixSumTable::build(&field), &fam).unwrap().max_value;
        let neg = scan(&PrefixSumTable::build(&field.negated()), &fam).unwrap();
        // The max of -X is minus the min of X, so it is at least -m.
        prop_assert!(neg.max_value >= -m - 1e-12);
        let neg_sum = field.direct_sum(&neg.argmax).unwrap();
        let card = neg.argmax.cardinality() as f64;
        prop_assert!((neg.max_value + neg_sum / card.sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn pickands_f_stays_in_bounds(kappa in 1e-3f64..200.0) {
        let f = pickands_f(kappa, 1e-12).unwrap().value;
        prop_assert!(f > 0.0 && f < 1.0 / kappa);
        prop_assert!(f < 0.5);
        let g = pickands_f(kappa * (1.0 + 1e-6), 1e-12).unwrap().value;
        prop_assert!(g <= f);
        prop_assert!((f - g).abs() <= 1e-5 * f);
    }

    #[test]
    fn normalizer_round_trips(tau in -10.0f64..10.0, ln_n in 5.0f64..25.0, idx in 0usize..5, d in 1usize..4) {
        let family = [Setting::Iid, Setting::DiscreteCube, Setting::DiscreteRect, Setting::ContinuousCube, Setting::ContinuousRect][idx];
        let mut s = SettingSpec::new(family, d, ln_n.exp()).with_a(1.0);
        match family {
            Setting::DiscreteCube => s = s.with_constant(fixed(0.1)),
            Setting::DiscreteRect => s = s.with_constant(fixed(0.2149)),
            Setting::ContinuousCube => s = s.with_constant(fixed(0.3)),
            _ => {}
        }
        let u = normalizer(&s, tau).unwrap();
        prop_assert!((invert_normalizer(&s, u).unwrap() - tau).abs() <= 1e-9 * (1.0 + tau.abs()));
        prop_assert!(normalizer(&s, tau + 0.1).unwrap() > u);
    }

    #[test]
    fn clump_rate_is_monotone(tau in -3.0f64..3.0, a in 0.05f64..2.0, w in 0.1f64..3.0) {
        let s = SettingSpec::new(Setting::ContinuousRect, 1, 1e4).with_a(1.0);
        let base = clump_rate(&s, tau, a, a + w, None).unwrap();
        prop_assert!(base > 0.0);
        prop_assert!(clump_rate(&s, tau, a, a + 2.0 * w, None).unwrap() >= base);
        prop_assert!(clump_rate(&s, tau + 0.5, a, a + w, None).unwrap() < base);
        prop_assert!(base <= (-tau).exp() * (1.0 + 1e-9));
    }
}
