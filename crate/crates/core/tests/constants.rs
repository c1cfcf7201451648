use gauss_scan_core::constants::{estimate_e_d_grid, g_of, integrate_g_d, pickands_f, ExpSupEstimator};
use gauss_scan_core::Serial;

// Reference values computed independently with mpmath.
const F_1: f64 = 0.280_185_114_210_026_6;
const G_1: f64 = 0.214_877_287_588_317;

#[test]
fn f_and_g_match_reference_values() {
    assert!((pickands_f(1.0, 1e-13).unwrap().value - F_1).abs() < 1e-11);
    assert!((integrate_g_d(1, 1e-10).unwrap().value - G_1).abs() < 1e-9);
    let f = pickands_f(0.5, 1e-13).unwrap().value;
    let g = g_of(4.0, 2.0).unwrap();
    assert!((g - f * f / 16.0).abs() < 1e-10 * g);
}

#[test]
fn one_dimensional_constant_does_not_depend_on_the_horizon() {
    let kappa = 2.0;
    let f = pickands_f(kappa, 1e-12).unwrap().value;
    let at = |t: f64| estimate_e_d_grid(1, kappa, t, 10_000, 11, ExpSupEstimator::NormalizedMax, &Serial).unwrap();
    let (short, long) = (at(64.0), at(128.0));
    let combined = short.abs_error.hypot(long.abs_error);
    assert!((short.value - long.value).abs() < 3.0 * combined, "{short:?} vs {long:?}");
    for e in [short, long] {
        assert!((e.value - f * f).abs() < 3.0 * e.abs_error, "{} vs {}", e.value, f * f);
    }
}
