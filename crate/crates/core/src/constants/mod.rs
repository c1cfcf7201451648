//! Pickands-type constants.
//!
//! * `F(kappa)`: exact series for the discretized Brownian Pickands constant.
//! * `G(h; kappa) = F(kappa/h)^2 / h^2` and its integral `G_d`.
//! * `E_d(kappa)`, `E_d`, `J_d(h)` and `J_d`: Monte Carlo, see [`grid`] and
//!   [`cube`].

use core::fmt;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson_panels;
use crate::special::normal_sf;

pub mod cube;
pub mod fit;
pub mod grid;

pub use cube::{e_d_of, estimate_e_d_continuous, integrate_j_d, j_d_of, JIntegral, JProfile, JQuadParams};
pub use grid::{estimate_e_d_grid, ExpSupEstimator, GridMcParams};

/// Pickands constant for `alpha = 1`.
pub const PICKANDS_H1: f64 = 1.0;
/// Pickands constant for `alpha = 2`, `1/sqrt(pi)`.
pub const PICKANDS_H2: f64 = 0.564_189_583_547_756_3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Series,
    Quadrature,
    MonteCarlo,
    Extrapolation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Series => "series",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
            Method::Extrapolation => "extrapolation",
        })
    }
}

/// Inputs that produced an estimate.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub kappa: Option<f64>,
    pub h: Option<f64>,
    pub d: Option<usize>,
    pub horizon: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub truncation: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstantEstimate {
    pub value: f64,
    /// Error bound (series, quadrature) or standard error (Monte Carlo).
    pub abs_error: f64,
    pub method: Method,
    pub params: Provenance,
}

impl ConstantEstimate {
    pub fn relative_error(&self) -> f64 {
        self.abs_error / self.value.abs()
    }

    pub(crate) fn checked(self) -> Result<Self> {
        if self.value.is_finite() && self.value > 0.0 && self.abs_error >= 0.0 {
            Ok(self)
        } else {
            Err(Error::Domain(alloc::format!(
                "constant estimate {} +/- {} is not a positive finite value",
                self.value,
                self.abs_error
            )))
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("{name} must be positive and finite, got {v}")))
    }
}

/// Smallest `N <= max_terms` with `sum_{n>N} exp(-kappa n / 8) / n < bound`,
/// together with that tail bound; `None` if more terms would be needed.
fn series_cutoff(kappa: f64, bound: f64, max_terms: usize) -> Option<(usize, f64)> {
    let r = libm::exp(-kappa / 8.0);
    let denom = 1.0 - r;
    // sum_{k>n} r^k / k <= r^(n+1) / ((n+1)(1-r))
    let tail_after = |n: usize| libm::pow(r, (n + 1) as f64) / ((n + 1) as f64 * denom);
    if tail_after(max_terms) >= bound {
        return None;
    }
    let mut n = 1usize;
    let mut rn1 = r * r; // r^(n+1)
    loop {
        let tail = rn1 / ((n + 1) as f64 * denom);
        if tail < bound || n >= max_terms {
            return Some((n, tail));
        }
        n += 1;
        rn1 *= r;
    }
}

/// Above this many terms the series tail is summed by Euler-Maclaurin.
const DIRECT_TERMS_MAX: usize = 20_000;
/// Terms summed directly before the Euler-Maclaurin tail.
const EM_START: usize = 1_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `int_{y0}^inf Phibar(y) / y dy` for `0 < y0 <= 2`, by parts:
/// `-ln(y0) Phibar(y0) + int_{y0}^inf ln(y) phi(y) dy`, where the full
/// integral is `-(gamma + ln 2)/4` and the piece below `y0` is a power series.
fn phibar_over_y_tail(y0: f64) -> f64 {
    let ln_y0 = libm::log(y0);
    let mut head = 0.0;
    let mut coef = 1.0; // (-1/2)^j / j!
    let mut pow = y0; // y0^(2j+1)
    for j in 0..60 {
        let a = (2 * j + 1) as f64;
        let term = coef * pow * (ln_y0 / a - 1.0 / (a * a));
        head += term;
        if libm::fabs(term) < 1e-18 * libm::fabs(head) {
            break;
        }
        coef *= -0.5 / (j + 1) as f64;
        pow *= y0 * y0;
    }
    head /= libm::sqrt(2.0 * core::f64::consts::PI);
    let whole = -(EULER_GAMMA + core::f64::consts::LN_2) / 4.0;
    -ln_y0 * normal_sf(y0) + whole - head
}

/// `F(kappa) = exp(-2 sum_{n>=1} Phibar(sqrt(kappa n)/2) / n) / kappa`.
///
/// The series is cut where the bound `Phibar(x) <= exp(-x^2/2)` puts the
/// remaining terms below `tol / 2`; `abs_error` covers that truncation and
/// the summation rounding. When that would take more than 20000 terms
/// (`kappa` below about 0.01) the first 999 terms are summed and the rest
/// is replaced by its Euler-Maclaurin expansion through the first
/// derivative, whose remainder is below `1e-14`.
pub fn pickands_f(kappa: f64, tol: f64) -> Result<ConstantEstimate> {
    require_positive("kappa", kappa)?;
    require_positive("tol", tol)?;
    let c = 0.5 * libm::sqrt(kappa);
    let term = |n: usize| normal_sf(c * libm::sqrt(n as f64)) / n as f64;
    let (n_terms, sum, tail_err) = if let Some((cut, tail)) = series_cutoff(kappa, 0.5 * tol, DIRECT_TERMS_MAX) {
        // Smallest terms first.
        (cut, (1..=cut).rev().map(term).sum::<f64>(), libm::expm1(2.0 * tail))
    } else {
        let n0 = EM_START as f64;
        let head: f64 = (1..EM_START).rev().map(term).sum();
        let y0 = c * libm::sqrt(n0);
        let f0 = term(EM_START);
        let df0 = -crate::special::normal_pdf(y0) * c / (2.0 * libm::sqrt(n0) * n0) - f0 / n0;
        let rest = 2.0 * phibar_over_y_tail(y0) + 0.5 * f0 - df0 / 12.0;
        // Size of the next correction, a third derivative over 720 with f ~ 1/x.
        let remainder = 6.0 * f0 / (720.0 * n0 * n0 * n0);
        (EM_START, head + rest, 2.0 * remainder + 1e-15)
    };
    let value = libm::exp(-2.0 * sum) / kappa;
    let rounding = 4.0 * f64::EPSILON * sum * libm::log(n_terms as f64 + 1.0).max(1.0);
    let abs_error = value * (tail_err + 2.0 * rounding);
    ConstantEstimate {
        value,
        abs_error,
        method: Method::Series,
        params: Provenance {
            kappa: Some(kappa),
            truncation: Some(n_terms),
            tolerance: Some(tol),
            ..Provenance::default()
        },
    }
    .checked()
}

/// Tolerance used for every internal `F` evaluation.
pub const F_TOL: f64 = 1e-12;

/// `G(h; kappa) = F(kappa / h)^2 / h^2`.
pub fn g_of(h: f64, kappa: f64) -> Result<f64> {
    require_positive("h", h)?;
    require_positive("kappa", kappa)?;
    let f = pickands_f(kappa / h, F_TOL)?.value;
    Ok(f * f / (h * h))
}

/// Above this `kappa` the series terms are below `1e-20` and `F = 1/kappa`.
const KAPPA_FLAT: f64 = 400.0;

/// `int_{k_lo}^{k_hi} F(kappa)^2 dkappa`; `k_hi` may be infinite.
///
/// With `kappa = s^2` the integrand `2 s F(s^2)^2` is smooth at `s = 0`;
/// beyond `KAPPA_FLAT` it is `kappa^-2` up to `1e-20`.
fn f_squared_between(k_lo: f64, k_hi: f64, tol: f64) -> Result<(f64, f64, usize)> {
    let mut value = 0.0;
    if k_hi > KAPPA_FLAT {
        let lo = k_lo.max(KAPPA_FLAT);
        value += 1.0 / lo - if k_hi.is_infinite() { 0.0 } else { 1.0 / k_hi };
    }
    let (s_lo, s_hi) = (libm::sqrt(k_lo), libm::sqrt(k_hi.min(KAPPA_FLAT)));
    if s_hi <= s_lo {
        return Ok((value, 0.0, 0));
    }
    let mut breaks = alloc::vec![s_lo];
    breaks.extend([0.25, 0.5, 1.0, 2.0, 4.0, 8.0].iter().copied().filter(|&x| x > s_lo && x < s_hi));
    breaks.push(s_hi);
    let mut failure = None;
    let q = adaptive_simpson_panels(
        |s| {
            if s == 0.0 {
                return 0.0;
            }
            match pickands_f(s * s, F_TOL) {
                Ok(f) => 2.0 * s * f.value * f.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        &breaks,
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((value + q.value, q.abs_error, q.evaluations))
}

fn f_squared_integral(tol: f64) -> Result<(f64, f64, usize)> {
    f_squared_between(0.0, f64::INFINITY, 0.5 * tol)
}

/// `G_d = int_0^inf G(h; 2d) dh`.
///
/// Substituting `kappa = 2d/h` gives `G_d = (1/(2d)) int_0^inf F(kappa)^2
/// dkappa`: large `h` maps onto small `kappa`, which is integrated directly,
/// and the analytic piece sits at small `h` where `G(h; 2d) = 1/(2d)^2`.
pub fn integrate_g_d(d: usize, tol: f64) -> Result<ConstantEstimate> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    require_positive("tol", tol)?;
    let scale = 1.0 / (2 * d) as f64;
    let (integral, err, evals) = f_squared_integral(tol / scale)?;
    ConstantEstimate {
        value: scale * integral,
        abs_error: scale * err + 1e-14,
        method: Method::Quadrature,
        params: Provenance {
            d: Some(d),
            kappa: Some((2 * d) as f64),
            tolerance: Some(tol),
            truncation: Some(evals),
            ..Provenance::default()
        },
    }
    .checked()
}

/// `int_a^b G(h; kappa) dh`, with `a = 0` and `b = inf` allowed.
///
/// Computed as `(1/kappa) int_{kappa/b}^{kappa/a} F(k)^2 dk`, which keeps
/// the series evaluations away from tiny arguments where they are costly.
pub fn integrate_g_between(a: f64, b: f64, kappa: f64, tol: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= a) {
        return Err(Error::Domain(alloc::format!("empty range [{a}, {b}]")));
    }
    require_positive("kappa", kappa)?;
    require_positive("tol", tol)?;
    let k_lo = if b.is_infinite() { 0.0 } else { kappa / b };
    let k_hi = if a == 0.0 { f64::INFINITY } else { kappa / a };
    let (v, _, _) = f_squared_between(k_lo, k_hi, tol * kappa)?;
    Ok(v / kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent fsum evaluation of the series.
    const F_2: f64 = 0.221_489_154_975_175_7;
    const F_0_16: f64 = 0.396_148_931_921_119_5;

    #[test]
    fn f_reference_values() {
        let f = pickands_f(2.0, 1e-12).unwrap();
        assert!((f.value - F_2).abs() < 1e-12, "{}", f.value);
        assert!(f.abs_error < 1e-12);
        assert_eq!(f.method, Method::Series);
        let f = pickands_f(0.16, 1e-12).unwrap();
        assert!((f.value - F_0_16).abs() < 1e-12);
    }

    #[test]
    fn f_limits() {
        // kappa F(kappa) -> 1; at kappa = 50 the first term 2 Phibar(3.54) ~ 4e-4 remains.
        let big = pickands_f(50.0, 1e-12).unwrap().value * 50.0;
        assert!((big - 0.999_592_843_936_424_2).abs() < 1e-12, "{big}");
        assert!((pickands_f(5000.0, 1e-12).unwrap().value * 5000.0 - 1.0).abs() < 1e-15);
        let small = pickands_f(0.005, 1e-12).unwrap().value;
        assert!((small - 0.5).abs() < 0.05);
        assert!((small - 0.479_821_173_860_192).abs() < 1e-11);
        let tiny = pickands_f(0.001, 1e-12).unwrap();
        assert!((tiny.value - 0.490_872_719_903_277_4).abs() < 1e-12);
        assert!(tiny.abs_error < 1e-13);
    }

    #[test]
    fn euler_maclaurin_switch_is_seamless() {
        // Direct summation just above the switch against the expansion just below.
        let direct = pickands_f(0.0102, 1e-12).unwrap();
        let em = pickands_f(0.0099, 1e-12).unwrap();
        assert_eq!(direct.params.truncation.map(|n| n > EM_START), Some(true));
        assert_eq!(em.params.truncation, Some(EM_START));
        let slope = (direct.value - em.value) / 0.0003;
        // dF/dkappa ~ -rho / (4 sqrt(kappa)) with rho ~ 0.58 near 0.
        assert!(slope < -0.5 && slope > -2.0, "{slope}");
        // Small-kappa asymptote F ~ exp(-rho sqrt(kappa)) / 2.
        let f = pickands_f(1e-8, 1e-12).unwrap().value;
        assert!((f - 0.5 * libm::exp(-0.5826 * 1e-4)).abs() < 1e-8);
    }

    #[test]
    fn f_domain() {
        assert!(matches!(pickands_f(0.0, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(pickands_f(-1.0, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(g_of(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn g_limits_and_scaling() {
        let large = g_of(1e4, 2.0).unwrap() * 4e8;
        assert!((large - 1.0).abs() < 0.05, "{large}");
        let small = g_of(1e-4, 2.0).unwrap() * 4.0;
        assert!((small - 1.0).abs() < 1e-3, "{small}");
        let lhs = g_of(3.0, 6.0).unwrap();
        let rhs = g_of(1.0, 2.0).unwrap() / 9.0;
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn g_between_matches_direct_quadrature() {
        let direct = crate::quad::adaptive_simpson(|h| g_of(h, 2.0).unwrap(), 0.5, 3.0, 1e-12).value;
        let via = integrate_g_between(0.5, 3.0, 2.0, 1e-12).unwrap();
        assert!((direct - via).abs() < 1e-10, "{direct} {via}");
        let whole = integrate_g_between(0.0, f64::INFINITY, 2.0, 1e-12).unwrap();
        let g1 = integrate_g_d(1, 1e-10).unwrap().value;
        assert!((whole - g1).abs() < 1e-9);
        let split = integrate_g_between(0.0, 1.0, 2.0, 1e-12).unwrap()
            + integrate_g_between(1.0, f64::INFINITY, 2.0, 1e-12).unwrap();
        assert!((split - whole).abs() < 1e-10);
    }

    #[test]
    fn g_1_reference_and_tolerance_stability() {
        // Independent oracle: direct summation plus Euler-Maclaurin tail,
        // integrated with QUADPACK in kappa.
        let a = integrate_g_d(1, 1e-6).unwrap();
        let b = integrate_g_d(1, 5e-7).unwrap();
        assert!((a.value - 0.214_877_287_588_317).abs() < 1e-6, "{}", a.value);
        assert!((a.value - b.value).abs() < 1e-6);
        assert!(a.abs_error < 1e-6);
    }

    #[test]
    fn g_d_relation_between_dimensions() {
        let g1 = integrate_g_d(1, 1e-8).unwrap();
        let g2 = integrate_g_d(2, 1e-8).unwrap();
        assert!((g1.value - 2.0 * g2.value).abs() < 1e-8);
    }
}
