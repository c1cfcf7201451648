//! Normalizing sequences `u_n(tau)`, extreme-value rates, leading-order
//! tail probabilities and Poisson clump rates.
//!
//! Every normalizer has the form `c + (A + tau)/c` with `c = sqrt(2d ln n)`
//! and a setting-dependent shift `A`. Logarithms are natural.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::constants::{integrate_g_between, integrate_g_d, ConstantEstimate, JProfile};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Setting {
    /// Maximum of `n` i.i.d. standard normals.
    Iid,
    DiscreteCube,
    DiscreteRect,
    ContinuousCube,
    ContinuousRect,
}

impl Setting {
    /// Name of the constant the normalizer needs, if any.
    pub fn constant_name(self) -> Option<&'static str> {
        match self {
            Setting::DiscreteCube => Some("J"),
            Setting::DiscreteRect => Some("G"),
            Setting::ContinuousCube => Some("E"),
            Setting::Iid | Setting::ContinuousRect => None,
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Setting::ContinuousCube | Setting::ContinuousRect)
    }
}

/// A scan setting with its resolved constant.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettingSpec {
    pub family: Setting,
    pub d: usize,
    pub n: f64,
    /// Minimum side length; continuous settings only.
    pub a: Option<f64>,
    /// `J_d`, `G_d` or `E_d` as required by `family`.
    pub constant: Option<ConstantEstimate>,
}

impl SettingSpec {
    pub fn new(family: Setting, d: usize, n: f64) -> Self {
        Self { family, d, n, a: None, constant: None }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_constant(mut self, c: ConstantEstimate) -> Self {
        self.constant = Some(c);
        self
    }

    /// `d`, or 1 for the i.i.d. setting.
    pub fn effective_d(&self) -> usize {
        if self.family == Setting::Iid {
            1
        } else {
            self.d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidDimension("d must be at least 1".into()));
        }
        if !(self.n > 1.0 && self.n.is_finite()) {
            return Err(Error::Domain(alloc::format!("n must exceed 1, got {}", self.n)));
        }
        let d = self.effective_d() as f64;
        if !(d * libm::log(self.n) > 1.0) && self.family != Setting::Iid {
            // log(d log n) must be defined and the expansion meaningful.
            return Err(Error::Domain(alloc::format!("d log n must exceed 1, got {}", d * libm::log(self.n))));
        }
        if self.family == Setting::Iid && !(libm::log(self.n) > 1.0) {
            return Err(Error::Domain(alloc::format!("log n must exceed 1, got {}", libm::log(self.n))));
        }
        if self.family.is_continuous() {
            match self.a {
                Some(a) if a > 0.0 && a.is_finite() => {}
                _ => return Err(Error::Config("continuous settings need a minimum side a > 0".into())),
            }
        }
        if self.family.constant_name().is_some() && self.constant.is_none() {
            return Err(Error::Config(alloc::format!(
                "setting {:?} needs the constant {}_{}",
                self.family,
                self.family.constant_name().unwrap_or(""),
                self.d
            )));
        }
        Ok(())
    }

    fn constant_value(&self) -> f64 {
        self.constant.as_ref().map_or(f64::NAN, |c| c.value)
    }

    /// Relative error of the resolved constant (0 when none is needed).
    pub fn constant_relative_error(&self) -> f64 {
        self.constant.as_ref().map_or(0.0, |c| c.relative_error())
    }

    /// `sqrt(2 d log n)`.
    pub fn scale(&self) -> f64 {
        libm::sqrt(2.0 * self.effective_d() as f64 * libm::log(self.n))
    }

    /// The shift `A` in `u = c + (A + tau)/c`.
    pub fn shift(&self) -> Result<f64> {
        self.validate()?;
        let d = self.d as f64;
        let log_n = libm::log(self.n);
        let ldl = libm::log(d * log_n);
        let sqrt_pi = libm::sqrt(PI);
        Ok(match self.family {
            Setting::Iid => -0.5 * libm::log(log_n) - libm::log(2.0 * sqrt_pi),
            Setting::DiscreteCube => 0.5 * ldl + libm::log(libm::pow(2.0 * d, d) * self.constant_value() / sqrt_pi),
            Setting::DiscreteRect => {
                let g = self.constant_value();
                (d - 0.5) * ldl + libm::log(libm::pow(2.0, 2.0 * d - 1.0) * libm::pow(d, d) * libm::pow(g, d) / sqrt_pi)
            }
            Setting::ContinuousCube => {
                let a = self.a.unwrap_or(f64::NAN);
                (d + 0.5) * ldl + libm::log(libm::pow(2.0, d) * self.constant_value() / (d * libm::pow(a, d) * sqrt_pi))
            }
            Setting::ContinuousRect => {
                let a = self.a.unwrap_or(f64::NAN);
                (2.0 * d - 0.5) * ldl - libm::log(2.0 * libm::pow(a, d) * sqrt_pi)
            }
        })
    }
}

/// `u_n(tau)`.
pub fn normalizer(s: &SettingSpec, tau: f64) -> Result<f64> {
    let c = s.scale();
    Ok(c + (s.shift()? + tau) / c)
}

/// The `tau` with `normalizer(s, tau) = m`.
pub fn invert_normalizer(s: &SettingSpec, m: f64) -> Result<f64> {
    let c = s.scale();
    Ok((m - c) * c - s.shift()?)
}

/// `u_n(tau)` with the half-width induced by the constant's error.
///
/// The shift depends on `log(constant)` (to the power `d` for rectangles),
/// so the band is `p * rel_err / c` with `p` that power.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Threshold {
    pub u: f64,
    pub half_width: f64,
}

pub fn normalizer_band(s: &SettingSpec, tau: f64) -> Result<Threshold> {
    let u = normalizer(s, tau)?;
    Ok(Threshold { u, half_width: tau_band(s) / s.scale() })
}

/// Uncertainty of `tau` (equivalently of the shift `A`) from the constant.
pub fn tau_band(s: &SettingSpec) -> f64 {
    let power = if s.family == Setting::DiscreteRect { s.d as f64 } else { 1.0 };
    let rel = s.constant_relative_error();
    // log(c (1 + r)) - log c; use the wider side of the interval.
    if rel >= 1.0 {
        f64::INFINITY
    } else {
        -power * libm::log1p(-rel)
    }
}

/// `f(n) = alpha n^beta (log n)^gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RateSpec {
    pub fn log_rate(&self, n: f64) -> f64 {
        let ln = libm::log(n);
        libm::log(self.alpha) + self.beta * ln + self.gamma * libm::log(ln)
    }
}

/// The extreme-value rate of a scan setting.
pub fn extreme_value_rate(s: &SettingSpec) -> Result<RateSpec> {
    if s.family == Setting::Iid {
        return Err(Error::NotApplicable("the i.i.d. setting has rate n by definition".into()));
    }
    s.validate()?;
    let d = s.d as f64;
    let c = s.constant_value();
    let a = s.a.unwrap_or(f64::NAN);
    let (alpha, gamma) = match s.family {
        Setting::DiscreteCube => (libm::pow(2.0 * d, d + 1.0) * c, 1.0),
        Setting::DiscreteRect => (libm::pow(2.0 * d, 2.0 * d) * libm::pow(c, d), d),
        Setting::ContinuousCube => (2.0 * c * libm::pow(2.0 * d / a, d), d + 1.0),
        Setting::ContinuousRect => (libm::pow(d, 2.0 * d) / libm::pow(a, d), 2.0 * d),
        Setting::Iid => unreachable!(),
    };
    Ok(RateSpec { alpha, beta: d, gamma })
}

fn check_rate(r: &RateSpec, n: f64) -> Result<()> {
    if !(r.alpha > 0.0 && r.beta > 0.0 && r.gamma.is_finite()) {
        return Err(Error::Domain(alloc::format!("invalid rate {r:?}")));
    }
    if !(n > core::f64::consts::E && n.is_finite()) {
        return Err(Error::Domain(alloc::format!("n must exceed e, got {n}")));
    }
    Ok(())
}

/// Normalizer of the maximum of `f(n)` i.i.d. standard normals, i.e. the
/// i.i.d. normalizer evaluated at `N = f(n)` without further expansion.
///
/// Its distance to the setting's `u_n(tau)` is the neglected `o(1)` of the
/// log-n expansion of `log f(n)`, divided by `sqrt(2 d log n)`.
pub fn u_from_rate(r: &RateSpec, n: f64, tau: f64) -> Result<f64> {
    check_rate(r, n)?;
    let log_big = r.log_rate(n);
    if !(log_big > 1.0) {
        return Err(Error::Domain(alloc::format!("log f(n) = {log_big} must exceed 1")));
    }
    let c = libm::sqrt(2.0 * log_big);
    Ok(c + (-0.5 * libm::log(log_big) - libm::log(2.0 * libm::sqrt(PI)) + tau) / c)
}

/// The log-n expansion of [`u_from_rate`] with the `o(1)` dropped:
/// `sqrt(2 beta log n) + ((gamma - 1/2) log(beta log n) +
/// log(alpha / (2 beta^gamma sqrt(pi))) + tau) / sqrt(2 beta log n)`.
pub fn rate_expansion(r: &RateSpec, n: f64, tau: f64) -> Result<f64> {
    check_rate(r, n)?;
    let c = libm::sqrt(2.0 * r.beta * libm::log(n));
    let shift = (r.gamma - 0.5) * libm::log(r.beta * libm::log(n))
        + libm::log(r.alpha / (2.0 * libm::pow(r.beta, r.gamma) * libm::sqrt(PI)));
    Ok(c + (shift + tau) / c)
}

/// Window shape for the tail formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Shape {
    Cube,
    Rect,
}

/// Product region of windows: origins in `[origin_lo, origin_hi]` and side
/// lengths in `[len_lo, len_hi]`, per axis. For cubes only `len_*[0]` is used.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Region {
    pub origin_lo: Vec<f64>,
    pub origin_hi: Vec<f64>,
    pub len_lo: Vec<f64>,
    pub len_hi: Vec<f64>,
}

impl Region {
    /// The same intervals on every axis.
    pub fn uniform(d: usize, origin: (f64, f64), len: (f64, f64)) -> Self {
        Self {
            origin_lo: alloc::vec![origin.0; d],
            origin_hi: alloc::vec![origin.1; d],
            len_lo: alloc::vec![len.0; d],
            len_hi: alloc::vec![len.1; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.origin_lo.len()
    }

    fn validate(&self, d: usize) -> Result<()> {
        let ok_len = [&self.origin_hi, &self.len_lo, &self.len_hi].iter().all(|v| v.len() == d);
        if self.origin_lo.len() != d || !ok_len {
            return Err(Error::Domain(alloc::format!("region must have {d} axes")));
        }
        for i in 0..d {
            if !(self.origin_hi[i] > self.origin_lo[i]) || !(self.len_lo[i] > 0.0 && self.len_hi[i] > self.len_lo[i]) {
                return Err(Error::Domain(alloc::format!("region axis {i} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn origin_volume(&self) -> f64 {
        self.origin_lo.iter().zip(&self.origin_hi).map(|(a, b)| b - a).product()
    }
}

fn check_tail_args(region: &Region, d: usize, u: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidDimension("d must be at least 1".into()));
    }
    region.validate(d)?;
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::Domain(alloc::format!("u must be positive, got {u}")));
    }
    Ok(())
}

/// Leading-order `P[sup_{A in region} W(A)/sqrt|A| > u]` for continuous
/// white noise. The cube case needs `E_d`.
pub fn tail_asymptotic(shape: Shape, region: &Region, u: f64, d: usize, e_d: Option<f64>) -> Result<f64> {
    check_tail_args(region, d, u)?;
    let gauss = libm::exp(-0.5 * u * u) / libm::sqrt(2.0 * PI);
    let df = d as f64;
    match shape {
        Shape::Rect => {
            let mut integral = 1.0;
            for i in 0..d {
                let width = region.origin_hi[i] - region.origin_lo[i];
                integral *= width * (1.0 / region.len_lo[i] - 1.0 / region.len_hi[i]);
            }
            Ok(integral / libm::pow(4.0, df) * libm::pow(u, 4.0 * df - 1.0) * gauss)
        }
        Shape::Cube => {
            let e = e_d.ok_or_else(|| Error::Config("the cube tail needs E_d".into()))?;
            let (lo, hi) = (region.len_lo[0], region.len_hi[0]);
            let h_int = (libm::pow(lo, -df) - libm::pow(hi, -df)) / df;
            Ok(e * region.origin_volume() * h_int * libm::pow(u, 2.0 * df + 1.0) * gauss)
        }
    }
}

/// Nodes of the fixed Simpson rule used for the cube grid tail.
const CUBE_TAIL_NODES: usize = 33;

/// Grid-corrected leading-order tail for windows on a `q`-grid with
/// `kappa = q u^2`.
///
/// Rectangles integrate `prod_i G(h_i; kappa)` by adaptive quadrature. Cubes
/// integrate `h^-(d+1) E_d(kappa/h)` on a fixed Simpson grid in `h`, with
/// `e_grid` supplying `E_d` at the required arguments (Monte Carlo estimates
/// are noisy, which an adaptive rule would chase).
pub fn tail_asymptotic_grid(
    shape: Shape,
    region: &Region,
    u: f64,
    kappa: f64,
    d: usize,
    e_grid: Option<&dyn Fn(f64) -> Result<f64>>,
) -> Result<f64> {
    check_tail_args(region, d, u)?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(alloc::format!("kappa must be positive, got {kappa}")));
    }
    let gauss = libm::exp(-0.5 * u * u) / libm::sqrt(2.0 * PI);
    let df = d as f64;
    match shape {
        Shape::Rect => {
            let mut integral = 1.0;
            for i in 0..d {
                let width = region.origin_hi[i] - region.origin_lo[i];
                integral *= width * integrate_g_between(region.len_lo[i], region.len_hi[i], kappa, 1e-11)?;
            }
            Ok(integral * libm::pow(u, 4.0 * df - 1.0) * gauss)
        }
        Shape::Cube => {
            let e_grid = e_grid.ok_or_else(|| Error::Config("the cube grid tail needs E_d(kappa)".into()))?;
            let (lo, hi) = (region.len_lo[0], region.len_hi[0]);
            let n = CUBE_TAIL_NODES;
            let step = (hi - lo) / (n - 1) as f64;
            let mut sum = 0.0;
            for i in 0..n {
                let h = lo + step * i as f64;
                let w = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                sum += w * libm::pow(h, -(df + 1.0)) * e_grid(kappa / h)?;
            }
            let h_int = sum * step / 3.0;
            Ok(region.origin_volume() * h_int * libm::pow(u, 2.0 * df + 1.0) * gauss)
        }
    }
}

/// Poisson mean of the number of clumps above `u_n(tau)` among windows
/// with side (in units of the setting's scale) in `[a, b]`; `b` may be
/// infinite.
///
/// The discrete cube rate needs the `J_d(h)` profile for `d >= 2`; the
/// ratio is formed against the profile's own total so that
/// `(a, b) = (0, inf)` gives exactly `e^-tau`. At `d = 1` the profile is
/// optional since `J_1(h) = G(h; 2)`.
pub fn clump_rate(s: &SettingSpec, tau: f64, a: f64, b: f64, profile: Option<&JProfile>) -> Result<f64> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::Domain(alloc::format!("need 0 <= a < b, got a = {a}, b = {b}")));
    }
    let d = s.d as f64;
    let e = libm::exp(-tau);
    match s.family {
        Setting::ContinuousCube => {
            if !(a > 0.0) {
                return Err(Error::Domain("continuous settings need a > 0".into()));
            }
            Ok(e * (1.0 - libm::pow(a / b, d)))
        }
        Setting::ContinuousRect => {
            if !(a > 0.0) {
                return Err(Error::Domain("continuous settings need a > 0".into()));
            }
            Ok(e * libm::pow(1.0 - a / b, d))
        }
        Setting::DiscreteCube if s.d == 1 && profile.is_none() => {
            // J_1(h) = G(h; 2) exactly.
            let g_total = integrate_g_d(1, 1e-10)?.value;
            let part = if a == 0.0 && b.is_infinite() { g_total } else { integrate_g_between(a, b, 2.0, 1e-12)? };
            Ok(e * part / g_total)
        }
        Setting::DiscreteCube => {
            let p = profile.ok_or_else(|| Error::Config("the discrete cube clump rate needs J_d(h)".into()))?;
            if p.d != s.d {
                return Err(Error::Config(alloc::format!("J profile is for d = {}, setting has d = {}", p.d, s.d)));
            }
            let total = p.integrate(0.0, f64::INFINITY)?;
            Ok(e * p.integrate(a, b)? / total)
        }
        Setting::DiscreteRect => {
            let kappa = 2.0 * d;
            let g_total = integrate_g_d(s.d, 1e-10)?.value;
            let part = if a == 0.0 && b.is_infinite() { g_total } else { integrate_g_between(a, b, kappa, 1e-12)? };
            Ok(e * libm::pow(part / g_total, d))
        }
        Setting::Iid => Err(Error::NotApplicable("no clump structure for i.i.d. maxima".into())),
    }
}
