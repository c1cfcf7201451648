//! `J_d(h) = h^-(d+1) E_d(2d/h)` and its integral `J_d`, plus the continuum
//! limit `E_d = lim_{kappa -> 0} E_d(kappa)`.
//!
//! `J_d(h)` is evaluated by Monte Carlo on log-spaced nodes in
//! `[h_min, h_cut]` and integrated by Simpson's rule in `t = ln h`. Below
//! `h_min` the integrand is close to its limit `(2d)^-(d+1)`; above `h_cut`
//! the fitted curve `E_d(kappa) ~ c0 + c1 sqrt(kappa) + c2 kappa` is
//! integrated analytically.

use alloc::vec::Vec;

use crate::constants::fit::{weighted_fit, Basis, Fit};
use crate::constants::grid::{estimate_e_d_grid, grid_parts, ExpSupEstimator, GridMcParams, GridParts};
use crate::constants::{ConstantEstimate, Method, Provenance};
use crate::error::{Error, Result};
use crate::exec::Executor;

/// Node layout for the `J_d` quadrature.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JQuadParams {
    pub h_min: f64,
    /// `None` picks 64 for `d = 1` and 16 otherwise.
    pub h_cut: Option<f64>,
    /// Number of log-spaced nodes; must be `1 mod 4` so the half grid is a
    /// Simpson grid as well.
    pub nodes: usize,
    /// How many of the largest-`h` nodes feed the `kappa -> 0` fit.
    pub fit_nodes: usize,
}

impl Default for JQuadParams {
    fn default() -> Self {
        Self { h_min: 0.05, h_cut: None, nodes: 41, fit_nodes: 9 }
    }
}

impl JQuadParams {
    pub fn h_cut_for(&self, d: usize) -> f64 {
        self.h_cut.unwrap_or(if d == 1 { 64.0 } else { 16.0 })
    }

    /// Log-spaced quadrature nodes from `h_min` to `h_cut`.
    pub fn nodes_for(&self, d: usize) -> Result<Vec<f64>> {
        self.validate(d)?;
        let (n, h_cut) = (self.nodes, self.h_cut_for(d));
        let step = (libm::log(h_cut) - libm::log(self.h_min)) / (n - 1) as f64;
        Ok((0..n).map(|i| if i == n - 1 { h_cut } else { self.h_min * libm::exp(step * i as f64) }).collect())
    }

    /// `kappa = 2d/h` at the `fit_nodes` largest nodes, decreasing: the
    /// sequence [`integrate_j_d`] extrapolates `E_d` from.
    pub fn fit_kappas(&self, d: usize) -> Result<Vec<f64>> {
        let h = self.nodes_for(d)?;
        let kd = (2 * d) as f64;
        Ok(h[h.len() - self.fit_nodes..].iter().map(|hi| kd / hi).collect())
    }

    fn validate(&self, d: usize) -> Result<()> {
        let h_cut = self.h_cut_for(d);
        if !(self.h_min > 0.0 && h_cut > self.h_min && h_cut.is_finite()) {
            return Err(Error::Config(alloc::format!("need 0 < h_min < h_cut, got {} and {h_cut}", self.h_min)));
        }
        if self.nodes < 5 || self.nodes % 4 != 1 {
            return Err(Error::Config(alloc::format!("node count must be 1 mod 4 and at least 5, got {}", self.nodes)));
        }
        if self.fit_nodes < 4 || self.fit_nodes > self.nodes {
            return Err(Error::Config(alloc::format!("fit_nodes must lie in [4, {}]", self.nodes)));
        }
        Ok(())
    }
}

/// Smallest multiple of `kappa` that reaches `horizon`.
fn aligned_horizon(kappa: f64, horizon: f64) -> f64 {
    if kappa >= horizon {
        return kappa;
    }
    kappa * libm::ceil(horizon / kappa - 1e-9)
}

fn e_grid_parts<E: Executor>(d: usize, kappa: f64, mc: &GridMcParams, exec: &E) -> Result<GridParts> {
    let horizon = aligned_horizon(kappa, mc.horizon_for(d));
    grid_parts(d, kappa, horizon, mc.replications, mc.seed, ExpSupEstimator::NormalizedMax, exec)
}

/// `E_d(kappa)` with the horizon rounded up to a multiple of `kappa`.
pub fn e_d_of<E: Executor>(kappa: f64, d: usize, mc: &GridMcParams, exec: &E) -> Result<ConstantEstimate> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(alloc::format!("kappa must be positive, got {kappa}")));
    }
    let horizon = aligned_horizon(kappa, mc.horizon_for(d));
    estimate_e_d_grid(d, kappa, horizon, mc.replications, mc.seed, ExpSupEstimator::NormalizedMax, exec)
}

/// `J_d(h) = h^-(d+1) E_d(2d/h)`.
pub fn j_d_of<E: Executor>(h: f64, d: usize, mc: &GridMcParams, exec: &E) -> Result<ConstantEstimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(alloc::format!("h must be positive, got {h}")));
    }
    let kappa = (2 * d) as f64 / h;
    let parts = e_grid_parts(d, kappa, mc, exec)?;
    let scale = libm::pow(h, -((d + 1) as f64));
    ConstantEstimate {
        value: scale * parts.mean,
        abs_error: scale * parts.abs_error(),
        method: Method::MonteCarlo,
        params: Provenance {
            kappa: Some(kappa),
            h: Some(h),
            d: Some(d),
            horizon: Some(aligned_horizon(kappa, mc.horizon_for(d))),
            replications: Some(mc.replications),
            seed: Some(mc.seed),
            ..Provenance::default()
        },
    }
    .checked()
}

/// Fit of `E_d(kappa)` near 0 together with a model-uncertainty proxy.
#[derive(Clone, Debug, PartialEq)]
pub struct Extrapolation {
    pub fit: Fit,
    /// Half the intercept change when the `kappa` term is dropped.
    pub model_error: f64,
}

fn extrapolate(kappa: &[f64], value: &[f64], err: &[f64]) -> Result<Extrapolation> {
    let fit = weighted_fit(kappa, value, err, Basis::SqrtLinear)?;
    let simple = weighted_fit(kappa, value, err, Basis::Sqrt)?;
    let model_error = 0.5 * libm::fabs(fit.coef[0] - simple.coef[0]);
    Ok(Extrapolation { fit, model_error })
}

fn extrapolation_estimate(d: usize, ex: &Extrapolation, mc: &GridMcParams) -> Result<ConstantEstimate> {
    ConstantEstimate {
        value: ex.fit.coef[0],
        abs_error: ex.fit.intercept_stderr() + ex.model_error,
        method: Method::Extrapolation,
        params: Provenance {
            d: Some(d),
            horizon: Some(mc.horizon_for(d)),
            replications: Some(mc.replications),
            seed: Some(mc.seed),
            ..Provenance::default()
        },
    }
    .checked()
}

/// `E_d` from grid estimates at a decreasing `kappa` sequence, extrapolated
/// to `kappa = 0` with the basis `1, sqrt(kappa), kappa`.
///
/// `abs_error` is the intercept's standard error plus half the difference
/// to the two-term fit.
pub fn estimate_e_d_continuous<E: Executor>(
    d: usize,
    kappas: &[f64],
    mc: &GridMcParams,
    exec: &E,
) -> Result<ConstantEstimate> {
    if kappas.len() < 3 {
        return Err(Error::Config("the kappa sequence needs at least 3 terms".into()));
    }
    if kappas.windows(2).any(|w| !(w[1] < w[0])) || kappas.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Config("the kappa sequence must be positive and decreasing".into()));
    }
    let mut value = Vec::with_capacity(kappas.len());
    let mut err = Vec::with_capacity(kappas.len());
    for &k in kappas {
        let p = e_grid_parts(d, k, mc, exec)?;
        value.push(p.mean);
        err.push(p.abs_error());
    }
    let ex = extrapolate(kappas, &value, &err)?;
    extrapolation_estimate(d, &ex, mc)
}

/// `J_d(h)` on log-spaced nodes, with point errors.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JProfile {
    pub d: usize,
    pub h: Vec<f64>,
    pub value: Vec<f64>,
    pub abs_error: Vec<f64>,
    /// Fitted `E_d(kappa) ~ c0 + c1 sqrt(kappa) + c2 kappa`, used past the
    /// last node.
    pub tail_coef: Vec<f64>,
}

impl JProfile {
    fn limit_at_zero(&self) -> f64 {
        libm::pow((2 * self.d) as f64, -((self.d + 1) as f64))
    }

    /// `J_d(h)`, interpolated linearly in `(ln h, h J_d(h))` between nodes,
    /// from the fitted tail beyond them, and linearly towards the `h = 0`
    /// limit below the first node.
    pub fn eval(&self, h: f64) -> f64 {
        let n = self.h.len();
        if h <= self.h[0] {
            return self.limit_at_zero() + (self.value[0] - self.limit_at_zero()) * h / self.h[0];
        }
        if h >= self.h[n - 1] {
            let kappa = (2 * self.d) as f64 / h;
            let c = &self.tail_coef;
            let e = c[0] + c[1] * libm::sqrt(kappa) + c[2] * kappa;
            return e * libm::pow(h, -((self.d + 1) as f64));
        }
        let i = self.h.partition_point(|&x| x <= h) - 1;
        let (t0, t1) = (libm::log(self.h[i]), libm::log(self.h[i + 1]));
        let w = (libm::log(h) - t0) / (t1 - t0);
        let g = (1.0 - w) * self.h[i] * self.value[i] + w * self.h[i + 1] * self.value[i + 1];
        g / h
    }

    /// `int_a^b J_d(h) dh` over the interpolant.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= a) {
            return Err(Error::Domain(alloc::format!("empty range [{a}, {b}]")));
        }
        // Integrate over [a, b] split at the nodes; the integrand h J(h) is
        // piecewise linear in ln h between nodes, so a fine Simpson rule is
        // exact up to rounding on each piece.
        let mut cuts: Vec<f64> = alloc::vec![a];
        cuts.extend(self.h.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            if lo < self.h[0] {
                let top = hi.min(self.h[0]);
                let j0 = self.limit_at_zero();
                let slope = (self.value[0] - j0) / self.h[0];
                total += j0 * (top - lo) + 0.5 * slope * (top * top - lo * lo);
                continue;
            }
            let n = self.h.len();
            if lo >= self.h[n - 1] {
                total += self.tail_integral(lo, hi);
                continue;
            }
            // h J(h) = g linear in t = ln h: int J dh = int g dt.
            let (t0, t1) = (libm::log(lo), libm::log(hi));
            total += 0.5 * (t1 - t0) * (lo * self.eval(lo) + hi * self.eval(hi));
        }
        Ok(total)
    }

    /// `int_lo^hi h^-(d+1) (c0 + c1 sqrt(2d/h) + c2 2d/h) dh`, `hi` may be infinite.
    fn tail_integral(&self, lo: f64, hi: f64) -> f64 {
        let d = self.d as f64;
        let k = 2.0 * d;
        let c = &self.tail_coef;
        let piece = |p: f64, x: f64| if x.is_infinite() { 0.0 } else { libm::pow(x, -p) / p };
        c[0] * (piece(d, lo) - piece(d, hi))
            + c[1] * libm::sqrt(k) * (piece(d + 0.5, lo) - piece(d + 0.5, hi))
            + c[2] * k * (piece(d + 1.0, lo) - piece(d + 1.0, hi))
    }
}

/// Result of [`integrate_j_d`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JIntegral {
    pub estimate: ConstantEstimate,
    pub profile: JProfile,
    /// Continuum constant from the tail fit.
    pub e_d: ConstantEstimate,
    /// Quadrature residual `|I(full grid) - I(half grid)|`.
    pub quadrature_residual: f64,
}

fn simpson_weights(n: usize, step: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * step / 3.0
        })
        .collect()
}

/// `J_d = int_0^inf J_d(h) dh`.
///
/// `abs_error` adds the Monte Carlo standard error of the node sum, the
/// summed horizon-halving shifts, the quadrature residual, the tail's fit
/// uncertainty and the low-end trapezoid error.
pub fn integrate_j_d<E: Executor>(d: usize, mc: &GridMcParams, quad: &JQuadParams, exec: &E) -> Result<JIntegral> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let h = quad.nodes_for(d)?;
    let h_cut = quad.h_cut_for(d);
    let n = quad.nodes;
    let step = (libm::log(h_cut) - libm::log(quad.h_min)) / (n - 1) as f64;
    let kd = (2 * d) as f64;
    let power = -((d + 1) as f64);

    let mut value = Vec::with_capacity(n);
    let mut se = Vec::with_capacity(n);
    let mut shift = Vec::with_capacity(n);
    let mut e_mean = Vec::with_capacity(n);
    let mut e_err = Vec::with_capacity(n);
    for &hi in &h {
        let p = e_grid_parts(d, kd / hi, mc, exec)?;
        let s = libm::pow(hi, power);
        value.push(s * p.mean);
        se.push(s * p.stderr);
        shift.push(s * p.horizon_shift);
        e_mean.push(p.mean);
        e_err.push(p.abs_error());
    }

    // Simpson in t = ln h on h J(h), full and half grids.
    let w_full = simpson_weights(n, step);
    let w_half = simpson_weights(n.div_ceil(2), 2.0 * step);
    let g: Vec<f64> = h.iter().zip(&value).map(|(a, b)| a * b).collect();
    let full: f64 = w_full.iter().zip(&g).map(|(w, g)| w * g).sum();
    let half: f64 = w_half.iter().zip(g.iter().step_by(2)).map(|(w, g)| w * g).sum();
    let residual = libm::fabs(full - half);
    let mc_se = libm::sqrt(w_full.iter().zip(h.iter().zip(&se)).map(|(w, (h, s))| (w * h * s) * (w * h * s)).sum());
    let mc_shift: f64 = w_full.iter().zip(h.iter().zip(&shift)).map(|(w, (h, s))| w * h * s).sum();

    // Continuum fit on the smallest kappas (largest h).
    let m = quad.fit_nodes;
    let ks: Vec<f64> = h[n - m..].iter().map(|hi| kd / hi).collect();
    let ev = &e_mean[n - m..];
    let ee = &e_err[n - m..];
    let ex = extrapolate(&ks, ev, ee)?;
    let e_d = extrapolation_estimate(d, &ex, mc)?;

    let profile = JProfile {
        d,
        h: h.clone(),
        value,
        abs_error: se.iter().zip(&shift).map(|(a, b)| a + b).collect(),
        tail_coef: ex.fit.coef.clone(),
    };
    let tail = profile.tail_integral(h_cut, f64::INFINITY);
    let dd = d as f64;
    let tail_v = [
        libm::pow(h_cut, -dd) / dd,
        libm::sqrt(kd) * libm::pow(h_cut, -(dd + 0.5)) / (dd + 0.5),
        kd * libm::pow(h_cut, -(dd + 1.0)) / (dd + 1.0),
    ];
    let tail_err = ex.fit.linear_stderr(&tail_v) + ex.model_error * tail_v[0];

    let j0 = profile.limit_at_zero();
    let low = 0.5 * quad.h_min * (j0 + profile.value[0]);
    let low_err = 0.5 * quad.h_min * libm::fabs(j0 - profile.value[0]);

    let estimate = ConstantEstimate {
        value: full + tail + low,
        abs_error: mc_se + mc_shift + residual + tail_err + low_err,
        method: Method::Quadrature,
        params: Provenance {
            d: Some(d),
            horizon: Some(mc.horizon_for(d)),
            replications: Some(mc.replications),
            seed: Some(mc.seed),
            truncation: Some(n),
            h: Some(h_cut),
            ..Provenance::default()
        },
    }
    .checked()?;
    Ok(JIntegral { estimate, profile, e_d, quadrature_residual: residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::pickands_f;
    use crate::exec::Serial;

    #[test]
    fn continuous_estimate_reuses_the_fit_nodes() {
        let mc = GridMcParams::new(60, 5);
        let quad = JQuadParams { nodes: 9, fit_nodes: 5, ..JQuadParams::default() };
        let j = integrate_j_d(1, &mc, &quad, &Serial).unwrap();
        let e = estimate_e_d_continuous(1, &quad.fit_kappas(1).unwrap(), &mc, &Serial).unwrap();
        assert_eq!(j.e_d, e);
    }

    #[test]
    fn horizon_alignment() {
        assert_eq!(aligned_horizon(4.0, 48.0), 48.0);
        assert_eq!(aligned_horizon(100.0, 48.0), 100.0);
        let t = aligned_horizon(0.3, 48.0);
        assert!(t >= 48.0 && (t / 0.3 - libm::round(t / 0.3)).abs() < 1e-9);
    }

    #[test]
    fn j_of_scaling() {
        let mc = GridMcParams::new(200, 3);
        let j = j_d_of(1.0, 1, &mc, &Serial).unwrap();
        let e = e_grid_parts(1, 2.0, &mc, &Serial).unwrap();
        assert_eq!(j.value, e.mean);
        let j = j_d_of(2.0, 2, &mc, &Serial).unwrap();
        let e = e_grid_parts(2, 2.0, &mc, &Serial).unwrap();
        assert_eq!(e_d_of(2.0, 2, &mc, &Serial).unwrap().value, e.mean);
        assert!((j.value - e.mean / 8.0).abs() < 1e-15);
        assert!(j_d_of(0.0, 1, &mc, &Serial).is_err());
    }

    #[test]
    fn small_h_limit() {
        // For h << 1 the grid is {0} and J_d(h) = (2d)^-(d+1).
        let mc = GridMcParams::new(10, 1);
        let j = j_d_of(1e-3, 2, &mc, &Serial).unwrap();
        assert!((j.value - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn quad_params_validation() {
        let mc = GridMcParams::new(10, 1);
        let bad = JQuadParams { nodes: 10, ..JQuadParams::default() };
        assert!(matches!(integrate_j_d(1, &mc, &bad, &Serial), Err(Error::Config(_))));
        let bad = JQuadParams { h_min: 0.0, ..JQuadParams::default() };
        assert!(integrate_j_d(1, &mc, &bad, &Serial).is_err());
    }

    #[test]
    fn profile_integration_is_consistent() {
        let p = JProfile {
            d: 1,
            h: alloc::vec![0.5, 1.0, 2.0, 4.0],
            value: alloc::vec![0.2, 0.15, 0.05, 0.014],
            abs_error: alloc::vec![0.0; 4],
            tail_coef: alloc::vec![0.25, -0.3, 0.05],
        };
        // Additivity over a split point, and agreement with the node values.
        let whole = p.integrate(0.1, 10.0).unwrap();
        let parts = p.integrate(0.1, 1.5).unwrap() + p.integrate(1.5, 10.0).unwrap();
        assert!((whole - parts).abs() < 1e-14);
        assert!((p.eval(2.0) - 0.05).abs() < 1e-15);
        assert_eq!(p.integrate(1.0, 1.0).unwrap(), 0.0);
        let tail = p.integrate(4.0, 1e9).unwrap();
        assert!((tail - p.tail_integral(4.0, f64::INFINITY)).abs() < 1e-9);
    }

    #[test]
    fn continuum_fit_recovers_one_dimensional_limit() {
        // E_1(kappa) = F(kappa)^2 exactly, E_1 = 1/4. Feed exact values
        // through the fitting path.
        let ks = [0.5, 0.35, 0.25, 0.18, 0.125, 0.09, 0.0625];
        let v: Vec<f64> = ks.iter().map(|&k| libm::pow(pickands_f(k, 1e-13).unwrap().value, 2.0)).collect();
        let ex = extrapolate(&ks, &v, &[1e-4; 7]).unwrap();
        assert!((ex.fit.coef[0] - 0.25).abs() < 0.01, "{}", ex.fit.coef[0]);
        let lin = weighted_fit(&ks, &v, &[1e-4; 7], Basis::Linear).unwrap();
        assert!((lin.coef[0] - 0.25).abs() > 0.02);
    }

    #[test]
    fn continuous_estimate_checks_sequence() {
        let mc = GridMcParams::new(10, 1);
        assert!(estimate_e_d_continuous(1, &[0.5, 0.25], &mc, &Serial).is_err());
        assert!(estimate_e_d_continuous(1, &[0.25, 0.5, 0.1], &mc, &Serial).is_err());
    }
}
