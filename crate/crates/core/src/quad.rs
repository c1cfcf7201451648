//! Adaptive Simpson quadrature.
//!
//! Function values at panel ends and midpoints are handed down the
//! recursion, so every abscissa is evaluated once.

/// Result of a quadrature: value and an estimate of its absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

struct Ctx<'a, F: FnMut(f64) -> f64> {
    f: &'a mut F,
    evals: usize,
    err: f64,
}

impl<F: FnMut(f64) -> f64> Ctx<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        self.evals += 1;
        (self.f)(x)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= MAX_DEPTH || libm::fabs(delta) <= 15.0 * tol {
            self.err += libm::fabs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    let mut ctx = Ctx { f: &mut f, evals: 0, err: 0.0 };
    let fa = ctx.eval(a);
    let fb = ctx.eval(b);
    let m = 0.5 * (a + b);
    let fm = ctx.eval(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let value = ctx.recurse(a, b, fa, fm, fb, whole, tol, 0);
    Quadrature { value, abs_error: ctx.err, evaluations: ctx.evals }
}

/// Integrates over consecutive panels `[breaks[i], breaks[i+1]]`, splitting
/// the tolerance evenly. Useful when the integrand changes scale.
pub fn adaptive_simpson_panels<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: f64) -> Quadrature {
    let panels = breaks.len().saturating_sub(1).max(1);
    let mut out = Quadrature { value: 0.0, abs_error: 0.0, evaluations: 0 };
    for w in breaks.windows(2) {
        let q = adaptive_simpson(&mut f, w[0], w[1], tol / panels as f64);
        out.value += q.value;
        out.abs_error += q.abs_error;
        out.evaluations += q.evaluations;
    }
    out
}

/// Composite trapezoid rule on arbitrary (sorted) abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}
