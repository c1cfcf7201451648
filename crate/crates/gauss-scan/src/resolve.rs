//! Resolution of the constants a setting needs, through the cache when
//! one is configured.

use serde::{Deserialize, Serialize};

use gauss_scan_core::constants::{
    e_d_of, estimate_e_d_continuous, integrate_g_d, integrate_j_d, ConstantEstimate, GridMcParams, JIntegral, JProfile,
    JQuadParams, Method, Provenance,
};
use gauss_scan_core::theory::Setting;
use gauss_scan_core::{Executor, Result};

use crate::cache::{ConstantCache, Lookup};
use crate::report::ConstantUsed;

/// Tolerance for the deterministic `G_d` quadrature.
pub const G_TOL: f64 = 1e-10;

/// Monte Carlo plan for `E_d(kappa)`, `E_d` and `J_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub replications: usize,
    pub seed: u64,
    /// Walk horizon `T`; `None` uses 48 for `d = 1` and 24 otherwise.
    pub horizon: Option<f64>,
    pub quad: JQuadParams,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { replications: 10_000, seed: 20_240_901, horizon: None, quad: JQuadParams::default() }
    }
}

impl McOptions {
    pub fn grid(&self) -> GridMcParams {
        GridMcParams { replications: self.replications, horizon: self.horizon, seed: self.seed }
    }
}

/// A constant together with the `J_d(h)` profile when it has one.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub name: String,
    pub d: usize,
    pub estimate: ConstantEstimate,
    pub profile: Option<JProfile>,
}

impl Resolved {
    pub fn used(&self) -> ConstantUsed {
        ConstantUsed::new(self.name.clone(), Some(self.d), &self.estimate)
    }
}

pub struct Resolver<'a, E: Executor> {
    pub mc: &'a McOptions,
    pub cache: Option<&'a ConstantCache>,
    pub exec: &'a E,
    pub quiet: bool,
}

impl<E: Executor> Resolver<'_, E> {
    fn log(&self, what: &str, lookup: Option<Lookup>) {
        if self.quiet {
            return;
        }
        let how = match lookup {
            Some(Lookup::Hit) => " (cache hit)",
            Some(Lookup::Miss) => " (computed, cached)",
            None => "",
        };
        eprintln!("gauss-scan: {what}{how}");
    }

    fn cached<T, F>(&self, name: &str, d: usize, compute: F) -> Result<T>
    where
        T: Serialize + for<'de> Deserialize<'de>,
        F: FnOnce() -> Result<T>,
    {
        match self.cache {
            Some(c) => {
                let (v, l) = c.get_or_compute(name, d, self.mc, compute)?;
                self.log(&format!("{name}_{d}"), Some(l));
                Ok(v)
            }
            None => {
                self.log(&format!("computing {name}_{d}"), None);
                compute()
            }
        }
    }

    pub fn g_d(&self, d: usize) -> Result<ConstantEstimate> {
        integrate_g_d(d, G_TOL)
    }

    /// `J_d` by the Monte Carlo quadrature.
    pub fn j_d(&self, d: usize) -> Result<JIntegral> {
        self.cached("J", d, || integrate_j_d(d, &self.mc.grid(), &self.mc.quad, self.exec))
    }

    /// Continuum `E_d`. At `d = 1` it is `F(0)^2 = 1/4` exactly.
    pub fn e_d(&self, d: usize) -> Result<ConstantEstimate> {
        if d == 1 {
            return Ok(ConstantEstimate {
                value: 0.25,
                abs_error: 0.0,
                method: Method::Series,
                params: Provenance { d: Some(1), ..Provenance::default() },
            });
        }
        let kappas = self.mc.quad.fit_kappas(d)?;
        self.cached("E", d, || estimate_e_d_continuous(d, &kappas, &self.mc.grid(), self.exec))
    }

    /// `E_d(kappa)` on the grid.
    pub fn e_d_grid(&self, d: usize, kappa: f64) -> Result<ConstantEstimate> {
        e_d_of(kappa, d, &self.mc.grid(), self.exec)
    }

    /// The constant a setting's normalizer needs, if any.
    ///
    /// The discrete cube constant at `d = 1` is `J_1 = G_1`, taken from the
    /// deterministic series path.
    pub fn for_setting(&self, family: Setting, d: usize) -> Result<Option<Resolved>> {
        Ok(match family {
            Setting::Iid | Setting::ContinuousRect => None,
            Setting::DiscreteRect => Some(Resolved { name: "G".into(), d, estimate: self.g_d(d)?, profile: None }),
            Setting::DiscreteCube if d == 1 => {
                Some(Resolved { name: "J".into(), d, estimate: self.g_d(1)?, profile: None })
            }
            Setting::DiscreteCube => {
                let j = self.j_d(d)?;
                Some(Resolved { name: "J".into(), d, estimate: j.estimate, profile: Some(j.profile) })
            }
            Setting::ContinuousCube => Some(Resolved { name: "E".into(), d, estimate: self.e_d(d)?, profile: None }),
        })
    }
}
