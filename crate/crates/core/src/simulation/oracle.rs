//! Exact counterfactual distributions and effects of a known process.
//!
//! With `Y_td = h_td(U)` and `U | D = g ~ Beta(alpha_g, beta_g)` in period
//! `t`, every conditional CDF is `BetaCDF(h_td^-1(y))` and every
//! conditional quantile is `h_td(BetaQuantile(tau))`. Means are integrals
//! of quantile functions over `tau`, evaluated by Gauss–Legendre
//! quadrature.

use serde::Serialize;
use statrs::distribution::ContinuousCDF;

use super::config::DgpConfig;
use super::maps::StructuralMap;
use crate::dataset::Period;
use crate::error::{Error, Result};
use crate::estimators::{EffectRequest, Mode, Parameter};

pub const QUADRATURE_NODES: usize = 512;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let step = p1 / dp;
                z -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 1.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = (1.0 - z) / 2.0;
            nodes[n - 1 - i] = (1.0 + z) / 2.0;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Integrates after the substitution `x = s^3 (10 - 15 s + 6 s^2)`,
    /// whose Jacobian `30 s^2 (1 - s)^2` damps algebraic and logarithmic
    /// endpoint singularities such as those of a quantile function.
    pub fn integrate_smoothed(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.integrate(|s| {
            let x = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
            let jac = 30.0 * s * s * (1.0 - s) * (1.0 - s);
            jac * f(x.clamp(0.0, 1.0))
        })
    }
}

/// Oracle answer; `identified` is false when the request lies outside the
/// set the process's regime identifies (the oracle still knows it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    pub identified: bool,
}

/// Closed-form view of a [`DgpConfig`].
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    cfg: &'a DgpConfig,
    quad: GaussLegendre,
}

impl<'a> Oracle<'a> {
    pub fn new(cfg: &'a DgpConfig) -> Self {
        Self {
            cfg,
            quad: GaussLegendre::new(QUADRATURE_NODES),
        }
    }

    fn idx(&self, level: &str) -> Result<usize> {
        self.cfg.levels().index_of(level)
    }

    fn h(&self, period: Period, arm: usize) -> Result<&StructuralMap> {
        self.cfg.map(period, arm).ok_or_else(|| {
            Error::config(
                format!("levels[{arm}].map_pre"),
                "the process defines no period-0 map for this arm",
            )
        })
    }

    /// `P(Y_{t,arm} <= y | D = group)`.
    pub fn cdf(&self, period: Period, arm: &str, group: &str, y: f64) -> Result<f64> {
        let h = self.h(period, self.idx(arm)?)?;
        let law = self.cfg.rank_law(period, self.idx(group)?);
        Ok(law.dist().cdf(h.inverse(y)))
    }

    /// `P(Y_{t,arm} <= y)` over the whole population.
    pub fn cdf_unconditional(&self, period: Period, arm: &str, y: f64) -> Result<f64> {
        let u = self.h(period, self.idx(arm)?)?.inverse(y);
        Ok(self.mixture_cdf(period, u))
    }

    fn mixture_cdf(&self, period: Period, u: f64) -> f64 {
        self.cfg
            .specs()
            .iter()
            .enumerate()
            .map(|(g, s)| s.prob * self.cfg.rank_law(period, g).dist().cdf(u))
            .sum()
    }

    /// Rank at which the population rank CDF reaches `tau` (bisection).
    fn mixture_rank_quantile(&self, period: Period, tau: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.mixture_cdf(period, mid) < tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn quantile_conditional(&self, period: Period, arm: &str, group: &str, tau: f64) -> Result<f64> {
        let h = self.h(period, self.idx(arm)?)?;
        let law = self.cfg.rank_law(period, self.idx(group)?);
        Ok(h.eval(law.dist().inverse_cdf(tau)))
    }

    pub fn quantile(&self, period: Period, arm: &str, tau: f64) -> Result<f64> {
        let h = self.h(period, self.idx(arm)?)?;
        Ok(h.eval(self.mixture_rank_quantile(period, tau)))
    }

    /// `E(Y_{t,arm} | D = group)` as the integral of the conditional
    /// quantile function.
    pub fn mean_conditional(&self, period: Period, arm: &str, group: &str) -> Result<f64> {
        let h = *self.h(period, self.idx(arm)?)?;
        let law = self.cfg.rank_law(period, self.idx(group)?).dist();
        Ok(self.quad.integrate_smoothed(|tau| h.eval(law.inverse_cdf(tau))))
    }

    pub fn mean(&self, period: Period, arm: &str) -> Result<f64> {
        let mut total = 0.0;
        for (g, s) in self.cfg.specs().iter().enumerate() {
            total += s.prob * self.mean_conditional(period, arm, self.cfg.levels().label(g))?;
        }
        Ok(total)
    }

    /// Interquartile range of `Y_{t,arm}` over the population.
    pub fn iqr(&self, period: Period, arm: &str) -> Result<f64> {
        Ok(self.quantile(period, arm, 0.75)? - self.quantile(period, arm, 0.25)?)
    }

    /// True value of any effect request under the known process.
    pub fn effect(&self, request: &EffectRequest) -> Result<OracleValue> {
        let levels = self.cfg.levels();
        let mut in_mode = request.clone();
        in_mode.mode = self.cfg.mode();
        let identified = match in_mode.resolve(levels) {
            Ok(_) => true,
            Err(Error::NotIdentified { .. }) => false,
            Err(e) => return Err(e),
        };
        let mut strong = request.clone();
        strong.mode = Mode::Strong;
        let r = strong.resolve(levels)?;
        let (d, dp) = (r.d.as_str(), r.d_prime.as_deref().unwrap_or(levels.control()));
        let post = Period::Post;
        let value = match r.parameter {
            Parameter::Qtt => {
                let (tau, c) = (r.tau.unwrap_or(0.5), r.cond.as_deref().unwrap_or(d));
                self.quantile_conditional(post, d, c, tau)? - self.quantile_conditional(post, dp, c, tau)?
            }
            Parameter::Att | Parameter::Acrt => {
                let c = r.cond.as_deref().unwrap_or(d);
                self.mean_conditional(post, d, c)? - self.mean_conditional(post, dp, c)?
            }
            Parameter::Qte => {
                let tau = r.tau.unwrap_or(0.5);
                self.quantile(post, d, tau)? - self.quantile(post, dp, tau)?
            }
            Parameter::Ate | Parameter::Acr => self.mean(post, d)? - self.mean(post, dp)?,
            // the estimand DID targets
            Parameter::DidAtt => {
                let c = levels.control();
                self.mean_conditional(post, d, d)? - self.mean_conditional(post, c, d)?
            }
        };
        Ok(OracleValue { value, identified })
    }
}

/// `P(Y_{t,d} <= y | D = d')` under `cfg`.
pub fn oracle_cdf(cfg: &DgpConfig, period: Period, d: &str, d_prime: &str, y: f64) -> Result<f64> {
    Oracle::new(cfg).cdf(period, d, d_prime, y)
}

pub fn oracle_effect(cfg: &DgpConfig, request: &EffectRequest) -> Result<OracleValue> {
    Oracle::new(cfg).effect(request)
}
