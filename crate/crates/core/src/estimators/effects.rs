use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::counterfactual::{
    counterfactual_strong_conditional, counterfactual_strong_unconditional, counterfactual_weak,
    CounterfactualDistribution,
};
use super::Mode;
use crate::dataset::{PanelDataset, Period, TreatmentLevels};
use crate::empirical::SortedSample;
use crate::error::{Error, Result};
use crate::inference::ConfidenceInterval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Parameter {
    Qte,
    Ate,
    Qtt,
    Att,
    Acr,
    Acrt,
    DidAtt,
}

impl Parameter {
    pub const ALL: [Parameter; 7] = [
        Parameter::Qte,
        Parameter::Ate,
        Parameter::Qtt,
        Parameter::Att,
        Parameter::Acr,
        Parameter::Acrt,
        Parameter::DidAtt,
    ];

    pub fn is_quantile(self) -> bool {
        matches!(self, Parameter::Qte | Parameter::Qtt)
    }

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Qte => "QTE",
            Parameter::Ate => "ATE",
            Parameter::Qtt => "QTT",
            Parameter::Att => "ATT",
            Parameter::Acr => "ACR",
            Parameter::Acrt => "ACRT",
            Parameter::DidAtt => "DID_ATT",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "qte" => Parameter::Qte,
            "ate" => Parameter::Ate,
            "qtt" => Parameter::Qtt,
            "att" => Parameter::Att,
            "acr" => Parameter::Acr,
            "acrt" => Parameter::Acrt,
            "did" | "did_att" => Parameter::DidAtt,
            other => return Err(format!("unknown parameter `{other}`")),
        })
    }
}

/// A parameter together with its arguments.
///
/// Unset `d_prime` / `cond` take their defaults when resolved: the control
/// (or the next lower level for ACR/ACRT) and `d` respectively.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRequest {
    pub parameter: Parameter,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub d: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_prime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond: Option<String>,
}

impl EffectRequest {
    pub fn new(parameter: Parameter, mode: Mode, d: impl Into<String>) -> Self {
        Self {
            parameter,
            mode,
            tau: None,
            d: d.into(),
            d_prime: None,
            cond: None,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_d_prime(mut self, d_prime: impl Into<String>) -> Self {
        self.d_prime = Some(d_prime.into());
        self
    }

    pub fn with_cond(mut self, cond: impl Into<String>) -> Self {
        self.cond = Some(cond.into());
        self
    }

    pub fn qtt(tau: f64, d: &str, d_prime: &str, cond: &str, mode: Mode) -> Self {
        Self::new(Parameter::Qtt, mode, d)
            .with_tau(tau)
            .with_d_prime(d_prime)
            .with_cond(cond)
    }

    pub fn att(d: &str, d_prime: &str, cond: &str, mode: Mode) -> Self {
        Self::new(Parameter::Att, mode, d)
            .with_d_prime(d_prime)
            .with_cond(cond)
    }

    pub fn qte(tau: f64, d: &str, d_prime: &str, mode: Mode) -> Self {
        Self::new(Parameter::Qte, mode, d)
            .with_tau(tau)
            .with_d_prime(d_prime)
    }

    pub fn ate(d: &str, d_prime: &str, mode: Mode) -> Self {
        Self::new(Parameter::Ate, mode, d).with_d_prime(d_prime)
    }

    pub fn acr(d_j: &str, mode: Mode) -> Self {
        Self::new(Parameter::Acr, mode, d_j)
    }

    pub fn acrt(d_j: &str, cond: &str, mode: Mode) -> Self {
        Self::new(Parameter::Acrt, mode, d_j).with_cond(cond)
    }

    pub fn did(d: &str) -> Self {
        Self::new(Parameter::DidAtt, Mode::Weak, d)
    }

    /// Fills defaults and checks the request against `levels` and the
    /// identification regime.
    pub fn resolve(&self, levels: &TreatmentLevels) -> Result<EffectRequest> {
        Ok(Resolved::new(self, levels)?.to_request(self, levels))
    }
}

/// A point estimate with its fully resolved request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    #[serde(flatten)]
    pub request: EffectRequest,
    pub value: f64,
    /// Base points whose rank fell below the support of the map they were
    /// pushed through, summed over both terms.
    pub out_of_range: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, Copy)]
struct Resolved {
    parameter: Parameter,
    mode: Mode,
    tau: Option<f64>,
    d: usize,
    d_prime: usize,
    cond: usize,
}

impl Resolved {
    fn new(req: &EffectRequest, levels: &TreatmentLevels) -> Result<Self> {
        let p = req.parameter;
        let d = levels.index_of(&req.d)?;
        let opt_idx = |o: &Option<String>| o.as_deref().map(|l| levels.index_of(l)).transpose();
        let given_prime = opt_idx(&req.d_prime)?;
        let given_cond = opt_idx(&req.cond)?;

        match (p.is_quantile(), req.tau) {
            (true, None) => {
                return Err(Error::InvalidRequest(format!("{p} requires a quantile level tau")))
            }
            (true, Some(t)) if !(t > 0.0 && t < 1.0) => return Err(Error::InvalidProbability(t)),
            (false, Some(_)) => {
                return Err(Error::InvalidRequest(format!("{p} takes no quantile level")))
            }
            _ => {}
        }

        let no_cond = |c: Option<usize>| match c {
            Some(_) => Err(Error::InvalidRequest(format!("{p} takes no conditioning level"))),
            None => Ok(d),
        };
        let (d_prime, cond) = match p {
            Parameter::Qtt | Parameter::Att => (given_prime.unwrap_or(0), given_cond.unwrap_or(d)),
            Parameter::Qte | Parameter::Ate => (given_prime.unwrap_or(0), no_cond(given_cond)?),
            Parameter::Acr | Parameter::Acrt => {
                if !levels.is_ordered() {
                    return Err(Error::OrderingRequired(p.to_string()));
                }
                if d == 0 {
                    return Err(Error::NoLowerLevel(req.d.clone()));
                }
                if given_prime.is_some_and(|x| x != d - 1) {
                    return Err(Error::InvalidRequest(format!(
                        "{p} compares `{}` with the next lower level `{}`",
                        req.d,
                        levels.label(d - 1)
                    )));
                }
                let cond = if p == Parameter::Acr {
                    no_cond(given_cond)?
                } else {
                    given_cond.unwrap_or(d)
                };
                (d - 1, cond)
            }
            Parameter::DidAtt => {
                if given_prime.is_some_and(|x| x != 0) {
                    return Err(Error::InvalidRequest(
                        "DID_ATT always compares against the control".into(),
                    ));
                }
                (0, no_cond(given_cond)?)
            }
        };

        let resolved = Self {
            parameter: p,
            mode: req.mode,
            tau: req.tau,
            d,
            d_prime,
            cond,
        };
        resolved.check_identified(levels)?;
        Ok(resolved)
    }

    /// Weak rank stability identifies only `QTT(tau, d, 0 | d)` and
    /// `ATT(d, 0 | d)` for treated `d` (hence `ACRT(d_2 | d_2)` when
    /// `d_1` is the control). Strong rank stability identifies everything.
    fn check_identified(&self, levels: &TreatmentLevels) -> Result<()> {
        if self.mode == Mode::Strong || self.parameter == Parameter::DidAtt {
            return Ok(());
        }
        let reason = match self.parameter {
            Parameter::Qte | Parameter::Ate | Parameter::Acr => Some(
                "population-level effects need strong rank stability (every arm's rank law stable over time)"
                    .to_string(),
            ),
            _ if self.d == 0 => Some(format!(
                "weak mode compares a treated level with the control `{}`; `{}` is the control",
                levels.control(),
                levels.label(self.d)
            )),
            _ if self.d_prime != 0 => Some(format!(
                "weak mode identifies only comparisons against the control `{}`; use strong mode for `{}`",
                levels.control(),
                levels.label(self.d_prime)
            )),
            _ if self.cond != self.d => Some(format!(
                "weak mode identifies effects only on the group that received `{}`; use strong mode to condition on `{}`",
                levels.label(self.d),
                levels.label(self.cond)
            )),
            _ => None,
        };
        match reason {
            None => Ok(()),
            Some(reason) => Err(Error::NotIdentified {
                parameter: self.parameter.to_string(),
                mode: self.mode.to_string(),
                reason: format!(
                    "{reason}. Identified set under weak rank stability: QTT(tau, d, {c} | d) and ATT(d, {c} | d) for d != {c}",
                    c = levels.control()
                ),
            }),
        }
    }

    fn to_request(self, req: &EffectRequest, levels: &TreatmentLevels) -> EffectRequest {
        let has_cond = matches!(
            self.parameter,
            Parameter::Qtt | Parameter::Att | Parameter::Acrt
        );
        EffectRequest {
            parameter: self.parameter,
            mode: self.mode,
            tau: self.tau,
            d: req.d.clone(),
            d_prime: Some(levels.label(self.d_prime).to_string()),
            cond: has_cond.then(|| levels.label(self.cond).to_string()),
        }
    }
}

/// One side of a contrast: an observed cell or a counterfactual.
#[allow(clippy::large_enum_variant)] // short-lived, one per side
enum Term<'a> {
    Observed(&'a SortedSample),
    Counterfactual(CounterfactualDistribution),
}

impl Term<'_> {
    fn sample(&self) -> &SortedSample {
        match self {
            Term::Observed(s) => s,
            Term::Counterfactual(cf) => cf.transformed(),
        }
    }

    fn out_of_range(&self) -> usize {
        match self {
            Term::Observed(_) => 0,
            Term::Counterfactual(cf) => cf.out_of_range,
        }
    }
}

/// `Y_1d | D = cond`: observed when `d == cond`, otherwise counterfactual.
fn conditional_term<'a>(
    ds: &'a PanelDataset,
    mode: Mode,
    d: usize,
    cond: usize,
) -> Result<Term<'a>> {
    if d == cond {
        return Ok(Term::Observed(ds.cell_at(Period::Post, d)));
    }
    let levels = ds.levels();
    let cf = match mode {
        // scope checks guarantee d is the control here
        Mode::Weak => counterfactual_weak(ds, levels.label(cond))?,
        Mode::Strong => counterfactual_strong_conditional(ds, levels.label(d), levels.label(cond))?,
    };
    Ok(Term::Counterfactual(cf))
}

fn unconditional_term(ds: &PanelDataset, d: usize) -> Result<Term<'_>> {
    Ok(Term::Counterfactual(counterfactual_strong_unconditional(
        ds,
        ds.levels().label(d),
    )?))
}

fn contrast_terms<'a>(ds: &'a PanelDataset, r: &Resolved) -> Result<(Term<'a>, Term<'a>)> {
    match r.parameter {
        Parameter::Qtt | Parameter::Att | Parameter::Acrt => Ok((
            conditional_term(ds, r.mode, r.d, r.cond)?,
            conditional_term(ds, r.mode, r.d_prime, r.cond)?,
        )),
        Parameter::Qte | Parameter::Ate | Parameter::Acr => {
            Ok((unconditional_term(ds, r.d)?, unconditional_term(ds, r.d_prime)?))
        }
        Parameter::DidAtt => unreachable!("DID has no distributional terms"),
    }
}

fn did_value(ds: &PanelDataset, d: usize) -> f64 {
    let m = |p, i| ds.cell_at(p, i).mean();
    (m(Period::Post, d) - m(Period::Pre, d)) - (m(Period::Post, 0) - m(Period::Pre, 0))
}

/// Point estimate for any supported request.
pub fn estimate(ds: &PanelDataset, request: &EffectRequest) -> Result<EffectEstimate> {
    let r = Resolved::new(request, ds.levels())?;
    let resolved = r.to_request(request, ds.levels());
    if r.parameter == Parameter::DidAtt {
        return Ok(EffectEstimate {
            request: resolved,
            value: did_value(ds, r.d),
            out_of_range: 0,
            ci: None,
        });
    }
    let (minuend, subtrahend) = contrast_terms(ds, &r)?;
    let value = match r.tau {
        Some(tau) => minuend.sample().quantile(tau)? - subtrahend.sample().quantile(tau)?,
        None => minuend.sample().mean() - subtrahend.sample().mean(),
    };
    Ok(EffectEstimate {
        request: resolved,
        value,
        out_of_range: minuend.out_of_range() + subtrahend.out_of_range(),
        ci: None,
    })
}

/// Evaluates a quantile-type request at each `tau`, building the two
/// counterfactual samples once. The `tau` field of `template` is ignored.
pub fn estimate_curve(
    ds: &PanelDataset,
    template: &EffectRequest,
    taus: &[f64],
) -> Result<Vec<EffectEstimate>> {
    if !template.parameter.is_quantile() {
        return Err(Error::InvalidRequest(format!(
            "{} is not a quantile-type parameter",
            template.parameter
        )));
    }
    let Some(&first) = taus.first() else {
        return Ok(Vec::new());
    };
    let mut probe = template.clone();
    probe.tau = Some(first);
    let r = Resolved::new(&probe, ds.levels())?;
    let (minuend, subtrahend) = contrast_terms(ds, &r)?;
    let oor = minuend.out_of_range() + subtrahend.out_of_range();
    taus.iter()
        .map(|&tau| {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidProbability(tau));
            }
            let mut req = template.clone();
            req.tau = Some(tau);
            Ok(EffectEstimate {
                request: r.to_request(&req, ds.levels()),
                value: minuend.sample().quantile(tau)? - subtrahend.sample().quantile(tau)?,
                out_of_range: oor,
                ci: None,
            })
        })
        .collect()
}

/// `F^-1_{Y_1d | D=cond}(tau) - F^-1_{Y_1d' | D=cond}(tau)`.
pub fn qtt(
    ds: &PanelDataset,
    tau: f64,
    d: &str,
    d_prime: &str,
    cond: &str,
    mode: Mode,
) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::qtt(tau, d, d_prime, cond, mode))
}

/// `E(Y_1d - Y_1d' | D = cond)`.
pub fn att(ds: &PanelDataset, d: &str, d_prime: &str, cond: &str, mode: Mode) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::att(d, d_prime, cond, mode))
}

pub fn qte(ds: &PanelDataset, tau: f64, d: &str, d_prime: &str, mode: Mode) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::qte(tau, d, d_prime, mode))
}

pub fn ate(ds: &PanelDataset, d: &str, d_prime: &str, mode: Mode) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::ate(d, d_prime, mode))
}

/// `ATE(d_j, d_{j-1})`; ordered levels only.
pub fn acr(ds: &PanelDataset, d_j: &str, mode: Mode) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::acr(d_j, mode))
}

/// `ATT(d_j, d_{j-1} | cond)`; ordered levels only.
pub fn acrt(ds: &PanelDataset, d_j: &str, cond: &str, mode: Mode) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::acrt(d_j, cond, mode))
}

/// Mean-based difference-in-differences under parallel trends.
pub fn did_att(ds: &PanelDataset, d: &str) -> Result<EffectEstimate> {
    estimate(ds, &EffectRequest::did(d))
}
