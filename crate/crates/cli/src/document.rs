use std::collections::BTreeMap;

use cic_core::dataset::{PanelDataset, Period, SupportFinding};
use cic_core::estimators::{estimate, estimate_curve, EffectEstimate, EffectRequest, Mode};
use cic_core::inference::{bootstrap_ci, BootstrapConfig, ConfidenceInterval};
use cic_core::Result;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub estimates: Vec<EffectEstimate>,
    pub curves: Vec<Curve>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

/// Everything needed to reproduce the document from the same input bytes.
#[derive(Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    /// Hex SHA-256 of the input file.
    pub input_sha256: String,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub settings: BTreeMap<&'static str, String>,
}

/// A quantile-type parameter over a grid of `tau`, as parallel arrays.
#[derive(Debug, Serialize)]
pub struct Curve {
    pub request: EffectRequest,
    pub tau: Vec<f64>,
    pub value: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalInfo>,
    pub out_of_range: usize,
}

#[derive(Debug, Serialize)]
pub struct IntervalInfo {
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub scheme: &'static str,
    pub method: &'static str,
    pub note: &'static str,
}

impl From<&ConfidenceInterval> for IntervalInfo {
    fn from(ci: &ConfidenceInterval) -> Self {
        Self {
            level: ci.level,
            replicates: ci.replicates,
            seed: ci.seed,
            scheme: ci.scheme,
            method: ci.method,
            note: ci.note,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CellSummary {
    pub level: String,
    pub n_pre: usize,
    pub n_post: usize,
    pub share_pre: f64,
    pub share_post: f64,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub cells: Vec<CellSummary>,
    pub support: Vec<SupportFinding>,
    /// Base points mapped from below the support of a time map, summed over
    /// all estimates and curves.
    pub out_of_range_total: usize,
}

pub fn cell_summaries(ds: &PanelDataset) -> Vec<CellSummary> {
    let (pre, post) = (ds.shares(Period::Pre), ds.shares(Period::Post));
    ds.levels()
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| CellSummary {
            level: l.clone(),
            n_pre: ds.cell_at(Period::Pre, i).len(),
            n_post: ds.cell_at(Period::Post, i).len(),
            share_pre: pre[i],
            share_post: post[i],
        })
        .collect()
}

/// Runs every request; quantile-type templates are evaluated over `taus`.
pub fn evaluate(
    ds: &PanelDataset,
    requests: &[EffectRequest],
    taus: &[f64],
    boot: Option<&BootstrapConfig>,
) -> Result<(Vec<EffectEstimate>, Vec<Curve>)> {
    let mut estimates = Vec::new();
    let mut curves = Vec::new();
    for req in requests {
        if req.parameter.is_quantile() {
            let points = estimate_curve(ds, req, taus)?;
            let mut curve = Curve {
                request: {
                    let mut r = points[0].request.clone();
                    r.tau = None;
                    r
                },
                tau: taus.to_vec(),
                value: points.iter().map(|e| e.value).collect(),
                ci_lower: None,
                ci_upper: None,
                interval: None,
                out_of_range: points[0].out_of_range,
            };
            if let Some(cfg) = boot {
                let (mut lo, mut hi) = (Vec::new(), Vec::new());
                for p in &points {
                    let ci = bootstrap_ci(ds, &p.request, cfg)?.interval;
                    lo.push(ci.lower);
                    hi.push(ci.upper);
                    curve.interval.get_or_insert_with(|| IntervalInfo::from(&ci));
                }
                curve.ci_lower = Some(lo);
                curve.ci_upper = Some(hi);
            }
            curves.push(curve);
        } else {
            let mut est = estimate(ds, req)?;
            if let Some(cfg) = boot {
                est.ci = Some(bootstrap_ci(ds, req, cfg)?.interval);
            }
            estimates.push(est);
        }
    }
    Ok((estimates, curves))
}

const CSV_HEADER: [&str; 10] = [
    "parameter",
    "mode",
    "d",
    "d_prime",
    "cond",
    "tau",
    "value",
    "ci_lower",
    "ci_upper",
    "out_of_range",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per estimate and per curve point.
pub fn to_csv(doc: &ResultDocument) -> String {
    let mut rows = vec![CSV_HEADER.join(",")];
    let mut push = |r: &EffectRequest, tau: Option<f64>, value: f64, ci: Option<(f64, f64)>, oor: usize| {
        rows.push(
            [
                r.parameter.to_string(),
                r.mode.to_string(),
                r.d.clone(),
                opt(r.d_prime.as_ref()),
                opt(r.cond.as_ref()),
                opt(tau),
                value.to_string(),
                opt(ci.map(|c| c.0)),
                opt(ci.map(|c| c.1)),
                oor.to_string(),
            ]
            .join(","),
        )
    };
    for e in &doc.estimates {
        push(&e.request, e.request.tau, e.value, e.ci.as_ref().map(|c| (c.lower, c.upper)), e.out_of_range);
    }
    for c in &doc.curves {
        for (i, (&tau, &value)) in c.tau.iter().zip(&c.value).enumerate() {
            let ci = c.ci_lower.as_ref().zip(c.ci_upper.as_ref()).map(|(l, u)| (l[i], u[i]));
            push(&c.request, Some(tau), value, ci, c.out_of_range);
        }
    }
    rows.push(String::new());
    rows.join("\n")
}
