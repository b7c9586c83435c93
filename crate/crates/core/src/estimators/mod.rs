//! Plug-in estimators of counterfactual distributions and effect parameters.
//!
//! Two identification regimes are supported:
//!
//! - [`Mode::Weak`]: the untreated rank distribution of every group is
//!   stable over time. Only the effect of each treated level against the
//!   control, on that level's own group, is identified.
//! - [`Mode::Strong`]: every arm's rank distribution within every group is
//!   stable over time. All quantile and average effects are identified.

mod counterfactual;
mod effects;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use counterfactual::{
    counterfactual_strong_conditional, counterfactual_strong_unconditional, counterfactual_weak,
    BaseRef, CellRef, Composition, CounterfactualDistribution, CounterfactualKind,
};
pub use effects::{
    acr, acrt, ate, att, did_att, estimate, estimate_curve, qte, qtt, EffectEstimate,
    EffectRequest, Parameter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Weak,
    Strong,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Weak => "weak",
            Mode::Strong => "strong",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "weak" => Ok(Mode::Weak),
            "strong" => Ok(Mode::Strong),
            other => Err(format!("unknown mode `{other}` (expected weak|strong)")),
        }
    }
}
