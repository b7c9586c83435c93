//! Changes-in-changes estimation for discrete, multi-valued treatments.
//!
//! Given a two-period repeated cross-section in which groups receive one of
//! `m` treatment levels between the periods, this crate recovers
//! counterfactual outcome distributions by composing empirical CDFs and
//! quantile functions, and reports quantile and average effects (QTE, ATE,
//! QTT, ATT, and for ordered levels ACR and ACRT) plus a mean-based
//! difference-in-differences comparator.
//!
//! - [`empirical`]: exact ECDF / quantile primitives.
//! - [`dataset`]: CSV ingestion and (period, level) cells.
//! - [`estimators`]: counterfactual distributions and effect parameters.
//! - [`inference`]: stratified bootstrap intervals.
//! - [`simulation`]: processes with closed-form oracles, and a copula audit.

pub mod dataset;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod simulation;

pub use dataset::{load_csv, load_csv_path, CsvOptions, Observation, PanelDataset, Period, TreatmentLevels};
pub use empirical::{rank_map, SortedSample};
pub use error::{Error, Result};
pub use estimators::{EffectEstimate, EffectRequest, Mode, Parameter};
