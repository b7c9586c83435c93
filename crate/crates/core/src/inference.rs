//! Stratified nonparametric bootstrap for effect estimates.
//!
//! Intervals are plain percentile intervals. Nothing here carries a
//! theoretical coverage guarantee for these plug-in functionals; the
//! [`ConfidenceInterval::note`] field says so in every output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{PanelDataset, Period};
use crate::empirical::SortedSample;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EffectEstimate, EffectRequest};

pub const SCHEME: &str = "stratified-by-cell";
pub const METHOD: &str = "percentile";
pub const NOTE: &str = "bootstrap-percentile, no theoretical guarantee";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, level: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            replicates,
            level,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidRequest("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidProbability(self.level));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub scheme: &'static str,
    pub method: &'static str,
    pub note: &'static str,
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub interval: ConfidenceInterval,
    /// Replicate estimates in replicate order.
    pub values: Vec<f64>,
}

/// Generator for replicate `r`: the master seed keys the ChaCha stream,
/// the replicate index selects the stream, so replicates are independent
/// of scheduling.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Resamples every (period, level) cell with replacement at its own size.
pub fn resample<R: Rng>(ds: &PanelDataset, rng: &mut R) -> Result<PanelDataset> {
    let cells = ds
        .cells()
        .iter()
        .map(|pair| {
            let draw = |s: &SortedSample, rng: &mut R| {
                let v = s.values();
                SortedSample::new((0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect())
            };
            let pre = draw(&pair[Period::Pre.index()], rng)?;
            let post = draw(&pair[Period::Post.index()], rng)?;
            Ok([pre, post])
        })
        .collect::<Result<Vec<_>>>()?;
    PanelDataset::from_cells(ds.levels().clone(), cells)
}

/// Percentile interval `[Q(alpha/2), Q(1 - alpha/2)]` over replicate values.
pub fn percentile_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    let sorted = SortedSample::from_slice(values)?;
    let alpha = 1.0 - level;
    Ok((sorted.quantile(alpha / 2.0)?, sorted.quantile(1.0 - alpha / 2.0)?))
}

/// Bootstrap interval for `request`. Errors in the request surface from
/// the estimate on the original data before any resampling.
pub fn bootstrap_ci(
    ds: &PanelDataset,
    request: &EffectRequest,
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult> {
    cfg.validate()?;
    estimate(ds, request)?;
    let values = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let replica = resample(ds, &mut rng)?;
            estimate(&replica, request).map(|e| e.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (lower, upper) = percentile_interval(&values, cfg.level)?;
    Ok(BootstrapResult {
        interval: ConfidenceInterval {
            lower,
            upper,
            level: cfg.level,
            replicates: cfg.replicates,
            seed: cfg.seed,
            scheme: SCHEME,
            method: METHOD,
            note: NOTE,
        },
        values,
    })
}

/// Point estimate with its bootstrap interval attached.
pub fn estimate_with_ci(
    ds: &PanelDataset,
    request: &EffectRequest,
    cfg: &BootstrapConfig,
) -> Result<EffectEstimate> {
    let mut est = estimate(ds, request)?;
    est.ci = Some(bootstrap_ci(ds, request, cfg)?.interval);
    Ok(est)
}
