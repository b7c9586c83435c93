//! Synthetic repeated cross-sections with known counterfactuals.
//!
//! Each unit draws a group `D` from the level probabilities and a rank `U`
//! from its group's Beta law for that period. The rank drives every
//! potential arm, `Y_td = h_td(U)`. Observed outcomes are `h_00(U)` in
//! period 0 and `h_{1D}(U)` in period 1. Potential outcomes are kept in a
//! separate [`LatentTable`] that estimators never see.

mod audit;
mod config;
mod maps;
mod oracle;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use audit::{
    audit_latent, copula_stability_audit, dkw_bound, AuditEntry, AuditReport, AUDIT_ALPHA,
    AUDIT_GRID,
};
pub use config::{DgpConfig, LevelSpec, RankLaw};
pub use maps::StructuralMap;
pub use oracle::{oracle_cdf, oracle_effect, GaussLegendre, Oracle, OracleValue, QUADRATURE_NODES};

use crate::dataset::{Observation, PanelDataset, Period};
use crate::error::{Error, Result};

/// One simulated unit with all of its potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentRow {
    pub period: Period,
    pub unit: usize,
    pub group: usize,
    pub rank: f64,
    /// `h_{t,arm}(rank)` per arm; `None` where the process defines no map.
    pub potential: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentTable {
    pub arms: Vec<String>,
    pub rows: Vec<LatentRow>,
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub observations: Vec<Observation>,
    pub latent: LatentTable,
}

impl SimulatedPanel {
    pub fn dataset(&self, cfg: &DgpConfig) -> Result<PanelDataset> {
        PanelDataset::from_observations(self.observations.iter().cloned(), cfg.levels().clone())
    }
}

/// Draws `n_per_period` units in each period; deterministic in `seed`.
pub fn simulate_panel(cfg: &DgpConfig, n_per_period: usize, seed: u64) -> Result<SimulatedPanel> {
    let m = cfg.levels().len();
    if n_per_period < 2 * m {
        return Err(Error::config(
            "n",
            format!("need at least {} units per period for {m} levels", 2 * m),
        ));
    }
    let groups = WeightedIndex::new(cfg.probs()).map_err(|e| Error::config("levels[].prob", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::with_capacity(2 * n_per_period);
    let mut rows = Vec::with_capacity(2 * n_per_period);

    for period in Period::BOTH {
        let laws: Vec<rand_distr::Beta<f64>> = (0..m)
            .map(|g| {
                let law = cfg.rank_law(period, g);
                rand_distr::Beta::new(law.alpha, law.beta)
                    .map_err(|e| Error::config(format!("levels[{g}].rank"), e.to_string()))
            })
            .collect::<Result<_>>()?;
        let maps: Vec<_> = (0..m).map(|a| cfg.map(period, a).copied()).collect();
        for unit in 0..n_per_period {
            let group = groups.sample(&mut rng);
            let rank = laws[group].sample(&mut rng);
            let potential: Vec<Option<f64>> = maps.iter().map(|h| h.map(|h| h.eval(rank))).collect();
            let realized = match period {
                Period::Pre => 0,
                Period::Post => group,
            };
            let outcome = potential[realized].expect("observed arm always has a map");
            observations.push(Observation {
                outcome,
                treatment: cfg.levels().label(group).to_string(),
                period,
            });
            rows.push(LatentRow {
                period,
                unit,
                group,
                rank,
                potential,
            });
        }
    }
    Ok(SimulatedPanel {
        observations,
        latent: LatentTable {
            arms: cfg.levels().labels().to_vec(),
            rows,
        },
    })
}

/// Simulates and validates straight into a dataset.
pub fn simulate(cfg: &DgpConfig, n_per_period: usize, seed: u64) -> Result<PanelDataset> {
    simulate_panel(cfg, n_per_period, seed)?.dataset(cfg)
}

/// Writes observations in the `outcome,treatment,period` schema read by
/// [`crate::dataset::load_csv`].
pub fn write_observations_csv<W: Write>(observations: &[Observation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outcome", "treatment", "period"])?;
    for o in observations {
        w.write_record([
            o.outcome.to_string(),
            o.treatment.clone(),
            o.period.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_latent_csv<W: Write>(latent: &LatentTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["period".to_string(), "unit".into(), "treatment".into(), "rank".into()];
    header.extend(latent.arms.iter().map(|a| format!("y_{a}")));
    w.write_record(&header)?;
    for r in &latent.rows {
        let mut rec = vec![
            r.period.to_string(),
            r.unit.to_string(),
            latent.arms[r.group].clone(),
            r.rank.to_string(),
        ];
        rec.extend(r.potential.iter().map(|y| y.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `data.csv` -> `data_latent.csv`.
pub fn latent_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match output.extension() {
        Some(ext) => format!("{stem}_latent.{}", ext.to_string_lossy()),
        None => format!("{stem}_latent"),
    };
    output.with_file_name(name)
}
