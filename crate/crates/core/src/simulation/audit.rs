//! Empirical check that the group/outcome dependence is stable over time.
//!
//! For an arm `a` and group `d`, the subcopula in period `t` is
//! `C_t(u, p_d) = P(F_{ta}(Y_ta) <= u, D = d)`. Rank stability holds exactly
//! when `C_0 = C_1` and each `u -> C_t(u, p_d)` is strictly increasing.
//! Only the sup distance flags an entry: an empirical subcopula is
//! legitimately flat on grid cells where a group has little rank mass, so
//! strict monotonicity is reported but not enforced.

use serde::Serialize;

use super::config::DgpConfig;
use super::{simulate_panel, LatentTable};
use crate::dataset::Period;
use crate::empirical::SortedSample;
use crate::error::Result;
use crate::estimators::Mode;

/// Interior grid points `u = k / AUDIT_GRID`.
pub const AUDIT_GRID: usize = 50;
pub const AUDIT_ALPHA: f64 = 0.01;

/// Dvoretzky–Kiefer–Wolfowitz radius: `sqrt(ln(2 / alpha) / (2 n))`.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub arm: String,
    pub group: String,
    /// `max_u |C_0(u) - C_1(u)|` over the grid.
    pub sup_distance: f64,
    pub increasing_pre: bool,
    pub increasing_post: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n_per_period: usize,
    pub threshold: f64,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| !e.flagged)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

/// `C_t(u_k, p_d)` for every group, on the grid `k = 1..grid-1`.
fn subcopula(latent: &LatentTable, period: Period, arm: usize, m: usize, grid: usize) -> Option<Vec<Vec<f64>>> {
    let rows: Vec<_> = latent.rows.iter().filter(|r| r.period == period).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.potential[arm]).collect::<Option<_>>()?;
    let n = values.len();
    let marginal = SortedSample::new(values.clone()).ok()?;
    let mut ranks: Vec<Vec<f64>> = vec![Vec::new(); m];
    for (r, y) in rows.iter().zip(&values) {
        ranks[r.group].push(marginal.cdf(*y));
    }
    Some(
        ranks
            .into_iter()
            .map(|mut rs| {
                rs.sort_by(f64::total_cmp);
                (1..grid)
                    .map(|k| {
                        let u = k as f64 / grid as f64;
                        rs.partition_point(|&r| r <= u) as f64 / n as f64
                    })
                    .collect()
            })
            .collect(),
    )
}

fn strictly_increasing(c: &[f64]) -> bool {
    c.windows(2).all(|w| w[1] > w[0])
}

/// Audits the arms whose stability the regime assumes: the control arm in
/// weak mode, every arm in strong mode.
pub fn audit_latent(latent: &LatentTable, mode: Mode, grid: usize) -> AuditReport {
    let m = latent.arms.len();
    let n = latent.rows.iter().filter(|r| r.period == Period::Pre).count();
    let threshold = 2.0 * dkw_bound(n, AUDIT_ALPHA);
    let arms: Vec<usize> = match mode {
        Mode::Weak => vec![0],
        Mode::Strong => (0..m).collect(),
    };
    let mut entries = Vec::new();
    for arm in arms {
        let (Some(pre), Some(post)) = (
            subcopula(latent, Period::Pre, arm, m, grid),
            subcopula(latent, Period::Post, arm, m, grid),
        ) else {
            continue;
        };
        for g in 0..m {
            let sup_distance = pre[g]
                .iter()
                .zip(&post[g])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let (increasing_pre, increasing_post) =
                (strictly_increasing(&pre[g]), strictly_increasing(&post[g]));
            entries.push(AuditEntry {
                arm: latent.arms[arm].clone(),
                group: latent.arms[g].clone(),
                sup_distance,
                increasing_pre,
                increasing_post,
                flagged: sup_distance > threshold,
            });
        }
    }
    AuditReport {
        n_per_period: n,
        threshold,
        entries,
    }
}

/// Simulates `n` units per period and audits the latent arms.
pub fn copula_stability_audit(cfg: &DgpConfig, n: usize, seed: u64) -> Result<AuditReport> {
    let sim = simulate_panel(cfg, n, seed)?;
    Ok(audit_latent(&sim.latent, cfg.mode(), AUDIT_GRID))
}
