use serde::Serialize;

use crate::dataset::{PanelDataset, Period};
use crate::empirical::{rank_map, SortedSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CounterfactualKind {
    /// `Y_10 | D = d` under weak rank stability.
    WeakConditional { d: String },
    /// `Y_1d` over the whole population under strong rank stability.
    StrongUnconditional { d: String },
    /// `Y_1d | D = d'` under strong rank stability.
    StrongConditional { d: String, d_prime: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellRef {
    pub period: Period,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseRef {
    Cell(CellRef),
    PooledPre,
}

/// The three samples a counterfactual is built from: base points are pushed
/// through `Q_{map_to} ∘ F_{map_from}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Composition {
    pub map_from: CellRef,
    pub map_to: CellRef,
    pub base: BaseRef,
}

/// An identified counterfactual distribution, held as the transformed base
/// sample.
#[derive(Debug, Clone)]
pub struct CounterfactualDistribution {
    pub kind: CounterfactualKind,
    pub composition: Composition,
    /// Base points below the `map_from` sample minimum (their rank is 0 and
    /// they land on the `map_to` minimum).
    pub out_of_range: usize,
    transformed: SortedSample,
    map_from: SortedSample,
    map_to: SortedSample,
    base: SortedSample,
}

impl CounterfactualDistribution {
    fn build(
        kind: CounterfactualKind,
        composition: Composition,
        map_from: &SortedSample,
        map_to: &SortedSample,
        base: &SortedSample,
    ) -> Result<Self> {
        let (from, to) = (map_from.ecdf(), map_to.quantile_fn());
        let mapped: Vec<f64> = base.values().iter().map(|&x| rank_map(x, from, to)).collect();
        let out_of_range = base.count_lt(map_from.min());
        Ok(Self {
            kind,
            composition,
            out_of_range,
            transformed: SortedSample::new(mapped)?,
            map_from: map_from.clone(),
            map_to: map_to.clone(),
            base: base.clone(),
        })
    }

    pub fn transformed(&self) -> &SortedSample {
        &self.transformed
    }

    pub fn quantile(&self, tau: f64) -> Result<f64> {
        self.transformed.quantile(tau)
    }

    pub fn mean(&self) -> f64 {
        self.transformed.mean()
    }

    /// ECDF of the transformed sample.
    pub fn ecdf(&self, y: f64) -> f64 {
        self.transformed.cdf(y)
    }

    /// CDF by direct composition `F_base(Q_from(F_to(y)))`.
    ///
    /// The inner inverse is the right-continuous one and the outer CDF is
    /// taken as a left limit, which makes this agree with [`Self::ecdf`]
    /// at every `y`. With the lower inverse the two differ wherever a base
    /// point sits strictly between two reference points sharing a CDF level.
    pub fn cdf(&self, y: f64) -> f64 {
        let t = self.map_to.cdf(y);
        if t == 0.0 {
            return 0.0;
        }
        match self.map_from.upper_quantile(t) {
            None => 1.0,
            Some(z) => self.base.count_lt(z) as f64 / self.base.len() as f64,
        }
    }
}

fn cell_ref(ds: &PanelDataset, period: Period, idx: usize) -> CellRef {
    CellRef {
        period,
        level: ds.levels().label(idx).to_string(),
    }
}

/// Counterfactual period-1 untreated outcomes of group `d` (weak mode):
/// group `d`'s period-0 outcomes pushed through the control's time map.
pub fn counterfactual_weak(ds: &PanelDataset, d: &str) -> Result<CounterfactualDistribution> {
    let idx = ds.levels().index_of(d)?;
    if idx == 0 {
        return Err(Error::SelfCounterfactual(d.to_string()));
    }
    CounterfactualDistribution::build(
        CounterfactualKind::WeakConditional { d: d.to_string() },
        Composition {
            map_from: cell_ref(ds, Period::Pre, 0),
            map_to: cell_ref(ds, Period::Post, 0),
            base: BaseRef::Cell(cell_ref(ds, Period::Pre, idx)),
        },
        ds.cell_at(Period::Pre, 0),
        ds.cell_at(Period::Post, 0),
        ds.cell_at(Period::Pre, idx),
    )
}

/// Population distribution of `Y_1d` (strong mode): the pooled period-0
/// sample pushed through group `d`'s time map.
pub fn counterfactual_strong_unconditional(
    ds: &PanelDataset,
    d: &str,
) -> Result<CounterfactualDistribution> {
    let idx = ds.levels().index_of(d)?;
    CounterfactualDistribution::build(
        CounterfactualKind::StrongUnconditional { d: d.to_string() },
        Composition {
            map_from: cell_ref(ds, Period::Pre, idx),
            map_to: cell_ref(ds, Period::Post, idx),
            base: BaseRef::PooledPre,
        },
        ds.cell_at(Period::Pre, idx),
        ds.cell_at(Period::Post, idx),
        ds.pooled_pre(),
    )
}

/// Distribution of `Y_1d` for group `d_prime` (strong mode): group
/// `d_prime`'s period-0 outcomes pushed through group `d`'s time map.
pub fn counterfactual_strong_conditional(
    ds: &PanelDataset,
    d: &str,
    d_prime: &str,
) -> Result<CounterfactualDistribution> {
    let idx = ds.levels().index_of(d)?;
    let idx_prime = ds.levels().index_of(d_prime)?;
    CounterfactualDistribution::build(
        CounterfactualKind::StrongConditional {
            d: d.to_string(),
            d_prime: d_prime.to_string(),
        },
        Composition {
            map_from: cell_ref(ds, Period::Pre, idx),
            map_to: cell_ref(ds, Period::Post, idx),
            base: BaseRef::Cell(cell_ref(ds, Period::Pre, idx_prime)),
        },
        ds.cell_at(Period::Pre, idx),
        ds.cell_at(Period::Post, idx),
        ds.cell_at(Period::Pre, idx_prime),
    )
}
