//! Two-period repeated cross-sections indexed by (period, treatment level).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::empirical::SortedSample;
use crate::error::{Error, Result};
use crate::estimators::Mode;

/// Pre-treatment (`0`) or post-treatment (`1`) wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Period {
    Pre,
    Post,
}

impl Period {
    pub const BOTH: [Period; 2] = [Period::Pre, Period::Post];

    pub fn index(self) -> usize {
        match self {
            Period::Pre => 0,
            Period::Post => 1,
        }
    }

    pub fn from_index(t: usize) -> Option<Self> {
        match t {
            0 => Some(Period::Pre),
            1 => Some(Period::Post),
            _ => None,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub outcome: f64,
    pub treatment: String,
    pub period: Period,
}

/// Treatment labels `d_1, ..., d_m`. The first label is the control.
///
/// Labels are opaque; an ordering is only meaningful when `ordered` was
/// supplied explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreatmentLevels {
    labels: Vec<String>,
    ordered: bool,
}

impl TreatmentLevels {
    pub fn new(labels: Vec<String>, ordered: bool) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidLevels(format!(
                "need at least two levels, got {}",
                labels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(Error::InvalidLevels("empty level label".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLevels(format!("duplicate level `{l}`")));
            }
        }
        Ok(Self { labels, ordered })
    }

    /// Ordered levels; the first is the control.
    pub fn ordered<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(labels.into_iter().map(Into::into).collect(), true)
    }

    /// Unordered levels with `control` first.
    pub fn unordered<S: Into<String>>(
        control: impl Into<String>,
        others: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let mut labels = vec![control.into()];
        labels.extend(others.into_iter().map(Into::into));
        Self::new(labels, false)
    }

    pub fn control(&self) -> &str {
        &self.labels[0]
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLevel(label.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Lower,
    Upper,
}

/// A sample range of `level` reaching outside the range of `reference`.
///
/// Sample ranges only approximate population supports, so findings are
/// always warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportFinding {
    pub severity: Severity,
    pub mode: Mode,
    pub level: String,
    pub reference: String,
    pub bound: Bound,
    /// Offending extreme of `level`'s period-0 sample.
    pub value: f64,
    /// Corresponding extreme of `reference`'s period-0 sample.
    pub limit: f64,
}

impl fmt::Display for SupportFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (what, cmp) = match self.bound {
            Bound::Lower => ("min", "<"),
            Bound::Upper => ("max", ">"),
        };
        write!(
            f,
            "WARNING [{}]: level `{}` period-0 {what} {} {cmp} {} ({what} of level `{}`)",
            self.mode, self.level, self.value, self.limit, self.reference
        )
    }
}

pub const DEFAULT_MIN_CELL_SIZE: usize = 2;

/// Validated repeated cross-section with every (period, level) cell
/// materialized as a sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    levels: TreatmentLevels,
    // cells[level][period]
    cells: Vec<[SortedSample; 2]>,
    pooled_pre: SortedSample,
    warnings: Vec<String>,
}

impl PanelDataset {
    pub fn from_observations(
        observations: impl IntoIterator<Item = Observation>,
        levels: TreatmentLevels,
    ) -> Result<Self> {
        Self::from_observations_with_min(observations, levels, DEFAULT_MIN_CELL_SIZE)
    }

    pub fn from_observations_with_min(
        observations: impl IntoIterator<Item = Observation>,
        levels: TreatmentLevels,
        min_cell_size: usize,
    ) -> Result<Self> {
        let mut raw: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; levels.len()];
        for obs in observations {
            if !obs.outcome.is_finite() {
                return Err(Error::InvalidValue(obs.outcome));
            }
            let idx = levels.index_of(&obs.treatment)?;
            raw[idx][obs.period.index()].push(obs.outcome);
        }
        let mut cells = Vec::with_capacity(levels.len());
        for (idx, pair) in raw.into_iter().enumerate() {
            let [pre, post] = pair;
            let wrap = |values: Vec<f64>, period: u8| {
                SortedSample::new(values).map_err(|e| match e {
                    Error::EmptySample => Error::EmptyCell {
                        period,
                        level: levels.label(idx).to_string(),
                    },
                    other => other,
                })
            };
            cells.push([wrap(pre, 0)?, wrap(post, 1)?]);
        }
        Self::from_cells_with_min(levels, cells, min_cell_size)
    }

    /// Builds a dataset directly from per-level `[pre, post]` samples.
    pub fn from_cells(levels: TreatmentLevels, cells: Vec<[SortedSample; 2]>) -> Result<Self> {
        Self::from_cells_with_min(levels, cells, DEFAULT_MIN_CELL_SIZE)
    }

    fn from_cells_with_min(
        levels: TreatmentLevels,
        cells: Vec<[SortedSample; 2]>,
        min_cell_size: usize,
    ) -> Result<Self> {
        if cells.len() != levels.len() {
            return Err(Error::InvalidLevels(format!(
                "{} levels but {} cell pairs",
                levels.len(),
                cells.len()
            )));
        }
        let mut warnings = Vec::new();
        for (idx, pair) in cells.iter().enumerate() {
            for period in Period::BOTH {
                let n = pair[period.index()].len();
                if n < min_cell_size {
                    warnings.push(format!(
                        "cell (period {period}, level `{}`) has {n} observations, below the minimum of {min_cell_size}",
                        levels.label(idx)
                    ));
                }
            }
        }
        let pooled: Vec<f64> = cells
            .iter()
            .flat_map(|pair| pair[0].values().iter().copied())
            .collect();
        let pooled_pre = SortedSample::new(pooled)?;
        Ok(Self {
            levels,
            cells,
            pooled_pre,
            warnings,
        })
    }

    pub fn levels(&self) -> &TreatmentLevels {
        &self.levels
    }

    /// Cell lookup by numeric period and label.
    pub fn cell(&self, period: usize, level: &str) -> Result<&SortedSample> {
        let unknown = || Error::UnknownCell {
            period,
            level: level.to_string(),
        };
        let p = Period::from_index(period).ok_or_else(unknown)?;
        let idx = self.levels.index_of(level).map_err(|_| unknown())?;
        Ok(&self.cells[idx][p.index()])
    }

    pub fn cell_at(&self, period: Period, level_idx: usize) -> &SortedSample {
        &self.cells[level_idx][period.index()]
    }

    pub(crate) fn cells(&self) -> &[[SortedSample; 2]] {
        &self.cells
    }

    /// All period-0 outcomes, every group pooled.
    pub fn pooled_pre(&self) -> &SortedSample {
        &self.pooled_pre
    }

    pub fn n_obs(&self, period: Period) -> usize {
        self.cells.iter().map(|c| c[period.index()].len()).sum()
    }

    /// Group shares `P(D = d)` within `period`, in level order.
    pub fn shares(&self, period: Period) -> Vec<f64> {
        let total = self.n_obs(period) as f64;
        self.cells
            .iter()
            .map(|c| c[period.index()].len() as f64 / total)
            .collect()
    }

    /// Estimated `p_d`, taken from period-1 counts.
    pub fn p_hat(&self) -> Vec<f64> {
        self.shares(Period::Post)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Observations grouped by level, then period, each cell ascending.
    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.cells.iter().enumerate().flat_map(move |(idx, pair)| {
            Period::BOTH.into_iter().flat_map(move |period| {
                pair[period.index()].values().iter().map(move |&y| Observation {
                    outcome: y,
                    treatment: self.levels.label(idx).to_string(),
                    period,
                })
            })
        })
    }

    /// Sample-range proxies for the support conditions.
    ///
    /// Weak mode compares each treated group's period-0 range against the
    /// control's period-0 range. Strong mode compares every group `d'`
    /// against every other group `d` whose time map it is pushed through.
    pub fn support_check(&self, mode: Mode) -> Vec<SupportFinding> {
        let mut findings = Vec::new();
        let m = self.levels.len();
        let pairs: Vec<(usize, usize)> = match mode {
            Mode::Weak => (1..m).map(|d| (d, 0)).collect(),
            Mode::Strong => (0..m)
                .flat_map(|r| (0..m).filter(move |&d| d != r).map(move |d| (d, r)))
                .collect(),
        };
        for (level, reference) in pairs {
            let s = self.cell_at(Period::Pre, level);
            let r = self.cell_at(Period::Pre, reference);
            let mut push = |bound, value, limit| {
                findings.push(SupportFinding {
                    severity: Severity::Warning,
                    mode,
                    level: self.levels.label(level).to_string(),
                    reference: self.levels.label(reference).to_string(),
                    bound,
                    value,
                    limit,
                })
            };
            if s.min() < r.min() {
                push(Bound::Lower, s.min(), r.min());
            }
            if s.max() > r.max() {
                push(Bound::Upper, s.max(), r.max());
            }
        }
        findings
    }
}

/// Column mapping and level configuration for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub outcome: String,
    pub treatment: String,
    pub period: String,
    /// Raw labels of period 0 and period 1.
    pub period_labels: (String, String),
    /// Control label when levels are discovered from the data.
    pub control: String,
    /// Explicit ordered levels, control first. Overrides `control`.
    pub ordered: Option<Vec<String>>,
    pub min_cell_size: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            outcome: "outcome".into(),
            treatment: "treatment".into(),
            period: "period".into(),
            period_labels: ("0".into(), "1".into()),
            control: "0".into(),
            ordered: None,
            min_cell_size: DEFAULT_MIN_CELL_SIZE,
        }
    }
}

pub fn load_csv_path(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<PanelDataset> {
    let file = std::fs::File::open(path)?;
    load_csv(file, opts)
}

/// Reads a headered CSV into a validated dataset.
///
/// Without an explicit ordering, non-control levels are sorted by label so
/// the result does not depend on row order; they carry no ordering.
pub fn load_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (yc, dc, tc) = (
        column(&opts.outcome)?,
        column(&opts.treatment)?,
        column(&opts.period)?,
    );

    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| {
            record.get(c).ok_or_else(|| Error::Parse {
                row,
                message: "too few fields".into(),
            })
        };
        let raw_y = field(yc)?;
        let outcome: f64 = raw_y.parse().map_err(|_| Error::Parse {
            row,
            message: format!("outcome `{raw_y}` is not a number"),
        })?;
        if !outcome.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("outcome `{raw_y}` is not finite"),
            });
        }
        let raw_t = field(tc)?;
        let period = if raw_t == opts.period_labels.0 {
            Period::Pre
        } else if raw_t == opts.period_labels.1 {
            Period::Post
        } else {
            return Err(Error::Parse {
                row,
                message: format!(
                    "period `{raw_t}` is neither `{}` nor `{}`",
                    opts.period_labels.0, opts.period_labels.1
                ),
            });
        };
        let treatment = field(dc)?.to_string();
        if treatment.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty treatment label".into(),
            });
        }
        observations.push((row, Observation {
            outcome,
            treatment,
            period,
        }));
    }

    let levels = match &opts.ordered {
        Some(order) => {
            let levels = TreatmentLevels::new(order.clone(), true)?;
            if let Some((row, obs)) = observations
                .iter()
                .find(|(_, o)| levels.index_of(&o.treatment).is_err())
            {
                return Err(Error::Parse {
                    row: *row,
                    message: format!("treatment `{}` is not among the ordered levels", obs.treatment),
                });
            }
            levels
        }
        None => {
            let others: BTreeMap<&str, ()> = observations
                .iter()
                .map(|(_, o)| o.treatment.as_str())
                .filter(|t| *t != opts.control)
                .map(|t| (t, ()))
                .collect();
            TreatmentLevels::unordered(opts.control.clone(), others.into_keys())?
        }
    };
    PanelDataset::from_observations_with_min(
        observations.into_iter().map(|(_, o)| o),
        levels,
        opts.min_cell_size,
    )
}
