use serde::{Deserialize, Serialize};

use super::maps::StructuralMap;
use crate::dataset::{Period, TreatmentLevels};
use crate::error::{Error, Result};
use crate::estimators::Mode;

/// `Beta(alpha, beta)` law of a group's rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl RankLaw {
    pub const UNIFORM: RankLaw = RankLaw {
        alpha: 1.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub(crate) fn dist(&self) -> statrs::distribution::Beta {
        statrs::distribution::Beta::new(self.alpha, self.beta).expect("validated beta law")
    }
}

/// One treatment level of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub name: String,
    pub prob: f64,
    /// Rank law of the group in period 0, and in period 1 unless
    /// `rank_post` overrides it.
    pub rank: RankLaw,
    /// Period-1 rank law. Setting it to something other than `rank` breaks
    /// rank stability on purpose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_post: Option<RankLaw>,
    /// `h_0d`, the period-0 map of this level's potential outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_pre: Option<StructuralMap>,
    /// `h_1d`, the period-1 map of this level's potential outcome.
    pub map_post: StructuralMap,
}

impl LevelSpec {
    pub fn new(name: impl Into<String>, prob: f64, rank: RankLaw, map_post: StructuralMap) -> Self {
        Self {
            name: name.into(),
            prob,
            rank,
            rank_post: None,
            map_pre: None,
            map_post,
        }
    }

    pub fn with_map_pre(mut self, h: StructuralMap) -> Self {
        self.map_pre = Some(h);
        self
    }

    pub fn with_rank_post(mut self, law: RankLaw) -> Self {
        self.rank_post = Some(law);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    #[serde(default)]
    ordered: bool,
    levels: Vec<LevelSpec>,
}

/// A validated data-generating process. The first level is the control.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    mode: Mode,
    levels: TreatmentLevels,
    specs: Vec<LevelSpec>,
}

impl DgpConfig {
    pub fn new(mode: Mode, ordered: bool, specs: Vec<LevelSpec>) -> Result<Self> {
        let levels = TreatmentLevels::new(specs.iter().map(|s| s.name.clone()).collect(), ordered)
            .map_err(|e| Error::config("levels", e.to_string()))?;
        for (i, s) in specs.iter().enumerate() {
            let key = |field: &str| format!("levels[{i}].{field}");
            if !(s.prob > 0.0 && s.prob < 1.0) {
                return Err(Error::config(key("prob"), format!("must lie in (0, 1), got {}", s.prob)));
            }
            for (field, law) in [("rank", Some(s.rank)), ("rank_post", s.rank_post)] {
                if let Some(law) = law {
                    let ok = |x: f64| x.is_finite() && x > 0.0;
                    if !(ok(law.alpha) && ok(law.beta)) {
                        return Err(Error::config(
                            key(field),
                            format!("alpha and beta must be positive, got ({}, {})", law.alpha, law.beta),
                        ));
                    }
                }
            }
            s.map_post.validate().map_err(|m| Error::config(key("map_post"), m))?;
            match (&s.map_pre, mode, i) {
                (Some(h), _, _) => h.validate().map_err(|m| Error::config(key("map_pre"), m))?,
                (None, Mode::Strong, _) => {
                    return Err(Error::config(key("map_pre"), "strong mode needs a period-0 map for every level"))
                }
                (None, Mode::Weak, 0) => {
                    return Err(Error::config(key("map_pre"), "the control level needs a period-0 map"))
                }
                (None, Mode::Weak, _) => {}
            }
        }
        let total: f64 = specs.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("levels[].prob", format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self {
            mode,
            levels,
            specs,
        })
    }

    /// Parses the declarative TOML form:
    ///
    /// ```toml
    /// mode = "strong"
    /// ordered = true
    ///
    /// [[levels]]
    /// name = "0"
    /// prob = 0.5
    /// rank = { alpha = 2.0, beta = 3.0 }
    /// map_pre = { kind = "identity" }
    /// map_post = { kind = "affine", a = 2.0, b = 0.0 }
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "<document>".into());
            Error::config(key, e.message().to_string())
        })?;
        Self::new(raw.mode, raw.ordered, raw.levels)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig {
            mode: self.mode,
            ordered: self.levels.is_ordered(),
            levels: self.specs.clone(),
        };
        toml::to_string(&raw).expect("config serializes")
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn levels(&self) -> &TreatmentLevels {
        &self.levels
    }

    pub fn specs(&self) -> &[LevelSpec] {
        &self.specs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.prob).collect()
    }

    /// Rank law of `group` in `period`.
    pub fn rank_law(&self, period: Period, group: usize) -> RankLaw {
        let s = &self.specs[group];
        match period {
            Period::Pre => s.rank,
            Period::Post => s.rank_post.unwrap_or(s.rank),
        }
    }

    /// `h_{t,arm}`, if the process defines it.
    pub fn map(&self, period: Period, arm: usize) -> Option<&StructuralMap> {
        let s = &self.specs[arm];
        match period {
            Period::Pre => s.map_pre.as_ref(),
            Period::Post => Some(&s.map_post),
        }
    }

    /// Whether any group's rank law changes between periods.
    pub fn has_rank_drift(&self) -> bool {
        self.specs.iter().any(|s| s.rank_post.is_some_and(|p| p != s.rank))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEAK: &str = r#"
mode = "weak"

[[levels]]
name = "0"
prob = 0.5
rank = { alpha = 2.0, beta = 3.0 }
map_pre = { kind = "identity" }
map_post = { kind = "affine", a = 2.0, b = 0.0 }

[[levels]]
name = "A"
prob = 0.5
rank = { alpha = 3.0, beta = 2.0 }
map_post = { kind = "exp_affine", a = 1.0, b = 0.0 }
"#;

    #[test]
    fn parses_weak_config() {
        let cfg = DgpConfig::from_toml_str(WEAK).unwrap();
        assert_eq!(cfg.mode(), Mode::Weak);
        assert_eq!(cfg.levels().labels(), &["0", "A"]);
        assert!(cfg.map(Period::Pre, 1).is_none());
        assert_eq!(cfg.rank_law(Period::Post, 1), RankLaw::new(3.0, 2.0));
        assert!(!cfg.has_rank_drift());
        let again = DgpConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let bad = WEAK.replacen("prob = 0.5", "prob = 0.6", 1);
        match DgpConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert!(key.contains("prob")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_probability_rejected() {
        let specs = vec![
            LevelSpec::new("0", 1.0, RankLaw::UNIFORM, StructuralMap::Identity)
                .with_map_pre(StructuralMap::Identity),
            LevelSpec::new("A", 0.0, RankLaw::UNIFORM, StructuralMap::Identity),
        ];
        match DgpConfig::new(Mode::Weak, false, specs) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "levels[0].prob"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strong_mode_needs_every_period_zero_map() {
        let strong = WEAK.replacen("\"weak\"", "\"strong\"", 1);
        match DgpConfig::from_toml_str(&strong) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "levels[1].map_pre"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let broken = WEAK.replacen("alpha = 2.0", "alpha = ", 1);
        match DgpConfig::from_toml_str(&broken) {
            Err(Error::Config { key, .. }) => assert!(key.starts_with("line "), "{key}"),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = WEAK.replacen("prob = 0.5", "prob = 0.5\nprobb = 1", 1);
        assert!(DgpConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn bad_rank_law_and_map() {
        let bad = WEAK.replacen("alpha = 2.0", "alpha = -2.0", 1);
        match DgpConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "levels[0].rank"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = WEAK.replacen("\"affine\", a = 2.0", "\"affine\", a = -2.0", 1);
        match DgpConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "levels[0].map_post"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
