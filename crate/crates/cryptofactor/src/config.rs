//! Run configuration, read from a single TOML file.
//!
//! Relative paths are resolved against the config file's directory. Every
//! analysis default is an explicit key; `run.example.toml` at the workspace
//! root lists them all.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use cryptofactor_core::synth::TvlProcess;
use cryptofactor_core::{
    build_calendar, SignalKind, SortConfig, SynthSpec, TvlField, UniverseRule, WeekCalendar,
};
use serde::{Deserialize, Serialize};

use crate::client::ClientConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Cache file written by `ingest`/`synth` and read by `analyze`.
    pub cache: PathBuf,
    /// Series id whose `price` column holds the weekly risk-free rate (decimal).
    pub risk_free_id: String,
    /// Series id whose `market_cap` column holds total crypto market cap.
    pub market_id: String,
    /// Assets requested by `ingest`.
    pub assets: Vec<String>,
    /// Optional `asset_id,categories` CSV merged into ingested records.
    pub categories_sidecar: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            cache: PathBuf::from("cache.csv"),
            risk_free_id: "RISK_FREE".into(),
            market_id: "TOTAL_MARKET".into(),
            assets: Vec::new(),
            categories_sidecar: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalendarConfig {
    pub anchor: NaiveDate,
    pub end: NaiveDate,
    /// Weeks prepended before `anchor` so the first analysis week has a
    /// formation week.
    pub formation_lead_weeks: usize,
}

impl Default for CalendarConfig {
    fn default() -> Self {
        Self {
            anchor: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(),
            end: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
            formation_lead_weeks: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSelection {
    Market,
    ThreeFactor,
    Both,
}

impl ModelSelection {
    pub fn models(self) -> Vec<cryptofactor_core::Model> {
        use cryptofactor_core::Model;
        match self {
            ModelSelection::Market => vec![Model::Market],
            ModelSelection::ThreeFactor => vec![Model::ThreeFactor],
            ModelSelection::Both => vec![Model::Market, Model::ThreeFactor],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Eligible assets needed to form a week's quartiles.
    pub min_breadth: usize,
    /// Only `linear` (h = q(n-1) interpolation) is implemented.
    pub percentile_method: String,
    /// Two-sided level at which a quartile mean counts as significant and
    /// the quartile is regressed.
    pub selection_level: f64,
    pub tvl_fields: Vec<TvlField>,
    /// `tvl_ratio` (level) and/or `dtvl_ratio` (change).
    pub signals: Vec<SignalKind>,
    pub models: ModelSelection,
    /// Years with annual scatter figures; empty means every calendar year.
    pub figure_years: Vec<i32>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            min_breadth: SortConfig::default().min_breadth,
            percentile_method: "linear".into(),
            selection_level: 0.10,
            tvl_fields: vec![TvlField::Total, TvlField::Simple],
            signals: vec![SignalKind::TvlRatio, SignalKind::DtvlRatio],
            models: ModelSelection::Both,
            figure_years: Vec::new(),
        }
    }
}

/// One universe slice of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseVariant {
    pub name: String,
    #[serde(default)]
    pub restrict_categories: Option<BTreeSet<String>>,
}

fn default_variants() -> Vec<UniverseVariant> {
    vec![
        UniverseVariant {
            name: "all".into(),
            restrict_categories: None,
        },
        UniverseVariant {
            name: "L1".into(),
            restrict_categories: Some(["L1".to_string()].into()),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Synthetic-data parameters; the calendar comes from `[calendar]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_assets: usize,
    pub factor_names: Vec<String>,
    pub factor_means: Vec<f64>,
    pub factor_stds: Vec<f64>,
    pub true_alphas: Vec<f64>,
    pub true_betas: Vec<Vec<f64>>,
    pub beta_range: (f64, f64),
    pub other_beta_range: (f64, f64),
    pub resid_std: f64,
    pub rf_mean: f64,
    pub rf_std: f64,
    pub log_mcap_mean: f64,
    pub log_mcap_std: f64,
    pub l1_share: f64,
    pub missing_rate: f64,
    pub tvl: TvlProcess,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let s = SynthSpec::default();
        Self {
            seed: s.seed,
            n_assets: s.n_assets,
            factor_names: s.factor_names,
            factor_means: s.factor_means,
            factor_stds: s.factor_stds,
            true_alphas: s.true_alphas,
            true_betas: s.true_betas,
            beta_range: s.beta_range,
            other_beta_range: s.other_beta_range,
            resid_std: s.resid_std,
            rf_mean: s.rf_mean,
            rf_std: s.rf_std,
            log_mcap_mean: s.log_mcap_mean,
            log_mcap_std: s.log_mcap_std,
            l1_share: s.l1_share,
            missing_rate: s.missing_rate,
            tvl: s.tvl,
        }
    }
}

impl SynthConfig {
    pub fn spec(&self, calendar: &WeekCalendar) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            anchor: calendar.anchor(),
            weeks: calendar.count(),
            n_assets: self.n_assets,
            factor_names: self.factor_names.clone(),
            factor_means: self.factor_means.clone(),
            factor_stds: self.factor_stds.clone(),
            true_alphas: self.true_alphas.clone(),
            true_betas: self.true_betas.clone(),
            beta_range: self.beta_range,
            other_beta_range: self.other_beta_range,
            resid_std: self.resid_std,
            rf_mean: self.rf_mean,
            rf_std: self.rf_std,
            log_mcap_mean: self.log_mcap_mean,
            log_mcap_std: self.log_mcap_std,
            l1_share: self.l1_share,
            missing_rate: self.missing_rate,
            tvl: self.tvl.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub client: ClientConfig,
    pub calendar: CalendarConfig,
    pub universe: UniverseRule,
    pub analysis: AnalysisConfig,
    pub universes: Vec<UniverseVariant>,
    pub output: OutputConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    /// The standard grid with `all` and `L1` universe slices.
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            client: ClientConfig::default(),
            calendar: CalendarConfig::default(),
            universe: UniverseRule::default(),
            analysis: AnalysisConfig::default(),
            universes: default_variants(),
            output: OutputConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse, validate, and resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.cache);
        if let Some(p) = self.data.categories_sidecar.as_mut() {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let c = &self.calendar;
        if let Err(e) = build_calendar(c.anchor, c.end) {
            problems.push(format!("calendar: {e}"));
        }
        if self.universe.top_n == 0 {
            problems.push("universe.top_n must be at least 1".into());
        }
        let a = &self.analysis;
        if a.min_breadth < 4 {
            problems.push("analysis.min_breadth must be at least 4".into());
        }
        if a.percentile_method != "linear" {
            problems.push(format!(
                "analysis.percentile_method `{}` is not supported (use `linear`)",
                a.percentile_method
            ));
        }
        if !(a.selection_level > 0.0 && a.selection_level <= 1.0) {
            problems.push("analysis.selection_level must be in (0, 1]".into());
        }
        if a.tvl_fields.is_empty() || a.signals.is_empty() {
            problems.push("analysis.tvl_fields and analysis.signals must be nonempty".into());
        }
        if a.tvl_fields.iter().collect::<BTreeSet<_>>().len() != a.tvl_fields.len() {
            problems.push("analysis.tvl_fields has duplicates".into());
        }
        for s in &a.signals {
            if !matches!(s, SignalKind::TvlRatio | SignalKind::DtvlRatio) {
                problems.push(format!("analysis.signals: {s:?} is not a TVL signal"));
            }
        }
        if self.universes.is_empty() {
            problems.push("at least one [[universes]] entry is required".into());
        }
        let mut names = BTreeSet::new();
        for u in &self.universes {
            let safe = !u.name.is_empty()
                && u.name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
            if !safe {
                problems.push(format!(
                    "universes: name `{}` must be nonempty [A-Za-z0-9_-]",
                    u.name
                ));
            }
            if !names.insert(u.name.as_str()) {
                problems.push(format!("universes: duplicate name `{}`", u.name));
            }
        }
        if self.data.risk_free_id == self.data.market_id {
            problems.push("data.risk_free_id and data.market_id must differ".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// The analysis calendar with the formation lead prepended.
    pub fn panel_calendar(&self) -> Result<WeekCalendar> {
        let c = &self.calendar;
        build_calendar(c.anchor, c.end)
            .map(|cal| cal.extend_back(c.formation_lead_weeks))
            .map_err(|e| Error::Config(format!("calendar: {e}")))
    }

    pub fn sort_config(&self) -> SortConfig {
        SortConfig {
            min_breadth: self.analysis.min_breadth,
        }
    }

    pub fn universe_rule(&self, variant: &UniverseVariant) -> UniverseRule {
        UniverseRule {
            restrict_categories: variant
                .restrict_categories
                .clone()
                .or(self.universe.restrict_categories.clone()),
            ..self.universe.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_standard_grid() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.panel_calendar().unwrap().count(), 106);
    }

    #[test]
    fn example_file_spells_out_the_defaults() {
        let text = include_str!("../../../run.example.toml");
        assert_eq!(RunConfig::from_toml(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let err =
            RunConfig::from_toml("[analysis]\nmin_breadth = 2\npercentile_method = \"nearest\"\n")
                .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("min_breadth") && msg.contains("percentile_method"),
            "{msg}"
        );
        assert!(RunConfig::from_toml("[analysis]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml(
            "[calendar]\nanchor = \"2023-01-02\"\nend = \"2023-01-03\"\n"
        )
        .is_err());
    }
}
