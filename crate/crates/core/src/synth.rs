//! Ground-truth synthetic panels drawn from a known linear factor model.
//!
//! Weekly asset returns are `rf + α + βᵀf + ε` with Gaussian factors and
//! residuals. Factor 0 is the excess market return; the total market cap
//! series is integrated from it so the constructed market factor equals the
//! drawn one exactly. TVL/MC follows an independent lognormal random walk,
//! optionally paired with an alpha earned by the top TVL/MC quartile.
//!
//! Every asset draws from its own ChaCha stream, so output depends only on
//! the seed and never on generation order.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::calendar::WeekCalendar;
use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::panel::{AssetObservation, AssetPanel};
use crate::portfolio::{quartile_of, SortConfig};
use crate::series::ReturnSeries;

/// Weekly returns are floored here so prices stay positive.
pub const RETURN_FLOOR: f64 = -0.95;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TvlProcess {
    pub initial_log_ratio_mean: f64,
    pub initial_log_ratio_std: f64,
    /// Weekly innovation std of `ln(TVL/MC)`.
    pub step_std: f64,
    /// Simple TVL is this share of total TVL, drawn uniformly per asset.
    pub simple_share_min: f64,
    pub simple_share_max: f64,
    /// Extra return (pp/week) earned in week `t` by assets in the top
    /// TVL/MC quartile at `t - 1`. Zero makes TVL pricing-irrelevant.
    pub priced_alpha: f64,
}

impl Default for TvlProcess {
    fn default() -> Self {
        Self {
            initial_log_ratio_mean: libm::log(0.1),
            initial_log_ratio_std: 1.0,
            step_std: 0.1,
            simple_share_min: 0.3,
            simple_share_max: 0.7,
            priced_alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthSpec {
    pub seed: u64,
    pub anchor: NaiveDate,
    /// Calendar points; returns exist for `weeks - 1` of them.
    pub weeks: usize,
    pub n_assets: usize,
    pub factor_names: Vec<String>,
    /// pp/week.
    pub factor_means: Vec<f64>,
    /// pp/week.
    pub factor_stds: Vec<f64>,
    /// pp/week per asset; empty means all zero.
    pub true_alphas: Vec<f64>,
    /// Per asset, per factor; empty means drawn from `beta_range` for the
    /// market factor and `other_beta_range` for the rest.
    pub true_betas: Vec<Vec<f64>>,
    pub beta_range: (f64, f64),
    pub other_beta_range: (f64, f64),
    /// pp/week.
    pub resid_std: f64,
    /// pp/week.
    pub rf_mean: f64,
    /// pp/week.
    pub rf_std: f64,
    pub log_mcap_mean: f64,
    pub log_mcap_std: f64,
    /// Probability an asset is tagged `L1`.
    pub l1_share: f64,
    /// Probability a price cell is blanked after generation.
    pub missing_rate: f64,
    pub tvl: TvlProcess,
}

impl Default for SynthSpec {
    /// Market factor moments from the 2023-2024 weekly sample (1.44 / 6.39
    /// pp) plus a zero-mean altcoin-wide shock that leaves alphas at zero
    /// but makes portfolio residuals co-move.
    fn default() -> Self {
        Self {
            seed: 0,
            anchor: NaiveDate::from_ymd_opt(2022, 12, 26).unwrap(),
            weeks: 106,
            n_assets: 80,
            factor_names: vec!["CM".into(), "ALT".into()],
            factor_means: vec![1.44, 0.0],
            factor_stds: vec![6.39, 3.5],
            true_alphas: Vec::new(),
            true_betas: Vec::new(),
            beta_range: (0.5, 2.0),
            other_beta_range: (0.5, 1.5),
            resid_std: 4.0,
            rf_mean: 0.09,
            rf_std: 0.01,
            log_mcap_mean: libm::log(2e9),
            log_mcap_std: 1.0,
            l1_share: 0.4,
            missing_rate: 0.0,
            tvl: TvlProcess::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let k = self.factor_names.len();
        if k == 0 {
            problems.push(String::from(
                "factor_names: at least the market factor is required",
            ));
        }
        if self.factor_means.len() != k {
            problems.push(format!("factor_means: expected {k} entries"));
        }
        if self.factor_stds.len() != k {
            problems.push(format!("factor_stds: expected {k} entries"));
        }
        if self.factor_stds.iter().any(|s| !(*s > 0.0)) {
            problems.push(String::from("factor_stds: must be > 0"));
        }
        if self.weeks < 10 {
            problems.push(String::from("weeks: must be >= 10"));
        }
        if self.n_assets < 8 {
            problems.push(String::from("n_assets: must be >= 8"));
        }
        if !self.true_alphas.is_empty() && self.true_alphas.len() != self.n_assets {
            problems.push(format!("true_alphas: expected {} entries", self.n_assets));
        }
        if !self.true_betas.is_empty()
            && (self.true_betas.len() != self.n_assets
                || self.true_betas.iter().any(|b| b.len() != k))
        {
            problems.push(format!(
                "true_betas: expected {} rows of {k}",
                self.n_assets
            ));
        }
        if !(self.resid_std >= 0.0) {
            problems.push(String::from("resid_std: must be >= 0"));
        }
        if !(self.rf_std >= 0.0) {
            problems.push(String::from("rf_std: must be >= 0"));
        }
        if !(self.log_mcap_std >= 0.0) {
            problems.push(String::from("log_mcap_std: must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.l1_share) {
            problems.push(String::from("l1_share: must be in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            problems.push(String::from("missing_rate: must be in [0, 1)"));
        }
        let t = &self.tvl;
        if !(t.step_std >= 0.0 && t.initial_log_ratio_std >= 0.0) {
            problems.push(String::from("tvl: stds must be >= 0"));
        }
        if !(0.0 <= t.simple_share_min
            && t.simple_share_min <= t.simple_share_max
            && t.simple_share_max <= 1.0)
        {
            problems.push(String::from(
                "tvl: need 0 <= simple_share_min <= simple_share_max <= 1",
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems))
        }
    }
}

/// The parameters and factor draws behind a generated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub factor_names: Vec<String>,
    /// Drawn factor realisations (decimal), missing at week 0.
    pub factors: Vec<ReturnSeries>,
    /// Decimal per week.
    pub alphas: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub panel: AssetPanel,
    /// Factors constructed from the panel the same way as for real data.
    pub factors: FactorSet,
    pub market_total: Vec<Option<f64>>,
    pub truth: Truth,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

struct AssetDraws {
    supply: f64,
    l1: bool,
    simple_share: f64,
    beta: Vec<f64>,
    log_ratio: Vec<f64>,
    eps: Vec<f64>,
    blank: Vec<bool>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let weeks = spec.weeks;
    let k = spec.factor_names.len();
    let calendar = WeekCalendar::new(spec.anchor, weeks)?;
    let pp = 0.01;

    let mut frng = stream(spec.seed, 0);
    let mut factors = vec![vec![None; weeks]; k];
    let mut rf = vec![0.0; weeks];
    for t in 0..weeks {
        rf[t] = pp * (spec.rf_mean + spec.rf_std * normal(&mut frng));
        if t > 0 {
            for j in 0..k {
                factors[j][t] =
                    Some(pp * (spec.factor_means[j] + spec.factor_stds[j] * normal(&mut frng)));
            }
        }
    }

    let draws: Vec<AssetDraws> = (0..spec.n_assets)
        .map(|i| {
            let mut rng = stream(spec.seed, i as u64 + 1);
            let supply = libm::exp(spec.log_mcap_mean + spec.log_mcap_std * normal(&mut rng));
            let l1 = rng.random::<f64>() < spec.l1_share;
            let simple_share = uniform(
                &mut rng,
                (spec.tvl.simple_share_min, spec.tvl.simple_share_max),
            );
            let drawn: Vec<f64> = (0..k)
                .map(|j| {
                    let range = if j == 0 {
                        spec.beta_range
                    } else {
                        spec.other_beta_range
                    };
                    uniform(&mut rng, range)
                })
                .collect();
            let beta = spec.true_betas.get(i).cloned().unwrap_or(drawn);
            let mut log_ratio = Vec::with_capacity(weeks);
            let mut l =
                spec.tvl.initial_log_ratio_mean + spec.tvl.initial_log_ratio_std * normal(&mut rng);
            let mut eps = vec![0.0; weeks];
            let mut blank = vec![false; weeks];
            for t in 0..weeks {
                if t > 0 {
                    l += spec.tvl.step_std * normal(&mut rng);
                    eps[t] = pp * spec.resid_std * normal(&mut rng);
                }
                log_ratio.push(l);
                blank[t] = spec.missing_rate > 0.0 && rng.random::<f64>() < spec.missing_rate;
            }
            AssetDraws {
                supply,
                l1,
                simple_share,
                beta,
                log_ratio,
                eps,
                blank,
            }
        })
        .collect();

    let alphas: Vec<f64> = (0..spec.n_assets)
        .map(|i| pp * spec.true_alphas.get(i).copied().unwrap_or(0.0))
        .collect();

    // Top TVL/MC quartile membership at t - 1 earns the priced alpha at t.
    let n = spec.n_assets;
    let mut top_quartile = vec![vec![false; weeks]; n];
    if spec.tvl.priced_alpha != 0.0 {
        let mut order: Vec<usize> = (0..n).collect();
        for t in 1..weeks {
            order.sort_by(|&a, &b| {
                draws[a].log_ratio[t - 1]
                    .total_cmp(&draws[b].log_ratio[t - 1])
                    .then(a.cmp(&b))
            });
            for (rank, &a) in order.iter().enumerate() {
                top_quartile[a][t] = quartile_of(rank, n) == 3;
            }
        }
    }

    let mut cells = Vec::with_capacity(n * weeks);
    let mut categories = Vec::with_capacity(n);
    let mut initial_caps = 0.0;
    for (i, d) in draws.iter().enumerate() {
        let mut price = 1.0;
        for t in 0..weeks {
            if t > 0 {
                let systematic: f64 = (0..k).map(|j| d.beta[j] * factors[j][t].unwrap()).sum();
                let priced = if top_quartile[i][t] {
                    pp * spec.tvl.priced_alpha
                } else {
                    0.0
                };
                let r = rf[t] + alphas[i] + priced + systematic + d.eps[t];
                price *= 1.0 + r.max(RETURN_FLOOR);
            }
            let mc = d.supply * price;
            if t == 0 {
                initial_caps += mc;
            }
            let tvl_total = libm::exp(d.log_ratio[t]) * mc;
            cells.push(if d.blank[t] {
                AssetObservation::default()
            } else {
                AssetObservation {
                    price: Some(price),
                    market_cap: Some(mc),
                    tvl_total: Some(tvl_total),
                    tvl_simple: Some(tvl_total * d.simple_share),
                }
            });
        }
        let mut tags = BTreeSet::new();
        if d.l1 {
            tags.insert(String::from("L1"));
        }
        categories.push(tags);
    }

    // The market also holds assets outside the sorted panel (Bitcoin among
    // them), so it starts well above the panel total.
    let mut market_total = Vec::with_capacity(weeks);
    let mut total = 10.0 * initial_caps;
    for t in 0..weeks {
        if t > 0 {
            total *= 1.0 + rf[t] + factors[0][t].unwrap();
        }
        market_total.push(Some(total));
    }

    let assets: Vec<String> = (0..n).map(|i| format!("S{i:03}")).collect();
    let panel = AssetPanel::new(calendar, assets, categories, cells)?;
    let rf_series = ReturnSeries::from_values(calendar, &rf)?;
    let factor_set =
        FactorSet::construct(&panel, &market_total, &rf_series, &SortConfig::default())?;
    let truth = Truth {
        factor_names: spec.factor_names.clone(),
        factors: factors
            .into_iter()
            .map(|v| ReturnSeries::new(calendar, v))
            .collect::<Result<_>>()?,
        alphas,
        betas: draws.into_iter().map(|d| d.beta).collect(),
    };
    Ok(SynthOutput {
        panel,
        factors: factor_set,
        market_total,
        truth,
    })
}
