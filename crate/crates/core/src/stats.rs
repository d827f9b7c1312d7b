//! Descriptive statistics with two-sided significance stars.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::series::ReturnSeries;
use crate::special::t_two_sided_p;

/// Significance of a two-sided test, rendered as `***`, `**`, `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StarLevel {
    #[default]
    None,
    Ten,
    Five,
    One,
}

impl StarLevel {
    pub fn from_p_value(p: f64) -> Self {
        if p < 0.01 {
            StarLevel::One
        } else if p < 0.05 {
            StarLevel::Five
        } else if p < 0.10 {
            StarLevel::Ten
        } else {
            StarLevel::None
        }
    }

    pub fn stars(self) -> &'static str {
        match self {
            StarLevel::None => "",
            StarLevel::Ten => "*",
            StarLevel::Five => "**",
            StarLevel::One => "***",
        }
    }

    pub fn count(self) -> u8 {
        self.stars().len() as u8
    }

    pub fn from_count(n: u8) -> Self {
        match n {
            0 => StarLevel::None,
            1 => StarLevel::Ten,
            2 => StarLevel::Five,
            _ => StarLevel::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`).
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
    /// `mean / (std / sqrt(n))`; `None` when the series has no variation.
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub star_level: StarLevel,
}

/// Linear interpolation between order statistics at rank `q * (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Star level for a mean given its summary moments.
pub fn mean_significance(
    mean: f64,
    std: f64,
    n: usize,
) -> Result<(Option<f64>, Option<f64>, StarLevel)> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if std == 0.0 {
        return Ok((None, None, StarLevel::None));
    }
    let t = mean / (std / libm::sqrt(n as f64));
    let p = t_two_sided_p(t, (n - 1) as f64)?;
    Ok((Some(t), Some(p), StarLevel::from_p_value(p)))
}

pub fn describe_values(values: &[f64]) -> Result<DescriptiveStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1) as f64;
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let std = if sorted[0] == sorted[n - 1] {
        0.0
    } else {
        libm::sqrt(var)
    };
    let (t_stat, p_value, star_level) = mean_significance(mean, std, n)?;
    Ok(DescriptiveStats {
        n,
        mean,
        std,
        min: sorted[0],
        p25: percentile_sorted(&sorted, 0.25),
        p50: percentile_sorted(&sorted, 0.50),
        p75: percentile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
        t_stat,
        p_value,
        star_level,
    })
}

/// Moments and percentiles over the defined weeks of `series`.
pub fn describe(series: &ReturnSeries) -> Result<DescriptiveStats> {
    let values: Vec<f64> = series.defined().collect();
    describe_values(&values)
}
