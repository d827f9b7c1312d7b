//! Joint test that a set of regression intercepts are all zero.
//!
//! ```text
//! F = (T - N - K) / N * (α̂ᵀ Σ̂⁻¹ α̂) / (1 + μ̄ᵀ Ω̂⁻¹ μ̄)   ~   F(N, T - N - K)
//! ```
//!
//! `Σ̂` is the residual covariance and `Ω̂` the factor covariance, both with
//! divisor `T`. With these conventions a single test asset reproduces the
//! squared OLS t-statistic of its intercept exactly.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, covariance, inverse_quad_form};
use crate::ols::RegressionResult;
use crate::series::ReturnSeries;
use crate::special::f_sf;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrsResult {
    pub f_stat: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

pub fn grs_test(results: &[RegressionResult], factors: &[&ReturnSeries]) -> Result<GrsResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::Invalid(String::from("GRS test needs at least one regression")))?;
    let n = results.len();
    let k = factors.len();
    for r in results {
        if r.window != first.window {
            return Err(Error::Alignment(String::from(
                "GRS regressions use different estimation windows",
            )));
        }
        if r.alpha.is_none() {
            return Err(Error::Invalid(String::from(
                "GRS test needs regressions with an intercept",
            )));
        }
        if r.k_factors != k || r.factor_names() != first.factor_names() {
            return Err(Error::Alignment(format!(
                "GRS regressions must share the {k}-factor set"
            )));
        }
    }
    for f in factors {
        if f.len() != first.window.len() {
            return Err(Error::Alignment(String::from(
                "factor series length differs from window",
            )));
        }
    }
    let rows: Vec<usize> = (0..first.window.len())
        .filter(|&t| first.window[t])
        .collect();
    let t_obs = rows.len();
    if t_obs < n + k + 1 {
        return Err(Error::InsufficientData {
            needed: n + k + 1,
            got: t_obs,
        });
    }

    let resid_cols: Vec<Vec<f64>> = results
        .iter()
        .map(|r| {
            rows.iter()
                .map(|&t| r.residuals.get(t).ok_or(()))
                .collect::<core::result::Result<Vec<f64>, ()>>()
        })
        .collect::<core::result::Result<_, _>>()
        .map_err(|_| Error::Alignment(String::from("residual missing inside estimation window")))?;
    let factor_cols: Vec<Vec<f64>> = factors
        .iter()
        .map(|f| rows.iter().map(|&t| f.get(t).ok_or(())).collect())
        .collect::<core::result::Result<_, _>>()
        .map_err(|_| Error::Alignment(String::from("factor missing inside estimation window")))?;

    let divisor = t_obs as f64;
    // Residuals have zero mean by construction, so centring is a no-op.
    let sigma = covariance(&resid_cols, divisor);
    let sigma_l = cholesky(&sigma).ok_or(Error::DegenerateResidualCovariance)?;
    let alphas: Vec<f64> = results
        .iter()
        .map(|r| r.alpha.as_ref().unwrap().estimate)
        .collect();
    let alpha_form = inverse_quad_form(&sigma_l, &alphas);

    let factor_form = if k == 0 {
        0.0
    } else {
        let means: Vec<f64> = factor_cols
            .iter()
            .map(|c| c.iter().sum::<f64>() / divisor)
            .collect();
        let omega = covariance(&factor_cols, divisor);
        let omega_l = cholesky(&omega).ok_or(Error::DegenerateFactorCovariance)?;
        inverse_quad_form(&omega_l, &means)
    };

    let df2 = t_obs - n - k;
    let f_stat = (df2 as f64 / n as f64) * alpha_form / (1.0 + factor_form);
    let p_value = f_sf(f_stat, n as f64, df2 as f64)?;
    Ok(GrsResult {
        f_stat,
        df1: n,
        df2,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::WeekCalendar;
    use crate::ols::ols;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cal(n: usize) -> WeekCalendar {
        WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), n).unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n)
            .map(|_| (rng.random::<f64>() - 0.5) * scale)
            .collect()
    }

    #[test]
    fn single_asset_reduces_to_squared_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = 60;
        let c = cal(t);
        for _ in 0..20 {
            let f1 = ReturnSeries::from_values(c, &noise(&mut rng, t, 0.2)).unwrap();
            let f2 = ReturnSeries::from_values(c, &noise(&mut rng, t, 0.1)).unwrap();
            let e = noise(&mut rng, t, 0.05);
            let y: Vec<f64> = (0..t)
                .map(|i| 0.004 + 1.2 * f1.get(i).unwrap() - 0.3 * f2.get(i).unwrap() + e[i])
                .collect();
            let y = ReturnSeries::from_values(c, &y).unwrap();
            let fit = ols(&y, &[("a", &f1), ("b", &f2)], true).unwrap();
            let grs = grs_test(core::slice::from_ref(&fit), &[&f1, &f2]).unwrap();
            let t_alpha = fit.alpha.as_ref().unwrap().t_stat;
            assert!((grs.f_stat - t_alpha * t_alpha).abs() < 1e-9 * grs.f_stat.max(1.0));
            assert!((grs.p_value - fit.alpha.as_ref().unwrap().p_value).abs() < 1e-9);
            assert_eq!((grs.df1, grs.df2), (1, t - 3));
        }
    }

    #[test]
    fn zero_alphas_give_zero_statistic() {
        // y = 1.5 f + e with e orthogonal to [1, f] and a true zero intercept
        // estimate: e = ±d alternating over symmetric f.
        let t = 12;
        let c = cal(t);
        let fv: Vec<f64> = (0..t)
            .map(|i| if i < t / 2 { 0.01 } else { -0.01 })
            .collect();
        let f = ReturnSeries::from_values(c, &fv).unwrap();
        let e1: Vec<f64> = (0..t)
            .map(|i| if i % 2 == 0 { 0.002 } else { -0.002 })
            .collect();
        let e2: Vec<f64> = (0..t)
            .map(|i| if (i / 2) % 2 == 0 { 0.003 } else { -0.003 })
            .collect();
        let y1 =
            ReturnSeries::from_values(c, &(0..t).map(|i| 1.5 * fv[i] + e1[i]).collect::<Vec<_>>())
                .unwrap();
        let y2 =
            ReturnSeries::from_values(c, &(0..t).map(|i| 0.8 * fv[i] + e2[i]).collect::<Vec<_>>())
                .unwrap();
        let fits = [
            ols(&y1, &[("CM", &f)], true).unwrap(),
            ols(&y2, &[("CM", &f)], true).unwrap(),
        ];
        for fit in &fits {
            assert!(fit.alpha.as_ref().unwrap().estimate.abs() < 1e-15);
        }
        let grs = grs_test(&fits, &[&f]).unwrap();
        assert!(grs.f_stat < 1e-20);
        assert!((grs.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_windows_are_rejected() {
        let t = 20;
        let c = cal(t);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = ReturnSeries::from_values(c, &noise(&mut rng, t, 0.1)).unwrap();
        let y1 = ReturnSeries::from_values(c, &noise(&mut rng, t, 0.1)).unwrap();
        let mut v = y1.values().to_vec();
        v[3] = None;
        let y2 = ReturnSeries::new(c, v).unwrap();
        let fits = [
            ols(&y1, &[("CM", &f)], true).unwrap(),
            ols(&y2, &[("CM", &f)], true).unwrap(),
        ];
        assert!(matches!(grs_test(&fits, &[&f]), Err(Error::Alignment(_))));
    }

    #[test]
    fn identical_residuals_are_degenerate() {
        let t = 20;
        let c = cal(t);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = ReturnSeries::from_values(c, &noise(&mut rng, t, 0.1)).unwrap();
        let y = ReturnSeries::from_values(c, &noise(&mut rng, t, 0.1)).unwrap();
        let fit = ols(&y, &[("CM", &f)], true).unwrap();
        assert_eq!(
            grs_test(&[fit.clone(), fit], &[&f]),
            Err(Error::DegenerateResidualCovariance)
        );
    }
}
