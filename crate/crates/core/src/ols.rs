//! Ordinary least squares with classical (homoskedastic) inference.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::series::{ensure_aligned, ReturnSeries};
use crate::special::t_two_sided_p;

pub const INTERCEPT: &str = "alpha";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub alpha: Option<Coefficient>,
    /// Factor loadings in regressor order.
    pub betas: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    /// Residuals on the estimation window, missing elsewhere.
    pub residuals: ReturnSeries,
    /// Weeks used in estimation.
    pub window: Vec<bool>,
    pub n_obs: usize,
    pub k_factors: usize,
    /// Residual variance `SSR / (n - p)`.
    pub sigma2: f64,
}

impl RegressionResult {
    pub fn factor_names(&self) -> Vec<&str> {
        self.betas.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn beta(&self, name: &str) -> Option<&Coefficient> {
        self.betas.iter().find(|b| b.name == name)
    }

    /// All terms, intercept first.
    pub fn terms(&self) -> impl Iterator<Item = &Coefficient> {
        self.alpha.iter().chain(self.betas.iter())
    }

    pub fn p_value(&self, term: &str) -> Option<f64> {
        self.terms().find(|c| c.name == term).map(|c| c.p_value)
    }
}

/// Regress `y` on the named regressors over the weeks where every series is
/// defined.
pub fn ols(
    y: &ReturnSeries,
    regressors: &[(&str, &ReturnSeries)],
    include_intercept: bool,
) -> Result<RegressionResult> {
    for (_, x) in regressors {
        ensure_aligned(y, x)?;
    }
    let weeks = y.len();
    let window: Vec<bool> = (0..weeks)
        .map(|t| y.get(t).is_some() && regressors.iter().all(|(_, x)| x.get(t).is_some()))
        .collect();
    let rows: Vec<usize> = (0..weeks).filter(|&t| window[t]).collect();
    let n = rows.len();
    let k = regressors.len();
    let p = k + usize::from(include_intercept);
    if p == 0 {
        return Err(Error::Invalid(String::from("regression has no terms")));
    }
    if n <= p {
        return Err(Error::InsufficientData {
            needed: p + 1,
            got: n,
        });
    }

    let mut names: Vec<String> = Vec::with_capacity(p);
    if include_intercept {
        names.push(INTERCEPT.to_string());
    }
    names.extend(regressors.iter().map(|(name, _)| name.to_string()));

    let mut design = Matrix::zeros(n, p);
    let mut yv = Vec::with_capacity(n);
    for (r, &t) in rows.iter().enumerate() {
        let mut c = 0;
        if include_intercept {
            design.set(r, 0, 1.0);
            c = 1;
        }
        for (j, (_, x)) in regressors.iter().enumerate() {
            design.set(r, c + j, x.get(t).unwrap());
        }
        yv.push(y.get(t).unwrap());
    }

    let qr = Qr::new(&design);
    let deficient = qr.deficient_columns(&design);
    if !deficient.is_empty() {
        return Err(Error::RankDeficient {
            columns: deficient.into_iter().map(|c| names[c].clone()).collect(),
        });
    }
    let coef = qr.solve(&yv);
    let resid: Vec<f64> = (0..n)
        .map(|r| yv[r] - (0..p).map(|c| design.get(r, c) * coef[c]).sum::<f64>())
        .collect();
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let df = (n - p) as f64;
    let sigma2 = ssr / df;
    let gram_inv = qr.gram_inverse();

    let sst = if include_intercept {
        let mean = yv.iter().sum::<f64>() / n as f64;
        yv.iter()
            .map(|v| {
                let d = v - mean;
                d * d
            })
            .sum::<f64>()
    } else {
        yv.iter().map(|v| v * v).sum::<f64>()
    };
    let r2 = if sst > 0.0 {
        1.0 - ssr / sst
    } else if ssr == 0.0 {
        1.0
    } else {
        0.0
    };
    let scale = if include_intercept {
        (n - 1) as f64 / df
    } else {
        n as f64 / df
    };
    let adj_r2 = 1.0 - (1.0 - r2) * scale;

    let mut coefs = Vec::with_capacity(p);
    for (c, name) in names.into_iter().enumerate() {
        let std_error = libm::sqrt(sigma2 * gram_inv.get(c, c));
        let estimate = coef[c];
        let (t_stat, p_value) = if std_error > 0.0 {
            let t = estimate / std_error;
            (t, t_two_sided_p(t, df)?)
        } else if estimate == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(estimate), 0.0)
        };
        coefs.push(Coefficient {
            name,
            estimate,
            std_error,
            t_stat,
            p_value,
        });
    }
    let alpha = include_intercept.then(|| coefs.remove(0));

    let mut resid_full = alloc::vec![None; weeks];
    for (r, &t) in rows.iter().enumerate() {
        resid_full[t] = Some(resid[r]);
    }

    Ok(RegressionResult {
        alpha,
        betas: coefs,
        r2,
        adj_r2,
        residuals: ReturnSeries::new(*y.calendar(), resid_full)?,
        window,
        n_obs: n,
        k_factors: k,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::WeekCalendar;
    use alloc::vec;
    use chrono::NaiveDate;

    fn cal(n: usize) -> WeekCalendar {
        WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), n).unwrap()
    }

    #[test]
    fn exact_fit() {
        let xs = [0.3, -1.0, 2.0, 0.5, 1.5, -0.7];
        let c = cal(xs.len());
        let x = ReturnSeries::from_values(c, &xs).unwrap();
        let y = x.map(|v| 2.0 + 3.0 * v);
        let fit = ols(&y, &[("x", &x)], true).unwrap();
        assert!((fit.alpha.as_ref().unwrap().estimate - 2.0).abs() < 1e-12);
        assert!((fit.betas[0].estimate - 3.0).abs() < 1e-12);
        assert!((fit.adj_r2 - 1.0).abs() < 1e-12);
        assert!(fit.residuals.defined().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn five_point_closed_form() {
        // Hand solution of the normal equations for y on [1, x]:
        // x = 1..5, y = [2, 4, 5, 4, 5]
        // beta = Sxy / Sxx = 6 / 10, alpha = ybar - beta xbar = 4 - 1.8 = 2.2
        let c = cal(5);
        let x = ReturnSeries::from_values(c, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = ReturnSeries::from_values(c, &[2.0, 4.0, 5.0, 4.0, 5.0]).unwrap();
        let fit = ols(&y, &[("x", &x)], true).unwrap();
        assert!((fit.alpha.as_ref().unwrap().estimate - 2.2).abs() < 1e-10);
        assert!((fit.betas[0].estimate - 0.6).abs() < 1e-10);
        // SSR = 2.4, sigma2 = 0.8, se(beta) = sqrt(0.8 / 10)
        assert!((fit.sigma2 - 0.8).abs() < 1e-10);
        assert!((fit.betas[0].std_error - libm::sqrt(0.08)).abs() < 1e-10);
        // R² = 1 - 2.4 / 6
        assert!((fit.r2 - 0.6).abs() < 1e-10);
        assert!((fit.adj_r2 - (1.0 - 0.4 * 4.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn drops_incomplete_rows() {
        let c = cal(6);
        let x = ReturnSeries::new(
            c,
            vec![Some(1.0), None, Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
        )
        .unwrap();
        let y = ReturnSeries::new(
            c,
            vec![Some(1.0), Some(9.0), None, Some(3.1), Some(3.9), Some(5.2)],
        )
        .unwrap();
        let fit = ols(&y, &[("x", &x)], true).unwrap();
        assert_eq!(fit.n_obs, 4);
        assert_eq!(fit.window, vec![true, false, false, true, true, true]);
        assert_eq!(fit.residuals.get(1), None);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let c = cal(6);
        let x = ReturnSeries::from_values(c, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]).unwrap();
        let x2 = x.map(|v| 2.0 * v);
        let y = ReturnSeries::from_values(c, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        match ols(&y, &[("CM", &x), ("CM2", &x2)], true) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["CM2".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_is_insufficient() {
        let c = cal(2);
        let x = ReturnSeries::from_values(c, &[1.0, 2.0]).unwrap();
        assert!(matches!(
            ols(&x, &[("x", &x)], true),
            Err(Error::InsufficientData { .. })
        ));
    }
}
