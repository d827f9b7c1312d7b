mod common;

use cryptofactor_core::special::{f_cdf, t_cdf, t_two_sided_p};
use cryptofactor_core::stats::describe_values;
use cryptofactor_core::{ols, ReturnSeries};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

fn series(values: &[f64]) -> ReturnSeries {
    ReturnSeries::from_values(common::calendar(values.len()), values).unwrap()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j)).collect())
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

/// Coefficients and standard errors from the normal equations.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = (x.len(), x[0].len());
    let xtx: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| (0..n).map(|r| x[r][i] * x[r][j]).sum())
                .collect()
        })
        .collect();
    let xty: Vec<f64> = (0..p)
        .map(|i| (0..n).map(|r| x[r][i] * y[r]).sum())
        .collect();
    let inv = invert(xtx);
    let beta: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| inv[i][j] * xty[j]).sum())
        .collect();
    let ssr: f64 = (0..n)
        .map(|r| {
            let e = y[r] - (0..p).map(|j| x[r][j] * beta[j]).sum::<f64>();
            e * e
        })
        .sum();
    let s2 = ssr / (n - p) as f64;
    let se = (0..p).map(|i| (s2 * inv[i][i]).sqrt()).collect();
    (beta, se)
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|k| {
        (k + 5..=50).prop_flat_map(move |n| {
            (
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, k), n),
                prop::collection::vec(-1.0f64..1.0, n),
            )
        })
    })
}

fn fit(xs: &[Vec<f64>], y: &[f64]) -> cryptofactor_core::RegressionResult {
    let k = xs[0].len();
    let cols: Vec<ReturnSeries> = (0..k)
        .map(|j| series(&xs.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let names = ["X1", "X2", "X3"];
    let regs: Vec<(&str, &ReturnSeries)> = (0..k).map(|j| (names[j], &cols[j])).collect();
    ols(&series(y), &regs, true).unwrap()
}

proptest! {
    #[test]
    fn matches_normal_equations((xs, y) in instance()) {
        let r = fit(&xs, &y);
        let design: Vec<Vec<f64>> = xs.iter().map(|row| std::iter::once(1.0).chain(row.iter().copied()).collect()).collect();
        let (beta, se) = normal_equations(&design, &y);
        for (c, (b, s)) in r.terms().zip(beta.iter().zip(&se)) {
            prop_assert!((c.estimate - b).abs() <= 1e-10 * b.abs().max(1.0), "{} vs {}", c.estimate, b);
            prop_assert!((c.std_error - s).abs() <= 1e-10 * s.abs().max(1.0));
        }
    }

    #[test]
    fn residuals_are_orthogonal((xs, y) in instance()) {
        let r = fit(&xs, &y);
        let e: Vec<f64> = r.residuals.defined().collect();
        let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(e.iter().sum::<f64>().abs() <= 1e-8 * scale);
        for j in 0..xs[0].len() {
            let dot: f64 = xs.iter().zip(&e).map(|(row, e)| row[j] * e).sum();
            prop_assert!(dot.abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn shifting_y_moves_only_alpha((xs, y) in instance(), c in -5.0f64..5.0) {
        let base = fit(&xs, &y);
        let shifted = fit(&xs, &y.iter().map(|v| v + c).collect::<Vec<_>>());
        let a0 = base.alpha.unwrap().estimate;
        let a1 = shifted.alpha.unwrap().estimate;
        prop_assert!((a1 - a0 - c).abs() <= 1e-10 * c.abs().max(1.0));
        for (b0, b1) in base.betas.iter().zip(&shifted.betas) {
            prop_assert!((b0.estimate - b1.estimate).abs() <= 1e-10);
        }
    }

    #[test]
    fn shrinking_deviations_never_loses_stars(
        values in prop::collection::vec(-5.0f64..5.0, 3..60),
        shrink in 0.0f64..1.0,
    ) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let tight: Vec<f64> = values.iter().map(|v| mean + shrink * (v - mean)).collect();
        let loose = describe_values(&values).unwrap();
        let tight = describe_values(&tight).unwrap();
        if tight.std > 0.0 && loose.std > 0.0 {
            prop_assert!(tight.star_level >= loose.star_level);
        }
    }
}

#[test]
fn exact_fit_has_unit_adjusted_r2() {
    let xs: Vec<Vec<f64>> = (0..20)
        .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()])
        .collect();
    let y: Vec<f64> = xs.iter().map(|r| 0.5 - 2.0 * r[0] + 0.25 * r[1]).collect();
    let r = fit(&xs, &y);
    assert!((r.adj_r2 - 1.0).abs() < 1e-12);
}

#[test]
fn t_cdf_matches_reference() {
    for &df in &[1.0, 2.0, 3.5, 5.0, 10.0, 29.0, 103.0, 500.0] {
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -80..=80 {
            let x = i as f64 / 10.0;
            let ours = t_cdf(x, df).unwrap();
            assert!((ours - reference.cdf(x)).abs() < 1e-10, "t({df}) at {x}");
        }
    }
}

#[test]
fn f_cdf_matches_reference() {
    for &(d1, d2) in &[
        (1.0, 1.0),
        (1.0, 50.0),
        (3.0, 101.0),
        (4.0, 100.0),
        (7.5, 12.0),
        (20.0, 3.0),
    ] {
        let reference = FisherSnedecor::new(d1, d2).unwrap();
        for i in 1..=120 {
            let x = i as f64 / 15.0;
            let ours = f_cdf(x, d1, d2).unwrap();
            assert!(
                (ours - reference.cdf(x)).abs() < 1e-10,
                "F({d1},{d2}) at {x}"
            );
        }
    }
}

#[test]
fn f_with_one_numerator_df_is_squared_t() {
    for &d in &[1.0, 4.0, 30.0, 101.0] {
        for i in 0..=100 {
            let x = i as f64 / 8.0;
            let lhs = f_cdf(x, 1.0, d).unwrap();
            let rhs = 2.0 * t_cdf(x.sqrt(), d).unwrap() - 1.0;
            assert!((lhs - rhs).abs() < 1e-8, "d={d} x={x}");
        }
    }
}

/// Composite Simpson integral of the Student t density from 0 to `x`.
fn t_integral(x: f64, df: f64) -> f64 {
    let ln_norm = libm::lgamma((df + 1.0) / 2.0)
        - libm::lgamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |u: f64| (ln_norm - (df + 1.0) / 2.0 * (1.0 + u * u / df).ln()).exp();
    let m = 20_000;
    let h = x / m as f64;
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..m {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn t_cdf_matches_quadrature() {
    for &df in &[2.0, 5.0, 103.0] {
        for &x in &[0.25, 1.0, 1.96, 2.576, 4.0] {
            let ours = t_cdf(x, df).unwrap() - 0.5;
            assert!((ours - t_integral(x, df)).abs() < 1e-10, "df={df} x={x}");
            let p = t_two_sided_p(x, df).unwrap();
            assert!((p - (1.0 - 2.0 * t_integral(x, df))).abs() < 1e-10);
        }
    }
}
