//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use cryptofactor::config::RunConfig;
use cryptofactor::pipeline::{analyze, inputs_from_records, synth_records};
use cryptofactor::validation::{
    determinism, grs_rejection_rate, portfolio_invariants, spanning_experiment, GrsDesign,
};
use cryptofactor_core::{describe, generate, ols, ReturnSeries, StarLevel, WeekCalendar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Result<String, String>,
}

fn calendar(n: usize) -> WeekCalendar {
    WeekCalendar::new(NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), n).unwrap()
}

/// 105 weekly values with exactly the given sample mean and std, in pp.
fn series_with_moments(mean: f64, std: f64) -> ReturnSeries {
    let n = 105;
    let raw: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
    let m = raw.iter().sum::<f64>() / n as f64;
    let s = (raw.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt();
    let values: Vec<f64> = raw
        .iter()
        .map(|v| (mean + std * (v - m) / s) / 100.0)
        .collect();
    ReturnSeries::from_values(calendar(n), &values).unwrap()
}

fn stars() -> Result<String, String> {
    let cases = [
        (1.78, 7.08, Some(2.576), StarLevel::Five),
        (1.64, 9.02, None, StarLevel::Ten),
        (-0.14, 5.67, None, StarLevel::None),
    ];
    let mut detail = Vec::new();
    for (mean, std, t_want, want) in cases {
        let d = describe(&series_with_moments(mean, std)).map_err(|e| e.to_string())?;
        let t = d.t_stat.ok_or("no t statistic")?;
        if let Some(tw) = t_want {
            if (t - tw).abs() > 5e-4 {
                return Err(format!("mean {mean} std {std}: t = {t:.4}, want {tw}"));
            }
        }
        if d.star_level != want {
            return Err(format!(
                "mean {mean} std {std}: {:?}, want {want:?}",
                d.star_level
            ));
        }
        detail.push(format!("t={t:.3}{}", want.stars()));
    }
    Ok(detail.join(" "))
}

fn counts() -> Result<String, String> {
    let cfg = RunConfig::default();
    let cal = cfg.panel_calendar().map_err(|e| e.to_string())?;
    let spec = cfg.synth.spec(&cal);
    let out = generate(&spec).map_err(|e| e.to_string())?;
    let inputs =
        inputs_from_records(&cfg, synth_records(&cfg, &out), "synth").map_err(|e| e.to_string())?;
    let analysis = analyze(&cfg, &inputs, 1).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for (cell, result) in &analysis.cells {
        let want = if cell.name().contains("-level-") {
            105
        } else {
            104
        };
        for s in &result.stats {
            if s.n != want {
                return Err(format!(
                    "{}: {} usable weeks, want {want}",
                    cell.name(),
                    s.n
                ));
            }
        }
        seen.push(result.stats[0].n);
    }
    Ok(format!(
        "analysis weeks {}, per-cell n {seen:?}",
        analysis.factors.cm.len() - 1
    ))
}

/// Solve `(X'X) b = X'y` by Gauss-Jordan elimination with partial pivoting.
fn normal_equations_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, yv) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yv;
        }
    }
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&u, &v| a[u][c].abs().total_cmp(&a[v][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c];
                for (v, pv) in row.iter_mut().zip(&pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.iter().map(|row| row[p]).collect()
}

fn ols_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let names = ["X1", "X2", "X3"];
    let mut worst = 0.0f64;
    for instance in 0..25 {
        let k = rng.random_range(1..=3);
        let n = rng.random_range(k + 3..=50);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                std::iter::once(1.0)
                    .chain((0..k).map(|_| rng.random_range(-2.0..2.0)))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[1] * 0.7 + rng.random_range(-1.0..1.0))
            .collect();
        let cal = calendar(n);
        let cols: Vec<ReturnSeries> = (1..=k)
            .map(|j| {
                ReturnSeries::from_values(cal, &x.iter().map(|r| r[j]).collect::<Vec<_>>()).unwrap()
            })
            .collect();
        let regs: Vec<(&str, &ReturnSeries)> = names.iter().copied().zip(cols.iter()).collect();
        let fit = ols(&ReturnSeries::from_values(cal, &y).unwrap(), &regs, true)
            .map_err(|e| e.to_string())?;
        let oracle = normal_equations_oracle(&x, &y);
        for (c, b) in fit.terms().zip(&oracle) {
            let rel = (c.estimate - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if rel > 1e-10 {
                return Err(format!(
                    "instance {instance} {}: {} vs oracle {b}, rel {rel:.2e}",
                    c.name, c.estimate
                ));
            }
        }

        let exact: Vec<f64> = x.iter().map(|r| 0.5 + r[1..].iter().sum::<f64>()).collect();
        let fit = ols(
            &ReturnSeries::from_values(cal, &exact).unwrap(),
            &regs,
            true,
        )
        .map_err(|e| e.to_string())?;
        if (fit.adj_r2 - 1.0).abs() > 1e-10 {
            return Err(format!(
                "instance {instance}: exact fit adj R2 = {}",
                fit.adj_r2
            ));
        }
    }
    Ok(format!(
        "25 instances, max relative gap {worst:.2e}, exact fits adj R2 = 1"
    ))
}

fn grs_size() -> Result<String, String> {
    let rate = grs_rejection_rate(GrsDesign::default(), 2000, 101, 0.05);
    let detail = format!(
        "rejection rate {:.2}% over 2000 trials, want [3.5%, 6.5%]",
        100.0 * rate
    );
    if (0.035..=0.065).contains(&rate) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn grs_power() -> Result<String, String> {
    let design = GrsDesign {
        alpha: 1.0,
        resid_std: 5.0,
        ..Default::default()
    };
    let rate = grs_rejection_rate(design, 2000, 202, 0.05);
    let detail = format!(
        "rejection rate {:.2}% over 2000 trials, want > 50%",
        100.0 * rate
    );
    if rate > 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spanning() -> Result<String, String> {
    let null = spanning_experiment(0..100, 0.0).map_err(|e| e.to_string())?;
    let priced = spanning_experiment(0..100, 1.0).map_err(|e| e.to_string())?;
    let detail = format!(
        "null: any alpha {}/{} (<= 12%), GRS {}/{} tested ({:.1}%, want [1%, 11%]); priced: any alpha {}/{} (> 50%)",
        null.any_alpha,
        null.runs,
        null.grs_rejections,
        null.grs_tests,
        100.0 * null.grs_rate(),
        priced.any_alpha,
        priced.runs
    );
    let ok = null.any_alpha_rate() <= 0.12
        && (0.01..=0.11).contains(&null.grs_rate())
        && priced.any_alpha_rate() > 0.5;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn invariants() -> Result<String, String> {
    portfolio_invariants(1000, 303).map(|()| "1000 randomized panels".into())
}

fn deterministic() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    determinism(dir.path(), 42, 1, 4)
        .map_err(|e| e.to_string())?
        .map(|()| "two runs at jobs=1 and one at jobs=4 byte-identical".into())
}

fn main() {
    let criteria = [
        Criterion {
            name: "star arithmetic",
            budget: Duration::from_secs(1),
            run: stars,
        },
        Criterion {
            name: "observation counts",
            budget: Duration::from_secs(1),
            run: counts,
        },
        Criterion {
            name: "ols oracle equivalence",
            budget: Duration::from_secs(5),
            run: ols_oracle,
        },
        Criterion {
            name: "grs size",
            budget: Duration::from_secs(60),
            run: grs_size,
        },
        Criterion {
            name: "grs power",
            budget: Duration::from_secs(60),
            run: grs_power,
        },
        Criterion {
            name: "spanning reproduction",
            budget: Duration::from_secs(600),
            run: spanning,
        },
        Criterion {
            name: "portfolio invariant suite",
            budget: Duration::from_secs(60),
            run: invariants,
        },
        Criterion {
            name: "determinism",
            budget: Duration::from_secs(120),
            run: deterministic,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (
                false,
                format!("{d}; took {elapsed:.2?}, budget {:?}", c.budget),
            ),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        println!(
            "{} {}: {detail} [{elapsed:.2?}]",
            if ok { "PASS" } else { "FAIL" },
            c.name
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
