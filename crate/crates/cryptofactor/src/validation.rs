//! Statistical self-checks: Monte Carlo size and power of the GRS test, the
//! synthetic spanning experiment, randomized portfolio invariants, an OLS
//! normal-equations cross-check, and run determinism.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use cryptofactor_core::report::DESCRIPTIVE_ROWS;
use cryptofactor_core::stats::mean_significance;
use cryptofactor_core::synth::{generate, SynthSpec};
use cryptofactor_core::{
    dtvl_ratio_signal, form_quartiles, grs_test, momentum_signal, ols, size_signal,
    tvl_ratio_signal, AssetObservation, AssetPanel, Model, PortfolioSeries, ReturnSeries,
    SignalMatrix, SortConfig, StarLevel, TvlField, WeekCalendar,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{ModelSelection, RunConfig};
use crate::error::Result;
use crate::pipeline::{analyze, inputs_from_records, run_analysis, run_synth, synth_records};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {}: {}", self.name, self.detail)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn calendar(weeks: usize) -> WeekCalendar {
    WeekCalendar::new(chrono::NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), weeks).unwrap()
}

/// GRS Monte Carlo design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrsDesign {
    pub weeks: usize,
    pub assets: usize,
    /// Common true alpha, pp/week.
    pub alpha: f64,
    /// pp/week.
    pub resid_std: f64,
    /// Market factor mean and std, pp/week.
    pub factor_mean: f64,
    pub factor_std: f64,
}

impl Default for GrsDesign {
    fn default() -> Self {
        Self {
            weeks: 105,
            assets: 3,
            alpha: 0.0,
            resid_std: 5.0,
            factor_mean: 1.44,
            factor_std: 6.39,
        }
    }
}

/// Share of `trials` Gaussian one-factor samples in which GRS rejects at `level`.
pub fn grs_rejection_rate(design: GrsDesign, trials: u64, seed: u64, level: f64) -> f64 {
    let cal = calendar(design.weeks);
    let mut rejections = 0u64;
    for trial in 0..trials {
        let mut r = rng(seed, trial);
        let mut draw = || -> f64 { StandardNormal.sample(&mut r) };
        let f: Vec<f64> = (0..design.weeks)
            .map(|_| 0.01 * (design.factor_mean + design.factor_std * draw()))
            .collect();
        let factor = ReturnSeries::from_values(cal, &f).unwrap();
        let fits: Vec<_> = (0..design.assets)
            .map(|i| {
                let beta = 0.8 + 0.4 * i as f64 / design.assets.max(2) as f64;
                let y: Vec<f64> = f
                    .iter()
                    .map(|x| 0.01 * design.alpha + beta * x + 0.01 * design.resid_std * draw())
                    .collect();
                ols(
                    &ReturnSeries::from_values(cal, &y).unwrap(),
                    &[("CM", &factor)],
                    true,
                )
                .unwrap()
            })
            .collect();
        let g = grs_test(&fits, &[&factor]).unwrap();
        rejections += u64::from(g.p_value < level);
    }
    rejections as f64 / trials as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpanningStats {
    pub runs: usize,
    /// Runs where some regressed quartile has a market-model alpha
    /// significant at 5%.
    pub any_alpha: usize,
    /// Runs with at least one selected quartile, hence a GRS test.
    pub grs_tests: usize,
    pub grs_rejections: usize,
}

impl SpanningStats {
    pub fn any_alpha_rate(&self) -> f64 {
        self.any_alpha as f64 / self.runs as f64
    }

    pub fn grs_rate(&self) -> f64 {
        if self.grs_tests == 0 {
            0.0
        } else {
            self.grs_rejections as f64 / self.grs_tests as f64
        }
    }
}

/// Synthesise, cache-encode and analyse the total-TVL level cell of the
/// unrestricted universe for each seed, under the market model.
pub fn spanning_experiment(seeds: Range<u64>, priced_alpha: f64) -> Result<SpanningStats> {
    let mut cfg = RunConfig::default();
    cfg.analysis.tvl_fields = vec![TvlField::Total];
    cfg.analysis.signals = vec![cryptofactor_core::SignalKind::TvlRatio];
    cfg.analysis.models = ModelSelection::Market;
    cfg.universes.truncate(1);
    let calendar = cfg.panel_calendar()?;
    let mut stats = SpanningStats::default();
    for seed in seeds {
        let mut spec = cfg.synth.spec(&calendar);
        spec.seed = seed;
        spec.tvl.priced_alpha = priced_alpha;
        let out = generate(&spec).map_err(|source| crate::error::Error::Core {
            context: format!("synth seed {seed}"),
            source,
        })?;
        let inputs = inputs_from_records(&cfg, synth_records(&cfg, &out), "synth")?;
        let analysis = analyze(&cfg, &inputs, 1)?;
        let (_, cell) = &analysis.cells[0];
        stats.runs += 1;
        if let Some(fit) = cell.fit(Model::Market) {
            stats.grs_tests += 1;
            let significant = fit
                .regressions
                .iter()
                .any(|(_, r)| r.alpha.as_ref().is_some_and(|a| a.p_value < 0.05));
            stats.any_alpha += usize::from(significant);
            stats.grs_rejections += usize::from(fit.grs.is_some_and(|g| g.p_value < 0.05));
        }
    }
    Ok(stats)
}

/// A random panel of 4..=30 assets over 3..=12 weeks with ~8% gaps.
pub fn random_panel(r: &mut ChaCha8Rng) -> AssetPanel {
    let n = r.random_range(4..=30);
    let weeks = r.random_range(3..=12);
    let mut cells = Vec::with_capacity(n * weeks);
    let maybe = |r: &mut ChaCha8Rng, v: f64| (r.random::<f64>() > 0.08).then_some(v);
    for _ in 0..n * weeks {
        let total = r.random_range(0.0..500.0);
        let share = r.random::<f64>();
        let price = r.random_range(0.1..10.0);
        let mc = r.random_range(1.0..1000.0);
        let tvl_total = maybe(r, total);
        cells.push(AssetObservation {
            price: maybe(r, price),
            market_cap: maybe(r, mc),
            tvl_total,
            tvl_simple: tvl_total.map(|t| t * share),
        });
    }
    let ids = (0..n).map(|i| format!("A{i:02}")).collect();
    AssetPanel::new(calendar(weeks), ids, vec![BTreeSet::new(); n], cells).unwrap()
}

fn panel_signals(panel: &AssetPanel) -> Vec<SignalMatrix> {
    vec![
        tvl_ratio_signal(panel, TvlField::Total),
        tvl_ratio_signal(panel, TvlField::Simple),
        dtvl_ratio_signal(panel, TvlField::Total),
        momentum_signal(panel),
        size_signal(panel),
    ]
}

fn check_laws(
    panel: &AssetPanel,
    signal: &SignalMatrix,
    p: &PortfolioSeries,
) -> std::result::Result<(), String> {
    for (t, f) in p.formations.iter().enumerate() {
        let Some(f) = f else { continue };
        let sizes = f.sizes();
        if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 {
            return Err(format!("week {t}: quartile sizes {sizes:?}"));
        }
        let eligible: BTreeSet<usize> = (0..panel.n_assets())
            .filter(|&a| {
                signal.get(a, t).is_some_and(f64::is_finite)
                    && panel.cell(a, t - 1).market_cap.is_some_and(|m| m > 0.0)
            })
            .collect();
        let members: BTreeSet<usize> = f.quartiles.iter().flatten().map(|m| m.0).collect();
        if members != eligible || sizes.iter().sum::<usize>() != eligible.len() {
            return Err(format!(
                "week {t}: memberships do not partition the eligible set"
            ));
        }
        for q in &f.quartiles {
            let total: f64 = q.iter().map(|m| m.1).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(format!("week {t}: weights sum to {total}"));
            }
            let caps: f64 = q
                .iter()
                .map(|&(a, _)| panel.cell(a, t - 1).market_cap.unwrap())
                .sum();
            for &(a, w) in q {
                if (w - panel.cell(a, t - 1).market_cap.unwrap() / caps).abs() > 1e-12 {
                    return Err(format!(
                        "week {t}: weight of asset {a} not proportional to MC"
                    ));
                }
            }
        }
    }
    for t in 0..panel.weeks() {
        if let (Some(h), Some(hi), Some(lo)) =
            (p.hml.get(t), p.q_returns[3].get(t), p.q_returns[0].get(t))
        {
            if h != hi - lo {
                return Err(format!("week {t}: HML {h} != Q4 - Q1 {}", hi - lo));
            }
        }
    }
    Ok(())
}

/// Formation lag, counts, weights, HML identity, scale invariance and the
/// degenerate cross-section on `panels` random panels.
pub fn portfolio_invariants(panels: u64, seed: u64) -> std::result::Result<(), String> {
    let sort = SortConfig { min_breadth: 4 };
    for i in 0..panels {
        let mut r = rng(seed, i);
        let panel = random_panel(&mut r);
        let signals = panel_signals(&panel);
        let ports: Vec<PortfolioSeries> = signals
            .iter()
            .map(|s| form_quartiles(s, &panel, &sort))
            .collect();
        for (s, p) in signals.iter().zip(&ports) {
            check_laws(&panel, s, p).map_err(|e| format!("panel {i} {:?}: {e}", s.kind()))?;
            let c = r.random_range(1e-3..1e3);
            if form_quartiles(&s.scaled(c), &panel, &sort).formations != p.formations {
                return Err(format!(
                    "panel {i} {:?}: rescaling by {c} moved memberships",
                    s.kind()
                ));
            }
        }

        let a = r.random_range(0..panel.n_assets());
        let t = r.random_range(0..panel.weeks());
        let k = r.random_range(0.01..100.0);
        let mut mutated = panel.clone();
        let cell = mutated.cell_mut(a, t);
        cell.price = Some(cell.price.unwrap_or(1.0) * k);
        cell.market_cap = Some(cell.market_cap.unwrap_or(1.0) * k);
        cell.tvl_total = Some(cell.tvl_total.unwrap_or(1.0) * k);
        cell.tvl_simple = cell.tvl_total.map(|v| v / 3.0);
        for (s, p) in panel_signals(&mutated).iter().zip(&ports) {
            let m = form_quartiles(s, &mutated, &sort);
            if m.formations[..=t] != p.formations[..=t] {
                return Err(format!(
                    "panel {i} {:?}: week-{t} data moved a week-<= {t} formation",
                    s.kind()
                ));
            }
        }

        let ret = r.random_range(-0.5..0.5);
        let mut flat = panel.clone();
        for a in 0..flat.n_assets() {
            for t in 0..flat.weeks() {
                flat.cell_mut(a, t).price = Some((1.0f64 + ret).powi(t as i32));
            }
        }
        let p = form_quartiles(&size_signal(&flat), &flat, &sort);
        for t in 0..flat.weeks() {
            if p.formations[t].is_none() {
                continue;
            }
            let flat_ok = p
                .q_returns
                .iter()
                .all(|q| (q.get(t).unwrap() - ret).abs() < 1e-12)
                && p.hml.get(t).unwrap().abs() < 1e-12;
            if !flat_ok {
                return Err(format!(
                    "panel {i}: equal returns did not give flat quartiles in week {t}"
                ));
            }
        }
    }
    Ok(())
}

/// Normal-equations coefficients via Gauss-Jordan elimination.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut row: Vec<f64> = (0..p)
                .map(|j| x.iter().map(|r| r[i] * r[j]).sum())
                .collect();
            row.push(x.iter().zip(y).map(|(r, v)| r[i] * v).sum());
            row
        })
        .collect();
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&u, &v| a[u][c].abs().total_cmp(&a[v][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= d);
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

/// Largest relative coefficient gap against the normal equations over
/// `instances` random problems with n <= 50, k <= 3.
pub fn ols_oracle_gap(instances: u64, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut r = rng(seed, i);
        let k = r.random_range(1..=3);
        let n = r.random_range(k + 5..=50);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let cal = calendar(n);
        let cols: Vec<ReturnSeries> = (0..k)
            .map(|j| {
                ReturnSeries::from_values(cal, &xs.iter().map(|row| row[j]).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        let names = ["X1", "X2", "X3"];
        let regs: Vec<(&str, &ReturnSeries)> = (0..k).map(|j| (names[j], &cols[j])).collect();
        let fit = ols(&ReturnSeries::from_values(cal, &y).unwrap(), &regs, true).unwrap();
        let design: Vec<Vec<f64>> = xs
            .iter()
            .map(|row| std::iter::once(1.0).chain(row.iter().copied()).collect())
            .collect();
        for (c, b) in fit.terms().zip(normal_equations(&design, &y)) {
            worst = worst.max((c.estimate - b).abs() / b.abs().max(1e-300).max(1.0));
        }
    }
    worst
}

/// Synthesise once, analyse with `jobs_a` twice and `jobs_b` once, and
/// compare the three artifact trees byte for byte.
pub fn determinism(
    workdir: &Path,
    seed: u64,
    jobs_a: usize,
    jobs_b: usize,
) -> Result<std::result::Result<(), String>> {
    let mut cfg = RunConfig::default();
    cfg.data.cache = workdir.join("synth").join("cache.csv");
    run_synth(&cfg, seed, &cfg.data.cache.clone())?;
    let outs = [
        (workdir.join("run-a"), jobs_a),
        (workdir.join("run-a2"), jobs_a),
        (workdir.join("run-b"), jobs_b),
    ];
    for (dir, jobs) in &outs {
        run_analysis(&cfg, dir, *jobs)?;
    }
    let reference = read_tree(&outs[0].0);
    for (dir, jobs) in &outs[1..] {
        let other = read_tree(dir);
        if other != reference {
            let names: BTreeSet<_> = reference
                .iter()
                .chain(&other)
                .map(|(p, _)| p.clone())
                .collect();
            let differing: Vec<String> = names
                .into_iter()
                .filter(|n| {
                    reference.iter().find(|e| &e.0 == n) != other.iter().find(|e| &e.0 == n)
                })
                .collect();
            return Ok(Err(format!("jobs={jobs} differs in {differing:?}")));
        }
    }
    if reference.is_empty() {
        return Ok(Err("no artifacts written".into()));
    }
    Ok(Ok(()))
}

/// `(relative path, bytes)` for every file under `root`, sorted.
pub fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        for e in entries.flatten() {
            let path = e.path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.push((rel, std::fs::read(&path).unwrap_or_default()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Reference `(mean, std, n, expected stars)` cases.
pub const STAR_CASES: [(f64, f64, usize, StarLevel); 3] = [
    (1.78, 7.08, 105, StarLevel::Five),
    (1.64, 9.02, 105, StarLevel::Ten),
    (-0.14, 5.67, 105, StarLevel::None),
];

/// The full suite; `scale` in (0, 1] shrinks Monte Carlo trial counts.
pub fn run_suite(workdir: &Path, scale: f64) -> Vec<CheckOutcome> {
    let scaled = |n: u64| ((n as f64 * scale).ceil() as u64).max(1);
    let mut out = Vec::new();

    let stars_ok = STAR_CASES.iter().all(|&(m, s, n, want)| {
        mean_significance(m, s, n)
            .map(|r| r.2 == want)
            .unwrap_or(false)
    });
    out.push(CheckOutcome {
        name: "star arithmetic",
        passed: stars_ok,
        detail: format!("{} mean/std reference cases", STAR_CASES.len()),
    });

    let counts = observation_counts();
    out.push(CheckOutcome {
        name: "observation counts",
        passed: counts == Ok((105, 104)),
        detail: format!(
            "level/change usable weeks {counts:?}, want (105, 104), rows {}",
            DESCRIPTIVE_ROWS.len()
        ),
    });

    let gap = ols_oracle_gap(25, 7);
    out.push(CheckOutcome {
        name: "ols oracle",
        passed: gap <= 1e-10,
        detail: format!("max relative gap {gap:.2e} over 25 instances"),
    });

    let trials = scaled(2000);
    let size = grs_rejection_rate(GrsDesign::default(), trials, 101, 0.05);
    out.push(CheckOutcome {
        name: "grs size",
        passed: (0.035..=0.065).contains(&size),
        detail: format!("rejection rate {size:.4} over {trials} trials, want [0.035, 0.065]"),
    });
    let power = grs_rejection_rate(
        GrsDesign {
            alpha: 1.0,
            ..Default::default()
        },
        trials,
        202,
        0.05,
    );
    out.push(CheckOutcome {
        name: "grs power",
        passed: power > 0.5,
        detail: format!("rejection rate {power:.4} over {trials} trials, want > 0.5"),
    });

    let seeds = scaled(100);
    match (
        spanning_experiment(0..seeds, 0.0),
        spanning_experiment(0..seeds, 1.0),
    ) {
        (Ok(null), Ok(priced)) => {
            let passed = null.any_alpha_rate() <= 0.12
                && (0.01..=0.11).contains(&null.grs_rate())
                && priced.any_alpha_rate() > 0.5;
            out.push(CheckOutcome {
                name: "spanning reproduction",
                passed,
                detail: format!(
                    "null: any-alpha {:.2} (<= 0.12), GRS {:.3} of {} tests ([0.01, 0.11]); priced: any-alpha {:.2} (> 0.5)",
                    null.any_alpha_rate(),
                    null.grs_rate(),
                    null.grs_tests,
                    priced.any_alpha_rate()
                ),
            });
        }
        (Err(e), _) | (_, Err(e)) => out.push(CheckOutcome {
            name: "spanning reproduction",
            passed: false,
            detail: e.to_string(),
        }),
    }

    let panels = scaled(1000);
    let inv = portfolio_invariants(panels, 303);
    out.push(CheckOutcome {
        name: "portfolio invariants",
        passed: inv.is_ok(),
        detail: match inv {
            Ok(()) => format!("{panels} random panels"),
            Err(e) => e,
        },
    });

    let det = determinism(workdir, 42, 1, 4);
    out.push(CheckOutcome {
        name: "determinism",
        passed: matches!(det, Ok(Ok(()))),
        detail: match det {
            Ok(Ok(())) => "byte-identical across two runs and jobs {1, 4}".into(),
            Ok(Err(e)) => e,
            Err(e) => e.to_string(),
        },
    });
    out
}

/// Usable weeks of level and change portfolios on a default synthetic panel.
pub fn observation_counts() -> std::result::Result<(usize, usize), String> {
    let cfg = RunConfig::default();
    let cal = cfg.panel_calendar().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        anchor: cal.anchor(),
        weeks: cal.count(),
        ..Default::default()
    };
    let out = generate(&spec).map_err(|e| e.to_string())?;
    let sort = cfg.sort_config();
    let level = form_quartiles(
        &tvl_ratio_signal(&out.panel, TvlField::Total),
        &out.panel,
        &sort,
    );
    let change = form_quartiles(
        &dtvl_ratio_signal(&out.panel, TvlField::Total),
        &out.panel,
        &sort,
    );
    Ok((level.usable_weeks(), change.usable_weeks()))
}
