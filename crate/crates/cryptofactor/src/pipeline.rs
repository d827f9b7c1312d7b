//! End-to-end orchestration: ingest, synthesise, analyse the grid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cryptofactor_core::report::{return_vs_tvl_figure, tvl_ratio_figure};
use cryptofactor_core::synth::{generate, SynthOutput};
use cryptofactor_core::{
    analyze_cell, build_universe, sample_records, AssetPanel, CellResult, CellSpec, FactorSet,
    RawRecord, ReturnSeries, SignalKind, TvlField, WeekCalendar,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cache::{load_cache, read_cache, save_cache, write_cache};
use crate::client::{fetch_history, records_only};
use crate::config::{RunConfig, UniverseVariant};
use crate::emit::{figure_csv, table_json, table_text};
use crate::error::{Context, Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn signal_slug(kind: SignalKind) -> &'static str {
    match kind {
        SignalKind::TvlRatio => "level",
        SignalKind::DtvlRatio => "change",
        SignalKind::Momentum => "momentum",
        SignalKind::Size => "size",
    }
}

/// Parsed analysis inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub calendar: WeekCalendar,
    /// Asset records, without the risk-free and market series.
    pub records: Vec<RawRecord>,
    pub rf: ReturnSeries,
    pub market_total: Vec<Option<f64>>,
    pub hashes: Vec<InputHash>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let path = &cfg.data.cache;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let all = read_cache(bytes.as_slice()).map_err(|source| Error::Cache {
        path: path.clone(),
        source,
    })?;
    let mut inputs = inputs_from_records(cfg, all, &path.display().to_string())?;
    inputs.hashes.push(InputHash {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    });
    Ok(inputs)
}

/// Split out the risk-free and market series and sample them onto the
/// panel calendar. `source` names the records' origin in errors.
pub fn inputs_from_records(cfg: &RunConfig, all: Vec<RawRecord>, source: &str) -> Result<Inputs> {
    let calendar = cfg.panel_calendar()?;
    let staleness = cfg.universe.staleness_days;
    let series = |id: &str| -> Result<Vec<cryptofactor_core::AssetObservation>> {
        let mut rows: Vec<&RawRecord> = all.iter().filter(|r| r.asset_id == id).collect();
        if rows.is_empty() {
            return Err(Error::Data(format!(
                "{source}: no records for series `{id}`"
            )));
        }
        rows.sort_by_key(|r| r.date);
        Ok(sample_records(&rows, &calendar, staleness))
    };
    let rf_values: Vec<Option<f64>> = series(&cfg.data.risk_free_id)?
        .iter()
        .map(|o| o.price)
        .collect();
    let market_total: Vec<Option<f64>> = series(&cfg.data.market_id)?
        .iter()
        .map(|o| o.market_cap)
        .collect();
    let rf =
        ReturnSeries::new(calendar, rf_values).context(|| "ingestion: risk-free series".into())?;
    let records = all
        .into_iter()
        .filter(|r| r.asset_id != cfg.data.risk_free_id && r.asset_id != cfg.data.market_id)
        .collect();
    Ok(Inputs {
        calendar,
        records,
        rf,
        market_total,
        hashes: Vec::new(),
    })
}

/// One cell of the {field} × {signal} × {universe} grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub field: TvlField,
    pub signal: SignalKind,
    pub universe: UniverseVariant,
}

impl GridCell {
    pub fn name(&self) -> String {
        format!(
            "{}-{}-{}",
            self.field.as_str(),
            signal_slug(self.signal),
            self.universe.name
        )
    }
}

pub fn grid(cfg: &RunConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for field in &cfg.analysis.tvl_fields {
        for signal in &cfg.analysis.signals {
            for universe in &cfg.universes {
                cells.push(GridCell {
                    field: *field,
                    signal: *signal,
                    universe: universe.clone(),
                });
            }
        }
    }
    cells
}

/// Everything computed for a run, before anything touches the disk.
pub struct Analysis {
    pub factors: FactorSet,
    pub panels: BTreeMap<String, AssetPanel>,
    pub cells: Vec<(GridCell, CellResult)>,
}

pub fn analyze(cfg: &RunConfig, inputs: &Inputs, jobs: usize) -> Result<Analysis> {
    let base_rule = cfg.universe.clone();
    let base = build_universe(&inputs.records, &base_rule, &inputs.calendar)
        .context(|| "ingestion: base universe".into())?;
    let sort = cfg.sort_config();
    let factors = FactorSet::construct(&base, &inputs.market_total, &inputs.rf, &sort)
        .context(|| "factorlab: factor construction".into())?;
    let mut panels = BTreeMap::new();
    for v in &cfg.universes {
        let rule = cfg.universe_rule(v);
        let panel = build_universe(&inputs.records, &rule, &inputs.calendar)
            .context(|| format!("ingestion: universe `{}`", v.name))?;
        log::info!("universe {}: {} assets", v.name, panel.n_assets());
        panels.insert(v.name.clone(), panel);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells = grid(cfg);
    let results: Vec<Result<CellResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let spec = CellSpec {
                    field: cell.field,
                    signal: cell.signal,
                    models: cfg.analysis.models.models(),
                    sort,
                    selection_level: cfg.analysis.selection_level,
                };
                analyze_cell(&panels[&cell.universe.name], &factors, &spec)
                    .context(|| format!("cell {}", cell.name()))
            })
            .collect()
    });
    let cells = cells
        .into_iter()
        .zip(results)
        .map(|(c, r)| r.map(|r| (c, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis {
        factors,
        panels,
        cells,
    })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn series_csv(calendar: &WeekCalendar, columns: &[(&str, &ReturnSeries)]) -> String {
    let mut s = String::from("date");
    for (name, _) in columns {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    for (t, date) in calendar.dates().enumerate() {
        write!(s, "{date}").unwrap();
        for (_, series) in columns {
            write!(s, ",{}", fmt_value(series.get(t))).unwrap();
        }
        s.push('\n');
    }
    s
}

fn summary_line(name: &str, cell: &CellResult) -> String {
    let mut s = format!("{name:<24} selected=[{}]", cell.selected.join(","));
    for fit in &cell.fits {
        let significant = fit
            .regressions
            .iter()
            .filter(|(_, r)| r.alpha.as_ref().is_some_and(|a| a.p_value < 0.05))
            .count();
        let grs = fit
            .grs
            .map(|g| format!("{:.2} (p={:.2})", g.f_stat, g.p_value))
            .unwrap_or_default();
        write!(
            s,
            "  {}: alpha@5%={significant} GRS={grs}",
            fit.model.label()
        )
        .unwrap();
    }
    s
}

/// Render every artifact of a run as `relative path -> bytes`.
pub fn render(
    cfg: &RunConfig,
    inputs: &Inputs,
    analysis: &Analysis,
) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut files: BTreeMap<PathBuf, Vec<u8>> = BTreeMap::new();
    let f = &analysis.factors;
    files.insert(
        "factors.csv".into(),
        series_csv(
            &inputs.calendar,
            &[
                ("CM", &f.cm),
                ("SMB", &f.smb),
                ("Mom", &f.mom),
                ("rf", &f.rf),
            ],
        )
        .into_bytes(),
    );
    let mut summary = String::new();
    for (cell, result) in &analysis.cells {
        let dir = PathBuf::from("cells").join(cell.name());
        let mut descriptive = result.descriptive.clone();
        descriptive.title = format!("{} portfolios ({})", cell.name(), "percentage points");
        files.insert(
            dir.join("descriptive.txt"),
            table_text(&descriptive).into_bytes(),
        );
        files.insert(
            dir.join("descriptive.json"),
            table_json(&descriptive).into_bytes(),
        );
        if let Some(reg) = &result.regression {
            let mut reg = reg.clone();
            reg.title = format!("{} factor regressions", cell.name());
            files.insert(dir.join("regression.txt"), table_text(&reg).into_bytes());
            files.insert(dir.join("regression.json"), table_json(&reg).into_bytes());
        }
        let cols: Vec<(&str, &ReturnSeries)> = result
            .columns
            .iter()
            .map(|(l, s)| (l.as_str(), s))
            .collect();
        files.insert(
            dir.join("portfolios.csv"),
            series_csv(&inputs.calendar, &cols).into_bytes(),
        );
        summary.push_str(&summary_line(&cell.name(), result));
        summary.push('\n');
    }
    files.insert("summary.txt".into(), summary.into_bytes());

    for field in &cfg.analysis.tvl_fields {
        for (name, panel) in &analysis.panels {
            let fig = tvl_ratio_figure(panel, *field);
            fig.validate()
                .context(|| format!("report: tvl ratio figure {name}"))?;
            files.insert(
                PathBuf::from("figures").join(format!("tvl_ratio-{}-{name}.csv", field.as_str())),
                figure_csv(&fig).into_bytes(),
            );
            let years: Vec<i32> = if cfg.analysis.figure_years.is_empty() {
                let c = &cfg.calendar;
                (chrono::Datelike::year(&c.anchor)..=chrono::Datelike::year(&c.end)).collect()
            } else {
                cfg.analysis.figure_years.clone()
            };
            for year in years {
                let fig = return_vs_tvl_figure(panel, year, *field)
                    .context(|| format!("report: scatter {name} {year}"))?;
                files.insert(
                    PathBuf::from("figures").join(format!(
                        "returns_vs_tvl-{}-{name}-{year}.csv",
                        field.as_str()
                    )),
                    figure_csv(&fig).into_bytes(),
                );
            }
        }
    }

    #[derive(Serialize)]
    struct Artifact<'a> {
        path: &'a str,
        sha256: String,
        bytes: usize,
    }
    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'a str,
        version: &'a str,
        config: serde_json::Value,
        inputs: &'a [InputHash],
        artifacts: Vec<Artifact<'a>>,
    }
    let mut config = serde_json::to_value(cfg).expect("config serialises");
    // The output location is where the manifest lives, not an input.
    config.as_object_mut().unwrap().remove("output");
    let paths: Vec<String> = files
        .keys()
        .map(|p| p.to_string_lossy().replace('\\', "/"))
        .collect();
    let manifest = Manifest {
        tool: "cryptofactor",
        version: VERSION,
        config,
        inputs: &inputs.hashes,
        artifacts: files
            .values()
            .zip(&paths)
            .map(|(bytes, path)| Artifact {
                path,
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    files.insert("manifest.json".into(), text.into_bytes());
    Ok(files)
}

/// Write `files` into a fresh sibling directory of `output`, then swap it
/// into place so readers never see a partial run.
pub fn promote(files: &BTreeMap<PathBuf, Vec<u8>>, output: &Path) -> Result<()> {
    let parent = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".cryptofactor-staging-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    for (rel, bytes) in files {
        let path = staging.path().join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let staged = staging.keep();
    if output.exists() {
        if !output.is_dir() {
            return Err(Error::Data(format!(
                "{} exists and is not a directory",
                output.display()
            )));
        }
        let old = tempfile::Builder::new()
            .prefix(".cryptofactor-previous-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        let old_path = old.path().join("run");
        std::fs::rename(output, &old_path).map_err(|e| Error::io(output, e))?;
        std::fs::rename(&staged, output).map_err(|e| Error::io(output, e))?;
        drop(old);
    } else {
        std::fs::rename(&staged, output).map_err(|e| Error::io(output, e))?;
    }
    Ok(())
}

/// Full run: load, analyse, render, promote. Returns the summary text.
pub fn run_analysis(cfg: &RunConfig, output: &Path, jobs: usize) -> Result<String> {
    let inputs = load_inputs(cfg)?;
    let analysis = analyze(cfg, &inputs, jobs)?;
    let files = render(cfg, &inputs, &analysis)?;
    promote(&files, output)?;
    Ok(String::from_utf8_lossy(&files[Path::new("summary.txt")]).into_owned())
}

/// Re-render text tables from the structured tables of a finished run.
pub fn rerender_tables(dir: &Path) -> Result<Vec<PathBuf>> {
    let cells = dir.join("cells");
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&cells)
        .map_err(|e| Error::io(&cells, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut written = Vec::new();
    for cell in entries {
        for stem in ["descriptive", "regression"] {
            let json = cell.join(format!("{stem}.json"));
            if !json.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
            let table = crate::emit::parse_table_json(&text)
                .map_err(|e| Error::Data(format!("{}: {e}", json.display())))?;
            let txt = cell.join(format!("{stem}.txt"));
            std::fs::write(&txt, table_text(&table)).map_err(|e| Error::io(&txt, e))?;
            written.push(txt);
        }
    }
    Ok(written)
}

/// Cache records for a synthetic panel, plus the risk-free and market series.
pub fn synth_records(cfg: &RunConfig, out: &SynthOutput) -> Vec<RawRecord> {
    let panel = &out.panel;
    let mut records = Vec::new();
    for (a, id) in panel.assets().iter().enumerate() {
        for (t, date) in panel.calendar().dates().enumerate() {
            let c = panel.cell(a, t);
            if c.price.is_none() && c.market_cap.is_none() && c.tvl_total.is_none() {
                continue;
            }
            let mut r = RawRecord::new(id.clone(), date);
            r.price = c.price;
            r.market_cap = c.market_cap;
            r.tvl_total = c.tvl_total;
            r.tvl_simple = c.tvl_simple;
            r.categories = panel.categories(a).clone();
            records.push(r);
        }
    }
    for (t, date) in panel.calendar().dates().enumerate() {
        let mut rf = RawRecord::new(cfg.data.risk_free_id.clone(), date);
        rf.price = out.factors.rf.get(t);
        records.push(rf);
        let mut m = RawRecord::new(cfg.data.market_id.clone(), date);
        m.market_cap = out.market_total[t];
        records.push(m);
    }
    records
}

fn truth_json(seed: u64, out: &SynthOutput) -> String {
    let t = &out.truth;
    let factors: BTreeMap<&str, Vec<Option<f64>>> = t
        .factor_names
        .iter()
        .map(String::as_str)
        .zip(t.factors.iter().map(|f| f.values().to_vec()))
        .collect();
    let assets: Vec<serde_json::Value> = out
        .panel
        .assets()
        .iter()
        .enumerate()
        .map(|(i, id)| serde_json::json!({"asset_id": id, "alpha": t.alphas[i], "betas": t.betas[i]}))
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({
        "seed": seed,
        "factor_names": t.factor_names,
        "factors": factors,
        "assets": assets,
    }))
    .unwrap();
    s.push('\n');
    s
}

fn write_atomically(
    path: &Path,
    write: impl FnOnce(&mut std::fs::File) -> Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Generate a synthetic cache at `cache` (and `<cache>.truth.json`).
pub fn run_synth(cfg: &RunConfig, seed: u64, cache: &Path) -> Result<usize> {
    let calendar = cfg.panel_calendar()?;
    let mut spec = cfg.synth.spec(&calendar);
    spec.seed = seed;
    let out = generate(&spec).context(|| "synth".into())?;
    let records = synth_records(cfg, &out);
    write_atomically(cache, |f| {
        write_cache(&records, f).map_err(|source| Error::Cache {
            path: cache.to_path_buf(),
            source,
        })
    })?;
    let truth = cache.with_extension("truth.json");
    write_atomically(&truth, |f| {
        f.write_all(truth_json(seed, &out).as_bytes())
            .map_err(|e| Error::io(&truth, e))
    })?;
    Ok(records.len())
}

/// Merge `asset_id,categories` sidecar tags into records.
pub fn apply_sidecar(records: &mut [RawRecord], path: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut tags: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let id = row.get(0).unwrap_or("").to_string();
        let set = tags.entry(id).or_default();
        set.extend(
            row.get(1)
                .unwrap_or("")
                .split('|')
                .filter(|t| !t.is_empty())
                .map(String::from),
        );
    }
    for r in records {
        if let Some(extra) = tags.get(&r.asset_id) {
            r.categories.extend(extra.iter().cloned());
        }
    }
    Ok(())
}

/// Fetch configured assets plus the risk-free and market series into the cache.
pub fn run_ingest(cfg: &RunConfig) -> Result<usize> {
    let mut ids: Vec<String> = cfg.data.assets.clone();
    ids.push(cfg.data.risk_free_id.clone());
    ids.push(cfg.data.market_id.clone());
    ids.sort();
    ids.dedup();
    let calendar = cfg.panel_calendar()?;
    let start = calendar.anchor() - chrono::Duration::days(i64::from(cfg.universe.staleness_days));
    let fetched = fetch_history(&cfg.client, &ids, start, cfg.calendar.end)?;
    let mut records = records_only(fetched);
    if let Some(sidecar) = &cfg.data.categories_sidecar {
        apply_sidecar(&mut records, sidecar)?;
    }
    let cache = &cfg.data.cache;
    write_atomically(cache, |f| {
        write_cache(&records, f).map_err(|source| Error::Cache {
            path: cache.clone(),
            source,
        })
    })?;
    Ok(records.len())
}

/// Round-trip helpers for callers holding paths.
pub fn save_records(records: &[RawRecord], path: &Path) -> Result<()> {
    save_cache(records, path).map_err(|source| Error::Cache {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_records(path: &Path) -> Result<Vec<RawRecord>> {
    load_cache(path).map_err(|source| Error::Cache {
        path: path.to_path_buf(),
        source,
    })
}
