//! HTTP client for remote price / market-cap / TVL histories.
//!
//! One request per asset:
//!
//! ```text
//! GET {endpoint}/history/{asset_id}?start=2023-01-02&end=2024-12-31
//! x-api-key: <value of the configured environment variable>
//! ```
//!
//! answered with
//!
//! ```json
//! {"asset_id": "ethereum",
//!  "rows": [{"date": "2023-01-02", "timestamp": "2023-01-03T00:00:00Z",
//!            "price": 1214.5, "market_cap": 1.46e11,
//!            "tvl": {"total": 2.57e10, "staking": 1.6e9},
//!            "categories": ["L1"]}]}
//! ```
//!
//! `404` means the service has nothing for the asset. `429`, `5xx` and
//! transport failures are retried with exponential backoff up to the retry
//! budget; `401`/`403` fail immediately.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate, Utc};
use cryptofactor_core::universe::{compute_simple_tvl, TvlWarning, TOTAL_TVL_KEY};
use cryptofactor_core::RawRecord;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in files or logs.
    pub api_key_env: Option<String>,
    pub rate_limit_per_minute: u32,
    /// Attempts per request, including the first.
    pub retry_budget: u32,
    pub parallelism: usize,
    pub timeout_secs: u64,
    pub backoff_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key_env: None,
            rate_limit_per_minute: 30,
            retry_budget: 4,
            parallelism: 4,
            timeout_secs: 30,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchedRecord {
    pub record: RawRecord,
    pub source_timestamp: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("client config: {0}")]
    Config(String),
    /// Network or authorisation failure; the request may succeed later.
    #[error("{asset}: unavailable after {attempts} attempt(s): {reason}")]
    Unavailable {
        asset: String,
        attempts: u32,
        reason: String,
    },
    #[error("{asset}: malformed payload at `{field}`: {message}")]
    Parse {
        asset: String,
        field: String,
        message: String,
    },
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::Unavailable { .. })
    }

    pub fn attempts(&self) -> Option<u32> {
        match self {
            FetchError::Unavailable { attempts, .. } => Some(*attempts),
            _ => None,
        }
    }
}

/// Spaces request starts at least `interval` apart across all workers.
struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(per_minute: u32) -> Self {
        Self {
            interval: Duration::from_secs(60) / per_minute.max(1),
            next: Mutex::new(Instant::now()),
        }
    }

    fn acquire(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap();
            let slot = (*next).max(Instant::now());
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

/// Fetch `[start, end]` histories for every asset, at most `parallelism`
/// requests in flight. Records come back sorted by asset then date.
pub fn fetch_history(
    config: &ClientConfig,
    assets: &[String],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<Vec<FetchedRecord>, FetchError> {
    if assets.is_empty() {
        return Ok(Vec::new());
    }
    if end < start {
        return Err(FetchError::Config(format!(
            "empty date range {start}..{end}"
        )));
    }
    if config.endpoint.is_empty() {
        return Err(FetchError::Config("endpoint is not set".into()));
    }
    let api_key =
        match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                FetchError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let limiter = RateLimiter::new(config.rate_limit_per_minute);
    let next = AtomicUsize::new(0);
    type Slot = Mutex<Option<Result<Vec<FetchedRecord>, FetchError>>>;
    let slots: Vec<Slot> = assets.iter().map(|_| Mutex::new(None)).collect();
    let workers = config.parallelism.clamp(1, assets.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(asset) = assets.get(i) else { break };
                let out = fetch_asset(
                    &agent,
                    &limiter,
                    config,
                    api_key.as_deref(),
                    asset,
                    start,
                    end,
                );
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    let mut records = Vec::new();
    for slot in slots {
        records.extend(slot.into_inner().unwrap().expect("every asset visited")?);
    }
    records.sort_by(|a, b| {
        (&a.record.asset_id, a.record.date).cmp(&(&b.record.asset_id, b.record.date))
    });
    Ok(records)
}

fn fetch_asset(
    agent: &ureq::Agent,
    limiter: &RateLimiter,
    config: &ClientConfig,
    api_key: Option<&str>,
    asset: &str,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<Vec<FetchedRecord>, FetchError> {
    let url = format!(
        "{}/history/{asset}?start={start}&end={end}",
        config.endpoint.trim_end_matches('/')
    );
    let budget = config.retry_budget.max(1);
    let mut attempts = 0;
    loop {
        attempts += 1;
        limiter.acquire();
        log::debug!("GET {url} (attempt {attempts})");
        let mut request = agent.get(&url);
        if let Some(key) = api_key {
            request = request.header("x-api-key", key);
        }
        let retry_reason = match request.call() {
            Ok(mut response) => {
                let status = response.status().as_u16();
                match status {
                    200 => {
                        let body = response.body_mut().read_to_string().map_err(|e| {
                            FetchError::Unavailable {
                                asset: asset.into(),
                                attempts,
                                reason: format!("reading body: {e}"),
                            }
                        })?;
                        return parse_history(asset, &body);
                    }
                    404 => return Ok(Vec::new()),
                    401 | 403 => {
                        return Err(FetchError::Unavailable {
                            asset: asset.into(),
                            attempts,
                            reason: format!("HTTP {status}: check credentials"),
                        })
                    }
                    429 | 500..=599 => format!("HTTP {status}"),
                    _ => {
                        return Err(FetchError::Unavailable {
                            asset: asset.into(),
                            attempts,
                            reason: format!("unexpected HTTP {status}"),
                        })
                    }
                }
            }
            Err(e) => e.to_string(),
        };
        if attempts >= budget {
            return Err(FetchError::Unavailable {
                asset: asset.into(),
                attempts,
                reason: retry_reason,
            });
        }
        log::warn!("{asset}: {retry_reason}, retrying");
        std::thread::sleep(Duration::from_millis(
            config.backoff_ms << (attempts - 1).min(6),
        ));
    }
}

/// Decode one history payload, validating every field.
pub fn parse_history(asset: &str, body: &str) -> Result<Vec<FetchedRecord>, FetchError> {
    let bad = |field: &str, message: String| FetchError::Parse {
        asset: asset.into(),
        field: field.into(),
        message,
    };
    let root: Value = serde_json::from_str(body).map_err(|e| bad("body", e.to_string()))?;
    let rows = root
        .get("rows")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("rows", "expected an array".into()))?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let text = |field: &str| {
            row.get(field)
                .and_then(Value::as_str)
                .ok_or_else(|| bad(field, "expected a string".into()))
        };
        let date = NaiveDate::parse_from_str(text("date")?, "%Y-%m-%d")
            .map_err(|e| bad("date", e.to_string()))?;
        let source_timestamp = DateTime::parse_from_rfc3339(text("timestamp")?)
            .map_err(|e| bad("timestamp", e.to_string()))?
            .with_timezone(&Utc);
        let amount = |field: &str, v: Option<&Value>| -> Result<Option<f64>, FetchError> {
            match v {
                None | Some(Value::Null) => Ok(None),
                Some(v) => match v.as_f64() {
                    Some(x) if x.is_finite() && x >= 0.0 => Ok(Some(x)),
                    _ => Err(bad(
                        field,
                        format!("expected a nonnegative number, got {v}"),
                    )),
                },
            }
        };
        let mut record = RawRecord::new(asset, date);
        record.price = amount("price", row.get("price"))?;
        record.market_cap = amount("market_cap", row.get("market_cap"))?;
        match row.get("tvl") {
            None | Some(Value::Null) => {}
            Some(Value::Object(map)) => {
                let mut by_category = BTreeMap::new();
                for (k, v) in map {
                    let field = format!("tvl.{k}");
                    let x = amount(&field, Some(v))?.ok_or_else(|| bad(&field, "null".into()))?;
                    by_category.insert(k.clone(), x);
                }
                if !by_category.contains_key(TOTAL_TVL_KEY) {
                    return Err(bad("tvl.total", "missing".into()));
                }
                let simple =
                    compute_simple_tvl(&by_category).map_err(|e| bad("tvl", e.to_string()))?;
                for w in &simple.warnings {
                    match w {
                        TvlWarning::UnknownCategory(c) => {
                            log::warn!("{asset} {date}: unknown TVL category `{c}` ignored")
                        }
                        TvlWarning::Floored { .. } => {
                            log::warn!("{asset} {date}: excluded TVL exceeds total, floored at 0")
                        }
                    }
                }
                record.tvl_total = by_category.get(TOTAL_TVL_KEY).copied();
                record.tvl_simple = Some(simple.value);
            }
            Some(other) => return Err(bad("tvl", format!("expected an object, got {other}"))),
        }
        record.categories = match row.get("categories") {
            None | Some(Value::Null) => BTreeSet::new(),
            Some(Value::Array(tags)) => tags
                .iter()
                .map(|t| {
                    t.as_str()
                        .map(String::from)
                        .ok_or_else(|| bad("categories", "expected strings".into()))
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(bad("categories", "expected an array".into())),
        };
        out.push(FetchedRecord {
            record,
            source_timestamp,
        });
    }
    Ok(out)
}

/// Drop source timestamps, keeping the cacheable part.
pub fn records_only(fetched: Vec<FetchedRecord>) -> Vec<RawRecord> {
    fetched.into_iter().map(|f| f.record).collect()
}
