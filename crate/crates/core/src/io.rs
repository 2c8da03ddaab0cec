//! Dataset, configuration and manifest formats, and daily-quote ingestion.
//!
//! Dataset files are comma-separated with a typed header whose fields read
//! `name:role`, role one of `index`, `count`, `covariate`. A series file has
//! one index and one count column; a covariate file has one index column and
//! any number of covariate columns. Rows must share the same index sequence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ParError, Result};
use crate::linalg::Matrix;
use crate::model::{CountSeries, CovariatePanel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Index,
    Count,
    Covariate,
}

fn parse_header(line: &str) -> Result<Vec<(String, Role)>> {
    let fields: Vec<String> = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(line.as_bytes())
        .records()
        .next()
        .and_then(|r| r.ok())
        .map(|r| r.iter().map(str::to_string).collect())
        .unwrap_or_default();
    fields
        .iter()
        .map(|field| {
            let (name, role) = field.trim().rsplit_once(':').ok_or_else(|| ParError::Data {
                line: 1,
                msg: format!("header field `{field}` is not of the form name:role"),
            })?;
            let role = match role {
                "index" => Role::Index,
                "count" => Role::Count,
                "covariate" => Role::Covariate,
                other => {
                    return Err(ParError::Data {
                        line: 1,
                        msg: format!("unknown column role `{other}` (expected index, count or covariate)"),
                    })
                }
            };
            if name.is_empty() {
                return Err(ParError::Data {
                    line: 1,
                    msg: "empty column name".into(),
                });
            }
            Ok((name.to_string(), role))
        })
        .collect()
}

/// Header line and the nonblank data records with their 1-based line numbers.
fn read_records(text: &str) -> Result<(String, Vec<(usize, csv::StringRecord)>)> {
    let header = text.lines().next().unwrap_or("").to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ParError::Data {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    Ok((header, rows))
}

fn render_rows(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// A count series with its row index labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFile {
    pub index: Vec<String>,
    pub series: CountSeries,
}

/// Covariate columns with their row index labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateFile {
    pub index: Vec<String>,
    pub names: Vec<String>,
    pub panel: CovariatePanel<f64>,
}

impl SeriesFile {
    /// Index labels `0..T`.
    pub fn numbered(series: CountSeries) -> Self {
        Self {
            index: (0..series.len()).map(|t| t.to_string()).collect(),
            series,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (head, rows) = read_records(text)?;
        let header = parse_header(&head)?;
        let roles: Vec<Role> = header.iter().map(|h| h.1).collect();
        if roles != [Role::Index, Role::Count] {
            return Err(ParError::Data {
                line: 1,
                msg: "series file header must be `name:index,label:count`".into(),
            });
        }
        let mut index = Vec::new();
        let mut values = Vec::new();
        for (line, fields) in rows {
            if fields.len() != 2 {
                return Err(ParError::Data {
                    line,
                    msg: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            let v: u64 = fields[1].parse().map_err(|_| ParError::Data {
                line,
                msg: format!("`{}` is not a nonnegative integer count", &fields[1]),
            })?;
            index.push(fields[0].to_string());
            values.push(v);
        }
        Ok(Self {
            index,
            series: CountSeries::new(header[1].0.clone(), values),
        })
    }

    pub fn render(&self) -> String {
        let header = vec!["t:index".to_string(), format!("{}:count", self.series.label)];
        let body = self
            .index
            .iter()
            .zip(&self.series.values)
            .map(|(i, v)| vec![i.clone(), v.to_string()]);
        render_rows(std::iter::once(header).chain(body))
    }
}

impl CovariateFile {
    pub fn numbered(names: Vec<String>, panel: CovariatePanel<f64>) -> Self {
        Self {
            index: (0..panel.rows()).map(|t| t.to_string()).collect(),
            names,
            panel,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (head, rows) = read_records(text)?;
        let header = parse_header(&head)?;
        if header.first().map(|h| h.1) != Some(Role::Index) || header[1..].iter().any(|h| h.1 != Role::Covariate) {
            return Err(ParError::Data {
                line: 1,
                msg: "covariate file header must be `name:index` followed by `name:covariate` columns".into(),
            });
        }
        let k = header.len() - 1;
        let mut index = Vec::new();
        let mut data = Vec::new();
        for (line, fields) in rows {
            if fields.len() != k + 1 {
                return Err(ParError::Data {
                    line,
                    msg: format!("expected {} fields, found {}", k + 1, fields.len()),
                });
            }
            index.push(fields[0].to_string());
            for f in fields.iter().skip(1) {
                let v: f64 = f.parse().map_err(|_| ParError::Data {
                    line,
                    msg: format!("`{f}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(ParError::Data {
                        line,
                        msg: format!("non-finite covariate `{f}`"),
                    });
                }
                data.push(v);
            }
        }
        let panel = CovariatePanel::new(Matrix::new(index.len(), k, data)?)?;
        Ok(Self {
            index,
            names: header[1..].iter().map(|h| h.0.clone()).collect(),
            panel,
        })
    }

    pub fn render(&self) -> String {
        let header = std::iter::once("t:index".to_string())
            .chain(self.names.iter().map(|n| format!("{n}:covariate")))
            .collect();
        let body = self.index.iter().enumerate().map(|(t, i)| {
            std::iter::once(i.clone())
                .chain(self.panel.row(t).iter().map(|v| v.to_string()))
                .collect()
        });
        render_rows(std::iter::once(header).chain(body))
    }
}

/// Checks that a series and its covariates share one index.
pub fn check_aligned(series: &SeriesFile, covariates: &CovariateFile) -> Result<()> {
    if series.index != covariates.index {
        let first = series
            .index
            .iter()
            .zip(&covariates.index)
            .position(|(a, b)| a != b)
            .unwrap_or(series.index.len().min(covariates.index.len()));
        return Err(ParError::Data {
            line: first + 2,
            msg: format!(
                "series `{}` and covariate file disagree on the index from row {} on",
                series.series.label,
                first + 1
            ),
        });
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| ParError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Flat configuration: one `key = value` per line, `#` starts a comment.
///
/// Keys are kebab-case and mirror command-line flags; later lines override
/// earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatConfig {
    pub entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ParError::Data {
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return Err(ParError::Data {
                    line: i + 1,
                    msg: format!("invalid key `{k}`"),
                });
            }
            entries.insert(k.to_string(), v.to_string());
        }
        Ok(Self { entries })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| ParError::Format(format!("config key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Provenance of one command run, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    /// Input path to lowercase hex SHA-256 of its bytes.
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(command: &str, config: BTreeMap<String, String>, master_seed: u64) -> Self {
        let now = Utc::now().to_rfc3339();
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            master_seed,
            started_at: now.clone(),
            finished_at: now,
            input_digests: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.input_digests
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished_at = Utc::now().to_rfc3339();
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Reads `null` as NaN, the inverse of serde_json writing non-finite floats as `null`.
pub(crate) fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One trading day of one market.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyQuoteRecord {
    pub date: NaiveDate,
    pub market: String,
    pub open: f64,
    pub close: f64,
}

impl DailyQuoteRecord {
    pub fn is_increase(&self) -> bool {
        self.close > self.open
    }
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| ParError::Data {
        line,
        msg: format!("`{s}` is not a valid YYYY-MM-DD date"),
    })
}

fn expect_header(header: &str, expected: &[&str]) -> Result<()> {
    let found: Vec<String> = header.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(ParError::Data {
            line: 1,
            msg: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

/// Parses `date,market,open,close` rows.
pub fn parse_daily_quotes(text: &str) -> Result<Vec<DailyQuoteRecord>> {
    let (header, rows) = read_records(text)?;
    expect_header(&header, &["date", "market", "open", "close"])?;
    rows.into_iter()
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(ParError::Data {
                    line,
                    msg: format!("expected 4 fields, found {}", f.len()),
                });
            }
            let price = |s: &str, what: &str| -> Result<f64> {
                match s.parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                    _ => Err(ParError::Data {
                        line,
                        msg: format!("{what} price `{s}` must be a positive number"),
                    }),
                }
            };
            if f[1].is_empty() {
                return Err(ParError::Data {
                    line,
                    msg: "empty market label".into(),
                });
            }
            Ok(DailyQuoteRecord {
                date: parse_date(&f[0], line)?,
                market: f[1].to_string(),
                open: price(&f[2], "open")?,
                close: price(&f[3], "close")?,
            })
        })
        .collect()
}

/// Parses `date,value` rows of a daily covariate; returns the column name too.
pub fn parse_daily_covariate(text: &str) -> Result<(String, Vec<(NaiveDate, f64)>)> {
    let (header, rows) = read_records(text)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2 || !cols[0].eq_ignore_ascii_case("date") || cols[1].is_empty() {
        return Err(ParError::Data {
            line: 1,
            msg: "expected header `date,<covariate name>`".into(),
        });
    }
    let values = rows
        .into_iter()
        .map(|(line, f)| {
            if f.len() != 2 {
                return Err(ParError::Data {
                    line,
                    msg: format!("expected 2 fields, found {}", f.len()),
                });
            }
            let v: f64 = f[1]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ParError::Data {
                    line,
                    msg: format!("`{}` is not a finite number", &f[1]),
                })?;
            Ok((parse_date(&f[0], line)?, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cols[1].to_string(), values))
}

pub type Month = (i32, u32);

pub fn month_label((y, m): Month) -> String {
    format!("{y:04}-{m:02}")
}

fn month_of(d: NaiveDate) -> Month {
    (d.year(), d.month())
}

fn next_month((y, m): Month) -> Month {
    if m == 12 {
        (y + 1, 1)
    } else {
        (y, m + 1)
    }
}

/// Monthly counts and covariates of one market.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketMonthly {
    pub months: Vec<Month>,
    pub counts: SeriesFile,
    pub covariates: CovariateFile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOutput {
    /// Markets in label order.
    pub markets: Vec<MarketMonthly>,
    pub warnings: Vec<String>,
}

/// Counts, per market and calendar month, the days with `close > open`, and
/// averages the daily covariate over each month.
///
/// Months without trading days for a market, or without covariate data, are
/// dropped with a warning. Duplicate (market, date) rows are rejected.
pub fn ingest_daily_to_monthly_counts(
    quotes: &[DailyQuoteRecord],
    covariate: &[(NaiveDate, f64)],
    covariate_name: &str,
) -> Result<IngestOutput> {
    if quotes.is_empty() {
        return Err(ParError::Degenerate("no daily quotes".into()));
    }
    let mut cov_sum: BTreeMap<Month, (f64, usize)> = BTreeMap::new();
    for &(d, v) in covariate {
        let e = cov_sum.entry(month_of(d)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let mut by_market: BTreeMap<&str, BTreeMap<NaiveDate, bool>> = BTreeMap::new();
    for q in quotes {
        if by_market
            .entry(q.market.as_str())
            .or_default()
            .insert(q.date, q.is_increase())
            .is_some()
        {
            return Err(ParError::Degenerate(format!(
                "duplicate quote for {} on {}",
                q.market, q.date
            )));
        }
    }
    let mut warnings = Vec::new();
    let mut markets = Vec::new();
    for (label, days) in by_market {
        let mut tally: BTreeMap<Month, u64> = BTreeMap::new();
        for (d, up) in &days {
            *tally.entry(month_of(*d)).or_insert(0) += u64::from(*up);
        }
        let first = *tally.keys().next().expect("nonempty market");
        let last = *tally.keys().next_back().expect("nonempty market");
        let mut months = Vec::new();
        let mut counts = Vec::new();
        let mut cov = Vec::new();
        let mut m = first;
        loop {
            match (tally.get(&m), cov_sum.get(&m)) {
                (None, _) => warnings.push(format!("{label}: no trading days in {}, month dropped", month_label(m))),
                (Some(_), None) => warnings.push(format!(
                    "{label}: no covariate data in {}, month dropped",
                    month_label(m)
                )),
                (Some(&c), Some(&(s, n))) => {
                    months.push(m);
                    counts.push(c);
                    cov.push(s / n as f64);
                }
            }
            if m == last {
                break;
            }
            m = next_month(m);
        }
        let index: Vec<String> = months.iter().map(|&m| month_label(m)).collect();
        markets.push(MarketMonthly {
            counts: SeriesFile {
                index: index.clone(),
                series: CountSeries::new(label, counts),
            },
            covariates: CovariateFile {
                index,
                names: vec![covariate_name.to_string()],
                panel: CovariatePanel::from_column(&cov)?,
            },
            months,
        });
    }
    Ok(IngestOutput { markets, warnings })
}
