//! CSV ingestion for single-response datasets, descriptive statistics and
//! the sample autocorrelation function.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, LoadIssue, Result};
use crate::regression::RegressionData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Column holding a unique row key (a calendar month for the wind data).
    pub date_column: String,
    pub response_column: String,
    pub covariate_columns: Vec<String>,
    /// Model `ln(response)`; the raw response must then be positive.
    pub log_response: bool,
    /// Open physical ranges `(column, low, high)` checked per row.
    pub bands: Vec<(String, f64, f64)>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            date_column: "date".into(),
            response_column: "gust_ms".into(),
            covariate_columns: vec!["pressure_mb".into()],
            log_response: true,
            bands: vec![("pressure_mb".into(), 800.0, 1100.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// 1-based line in the file, header included.
    pub line: usize,
    pub date: String,
    /// Raw response before any log transform.
    pub response: f64,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub data: RegressionData,
}

impl Dataset {
    pub fn responses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.response).collect()
    }
}

pub fn ingest_csv(path: &Path, config: &IngestConfig) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    ingest_str(&text, config)
}

/// Parses CSV text; every rejected row is reported, not just the first.
pub fn ingest_str(text: &str, config: &IngestConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Load(vec![LoadIssue {
                line: 1,
                message: format!("missing column {name:?}; header has {header:?}"),
            }])
        })
    };
    let date_col = find(&config.date_column)?;
    let resp_col = find(&config.response_column)?;
    let cov_cols = config
        .covariate_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let bands = config
        .bands
        .iter()
        .map(|(c, lo, hi)| Ok((c.clone(), find(c)?, *lo, *hi)))
        .collect::<Result<Vec<_>>>()?;

    let mut issues = Vec::new();
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut row_issues = Vec::new();
        if rec.len() != header.len() {
            issues.push(LoadIssue {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
            continue;
        }
        let mut num = |col: usize| -> Option<f64> {
            let raw = &rec[col];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    row_issues.push(format!("column {:?}: cannot parse {raw:?}", header[col]));
                    None
                }
            }
        };
        let response = num(resp_col);
        let covariates: Vec<Option<f64>> = cov_cols.iter().map(|&c| num(c)).collect();
        let banded: Vec<(String, Option<f64>, f64, f64)> =
            bands.iter().map(|(name, c, lo, hi)| (name.clone(), num(*c), *lo, *hi)).collect();

        let date = rec[date_col].to_string();
        if date.is_empty() {
            row_issues.push(format!("column {:?} is empty", config.date_column));
        } else if let Some(first) = seen.get(&date) {
            row_issues.push(format!("duplicate {} {date:?} (first on line {first})", config.date_column));
        } else {
            seen.insert(date.clone(), line);
        }
        if let Some(v) = response {
            if v <= 0.0 {
                row_issues.push(format!("column {:?} must be positive, got {v}", config.response_column));
            }
        }
        for (name, v, lo, hi) in banded {
            if let Some(v) = v {
                if !(v > lo && v < hi) {
                    row_issues.push(format!("column {name:?} value {v} outside ({lo}, {hi})"));
                }
            }
        }

        if row_issues.is_empty() {
            records.push(Record {
                line,
                date,
                response: response.unwrap_or(f64::NAN),
                covariates: covariates.into_iter().map(|c| c.unwrap_or(f64::NAN)).collect(),
            });
        } else {
            issues.extend(row_issues.into_iter().map(|message| LoadIssue { line, message }));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Load(issues));
    }
    if records.is_empty() {
        return Err(Error::Load(vec![LoadIssue {
            line: 1,
            message: "no data rows".into(),
        }]));
    }

    let y: Vec<f64> = records
        .iter()
        .map(|r| if config.log_response { r.response.ln() } else { r.response })
        .collect();
    let columns: Vec<Vec<f64>> = (0..cov_cols.len())
        .map(|j| records.iter().map(|r| r.covariates[j]).collect())
        .collect();
    let named: Vec<(&str, &[f64])> = config
        .covariate_columns
        .iter()
        .zip(&columns)
        .map(|(n, c)| (n.as_str(), c.as_slice()))
        .collect();
    let data = RegressionData::from_columns(y, &named)?;
    Ok(Dataset { records, data })
}

/// How skewness and kurtosis are standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentConvention {
    /// `m₃/m₂^{3/2}` and `m₄/m₂²` with central moments over `n`.
    Raw,
    /// Adjusted Fisher-Pearson `G₁` and `G₂ + 3`.
    BiasCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub n: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    /// `n − 1` denominator.
    pub sd: f64,
    /// `None` for constant data.
    pub skewness: Option<f64>,
    /// Not excess; 3 for a normal law. `None` for constant data.
    pub kurtosis: Option<f64>,
    pub convention: MomentConvention,
}

pub fn descriptive_stats(values: &[f64], convention: MomentConvention) -> Result<Descriptive> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("descriptive statistics need n >= 2, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("descriptive statistics input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let moment = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / nf;
    let (m2, m3, m4) = (moment(2), moment(3), moment(4));
    let (mut skewness, mut kurtosis) = (None, None);
    if m2 > 0.0 {
        let g1 = m3 / m2.powf(1.5);
        let b2 = m4 / (m2 * m2);
        match convention {
            MomentConvention::Raw => {
                skewness = Some(g1);
                kurtosis = Some(b2);
            }
            MomentConvention::BiasCorrected => {
                if n > 2 {
                    skewness = Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0));
                }
                if n > 3 {
                    let g2 = ((nf + 1.0) * (b2 - 3.0) + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
                    kurtosis = Some(g2 + 3.0);
                }
            }
        }
    }
    Ok(Descriptive {
        n,
        min: sorted[0],
        median,
        mean,
        max: sorted[n - 1],
        sd: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness,
        kurtosis,
        convention,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acf {
    /// Lags `0..=max_lag`; `values[0] = 1`.
    pub values: Vec<f64>,
    /// Half-width `1.96/√n` of the white-noise band.
    pub band: f64,
}

impl Acf {
    /// Lags `≥ 1` outside the band.
    pub fn violations(&self) -> Vec<usize> {
        (1..self.values.len()).filter(|&k| self.values[k].abs() > self.band).collect()
    }
}

/// Sample ACF with the biased `1/n` denominator.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Acf> {
    let n = series.len();
    if 2 * max_lag >= n {
        return Err(Error::InvalidInput(format!("max_lag {max_lag} must be below n/2 = {}", n as f64 / 2.0)));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(Error::Domain("autocorrelation of a constant series".into()));
    }
    let mut values = vec![1.0];
    values.extend((1..=max_lag).map(|k| (0..n - k).map(|t| c[t] * c[t + k]).sum::<f64>() / c0));
    Ok(Acf {
        values,
        band: 1.96 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "date,gust_ms,pressure_mb\n2001-01,12.5,1012.0\n2001-02,15.1,1009.5\n2001-03,9.8,1015.2\n2001-04,20.4,1001.1\n";

    #[test]
    fn loads_and_logs_the_response() {
        let d = ingest_str(CSV, &IngestConfig::default()).unwrap();
        assert_eq!(d.data.n(), 4);
        assert_eq!(d.records[1].line, 3);
        assert!((d.data.y()[0] - 12.5f64.ln()).abs() < 1e-15);
        assert_eq!(d.data.labels()[1], "pressure_mb");
    }

    #[test]
    fn itemized_row_errors() {
        let bad = "date,gust_ms,pressure_mb\n2001-01,12.5,1012.0\n2001-02,-1,1009.5\n2001-01,9.8,1015.2\n2001-04,abc,700\n2001-05,3\n";
        let Err(Error::Load(issues)) = ingest_str(bad, &IngestConfig::default()) else {
            panic!("expected load errors");
        };
        let lines: Vec<usize> = issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![3, 4, 5, 5, 6]);
        assert!(issues[0].message.contains("positive"));
        assert!(issues[1].message.contains("duplicate"));
    }

    #[test]
    fn empty_and_missing_columns() {
        let e = ingest_str("date,gust_ms,pressure_mb\n", &IngestConfig::default()).unwrap_err();
        assert!(e.to_string().contains("no data rows"), "{e}");
        assert!(ingest_str("date,gust\n2001-01,3\n", &IngestConfig::default()).is_err());
    }

    #[test]
    fn raw_moments_on_a_small_sample() {
        let d = descriptive_stats(&[1.0, 2.0, 3.0, 4.0, 10.0], MomentConvention::Raw).unwrap();
        assert_eq!((d.min, d.median, d.mean, d.max), (1.0, 3.0, 4.0, 10.0));
        assert!((d.sd - 12.5f64.sqrt()).abs() < 1e-12);
        // deviations −3, −2, −1, 0, 6: m2 = 10, m3 = 36, m4 = 278.8
        assert!((d.skewness.unwrap() - 36.0 / 10f64.powf(1.5)).abs() < 1e-12);
        assert!((d.kurtosis.unwrap() - 2.788).abs() < 1e-12);
    }

    #[test]
    fn constant_input_has_no_shape_moments() {
        let d = descriptive_stats(&[2.0; 6], MomentConvention::Raw).unwrap();
        assert_eq!(d.sd, 0.0);
        assert!(d.skewness.is_none() && d.kurtosis.is_none());
    }

    #[test]
    fn acf_lag_zero_and_alternating() {
        let s: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = acf(&s, 3).unwrap();
        assert_eq!(a.values[0], 1.0);
        assert!((a.values[1] + 19.0 / 20.0).abs() < 1e-12);
        assert!(acf(&s, 10).is_err());
    }
}
