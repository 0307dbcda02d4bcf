//! Pearson correlation with a two-sided p-value, and correlation of
//! disambiguation accuracy against external MT metric columns.

use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 samples, got {0}")]
    TooFew(usize),
    #[error("correlation is undefined for constant input")]
    Constant,
    #[error("input contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Product-moment correlation. The two-sided p-value tests rho = 0 with the
/// statistic `t = rho * sqrt((n-2) / (1-rho^2))` on `n-2` degrees of freedom,
/// evaluated as `I_{1-rho^2}((n-2)/2, 1/2)`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    let rho = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult {
        rho,
        p_value: two_sided_p(rho, n),
        n,
    })
}

fn two_sided_p(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    // 1 - rho^2, factored to keep precision near |rho| = 1
    let x = (1.0 - rho) * (1.0 + rho);
    if x <= 0.0 {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, x.min(1.0)).clamp(0.0, 1.0)
}

/// Accuracy and metric scores per system, as read from a delimited table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub systems: Vec<String>,
    pub accuracy: Vec<Option<f64>>,
    /// (metric name, one cell per system)
    pub metrics: Vec<(String, Vec<Option<f64>>)>,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table has no header row")]
    NoHeader,
    #[error("table needs a system column, an accuracy column and at least one metric column")]
    TooFewColumns,
    #[error("row {row}: expected {expected} cells, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column:?}: {value:?} is not a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn cell(value: &str) -> Option<Option<f64>> {
    let v = value.trim();
    if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") || v == "-" {
        return Some(None);
    }
    v.parse::<f64>().ok().filter(|f| f.is_finite()).map(Some)
}

/// Parses a metrics table. The first column names the system; the column
/// headed `accuracy` (or else the second column) holds accuracy; every other
/// column is a metric. Tab-delimited if the header contains a tab, otherwise
/// comma-delimited. Empty, `NA` and `-` cells are missing values.
pub fn parse_metrics_table(text: &str) -> Result<MetricsTable, TableError> {
    let header_line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or(TableError::NoHeader)?;
    let delimiter = if header_line.contains('\t') {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 {
        return Err(TableError::TooFewColumns);
    }
    let acc_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("accuracy"))
        .filter(|&i| i != 0)
        .unwrap_or(1);

    let mut table = MetricsTable {
        systems: Vec::new(),
        accuracy: Vec::new(),
        metrics: header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 0 && i != acc_col)
            .map(|(_, h)| (h.clone(), Vec::new()))
            .collect(),
    };
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != header.len() {
            return Err(TableError::Ragged {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let parse = |i: usize| {
            cell(&record[i]).ok_or_else(|| TableError::BadNumber {
                row,
                column: header[i].clone(),
                value: record[i].to_string(),
            })
        };
        table.systems.push(record[0].to_string());
        table.accuracy.push(parse(acc_col)?);
        for (m, i) in (1..header.len()).filter(|&i| i != acc_col).enumerate() {
            let value = parse(i)?;
            table.metrics[m].1.push(value);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCorrelation {
    pub metric: String,
    pub result: Option<CorrelationResult>,
    pub error: Option<String>,
    /// Systems left out because a cell was missing.
    pub excluded: Vec<String>,
}

/// Correlates accuracy with each metric column. Rows with a missing accuracy
/// or metric cell are left out of that column's computation.
pub fn correlate_metrics(table: &MetricsTable) -> Vec<MetricCorrelation> {
    table
        .metrics
        .iter()
        .map(|(name, column)| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut excluded = Vec::new();
            for ((system, acc), metric) in table.systems.iter().zip(&table.accuracy).zip(column) {
                match (acc, metric) {
                    (Some(a), Some(m)) => {
                        xs.push(*a);
                        ys.push(*m);
                    }
                    _ => excluded.push(system.clone()),
                }
            }
            let (result, error) = match pearson(&xs, &ys) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MetricCorrelation {
                metric: name.clone(),
                result,
                error,
                excluded,
            }
        })
        .collect()
}
