//! Objectives defined by the posterior mean of a GP fitted to a data table.
//!
//! Table format: delimited text, one sample per row, `d` coordinate columns
//! followed by one value column. The delimiter (comma, tab, semicolon or
//! whitespace) is detected from the first data line, and a first row that
//! does not parse as numbers is treated as a header. Lines starting with `#`
//! are ignored.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_registration, Objective, TrueBest};
use crate::design::Domain;
use crate::error::{BoError, Result};
use crate::gp::{posterior_mean_max, tempered_posterior, JitterPolicy};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub header: Option<Vec<String>>,
}

impl Table {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Smallest box containing every point.
    pub fn bounding_box(&self) -> Result<Domain> {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in &self.points {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        Domain::new(lo, hi)
    }
}

const MAX_REPORTED: usize = 5;

fn detect_delimiter(line: &str) -> Option<u8> {
    [b',', b'\t', b';'].into_iter().find(|d| line.as_bytes().contains(d))
}

fn split_rows(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| BoError::Input("table is empty".into()))?;
    match detect_delimiter(first) {
        Some(delim) => {
            let mut rdr = csv::ReaderBuilder::new()
                .delimiter(delim)
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .comment(Some(b'#'))
                .from_reader(text.as_bytes());
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(|e| BoError::Input(format!("malformed table: {e}")))?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                if rec.iter().all(str::is_empty) {
                    continue;
                }
                rows.push((line, rec.iter().map(str::to_string).collect()));
            }
            Ok(rows)
        }
        None => Ok(text
            .lines()
            .enumerate()
            .filter(|(_, l)| {
                let l = l.trim();
                !l.is_empty() && !l.starts_with('#')
            })
            .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_string).collect()))
            .collect()),
    }
}

/// Parse table text. With `drop_last_coordinate` the final coordinate column
/// is removed, which maps simplex-constrained compositions to free coordinates.
pub fn parse_table(text: &str, drop_last_coordinate: bool) -> Result<Table> {
    let mut rows = split_rows(text)?;
    if rows.is_empty() {
        return Err(BoError::Input("table is empty".into()));
    }
    let header = if rows[0].1.iter().any(|f| f.parse::<f64>().is_err()) {
        Some(rows.remove(0).1)
    } else {
        None
    };
    if rows.is_empty() {
        return Err(BoError::Input("table has a header but no data rows".into()));
    }
    let width = header.as_ref().map_or(rows[0].1.len(), Vec::len);
    if width < 2 {
        return Err(BoError::Input(format!("need at least one coordinate and one value column, found {width} column(s)")));
    }
    let mut problems = Vec::new();
    let mut points = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        if fields.len() != width {
            problems.push(format!("line {line}: expected {width} fields, found {}", fields.len()));
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.iter().all(|x| x.is_finite()) => {
                let (x, y) = v.split_at(width - 1);
                points.push(x.to_vec());
                values.push(y[0]);
            }
            Ok(_) => problems.push(format!("line {line}: non-finite number")),
            Err(_) => problems.push(format!("line {line}: non-numeric field")),
        }
    }
    if !problems.is_empty() {
        let n = problems.len();
        let shown: Vec<String> = problems.into_iter().take(MAX_REPORTED).collect();
        return Err(BoError::Input(format!("{n} bad row(s) in table: {}", shown.join("; "))));
    }
    if drop_last_coordinate {
        if width < 3 {
            return Err(BoError::Input("cannot drop the only coordinate column".into()));
        }
        for p in &mut points {
            p.pop();
        }
    }
    Ok(Table { points, values, header })
}

pub fn load_table(path: &Path, drop_last_coordinate: bool) -> Result<Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BoError::Input(format!("cannot read table {}: {e}", path.display())))?;
    parse_table(&text, drop_last_coordinate)
}

/// Objective whose noiseless value is the GP posterior mean fitted to `table`.
/// The domain defaults to the bounding box of the data; the maximum is found
/// numerically and flagged as estimated.
pub fn tabular_objective(
    table: &Table,
    spec: &KernelSpec,
    noise_variance: f64,
    domain: Option<Domain>,
) -> Result<Objective> {
    let domain = match domain {
        Some(d) => d,
        None => table.bounding_box()?,
    };
    if domain.dim() != table.dim() {
        return Err(BoError::Input(format!(
            "table has {} coordinates but the domain has {}",
            table.dim(),
            domain.dim()
        )));
    }
    let state = Arc::new(tempered_posterior(&table.points, &table.values, spec, noise_variance, 1.0, &JitterPolicy::default())?);
    let (x, value) = posterior_mean_max(&state, &domain, 4096, &mut ChaCha8Rng::seed_from_u64(0x7ab))?;
    let s = Arc::clone(&state);
    let obj = Objective::new(
        "tabular",
        domain,
        0.0,
        Some(TrueBest {
            value,
            location: Some(x),
            estimated: true,
        }),
        move |x| s.predict_mean(x).unwrap_or(f64::NAN),
    )?;
    check_registration(&obj)?;
    Ok(obj)
}
