//! Tabular dataset model, CSV ingestion and the feature-engineering proxies
//! (normalized-difference indices, trapezoidal series integral, one-hot
//! expansion, standardization).

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("type violation at row {row}, column `{column}`: {detail}")]
    TypeViolation {
        row: usize,
        column: String,
        detail: String,
    },
    #[error("empty file: {0}")]
    EmptyFile(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("spectral index denominator is zero")]
    ZeroDenominator,
    #[error("series needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("series timestamps must be strictly increasing")]
    NonIncreasingTimestamps,
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("no observation within {window} days of {date} for field `{field}`")]
    NoObservationNearDate {
        field: String,
        date: NaiveDate,
        window: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Binary,
    Real,
    Categorical,
    Date,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Binary(Vec<u8>),
    Real(Vec<f64>),
    Categorical(Vec<String>),
    Date(Vec<NaiveDate>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Binary(v) => v.len(),
            ColumnData::Real(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Date(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            ColumnData::Binary(_) => ColumnType::Binary,
            ColumnData::Real(_) => ColumnType::Real,
            ColumnData::Categorical(_) => ColumnType::Categorical,
            ColumnData::Date(_) => ColumnType::Date,
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Binary(v) => ColumnData::Binary(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Real(v) => ColumnData::Real(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnData::Date(v) => ColumnData::Date(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Per-column statistics stored by [`FieldDataset::standardize`] so the
/// transform can be inverted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnStats {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
    /// Constant columns are mapped to zero instead of divided by sd = 0.
    pub constant: bool,
}

/// Observational table keyed by field, with designated binary treatment and
/// real-valued outcome columns.
#[derive(Debug, Clone, Default)]
pub struct FieldDataset {
    field_ids: Vec<String>,
    column_order: Vec<String>,
    columns: HashMap<String, ColumnData>,
    pub treatment_column: Option<String>,
    pub outcome_column: Option<String>,
}

impl FieldDataset {
    pub fn new(field_ids: Vec<String>) -> Self {
        FieldDataset {
            field_ids,
            ..Default::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.field_ids.len()
    }

    pub fn field_ids(&self) -> &[String] {
        &self.field_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_order
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData, DataError> {
        self.columns
            .get(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Inserts or replaces a column. Length must match the row count.
    pub fn set_column(&mut self, name: &str, data: ColumnData) {
        assert_eq!(data.len(), self.n_rows(), "column length mismatch");
        if !self.columns.contains_key(name) {
            self.column_order.push(name.to_string());
        }
        self.columns.insert(name.to_string(), data);
    }

    pub fn drop_column(&mut self, name: &str) {
        self.columns.remove(name);
        self.column_order.retain(|c| c != name);
    }

    /// Numeric view of a column; binary columns are widened to 0.0/1.0.
    pub fn real_column(&self, name: &str) -> Result<Vec<f64>, DataError> {
        match self.column(name)? {
            ColumnData::Real(v) => Ok(v.clone()),
            ColumnData::Binary(v) => Ok(v.iter().map(|&b| b as f64).collect()),
            other => Err(DataError::TypeViolation {
                row: 0,
                column: name.to_string(),
                detail: format!("expected numeric column, found {:?}", other.column_type()),
            }),
        }
    }

    pub fn treatment(&self) -> Result<Vec<u8>, DataError> {
        let name = self
            .treatment_column
            .as_deref()
            .ok_or_else(|| DataError::MissingColumn("<treatment>".into()))?;
        match self.column(name)? {
            ColumnData::Binary(v) => Ok(v.clone()),
            other => Err(DataError::TypeViolation {
                row: 0,
                column: name.to_string(),
                detail: format!("treatment must be binary, found {:?}", other.column_type()),
            }),
        }
    }

    pub fn outcome(&self) -> Result<Vec<f64>, DataError> {
        let name = self
            .outcome_column
            .as_deref()
            .ok_or_else(|| DataError::MissingColumn("<outcome>".into()))?;
        self.real_column(name)
    }

    /// Row-major matrix over the given numeric columns.
    pub fn matrix(&self, columns: &[String]) -> Result<Vec<Vec<f64>>, DataError> {
        let cols: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| self.real_column(c))
            .collect::<Result<_, _>>()?;
        Ok((0..self.n_rows())
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect())
    }

    pub fn select_rows(&self, rows: &[usize]) -> FieldDataset {
        FieldDataset {
            field_ids: rows.iter().map(|&i| self.field_ids[i].clone()).collect(),
            column_order: self.column_order.clone(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v.select(rows)))
                .collect(),
            treatment_column: self.treatment_column.clone(),
            outcome_column: self.outcome_column.clone(),
        }
    }

    /// Replaces a categorical column by one binary column per observed level
    /// (`<name>_<level>`, levels sorted). Rows sum to one by construction.
    pub fn one_hot(&mut self, column: &str) -> Result<Vec<String>, DataError> {
        let values = match self.column(column)? {
            ColumnData::Categorical(v) => v.clone(),
            other => {
                return Err(DataError::TypeViolation {
                    row: 0,
                    column: column.to_string(),
                    detail: format!("expected categorical, found {:?}", other.column_type()),
                })
            }
        };
        let mut levels: Vec<String> = values.clone();
        levels.sort();
        levels.dedup();
        let mut new_names = Vec::with_capacity(levels.len());
        let insert_at = self
            .column_order
            .iter()
            .position(|c| c == column)
            .expect("column exists");
        self.drop_column(column);
        for (k, level) in levels.iter().enumerate() {
            let name = format!("{column}_{level}");
            let data: Vec<u8> = values.iter().map(|v| (v == level) as u8).collect();
            self.columns.insert(name.clone(), ColumnData::Binary(data));
            self.column_order.insert(insert_at + k, name.clone());
            new_names.push(name);
        }
        Ok(new_names)
    }

    /// Z-scores the named columns in place using the population standard
    /// deviation; constant columns map to zero and are flagged.
    pub fn standardize(&mut self, columns: &[String]) -> Result<Vec<ColumnStats>, DataError> {
        let mut stats = Vec::with_capacity(columns.len());
        for name in columns {
            let v = self.real_column(name)?;
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let constant = sd == 0.0;
            let scaled: Vec<f64> = if constant {
                vec![0.0; v.len()]
            } else {
                v.iter().map(|x| (x - mean) / sd).collect()
            };
            self.set_column(name, ColumnData::Real(scaled));
            stats.push(ColumnStats {
                column: name.clone(),
                mean,
                sd,
                constant,
            });
        }
        Ok(stats)
    }

    /// Inverse of [`standardize`](Self::standardize) given the stored stats.
    pub fn destandardize(&mut self, stats: &[ColumnStats]) -> Result<(), DataError> {
        for s in stats {
            let v = self.real_column(&s.column)?;
            let restored: Vec<f64> = if s.constant {
                vec![s.mean; v.len()]
            } else {
                v.iter().map(|x| x * s.sd + s.mean).collect()
            };
            self.set_column(&s.column, ColumnData::Real(restored));
        }
        Ok(())
    }

    /// Serializes to CSV with `field_id` first, then columns in order.
    pub fn to_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut header = vec!["field_id".to_string()];
        header.extend(self.column_order.clone());
        let write_err = |e: csv::Error| DataError::Csv {
            path: path.display().to_string(),
            source: e,
        };
        w.write_record(&header).map_err(write_err)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.field_ids[i].clone()];
            for c in &self.column_order {
                rec.push(match &self.columns[c] {
                    ColumnData::Binary(v) => v[i].to_string(),
                    ColumnData::Real(v) => format!("{:?}", v[i]),
                    ColumnData::Categorical(v) => v[i].clone(),
                    ColumnData::Date(v) => v[i].to_string(),
                });
            }
            w.write_record(&rec).map_err(write_err)?;
        }
        w.flush().map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(())
    }
}

/// Column specification for CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    #[serde(default)]
    pub optional: bool,
}

fn spec(name: &str, column_type: ColumnType) -> ColumnSpec {
    ColumnSpec {
        name: name.into(),
        column_type,
        optional: false,
    }
}

/// Canonical field-table schema. `cg_proxy` is optional; when absent it is
/// computed from the companion NDVI series files.
pub fn field_schema() -> Vec<ColumnSpec> {
    let mut s = vec![
        spec("sowing_date", ColumnType::Date),
        spec("harvest_date", ColumnType::Date),
        spec("variety", ColumnType::Categorical),
        spec("yield_kg_ha", ColumnType::Real),
        spec("ws_min_c", ColumnType::Real),
        spec("ws_max_c", ColumnType::Real),
        spec("ndwi_sowing", ColumnType::Real),
        spec("soc_g_kg", ColumnType::Real),
        spec("clay_pct", ColumnType::Real),
        spec("silt_pct", ColumnType::Real),
        spec("sand_pct", ColumnType::Real),
        spec("perim_area_ratio", ColumnType::Real),
    ];
    s.push(ColumnSpec {
        name: "cg_proxy".into(),
        column_type: ColumnType::Real,
        optional: true,
    });
    s
}

/// Loads a typed field table. Rows violating the schema are rejected with
/// their row number (1-based, excluding the header).
pub fn load_fields_csv(path: &Path, schema: &[ColumnSpec]) -> Result<FieldDataset, DataError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| DataError::Csv {
        path: path.display().to_string(),
        source: e,
    })?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv {
            path: path.display().to_string(),
            source: e,
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(DataError::EmptyFile(path.display().to_string()));
    }
    let col_pos = |name: &str| headers.iter().position(|h| h == name);
    let id_pos = col_pos("field_id").ok_or_else(|| DataError::MissingColumn("field_id".into()))?;
    let mut positions = Vec::new();
    for s in schema {
        match col_pos(&s.name) {
            Some(p) => positions.push(Some(p)),
            None if s.optional => positions.push(None),
            None => return Err(DataError::MissingColumn(s.name.clone())),
        }
    }

    let mut field_ids = Vec::new();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.len()];
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        field_ids.push(record.get(id_pos).unwrap_or("").trim().to_string());
        for (j, pos) in positions.iter().enumerate() {
            if let Some(p) = pos {
                raw[j].push(record.get(*p).unwrap_or("").trim().to_string());
            }
        }
        let _ = row_idx;
    }
    if field_ids.is_empty() {
        return Err(DataError::EmptyFile(path.display().to_string()));
    }

    let mut ds = FieldDataset::new(field_ids);
    for (j, s) in schema.iter().enumerate() {
        if positions[j].is_none() {
            continue;
        }
        let col = parse_column(&raw[j], s)?;
        ds.set_column(&s.name, col);
    }
    ds.outcome_column = ds.has_column("yield_kg_ha").then(|| "yield_kg_ha".into());
    Ok(ds)
}

fn parse_column(raw: &[String], spec: &ColumnSpec) -> Result<ColumnData, DataError> {
    let violation = |row: usize, detail: String| DataError::TypeViolation {
        row: row + 1,
        column: spec.name.clone(),
        detail,
    };
    match spec.column_type {
        ColumnType::Real => {
            let mut out = Vec::with_capacity(raw.len());
            for (i, v) in raw.iter().enumerate() {
                let x: f64 = v
                    .parse()
                    .map_err(|_| violation(i, format!("`{v}` is not a number")))?;
                if !x.is_finite() {
                    return Err(violation(i, format!("`{v}` is not finite")));
                }
                out.push(x);
            }
            Ok(ColumnData::Real(out))
        }
        ColumnType::Binary => {
            let mut out = Vec::with_capacity(raw.len());
            for (i, v) in raw.iter().enumerate() {
                match v.as_str() {
                    "0" => out.push(0),
                    "1" => out.push(1),
                    other => return Err(violation(i, format!("`{other}` is not 0/1"))),
                }
            }
            Ok(ColumnData::Binary(out))
        }
        ColumnType::Date => {
            let mut out = Vec::with_capacity(raw.len());
            for (i, v) in raw.iter().enumerate() {
                let d = NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|_| violation(i, format!("`{v}` is not an ISO date")))?;
                out.push(d);
            }
            Ok(ColumnData::Date(out))
        }
        ColumnType::Categorical => {
            for (i, v) in raw.iter().enumerate() {
                if v.is_empty() {
                    return Err(violation(i, "empty categorical value".into()));
                }
            }
            Ok(ColumnData::Categorical(raw.to_vec()))
        }
    }
}

/// Dated observation series (spectral index values or temperatures).
#[derive(Debug, Clone)]
pub struct ObservationSeries {
    timestamps: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ObservationSeries {
    pub fn new(timestamps: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, DataError> {
        assert_eq!(timestamps.len(), values.len());
        if !timestamps.windows(2).all(|w| w[0] < w[1]) {
            return Err(DataError::NonIncreasingTimestamps);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::TypeViolation {
                row: 0,
                column: "<series>".into(),
                detail: "non-finite value".into(),
            });
        }
        Ok(ObservationSeries { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Loads a `date,value` CSV.
    pub fn from_csv(path: &Path) -> Result<Self, DataError> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| DataError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| DataError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
            let date = NaiveDate::parse_from_str(record.get(0).unwrap_or(""), "%Y-%m-%d")
                .map_err(|_| DataError::TypeViolation {
                    row: i + 1,
                    column: "date".into(),
                    detail: "not an ISO date".into(),
                })?;
            let value: f64 =
                record
                    .get(1)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| DataError::TypeViolation {
                        row: i + 1,
                        column: "value".into(),
                        detail: "not a number".into(),
                    })?;
            timestamps.push(date);
            values.push(value);
        }
        Self::new(timestamps, values)
    }

    /// Value of the observation nearest to `date` within ± `window` days.
    pub fn nearest_within(&self, date: NaiveDate, window: i64) -> Option<f64> {
        self.timestamps
            .iter()
            .zip(&self.values)
            .map(|(t, &v)| ((*t - date).num_days().abs(), v))
            .filter(|(d, _)| *d <= window)
            .min_by_key(|(d, _)| *d)
            .map(|(_, v)| v)
    }
}

/// Normalized-difference index `(a - b) / (a + b)`.
pub fn spectral_index(band_a: f64, band_b: f64) -> Result<f64, DataError> {
    if band_a + band_b == 0.0 {
        return Err(DataError::ZeroDenominator);
    }
    Ok((band_a - band_b) / (band_a + band_b))
}

/// Trapezoidal integral of the series over time, in value-days.
pub fn trapezoid_integral(series: &ObservationSeries) -> Result<f64, DataError> {
    if series.len() < 2 {
        return Err(DataError::TooFewPoints(series.len()));
    }
    let mut total = 0.0;
    for i in 1..series.len() {
        let dt = (series.timestamps[i] - series.timestamps[i - 1]).num_days() as f64;
        total += 0.5 * (series.values[i] + series.values[i - 1]) * dt;
    }
    Ok(total)
}
