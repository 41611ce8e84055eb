//! Forecast grid blending: extend a 2-day fine-resolution forecast to a
//! 10-day horizon using trend factors from a coarse model, and score
//! forecasts against station measurements.
//!
//! The trend factor for day i is `a_i = coarse_i / coarse_1`; the blended
//! series keeps the fine values on days 1-2 and continues with
//! `fine_1 * a_j` afterwards. A near-zero day-1 base switches to additive
//! anomalies `fine_1 + (coarse_j - coarse_1)` to keep ratios meaningful in
//! degrees Celsius.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlendError {
    #[error("forecast horizon too short for {variable}: need {needed} days, have {available}")]
    InsufficientHorizon {
        variable: String,
        needed: usize,
        available: usize,
    },
    #[error("fine grid extent not contained in coarse extent: {0}")]
    ExtentMismatch(String),
    #[error("issue dates differ: {fine} vs {coarse}")]
    IssueDateMismatch { fine: NaiveDate, coarse: NaiveDate },
    #[error("variable {0} missing from grid")]
    MissingVariable(String),
    #[error("point ({lat}, {lon}) outside grid extent")]
    OutOfGrid { lat: f64, lon: f64 },
    #[error("no overlapping dates between forecast and station series")]
    NoOverlap,
    #[error("station dates must be unique and increasing (row {0})")]
    UnorderedDates(usize),
    #[error("bad grid file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Daily temperature statistics carried by forecast grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherVar {
    SoilTMean,
    SoilTMin,
    AirTMax,
    AirTMin,
}

impl WeatherVar {
    pub const ALL: [WeatherVar; 4] = [
        WeatherVar::SoilTMean,
        WeatherVar::SoilTMin,
        WeatherVar::AirTMax,
        WeatherVar::AirTMin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WeatherVar::SoilTMean => "soil_t_mean",
            WeatherVar::SoilTMin => "soil_t_min",
            WeatherVar::AirTMax => "air_t_max",
            WeatherVar::AirTMin => "air_t_min",
        }
    }
}

impl std::str::FromStr for WeatherVar {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WeatherVar::ALL
            .iter()
            .find(|v| v.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown variable `{s}`"))
    }
}

/// Regular lat/lon grid; `origin_*` is the lower-left corner of cell (0, 0)
/// and cells are indexed row-major (`row * width + col`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub cell_size_deg: f64,
    pub width: usize,
    pub height: usize,
}

const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in km.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}

impl GridGeometry {
    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let row = index / self.width;
        let col = index % self.width;
        (
            self.origin_lat + (row as f64 + 0.5) * self.cell_size_deg,
            self.origin_lon + (col as f64 + 0.5) * self.cell_size_deg,
        )
    }

    /// True within the extent plus a half-cell margin on every side.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let m = 0.5 * self.cell_size_deg;
        lat >= self.origin_lat - m
            && lat <= self.origin_lat + self.height as f64 * self.cell_size_deg + m
            && lon >= self.origin_lon - m
            && lon <= self.origin_lon + self.width as f64 * self.cell_size_deg + m
    }

    /// Index of the cell whose center is nearest by great-circle distance;
    /// ties go to the lowest index.
    pub fn nearest_cell(&self, lat: f64, lon: f64) -> Result<usize, BlendError> {
        if !self.contains(lat, lon) {
            return Err(BlendError::OutOfGrid { lat, lon });
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.n_cells() {
            let (clat, clon) = self.cell_center(i);
            let d = haversine_km(lat, lon, clat, clon);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(best)
    }
}

/// Gridded daily forecast; values are indexed `[day - 1][cell]` with day 1
/// being the first full day after the issue date.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastGrid {
    pub geometry: GridGeometry,
    pub issue_date: NaiveDate,
    pub horizon_days: usize,
    values: BTreeMap<WeatherVar, Vec<Vec<f64>>>,
}

impl ForecastGrid {
    pub fn new(geometry: GridGeometry, issue_date: NaiveDate, horizon_days: usize) -> Self {
        assert!(geometry.cell_size_deg > 0.0 && geometry.n_cells() > 0);
        ForecastGrid {
            geometry,
            issue_date,
            horizon_days,
            values: BTreeMap::new(),
        }
    }

    /// Fills a variable with one value everywhere (fixture helper).
    pub fn fill_constant(&mut self, variable: WeatherVar, value: f64) {
        self.values.insert(
            variable,
            vec![vec![value; self.geometry.n_cells()]; self.horizon_days],
        );
    }

    pub fn set_series(&mut self, variable: WeatherVar, cell: usize, series: &[f64]) {
        assert_eq!(series.len(), self.horizon_days);
        let planes = self
            .values
            .entry(variable)
            .or_insert_with(|| vec![vec![f64::NAN; self.geometry.n_cells()]; self.horizon_days]);
        for (d, &v) in series.iter().enumerate() {
            planes[d][cell] = v;
        }
    }

    pub fn variables(&self) -> Vec<WeatherVar> {
        self.values.keys().copied().collect()
    }

    pub fn value(&self, variable: WeatherVar, day: usize, cell: usize) -> Option<f64> {
        self.values
            .get(&variable)
            .and_then(|planes| planes.get(day - 1))
            .map(|plane| plane[cell])
    }

    pub fn series(&self, variable: WeatherVar, cell: usize) -> Option<Vec<f64>> {
        self.values
            .get(&variable)
            .map(|planes| planes.iter().map(|plane| plane[cell]).collect())
    }

    pub fn nearest_cell(&self, lat: f64, lon: f64) -> Result<usize, BlendError> {
        self.geometry.nearest_cell(lat, lon)
    }

    /// Date that forecast day `j` refers to.
    pub fn day_date(&self, day: usize) -> NaiveDate {
        self.issue_date + chrono::Duration::days(day as i64)
    }

    /// Writes the grid as a flat CSV (variable, day, lat, lon, value_c) with
    /// a JSON sidecar carrying geometry and issue date.
    pub fn save(&self, csv_path: &Path, sidecar_path: &Path) -> Result<(), BlendError> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["variable", "day", "lat", "lon", "value_c"])?;
        for (var, planes) in &self.values {
            for (d, plane) in planes.iter().enumerate() {
                for (cell, &v) in plane.iter().enumerate() {
                    let (lat, lon) = self.geometry.cell_center(cell);
                    w.write_record([
                        var.name().to_string(),
                        (d + 1).to_string(),
                        ryu_f64(lat),
                        ryu_f64(lon),
                        ryu_f64(v),
                    ])?;
                }
            }
        }
        w.flush()?;
        let sidecar = GridSidecar {
            geometry: self.geometry,
            issue_date: self.issue_date,
            horizon_days: self.horizon_days,
            variables: self.variables(),
        };
        std::fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(csv_path: &Path, sidecar_path: &Path) -> Result<ForecastGrid, BlendError> {
        let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
        let mut grid = ForecastGrid::new(sidecar.geometry, sidecar.issue_date, sidecar.horizon_days);
        for var in &sidecar.variables {
            grid.fill_constant(*var, f64::NAN);
        }
        let mut r = csv::Reader::from_path(csv_path)?;
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let bad = |what: &str| BlendError::BadFile(format!("row {}: {what}", i + 2));
            let var: WeatherVar = record
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|e: String| bad(&e))?;
            let day: usize = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad day"))?;
            let lat: f64 = record
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad lat"))?;
            let lon: f64 = record
                .get(3)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad lon"))?;
            let value: f64 = record
                .get(4)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad value"))?;
            if day == 0 || day > grid.horizon_days {
                return Err(bad("day outside horizon"));
            }
            let cell = grid.geometry.nearest_cell(lat, lon)?;
            grid.values.get_mut(&var).ok_or_else(|| bad("undeclared variable"))?[day - 1]
                [cell] = value;
        }
        for var in &sidecar.variables {
            if grid.values[var].iter().flatten().any(|v| v.is_nan()) {
                return Err(BlendError::BadFile(format!(
                    "incomplete values for {}",
                    var.name()
                )));
            }
        }
        Ok(grid)
    }
}

fn ryu_f64(v: f64) -> String {
    // format! {:?} round-trips f64 exactly on modern rustc
    format!("{v:?}")
}

#[derive(Debug, Serialize, Deserialize)]
struct GridSidecar {
    geometry: GridGeometry,
    issue_date: NaiveDate,
    horizon_days: usize,
    variables: Vec<WeatherVar>,
}

/// Unit convention for the day-over-day trend ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendUnits {
    #[default]
    Celsius,
    Kelvin,
}

const KELVIN_OFFSET: f64 = 273.15;
/// Day-1 magnitudes at or below this (in the ratio unit) trigger the
/// additive fallback.
pub const NEAR_ZERO_BASE_C: f64 = 1.0;

/// Trend extension for one coarse-cell series: either multiplicative
/// factors `a_j = coarse_j / coarse_1` or, when the base is near zero,
/// additive anomalies `coarse_j - coarse_1` (days 3..=horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct TrendFactors {
    values: Vec<f64>,
    pub additive: bool,
    units: TrendUnits,
}

impl TrendFactors {
    /// `a_j` (or the additive anomaly) for day `j` in 3..=horizon.
    pub fn factor(&self, day: usize) -> f64 {
        self.values[day - 3]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() + 2
    }

    /// Day-`j` blended value from the fine model's day-1 value.
    pub fn extend(&self, fine_day1_c: f64, day: usize) -> f64 {
        let f = self.factor(day);
        if self.additive {
            fine_day1_c + f
        } else {
            match self.units {
                TrendUnits::Celsius => fine_day1_c * f,
                TrendUnits::Kelvin => (fine_day1_c + KELVIN_OFFSET) * f - KELVIN_OFFSET,
            }
        }
    }
}

/// Trend factors over `horizon` days of one coarse series (°C ratios with a
/// near-zero guard).
pub fn trend_factors(coarse_series: &[f64], horizon: usize) -> Result<TrendFactors, BlendError> {
    trend_factors_in(coarse_series, horizon, TrendUnits::Celsius)
}

pub fn trend_factors_in(
    coarse_series: &[f64],
    horizon: usize,
    units: TrendUnits,
) -> Result<TrendFactors, BlendError> {
    assert!(horizon >= 3);
    if coarse_series.len() < horizon {
        return Err(BlendError::InsufficientHorizon {
            variable: "coarse series".into(),
            needed: horizon,
            available: coarse_series.len(),
        });
    }
    let shift = match units {
        TrendUnits::Celsius => 0.0,
        TrendUnits::Kelvin => KELVIN_OFFSET,
    };
    let base = coarse_series[0] + shift;
    if base.abs() <= NEAR_ZERO_BASE_C {
        let values = (3..=horizon)
            .map(|j| coarse_series[j - 1] - coarse_series[0])
            .collect();
        return Ok(TrendFactors {
            values,
            additive: true,
            units,
        });
    }
    let values = (3..=horizon)
        .map(|j| (coarse_series[j - 1] + shift) / base)
        .collect();
    Ok(TrendFactors {
        values,
        additive: false,
        units,
    })
}

/// Blends a 2-day fine grid with a 10-day coarse grid into a 10-day grid at
/// the fine resolution. Days 1-2 copy the fine values unchanged; later days
/// extend the fine day-1 value with the trend of the nearest coarse cell.
pub fn synthesize_art(
    fine: &ForecastGrid,
    coarse: &ForecastGrid,
    units: TrendUnits,
) -> Result<ForecastGrid, BlendError> {
    if fine.issue_date != coarse.issue_date {
        return Err(BlendError::IssueDateMismatch {
            fine: fine.issue_date,
            coarse: coarse.issue_date,
        });
    }
    if fine.horizon_days < 2 {
        return Err(BlendError::InsufficientHorizon {
            variable: "fine grid".into(),
            needed: 2,
            available: fine.horizon_days,
        });
    }
    let horizon = coarse.horizon_days;
    if horizon < 10 {
        return Err(BlendError::InsufficientHorizon {
            variable: "coarse grid".into(),
            needed: 10,
            available: horizon,
        });
    }
    for corner in 0..fine.geometry.n_cells() {
        let (lat, lon) = fine.geometry.cell_center(corner);
        if !coarse.geometry.contains(lat, lon) {
            return Err(BlendError::ExtentMismatch(format!(
                "fine cell center ({lat}, {lon}) outside coarse extent"
            )));
        }
    }

    let mut out = ForecastGrid::new(fine.geometry, fine.issue_date, horizon);
    for var in fine.variables() {
        if coarse.series(var, 0).is_none() {
            return Err(BlendError::MissingVariable(var.name().into()));
        }
        out.fill_constant(var, f64::NAN);
        for cell in 0..fine.geometry.n_cells() {
            let (lat, lon) = fine.geometry.cell_center(cell);
            let coarse_cell = coarse.geometry.nearest_cell(lat, lon)?;
            let coarse_series = coarse.series(var, coarse_cell).unwrap();
            let factors = trend_factors_in(&coarse_series, horizon, units)?;
            let fine_series = fine.series(var, cell).unwrap();
            let mut blended = Vec::with_capacity(horizon);
            blended.push(fine_series[0]);
            blended.push(fine_series[1]);
            for day in 3..=horizon {
                blended.push(factors.extend(fine_series[0], day));
            }
            out.set_series(var, cell, &blended);
        }
    }
    Ok(out)
}

/// Ground-station daily extremes used for forecast verification.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub lat: f64,
    pub lon: f64,
    rows: Vec<(NaiveDate, f64, f64)>, // (date, tmax_c, tmin_c)
}

impl StationSeries {
    pub fn new(lat: f64, lon: f64, rows: Vec<(NaiveDate, f64, f64)>) -> Result<Self, BlendError> {
        for (i, pair) in rows.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(BlendError::UnorderedDates(i + 2));
            }
        }
        Ok(StationSeries { lat, lon, rows })
    }

    /// CSV columns: date, tmax_c, tmin_c.
    pub fn from_csv(path: &Path, lat: f64, lon: f64) -> Result<Self, BlendError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let bad = |what: &str| BlendError::BadFile(format!("row {}: {what}", i + 2));
            let date = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad date"))?;
            let tmax = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad tmax_c"))?;
            let tmin = record
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad tmin_c"))?;
            rows.push((date, tmax, tmin));
        }
        StationSeries::new(lat, lon, rows)
    }

    /// Observation for a variable the station records (air extremes only).
    pub fn observed(&self, date: NaiveDate, variable: WeatherVar) -> Option<f64> {
        let idx = self.rows.binary_search_by_key(&date, |r| r.0).ok()?;
        match variable {
            WeatherVar::AirTMax => Some(self.rows[idx].1),
            WeatherVar::AirTMin => Some(self.rows[idx].2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

/// MAE/RMSE of dated forecast values against station observations of one
/// variable, over the overlapping dates.
pub fn skill(
    forecast: &[(NaiveDate, f64)],
    station: &StationSeries,
    variable: WeatherVar,
) -> Result<Skill, BlendError> {
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut n = 0usize;
    for &(date, f) in forecast {
        if let Some(o) = station.observed(date, variable) {
            let e = f - o;
            abs_sum += e.abs();
            sq_sum += e * e;
            n += 1;
        }
    }
    if n == 0 {
        return Err(BlendError::NoOverlap);
    }
    Ok(Skill {
        mae: abs_sum / n as f64,
        rmse: (sq_sum / n as f64).sqrt(),
        n,
    })
}
