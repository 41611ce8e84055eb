//! Sowing-suitability rules: per-day classification of forecast windows,
//! gridded recommendation maps, and binary treatment labels for fields.
//!
//! A condition holds when every daily value in its window strictly exceeds
//! the threshold; a day is favorable when all mandatory conditions hold and
//! (by default) all optimum conditions too.

use crate::blend::{BlendError, ForecastGrid, GridGeometry, WeatherVar};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("forecast horizon too short for {variable}: need {needed} days, have {available}")]
    InsufficientHorizon {
        variable: String,
        needed: usize,
        available: usize,
    },
    #[error("no recommendation map for {0}")]
    MissingMap(NaiveDate),
    #[error("field {field_id} lies outside the map grid")]
    OutOfGrid { field_id: String },
    #[error("bad rule set: {0}")]
    BadRuleSet(String),
    #[error(transparent)]
    Grid(#[from] BlendError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Mandatory,
    Optimum,
}

/// One threshold rule: all values of `variable` over `window_days` starting
/// at the candidate day must strictly exceed `threshold_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: String,
    pub variable: WeatherVar,
    pub threshold_c: f64,
    pub window_days: usize,
    pub priority: Priority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub conditions: Vec<Condition>,
    /// When false, optimum conditions are reported but do not gate
    /// favorability.
    pub require_optimum: bool,
}

impl RuleSet {
    pub fn from_json(json: &str) -> Result<RuleSet, RuleError> {
        let rules: RuleSet = serde_json::from_str(json)?;
        rules.validate()?;
        Ok(rules)
    }

    /// The shipped cotton defaults (five temperature conditions).
    pub fn cotton_default() -> RuleSet {
        RuleSet::from_json(crate::COTTON_RULES_JSON).expect("bundled rule set is valid")
    }

    fn validate(&self) -> Result<(), RuleError> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.conditions {
            if !c.threshold_c.is_finite() {
                return Err(RuleError::BadRuleSet(format!(
                    "condition {}: threshold must be finite",
                    c.id
                )));
            }
            if c.window_days == 0 {
                return Err(RuleError::BadRuleSet(format!(
                    "condition {}: window_days must be positive",
                    c.id
                )));
            }
            if !seen.insert(c.id.clone()) {
                return Err(RuleError::BadRuleSet(format!("duplicate condition id {}", c.id)));
            }
        }
        Ok(())
    }

    pub fn max_window_days(&self) -> usize {
        self.conditions.iter().map(|c| c.window_days).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayClassification {
    pub favorable: bool,
    pub mandatory_ok: bool,
    pub optimum_ok: bool,
    pub failed_conditions: Vec<String>,
}

/// Classifies one candidate day from per-variable daily series that start at
/// that day.
pub fn classify_day(
    window: &BTreeMap<WeatherVar, Vec<f64>>,
    rules: &RuleSet,
) -> Result<DayClassification, RuleError> {
    let mut mandatory_ok = true;
    let mut optimum_ok = true;
    let mut failed = Vec::new();
    for c in &rules.conditions {
        let series = window.get(&c.variable).map(|v| v.as_slice()).unwrap_or(&[]);
        if series.len() < c.window_days {
            return Err(RuleError::InsufficientHorizon {
                variable: c.variable.name().into(),
                needed: c.window_days,
                available: series.len(),
            });
        }
        let holds = series[..c.window_days].iter().all(|&v| v > c.threshold_c);
        if !holds {
            failed.push(c.id.clone());
            match c.priority {
                Priority::Mandatory => mandatory_ok = false,
                Priority::Optimum => optimum_ok = false,
            }
        }
    }
    let favorable = mandatory_ok && (optimum_ok || !rules.require_optimum);
    Ok(DayClassification {
        favorable,
        mandatory_ok,
        optimum_ok,
        failed_conditions: failed,
    })
}

/// Per-cell classifications for one candidate date, with summary counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationMap {
    pub day: NaiveDate,
    pub geometry: GridGeometry,
    pub cells: Vec<DayClassification>,
    pub n_favorable: usize,
    pub n_unfavorable: usize,
}

impl RecommendationMap {
    /// GeoJSON FeatureCollection of cell polygons.
    pub fn to_geojson(&self) -> serde_json::Value {
        let features: Vec<serde_json::Value> = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let row = i / self.geometry.width;
                let col = i % self.geometry.width;
                let s = self.geometry.cell_size_deg;
                let lat0 = self.geometry.origin_lat + row as f64 * s;
                let lon0 = self.geometry.origin_lon + col as f64 * s;
                serde_json::json!({
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[
                            [lon0, lat0],
                            [lon0 + s, lat0],
                            [lon0 + s, lat0 + s],
                            [lon0, lat0 + s],
                            [lon0, lat0]
                        ]]
                    },
                    "properties": {
                        "favorable": c.favorable,
                        "mandatory_ok": c.mandatory_ok,
                        "optimum_ok": c.optimum_ok,
                        "failed": c.failed_conditions,
                    }
                })
            })
            .collect();
        serde_json::json!({
            "type": "FeatureCollection",
            "date": self.day.to_string(),
            "features": features,
        })
    }

    /// Flat CSV: lat, lon, favorable.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("lat,lon,favorable\n");
        for (i, c) in self.cells.iter().enumerate() {
            let (lat, lon) = self.geometry.cell_center(i);
            out.push_str(&format!("{lat:?},{lon:?},{}\n", c.favorable as u8));
        }
        out
    }
}

/// Classifies every grid cell for the candidate date. The forecast must
/// cover the longest rule window starting at that date.
pub fn recommendation_map(
    forecast: &ForecastGrid,
    rules: &RuleSet,
    day: NaiveDate,
) -> Result<RecommendationMap, RuleError> {
    let offset = (day - forecast.issue_date).num_days();
    let needed = rules.max_window_days();
    if offset < 1 || offset as usize + needed - 1 > forecast.horizon_days {
        let available = (forecast.horizon_days as i64 - offset + 1).max(0) as usize;
        return Err(RuleError::InsufficientHorizon {
            variable: "forecast grid".into(),
            needed,
            available,
        });
    }
    let start = offset as usize - 1;
    let mut cells = Vec::with_capacity(forecast.geometry.n_cells());
    for cell in 0..forecast.geometry.n_cells() {
        let mut window = BTreeMap::new();
        for var in forecast.variables() {
            let series = forecast.series(var, cell).unwrap();
            window.insert(var, series[start..].to_vec());
        }
        cells.push(classify_day(&window, rules)?);
    }
    let n_favorable = cells.iter().filter(|c| c.favorable).count();
    let n_unfavorable = cells.len() - n_favorable;
    Ok(RecommendationMap {
        day,
        geometry: forecast.geometry,
        cells,
        n_favorable,
        n_unfavorable,
    })
}

/// Where and when a field was sown, for treatment labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSite {
    pub field_id: String,
    pub sowing_date: NaiveDate,
    pub lat: f64,
    pub lon: f64,
}

/// T_i = 1 iff the map cell nearest to field i was favorable on its sowing
/// date.
pub fn treatment_labels(
    sites: &[FieldSite],
    maps: &BTreeMap<NaiveDate, RecommendationMap>,
) -> Result<Vec<u8>, RuleError> {
    sites
        .iter()
        .map(|site| {
            let map = maps
                .get(&site.sowing_date)
                .ok_or(RuleError::MissingMap(site.sowing_date))?;
            let cell = map
                .geometry
                .nearest_cell(site.lat, site.lon)
                .map_err(|_| RuleError::OutOfGrid {
                    field_id: site.field_id.clone(),
                })?;
            Ok(map.cells[cell].favorable as u8)
        })
        .collect()
}
