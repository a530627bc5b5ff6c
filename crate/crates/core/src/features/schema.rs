//! The fixed explanatory-variable schema.
//!
//! Column census (151):
//!
//! | block                                    | columns |
//! |------------------------------------------|---------|
//! | current pi ta tr hu vi ap dp, winds, wind speed | 10 |
//! | \|ta\|, \|tr\|                           | 2       |
//! | lags of pi ta tr hu vi ap dp at 1,3,6,12,24 h | 35 |
//! | lags of \|ta\|, \|tr\|                   | 10      |
//! | deltas of tr hu ap                       | 15      |
//! | accumulations of rain, sleet, wet snow, dry snow | 20 |
//! | total accumulation                       | 5       |
//! | precipitation type one-hot               | 9       |
//! | runway indicator                         | 1       |
//! | contamination combination one-hot + unknown flag | 31 |
//! | contamination group one-hot              | 6       |
//! | layer count, depth, coverage, sanded, chemicals, inspector BA, report age | 7 |
//!
//! The first 107 columns come from weather alone; the last 44 come from the
//! latest runway report and are missing when reports are excluded.

use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use super::contamination::{combination_index, ContaminationGroup, KNOWN_COMBINATIONS};
use super::series::{Horizon, PrecipType, Var, WeatherSeries};
use super::snowtam::SnowtamReport;
use crate::error::{Error, Result};
use crate::time::{format_timestamp, minutes_between, Timestamp};

pub const SCHEMA_VERSION: u32 = 1;
pub const N_FEATURES: usize = 151;
pub const N_WEATHER_FEATURES: usize = 107;
/// A sample must exist within this many minutes of the assessed minute.
pub const STALE_TOLERANCE_MIN: i64 = 5;

const LAGGED: [Var; 7] = [Var::Pi, Var::Ta, Var::Tr, Var::Hu, Var::Vi, Var::Ap, Var::Dp];
const DIFFERENCED: [Var; 3] = [Var::Tr, Var::Hu, Var::Ap];
const CURRENT: [Var; 9] = Var::ALL;

fn build_names() -> Vec<String> {
    let mut n: Vec<String> = CURRENT.iter().map(|v| v.key().to_string()).collect();
    n.push("wind_speed".into());
    n.push("abs_ta".into());
    n.push("abs_tr".into());
    for v in LAGGED {
        for k in Horizon::ALL {
            n.push(format!("{}_lag{}h", v.key(), k.hours()));
        }
    }
    for v in ["abs_ta", "abs_tr"] {
        for k in Horizon::ALL {
            n.push(format!("{v}_lag{}h", k.hours()));
        }
    }
    for v in DIFFERENCED {
        for k in Horizon::ALL {
            n.push(format!("delta_{}_{}h", v.key(), k.hours()));
        }
    }
    for p in PrecipType::ACCUMULATED {
        for k in Horizon::ALL {
            n.push(format!("ac_{}_{}h", p.key(), k.hours()));
        }
    }
    for k in Horizon::ALL {
        n.push(format!("ac_total_{}h", k.hours()));
    }
    for p in PrecipType::ALL {
        n.push(format!("pt_{}", p.key()));
    }
    n.push("runway".into());
    for c in KNOWN_COMBINATIONS {
        n.push(format!("contam_{c}"));
    }
    n.push("contam_unknown".into());
    for g in ContaminationGroup::ALL {
        n.push(format!("contam_group_{}", g.key()));
    }
    for s in ["contam_layers", "depth_mm", "coverage_pct", "sanded", "chemicals", "inspector_ba", "snowtam_age_min"] {
        n.push(s.into());
    }
    n
}

/// Column names in schema order.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(build_names)
}

pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

/// Hex SHA-256 of the newline-joined column names.
pub fn schema_checksum() -> String {
    hex::encode(Sha256::digest(feature_names().join("\n").as_bytes()))
}

pub fn is_weather_feature(index: usize) -> bool {
    index < N_WEATHER_FEATURES
}

/// One row of explanatory variables; NaN marks missing.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub schema_version: u32,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [String] {
        feature_names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    /// Bitwise equality, treating NaN as equal to NaN.
    pub fn same_as(&self, other: &FeatureVector) -> bool {
        self.schema_version == other.schema_version
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

/// Assembles the feature vector for minute `at`.
///
/// `snowtam` should be the latest report issued at or before `at` for the
/// same runway. With `include_snowtam = false` the report block is left
/// missing but the schema length is unchanged.
pub fn build_feature_vector(
    weather: &WeatherSeries,
    snowtam: Option<&SnowtamReport>,
    at: &Timestamp,
    runway_index: usize,
    include_snowtam: bool,
) -> Result<FeatureVector> {
    let i = weather.index_of(at);
    if !weather.has_sample_near(i, STALE_TOLERANCE_MIN) {
        return Err(Error::StaleData(format!(
            "runway {}: no weather sample within {STALE_TOLERANCE_MIN} min of {}",
            weather.runway(),
            format_timestamp(at)
        )));
    }
    if let Some(r) = snowtam {
        if r.runway != weather.runway() {
            return Err(Error::invalid(format!("report for runway {} used with runway {}", r.runway, weather.runway())));
        }
        if r.issued_at > *at {
            return Err(Error::invalid(format!("report issued at {} is after {}", format_timestamp(&r.issued_at), format_timestamp(at))));
        }
    }

    let mut out = Vec::with_capacity(N_FEATURES);
    for v in CURRENT {
        out.push(weather.value(v, i));
    }
    let (along, across) = (weather.value(Var::AlongWind, i), weather.value(Var::AcrossWind, i));
    out.push(along.hypot(across));
    out.push(weather.value(Var::Ta, i).abs());
    out.push(weather.value(Var::Tr, i).abs());
    for v in LAGGED {
        for k in Horizon::ALL {
            out.push(weather.value(v, i - k.minutes()));
        }
    }
    for v in [Var::Ta, Var::Tr] {
        for k in Horizon::ALL {
            out.push(weather.value(v, i - k.minutes()).abs());
        }
    }
    for v in DIFFERENCED {
        for k in Horizon::ALL {
            out.push(weather.value(v, i) - weather.value(v, i - k.minutes()));
        }
    }
    let acc = accumulations(weather, i);
    for row in &acc {
        out.extend_from_slice(row);
    }
    match weather.precip_type(i) {
        Some(p) => out.extend(PrecipType::ALL.iter().map(|&q| if q == p { 1.0 } else { 0.0 })),
        None => out.extend([f64::NAN; 9]),
    }
    out.push(runway_index as f64);
    debug_assert_eq!(out.len(), N_WEATHER_FEATURES);

    match snowtam.filter(|_| include_snowtam) {
        Some(r) => push_report(&mut out, r, at),
        None => out.resize(N_FEATURES, f64::NAN),
    }
    debug_assert_eq!(out.len(), N_FEATURES);
    Ok(FeatureVector { schema_version: SCHEMA_VERSION, values: out })
}

/// Per-type then total accumulations over each horizon, summed in
/// ascending minute order like [`accumulate_precip`].
fn accumulations(weather: &WeatherSeries, i: i64) -> [[f64; 5]; 5] {
    let mut acc = [[0.0; 5]; 5];
    let longest = Horizon::H24.minutes();
    for j in i - longest..=i {
        let pi = weather.value(Var::Pi, j);
        if pi.is_nan() {
            continue;
        }
        let age = i - j;
        let slot = weather.precip_type(j).and_then(|p| PrecipType::ACCUMULATED.iter().position(|&q| q == p));
        for (h, k) in Horizon::ALL.iter().enumerate() {
            if age <= k.minutes() {
                if let Some(s) = slot {
                    acc[s][h] += pi;
                }
                acc[4][h] += pi;
            }
        }
    }
    acc
}

fn push_report(out: &mut Vec<f64>, r: &SnowtamReport, at: &Timestamp) {
    let combo = combination_index(&r.layers);
    for k in 0..KNOWN_COMBINATIONS.len() {
        out.push(if combo == Some(k) { 1.0 } else { 0.0 });
    }
    out.push(if combo.is_none() { 1.0 } else { 0.0 });
    let group = r.group();
    for g in ContaminationGroup::ALL {
        out.push(if g == group { 1.0 } else { 0.0 });
    }
    out.push(r.layers.len() as f64);
    out.push(r.depth_mm);
    out.push(r.coverage_pct);
    out.push(if r.sanded { 1.0 } else { 0.0 });
    out.push(if r.chemicals { 1.0 } else { 0.0 });
    out.push(r.inspector_ba.map_or(f64::NAN, f64::from));
    out.push(minutes_between(&r.issued_at, at) as f64);
}

/// Contamination indicator columns for a layer stack: 30 combination
/// indicators followed by the unknown flag.
pub fn one_hot_contamination(layers: &[u8]) -> [f64; 31] {
    let mut out = [0.0; 31];
    match combination_index(layers) {
        Some(k) => out[k] = 1.0,
        None => out[30] = 1.0,
    }
    out
}

pub fn one_hot_precip(pt: PrecipType) -> [f64; 9] {
    let mut out = [0.0; 9];
    out[pt.index()] = 1.0;
    out
}
