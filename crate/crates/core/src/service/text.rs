//! Plain-language descriptions of feature values for argument lists.

use crate::features::contamination::code_name;
use crate::features::{ContaminationGroup, PrecipType};

use super::ExplanationSource;

fn variable(key: &str) -> Option<(&'static str, &'static str, usize)> {
    Some(match key {
        "pi" => ("Precipitation intensity", "mm/h", 1),
        "ta" => ("Air temperature", "°C", 1),
        "tr" => ("Runway temperature", "°C", 1),
        "hu" => ("Relative humidity", "%", 0),
        "vi" => ("Visibility", "m", 0),
        "ap" => ("Air pressure", "hPa", 1),
        "dp" => ("Dew point", "°C", 1),
        "along_wind" => ("Wind along the runway", "m/s", 1),
        "across_wind" => ("Crosswind", "m/s", 1),
        "wind_speed" => ("Wind speed", "m/s", 1),
        "abs_ta" => ("Air temperature distance from 0 °C", "°C", 1),
        "abs_tr" => ("Runway temperature distance from 0 °C", "°C", 1),
        _ => return None,
    })
}

fn precip_name(key: &str) -> String {
    key.parse::<PrecipType>().map_or_else(|_| key.replace('_', " "), |p| match p {
        PrecipType::None => "no precipitation".to_string(),
        other => other.key().replace('_', " "),
    })
}

fn layers_name(code: &str) -> String {
    let names: Vec<&str> = code.chars().filter_map(|c| c.to_digit(10)).filter_map(|d| code_name(d as u8)).collect();
    if names.is_empty() {
        code.to_string()
    } else {
        names.join(" on ").to_lowercase()
    }
}

fn group_name(key: &str) -> String {
    ContaminationGroup::ALL
        .iter()
        .find(|g| g.key() == key)
        .map_or_else(|| key.replace('_', " "), |g| g.to_string().to_lowercase())
}

fn quantity(v: f64, unit: &str, digits: usize) -> String {
    match unit {
        "%" | "°C" => format!("{v:.digits$} {unit}").replace(" %", "%"),
        _ => format!("{v:.digits$} {unit}"),
    }
}

fn split_hours(s: &str) -> Option<(&str, &str)> {
    let (head, h) = s.rsplit_once('_')?;
    let hours = h.strip_suffix('h')?;
    hours.parse::<u32>().ok().map(|_| (head, hours))
}

/// Describes the observed value of a feature, e.g. `Dry snow accumulated
/// over 24 h: 8.0 mm`.
pub fn describe(feature: &str, value: Option<f64>) -> String {
    let Some(v) = value else {
        return format!("{} not available", label(feature));
    };
    let flag = v >= 0.5;
    if let Some((name, unit, d)) = variable(feature) {
        return format!("{name} {}", quantity(v, unit, d));
    }
    if let Some((base, hours)) = feature.split_once("_lag").and_then(|(b, h)| Some((b, h.strip_suffix('h')?))) {
        if let Some((name, unit, d)) = variable(base) {
            return format!("{name} {hours} h ago {}", quantity(v, unit, d));
        }
    }
    if let Some(rest) = feature.strip_prefix("delta_") {
        if let Some((base, hours)) = split_hours(rest) {
            if let Some((name, unit, d)) = variable(base) {
                return format!("{name} change over {hours} h {:+.d$} {unit}", v).replace(" %", "%");
            }
        }
    }
    if let Some(rest) = feature.strip_prefix("ac_") {
        if let Some((kind, hours)) = split_hours(rest) {
            let what = if kind == "total" { "Total precipitation".to_string() } else { capitalize(&precip_name(kind)) };
            return format!("{what} accumulated over {hours} h: {v:.1} mm");
        }
    }
    if let Some(kind) = feature.strip_prefix("pt_") {
        let name = precip_name(kind);
        return if flag { format!("Current precipitation: {name}") } else { format!("Current precipitation is not {name}") };
    }
    if let Some(group) = feature.strip_prefix("contam_group_") {
        let name = group_name(group);
        return if flag { format!("Reported surface class: {name}") } else { format!("Reported surface class is not {name}") };
    }
    match feature {
        "runway" => return format!("Runway number {}", v as i64),
        "contam_unknown" => {
            return if flag { "Reported layers form an unlisted combination".into() } else { "Reported layers form a listed combination".into() }
        }
        "contam_layers" => return format!("Reported contamination layers: {}", v as i64),
        "depth_mm" => return format!("Contaminant depth {v:.0} mm"),
        "coverage_pct" => return format!("Contaminant coverage {v:.0}%"),
        "sanded" => return if flag { "Runway sanded".into() } else { "Runway not sanded".into() },
        "chemicals" => return if flag { "Runway chemically treated".into() } else { "Runway not chemically treated".into() },
        "inspector_ba" => return format!("Inspector braking action {}", v as i64),
        "snowtam_age_min" => return format!("Runway report issued {v:.0} min ago"),
        _ => {}
    }
    if let Some(code) = feature.strip_prefix("contam_") {
        let name = layers_name(code);
        return if flag { format!("Reported surface: {name}") } else { format!("Reported surface is not {name}") };
    }
    format!("{feature} = {v}")
}

/// Short name used when the value is missing.
fn label(feature: &str) -> String {
    if let Some((name, _, _)) = variable(feature) {
        return name.to_string();
    }
    match feature {
        "depth_mm" => "Contaminant depth".into(),
        "coverage_pct" => "Contaminant coverage".into(),
        "inspector_ba" => "Inspector braking action".into(),
        "snowtam_age_min" => "Runway report".into(),
        _ => capitalize(&feature.replace('_', " ")),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

/// Full argument sentence: the observation followed by its effect.
pub fn argument_text(feature: &str, value: Option<f64>, phi: f64, source: ExplanationSource) -> String {
    let effect = match (source, phi > 0.0) {
        (ExplanationSource::Classification, true) => "raises the slippery probability",
        (ExplanationSource::Classification, false) => "lowers the slippery probability",
        (ExplanationSource::Regression, true) => "raises the expected friction",
        (ExplanationSource::Regression, false) => "lowers the expected friction",
    };
    format!("{}, {effect}", describe(feature, value))
}
