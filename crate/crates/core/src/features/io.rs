//! CSV formats for weather, runway reports and feature rows. Empty cells are
//! missing values; floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use super::contamination::{layer_string, parse_layers};
use super::schema::{feature_names, FeatureVector, SCHEMA_VERSION};
use super::series::{PrecipType, Var, WeatherSample, WeatherSeries};
use super::snowtam::{SnowtamHistory, SnowtamReport};
use crate::error::{Error, Result};
use crate::time::{format_timestamp, parse_timestamp};

pub const WEATHER_HEADER: [&str; 12] =
    ["timestamp", "runway", "pt", "pi", "ta", "tr", "hu", "vi", "ap", "dp", "along_wind", "across_wind"];
pub const SNOWTAM_HEADER: [&str; 8] =
    ["issued_at", "runway", "layers", "depth_mm", "coverage_pct", "sanded", "chemicals", "inspector_ba"];

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| Error::invalid(format!("not a number: `{s}`")))
}

fn check_header(found: &csv::StringRecord, expected: &[&str], what: &str) -> Result<()> {
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::invalid(format!("{what} CSV header must be `{}`", expected.join(","))));
    }
    Ok(())
}

#[derive(Deserialize)]
struct WeatherRow {
    timestamp: String,
    runway: String,
    pt: Option<String>,
    pi: Option<f64>,
    ta: Option<f64>,
    tr: Option<f64>,
    hu: Option<f64>,
    vi: Option<f64>,
    ap: Option<f64>,
    dp: Option<f64>,
    along_wind: Option<f64>,
    across_wind: Option<f64>,
}

/// Reads weather rows and groups them by runway. Rows of each runway must
/// be in increasing time order.
pub fn read_weather_csv<R: Read>(reader: R) -> Result<BTreeMap<String, WeatherSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &WEATHER_HEADER, "weather")?;
    let mut grouped: BTreeMap<String, Vec<WeatherSample>> = BTreeMap::new();
    for (line, row) in rdr.deserialize::<WeatherRow>().enumerate() {
        let row = row?;
        let ctx = |e: Error| Error::invalid(format!("weather row {}: {e}", line + 2));
        let timestamp = parse_timestamp(&row.timestamp).map_err(ctx)?;
        let pt = match row.pt.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<PrecipType>().map_err(ctx)?),
        };
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        let values = [row.pi, row.ta, row.tr, row.hu, row.vi, row.ap, row.dp, row.along_wind, row.across_wind].map(v);
        grouped.entry(row.runway).or_default().push(WeatherSample { timestamp, pt, values });
    }
    grouped.into_iter().map(|(rw, samples)| Ok((rw.clone(), WeatherSeries::from_samples(rw, samples)?))).collect()
}

pub fn write_weather_csv<'a, W: Write>(writer: W, series: impl IntoIterator<Item = &'a WeatherSeries>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(WEATHER_HEADER)?;
    for s in series {
        for sample in s.samples() {
            let mut rec = vec![
                format_timestamp(&sample.timestamp),
                s.runway().to_string(),
                sample.pt.map(|p| p.key().to_string()).unwrap_or_default(),
            ];
            rec.extend(Var::ALL.iter().map(|&v| fmt_f64(sample.get(v))));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(Error::invalid(format!("not a boolean: `{other}`"))),
    }
}

/// Reads runway reports grouped by runway.
pub fn read_snowtam_csv<R: Read>(reader: R) -> Result<BTreeMap<String, SnowtamHistory>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &SNOWTAM_HEADER, "snowtam")?;
    let mut grouped: BTreeMap<String, Vec<SnowtamReport>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = |e: Error| Error::invalid(format!("snowtam row {}: {e}", line + 2));
        let field = |i: usize| rec.get(i).unwrap_or("");
        let inspector_ba = match field(7) {
            "" => None,
            s => Some(s.parse::<u8>().map_err(|_| ctx(Error::invalid(format!("bad braking action `{s}`"))))?),
        };
        let report = SnowtamReport {
            issued_at: parse_timestamp(field(0)).map_err(ctx)?,
            runway: field(1).to_string(),
            layers: parse_layers(field(2)).map_err(ctx)?,
            depth_mm: parse_f64(field(3)).map_err(ctx)?,
            coverage_pct: parse_f64(field(4)).map_err(ctx)?,
            sanded: parse_bool(field(5)).map_err(ctx)?,
            chemicals: parse_bool(field(6)).map_err(ctx)?,
            inspector_ba,
        };
        report.validate().map_err(ctx)?;
        grouped.entry(report.runway.clone()).or_default().push(report);
    }
    grouped.into_iter().map(|(rw, reports)| Ok((rw, SnowtamHistory::new(reports)?))).collect()
}

pub fn write_snowtam_csv<'a, W: Write>(writer: W, reports: impl IntoIterator<Item = &'a SnowtamReport>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SNOWTAM_HEADER)?;
    for r in reports {
        w.write_record([
            format_timestamp(&r.issued_at),
            r.runway.clone(),
            layer_string(&r.layers),
            fmt_f64(r.depth_mm),
            fmt_f64(r.coverage_pct),
            u8::from(r.sanded).to_string(),
            u8::from(r.chemicals).to_string(),
            r.inspector_ba.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes feature vectors with a schema-ordered header.
pub fn write_feature_csv<W: Write>(writer: W, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(feature_names())?;
    for r in rows {
        w.write_record(r.values.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expected: Vec<&str> = feature_names().iter().map(String::as_str).collect();
    check_header(rdr.headers()?, &expected, "feature")?;
    rdr.records()
        .map(|rec| {
            let values = rec?.iter().map(parse_f64).collect::<Result<Vec<_>>>()?;
            Ok(FeatureVector { schema_version: SCHEMA_VERSION, values })
        })
        .collect()
}
