//! Joins telemetry, weather and runway reports into one labeled row per
//! landing, together with the verdicts of the rule-based models.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{runway_model, RunwayModelConfig, ScenarioSet};
use crate::error::{Error, Result};
use crate::features::io::{fmt_f64, parse_f64, read_snowtam_csv, read_weather_csv};
use crate::features::{
    build_feature_vector, feature_names, is_weather_feature, FeatureVector, SnowtamHistory, Var, WeatherSeries, N_FEATURES,
    SCHEMA_VERSION,
};
use crate::friction::{estimate_mu_b, read_landings_csv, AeroParams, Aggregation, LandingRecord};
use crate::gbt::FeatureMatrix;
use crate::time::{format_timestamp, parse_timestamp, Timestamp};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyOptions {
    pub aero: AeroParams,
    pub aggregation: Aggregation,
    pub runway_model: RunwayModelConfig,
    pub scenarios: ScenarioSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandingRow {
    pub landing_id: String,
    pub runway: String,
    pub touchdown_time: Timestamp,
    pub friction_limited: bool,
    pub mu_b: f64,
    pub slippery: bool,
    /// Runway model grade 1..=5, if its inputs were available.
    pub runway_grade: Option<u8>,
    pub scenario_warnings: Vec<String>,
    pub inspector_ba: Option<u8>,
    pub features: FeatureVector,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLanding {
    pub landing_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<LandingRow>,
    pub skipped: Vec<SkippedLanding>,
}

pub const WEATHER_FILE: &str = "weather.csv";
pub const SNOWTAM_FILE: &str = "snowtam.csv";
pub const LANDINGS_FILE: &str = "landings.csv";

/// The three input tables of one airport.
#[derive(Clone, Debug, Default)]
pub struct RawInputs {
    pub weather: BTreeMap<String, WeatherSeries>,
    pub snowtams: BTreeMap<String, SnowtamHistory>,
    pub landings: Vec<LandingRecord>,
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

impl RawInputs {
    /// Reads `weather.csv`, `snowtam.csv` and `landings.csv` from `dir`.
    /// A missing report file means no reports; a missing landings file
    /// means no landings.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let weather = read_weather_csv(open(dir, WEATHER_FILE)?)?;
        let snowtams = match dir.join(SNOWTAM_FILE).exists() {
            true => read_snowtam_csv(open(dir, SNOWTAM_FILE)?)?,
            false => BTreeMap::new(),
        };
        let landings = match dir.join(LANDINGS_FILE).exists() {
            true => read_landings_csv(open(dir, LANDINGS_FILE)?)?,
            false => Vec::new(),
        };
        Ok(Self { weather, snowtams, landings })
    }

    pub fn assemble(&self, opts: &AssemblyOptions) -> Result<Dataset> {
        assemble(&self.weather, &self.snowtams, &self.landings, opts)
    }
}

/// Position of each runway in name order; used as the runway feature.
pub fn runway_indices(weather: &BTreeMap<String, WeatherSeries>) -> BTreeMap<String, usize> {
    weather.keys().enumerate().map(|(i, k)| (k.clone(), i)).collect()
}

fn assemble_one(
    l: &LandingRecord,
    weather: &BTreeMap<String, WeatherSeries>,
    snowtams: &BTreeMap<String, SnowtamHistory>,
    index: &BTreeMap<String, usize>,
    opts: &AssemblyOptions,
) -> Result<LandingRow> {
    let series = weather.get(&l.runway).ok_or_else(|| Error::NotFound(format!("no weather for runway {}", l.runway)))?;
    let friction = estimate_mu_b(l, &opts.aero, opts.aggregation)?;
    let report = snowtams.get(&l.runway).and_then(|h| h.latest_at(&l.touchdown_time));
    let features = build_feature_vector(series, report, &l.touchdown_time, index[&l.runway], true)?;
    let i = series.index_of(&l.touchdown_time);
    let grade = runway_model(report, series.value(Var::Tr, i), series.value(Var::Hu, i), &opts.runway_model);
    Ok(LandingRow {
        landing_id: l.landing_id.clone(),
        runway: l.runway.clone(),
        touchdown_time: l.touchdown_time,
        friction_limited: friction.friction_limited,
        mu_b: friction.mu_b,
        slippery: friction.slippery,
        runway_grade: grade.grade(),
        scenario_warnings: opts.scenarios.evaluate(series, i),
        inspector_ba: report.and_then(|r| r.inspector_ba),
        features,
    })
}

/// Builds one row per landing. Landings whose telemetry or weather is
/// unusable are listed in `skipped` instead of failing the whole batch.
pub fn assemble(
    weather: &BTreeMap<String, WeatherSeries>,
    snowtams: &BTreeMap<String, SnowtamHistory>,
    landings: &[LandingRecord],
    opts: &AssemblyOptions,
) -> Result<Dataset> {
    opts.aero.validate()?;
    let index = runway_indices(weather);
    let results: Vec<Result<LandingRow>> =
        landings.par_iter().map(|l| assemble_one(l, weather, snowtams, &index, opts)).collect();
    let mut out = Dataset::default();
    for (l, r) in landings.iter().zip(results) {
        match r {
            Ok(row) => out.rows.push(row),
            Err(e) if e.is_input_error() => out.skipped.push(SkippedLanding { landing_id: l.landing_id.clone(), reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All feature columns, or with the report block blanked out.
    pub fn matrix(&self, met_only: bool) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(self.rows.len() * N_FEATURES);
        for r in &self.rows {
            values.extend_from_slice(&r.features.values);
        }
        let m = FeatureMatrix::new(feature_names().to_vec(), values)?;
        Ok(if met_only { m.mask_columns(&report_columns()) } else { m })
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.slippery).collect()
    }

    /// Rows that enter the friction regression.
    pub fn limited_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.rows[i].friction_limited).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(ROW_HEADER.iter().copied().chain(feature_names().iter().map(String::as_str)))?;
        for r in &self.rows {
            let head = [
                r.landing_id.clone(),
                r.runway.clone(),
                format_timestamp(&r.touchdown_time),
                r.friction_limited.to_string(),
                fmt_f64(r.mu_b),
                r.slippery.to_string(),
                r.runway_grade.map_or(String::new(), |g| g.to_string()),
                r.scenario_warnings.join(";"),
                r.inspector_ba.map_or(String::new(), |g| g.to_string()),
            ];
            w.write_record(head.into_iter().chain(r.features.values.iter().map(|&x| fmt_f64(x))))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected: Vec<&str> = ROW_HEADER.iter().copied().chain(feature_names().iter().map(String::as_str)).collect();
        if header.iter().ne(expected.iter().copied()) {
            return Err(Error::invalid(format!("dataset CSV header must start with `{}` followed by the feature columns", ROW_HEADER.join(","))));
        }
        let mut out = Dataset::default();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let at = |i: usize| rec.get(i).unwrap_or("");
            let ctx = |e: Error| Error::invalid(format!("dataset row {}: {e}", line + 1));
            let flag = |i: usize| at(i).parse::<bool>().map_err(|_| Error::invalid(format!("`{}` is not true/false", at(i))));
            let small = |i: usize| -> Result<Option<u8>> {
                if at(i).is_empty() {
                    return Ok(None);
                }
                at(i).parse::<u8>().map(Some).map_err(|_| Error::invalid(format!("`{}` is not a grade", at(i))))
            };
            let row = (|| -> Result<LandingRow> {
                Ok(LandingRow {
                    landing_id: at(0).to_string(),
                    runway: at(1).to_string(),
                    touchdown_time: parse_timestamp(at(2))?,
                    friction_limited: flag(3)?,
                    mu_b: parse_f64(at(4))?,
                    slippery: flag(5)?,
                    runway_grade: small(6)?,
                    scenario_warnings: at(7).split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
                    inspector_ba: small(8)?,
                    features: FeatureVector {
                        schema_version: SCHEMA_VERSION,
                        values: (ROW_HEADER.len()..rec.len()).map(|i| parse_f64(at(i))).collect::<Result<_>>()?,
                    },
                })
            })()
            .map_err(ctx)?;
            out.rows.push(row);
        }
        Ok(out)
    }
}

pub const ROW_HEADER: [&str; 9] = [
    "landing_id",
    "runway",
    "touchdown_time",
    "friction_limited",
    "mu_b",
    "slippery",
    "runway_grade",
    "scenario_warnings",
    "inspector_ba",
];

/// Columns taken from runway reports.
pub fn report_columns() -> Vec<usize> {
    (0..N_FEATURES).filter(|&i| !is_weather_feature(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, label_oracle, GeneratorConfig, PlantedLaw};

    fn data() -> (crate::synthgen::SyntheticData, Dataset) {
        let cfg = GeneratorConfig {
            seed: 2,
            n_days: 4,
            landings_per_day: 30,
            calibrate: false,
            law: PlantedLaw { base: 0.3, ..PlantedLaw::default() },
            ..GeneratorConfig::default()
        };
        let s = generate(&cfg).unwrap();
        let d = assemble(&s.weather, &s.snowtams, &s.landings, &AssemblyOptions::default()).unwrap();
        (s, d)
    }

    #[test]
    fn labels_match_the_planted_truth() {
        let (s, d) = data();
        assert!(d.skipped.is_empty());
        let oracle = label_oracle(&s.truth);
        assert_eq!(d.labels(), oracle.iter().map(|l| l.slippery).collect::<Vec<_>>());
        for (row, o) in d.rows.iter().zip(&oracle) {
            assert_eq!(row.friction_limited, o.mu.is_some());
        }
        assert_eq!(d.rows[0].features.values.len(), N_FEATURES);
    }

    #[test]
    fn csv_round_trip() {
        let (_, d) = data();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows.len(), d.rows.len());
        for (a, b) in back.rows.iter().zip(&d.rows) {
            assert!(a.features.same_as(&b.features));
            assert_eq!((a.mu_b, a.slippery, &a.scenario_warnings, a.runway_grade), (b.mu_b, b.slippery, &b.scenario_warnings, b.runway_grade));
        }
    }

    #[test]
    fn raw_directory_round_trip() {
        let (s, d) = data();
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path()).unwrap();
        let raw = RawInputs::read_dir(dir.path()).unwrap();
        let again = raw.assemble(&AssemblyOptions::default()).unwrap();
        assert_eq!(again.labels(), d.labels());
        assert!(again.rows.iter().zip(&d.rows).all(|(a, b)| a.features.same_as(&b.features)));
        let err = RawInputs::read_dir(&dir.path().join("missing")).unwrap_err();
        assert!(err.is_input_error() && err.to_string().contains("weather.csv"));
    }

    #[test]
    fn met_only_blanks_report_block() {
        let (_, d) = data();
        let m = d.matrix(true).unwrap();
        let cols = report_columns();
        assert_eq!(cols.len(), 44);
        assert!(m.rows().all(|r| cols.iter().all(|&c| r[c].is_nan())));
        assert!(m.row(0)[1].is_finite());
    }

    #[test]
    fn unknown_runway_is_skipped() {
        let (s, _) = data();
        let mut landings = s.landings[..3].to_vec();
        landings[1].runway = "19".into();
        let d = assemble(&s.weather, &s.snowtams, &landings, &AssemblyOptions::default()).unwrap();
        assert_eq!(d.rows.len(), 2);
        assert_eq!(d.skipped[0].landing_id, landings[1].landing_id);
    }
}
