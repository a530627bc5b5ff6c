use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{floor_minute, minutes_between, Timestamp};

/// Precipitation type reported by the runway weather station.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecipType {
    None,
    Rain,
    Sleet,
    WetSnow,
    DrySnow,
    DriftingSnow,
    FreezingRain,
    Hail,
    SnowGrains,
}

impl PrecipType {
    pub const ALL: [PrecipType; 9] = [
        PrecipType::None,
        PrecipType::Rain,
        PrecipType::Sleet,
        PrecipType::WetSnow,
        PrecipType::DrySnow,
        PrecipType::DriftingSnow,
        PrecipType::FreezingRain,
        PrecipType::Hail,
        PrecipType::SnowGrains,
    ];

    /// Types with their own accumulation columns.
    pub const ACCUMULATED: [PrecipType; 4] =
        [PrecipType::Rain, PrecipType::Sleet, PrecipType::WetSnow, PrecipType::DrySnow];

    pub fn key(self) -> &'static str {
        match self {
            PrecipType::None => "none",
            PrecipType::Rain => "rain",
            PrecipType::Sleet => "sleet",
            PrecipType::WetSnow => "wet_snow",
            PrecipType::DrySnow => "dry_snow",
            PrecipType::DriftingSnow => "drifting_snow",
            PrecipType::FreezingRain => "freezing_rain",
            PrecipType::Hail => "hail",
            PrecipType::SnowGrains => "snow_grains",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_snow(self) -> bool {
        matches!(self, PrecipType::WetSnow | PrecipType::DrySnow | PrecipType::SnowGrains)
    }
}

impl fmt::Display for PrecipType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for PrecipType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrecipType::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::invalid(format!("unknown precipitation type `{s}`")))
    }
}

/// Continuous weather variables, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Pi,
    Ta,
    Tr,
    Hu,
    Vi,
    Ap,
    Dp,
    AlongWind,
    AcrossWind,
}

impl Var {
    pub const ALL: [Var; 9] =
        [Var::Pi, Var::Ta, Var::Tr, Var::Hu, Var::Vi, Var::Ap, Var::Dp, Var::AlongWind, Var::AcrossWind];

    pub fn key(self) -> &'static str {
        match self {
            Var::Pi => "pi",
            Var::Ta => "ta",
            Var::Tr => "tr",
            Var::Hu => "hu",
            Var::Vi => "vi",
            Var::Ap => "ap",
            Var::Dp => "dp",
            Var::AlongWind => "along_wind",
            Var::AcrossWind => "across_wind",
        }
    }
}

impl FromStr for Var {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Var::ALL
            .into_iter()
            .find(|v| v.key() == s)
            .ok_or_else(|| Error::invalid(format!("unknown weather variable `{s}`")))
    }
}

/// Look-back distance for lag, delta and accumulation features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Horizon {
    H1,
    H3,
    H6,
    H12,
    H24,
}

impl Horizon {
    pub const ALL: [Horizon; 5] = [Horizon::H1, Horizon::H3, Horizon::H6, Horizon::H12, Horizon::H24];

    pub fn hours(self) -> i64 {
        match self {
            Horizon::H1 => 1,
            Horizon::H3 => 3,
            Horizon::H6 => 6,
            Horizon::H12 => 12,
            Horizon::H24 => 24,
        }
    }

    pub fn minutes(self) -> i64 {
        60 * self.hours()
    }

    pub fn from_hours(h: i64) -> Result<Self> {
        Horizon::ALL
            .into_iter()
            .find(|k| k.hours() == h)
            .ok_or_else(|| Error::invalid(format!("unsupported horizon {h} h (expected 1, 3, 6, 12 or 24)")))
    }
}

/// One minute of station data. Continuous values use NaN for missing.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSample {
    pub timestamp: Timestamp,
    pub pt: Option<PrecipType>,
    pub values: [f64; 9],
}

impl WeatherSample {
    pub fn missing(timestamp: Timestamp) -> Self {
        Self { timestamp, pt: None, values: [f64::NAN; 9] }
    }

    pub fn get(&self, v: Var) -> f64 {
        self.values[v as usize]
    }

    pub fn set(&mut self, v: Var, x: f64) {
        self.values[v as usize] = x;
    }

    pub fn validate(&self) -> Result<()> {
        let at = crate::time::format_timestamp(&self.timestamp);
        for v in Var::ALL {
            let x = self.get(v);
            if x.is_infinite() {
                return Err(Error::invalid(format!("{at}: {} is infinite", v.key())));
            }
        }
        let hu = self.get(Var::Hu);
        if !hu.is_nan() && !(0.0..=100.0).contains(&hu) {
            return Err(Error::invalid(format!("{at}: humidity {hu} outside [0, 100]")));
        }
        for v in [Var::Vi, Var::Pi] {
            if self.get(v) < 0.0 {
                return Err(Error::invalid(format!("{at}: {} is negative", v.key())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Minute {
    present: bool,
    pt: Option<PrecipType>,
    values: [f64; 9],
}

const ABSENT: Minute = Minute { present: false, pt: None, values: [f64::NAN; 9] };

/// Minute-cadence weather for one runway. Minutes are addressed by their
/// offset from the first sample; gaps are stored as absent minutes.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSeries {
    runway: String,
    start: Timestamp,
    minutes: Vec<Minute>,
}

impl WeatherSeries {
    /// Builds a series from samples with strictly increasing timestamps
    /// (after flooring to the minute).
    pub fn from_samples(runway: impl Into<String>, samples: impl IntoIterator<Item = WeatherSample>) -> Result<Self> {
        let runway = runway.into();
        let mut it = samples.into_iter().peekable();
        let start = match it.peek() {
            Some(s) => floor_minute(&s.timestamp),
            None => return Err(Error::invalid(format!("runway {runway}: no weather samples"))),
        };
        let mut series = Self { runway, start, minutes: Vec::new() };
        for s in it {
            series.push(s)?;
        }
        Ok(series)
    }

    /// Appends a sample later than every stored one.
    pub fn push(&mut self, s: WeatherSample) -> Result<()> {
        s.validate()?;
        let t = floor_minute(&s.timestamp);
        let off = minutes_between(&self.start, &t);
        if off < self.minutes.len() as i64 {
            return Err(Error::invalid(format!(
                "runway {}: timestamp {} is not after the previous sample",
                self.runway,
                crate::time::format_timestamp(&t)
            )));
        }
        self.minutes.resize(off as usize, ABSENT);
        self.minutes.push(Minute { present: true, pt: s.pt, values: s.values });
        Ok(())
    }

    pub fn runway(&self) -> &str {
        &self.runway
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    /// Timestamp of the last stored minute.
    pub fn end(&self) -> Timestamp {
        self.time_of(self.minutes.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.minutes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutes.is_empty()
    }

    /// Minute offset of `t` (floored); may lie outside the stored range.
    pub fn index_of(&self, t: &Timestamp) -> i64 {
        minutes_between(&self.start, &floor_minute(t))
    }

    pub fn time_of(&self, i: i64) -> Timestamp {
        self.start + chrono::Duration::minutes(i)
    }

    fn minute(&self, i: i64) -> &Minute {
        if i < 0 {
            return &ABSENT;
        }
        self.minutes.get(i as usize).unwrap_or(&ABSENT)
    }

    pub fn is_present(&self, i: i64) -> bool {
        self.minute(i).present
    }

    pub fn value(&self, v: Var, i: i64) -> f64 {
        self.minute(i).values[v as usize]
    }

    pub fn precip_type(&self, i: i64) -> Option<PrecipType> {
        self.minute(i).pt
    }

    pub fn sample(&self, i: i64) -> Option<WeatherSample> {
        let m = self.minute(i);
        m.present.then(|| WeatherSample { timestamp: self.time_of(i), pt: m.pt, values: m.values })
    }

    pub fn samples(&self) -> impl Iterator<Item = WeatherSample> + '_ {
        (0..self.minutes.len() as i64).filter_map(|i| self.sample(i))
    }

    /// Whether some sample lies within `tolerance` minutes of `i`.
    pub fn has_sample_near(&self, i: i64, tolerance: i64) -> bool {
        (i - tolerance..=i + tolerance).any(|j| self.is_present(j))
    }

    /// Copy restricted to minutes `[from, to]`.
    pub fn slice(&self, from: i64, to: i64) -> Option<Self> {
        let samples: Vec<_> = (from..=to).filter_map(|i| self.sample(i)).collect();
        Self::from_samples(self.runway.clone(), samples).ok()
    }
}

/// Value of `v` exactly `k` hours before minute `i`.
pub fn lag(series: &WeatherSeries, v: Var, i: i64, k: Horizon) -> f64 {
    series.value(v, i - k.minutes())
}

/// Change of `v` over the last `k` hours.
pub fn delta(series: &WeatherSeries, v: Var, i: i64, k: Horizon) -> f64 {
    series.value(v, i) - lag(series, v, i, k)
}

/// Sum of per-minute intensities (mm/h) over the closed window
/// `[i - 60k, i]` restricted to minutes reporting `ptype`; the unit is
/// therefore (mm/h)·min. Missing minutes contribute nothing.
pub fn accumulate_precip(series: &WeatherSeries, ptype: PrecipType, i: i64, k: Horizon) -> f64 {
    (i - k.minutes()..=i)
        .filter(|&j| series.precip_type(j) == Some(ptype))
        .map(|j| series.value(Var::Pi, j))
        .filter(|x| !x.is_nan())
        .sum()
}

/// Total intensity over the closed window regardless of type.
pub fn accumulate_total(series: &WeatherSeries, i: i64, k: Horizon) -> f64 {
    (i - k.minutes()..=i)
        .map(|j| series.value(Var::Pi, j))
        .filter(|x| !x.is_nan())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_timestamp;

    fn t0() -> Timestamp {
        parse_timestamp("2024-01-01T00:00:00Z").unwrap()
    }

    pub(crate) fn ramp(minutes: i64, f: impl Fn(i64) -> (Option<PrecipType>, [f64; 9])) -> WeatherSeries {
        let samples = (0..minutes).map(|i| {
            let (pt, values) = f(i);
            WeatherSample { timestamp: t0() + chrono::Duration::minutes(i), pt, values }
        });
        WeatherSeries::from_samples("01", samples).unwrap()
    }

    fn flat(v: f64) -> [f64; 9] {
        let mut a = [v; 9];
        a[Var::Hu as usize] = 50.0;
        a
    }

    #[test]
    fn lag_examples() {
        let s = ramp(1600, |_| (Some(PrecipType::None), flat(2.0)));
        for k in Horizon::ALL {
            assert_eq!(lag(&s, Var::Ta, 1500, k), 2.0);
            assert_eq!(delta(&s, Var::Ap, 1500, k), 0.0);
        }
        let r = ramp(400, |i| {
            let mut v = flat(0.0);
            v[Var::Ta as usize] = i as f64 / 60.0;
            (None, v)
        });
        let i = 300;
        assert!((lag(&r, Var::Ta, i, Horizon::H3) - (r.value(Var::Ta, i) - 3.0)).abs() < 1e-12);
        assert!(lag(&r, Var::Ta, i, Horizon::H6).is_nan());
    }

    #[test]
    fn gaps_are_missing() {
        let samples = [0, 1, 5].map(|m| {
            let mut s = WeatherSample::missing(t0() + chrono::Duration::minutes(m));
            s.set(Var::Tr, m as f64);
            s
        });
        let s = WeatherSeries::from_samples("01", samples).unwrap();
        assert_eq!(s.len(), 6);
        assert!(!s.is_present(3));
        assert!(s.value(Var::Tr, 3).is_nan());
        assert!(s.has_sample_near(3, 2));
        assert!(!s.has_sample_near(3, 1));
        assert_eq!(s.value(Var::Tr, 5), 5.0);
    }

    #[test]
    fn delta_example() {
        let r = ramp(200, |i| {
            let mut v = flat(0.0);
            v[Var::Tr as usize] = if i == 190 { 2.0 } else { -1.0 };
            (None, v)
        });
        assert_eq!(delta(&r, Var::Tr, 190, Horizon::H3), 3.0);
        let s = ramp(200, |_| (None, [f64::NAN; 9]));
        assert!(delta(&s, Var::Tr, 190, Horizon::H1).is_nan());
    }

    #[test]
    fn accumulation_examples() {
        let s = ramp(120, |_| {
            let mut v = flat(0.0);
            v[Var::Pi as usize] = 2.0;
            (Some(PrecipType::DrySnow), v)
        });
        // closed window: 61 samples of 2 mm/h
        assert_eq!(accumulate_precip(&s, PrecipType::DrySnow, 100, Horizon::H1), 122.0);
        assert_eq!(accumulate_precip(&s, PrecipType::WetSnow, 100, Horizon::H1), 0.0);
        assert_eq!(accumulate_total(&s, 100, Horizon::H1), 122.0);
        // window starting before the series only counts stored minutes
        assert_eq!(accumulate_precip(&s, PrecipType::DrySnow, 30, Horizon::H1), 62.0);
    }

    #[test]
    fn rejects_bad_samples_and_order() {
        let mut s = WeatherSample::missing(t0());
        s.set(Var::Hu, 101.0);
        assert!(WeatherSeries::from_samples("01", [s]).is_err());
        let a = WeatherSample::missing(t0());
        assert!(WeatherSeries::from_samples("01", [a.clone(), a]).is_err());
        assert!(WeatherSeries::from_samples("01", Vec::new()).is_err());
        assert!(Horizon::from_hours(2).is_err());
        assert_eq!(Horizon::from_hours(12).unwrap(), Horizon::H12);
    }
}
