use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{PrecipType, Var, WeatherSeries};

pub const DEFAULT_SCENARIOS_TOML: &str = include_str!("../../config/scenarios.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    All,
    Any,
}

/// Quantity tested by a condition. `tr_minus_dp` and `ta_minus_dp` are
/// dew-point spreads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioVar {
    Pt,
    Pi,
    Ta,
    Tr,
    Hu,
    Vi,
    Ap,
    Dp,
    WindSpeed,
    TrMinusDp,
    TaMinusDp,
}

impl ScenarioVar {
    fn value(self, w: &WeatherSeries, i: i64) -> f64 {
        let v = |x| w.value(x, i);
        match self {
            ScenarioVar::Pt => f64::NAN,
            ScenarioVar::Pi => v(Var::Pi),
            ScenarioVar::Ta => v(Var::Ta),
            ScenarioVar::Tr => v(Var::Tr),
            ScenarioVar::Hu => v(Var::Hu),
            ScenarioVar::Vi => v(Var::Vi),
            ScenarioVar::Ap => v(Var::Ap),
            ScenarioVar::Dp => v(Var::Dp),
            ScenarioVar::WindSpeed => v(Var::AlongWind).hypot(v(Var::AcrossWind)),
            ScenarioVar::TrMinusDp => v(Var::Tr) - v(Var::Dp),
            ScenarioVar::TaMinusDp => v(Var::Ta) - v(Var::Dp),
        }
    }
}

/// Test on one variable over a closed window `[i − window, i]`. Bounds are
/// inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub variable: ScenarioVar,
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_of: Option<Vec<PrecipType>>,
    pub window_hours: f64,
}

impl Condition {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::Config(format!("condition on {:?}: {why}", self.variable)));
        if !(self.window_hours > 0.0 && self.window_hours.is_finite()) {
            return bad("window_hours must be positive");
        }
        if self.variable == ScenarioVar::Pt {
            if self.one_of.as_ref().map_or(true, Vec::is_empty) || self.min.is_some() || self.max.is_some() {
                return bad("precipitation type needs a non-empty `one_of` and no bounds");
            }
            return Ok(());
        }
        if self.one_of.is_some() {
            return bad("`one_of` only applies to precipitation type");
        }
        match (self.min, self.max) {
            (None, None) => bad("needs `min` or `max`"),
            (Some(lo), Some(hi)) if !(lo <= hi) => bad("min exceeds max"),
            (lo, hi) if lo.is_some_and(f64::is_nan) || hi.is_some_and(f64::is_nan) => bad("NaN bound"),
            _ => Ok(()),
        }
    }

    /// Whole minutes covered by the window.
    pub fn window_minutes(&self) -> i64 {
        (self.window_hours * 60.0).round() as i64
    }

    fn holds_at(&self, w: &WeatherSeries, j: i64) -> bool {
        if !w.is_present(j) {
            return false;
        }
        if let Some(types) = &self.one_of {
            return w.precip_type(j).is_some_and(|p| types.contains(&p));
        }
        let x = self.variable.value(w, j);
        !x.is_nan() && self.min.map_or(true, |lo| x >= lo) && self.max.map_or(true, |hi| x <= hi)
    }

    pub fn evaluate(&self, w: &WeatherSeries, i: i64) -> bool {
        let mut window = i - self.window_minutes()..=i;
        match self.aggregate {
            Aggregate::All => window.all(|j| self.holds_at(w, j)),
            Aggregate::Any => window.any(|j| self.holds_at(w, j)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRule {
    pub name: String,
    pub conditions: Vec<Condition>,
}

impl ScenarioRule {
    pub fn fires(&self, w: &WeatherSeries, i: i64) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(|c| c.evaluate(w, i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub version: u32,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioRule>,
}

impl ScenarioSet {
    pub fn from_toml(text: &str) -> Result<Self> {
        let set: ScenarioSet = toml::from_str(text)?;
        if set.version != 1 {
            return Err(Error::Config(format!("unsupported scenario file version {}", set.version)));
        }
        for r in &set.scenarios {
            if r.conditions.is_empty() {
                return Err(Error::Config(format!("scenario {} has no conditions", r.name)));
            }
            for c in &r.conditions {
                c.validate().map_err(|e| Error::Config(format!("scenario {}: {e}", r.name)))?;
            }
        }
        Ok(set)
    }

    pub fn empty() -> Self {
        Self { version: 1, scenarios: Vec::new() }
    }

    /// Names of the firing scenarios, in rule order.
    pub fn evaluate(&self, w: &WeatherSeries, i: i64) -> Vec<String> {
        scenario_model(w, i, &self.scenarios)
    }
}

impl Default for ScenarioSet {
    fn default() -> Self {
        Self::from_toml(DEFAULT_SCENARIOS_TOML).expect("shipped scenario file parses")
    }
}

pub fn scenario_model(w: &WeatherSeries, i: i64, rules: &[ScenarioRule]) -> Vec<String> {
    rules.iter().filter(|r| r.fires(w, i)).map(|r| r.name.clone()).collect()
}

/// The SNOW scenario over the four hours ending at minute `i`: snow-type
/// precipitation at least once, air temperature in [−8, 2] °C, runway
/// temperature at most 0 °C and humidity in [85, 100] % throughout.
pub fn scenario_snow(w: &WeatherSeries, i: i64) -> bool {
    ScenarioSet::default().scenarios.iter().find(|r| r.name == "SNOW").is_some_and(|r| r.fires(w, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WeatherSample;
    use crate::time::parse_timestamp;

    fn window(f: impl Fn(i64, &mut WeatherSample)) -> WeatherSeries {
        let t0 = parse_timestamp("2024-01-01T00:00:00Z").unwrap();
        let samples = (0..=240).map(|m| {
            let mut s = WeatherSample {
                timestamp: t0 + chrono::Duration::minutes(m),
                pt: Some(PrecipType::None),
                values: [0.0, -3.0, -1.0, 90.0, 5000.0, 1000.0, -4.0, 0.0, 0.0],
            };
            if m == 100 {
                s.pt = Some(PrecipType::DrySnow);
            }
            f(m, &mut s);
            s
        });
        WeatherSeries::from_samples("01L", samples).unwrap()
    }

    #[test]
    fn snow_examples() {
        assert!(scenario_snow(&window(|_, _| {}), 240));
        let warm = window(|m, s| {
            if m == 17 {
                s.set(Var::Tr, 0.5);
            }
        });
        assert!(!scenario_snow(&warm, 240));
        let dry = window(|_, s| s.pt = Some(PrecipType::None));
        assert!(!scenario_snow(&dry, 240));
        // window reaches before the first sample: missing minutes fail `all`
        assert!(!scenario_snow(&window(|_, _| {}), 200));
    }

    #[test]
    fn missing_minute_fails_all() {
        let w = window(|_, _| {});
        let samples: Vec<_> = w.samples().filter(|s| s.timestamp != w.time_of(50)).collect();
        let gappy = WeatherSeries::from_samples("01L", samples).unwrap();
        assert!(!scenario_snow(&gappy, 240));
    }

    #[test]
    fn rule_set_behaviour() {
        let w = window(|_, _| {});
        assert!(scenario_model(&w, 240, &[]).is_empty());
        let set = ScenarioSet::default();
        assert_eq!(set.scenarios.len(), 8);
        assert_eq!(set.scenarios[0].name, "SNOW");
        let mut twice = set.scenarios[..1].to_vec();
        let mut copy = twice[0].clone();
        copy.name = "SNOW_AGAIN".into();
        twice.push(copy);
        assert_eq!(scenario_model(&w, 240, &twice), vec!["SNOW", "SNOW_AGAIN"]);
    }

    #[test]
    fn config_validation() {
        let bad = "version = 1\n[[scenario]]\nname = \"X\"\nconditions = [{ variable = \"ta\", aggregate = \"all\", window_hours = 1.0 }]\n";
        assert!(ScenarioSet::from_toml(bad).is_err());
        let bad = bad.replace("window_hours = 1.0", "min = 2.0, max = 1.0, window_hours = 1.0");
        assert!(ScenarioSet::from_toml(&bad).is_err());
        let bad = "version = 1\n[[scenario]]\nname = \"X\"\nconditions = [{ variable = \"pt\", aggregate = \"any\", window_hours = 1.0 }]\n";
        assert!(ScenarioSet::from_toml(bad).is_err());
        assert!(ScenarioSet::from_toml("version = 2\n").is_err());
    }
}
