use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ContaminationGroup, SnowtamReport};

pub const DEFAULT_RUNWAY_MODEL_TOML: &str = include_str!("../../config/runway_model.toml");

/// Effect for inputs up to and including `upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub upper: f64,
    pub effect: f64,
}

/// Piecewise-constant lookup over ascending bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandTable {
    pub bands: Vec<Band>,
    /// Effect for inputs above every band.
    pub above: f64,
}

impl BandTable {
    pub fn lookup(&self, x: f64) -> f64 {
        self.bands.iter().find(|b| x <= b.upper).map_or(self.above, |b| b.effect)
    }

    fn validate(&self, what: &str) -> Result<()> {
        let in_range = |e: f64| (-2.0..=2.0).contains(&e);
        if !self.bands.windows(2).all(|w| w[0].upper < w[1].upper) {
            return Err(Error::Config(format!("{what}: band bounds must increase strictly")));
        }
        if !(self.bands.iter().all(|b| in_range(b.effect) && b.upper.is_finite()) && in_range(self.above)) {
            return Err(Error::Config(format!("{what}: effects must lie in [-2, 2]")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagEffect {
    pub yes: f64,
    pub no: f64,
}

impl FlagEffect {
    pub fn lookup(&self, flag: bool) -> f64 {
        if flag {
            self.yes
        } else {
            self.no
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseGrades {
    pub not: f64,
    pub dry: f64,
    pub wet: f64,
    pub solid: f64,
    pub loose_and_dry: f64,
    pub solid_base: f64,
}

impl BaseGrades {
    pub fn lookup(&self, g: ContaminationGroup) -> f64 {
        match g {
            ContaminationGroup::Not => self.not,
            ContaminationGroup::Dry => self.dry,
            ContaminationGroup::Wet => self.wet,
            ContaminationGroup::Solid => self.solid,
            ContaminationGroup::LooseAndDry => self.loose_and_dry,
            ContaminationGroup::SolidBase => self.solid_base,
        }
    }
}

/// Effect tables of the seven-effect runway grading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunwayModelConfig {
    pub version: u32,
    #[serde(default)]
    pub low_coverage_is_good: bool,
    pub base: BaseGrades,
    pub coverage: BandTable,
    pub depth: BandTable,
    pub runway_temperature: BandTable,
    pub humidity: BandTable,
    pub chemicals: FlagEffect,
    pub sanding: FlagEffect,
}

impl RunwayModelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunwayModelConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Config(format!("unsupported runway model version {}", self.version)));
        }
        let b = &self.base;
        if ![b.not, b.dry, b.wet, b.solid, b.loose_and_dry, b.solid_base].iter().all(|x| (1.0..=5.0).contains(x)) {
            return Err(Error::Config("base grades must lie in [1, 5]".into()));
        }
        self.coverage.validate("coverage")?;
        self.depth.validate("depth")?;
        self.runway_temperature.validate("runway_temperature")?;
        self.humidity.validate("humidity")?;
        for (what, f) in [("chemicals", self.chemicals), ("sanding", self.sanding)] {
            if !(-2.0..=2.0).contains(&f.yes) || !(-2.0..=2.0).contains(&f.no) {
                return Err(Error::Config(format!("{what}: effects must lie in [-2, 2]")));
            }
        }
        Ok(())
    }
}

impl Default for RunwayModelConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_RUNWAY_MODEL_TOML).expect("shipped runway model config parses")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunwayGrade {
    Grade(u8),
    /// Required inputs were missing.
    Unavailable(String),
}

impl RunwayGrade {
    pub fn grade(&self) -> Option<u8> {
        match self {
            RunwayGrade::Grade(g) => Some(*g),
            RunwayGrade::Unavailable(_) => None,
        }
    }

    /// Grades 1 to 3 (medium or worse) count as slippery.
    pub fn is_slippery(&self) -> Option<bool> {
        self.grade().map(|g| g <= 3)
    }
}

/// Sums the effects, rounds to the nearest integer and clamps to 1..=5.
pub fn grade_from_effects(effects: &[f64; 7]) -> u8 {
    effects.iter().sum::<f64>().round().clamp(1.0, 5.0) as u8
}

/// The seven effects x₁…x₇ for a report and the current runway temperature
/// and humidity.
pub fn runway_effects(report: &SnowtamReport, tr: f64, hu: f64, config: &RunwayModelConfig) -> [f64; 7] {
    [
        config.base.lookup(report.group()),
        config.coverage.lookup(report.coverage_pct),
        config.depth.lookup(report.depth_mm),
        config.runway_temperature.lookup(tr),
        config.humidity.lookup(hu),
        config.chemicals.lookup(report.chemicals),
        config.sanding.lookup(report.sanded),
    ]
}

pub fn runway_model(report: Option<&SnowtamReport>, tr: f64, hu: f64, config: &RunwayModelConfig) -> RunwayGrade {
    let Some(report) = report else {
        return RunwayGrade::Unavailable("no runway report".into());
    };
    if tr.is_nan() || hu.is_nan() {
        return RunwayGrade::Unavailable("runway temperature or humidity missing".into());
    }
    if config.low_coverage_is_good && report.coverage_pct < 10.0 {
        return RunwayGrade::Grade(5);
    }
    RunwayGrade::Grade(grade_from_effects(&runway_effects(report, tr, hu, config)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_timestamp;

    fn report(layers: &[u8], coverage: f64) -> SnowtamReport {
        SnowtamReport {
            issued_at: parse_timestamp("2024-01-01T00:00:00Z").unwrap(),
            runway: "01L".into(),
            layers: layers.to_vec(),
            depth_mm: 2.0,
            coverage_pct: coverage,
            sanded: false,
            chemicals: false,
            inspector_ba: None,
        }
    }

    #[test]
    fn effect_sum_examples() {
        assert_eq!(grade_from_effects(&[5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 5);
        assert_eq!(grade_from_effects(&[1.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0]), 1);
        assert_eq!(grade_from_effects(&[4.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]), 4);
        assert_eq!(grade_from_effects(&[5.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]), 5);
        assert_eq!(grade_from_effects(&[3.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]), 4);
    }

    #[test]
    fn output_range_and_unavailability() {
        let c = RunwayModelConfig::default();
        for layers in [&[0u8][..], &[4, 7], &[7], &[6]] {
            for tr in [-20.0, -1.0, 0.0, 5.0] {
                let g = runway_model(Some(&report(layers, 60.0)), tr, 95.0, &c).grade().unwrap();
                assert!((1..=5).contains(&g));
            }
        }
        assert!(runway_model(None, 0.0, 50.0, &c).grade().is_none());
        assert!(runway_model(Some(&report(&[7], 60.0)), f64::NAN, 50.0, &c).grade().is_none());
    }

    #[test]
    fn low_coverage_rule_is_optional() {
        let r = report(&[7], 5.0);
        let mut c = RunwayModelConfig::default();
        let off = runway_model(Some(&r), -1.0, 95.0, &c);
        c.low_coverage_is_good = true;
        assert_eq!(runway_model(Some(&r), -1.0, 95.0, &c), RunwayGrade::Grade(5));
        assert_ne!(off, RunwayGrade::Grade(5));
    }

    #[test]
    fn config_validation() {
        let bad = DEFAULT_RUNWAY_MODEL_TOML.replace("above = -1.5", "above = -3.5");
        assert!(RunwayModelConfig::from_toml(&bad).is_err());
        let bad = DEFAULT_RUNWAY_MODEL_TOML.replace("not = 5.0", "not = 6.0");
        assert!(RunwayModelConfig::from_toml(&bad).is_err());
        let bad = DEFAULT_RUNWAY_MODEL_TOML.replace("upper = 25.0", "upper = 5.0");
        assert!(RunwayModelConfig::from_toml(&bad).is_err());
    }
}
