//! Runway assessments for the decision-support front end: probability
//! gauge, braking action, scenario warnings and the arguments behind them.

mod bundle;
mod store;
pub mod text;

use serde::{Deserialize, Serialize};

pub use bundle::{ModelBundle, ModelVersions, TrainOptions, TrainingManifest};
pub use store::{Batch, DataStore, Snapshot};

use crate::baselines::ScenarioSet;
use crate::error::{Error, Result};
use crate::explain::{shap_values, top_arguments, Argument};
use crate::features::{build_feature_vector, feature_index, PrecipType, SnowtamReport, Var, WeatherSample, WeatherSeries};
use crate::friction::braking_action_of_prediction;
use crate::time::{format_timestamp, Timestamp};

/// Arguments listed on each side.
pub const MAX_ARGUMENTS: usize = 5;

/// Minutes of weather kept around the assessed minute when the series is
/// copied for a what-if run. Covers the longest feature and scenario
/// windows.
const WHATIF_HISTORY_MIN: i64 = 48 * 60;

/// Maps a probability to the 0 to 100 gauge so that `p_bar` sits at 50:
/// linear on `[0, p_bar]` and on `[p_bar, 1]`.
///
/// Below `p_bar` the result is kept strictly under 50, so a gauge reading
/// of 50 or more always means `p >= p_bar`.
pub fn scale_probability(p: f64, p_bar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    if !(p_bar > 0.0 && p_bar < 1.0) {
        return Err(Error::invalid(format!("threshold {p_bar} outside (0, 1)")));
    }
    if p < p_bar {
        let below_half = f64::from_bits(50f64.to_bits() - 1);
        Ok((50.0 * (p / p_bar)).min(below_half))
    } else {
        Ok((50.0 + 50.0 * ((p - p_bar) / (1.0 - p_bar))).min(100.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationSource {
    Classification,
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgumentView {
    pub feature: String,
    pub value: Option<f64>,
    pub phi: f64,
    pub human_text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgumentLists {
    pub source: ExplanationSource,
    /// Margin of the explained model with every feature at background.
    pub base_value: f64,
    /// Largest positive attributions first.
    pub positive: Vec<ArgumentView>,
    /// Largest negative attributions first.
    pub negative: Vec<ArgumentView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrakingActionView {
    pub level: u8,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentPayload {
    pub runway_id: String,
    pub timestamp: String,
    pub slippery_probability_raw: f64,
    /// Percent on the gauge where the threshold reads 50.
    pub slippery_probability_scaled: f64,
    pub threshold: f64,
    pub is_slippery: bool,
    /// Friction coefficient predicted by the regressor.
    pub predicted_mu: f64,
    pub braking_action: BrakingActionView,
    pub scenario_warnings: Vec<String>,
    pub arguments: ArgumentLists,
    pub model_versions: ModelVersions,
}

impl AssessmentPayload {
    /// Checks the invariants a consumer may rely on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("assessment payload: {m}")));
        if !(0.0..=1.0).contains(&self.slippery_probability_raw) {
            return bad(format!("raw probability {}", self.slippery_probability_raw));
        }
        if !(0.0..=100.0).contains(&self.slippery_probability_scaled) {
            return bad(format!("scaled probability {}", self.slippery_probability_scaled));
        }
        if self.is_slippery != (self.slippery_probability_scaled >= 50.0) {
            return bad("is_slippery disagrees with the scaled probability".into());
        }
        let expected = if self.is_slippery { ExplanationSource::Regression } else { ExplanationSource::Classification };
        if self.arguments.source != expected {
            return bad("arguments come from the wrong model".into());
        }
        if crate::friction::BrakingAction::new(self.braking_action.level)?.label() != self.braking_action.label {
            return bad(format!("braking action label `{}`", self.braking_action.label));
        }
        let a = &self.arguments;
        if a.positive.len() > MAX_ARGUMENTS || a.negative.len() > MAX_ARGUMENTS {
            return bad("too many arguments".into());
        }
        if a.positive.iter().any(|x| !(x.phi > 0.0)) || a.negative.iter().any(|x| !(x.phi < 0.0)) {
            return bad("argument sign does not match its list".into());
        }
        for list in [&a.positive, &a.negative] {
            if list.windows(2).any(|w| w[0].phi.abs() < w[1].phi.abs()) {
                return bad("arguments are not ordered by |phi|".into());
            }
        }
        Ok(())
    }
}

/// Inputs of one assessment after any what-if edits.
struct Inputs<'a> {
    runway: &'a str,
    at: Timestamp,
    series: &'a WeatherSeries,
    report: Option<&'a SnowtamReport>,
    threshold: Option<f64>,
    feature_edits: &'a [(usize, FeatureEdit)],
}

#[derive(Clone, Copy, Debug)]
enum FeatureEdit {
    Set(f64),
    Add(f64),
}

fn build(bundle: &ModelBundle, scenarios: &ScenarioSet, inp: Inputs<'_>) -> Result<AssessmentPayload> {
    let index = bundle.runway_index(inp.runway)?;
    let threshold = inp.threshold.unwrap_or(bundle.expected_positive_rate);
    let mut fv = build_feature_vector(inp.series, inp.report, &inp.at, index, !bundle.manifest.met_only)?;
    for &(i, edit) in inp.feature_edits {
        match edit {
            FeatureEdit::Set(v) => fv.values[i] = v,
            FeatureEdit::Add(d) => fv.values[i] += d,
        }
    }
    let x = &fv.values;
    let p = bundle.classifier.predict_proba(x)?;
    let scaled = scale_probability(p, threshold)?;
    let is_slippery = scaled >= 50.0;
    let mu = bundle.regressor.predict_margin(x);
    let ba = braking_action_of_prediction(mu);

    let (source, model, background) = if is_slippery {
        (ExplanationSource::Regression, &bundle.regressor, &bundle.regressor_background)
    } else {
        (ExplanationSource::Classification, &bundle.classifier, &bundle.classifier_background)
    };
    let explanation = shap_values(model, x, background)?;
    let (pos, neg) = top_arguments(&explanation, MAX_ARGUMENTS, MAX_ARGUMENTS);
    let view = |a: Argument| ArgumentView {
        human_text: text::argument_text(&a.feature, a.value, a.phi, source),
        feature: a.feature,
        value: a.value,
        phi: a.phi,
    };

    Ok(AssessmentPayload {
        runway_id: inp.runway.to_string(),
        timestamp: format_timestamp(&inp.at),
        slippery_probability_raw: p,
        slippery_probability_scaled: scaled,
        threshold,
        is_slippery,
        predicted_mu: mu,
        braking_action: BrakingActionView { level: ba.level(), label: ba.label().to_string() },
        scenario_warnings: scenarios.evaluate(inp.series, inp.series.index_of(&inp.at)),
        arguments: ArgumentLists {
            source,
            base_value: explanation.base_value,
            positive: pos.into_iter().map(view).collect(),
            negative: neg.into_iter().map(view).collect(),
        },
        model_versions: bundle.versions(),
    })
}

/// Assesses `runway` at minute `at` from the data in `snapshot`. `threshold`
/// replaces the bundle's expected positive rate as the 50% point.
pub fn assess(
    bundle: &ModelBundle,
    scenarios: &ScenarioSet,
    snapshot: &Snapshot,
    runway: &str,
    at: Timestamp,
    threshold: Option<f64>,
) -> Result<AssessmentPayload> {
    let series = snapshot.series(runway)?;
    let report = snapshot.history(runway).and_then(|h| h.latest_at(&at));
    build(bundle, scenarios, Inputs { runway, at, series, report, threshold, feature_edits: &[] })
}

/// One hypothetical change. Weather and report edits are applied before
/// the features are built; feature edits afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Override {
    /// Sets a feature column.
    Feature { feature: String, value: f64 },
    /// Adds to a feature column.
    FeatureDelta { feature: String, delta: f64 },
    /// Sets a weather variable over the last `minutes` minutes up to the
    /// assessed one.
    Weather {
        variable: String,
        value: f64,
        #[serde(default = "one")]
        minutes: u32,
    },
    /// Sets the precipitation type over the last `minutes` minutes.
    PrecipType {
        value: PrecipType,
        #[serde(default = "one")]
        minutes: u32,
    },
    /// Edits the latest runway report.
    Report {
        #[serde(default)]
        layers: Option<String>,
        #[serde(default)]
        depth_mm: Option<f64>,
        #[serde(default)]
        coverage_pct: Option<f64>,
        #[serde(default)]
        sanded: Option<bool>,
        #[serde(default)]
        chemicals: Option<bool>,
    },
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub runway: String,
    pub at: String,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

/// Samples in the `minutes` minutes ending at `at`.
fn recent(samples: &mut [WeatherSample], at: Timestamp, minutes: u32) -> impl Iterator<Item = &mut WeatherSample> {
    let from = at - chrono::Duration::minutes(i64::from(minutes.max(1)) - 1);
    samples.iter_mut().filter(move |s| s.timestamp >= from && s.timestamp <= at)
}

fn lookup_feature(name: &str) -> Result<usize> {
    feature_index(name).ok_or_else(|| Error::invalid(format!("unknown feature `{name}`")))
}

/// Re-assesses with the request's overrides applied to a private copy of
/// the inputs. The snapshot itself is not modified.
pub fn what_if(bundle: &ModelBundle, scenarios: &ScenarioSet, snapshot: &Snapshot, req: &WhatIfRequest) -> Result<AssessmentPayload> {
    let at = crate::time::parse_timestamp(&req.at)?;
    let full = snapshot.series(&req.runway)?;
    let i = full.index_of(&at);
    let mut samples: Vec<_> = (i - WHATIF_HISTORY_MIN..=i).filter_map(|j| full.sample(j)).collect();
    let mut report = snapshot.history(&req.runway).and_then(|h| h.latest_at(&at)).cloned();
    let mut edits = Vec::new();

    for o in &req.overrides {
        match o {
            Override::Feature { feature, value } => edits.push((lookup_feature(feature)?, FeatureEdit::Set(*value))),
            Override::FeatureDelta { feature, delta } => edits.push((lookup_feature(feature)?, FeatureEdit::Add(*delta))),
            Override::Weather { variable, value, minutes } => {
                let v: Var = variable.parse()?;
                for s in recent(&mut samples, at, *minutes) {
                    s.set(v, *value);
                }
            }
            Override::PrecipType { value, minutes } => {
                for s in recent(&mut samples, at, *minutes) {
                    s.pt = Some(*value);
                }
            }
            Override::Report { layers, depth_mm, coverage_pct, sanded, chemicals } => {
                let r = report
                    .as_mut()
                    .ok_or_else(|| Error::invalid(format!("no runway report for {} at {}", req.runway, req.at)))?;
                if let Some(l) = layers {
                    r.layers = crate::features::contamination::parse_layers(l)?;
                }
                r.depth_mm = depth_mm.unwrap_or(r.depth_mm);
                r.coverage_pct = coverage_pct.unwrap_or(r.coverage_pct);
                r.sanded = sanded.unwrap_or(r.sanded);
                r.chemicals = chemicals.unwrap_or(r.chemicals);
                r.validate()?;
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::StaleData(format!("runway {}: no weather before {}", req.runway, req.at)));
    }
    let series = WeatherSeries::from_samples(req.runway.clone(), samples)?;
    build(
        bundle,
        scenarios,
        Inputs { runway: &req.runway, at, series: &series, report: report.as_ref(), threshold: req.threshold, feature_edits: &edits },
    )
}
