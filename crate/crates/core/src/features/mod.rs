//! Weather series, runway reports and the explanatory-variable schema.

pub mod contamination;
pub mod io;
mod schema;
mod series;
mod snowtam;

pub use contamination::{contamination_group, ContaminationGroup};
pub use schema::{
    build_feature_vector, feature_index, feature_names, is_weather_feature, one_hot_contamination, one_hot_precip,
    schema_checksum, FeatureVector, N_FEATURES, N_WEATHER_FEATURES, SCHEMA_VERSION, STALE_TOLERANCE_MIN,
};
pub use series::{accumulate_precip, accumulate_total, delta, lag, Horizon, PrecipType, Var, WeatherSample, WeatherSeries};
pub use snowtam::{SnowtamHistory, SnowtamReport};
