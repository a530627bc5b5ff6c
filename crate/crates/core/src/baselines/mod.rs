//! Rule-based comparison models: the seven-effect runway grading, the
//! weather scenario warnings and a road-friction regression.

pub mod juga;
pub mod runway;
pub mod scenario;

pub use crate::features::{contamination_group, ContaminationGroup};
pub use juga::{juga_cf, JugaCoeffs, JugaInputs, SurfaceState, CF_DRY};
pub use runway::{grade_from_effects, runway_effects, runway_model, RunwayGrade, RunwayModelConfig};
pub use scenario::{scenario_model, scenario_snow, Aggregate, Condition, ScenarioRule, ScenarioSet, ScenarioVar};
