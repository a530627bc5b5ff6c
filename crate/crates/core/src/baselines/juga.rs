use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Friction coefficient of a dry surface.
pub const CF_DRY: f64 = 0.82;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceState {
    SnowyIcy,
    Wet,
    Dry,
}

/// Monotone transform applied to every regressor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// `ln(1 + x)`, for non-negative inputs.
    Ln1p,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Ln1p => x.ln_1p(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnowIceCoeffs {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WetCoeffs {
    pub a2: f64,
    pub d2: f64,
}

/// Road-friction regression coefficients. The snowy/icy and wet models
/// have no published values and must be supplied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JugaCoeffs {
    pub snow_ice: Option<SnowIceCoeffs>,
    pub wet: Option<WetCoeffs>,
    #[serde(default)]
    pub transform: Transform,
}

/// Layer thicknesses (mm) and runway temperature (°C).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JugaInputs {
    pub snow_mm: f64,
    pub ice_mm: f64,
    pub water_mm: f64,
    pub tr: f64,
}

/// Predicted friction coefficient, clamped to [0, 1].
pub fn juga_cf(state: SurfaceState, inputs: &JugaInputs, coeffs: &JugaCoeffs) -> Result<f64> {
    let thick = [inputs.snow_mm, inputs.ice_mm, inputs.water_mm];
    if thick.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::invalid("layer thicknesses must be non-negative"));
    }
    let f = |x| coeffs.transform.apply(x);
    let cf = match state {
        SurfaceState::Dry => CF_DRY,
        SurfaceState::Wet => {
            let c = coeffs.wet.ok_or_else(|| Error::Config("no coefficients for the wet model".into()))?;
            c.a2 * f(inputs.water_mm) + c.d2
        }
        SurfaceState::SnowyIcy => {
            let c = coeffs.snow_ice.ok_or_else(|| Error::Config("no coefficients for the snowy/icy model".into()))?;
            c.a1 * f(inputs.snow_mm) + c.b1 * f(inputs.ice_mm) + c.c1 * f(inputs.tr) + c.d1
        }
    };
    Ok(cf.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let none = JugaCoeffs::default();
        assert_eq!(juga_cf(SurfaceState::Dry, &JugaInputs::default(), &none).unwrap(), 0.82);
        let wet = JugaCoeffs { wet: Some(WetCoeffs { a2: 0.0, d2: 0.6 }), ..none };
        let inputs = JugaInputs { water_mm: 3.0, ..Default::default() };
        assert_eq!(juga_cf(SurfaceState::Wet, &inputs, &wet).unwrap(), 0.6);
        let si = JugaCoeffs { snow_ice: Some(SnowIceCoeffs { a1: -0.02, b1: -0.03, c1: 0.001, d1: 0.5 }), ..none };
        let inputs = JugaInputs { snow_mm: 5.0, ice_mm: 2.0, water_mm: 0.0, tr: -4.0 };
        let cf = juga_cf(SurfaceState::SnowyIcy, &inputs, &si).unwrap();
        assert!((cf - 0.336).abs() < 1e-12);
    }

    #[test]
    fn missing_coefficients_and_clamping() {
        let none = JugaCoeffs::default();
        assert!(matches!(juga_cf(SurfaceState::Wet, &JugaInputs::default(), &none), Err(Error::Config(_))));
        let steep = JugaCoeffs { wet: Some(WetCoeffs { a2: -1.0, d2: 0.5 }), ..none };
        let deep = JugaInputs { water_mm: 10.0, ..Default::default() };
        assert_eq!(juga_cf(SurfaceState::Wet, &deep, &steep).unwrap(), 0.0);
        let neg = JugaInputs { snow_mm: -1.0, ..Default::default() };
        assert!(juga_cf(SurfaceState::Dry, &neg, &none).is_err());
    }
}
