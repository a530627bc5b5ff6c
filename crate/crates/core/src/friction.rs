//! Braking coefficient from landing telemetry.
//!
//! Per second of the landing roll the longitudinal equation of motion
//!
//! ```text
//! m·dv/dt = D_thrust − D_aero − m·g·sin ε − D_brakes
//! ```
//!
//! is solved for the wheel force `D_brakes`, which divided by the normal
//! load `m·g·cos ε − L` gives the braking coefficient μ_B. Reverse thrust
//! retards the aircraft, so `D_thrust = −setting·max_reverse_thrust`.
//! Aerodynamic drag and lift use `½ρv²` with fixed coefficient-area
//! products; these stand in for an aircraft-specific performance model.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::io::{fmt_f64, parse_f64};
use crate::time::{format_timestamp, parse_timestamp, Timestamp};

pub const GRAVITY: f64 = 9.80665;
pub const SAMPLES_PER_LANDING: usize = 60;
/// Coefficients at or below this are slippery when friction limited.
pub const SLIPPERY_MU: f64 = 0.15;
/// Consecutive seconds of unmet brake demand that make a landing friction limited.
pub const LIMITED_RUN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    /// Ground speed, m/s.
    pub speed: f64,
    /// Longitudinal acceleration, m/s² (negative when decelerating).
    pub accel: f64,
    /// Requested brake pressure, kPa.
    pub brake_req: f64,
    /// Brake pressure implied by the measured deceleration, kPa.
    pub brake_est: f64,
    /// Reverser setting in [0, 1].
    pub rev_thrust: f64,
    /// Flap position, degrees.
    pub flap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandingRecord {
    pub landing_id: String,
    pub runway: String,
    pub touchdown_time: Timestamp,
    pub samples: Vec<TelemetrySample>,
    pub mass_kg: f64,
    /// Ambient air density, kg/m³.
    pub rho: f64,
}

impl LandingRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::invalid(format!("landing {}: {why}", self.landing_id)));
        if self.samples.len() != SAMPLES_PER_LANDING {
            return bad(format!("{} samples, expected {SAMPLES_PER_LANDING}", self.samples.len()));
        }
        if !(self.mass_kg > 0.0 && self.mass_kg.is_finite()) {
            return bad(format!("mass {} kg", self.mass_kg));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad(format!("air density {}", self.rho));
        }
        for (t, s) in self.samples.iter().enumerate() {
            let vals = [s.speed, s.accel, s.brake_req, s.brake_est, s.rev_thrust, s.flap];
            if vals.iter().any(|v| !v.is_finite()) {
                return bad(format!("non-finite telemetry at second {t}"));
            }
            if s.speed < 0.0 {
                return bad(format!("negative speed at second {t}"));
            }
            if !(0.0..=1.0).contains(&s.rev_thrust) {
                return bad(format!("reverser setting {} at second {t}", s.rev_thrust));
            }
        }
        Ok(())
    }

    /// Seconds where speed rises, a data-quality hint only.
    pub fn speed_increases(&self) -> usize {
        self.samples.windows(2).filter(|w| w[1].speed > w[0].speed).count()
    }
}

/// Parametric aircraft model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroParams {
    /// Drag coefficient times reference area, m².
    pub cd_a: f64,
    /// Lift coefficient times reference area, m².
    pub cl_a: f64,
    /// Reverse thrust at full setting, N.
    pub max_reverse_thrust: f64,
    /// Runway slope, radians.
    pub slope: f64,
}

impl Default for AeroParams {
    fn default() -> Self {
        Self { cd_a: 7.5, cl_a: 40.0, max_reverse_thrust: 50_000.0, slope: 0.0 }
    }
}

impl AeroParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.cd_a, self.cl_a, self.max_reverse_thrust, self.slope];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!("aero params must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }

    pub fn thrust(&self, setting: f64) -> f64 {
        -setting * self.max_reverse_thrust
    }

    pub fn drag(&self, rho: f64, v: f64) -> f64 {
        0.5 * rho * self.cd_a * v * v
    }

    pub fn lift(&self, rho: f64, v: f64) -> f64 {
        0.5 * rho * self.cl_a * v * v
    }

    /// Normal load on the wheels.
    pub fn normal_load(&self, mass: f64, rho: f64, v: f64) -> f64 {
        mass * GRAVITY * self.slope.cos() - self.lift(rho, v)
    }

    /// Wheel braking force implied by the measured acceleration.
    pub fn brake_force(&self, mass: f64, rho: f64, s: &TelemetrySample) -> f64 {
        self.thrust(s.rev_thrust) - self.drag(rho, s.speed) - mass * GRAVITY * self.slope.sin() - mass * s.accel
    }
}

/// How per-second coefficients are reduced to one value per landing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionResult {
    /// μ_B per second; NaN outside the braking interval.
    pub mu_b_series: Vec<f64>,
    pub mu_b: f64,
    pub friction_limited: bool,
    pub slippery: bool,
}

/// Estimates μ_B over the seconds with positive requested brake pressure.
pub fn estimate_mu_b(landing: &LandingRecord, aero: &AeroParams, agg: Aggregation) -> Result<FrictionResult> {
    landing.validate()?;
    aero.validate()?;
    let mut series = vec![f64::NAN; landing.samples.len()];
    let mut braking = Vec::new();
    for (t, s) in landing.samples.iter().enumerate() {
        if s.brake_req <= 0.0 {
            continue;
        }
        let normal = aero.normal_load(landing.mass_kg, landing.rho, s.speed);
        if normal <= 0.0 {
            return Err(Error::AerodynamicSingularity { second: t });
        }
        let mu = (aero.brake_force(landing.mass_kg, landing.rho, s) / normal).max(0.0);
        series[t] = mu;
        braking.push(mu);
    }
    if braking.is_empty() {
        return Err(Error::invalid(format!("landing {}: no braking seconds", landing.landing_id)));
    }
    let mu_b = match agg {
        Aggregation::Mean => braking.iter().sum::<f64>() / braking.len() as f64,
        Aggregation::Min => braking.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let friction_limited = is_friction_limited(landing);
    let mut result = FrictionResult { mu_b_series: series, mu_b, friction_limited, slippery: false };
    result.slippery = label_slippery(&result);
    Ok(result)
}

/// Requested brake pressure exceeds the estimated pressure for at least
/// three consecutive seconds.
pub fn is_friction_limited(landing: &LandingRecord) -> bool {
    let mut run = 0;
    for s in &landing.samples {
        run = if s.brake_req > s.brake_est { run + 1 } else { 0 };
        if run >= LIMITED_RUN {
            return true;
        }
    }
    false
}

pub fn label_slippery(result: &FrictionResult) -> bool {
    result.friction_limited && result.mu_b <= SLIPPERY_MU
}

/// Braking action category, 0 (NIL) to 5 (Good).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct BrakingAction(u8);

impl BrakingAction {
    pub fn new(level: u8) -> Result<Self> {
        if level <= 5 {
            Ok(Self(level))
        } else {
            Err(Error::invalid(format!("braking action {level} outside 0..=5")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        ["NIL", "Poor", "Poor-medium", "Medium", "Medium-good", "Good"][self.0 as usize]
    }
}

impl From<BrakingAction> for u8 {
    fn from(b: BrakingAction) -> u8 {
        b.0
    }
}

impl TryFrom<u8> for BrakingAction {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl fmt::Display for BrakingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.0, self.label())
    }
}

/// Upper bounds (inclusive) of categories 0 to 4.
pub const BA_UPPER_BOUNDS: [f64; 5] = [0.05, 0.075, 0.1, 0.15, 0.2];

pub fn to_braking_action(mu: f64) -> Result<BrakingAction> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::invalid(format!("friction coefficient {mu} is negative or undefined")));
    }
    let level = BA_UPPER_BOUNDS.iter().position(|&ub| mu <= ub).unwrap_or(5);
    Ok(BrakingAction(level as u8))
}

/// As [`to_braking_action`], mapping negative predictions to NIL.
pub fn braking_action_of_prediction(mu: f64) -> BrakingAction {
    to_braking_action(mu.max(0.0)).unwrap_or(BrakingAction(0))
}

pub const LANDING_HEADER: [&str; 12] = [
    "landing_id",
    "second",
    "speed",
    "accel",
    "brake_req",
    "brake_est",
    "rev_thrust",
    "flap",
    "mass",
    "rho",
    "runway",
    "touchdown_time",
];

/// Reads long-format telemetry, one row per landing second. Landings are
/// returned in order of first appearance.
pub fn read_landings_csv<R: Read>(reader: R) -> Result<Vec<LandingRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.iter().ne(LANDING_HEADER.iter().copied()) {
        return Err(Error::invalid(format!("landing CSV header must be `{}`", LANDING_HEADER.join(","))));
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, (LandingRecord, Vec<Option<TelemetrySample>>)> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = |e: Error| Error::invalid(format!("landing row {}: {e}", line + 2));
        let f = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            let x = parse_f64(f(i)).map_err(ctx)?;
            if x.is_nan() {
                return Err(ctx(Error::invalid(format!("missing {}", LANDING_HEADER[i]))));
            }
            Ok(x)
        };
        let id = f(0).to_string();
        let second: usize = f(1).parse().map_err(|_| ctx(Error::invalid(format!("bad second `{}`", f(1)))))?;
        if second >= SAMPLES_PER_LANDING {
            return Err(ctx(Error::invalid(format!("second {second} out of range"))));
        }
        let sample = TelemetrySample {
            speed: num(2)?,
            accel: num(3)?,
            brake_req: num(4)?,
            brake_est: num(5)?,
            rev_thrust: num(6)?,
            flap: num(7)?,
        };
        let (mass, rho) = (num(8)?, num(9)?);
        let touchdown = parse_timestamp(f(11)).map_err(ctx)?;
        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            let rec = LandingRecord {
                landing_id: id.clone(),
                runway: f(10).to_string(),
                touchdown_time: touchdown,
                samples: Vec::new(),
                mass_kg: mass,
                rho,
            };
            (rec, vec![None; SAMPLES_PER_LANDING])
        });
        if entry.0.runway != f(10) || entry.0.touchdown_time != touchdown || entry.0.mass_kg != mass || entry.0.rho != rho
        {
            return Err(ctx(Error::invalid(format!("landing {id}: per-landing fields change between rows"))));
        }
        if entry.1[second].replace(sample).is_some() {
            return Err(ctx(Error::invalid(format!("landing {id}: duplicate second {second}"))));
        }
    }
    order
        .into_iter()
        .map(|id| {
            let (mut rec, slots) = by_id.remove(&id).expect("id recorded on insert");
            rec.samples = slots
                .into_iter()
                .enumerate()
                .map(|(t, s)| s.ok_or_else(|| Error::invalid(format!("landing {id}: second {t} missing"))))
                .collect::<Result<_>>()?;
            rec.validate()?;
            Ok(rec)
        })
        .collect()
}

pub fn write_landings_csv<'a, W: Write>(writer: W, landings: impl IntoIterator<Item = &'a LandingRecord>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LANDING_HEADER)?;
    for l in landings {
        let touchdown = format_timestamp(&l.touchdown_time);
        for (t, s) in l.samples.iter().enumerate() {
            w.write_record([
                l.landing_id.clone(),
                t.to_string(),
                fmt_f64(s.speed),
                fmt_f64(s.accel),
                fmt_f64(s.brake_req),
                fmt_f64(s.brake_est),
                fmt_f64(s.rev_thrust),
                fmt_f64(s.flap),
                fmt_f64(l.mass_kg),
                fmt_f64(l.rho),
                l.runway.clone(),
                touchdown.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
