//! Seeded synthetic airport: minute weather for each runway, runway
//! condition reports, landing telemetry and a planted friction law.
//!
//! Available friction follows
//!
//! ```text
//! μ = clamp(base − α·snow − β·depth − γ·1[tr < 0]·hu/100 + ε, 0.02, 0.6)
//! ```
//!
//! where `snow` is the 24 h dry-snow accumulation feature divided by 60
//! (millimetres of water), `depth` the loose contamination depth in mm and
//! `tr`, `hu` the observed runway temperature and humidity. `base` is
//! calibrated so that the share of slippery landings hits a target.
//!
//! Pilots ask for a constant braking coefficient, sometimes with a short
//! extra spike. A second is limited when demand exceeds the available
//! friction; the wheels then deliver the available value. Telemetry is
//! produced by integrating the equation of motion forward with the
//! delivered coefficient, so the friction estimator recovers it exactly
//! when noise is off.
//!
//! Random streams: 1 drives the shared weather, `10 + r` the observations
//! and runway surface of runway `r`, 2 the landing schedule and pilots, 3
//! the report inspectors and 4 the telemetry noise.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::stream_rng;
use crate::features::io::{fmt_f64, write_snowtam_csv, write_weather_csv};
use crate::features::{accumulate_precip, Horizon, PrecipType, SnowtamHistory, SnowtamReport, Var, WeatherSample, WeatherSeries};
use crate::friction::{to_braking_action, write_landings_csv, AeroParams, LandingRecord, TelemetrySample, GRAVITY, LIMITED_RUN, SAMPLES_PER_LANDING, SLIPPERY_MU};
use crate::time::{format_timestamp, parse_timestamp, Timestamp};

/// Brake pressure (kPa) per unit of braking coefficient.
pub const PRESSURE_PER_MU: f64 = 10_000.0;
pub const MU_MIN: f64 = 0.02;
pub const MU_MAX: f64 = 0.6;

const DAY: i64 = 1440;
const BRAKE_START: usize = 2;
const BRAKE_END_SPEED: f64 = 10.0;
const DEMAND_LEVELS: [(f64, f64); 5] = [(0.08, 0.15), (0.12, 0.25), (0.16, 0.30), (0.22, 0.20), (0.30, 0.10)];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedLaw {
    pub base: f64,
    /// Per mm water equivalent of dry snow in the last 24 h.
    pub alpha: f64,
    /// Per mm of loose contamination.
    pub beta: f64,
    /// Weight of humidity on a sub-zero runway.
    pub gamma: f64,
    pub noise_sd: f64,
}

impl Default for PlantedLaw {
    fn default() -> Self {
        Self { base: 0.5, alpha: 0.04, beta: 0.012, gamma: 0.12, noise_sd: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_days: u32,
    pub landings_per_day: u32,
    /// Midnight of the warm-up day; landings start one day later.
    pub start: String,
    pub runways: Vec<String>,
    pub positive_rate_target: f64,
    /// Tune `law.base` to reach `positive_rate_target`.
    pub calibrate: bool,
    /// Scale of Gaussian sensor noise on the weather channels.
    pub weather_noise: f64,
    pub pt_flip_prob: f64,
    /// Chance that a weather minute is lost.
    pub dropout_prob: f64,
    /// Standard deviation of the noise on speed (m/s) and acceleration (m/s²).
    pub telemetry_noise: f64,
    pub law: PlantedLaw,
    pub aero: AeroParams,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_days: 200,
            landings_per_day: 100,
            start: "2018-11-01T00:00:00Z".into(),
            runways: vec!["01L".into(), "01R".into()],
            positive_rate_target: 0.0257,
            calibrate: true,
            weather_noise: 0.05,
            pt_flip_prob: 0.002,
            dropout_prob: 0.0002,
            telemetry_noise: 0.0,
            law: PlantedLaw::default(),
            aero: AeroParams::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_days < 1 || self.landings_per_day < 1 {
            return bad("n_days and landings_per_day must be at least 1".into());
        }
        for (name, r) in [("positive_rate_target", self.positive_rate_target), ("pt_flip_prob", self.pt_flip_prob), ("dropout_prob", self.dropout_prob)] {
            let ok = if name == "positive_rate_target" { r > 0.0 && r < 1.0 } else { (0.0..1.0).contains(&r) };
            if !ok {
                return bad(format!("{name} = {r} outside its range"));
            }
        }
        if self.runways.is_empty() {
            return bad("at least one runway is required".into());
        }
        let mut names = self.runways.clone();
        names.sort();
        names.dedup();
        if names.len() != self.runways.len() || names.iter().any(|n| n.trim().is_empty()) {
            return bad("runway names must be distinct and non-empty".into());
        }
        let law = [self.law.base, self.law.alpha, self.law.beta, self.law.gamma, self.law.noise_sd];
        let noise = [self.weather_noise, self.telemetry_noise];
        if law.iter().chain(&noise).any(|v| !v.is_finite()) || law[1..].iter().chain(&noise).any(|&v| v < 0.0) {
            return bad("law coefficients and noise levels must be finite and non-negative".into());
        }
        self.aero.validate()?;
        self.start_time()?;
        Ok(())
    }

    pub fn start_time(&self) -> Result<Timestamp> {
        parse_timestamp(&self.start).map_err(|e| Error::Config(format!("start: {e}")))
    }
}

/// Planted truth for one landing. Never used as a model input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub landing_id: String,
    pub runway: String,
    pub touchdown_time: Timestamp,
    /// Friction the runway could deliver.
    pub mu_available: f64,
    /// Mean coefficient delivered over the braking seconds.
    pub mu_b: f64,
    pub friction_limited: bool,
    pub demand: f64,
    pub snow_term: f64,
    pub depth_term: f64,
    pub cold_humid_term: f64,
    pub noise_term: f64,
}

/// Training targets derived from the planted truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub landing_id: String,
    pub slippery: bool,
    /// Regression target, present only for friction-limited landings.
    pub mu: Option<f64>,
}

pub fn label_oracle(truth: &[GroundTruth]) -> Vec<LabelRow> {
    truth
        .iter()
        .map(|t| LabelRow {
            landing_id: t.landing_id.clone(),
            slippery: t.friction_limited && t.mu_b <= SLIPPERY_MU,
            mu: t.friction_limited.then_some(t.mu_b),
        })
        .collect()
}

pub struct SyntheticData {
    pub weather: BTreeMap<String, WeatherSeries>,
    pub snowtams: BTreeMap<String, SnowtamHistory>,
    pub landings: Vec<LandingRecord>,
    pub truth: Vec<GroundTruth>,
    /// Law intercept actually used.
    pub law_base: f64,
    /// Share of landings that are slippery under the planted truth.
    pub positive_rate: f64,
}

pub use crate::dataset::{LANDINGS_FILE, SNOWTAM_FILE, WEATHER_FILE};
pub const TRUTH_FILE: &str = "ground_truth.csv";

impl SyntheticData {
    /// Writes the four CSV files into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        write_weather_csv(open(WEATHER_FILE)?, self.weather.values())?;
        write_snowtam_csv(open(SNOWTAM_FILE)?, self.snowtams.values().flat_map(|h| h.reports()))?;
        write_landings_csv(open(LANDINGS_FILE)?, &self.landings)?;
        write_truth_csv(open(TRUTH_FILE)?, &self.truth)
    }
}

pub const TRUTH_HEADER: [&str; 11] = [
    "landing_id",
    "runway",
    "touchdown_time",
    "mu_available",
    "mu_b",
    "friction_limited",
    "demand",
    "snow_term",
    "depth_term",
    "cold_humid_term",
    "noise_term",
];

pub fn write_truth_csv<W: Write>(writer: W, truth: &[GroundTruth]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTH_HEADER)?;
    for t in truth {
        w.write_record([
            t.landing_id.clone(),
            t.runway.clone(),
            format_timestamp(&t.touchdown_time),
            fmt_f64(t.mu_available),
            fmt_f64(t.mu_b),
            t.friction_limited.to_string(),
            fmt_f64(t.demand),
            fmt_f64(t.snow_term),
            fmt_f64(t.depth_term),
            fmt_f64(t.cold_humid_term),
            fmt_f64(t.noise_term),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// First-order autoregressive process with a given time constant (minutes)
/// and stationary standard deviation.
struct Ar1 {
    phi: f64,
    innovation: f64,
    x: f64,
}

impl Ar1 {
    fn new(tau: f64, sd: f64, rng: &mut ChaCha8Rng) -> Self {
        let phi = (-1.0 / tau).exp();
        Self { phi, innovation: sd * (1.0 - phi * phi).sqrt(), x: sd * normal(rng) }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.x = self.phi * self.x + self.innovation * normal(rng);
        self.x
    }
}

/// Relative humidity (%) from air and dew-point temperature.
pub fn magnus_humidity(ta: f64, dp: f64) -> f64 {
    let e = |t: f64| (17.62 * t / (243.12 + t)).exp();
    (100.0 * e(dp) / e(ta)).min(100.0)
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

#[derive(Clone, Copy)]
struct TrueMinute {
    ta: f64,
    dp: f64,
    ap: f64,
    u: f64,
    v: f64,
    /// Intensity in mm/h, already on the 0.1 grid of the gauge.
    pi: f64,
    pt: PrecipType,
}

fn precip_type(ta: f64, pi: f64, freezing: bool, wind: f64) -> PrecipType {
    if pi <= 0.0 {
        return if wind > 9.0 && ta < -4.0 { PrecipType::DriftingSnow } else { PrecipType::None };
    }
    if freezing && (-8.0..0.0).contains(&ta) {
        PrecipType::FreezingRain
    } else if ta <= -6.0 && pi < 0.3 {
        PrecipType::SnowGrains
    } else if ta <= -1.5 {
        PrecipType::DrySnow
    } else if ta <= 0.5 {
        PrecipType::WetSnow
    } else if ta <= 1.5 {
        PrecipType::Sleet
    } else if ta > 4.0 && pi > 4.0 {
        PrecipType::Hail
    } else {
        PrecipType::Rain
    }
}

fn shared_weather(n: usize, n_days: f64, rng: &mut ChaCha8Rng) -> Vec<TrueMinute> {
    let mut synoptic = Ar1::new(3.0 * DAY as f64, 5.0, rng);
    let mut fast = Ar1::new(30.0, 0.3, rng);
    let mut depression = Ar1::new(12.0 * 60.0, 0.6, rng);
    let mut pressure = Ar1::new(2.0 * DAY as f64, 10.0, rng);
    let mut wind_u = Ar1::new(360.0, 4.0, rng);
    let mut wind_v = Ar1::new(360.0, 4.0, rng);
    let mut intensity = Ar1::new(45.0, 0.8, rng);
    let (mut event, mut freezing) = (false, false);
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let day = m as f64 / DAY as f64;
        let hour = (m as i64 % DAY) as f64 / 60.0;
        let climate = -1.0 - 4.0 * (std::f64::consts::PI * day / n_days).sin();
        let diurnal = 2.5 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();
        let ta = climate + synoptic.step(rng) + diurnal + fast.step(rng);

        let switch: f64 = rng.gen();
        if event {
            event = switch >= 1.0 / (7.0 * 60.0);
        } else if switch < 1.0 / (30.0 * 60.0) {
            event = true;
            freezing = rng.gen::<f64>() < 0.08;
        }
        let level = intensity.step(rng);
        let pi = if event { round_to(0.6 * level.exp(), 0.1) } else { 0.0 };

        let mut dd = 2.5 * depression.step(rng).exp();
        if pi > 0.0 {
            dd *= 0.2;
        }
        let (u, v) = (2.0 + wind_u.step(rng), 1.0 + wind_v.step(rng));
        let pt = precip_type(ta, pi, freezing, u.hypot(v));
        out.push(TrueMinute { ta, dp: ta - dd, ap: 1008.0 + pressure.step(rng), u, v, pi, pt });
    }
    out
}

/// Heading in radians from the runway designator's leading digits.
fn heading(runway: &str) -> f64 {
    let digits: String = runway.chars().take_while(char::is_ascii_digit).collect();
    digits.parse::<f64>().map_or(0.0, |d| (10.0 * d).to_radians())
}

/// Contamination on one runway. `solids` are listed top first.
#[derive(Clone, Debug, Default)]
struct Surface {
    loose: Option<u8>,
    depth: f64,
    solids: Vec<u8>,
    sand_until: i64,
    chem_until: i64,
    dry_minutes: i64,
}

impl Surface {
    fn layers(&self) -> Vec<u8> {
        let out: Vec<u8> = self.loose.into_iter().chain(self.solids.iter().copied()).collect();
        if out.is_empty() {
            vec![0]
        } else {
            out
        }
    }

    fn loose_depth(&self) -> f64 {
        match self.loose {
            Some(2 | 4 | 5 | 6) => self.depth,
            _ => 0.0,
        }
    }

    fn add_solid_top(&mut self, code: u8) {
        self.solids.retain(|&c| c != 3);
        if !self.solids.contains(&code) && self.solids.len() < 2 {
            self.solids.insert(0, code);
        }
    }

    fn add_snow(&mut self, code: u8, amount: f64, tr: f64, m: i64) {
        let snowy = matches!(self.loose, Some(4..=6));
        if tr > 1.0 && !snowy {
            self.loose = Some(2);
            self.depth = (self.depth + 0.1 * amount).min(3.0);
            self.dry_minutes = 0;
            return;
        }
        self.solids.retain(|&c| c != 3);
        self.loose = Some(match (self.loose, code) {
            (Some(6), _) => 6,
            (Some(5 | 2 | 1), 4) => 5,
            _ => code,
        });
        if !snowy {
            self.depth = 0.0;
        }
        self.depth += amount;
        if self.depth > 1.0 {
            self.sand_until = self.sand_until.min(m);
        }
    }

    fn step(&mut self, m: i64, w: &TrueMinute, tr: f64, rng: &mut ChaCha8Rng) {
        let water = w.pi / 60.0;
        match w.pt {
            PrecipType::DrySnow | PrecipType::SnowGrains => self.add_snow(4, 10.0 * water, tr, m),
            PrecipType::WetSnow => self.add_snow(5, 6.0 * water, tr, m),
            PrecipType::Sleet => self.add_snow(6, 3.0 * water, tr, m),
            PrecipType::DriftingSnow => self.add_snow(4, 0.02, tr, m),
            PrecipType::FreezingRain => self.add_solid_top(7),
            PrecipType::Rain | PrecipType::Hail => {
                if matches!(self.loose, Some(4..=6)) {
                    self.loose = Some(6);
                    self.depth += water;
                } else if tr <= 0.0 {
                    self.loose = None;
                    self.add_solid_top(7);
                } else {
                    self.loose = Some(2);
                    self.depth = (self.depth + water).min(3.0);
                    self.dry_minutes = 0;
                }
            }
            PrecipType::None => {}
        }
        let precipitating = w.pi > 0.0;
        let chemicals = m < self.chem_until;

        match self.loose {
            Some(4..=6) => {
                if self.loose == Some(4) && tr > 0.0 {
                    self.loose = Some(5);
                }
                if tr > 0.5 || (chemicals && tr > -8.0) {
                    self.depth -= 0.003 * tr.max(0.7);
                }
                if self.depth < 0.5 {
                    self.loose = Some(2);
                    self.depth = 0.5;
                    self.dry_minutes = 0;
                }
            }
            Some(2) if !precipitating => {
                self.dry_minutes += 1;
                if tr < -0.5 {
                    self.loose = None;
                    self.add_solid_top(7);
                } else if self.dry_minutes >= 90 {
                    self.loose = Some(1);
                    self.depth = 0.0;
                }
            }
            Some(1) if !precipitating => {
                self.dry_minutes += 1;
                if tr < -1.0 && rng.gen::<f64>() < 1.0 / 60.0 {
                    self.loose = None;
                    self.add_solid_top(7);
                } else if self.dry_minutes >= 240 {
                    self.loose = None;
                }
            }
            _ => {}
        }

        if self.loose.is_none() {
            if self.solids.is_empty() && tr < 0.0 && tr < w.dp - 0.5 {
                self.solids.push(3);
            } else if self.solids == [3] && (tr > 0.0 || tr > w.dp + 1.0) {
                self.solids.clear();
            }
        }
        if matches!(self.solids.first(), Some(7 | 8)) && self.loose_depth() < 1.0 {
            let p = if chemicals && tr > -8.0 {
                1.0 / 120.0
            } else if tr > 1.0 {
                1.0 / 300.0
            } else {
                0.0
            };
            if rng.gen::<f64>() < p {
                self.solids.remove(0);
            }
        }
        if matches!(self.loose, Some(4 | 5))
            && self.depth >= 4.0
            && tr < -1.0
            && self.solids.len() < 2
            && !self.solids.contains(&8)
            && rng.gen::<f64>() < 1.0 / 900.0
        {
            self.solids.push(8);
            self.depth *= 0.3;
        }

        if m % 30 == 0 {
            if matches!(self.loose, Some(4..=6)) && self.depth >= 3.0 && rng.gen::<f64>() < 0.7 {
                self.depth = 0.3 + 0.7 * rng.gen::<f64>();
                if w.ta < -2.0 && self.solids.len() < 2 && !self.solids.contains(&8) && rng.gen::<f64>() < 0.25 {
                    self.solids.push(8);
                }
            }
            if self.solids.iter().any(|c| matches!(c, 3 | 7 | 8)) && tr > -8.0 && m >= self.chem_until && rng.gen::<f64>() < 0.5 {
                self.chem_until = m + 360;
            }
            if self.solids.iter().any(|c| matches!(c, 7 | 8)) && m >= self.sand_until && rng.gen::<f64>() < 0.6 {
                self.sand_until = m + 720;
            }
        }
    }

    fn coverage(&self) -> f64 {
        if self.loose.is_none() && self.solids.is_empty() {
            0.0
        } else if !self.solids.is_empty() || self.loose_depth() >= 3.0 {
            100.0
        } else if self.loose_depth() >= 1.0 {
            50.0
        } else {
            25.0
        }
    }
}

/// Report body waiting for the inspector's braking action, which depends
/// on the calibrated law.
struct DraftReport {
    report: SnowtamReport,
    inputs: LawInputs,
}

#[derive(Clone, Copy, Debug)]
struct LawInputs {
    snow_mm: f64,
    depth: f64,
    tr: f64,
    hu: f64,
}

impl PlantedLaw {
    fn terms(&self, x: &LawInputs) -> [f64; 3] {
        let cold_humid = if x.tr < 0.0 { x.hu / 100.0 } else { 0.0 };
        [self.alpha * x.snow_mm, self.beta * x.depth, self.gamma * cold_humid]
    }

    fn mu(&self, base: f64, x: &LawInputs, eps: f64) -> f64 {
        let [a, b, c] = self.terms(x);
        (base - a - b - c + eps).clamp(MU_MIN, MU_MAX)
    }
}

struct RunwayData {
    series: WeatherSeries,
    drafts: Vec<DraftReport>,
    /// True loose depth per minute.
    depth: Vec<f64>,
}

fn simulate_runway(
    config: &GeneratorConfig,
    r: usize,
    start: Timestamp,
    shared: &[TrueMinute],
) -> Result<RunwayData> {
    let name = &config.runways[r];
    let mut rng = stream_rng(config.seed, 10 + r as u64);
    let theta = heading(name);
    let mut offset = Ar1::new(120.0, 0.8, &mut rng);
    let mut surface = Surface::default();
    let mut samples = Vec::with_capacity(shared.len());
    let mut depth = Vec::with_capacity(shared.len());
    let mut dry_prefix = vec![0.0; shared.len() + 1];
    let mut drafts: Vec<DraftReport> = Vec::new();
    let mut last_key: Option<(Vec<u8>, i64, bool, bool)> = None;
    let mut last_issue = 0i64;
    let noise = config.weather_noise;

    for (m, w) in shared.iter().enumerate() {
        let mi = m as i64;
        let hour = (mi % DAY) as f64 / 60.0;
        let solar = 3.0 * (2.0 * std::f64::consts::PI * (hour - 6.0) / 24.0).sin().max(0.0);
        let tr = w.ta - 0.8 + solar + offset.step(&mut rng) + 0.3 * r as f64;
        surface.step(mi, w, tr, &mut rng);
        depth.push(surface.loose_depth());

        let mut jitter = [0.0; 8];
        for j in &mut jitter {
            *j = noise * normal(&mut rng);
        }
        let flip: f64 = rng.gen();
        let flipped = PrecipType::ALL[rng.gen_range(0..PrecipType::ALL.len())];
        let lost = mi > 0 && rng.gen::<f64>() < config.dropout_prob;

        let ta = round_to(w.ta + jitter[0], 0.1);
        let dp = round_to(w.dp + jitter[1], 0.1).min(ta);
        let hu = magnus_humidity(ta, dp).round();
        let tr_obs = round_to(tr + jitter[2], 0.1);
        let ap = round_to(w.ap + jitter[3], 0.1);
        let (u, v) = (w.u + jitter[4], w.v + jitter[5]);
        let along = round_to(u * theta.sin() + v * theta.cos(), 0.1);
        let across = round_to(u * theta.cos() - v * theta.sin(), 0.1);
        let rh_factor = 1.0 - 0.85 * ((hu - 90.0) / 10.0).clamp(0.0, 1.0);
        let vi = round_to((20_000.0 * (-0.9 * w.pi).exp() * rh_factor + 100.0 * jitter[6]).clamp(50.0, 20_000.0), 10.0);
        let pt = if flip < config.pt_flip_prob { flipped } else { w.pt };
        dry_prefix[m + 1] = dry_prefix[m] + if !lost && pt == PrecipType::DrySnow { w.pi } else { 0.0 };

        if !lost {
            let mut s = WeatherSample::missing(start + chrono::Duration::minutes(mi));
            s.pt = Some(pt);
            for (var, x) in [
                (Var::Pi, w.pi),
                (Var::Ta, ta),
                (Var::Tr, tr_obs),
                (Var::Hu, hu),
                (Var::Vi, vi),
                (Var::Ap, ap),
                (Var::Dp, dp),
                (Var::AlongWind, along),
                (Var::AcrossWind, across),
            ] {
                s.set(var, x);
            }
            samples.push(s);
        }

        if mi % 30 == 0 {
            let layers = surface.layers();
            let depth_mm = surface.loose_depth().round();
            let key = (layers.clone(), depth_mm as i64, mi < surface.sand_until, mi < surface.chem_until);
            if last_key.as_ref() != Some(&key) || mi - last_issue >= DAY {
                let from = (m + 1).saturating_sub(DAY as usize + 1);
                let inputs = LawInputs { snow_mm: (dry_prefix[m + 1] - dry_prefix[from]) / 60.0, depth: surface.loose_depth(), tr, hu };
                drafts.push(DraftReport {
                    report: SnowtamReport {
                        issued_at: start + chrono::Duration::minutes(mi),
                        runway: name.clone(),
                        layers,
                        depth_mm,
                        coverage_pct: surface.coverage(),
                        sanded: key.2,
                        chemicals: key.3,
                        inspector_ba: None,
                    },
                    inputs,
                });
                last_key = Some(key);
                last_issue = mi;
            }
        }
    }
    Ok(RunwayData { series: WeatherSeries::from_samples(name.clone(), samples)?, drafts, depth })
}

/// Per-landing random draws that do not depend on the law.
#[derive(Clone, Debug)]
struct Pilot {
    mass: f64,
    v0: f64,
    demand: f64,
    /// Start second, length and extra demand of a braking spike.
    spike: Option<(usize, usize, f64)>,
    eps: f64,
}

fn draw_pilot(rng: &mut ChaCha8Rng, noise_sd: f64) -> Pilot {
    let mass = rng.gen_range(55_000.0..78_000.0);
    let v0 = rng.gen_range(62.0..74.0);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut level = DEMAND_LEVELS[DEMAND_LEVELS.len() - 1].0;
    for (l, w) in DEMAND_LEVELS {
        acc += w;
        if u < acc {
            level = l;
            break;
        }
    }
    let demand = level + rng.gen_range(-0.015..0.015);
    let spike = (rng.gen::<f64>() < 0.15).then(|| (rng.gen_range(3..13), rng.gen_range(1..5), rng.gen_range(0.05..0.2)));
    let eps = noise_sd * normal(rng);
    Pilot { mass, v0, demand, spike, eps }
}

/// Outcome of one landing roll for a given available friction.
struct Roll {
    samples: Vec<TelemetrySample>,
    mu_b: f64,
    limited: bool,
}

fn roll(p: &Pilot, mu_available: f64, rho: f64, aero: &AeroParams) -> Roll {
    let mut samples = Vec::with_capacity(SAMPLES_PER_LANDING);
    let mut v = p.v0;
    let mut braking = true;
    let (mut sum, mut n, mut run, mut limited) = (0.0, 0usize, 0usize, false);
    for t in 0..SAMPLES_PER_LANDING {
        let rev = if (1..=20).contains(&t) { 0.8 } else { 0.0 };
        if t >= BRAKE_START && v < BRAKE_END_SPEED {
            braking = false;
        }
        let active = braking && t >= BRAKE_START;
        let demand = if active {
            let extra = p.spike.filter(|&(s, len, _)| (s..s + len).contains(&t)).map_or(0.0, |s| s.2);
            p.demand + extra
        } else {
            0.0
        };
        let used = demand.min(mu_available);
        if active {
            sum += used;
            n += 1;
            run = if demand > mu_available { run + 1 } else { 0 };
            limited |= run >= LIMITED_RUN;
        }
        let normal_load = aero.normal_load(p.mass, rho, v);
        let accel = (aero.thrust(rev) - aero.drag(rho, v) - p.mass * GRAVITY * aero.slope.sin() - used * normal_load) / p.mass;
        samples.push(TelemetrySample {
            speed: v,
            accel,
            brake_req: PRESSURE_PER_MU * demand,
            brake_est: PRESSURE_PER_MU * used,
            rev_thrust: rev,
            flap: 30.0,
        });
        v = (v + accel).max(0.0);
    }
    Roll { samples, mu_b: sum / n.max(1) as f64, limited }
}

struct Scheduled {
    runway: usize,
    minute: i64,
    index: i64,
    pilot: Pilot,
    inputs: LawInputs,
    rho: f64,
}

fn slippery_rate(sched: &[Scheduled], law: &PlantedLaw, base: f64, aero: &AeroParams) -> f64 {
    let pos = sched
        .iter()
        .filter(|s| {
            let r = roll(&s.pilot, law.mu(base, &s.inputs, s.pilot.eps), s.rho, aero);
            r.limited && r.mu_b <= SLIPPERY_MU
        })
        .count();
    pos as f64 / sched.len() as f64
}

/// Bisects the law intercept; the slippery share falls as it grows.
fn calibrate(sched: &[Scheduled], law: &PlantedLaw, target: f64, aero: &AeroParams) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (-0.5, 1.5);
    let (r_lo, r_hi) = (slippery_rate(sched, law, lo, aero), slippery_rate(sched, law, hi, aero));
    let mut best = if (r_lo - target).abs() < (r_hi - target).abs() { (lo, r_lo) } else { (hi, r_hi) };
    if target <= r_lo && target >= r_hi {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let r = slippery_rate(sched, law, mid, aero);
            if (r - target).abs() < (best.1 - target).abs() {
                best = (mid, r);
            }
            if r > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if (best.1 - target).abs() > 0.2 * target {
        return Err(Error::Config(format!(
            "positive-rate target {target} is out of reach; closest achieved rate is {:.4}",
            best.1
        )));
    }
    Ok(best)
}

pub fn generate(config: &GeneratorConfig) -> Result<SyntheticData> {
    config.validate()?;
    let start = config.start_time()?;
    let n_minutes = (config.n_days as usize + 1) * DAY as usize;
    let shared = shared_weather(n_minutes, config.n_days as f64 + 1.0, &mut stream_rng(config.seed, 1));
    let runways: Vec<RunwayData> =
        (0..config.runways.len()).map(|r| simulate_runway(config, r, start, &shared)).collect::<Result<_>>()?;

    let mut rng = stream_rng(config.seed, 2);
    let mut sched = Vec::with_capacity((config.n_days * config.landings_per_day) as usize);
    for day in 1..=config.n_days as i64 {
        let mut slots: Vec<(i64, usize)> = (0..config.landings_per_day)
            .map(|_| (day * DAY + 360 + rng.gen_range(0..DAY - 360), rng.gen_range(0..config.runways.len())))
            .collect();
        slots.sort_unstable();
        for (minute, runway) in slots {
            let series = &runways[runway].series;
            let t = |m: i64| start + chrono::Duration::minutes(m);
            let mut index = series.index_of(&t(minute));
            while !series.is_present(index) {
                index -= 1;
            }
            let minute = minute - (series.index_of(&t(minute)) - index);
            let snow_mm = accumulate_precip(series, PrecipType::DrySnow, index, Horizon::H24) / 60.0;
            let (tr, hu) = (series.value(Var::Tr, index), series.value(Var::Hu, index));
            let (ta, ap) = (series.value(Var::Ta, index), series.value(Var::Ap, index));
            let inputs = LawInputs { snow_mm, depth: runways[runway].depth[minute as usize], tr, hu };
            let rho = ap * 100.0 / (287.05 * (ta + 273.15));
            let pilot = draw_pilot(&mut rng, config.law.noise_sd);
            sched.push(Scheduled { runway, minute, index, pilot, inputs, rho });
        }
    }

    let (base, _) = if config.calibrate {
        calibrate(&sched, &config.law, config.positive_rate_target, &config.aero)?
    } else {
        (config.law.base, 0.0)
    };
    let law = PlantedLaw { base, ..config.law };

    let mut inspector = stream_rng(config.seed, 3);
    let mut snowtams = BTreeMap::new();
    let mut weather = BTreeMap::new();
    for (r, data) in runways.into_iter().enumerate() {
        let mut reports = Vec::with_capacity(data.drafts.len());
        for d in data.drafts {
            let mu = law.mu(base, &d.inputs, 0.0) - 0.02 + 0.04 * normal(&mut inspector);
            let level = to_braking_action(mu.max(0.0))?.level().clamp(1, 5);
            reports.push(SnowtamReport { inspector_ba: Some(level), ..d.report });
        }
        snowtams.insert(config.runways[r].clone(), SnowtamHistory::new(reports)?);
        weather.insert(config.runways[r].clone(), data.series);
    }

    let mut noise_rng = stream_rng(config.seed, 4);
    let mut landings = Vec::with_capacity(sched.len());
    let mut truth = Vec::with_capacity(sched.len());
    let mut positives = 0usize;
    for (k, s) in sched.iter().enumerate() {
        let runway = &config.runways[s.runway];
        let series = &weather[runway];
        debug_assert!(series.is_present(s.index));
        let touchdown = start + chrono::Duration::minutes(s.minute);
        let mu_available = law.mu(base, &s.inputs, s.pilot.eps);
        let mut r = roll(&s.pilot, mu_available, s.rho, &config.aero);
        if config.telemetry_noise > 0.0 {
            for x in &mut r.samples {
                x.speed = (x.speed + config.telemetry_noise * normal(&mut noise_rng)).max(0.0);
                x.accel += config.telemetry_noise * normal(&mut noise_rng);
            }
        }
        let id = format!("L{k:06}");
        positives += usize::from(r.limited && r.mu_b <= SLIPPERY_MU);
        let [snow_term, depth_term, cold_humid_term] = law.terms(&s.inputs);
        truth.push(GroundTruth {
            landing_id: id.clone(),
            runway: runway.clone(),
            touchdown_time: touchdown,
            mu_available,
            mu_b: r.mu_b,
            friction_limited: r.limited,
            demand: s.pilot.demand,
            snow_term,
            depth_term,
            cold_humid_term,
            noise_term: s.pilot.eps,
        });
        landings.push(LandingRecord {
            landing_id: id,
            runway: runway.clone(),
            touchdown_time: touchdown,
            samples: r.samples,
            mass_kg: s.pilot.mass,
            rho: s.rho,
        });
    }
    let positive_rate = positives as f64 / sched.len() as f64;
    Ok(SyntheticData { weather, snowtams, landings, truth, law_base: base, positive_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::friction::{estimate_mu_b, Aggregation};

    fn small(seed: u64) -> GeneratorConfig {
        GeneratorConfig { seed, n_days: 6, landings_per_day: 40, calibrate: false, law: PlantedLaw { base: 0.35, ..PlantedLaw::default() }, ..GeneratorConfig::default() }
    }

    #[test]
    fn zero_noise_telemetry_recovers_planted_mu() {
        let data = generate(&small(3)).unwrap();
        for (l, t) in data.landings.iter().zip(&data.truth) {
            let est = estimate_mu_b(l, &GeneratorConfig::default().aero, Aggregation::Mean).unwrap();
            assert!((est.mu_b - t.mu_b).abs() < 1e-6, "{} {} {}", l.landing_id, est.mu_b, t.mu_b);
            assert_eq!(est.friction_limited, t.friction_limited);
            assert!((MU_MIN..=MU_MAX).contains(&t.mu_available));
        }
    }

    #[test]
    fn planted_mu_of_point_twelve_is_recovered() {
        let pilot = Pilot { mass: 65_000.0, v0: 70.0, demand: 0.3, spike: None, eps: 0.0 };
        let r = roll(&pilot, 0.12, 1.25, &AeroParams::default());
        assert!(r.limited);
        let landing = LandingRecord {
            landing_id: "L1".into(),
            runway: "01L".into(),
            touchdown_time: parse_timestamp("2019-01-01T12:00:00Z").unwrap(),
            samples: r.samples,
            mass_kg: 65_000.0,
            rho: 1.25,
        };
        let est = estimate_mu_b(&landing, &AeroParams::default(), Aggregation::Mean).unwrap();
        assert!((est.mu_b - 0.12).abs() < 1e-6);
        assert!(est.slippery);
    }

    #[test]
    fn short_spikes_do_not_limit() {
        let aero = AeroParams::default();
        for (len, want) in [(1, false), (2, false), (3, true), (4, true)] {
            let pilot = Pilot { mass: 65_000.0, v0: 70.0, demand: 0.1, spike: Some((5, len, 0.15)), eps: 0.0 };
            assert_eq!(roll(&pilot, 0.2, 1.25, &aero).limited, want, "spike of {len} s");
        }
    }

    #[test]
    fn weather_is_physically_consistent() {
        let data = generate(&small(5)).unwrap();
        for series in data.weather.values() {
            for s in series.samples() {
                assert!(s.get(Var::Dp) <= s.get(Var::Ta));
                assert!((0.0..=100.0).contains(&s.get(Var::Hu)));
                assert!(s.get(Var::Vi) >= 0.0 && s.get(Var::Pi) >= 0.0);
            }
        }
        for h in data.snowtams.values() {
            for w in h.reports().windows(2) {
                assert!(w[1].issued_at - w[0].issued_at <= chrono::Duration::hours(24));
            }
        }
    }

    #[test]
    fn same_seed_same_files() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        generate(&small(9)).unwrap().write_dir(&a).unwrap();
        generate(&small(9)).unwrap().write_dir(&b).unwrap();
        for f in [WEATHER_FILE, SNOWTAM_FILE, LANDINGS_FILE, TRUTH_FILE] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
        let other = generate(&small(10)).unwrap();
        assert_ne!(other.truth, generate(&small(9)).unwrap().truth);
    }

    #[test]
    fn oracle_labels() {
        let mk = |limited, mu| GroundTruth {
            landing_id: "x".into(),
            runway: "01L".into(),
            touchdown_time: parse_timestamp("2019-01-01T00:00:00Z").unwrap(),
            mu_available: mu,
            mu_b: mu,
            friction_limited: limited,
            demand: 0.2,
            snow_term: 0.0,
            depth_term: 0.0,
            cold_humid_term: 0.0,
            noise_term: 0.0,
        };
        let labels = label_oracle(&[mk(true, 0.08), mk(false, 0.08), mk(true, 0.2)]);
        assert_eq!(labels.iter().map(|l| l.slippery).collect::<Vec<_>>(), [true, false, false]);
        assert_eq!(labels.iter().map(|l| l.mu).collect::<Vec<_>>(), [Some(0.08), None, Some(0.2)]);
    }

    #[test]
    fn unreachable_target_reports_the_rate() {
        let cfg = GeneratorConfig { n_days: 2, landings_per_day: 20, positive_rate_target: 1e-6, ..GeneratorConfig::default() };
        match generate(&cfg) {
            Err(Error::Config(m)) => assert!(m.contains("achieved rate"), "{m}"),
            other => panic!("expected a config error, got {:?}", other.map(|d| d.positive_rate)),
        }
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig { n_days: 0, ..GeneratorConfig::default() }.validate().is_err());
        assert!(GeneratorConfig { positive_rate_target: 1.0, ..GeneratorConfig::default() }.validate().is_err());
        assert!(GeneratorConfig { runways: vec!["01L".into(), "01L".into()], ..GeneratorConfig::default() }.validate().is_err());
        let c = GeneratorConfig::from_toml("seed = 4\nn_days = 3\n[law]\nalpha = 0.05\n").unwrap();
        assert_eq!((c.seed, c.n_days, c.law.alpha, c.law.beta), (4, 3, 0.05, PlantedLaw::default().beta));
    }
}
