//! Synthetic weather, occupancy-driven internal gains and closed-loop data
//! generation for a building description with known parameters.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike, Weekday};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::building::BuildingDescription;
use crate::error::{Error, Result};
use crate::model::flux::disturbance;
use crate::model::{build_model, discretize, NetworkOptions, DEFAULT_STEP_SECONDS};
use crate::params::ParameterVector;
use crate::simulation::dataset::{GroundTruth, TimeSeriesDataset};

/// Independent random streams drawn from one seed.
mod stream {
    pub const WEATHER: u64 = 1;
    pub const GAINS: u64 = 2;
    pub const MEASUREMENT: u64 = 3;
    pub const PROCESS: u64 = 4;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn hour_of_day(t: &NaiveDateTime) -> f64 {
    t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0
}

fn is_weekend(t: &NaiveDateTime) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Stationary AR(1) noise with marginal standard deviation `std`.
struct Ar1 {
    value: f64,
    corr: f64,
    innovation: Normal<f64>,
}

impl Ar1 {
    fn new(std: f64, corr: f64, rng: &mut ChaCha8Rng) -> Self {
        let innovation = Normal::new(0.0, std * (1.0 - corr * corr).sqrt()).expect("finite std");
        let value = Normal::new(0.0, std).expect("finite std").sample(rng);
        Ar1 { value, corr, innovation }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let out = self.value;
        self.value = self.corr * self.value + self.innovation.sample(rng);
        out
    }
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::Config(format!("invalid standard deviation {std}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherModel {
    pub ambient_mean: f64,
    pub ambient_amplitude: f64,
    pub ambient_peak_hour: f64,
    pub ambient_noise_std: f64,
    pub ambient_noise_corr: f64,
    pub supply_mean: f64,
    pub supply_noise_std: f64,
    /// Clear-sky peak irradiance on E, S, W, N facades, W/m².
    pub peak_irradiance: [f64; 4],
    /// Daily clearness is uniform on `[min_clearness, 1]`.
    pub min_clearness: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
}

impl Default for WeatherModel {
    fn default() -> Self {
        WeatherModel {
            ambient_mean: 14.0,
            ambient_amplitude: 5.0,
            ambient_peak_hour: 15.0,
            ambient_noise_std: 0.5,
            ambient_noise_corr: 0.97,
            supply_mean: 16.0,
            supply_noise_std: 0.2,
            peak_irradiance: [450.0, 550.0, 450.0, 120.0],
            min_clearness: 0.5,
            sunrise_hour: 6.0,
            sunset_hour: 18.0,
        }
    }
}

impl WeatherModel {
    /// Clear-sky irradiance per facade at `hour`: a daytime half-sine on S and
    /// N, morning (E) and afternoon (W) half-sines with a small diffuse part.
    pub fn clear_sky(&self, hour: f64) -> [f64; 4] {
        let s = (hour - self.sunrise_hour) / (self.sunset_hour - self.sunrise_hour);
        if !(0.0..=1.0).contains(&s) {
            return [0.0; 4];
        }
        let day = (PI * s).sin();
        let east = 0.85 * (2.0 * PI * s).sin().max(0.0) + 0.15 * day;
        let west = 0.85 * (-(2.0 * PI * s).sin()).max(0.0) + 0.15 * day;
        let p = self.peak_irradiance;
        [p[0] * east, p[1] * day, p[2] * west, p[3] * day]
    }

    pub fn sample(&self, timestamps: &[NaiveDateTime], seed: u64) -> Result<Vec<DVector<f64>>> {
        let mut rng = rng_for(seed, stream::WEATHER);
        if !(0.0..1.0).contains(&self.ambient_noise_corr) {
            return Err(Error::Config("ambient noise correlation must be in [0, 1)".into()));
        }
        normal(self.ambient_noise_std)?;
        let supply = normal(self.supply_noise_std)?;
        let mut ambient = Ar1::new(self.ambient_noise_std, self.ambient_noise_corr, &mut rng);
        let mut day = None;
        let mut clearness = 1.0;
        let mut out = Vec::with_capacity(timestamps.len());
        for t in timestamps {
            if day != Some(t.date()) {
                day = Some(t.date());
                clearness = self.min_clearness + (1.0 - self.min_clearness) * rng.random::<f64>();
            }
            let h = hour_of_day(t);
            let mut v = DVector::zeros(disturbance::LEN);
            v[disturbance::AMBIENT] = self.ambient_mean
                + self.ambient_amplitude * (2.0 * PI * (h - self.ambient_peak_hour + 6.0) / 24.0).sin()
                + ambient.next(&mut rng);
            v[disturbance::SUPPLY] = self.supply_mean + supply.sample(&mut rng);
            for (i, s) in self.clear_sky(h).into_iter().enumerate() {
                v[disturbance::SOLAR + i] = clearness * s;
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Occupancy-driven internal gains deviation `f_IG`, W/m² per zone.
///
/// The weekday shape ramps up from `ramp_start_hour`, peaks at `peak_hour`
/// and decays exponentially afterwards; weekends are attenuated. Each zone's
/// level is scaled by per-week and per-day random multipliers and overlaid
/// with AR(1) noise whose amplitude follows the occupancy shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgModel {
    pub peak: Vec<f64>,
    pub ramp_start_hour: f64,
    pub peak_hour: f64,
    pub decay_hours: f64,
    pub weekend_factor: f64,
    pub weekly_std: Vec<f64>,
    pub daily_std: Vec<f64>,
    pub noise_std: Vec<f64>,
    pub noise_corr: f64,
    /// Noise amplitude outside occupied hours, relative to the peak.
    pub noise_floor: f64,
}

impl Default for IgModel {
    fn default() -> Self {
        IgModel::uniform(1, 10.0)
    }
}

impl IgModel {
    pub fn uniform(zones: usize, peak: f64) -> Self {
        IgModel {
            peak: vec![peak; zones],
            ramp_start_hour: 7.0,
            peak_hour: 13.5,
            decay_hours: 3.5,
            weekend_factor: 0.25,
            weekly_std: vec![0.15; zones],
            daily_std: vec![0.15; zones],
            noise_std: vec![0.1 * peak; zones],
            noise_corr: 0.9,
            noise_floor: 0.2,
        }
    }

    pub fn zones(&self) -> usize {
        self.peak.len()
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.zones();
        if self.weekly_std.len() != z || self.daily_std.len() != z || self.noise_std.len() != z {
            return Err(Error::Config("internal-gains model vectors differ in length".into()));
        }
        if !(self.ramp_start_hour < self.peak_hour && self.decay_hours > 0.0) {
            return Err(Error::Config("internal-gains shape needs ramp_start_hour < peak_hour and decay_hours > 0".into()));
        }
        if !(0.0..1.0).contains(&self.noise_corr) {
            return Err(Error::Config("noise correlation must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Occupancy shape in `[0, 1]` at `t`.
    pub fn shape(&self, t: &NaiveDateTime) -> f64 {
        let h = hour_of_day(t);
        let s = if h < self.ramp_start_hour {
            // tail of the previous day
            (-(h + 24.0 - self.peak_hour) / self.decay_hours).exp()
        } else if h < self.peak_hour {
            let tail = (-(self.ramp_start_hour + 24.0 - self.peak_hour) / self.decay_hours).exp();
            let r = (h - self.ramp_start_hour) / (self.peak_hour - self.ramp_start_hour);
            tail + (1.0 - tail) * 0.5 * (1.0 - (PI * r).cos())
        } else {
            (-(h - self.peak_hour) / self.decay_hours).exp()
        };
        if is_weekend(t) {
            s * self.weekend_factor
        } else {
            s
        }
    }

    fn noise_gate(&self, t: &NaiveDateTime) -> f64 {
        self.noise_floor + (1.0 - self.noise_floor) * self.shape(t)
    }

    pub fn mean(&self, t: &NaiveDateTime) -> DVector<f64> {
        let s = self.shape(t);
        DVector::from_iterator(self.zones(), self.peak.iter().map(|p| p * s))
    }

    /// Marginal standard deviation of the generated gains at `t`.
    pub fn std(&self, t: &NaiveDateTime) -> DVector<f64> {
        let s = self.shape(t);
        let g = self.noise_gate(t);
        DVector::from_fn(self.zones(), |z, _| {
            let m = self.peak[z] * s;
            (m * m * (self.weekly_std[z].powi(2) + self.daily_std[z].powi(2)) + (g * self.noise_std[z]).powi(2)).sqrt()
        })
    }

    pub fn sample(&self, timestamps: &[NaiveDateTime], seed: u64) -> Result<Vec<DVector<f64>>> {
        self.validate()?;
        let mut rng = rng_for(seed, stream::GAINS);
        let zones = self.zones();
        let weekly: Vec<Normal<f64>> = self.weekly_std.iter().map(|s| normal(*s)).collect::<Result<_>>()?;
        let daily: Vec<Normal<f64>> = self.daily_std.iter().map(|s| normal(*s)).collect::<Result<_>>()?;
        let mut noise: Vec<Ar1> = self.noise_std.iter().map(|s| Ar1::new(*s, self.noise_corr, &mut rng)).collect();
        let mut week = None;
        let mut day = None;
        let mut week_factor = vec![0.0; zones];
        let mut day_factor = vec![0.0; zones];
        let mut out = Vec::with_capacity(timestamps.len());
        for t in timestamps {
            let iso = t.iso_week();
            if week != Some((iso.year(), iso.week())) {
                week = Some((iso.year(), iso.week()));
                for z in 0..zones {
                    week_factor[z] = weekly[z].sample(&mut rng);
                }
            }
            if day != Some(t.date()) {
                day = Some(t.date());
                for z in 0..zones {
                    day_factor[z] = daily[z].sample(&mut rng);
                }
            }
            let s = self.shape(t);
            let g = self.noise_gate(t);
            out.push(DVector::from_fn(zones, |z, _| {
                self.peak[z] * s * (1.0 + week_factor[z] + day_factor[z]) + g * noise[z].next(&mut rng)
            }));
        }
        Ok(out)
    }
}

/// Per-zone proportional cooling control to a setpoint with airflow
/// saturation at the box limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalController {
    pub setpoint: f64,
    /// Fraction of the flow range opened per °C above the setpoint.
    pub gain: f64,
    pub box_zone: Vec<usize>,
    pub min_flow: Vec<f64>,
    pub max_flow: Vec<f64>,
}

impl ProportionalController {
    pub fn for_building(desc: &BuildingDescription, setpoint: f64, gain: f64) -> Self {
        ProportionalController {
            setpoint,
            gain,
            box_zone: desc.box_zones(),
            min_flow: desc.vav_boxes.iter().map(|b| b.min_flow).collect(),
            max_flow: desc.vav_boxes.iter().map(|b| b.max_flow).collect(),
        }
    }

    pub fn airflow(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.box_zone.len(), |j, _| {
            let frac = (self.gain * (y[self.box_zone[j]] - self.setpoint)).clamp(0.0, 1.0);
            self.min_flow[j] + frac * (self.max_flow[j] - self.min_flow[j])
        })
    }
}

/// How the VAV boxes are driven during synthesis.
#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    /// Setpoints per step from the start of the data window.
    Schedule(Vec<DVector<f64>>),
    Regular(ProportionalController),
    Constant(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub start: NaiveDateTime,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    /// Closed-loop steps simulated before `start` and discarded.
    pub spinup_steps: usize,
    pub measurement_noise_std: f64,
    pub process_noise_air_std: f64,
    pub process_noise_wall_std: f64,
    pub initial_temperature: f64,
    pub setpoint: f64,
    pub controller_gain: f64,
    pub network: NetworkOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            start: chrono::NaiveDate::from_ymd_opt(2015, 3, 2).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date"),
            steps: 7 * 96,
            dt: DEFAULT_STEP_SECONDS,
            seed: 0,
            spinup_steps: 3 * 96,
            measurement_noise_std: 0.0,
            process_noise_air_std: 0.0,
            process_noise_wall_std: 0.0,
            initial_temperature: 21.0,
            setpoint: 21.0,
            controller_gain: 0.5,
            network: NetworkOptions::default(),
        }
    }
}

impl SynthesisOptions {
    pub fn steps_per_week(&self) -> usize {
        (7.0 * 86400.0 / self.dt).round() as usize
    }
}

/// Ground-truth closed-loop rollout of the discrete model. Spin-up runs the
/// proportional controller; inside the data window `operation` drives the
/// boxes. `ig = None` means no internal-gains deviation.
pub fn synthesize_dataset(
    desc: &BuildingDescription,
    params: &ParameterVector,
    ig: Option<&IgModel>,
    weather: &WeatherModel,
    operation: &Operation,
    options: &SynthesisOptions,
) -> Result<TimeSeriesDataset> {
    let model = build_model(desc, params, &options.network)?;
    let dm = discretize(&model, options.dt)?;
    let zones = dm.zones();
    let boxes = dm.inputs();
    if let Some(ig) = ig {
        if ig.zones() != zones {
            return Err(Error::Config(format!("internal-gains model has {} zones, building has {zones}", ig.zones())));
        }
    }
    match operation {
        Operation::Schedule(s) if s.len() < options.steps => {
            return Err(Error::Config(format!("schedule covers {} of {} steps", s.len(), options.steps)))
        }
        Operation::Schedule(s) if s.iter().any(|u| u.len() != boxes) => {
            return Err(Error::Dimension("schedule width differs from box count".into()))
        }
        Operation::Constant(u) if u.len() != boxes => return Err(Error::Dimension("constant airflow width".into())),
        _ => {}
    }

    let step = Duration::milliseconds((options.dt * 1000.0).round() as i64);
    let total = options.spinup_steps + options.steps;
    let first = options.start - step * options.spinup_steps as i32;
    let times: Vec<NaiveDateTime> = (0..total).map(|k| first + step * k as i32).collect();
    let v = weather.sample(&times, options.seed)?;
    let f = match ig {
        Some(ig) => ig.sample(&times, options.seed)?,
        None => vec![DVector::zeros(zones); total],
    };
    let controller = match operation {
        Operation::Regular(c) => c.clone(),
        _ => ProportionalController::for_building(desc, options.setpoint, options.controller_gain),
    };

    let mut meas_rng = rng_for(options.seed, stream::MEASUREMENT);
    let mut proc_rng = rng_for(options.seed, stream::PROCESS);
    let meas = normal(options.measurement_noise_std)?;
    let air = normal(options.process_noise_air_std)?;
    let wall = normal(options.process_noise_wall_std)?;
    let net = dm.network().clone();

    let mut x = DVector::from_element(dm.states(), options.initial_temperature);
    let mut ds = TimeSeriesDataset {
        dt: options.dt,
        timestamps: times[options.spinup_steps..].to_vec(),
        zone_ids: net.zone_ids.clone(),
        box_ids: net.box_ids(),
        y: Vec::with_capacity(options.steps),
        u: Vec::with_capacity(options.steps),
        v: v[options.spinup_steps..].to_vec(),
        truth: None,
    };
    let mut states = Vec::with_capacity(options.steps);
    for k in 0..total {
        let mut y = &dm.c * &x;
        if options.measurement_noise_std > 0.0 {
            for e in y.iter_mut() {
                *e += meas.sample(&mut meas_rng);
            }
        }
        let inside = k >= options.spinup_steps;
        let u = match (inside, operation) {
            (true, Operation::Schedule(s)) => s[k - options.spinup_steps].clone(),
            (true, Operation::Constant(u)) => u.clone(),
            _ => controller.airflow(&y),
        };
        if inside {
            ds.y.push(y);
            ds.u.push(u.clone());
            states.push(x.clone());
        }
        let mut next = dm.advance(&x, &u, &v[k], &f[k]);
        if options.process_noise_air_std > 0.0 || options.process_noise_wall_std > 0.0 {
            for (i, e) in next.iter_mut().enumerate() {
                *e += if net.is_room(i) { air.sample(&mut proc_rng) } else { wall.sample(&mut proc_rng) };
            }
        }
        if let Some(state) = next.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { step: k + 1, state });
        }
        x = next;
    }
    ds.truth = Some(GroundTruth { state_labels: net.state_labels(), states, f_ig: f[options.spinup_steps..].to_vec() });
    ds.validate(None)?;
    Ok(ds)
}
