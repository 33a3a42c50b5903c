//! A six-zone office floor with known parameters, used for examples,
//! benchmarks and end-to-end checks.
//!
//! Zones NW, W, S, E, NE and C (core) each have one room, one VAV box, a
//! floor and a ceiling; perimeter zones have one facade, interior walls
//! follow the floor plan.

use chrono::{Duration, NaiveDate, NaiveDateTime};

use crate::building::BuildingDescription;
use crate::error::Result;
use crate::params::ParameterVector;
use crate::simulation::excitation::{generate_excitation, ExcitationOptions};
use crate::simulation::synth::{synthesize_dataset, IgModel, Operation, ProportionalController, SynthesisOptions, WeatherModel};
use crate::simulation::TimeSeriesDataset;

pub const BUILDING_JSON: &str = include_str!("../data/twin_building.json");

pub fn building() -> BuildingDescription {
    BuildingDescription::from_json_str(BUILDING_JSON).expect("bundled twin building is valid")
}

/// Reference parameters in zone order NW, W, S, E, NE, C.
pub fn reference_parameters() -> ParameterVector {
    ParameterVector {
        gamma_ew: 10.5,
        gamma_iw: 29.4,
        gamma_floor: 51.5,
        gamma_ceil: 44.3,
        gamma_absorp: 0.75,
        gamma_win_sol_abs: 0.03,
        u_win: 0.63,
        c_ig: vec![0.3, 8.0, 18.8, 8.0, 11.0, 8.0],
    }
}

/// Physically plausible starting point for identification.
pub fn initial_guess() -> ParameterVector {
    ParameterVector {
        gamma_ew: 8.0,
        gamma_iw: 20.0,
        gamma_floor: 40.0,
        gamma_ceil: 40.0,
        gamma_absorp: 0.6,
        gamma_win_sol_abs: 0.05,
        u_win: 1.0,
        c_ig: vec![5.0; 6],
    }
}

pub fn weather() -> WeatherModel {
    WeatherModel::default()
}

/// Office occupancy with zone-specific levels; NW is the most erratic. The
/// mean profile raises zone temperatures by up to about 1 °C; week-to-week
/// and day-to-day variation is of the same order as the mean.
pub fn ig_model() -> IgModel {
    let peak = vec![13.0, 12.0, 11.0, 12.0, 12.0, 11.0];
    IgModel {
        weekly_std: vec![0.6, 0.45, 0.45, 0.45, 0.5, 0.45],
        daily_std: vec![0.8, 0.6, 0.6, 0.6, 0.7, 0.6],
        noise_std: peak.iter().map(|p| 0.5 * p).collect(),
        noise_corr: 0.98,
        peak,
        ..IgModel::uniform(6, 1.0)
    }
}

/// Monday of the first data week.
pub fn first_monday() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2015, 3, 2).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date")
}

pub fn week_start(week: usize) -> NaiveDateTime {
    first_monday() + Duration::weeks(week as i64)
}

/// Noise levels applied to synthesized data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Noise {
    pub measurement_std: f64,
    pub process_air_std: f64,
    pub process_wall_std: f64,
}

impl Noise {
    pub const NONE: Noise = Noise { measurement_std: 0.0, process_air_std: 0.0, process_wall_std: 0.0 };
}

fn options(start: NaiveDateTime, steps: usize, seed: u64, noise: Noise) -> SynthesisOptions {
    SynthesisOptions {
        start,
        steps,
        seed,
        measurement_noise_std: noise.measurement_std,
        process_noise_air_std: noise.process_air_std,
        process_noise_wall_std: noise.process_wall_std,
        ..SynthesisOptions::default()
    }
}

/// Excitation weekend (Saturday and Sunday of `week`) without internal-gains
/// deviation.
pub fn excitation_weekend(params: &ParameterVector, week: usize, seed: u64, noise: Noise) -> Result<TimeSeriesDataset> {
    let desc = building();
    let schedule = generate_excitation(&desc, seed, &ExcitationOptions::default())?;
    let start = week_start(week) + Duration::days(5);
    synthesize_dataset(&desc, params, None, &weather(), &Operation::Schedule(schedule.setpoints), &options(start, 2 * 96, seed, noise))
}

/// `weeks` consecutive weeks of regular operation starting Monday of `week`.
pub fn regular_weeks(
    params: &ParameterVector,
    ig: Option<&IgModel>,
    week: usize,
    weeks: usize,
    seed: u64,
    noise: Noise,
) -> Result<TimeSeriesDataset> {
    let desc = building();
    let controller = ProportionalController::for_building(&desc, 21.0, 0.5);
    synthesize_dataset(
        &desc,
        params,
        ig,
        &weather(),
        &Operation::Regular(controller),
        &options(week_start(week), weeks * 7 * 96, seed, noise),
    )
}
