//! Randomized block excitation schedules for identification experiments.
//!
//! Each day, starting at `start_hour`, a seeded permutation of the zones is
//! walked in blocks of `block_hours`. During a block the selected zone's
//! boxes run at maximum flow, boxes of its neighbors at minimum, and all
//! other boxes at a random level fixed for the block. Outside the blocks
//! every box stays at minimum flow.

use std::path::Path;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::building::BuildingDescription;
use crate::error::{Error, Result};
use crate::simulation::dataset::{fmt_value, read_table, write_table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcitationOptions {
    pub dt: f64,
    pub days: usize,
    pub start_hour: f64,
    pub block_hours: f64,
    pub blocks_per_day: usize,
}

impl Default for ExcitationOptions {
    fn default() -> Self {
        ExcitationOptions { dt: crate::model::DEFAULT_STEP_SECONDS, days: 2, start_hour: 8.0, block_hours: 2.0, blocks_per_day: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationBlock {
    pub day: usize,
    pub start_step: usize,
    pub steps: usize,
    pub zone: usize,
}

/// Setpoints per step, starting at midnight of the first day.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSchedule {
    pub seed: u64,
    pub options: ExcitationOptions,
    pub box_ids: Vec<String>,
    pub zone_ids: Vec<String>,
    pub blocks: Vec<ExcitationBlock>,
    pub setpoints: Vec<DVector<f64>>,
}

pub fn generate_excitation(desc: &BuildingDescription, seed: u64, options: &ExcitationOptions) -> Result<ExcitationSchedule> {
    desc.validate()?;
    let steps_per_hour = 3600.0 / options.dt;
    let per_day = (24.0 * steps_per_hour).round() as usize;
    let block_steps = (options.block_hours * steps_per_hour).round() as usize;
    let first = (options.start_hour * steps_per_hour).round() as usize;
    if block_steps == 0 || first + block_steps * options.blocks_per_day > per_day {
        return Err(Error::Config("excitation blocks do not fit in a day".into()));
    }
    let zones = desc.zones.len();
    let box_zones = desc.box_zones();
    let min: Vec<f64> = desc.vav_boxes.iter().map(|b| b.min_flow).collect();
    let max: Vec<f64> = desc.vav_boxes.iter().map(|b| b.max_flow).collect();
    let neighbors = desc.zone_neighbors();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut setpoints = vec![DVector::from_column_slice(&min); per_day * options.days];
    let mut blocks = Vec::new();
    for day in 0..options.days {
        let mut order: Vec<usize> = (0..zones).collect();
        order.shuffle(&mut rng);
        for b in 0..options.blocks_per_day {
            let zone = order[b % zones];
            let start_step = day * per_day + first + b * block_steps;
            let level = DVector::from_iterator(
                box_zones.len(),
                box_zones.iter().enumerate().map(|(j, &bz)| {
                    let draw: f64 = rng.random();
                    if bz == zone {
                        max[j]
                    } else if neighbors[zone].contains(&bz) {
                        min[j]
                    } else {
                        min[j] + draw * (max[j] - min[j])
                    }
                }),
            );
            for s in &mut setpoints[start_step..start_step + block_steps] {
                s.copy_from(&level);
            }
            blocks.push(ExcitationBlock { day, start_step, steps: block_steps, zone });
        }
    }
    Ok(ExcitationSchedule { seed, options: *options, box_ids: desc.box_ids(), zone_ids: desc.zone_ids(), blocks, setpoints })
}

impl ExcitationSchedule {
    pub fn len(&self) -> usize {
        self.setpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.setpoints.is_empty()
    }

    /// Zone at maximum flow at `step`, if any.
    pub fn active_zone(&self, step: usize) -> Option<usize> {
        self.blocks.iter().find(|b| (b.start_step..b.start_step + b.steps).contains(&step)).map(|b| b.zone)
    }

    /// CSV with columns `step, active_zone, u_<box>...`.
    pub fn write_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec!["step".to_string(), "active_zone".to_string()];
        header.extend(self.box_ids.iter().map(|b| format!("u_{b}")));
        let rows: Vec<Vec<String>> = self
            .setpoints
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut row = vec![k.to_string(), self.active_zone(k).map(|z| self.zone_ids[z].clone()).unwrap_or_default()];
                row.extend(s.iter().map(|v| fmt_value(*v)));
                row
            })
            .collect();
        write_table(path.as_ref(), config_hash, &header, &rows)
    }

    /// Setpoints from a schedule CSV (block metadata is not restored).
    pub fn read_setpoints(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<DVector<f64>>)> {
        let (header, rows) = read_table(path.as_ref())?;
        let cols: Vec<(usize, String)> =
            header.iter().enumerate().filter_map(|(i, h)| h.strip_prefix("u_").map(|b| (i, b.to_string()))).collect();
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let vals = cols
                .iter()
                .map(|(i, _)| row[*i].trim().parse::<f64>().map_err(|e| Error::Dataset(format!("schedule value: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            out.push(DVector::from_vec(vals));
        }
        Ok((cols.into_iter().map(|(_, b)| b).collect(), out))
    }
}
