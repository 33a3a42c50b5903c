//! Portable matrix dump of a built model (JSON artifact or one CSV per matrix).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::discrete::DiscreteModel;
use crate::params::ParameterVector;

pub const MODEL_SCHEMA: &str = "thermident-model/1";

pub type RowMajor = Vec<Vec<f64>>;

pub fn to_rows(m: &DMatrix<f64>) -> RowMajor {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &RowMajor) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSet {
    pub a: RowMajor,
    pub b_v: RowMajor,
    pub b_ig: RowMajor,
    pub b_xu: Vec<RowMajor>,
    pub b_vu: Vec<RowMajor>,
    pub c: RowMajor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema: String,
    pub config_hash: String,
    pub dt: f64,
    pub parameters: ParameterVector,
    pub state_labels: Vec<String>,
    pub zone_ids: Vec<String>,
    pub box_ids: Vec<String>,
    pub disturbance_names: Vec<String>,
    /// J/K per state.
    pub capacitance: Vec<f64>,
    pub a_t: RowMajor,
    pub b_t: RowMajor,
    pub continuous: MatrixSet,
    pub discrete: MatrixSet,
}

impl ModelArtifact {
    pub fn from_model(dm: &DiscreteModel, config_hash: &str) -> Self {
        let cm = &dm.continuous;
        let net = &cm.network;
        ModelArtifact {
            schema: MODEL_SCHEMA.to_string(),
            config_hash: config_hash.to_string(),
            dt: dm.dt,
            parameters: cm.params.clone(),
            state_labels: net.state_labels(),
            zone_ids: net.zone_ids.clone(),
            box_ids: net.box_ids(),
            disturbance_names: crate::model::flux::disturbance::NAMES.iter().map(|s| s.to_string()).collect(),
            capacitance: net.capacitance.iter().copied().collect(),
            a_t: to_rows(&net.a_t),
            b_t: to_rows(&net.b_t),
            continuous: MatrixSet {
                a: to_rows(&cm.a),
                b_v: to_rows(&cm.b_v),
                b_ig: to_rows(&cm.b_ig),
                b_xu: cm.b_xu.iter().map(to_rows).collect(),
                b_vu: cm.b_vu.iter().map(to_rows).collect(),
                c: to_rows(&net.output),
            },
            discrete: MatrixSet {
                a: to_rows(&dm.a),
                b_v: to_rows(&dm.b_v),
                b_ig: to_rows(&dm.b_ig),
                b_xu: dm.b_xu.iter().map(to_rows).collect(),
                b_vu: dm.b_vu.iter().map(to_rows).collect(),
                c: to_rows(&dm.c),
            },
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_slice(&std::fs::read(path)?)?;
        if artifact.schema != MODEL_SCHEMA {
            return Err(Error::schema(format!("unsupported model schema `{}`", artifact.schema)));
        }
        Ok(artifact)
    }

    /// Writes every matrix as a headerless CSV file into `dir`.
    pub fn write_csv_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let write = |name: String, m: &RowMajor| -> Result<()> {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join(format!("{name}.csv")))?;
            for row in m {
                w.write_record(row.iter().map(|v| format!("{v:e}")))?;
            }
            w.flush()?;
            Ok(())
        };
        write("A_t".into(), &self.a_t)?;
        write("B_t".into(), &self.b_t)?;
        for (prefix, set) in [("cont", &self.continuous), ("disc", &self.discrete)] {
            write(format!("{prefix}_A"), &set.a)?;
            write(format!("{prefix}_B_v"), &set.b_v)?;
            write(format!("{prefix}_B_IG"), &set.b_ig)?;
            write(format!("{prefix}_C"), &set.c)?;
            for (j, m) in set.b_xu.iter().enumerate() {
                write(format!("{prefix}_B_xu_{j}"), m)?;
            }
            for (j, m) in set.b_vu.iter().enumerate() {
                write(format!("{prefix}_B_vu_{j}"), m)?;
            }
        }
        Ok(())
    }
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Dataset(e.to_string()))?);
    }
    from_rows(&rows)
}
