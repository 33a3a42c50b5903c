//! Aligned measurement/input/disturbance sequences on a uniform grid, with
//! CSV import/export.

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::flux::disturbance;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub state_labels: Vec<String>,
    pub states: Vec<DVector<f64>>,
    pub f_ig: Vec<DVector<f64>>,
}

/// Airflow and disturbance sequences without gaps.
pub type FilledInputs = (Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Missing values are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub dt: f64,
    pub timestamps: Vec<NaiveDateTime>,
    pub zone_ids: Vec<String>,
    pub box_ids: Vec<String>,
    /// Measured zone temperatures, °C.
    pub y: Vec<DVector<f64>>,
    /// Airflow per VAV box, kg/s.
    pub u: Vec<DVector<f64>>,
    /// Disturbances (Ta, Ts, solE, solS, solW, solN).
    pub v: Vec<DVector<f64>>,
    pub truth: Option<GroundTruth>,
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl TimeSeriesDataset {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn zones(&self) -> usize {
        self.zone_ids.len()
    }

    /// True when every channel at `k` is present.
    pub fn is_complete(&self, k: usize) -> bool {
        all_finite(&self.y[k]) && all_finite(&self.u[k]) && all_finite(&self.v[k])
    }

    pub fn inputs_complete(&self, k: usize) -> bool {
        all_finite(&self.u[k]) && all_finite(&self.v[k])
    }

    /// Checks lengths, grid uniformity, irradiance sign and (optionally) box limits.
    pub fn validate(&self, limits: Option<&[(f64, f64)]>) -> Result<()> {
        let n = self.len();
        if self.y.len() != n || self.u.len() != n || self.v.len() != n {
            return Err(Error::Dataset("sequences have different lengths".into()));
        }
        if let Some(t) = &self.truth {
            if t.states.len() != n || t.f_ig.len() != n {
                return Err(Error::Dataset("ground truth length differs from data".into()));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::Dataset("time step must be positive".into()));
        }
        let step = Duration::milliseconds((self.dt * 1000.0).round() as i64);
        for w in self.timestamps.windows(2) {
            if w[1] - w[0] != step {
                return Err(Error::Dataset(format!("non-uniform grid at {}", w[1].format(TIMESTAMP_FORMAT))));
            }
        }
        for k in 0..n {
            if self.y[k].len() != self.zones() || self.u[k].len() != self.box_ids.len() || self.v[k].len() != disturbance::LEN {
                return Err(Error::Dataset(format!("wrong sample width at step {k}")));
            }
            if self.v[k].rows(disturbance::SOLAR, 4).iter().any(|s| *s < 0.0) {
                return Err(Error::Dataset(format!("negative irradiance at step {k}")));
            }
            if let Some(lim) = limits {
                for (j, (&f, &(lo, hi))) in self.u[k].iter().zip(lim).enumerate() {
                    let tol = 1e-9 * hi.max(1.0);
                    if f.is_finite() && (f < lo - tol || f > hi + tol) {
                        return Err(Error::Dataset(format!("airflow {f} of box {} outside [{lo}, {hi}] at step {k}", self.box_ids[j])));
                    }
                }
            }
        }
        Ok(())
    }

    /// Inputs with missing values carried forward from the previous sample.
    /// Missing values at the start are back-filled from the first complete one.
    pub fn filled_inputs(&self) -> Result<FilledInputs> {
        fn fill(seq: &[DVector<f64>], what: &str) -> Result<Vec<DVector<f64>>> {
            let mut out: Vec<DVector<f64>> = seq.to_vec();
            for ch in 0..seq.first().map(|s| s.len()).unwrap_or(0) {
                let first = seq.iter().map(|s| s[ch]).find(|x| x.is_finite());
                let Some(mut last) = first else {
                    return Err(Error::Dataset(format!("{what} channel {ch} has no values")));
                };
                for s in out.iter_mut() {
                    if s[ch].is_finite() {
                        last = s[ch];
                    } else {
                        s[ch] = last;
                    }
                }
            }
            Ok(out)
        }
        Ok((fill(&self.u, "airflow")?, fill(&self.v, "disturbance")?))
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeriesDataset {
        TimeSeriesDataset {
            dt: self.dt,
            timestamps: self.timestamps[range.clone()].to_vec(),
            zone_ids: self.zone_ids.clone(),
            box_ids: self.box_ids.clone(),
            y: self.y[range.clone()].to_vec(),
            u: self.u[range.clone()].to_vec(),
            v: self.v[range.clone()].to_vec(),
            truth: self.truth.as_ref().map(|t| GroundTruth {
                state_labels: t.state_labels.clone(),
                states: t.states[range.clone()].to_vec(),
                f_ig: t.f_ig[range.clone()].to_vec(),
            }),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["timestamp".to_string()];
        h.extend(self.zone_ids.iter().map(|z| format!("y_{z}")));
        h.extend(self.box_ids.iter().map(|b| format!("u_{b}")));
        h.extend(disturbance::NAMES.iter().map(|d| format!("v_{d}")));
        h
    }

    /// Writes the data CSV and, when ground truth is present, a sibling
    /// `<stem>_truth.csv`.
    pub fn write_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let mut rows = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let mut row = vec![self.timestamps[k].format(TIMESTAMP_FORMAT).to_string()];
            for seq in [&self.y[k], &self.u[k], &self.v[k]] {
                row.extend(seq.iter().map(|x| fmt_value(*x)));
            }
            rows.push(row);
        }
        write_table(path, config_hash, &self.header(), &rows)?;
        if let Some(t) = &self.truth {
            let mut header = vec!["timestamp".to_string()];
            header.extend(t.state_labels.iter().map(|s| format!("x_{s}")));
            header.extend(self.zone_ids.iter().map(|z| format!("f_{z}")));
            let rows: Vec<Vec<String>> = (0..self.len())
                .map(|k| {
                    let mut row = vec![self.timestamps[k].format(TIMESTAMP_FORMAT).to_string()];
                    row.extend(t.states[k].iter().map(|x| fmt_value(*x)));
                    row.extend(t.f_ig[k].iter().map(|x| fmt_value(*x)));
                    row
                })
                .collect();
            write_table(&truth_path(path), config_hash, &header, &rows)?;
        }
        Ok(())
    }

    /// Reads a dataset CSV; a sibling truth file is loaded when present.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, rows) = read_table(path)?;
        if header.first().map(String::as_str) != Some("timestamp") {
            return Err(Error::Dataset("first column must be `timestamp`".into()));
        }
        let pick = |prefix: &str| -> Vec<(usize, String)> {
            header.iter().enumerate().filter_map(|(i, h)| h.strip_prefix(prefix).map(|s| (i, s.to_string()))).collect()
        };
        let ys = pick("y_");
        let us = pick("u_");
        let vs = pick("v_");
        let v_names: Vec<&str> = vs.iter().map(|(_, s)| s.as_str()).collect();
        if v_names != disturbance::NAMES {
            return Err(Error::Dataset(format!("disturbance columns must be v_{}", disturbance::NAMES.join(", v_"))));
        }
        if ys.is_empty() {
            return Err(Error::Dataset("no y_ columns".into()));
        }
        let mut ds = TimeSeriesDataset {
            dt: 0.0,
            timestamps: Vec::with_capacity(rows.len()),
            zone_ids: ys.iter().map(|(_, s)| s.clone()).collect(),
            box_ids: us.iter().map(|(_, s)| s.clone()).collect(),
            y: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
            truth: None,
        };
        for (line, row) in rows.iter().enumerate() {
            ds.timestamps.push(parse_timestamp(&row[0]).map_err(|e| Error::Dataset(format!("row {}: {e}", line + 1)))?);
            let take = |cols: &[(usize, String)]| -> Result<DVector<f64>> {
                cols.iter()
                    .map(|(i, _)| parse_value(row.get(*i).map(String::as_str).unwrap_or("")))
                    .collect::<Result<Vec<f64>>>()
                    .map(DVector::from_vec)
            };
            ds.y.push(take(&ys)?);
            ds.u.push(take(&us)?);
            ds.v.push(take(&vs)?);
        }
        ds.dt = match ds.timestamps.as_slice() {
            [a, b, ..] => (*b - *a).num_milliseconds() as f64 / 1000.0,
            _ => crate::model::DEFAULT_STEP_SECONDS,
        };
        let tp = truth_path(path);
        if tp.exists() {
            let (header, rows) = read_table(&tp)?;
            let labels: Vec<String> = header.iter().filter_map(|h| h.strip_prefix("x_").map(str::to_string)).collect();
            let nx = labels.len();
            let nz = ds.zones();
            let mut states = Vec::new();
            let mut f_ig = Vec::new();
            for row in &rows {
                let vals = row[1..].iter().map(|s| parse_value(s)).collect::<Result<Vec<f64>>>()?;
                if vals.len() != nx + nz {
                    return Err(Error::Dataset("malformed truth row".into()));
                }
                states.push(DVector::from_column_slice(&vals[..nx]));
                f_ig.push(DVector::from_column_slice(&vals[nx..]));
            }
            ds.truth = Some(GroundTruth { state_labels: labels, states, f_ig });
        }
        ds.validate(None)?;
        Ok(ds)
    }
}

pub fn truth_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    path.with_file_name(format!("{stem}_truth.csv"))
}

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S"))
        .map_err(|e| Error::Dataset(format!("bad timestamp `{s}`: {e}")))
}

fn parse_value(s: &str) -> Result<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|e| Error::Dataset(format!("bad number `{s}`: {e}")))
}

pub(crate) fn fmt_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// CSV table with an optional leading `# config_hash: ...` comment line.
pub(crate) fn write_table(path: &Path, config_hash: Option<&str>, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(h) = config_hash {
        writeln!(file, "# config_hash: {h}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV table, skipping `#` comment lines.
pub(crate) fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(false).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Comment lines (`# key: value`) at the top of a CSV file.
pub fn read_comments(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').split_once(':')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect())
}
