//! Hashes and file formats.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::calibration::SbcRecord;
use crate::error::{Error, Result};
use crate::simulators::{Measurements, TrainingDataset};
use crate::tstep::TPosterior;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a dataset's values in row order, independent of any file layout.
pub fn dataset_hash(data: &TrainingDataset) -> String {
    let mut h = Sha256::new();
    for ((w, s), y) in data
        .inputs
        .iter()
        .zip(&data.noise_hypers)
        .zip(&data.outputs)
    {
        for v in w.iter().chain([s, y]) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut h = Sha256::new();
    for r in rows {
        h.update((r.len() as u64).to_le_bytes());
        for v in r {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the training-posterior draws.
pub fn tposterior_hash(t: &TPosterior) -> String {
    hash_rows(t.draws.iter().map(|r| r.as_slice()))
}

/// Hash of the observations and their times.
pub fn measurements_hash(m: &Measurements) -> String {
    let times = m.times.as_deref().unwrap_or(&[]);
    hash_rows([m.ys.as_slice(), times].into_iter())
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

/// A CSV file held as text cells under a header row.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Append the rows of `other`, which must have the same header.
    pub fn extend(&mut self, other: Table) -> Result<()> {
        if self.header.is_empty() && self.rows.is_empty() {
            *self = other;
            return Ok(());
        }
        if other.header != self.header {
            return Err(Error::invalid("tables have different headers"));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let k = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("column {name:?}: not a number: {v:?}")))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }
}

/// Draws in long format: `keys` columns, a `draw` index, then one column per name.
pub fn draws_table(keys: &[(&str, String)], names: &[String], draws: &[Vec<f64>]) -> Result<Table> {
    let mut t = Table::new(
        keys.iter()
            .map(|(k, _)| k.to_string())
            .chain(std::iter::once("draw".to_string()))
            .chain(names.iter().cloned()),
    );
    for (i, d) in draws.iter().enumerate() {
        let mut row: Vec<String> = keys.iter().map(|(_, v)| v.clone()).collect();
        row.push(i.to_string());
        row.extend(d.iter().map(|v| fmt_f64(*v)));
        t.push(row)?;
    }
    Ok(t)
}

/// Inverse of [`draws_table`] for the named columns.
pub fn read_draws(t: &Table, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let cols = names
        .iter()
        .map(|n| t.column_f64(n))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..t.len())
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect())
}

const SBC_COLUMNS: [&str; 9] = [
    "method",
    "t_trial",
    "i_trial",
    "dim",
    "omega_star",
    "rank",
    "k_eff",
    "rhat_max",
    "sharpness",
];

/// SBC records of one method, with a leading `method` column. A missing
/// `rhat_max` is an empty cell.
pub fn sbc_table(method: &str, records: &[SbcRecord]) -> Result<Table> {
    let mut t = Table::new(SBC_COLUMNS);
    for r in records {
        t.push(vec![
            method.to_string(),
            r.t_trial.to_string(),
            r.i_trial.to_string(),
            r.dim.to_string(),
            fmt_f64(r.omega_star),
            r.rank.to_string(),
            r.k_eff.to_string(),
            r.rhat_max.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.sharpness),
        ])?;
    }
    Ok(t)
}

/// Inverse of [`sbc_table`]: `(method, record)` pairs in row order.
pub fn read_sbc_table(t: &Table) -> Result<Vec<(String, SbcRecord)>> {
    if t.header != SBC_COLUMNS {
        return Err(Error::Parse(format!(
            "unexpected SBC header {:?}",
            t.header
        )));
    }
    let int = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| Error::Parse(format!("not a count: {v:?}")))
    };
    let float = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::Parse(format!("not a number: {v:?}")))
    };
    t.rows
        .iter()
        .map(|r| {
            Ok((
                r[0].clone(),
                SbcRecord {
                    t_trial: int(&r[1])?,
                    i_trial: int(&r[2])?,
                    dim: int(&r[3])?,
                    omega_star: float(&r[4])?,
                    rank: int(&r[5])?,
                    k_eff: int(&r[6])?,
                    rhat_max: if r[7].is_empty() {
                        None
                    } else {
                        Some(float(&r[7])?)
                    },
                    sharpness: float(&r[8])?,
                },
            ))
        })
        .collect()
}

pub fn write_sbc_records<W: Write>(records: &[SbcRecord], out: W) -> Result<()> {
    write_records(records, out)
}

pub fn read_sbc_records<R: Read>(input: R) -> Result<Vec<SbcRecord>> {
    read_records(input)
}

/// Serialize flat records with a header row.
pub fn write_records<T: Serialize, W: Write>(records: &[T], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(input)?)
}
