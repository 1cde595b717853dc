use std::collections::HashSet;
use std::path::Path;

use crate::corpus::normalize_descriptor;
use crate::error::{Error, Result};

pub const RATING_MIN: f64 = 0.0;
pub const RATING_MAX: f64 = 100.0;

/// Molecules x descriptors ratings in `[0, 100]`; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    molecules: Vec<String>,
    descriptors: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

impl RatingTable {
    pub fn new(
        molecules: Vec<String>,
        descriptors: Vec<String>,
        values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let descriptors: Vec<String> = descriptors
            .iter()
            .map(|d| normalize_descriptor(d))
            .collect();
        let mut seen = HashSet::new();
        for d in &descriptors {
            if d.is_empty() {
                return Err(Error::Schema("empty descriptor name".into()));
            }
            if !seen.insert(d.as_str()) {
                return Err(Error::Schema(format!("duplicate descriptor {d:?}")));
            }
        }
        let mut seen = HashSet::new();
        for m in &molecules {
            if m.is_empty() {
                return Err(Error::Schema("empty molecule id".into()));
            }
            if !seen.insert(m.as_str()) {
                return Err(Error::Schema(format!("duplicate molecule id {m:?}")));
            }
        }
        if values.len() != molecules.len() {
            return Err(Error::Schema(format!(
                "{} rating rows for {} molecules",
                values.len(),
                molecules.len()
            )));
        }
        for (m, row) in molecules.iter().zip(&values) {
            if row.len() != descriptors.len() {
                return Err(Error::Schema(format!(
                    "molecule {m:?} has {} ratings for {} descriptors",
                    row.len(),
                    descriptors.len()
                )));
            }
            for (d, v) in descriptors.iter().zip(row) {
                if let Some(v) = v {
                    check_range(*v, m, d)?;
                }
            }
        }
        Ok(Self {
            molecules,
            descriptors,
            values,
        })
    }

    /// CSV with header `molecule,<descriptor>,...`; an empty cell is missing.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file, &path.display().to_string())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::read(text.as_bytes(), "<memory>")
    }

    fn read<R: std::io::Read>(reader: R, origin: &str) -> Result<Self> {
        let schema = |msg: String| Error::Schema(format!("{origin}: {msg}"));
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| schema(e.to_string()))?.clone();
        let mut cols = header.iter();
        if cols.next() != Some("molecule") {
            return Err(schema("first column must be `molecule`".into()));
        }
        let descriptors: Vec<String> = cols.map(str::to_string).collect();
        if descriptors.is_empty() {
            return Err(schema("no descriptor columns".into()));
        }
        let mut molecules = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| schema(e.to_string()))?;
            let id = rec.get(0).unwrap_or_default().to_string();
            let row = rec
                .iter()
                .skip(1)
                .zip(&descriptors)
                .map(|(cell, d)| {
                    if cell.is_empty() {
                        return Ok(None);
                    }
                    let v: f64 = cell.parse().map_err(|_| {
                        schema(format!(
                            "molecule {id:?}, descriptor {d:?}: not a number: {cell:?}"
                        ))
                    })?;
                    check_range(v, &id, d).map_err(|e| schema(e.to_string()))?;
                    Ok(Some(v))
                })
                .collect::<Result<Vec<_>>>()?;
            molecules.push(id);
            values.push(row);
        }
        Self::new(molecules, descriptors, values).map_err(|e| schema(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["molecule".to_string()];
        header.extend(self.descriptors.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (m, row) in self.molecules.iter().zip(&self.values) {
            let mut rec = vec![m.clone()];
            rec.extend(
                row.iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn molecules(&self) -> &[String] {
        &self.molecules
    }

    pub fn descriptors(&self) -> &[String] {
        &self.descriptors
    }

    pub fn row(&self, molecule_index: usize) -> &[Option<f64>] {
        &self.values[molecule_index]
    }

    pub fn get(&self, molecule_index: usize, descriptor_index: usize) -> Option<f64> {
        self.values[molecule_index][descriptor_index]
    }

    pub fn molecule_index(&self, id: &str) -> Option<usize> {
        self.molecules.iter().position(|m| m == id)
    }

    /// Rows rearranged to follow `order`, which must be a permutation of the
    /// molecule ids.
    pub fn reorder_molecules(&self, order: &[String]) -> Result<Self> {
        let values = order
            .iter()
            .map(|id| {
                self.molecule_index(id)
                    .map(|i| self.values[i].clone())
                    .ok_or_else(|| Error::Schema(format!("molecule {id:?} missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order.to_vec(), self.descriptors.clone(), values)
    }
}

fn check_range(v: f64, molecule: &str, descriptor: &str) -> Result<()> {
    if !(RATING_MIN..=RATING_MAX).contains(&v) {
        return Err(Error::Schema(format!(
            "rating {v} for molecule {molecule:?}, descriptor {descriptor:?} is outside [0, 100]"
        )));
    }
    Ok(())
}
