use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Word vectors read from the `.vec` text layout: a `<count> <dim>` header
/// followed by `<word> <v1> ... <vdim>` rows.
#[derive(Debug, Clone)]
pub struct VectorTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    duplicates: usize,
}

impl VectorTable {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), path)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes(), Path::new("<memory>"))
    }

    fn read<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header line".into()))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [c, d] => (
                c.parse::<usize>()
                    .map_err(|e| parse_err(1, format!("bad count: {e}")))?,
                d.parse::<usize>()
                    .map_err(|e| parse_err(1, format!("bad dimension: {e}")))?,
            ),
            _ => return Err(parse_err(1, "header must be `<count> <dim>`".into())),
        };
        if dim == 0 {
            return Err(parse_err(1, "dimension must be positive".into()));
        }

        let mut index = HashMap::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut duplicates = 0;
        let mut rows = 0;
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("nonblank line has a field");
            let values: Vec<f64> = parts
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| parse_err(lineno, format!("bad value {v:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(parse_err(
                    lineno,
                    format!("expected {dim} values for {word:?}, found {}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(lineno, format!("non-finite value for {word:?}")));
            }
            rows += 1;
            if let Some(&slot) = index.get(word) {
                duplicates += 1;
                data[slot * dim..(slot + 1) * dim].copy_from_slice(&values);
            } else {
                index.insert(word.to_string(), index.len());
                data.extend_from_slice(&values);
            }
        }
        if rows != count {
            return Err(parse_err(
                1,
                format!("header declares {count} rows, file has {rows}"),
            ));
        }
        if duplicates > 0 {
            log::warn!(
                "{}: {duplicates} duplicate words, last occurrence kept",
                path.display()
            );
        }
        Ok(Self {
            dim,
            index,
            data,
            duplicates,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Rows that repeated an earlier word and overwrote it.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

/// Write labeled rows in the `.vec` text layout.
pub fn write_vec_format(labels: &[String], rows: &[Vec<f64>]) -> String {
    use std::fmt::Write as _;
    let dim = rows.first().map_or(0, Vec::len);
    let mut out = format!("{} {}\n", labels.len(), dim);
    for (label, row) in labels.iter().zip(rows) {
        out.push_str(&label.replace(' ', "_"));
        for v in row {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}
