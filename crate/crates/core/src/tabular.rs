//! In-memory relational tables with explicit missing cells.

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::Rule;

/// A cell is either a string value or missing.
pub type Cell = Option<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, c) in columns.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Csv {
                    row: 0,
                    message: format!("column {} has an empty name", i + 1),
                });
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Csv {
                    row: 0,
                    message: format!("duplicate column name {c:?}"),
                });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(Error::Csv {
                    row: i + 1,
                    message: format!("expected {} fields, found {}", columns.len(), r.len()),
                });
            }
        }
        Ok(Table {
            name: name.into(),
            columns,
            rows,
        })
    }

    /// Builds a table from string literals; empty strings become missing cells.
    pub fn from_strs(name: &str, columns: &[&str], rows: &[&[&str]]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| (!v.is_empty()).then(|| v.to_string()))
                    .collect()
            })
            .collect();
        Table::new(name, columns.iter().map(|c| c.to_string()).collect(), rows)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, attr: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == attr)
    }

    pub fn require_column(&self, attr: &str) -> Result<usize> {
        self.column_index(attr)
            .ok_or_else(|| Error::UnknownColumn(attr.to_string()))
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].as_deref()
    }

    pub fn value(&self, row: usize, attr: &str) -> Option<&str> {
        self.column_index(attr).and_then(|c| self.get(row, c))
    }

    pub fn set(&mut self, row: usize, col: usize, value: Cell) {
        self.rows[row][col] = value;
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn count_missing(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn from_reader<R: Read>(name: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Csv {
                row: 0,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv {
                row: i + 1,
                message: e.to_string(),
            })?;
            if rec.len() != header.len() {
                return Err(Error::Csv {
                    row: i + 1,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            rows.push(
                rec.iter()
                    .map(|f| (!f.is_empty()).then(|| f.to_string()))
                    .collect(),
            );
        }
        Table::new(name, header, rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::Csv {
            row: 0,
            message: e.to_string(),
        };
        wtr.write_record(&self.columns).map_err(to_err)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))
                .map_err(to_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("table cells are UTF-8")
    }
}

pub fn load_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Table::from_reader(&name, file)
}

pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    table.write_csv(std::io::BufWriter::new(file))
}

/// One masked cell and the value it held.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedCell {
    pub row: usize,
    pub attr: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskSpec {
    pub ratio: f64,
    pub seed: u64,
    #[serde(default)]
    pub protected_attrs: BTreeSet<String>,
}

impl MaskSpec {
    pub fn new(ratio: f64, seed: u64) -> Self {
        MaskSpec {
            ratio,
            seed,
            protected_attrs: BTreeSet::new(),
        }
    }

    pub fn protect<I, S>(mut self, attrs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.protected_attrs.extend(attrs.into_iter().map(Into::into));
        self
    }
}

/// Number of cells removed for a given ratio over `maskable` candidates.
pub fn mask_count(ratio: f64, maskable: usize) -> usize {
    // the epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    (ratio * maskable as f64 + 1e-9).floor() as usize
}

/// Removes `⌊ratio × maskable⌋` present cells outside the protected attributes.
///
/// Cells are visited in a seeded shuffle and accepted greedily. A cell is
/// skipped when removing it would leave its row without any non-protected
/// value, or would leave some masked cell of that row with no covering rule
/// that still has a present left-hand-side attribute.
pub fn mask_random(table: &Table, spec: &MaskSpec, rules: &[Rule]) -> Result<(Table, Vec<MaskedCell>)> {
    if !(0.0..=1.0).contains(&spec.ratio) {
        return Err(Error::Mask(format!("ratio {} outside [0, 1]", spec.ratio)));
    }
    let mut protected = vec![false; table.columns.len()];
    for attr in &spec.protected_attrs {
        let c = table
            .column_index(attr)
            .ok_or_else(|| Error::Mask(format!("protected attribute {attr:?} is not a column")))?;
        protected[c] = true;
    }

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if !protected[c] && cell.is_some() {
                candidates.push((r, c));
            }
        }
    }
    let target = mask_count(spec.ratio, candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    candidates.shuffle(&mut rng);

    // determinant column sets of the rules covering each column
    let covering: Vec<Vec<Vec<usize>>> = (0..table.columns.len())
        .map(|c| {
            rules
                .iter()
                .filter(|rule| rule.rhs.iter().any(|a| a == &table.columns[c]))
                .map(|rule| {
                    rule.lhs
                        .iter()
                        .filter_map(|a| table.column_index(a))
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut masked = table.clone();
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(target);
    let mut masked_in_row: Vec<Vec<usize>> = vec![Vec::new(); table.rows.len()];
    for (r, c) in candidates {
        if chosen.len() == target {
            break;
        }
        masked.rows[r][c] = None;
        let row = &masked.rows[r];
        let keeps_value = row
            .iter()
            .enumerate()
            .any(|(j, cell)| !protected[j] && cell.is_some());
        let imputable = masked_in_row[r].iter().chain(std::iter::once(&c)).all(|&m| {
            covering[m].is_empty()
                || covering[m]
                    .iter()
                    .any(|lhs| lhs.iter().any(|&j| row[j].is_some()))
        });
        if keeps_value && imputable {
            masked_in_row[r].push(c);
            chosen.push((r, c));
        } else {
            masked.rows[r][c] = table.rows[r][c].clone();
        }
    }
    if chosen.len() < target {
        return Err(Error::Mask(format!(
            "ratio {} requires {target} masked cells but only {} can be removed without \
             emptying a row or orphaning a masked cell",
            spec.ratio,
            chosen.len()
        )));
    }
    chosen.sort_unstable();
    let truth = chosen
        .into_iter()
        .map(|(r, c)| MaskedCell {
            row: r,
            attr: table.columns[c].clone(),
            value: table.rows[r][c].clone().expect("masked cells were present"),
        })
        .collect();
    Ok((masked, truth))
}

pub fn write_ground_truth(truth: &[MaskedCell], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(truth)?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<MaskedCell>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
