//! Delimited-text ingestion with presets for the four UCI tables used in the
//! experiments.
//!
//! Files are not fetched; download them from the UCI repository (URLs on each
//! [`Preset`]) or use the copies under `data/` in this repository.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    /// Any run of spaces or tabs.
    Whitespace,
    Char(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Last,
}

impl ColumnRef {
    fn resolve(self, arity: usize) -> usize {
        match self {
            ColumnRef::Index(i) => i,
            ColumnRef::Last => arity - 1,
        }
    }
}

/// Layout of a delimited data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSchema {
    pub delimiter: Delimiter,
    pub label_column: ColumnRef,
    /// Columns removed before parsing features (names, IDs).
    pub drop_columns: Vec<usize>,
    pub has_header: bool,
}

impl IngestSchema {
    fn check(&self, arity: usize) -> Result<usize> {
        let label = self.label_column.resolve(arity);
        if label >= arity {
            return Err(Error::Schema(format!(
                "label column {label} out of range for {arity} columns"
            )));
        }
        if self.drop_columns.contains(&label) {
            return Err(Error::Schema(format!(
                "label column {label} is also listed in drop_columns"
            )));
        }
        if let Some(&bad) = self.drop_columns.iter().find(|&&c| c >= arity) {
            return Err(Error::Schema(format!(
                "drop column {bad} out of range for {arity} columns"
            )));
        }
        if arity - 1 - self.drop_columns.len() == 0 {
            return Err(Error::Schema("no feature columns remain".into()));
        }
        Ok(label)
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self.delimiter {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
        }
    }
}

/// Reads a labeled point cloud from a delimited text file.
///
/// Blank lines are skipped. Every remaining row must have the same number of
/// fields as the first.
pub fn load_delimited(path: impl AsRef<Path>, schema: &IngestSchema) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_delimited(&text, schema, path)
}

pub(crate) fn parse_delimited(text: &str, schema: &IngestSchema, path: &Path) -> Result<PointCloud> {
    let mut arity = None;
    let mut label_idx = 0;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;

    let body = text.lines().enumerate().skip(usize::from(schema.has_header));
    for (lineno, line) in body {
        if line.trim().is_empty() {
            continue;
        }
        let fields = schema.split(line);
        let expected = match arity {
            Some(a) => a,
            None => {
                label_idx = schema.check(fields.len())?;
                dim = fields.len() - 1 - schema.drop_columns.len();
                arity = Some(fields.len());
                fields.len()
            }
        };
        if fields.len() != expected {
            return Err(Error::Schema(format!(
                "{}:{}: expected {expected} fields, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        for (col, field) in fields.iter().enumerate() {
            if col == label_idx || schema.drop_columns.contains(&col) {
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("column {col}: cannot parse '{field}' as a number"),
            })?;
            coords.push(value);
        }
        labels.push(fields[label_idx].to_string());
    }
    if arity.is_none() {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    PointCloud::from_flat(dim, coords, Some(labels))
}

/// The four UCI datasets with known layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Ecoli,
    PageBlocks,
    Shuttle,
    Glass,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Ecoli, Preset::PageBlocks, Preset::Shuttle, Preset::Glass];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Ecoli => "ecoli",
            Preset::PageBlocks => "pageblocks",
            Preset::Shuttle => "shuttle",
            Preset::Glass => "glass",
        }
    }

    pub fn schema(&self) -> IngestSchema {
        match self {
            // sequence name, 7 features, class
            Preset::Ecoli => IngestSchema {
                delimiter: Delimiter::Whitespace,
                label_column: ColumnRef::Last,
                drop_columns: vec![0],
                has_header: false,
            },
            // 10 features, class 1..5
            Preset::PageBlocks => IngestSchema {
                delimiter: Delimiter::Whitespace,
                label_column: ColumnRef::Last,
                drop_columns: vec![],
                has_header: false,
            },
            // 9 features, class 1..7
            Preset::Shuttle => IngestSchema {
                delimiter: Delimiter::Whitespace,
                label_column: ColumnRef::Last,
                drop_columns: vec![],
                has_header: false,
            },
            // id, 9 features, type 1..7
            Preset::Glass => IngestSchema {
                delimiter: Delimiter::Char(','),
                label_column: ColumnRef::Last,
                drop_columns: vec![0],
                has_header: false,
            },
        }
    }

    /// Label of the class treated as rare in the experiments.
    pub fn rare_label(&self) -> &'static str {
        match self {
            Preset::Ecoli => "om",
            // horizontal line
            Preset::PageBlocks => "2",
            // Fpv Close
            Preset::Shuttle => "2",
            // vehicle windows, float processed
            Preset::Glass => "3",
        }
    }

    /// Conventional file name of the data file.
    pub fn file_name(&self) -> &'static str {
        match self {
            Preset::Ecoli => "ecoli.data",
            Preset::PageBlocks => "page-blocks.data",
            Preset::Shuttle => "shuttle.data",
            Preset::Glass => "glass.data",
        }
    }

    pub fn url(&self) -> &'static str {
        match self {
            Preset::Ecoli => "https://archive.ics.uci.edu/ml/datasets/ecoli",
            Preset::PageBlocks => {
                "https://archive.ics.uci.edu/ml/datasets/Page+Blocks+Classification"
            }
            Preset::Shuttle => "https://archive.ics.uci.edu/ml/datasets/Statlog+(Shuttle)",
            Preset::Glass => "https://archive.ics.uci.edu/ml/datasets/glass+identification",
        }
    }

    pub fn load(&self, path: impl AsRef<Path>) -> Result<PointCloud> {
        load_delimited(path, &self.schema())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{s}', expected one of ecoli, pageblocks, shuttle, glass"
                ))
            })
    }
}
