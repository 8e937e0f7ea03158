//! Tabular data: loading, encoding, splitting and grouping.

mod encode;
mod schema;
mod split;
mod synthetic;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode_features, ColumnEncoding, ColumnKind, Encoder, FeatureMatrix};
pub use schema::{DatasetSchema, FeatureKind, FeatureSpec, NaPolicy};
pub use split::{stratified_split, stratified_split_indices};
pub use synthetic::{default_logit_weights, generate_synthetic, LabelRule, SyntheticSpec};

/// Tokens treated as a missing cell.
pub const MISSING_TOKENS: &[&str] = &["", "NA", "?"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Num(f64),
    Cat(String),
}

impl RawValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            RawValue::Num(v) => Some(*v),
            RawValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            RawValue::Cat(s) => Some(s),
            RawValue::Num(_) => None,
        }
    }
}

/// Raw labelled records with binary target and binary group.
///
/// Row values follow `schema.features` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<u8>,
    pub groups: Vec<u8>,
    pub schema: DatasetSchema,
    /// Label text written for class 0 when the dataset is saved.
    pub negative_label: String,
}

/// Row counts dropped while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_missing: usize,
    pub dropped_unknown_group: usize,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<RawValue>>,
        labels: Vec<u8>,
        groups: Vec<u8>,
        schema: DatasetSchema,
    ) -> Result<Self> {
        schema.validate()?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() || rows.len() != groups.len() {
            return Err(Error::Input(format!(
                "rows/labels/groups lengths differ: {}/{}/{}",
                rows.len(),
                labels.len(),
                groups.len()
            )));
        }
        let d = schema.features.len();
        for (i, row) in rows.iter().enumerate() {
            check_row(i, row, &schema)?;
            debug_assert_eq!(row.len(), d);
        }
        if labels.iter().chain(groups.iter()).any(|&v| v > 1) {
            return Err(Error::Input("labels and groups must be 0 or 1".into()));
        }
        Ok(Self {
            rows,
            labels,
            groups,
            schema,
            negative_label: "0".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            schema: self.schema.clone(),
            negative_label: self.negative_label.clone(),
        }
    }

    /// Writes the dataset back out as CSV: features, sensitive column, target.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self
            .schema
            .features
            .iter()
            .map(|f| f.name.as_str())
            .collect();
        header.push(&self.schema.sensitive);
        header.push(&self.schema.target);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.rows[i]
                .iter()
                .map(|v| match v {
                    RawValue::Num(x) => format!("{x}"),
                    RawValue::Cat(s) => s.clone(),
                })
                .collect();
            rec.push(if self.groups[i] == 1 {
                self.schema.group1.clone()
            } else {
                self.schema.group0.clone()
            });
            rec.push(if self.labels[i] == 1 {
                self.schema.positive_label.clone()
            } else {
                self.negative_label.clone()
            });
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn check_row(i: usize, row: &[RawValue], schema: &DatasetSchema) -> Result<()> {
    if row.len() != schema.features.len() {
        return Err(Error::Shape {
            expected: schema.features.len(),
            got: row.len(),
        });
    }
    for (v, f) in row.iter().zip(&schema.features) {
        let ok = match (v, f.kind) {
            (RawValue::Num(x), FeatureKind::Continuous) => x.is_finite(),
            (RawValue::Cat(_), FeatureKind::Categorical) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::Parse {
                row: i,
                column: f.name.clone(),
                message: "value does not match declared kind".into(),
            });
        }
    }
    Ok(())
}

/// Loads a CSV file under `schema`. See [`read_dataset`].
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<(Dataset, LoadReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), schema)
}

/// Reads a headered CSV.
///
/// Rows with a missing value in any used column are dropped, as are rows
/// whose sensitive value is neither `group0` nor `group1`; both are counted
/// in the returned [`LoadReport`].
pub fn read_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<(Dataset, LoadReport)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let target_col = col(&schema.target)?;
    let sensitive_col = col(&schema.sensitive)?;
    let feature_cols = schema
        .features
        .iter()
        .map(|f| col(&f.name))
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut negative_label: Option<String> = None;

    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let used = feature_cols
            .iter()
            .chain([&target_col, &sensitive_col])
            .map(|&c| record.get(c).unwrap_or(""));
        if used.clone().any(|v| MISSING_TOKENS.contains(&v)) {
            report.dropped_missing += 1;
            continue;
        }
        let group = match record.get(sensitive_col).unwrap_or("") {
            g if g == schema.group0 => 0,
            g if g == schema.group1 => 1,
            _ => {
                report.dropped_unknown_group += 1;
                continue;
            }
        };
        let target = record.get(target_col).unwrap_or("");
        let label = if target == schema.positive_label {
            1
        } else {
            negative_label.get_or_insert_with(|| target.to_string());
            0
        };
        let mut row = Vec::with_capacity(feature_cols.len());
        for (f, &c) in schema.features.iter().zip(&feature_cols) {
            let raw = record.get(c).unwrap_or("");
            row.push(match f.kind {
                FeatureKind::Continuous => {
                    let x: f64 = raw.parse().map_err(|_| Error::Parse {
                        row: line + 1,
                        column: f.name.clone(),
                        message: format!("`{raw}` is not a number"),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Parse {
                            row: line + 1,
                            column: f.name.clone(),
                            message: "non-finite value".into(),
                        });
                    }
                    RawValue::Num(x)
                }
                FeatureKind::Categorical => RawValue::Cat(raw.to_string()),
            });
        }
        rows.push(row);
        labels.push(label);
        groups.push(group);
    }
    if report.dropped_unknown_group > 0 {
        log::warn!(
            "dropped {} rows whose `{}` value is neither `{}` nor `{}`",
            report.dropped_unknown_group,
            schema.sensitive,
            schema.group0,
            schema.group1
        );
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut data = Dataset::new(rows, labels, groups, schema.clone())?;
    if let Some(neg) = negative_label {
        data.negative_label = neg;
    }
    Ok((data, report))
}

/// Test-set indices routed by sensitive value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSplit {
    pub d0: Vec<usize>,
    pub d1: Vec<usize>,
}

pub fn partition_by_group(test: &Dataset) -> Result<GroupSplit> {
    partition_groups(&test.groups)
}

pub fn partition_groups(groups: &[u8]) -> Result<GroupSplit> {
    if groups.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (d0, d1): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&i| groups[i] == 0);
    if d0.is_empty() || d1.is_empty() {
        return Err(Error::GroupCoverage(format!(
            "group sizes are {} and {}; both groups must be present",
            d0.len(),
            d1.len()
        )));
    }
    Ok(GroupSplit { d0, d1 })
}
