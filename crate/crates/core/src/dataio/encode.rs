use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, RawValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Onehot,
}

/// Fitted transform for one source column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnEncoding {
    Standardize { mean: f64, std: f64 },
    OneHot { levels: Vec<String> },
}

/// Train-fitted one-hot + standardization encoder.
///
/// Categorical levels are the sorted set observed in the training rows.
/// Continuous columns use the population standard deviation; a constant
/// column keeps `std = 1` so it is only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    columns: Vec<ColumnEncoding>,
    /// Standardization for the appended sensitive indicator, if used.
    sensitive: Option<(f64, f64)>,
    feature_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
}

/// Dense encoded design matrix with its labels and groups.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub labels: Vec<u8>,
    pub groups: Vec<u8>,
    pub feature_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    /// `(mean, std)` for numeric columns, `None` for one-hot columns.
    pub standardization: Vec<Option<(f64, f64)>>,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).to_vec()
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.d())
            .map(|j| {
                let col = self.x.column(j);
                col.iter().sum::<f64>() / col.len() as f64
            })
            .collect()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

impl Encoder {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let schema = &train.schema;
        let mut columns = Vec::with_capacity(schema.features.len());
        let mut feature_names = Vec::new();
        let mut column_kinds = Vec::new();
        for (j, f) in schema.features.iter().enumerate() {
            match f.kind {
                FeatureKind::Continuous => {
                    let vals: Vec<f64> = train
                        .rows
                        .iter()
                        .map(|r| r[j].as_num().expect("validated continuous"))
                        .collect();
                    let (mean, std) = mean_std(&vals);
                    columns.push(ColumnEncoding::Standardize { mean, std });
                    feature_names.push(f.name.clone());
                    column_kinds.push(ColumnKind::Numeric);
                }
                FeatureKind::Categorical => {
                    let levels: BTreeSet<&str> = train
                        .rows
                        .iter()
                        .map(|r| r[j].as_cat().expect("validated categorical"))
                        .collect();
                    let levels: Vec<String> = levels.into_iter().map(str::to_string).collect();
                    for l in &levels {
                        feature_names.push(format!("{}={}", f.name, l));
                        column_kinds.push(ColumnKind::Onehot);
                    }
                    columns.push(ColumnEncoding::OneHot { levels });
                }
            }
        }
        let sensitive = if schema.include_sensitive {
            let vals: Vec<f64> = train.groups.iter().map(|&g| f64::from(g)).collect();
            feature_names.push(schema.sensitive.clone());
            column_kinds.push(ColumnKind::Numeric);
            Some(mean_std(&vals))
        } else {
            None
        };
        Ok(Self {
            columns,
            sensitive,
            feature_names,
            column_kinds,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn transform(&self, data: &Dataset) -> Result<FeatureMatrix> {
        if data.schema.features.len() != self.columns.len()
            || data.schema.include_sensitive != self.sensitive.is_some()
        {
            return Err(Error::Schema(
                "dataset schema differs from the fitted encoder".into(),
            ));
        }
        let d = self.dim();
        let mut x = Array2::<f64>::zeros((data.len(), d));
        for (i, row) in data.rows.iter().enumerate() {
            let mut out = x.row_mut(i);
            let mut c = 0;
            for (v, enc) in row.iter().zip(&self.columns) {
                match (enc, v) {
                    (ColumnEncoding::Standardize { mean, std }, RawValue::Num(val)) => {
                        out[c] = (val - mean) / std;
                        c += 1;
                    }
                    (ColumnEncoding::OneHot { levels }, RawValue::Cat(s)) => {
                        // unseen levels leave the block all zeros
                        if let Ok(k) = levels.binary_search(s) {
                            out[c + k] = 1.0;
                        }
                        c += levels.len();
                    }
                    _ => return Err(Error::Schema("value kind does not match encoder".into())),
                }
            }
            if let Some((mean, std)) = self.sensitive {
                out[c] = (f64::from(data.groups[i]) - mean) / std;
            }
        }
        let mut standardization = Vec::with_capacity(d);
        for enc in &self.columns {
            match enc {
                ColumnEncoding::Standardize { mean, std } => {
                    standardization.push(Some((*mean, *std)))
                }
                ColumnEncoding::OneHot { levels } => {
                    standardization.extend(std::iter::repeat_n(None, levels.len()))
                }
            }
        }
        if let Some(ms) = self.sensitive {
            standardization.push(Some(ms));
        }
        Ok(FeatureMatrix {
            x,
            labels: data.labels.clone(),
            groups: data.groups.clone(),
            feature_names: self.feature_names.clone(),
            column_kinds: self.column_kinds.clone(),
            standardization,
        })
    }
}

/// Fits the encoder on `train` and applies it to both sets.
pub fn encode_features(train: &Dataset, test: &Dataset) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if train.schema != test.schema {
        return Err(Error::Schema("train and test schemas differ".into()));
    }
    let enc = Encoder::fit(train)?;
    Ok((enc.transform(train)?, enc.transform(test)?))
}
