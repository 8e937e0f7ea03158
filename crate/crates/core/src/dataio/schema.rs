use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    #[default]
    DropRow,
}

/// Column roles for one tabular dataset.
///
/// `group0` is the majority value of the sensitive column and `group1` the
/// minority value. The sensitive column is never listed in `features`; set
/// `include_sensitive` to append it to the model inputs as a 0/1 indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub target: String,
    pub positive_label: String,
    pub sensitive: String,
    pub group0: String,
    pub group1: String,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub include_sensitive: bool,
    #[serde(default)]
    pub na_policy: NaPolicy,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if f.name == self.target {
                return Err(Error::Schema(format!(
                    "target column `{}` listed as a feature",
                    f.name
                )));
            }
            if f.name == self.sensitive {
                return Err(Error::Schema(format!(
                    "sensitive column `{}` listed as a feature (use include_sensitive)",
                    f.name
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        if self.target == self.sensitive {
            return Err(Error::Schema(
                "target and sensitive columns coincide".into(),
            ));
        }
        if self.group0 == self.group1 {
            return Err(Error::Schema(format!(
                "group0 and group1 are both `{}`",
                self.group0
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Self = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> DatasetSchema {
        DatasetSchema {
            target: "y".into(),
            positive_label: "good".into(),
            sensitive: "sex".into(),
            group0: "male".into(),
            group1: "female".into(),
            features: vec![FeatureSpec::continuous("age")],
            include_sensitive: false,
            na_policy: NaPolicy::DropRow,
        }
    }

    #[test]
    fn rejects_sensitive_as_feature() {
        let mut s = base();
        s.features.push(FeatureSpec::categorical("sex"));
        assert!(matches!(s.validate(), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_equal_groups() {
        let mut s = base();
        s.group1 = "male".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn parses_exact_keys() {
        let text = r#"
            target = "credit"
            positive_label = "good"
            sensitive = "sex"
            group0 = "male"
            group1 = "female"
            features = [
                { name = "age", kind = "continuous" },
                { name = "housing", kind = "categorical" },
            ]
        "#;
        let s = DatasetSchema::from_toml_str(text).unwrap();
        assert_eq!(s.features.len(), 2);
        assert_eq!(s.features[1].kind, FeatureKind::Categorical);
        assert!(!s.include_sensitive);
    }
}
