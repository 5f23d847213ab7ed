use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Id,
    Coordinate,
    Response,
    Covariate,
    /// Categorical column expanded into dummy covariates at ingestion.
    DummySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    U,
    V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Column names and roles of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub version: u32,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema version {}",
                self.version
            )));
        }
        let mut names = HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("column `{}` listed twice", c.name)));
            }
            if c.role == ColumnRole::Coordinate && c.axis.is_none() {
                return Err(Error::Schema(format!(
                    "coordinate column `{}` needs an axis",
                    c.name
                )));
            }
        }
        let count = |role| self.columns.iter().filter(|c| c.role == role).count();
        if count(ColumnRole::Response) != 1 {
            return Err(Error::Schema("exactly one response column is required".into()));
        }
        if count(ColumnRole::Id) > 1 {
            return Err(Error::Schema("at most one id column is allowed".into()));
        }
        for axis in [Axis::U, Axis::V] {
            let n = self
                .columns
                .iter()
                .filter(|c| c.role == ColumnRole::Coordinate && c.axis == Some(axis))
                .count();
            if n != 1 {
                return Err(Error::Schema(format!(
                    "exactly one coordinate column with axis {axis:?} is required"
                )));
            }
        }
        Ok(())
    }

    pub fn id_column(&self) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.role == ColumnRole::Id)
    }

    pub fn coordinate_column(&self, axis: Axis) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Coordinate && c.axis == Some(axis))
            .expect("validated schema has both coordinate axes")
    }

    pub fn response_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Response)
            .expect("validated schema has a response")
    }

    pub fn with_role(&self, role: ColumnRole) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| c.role == role)
    }

    /// Layout written by the synthetic generator.
    pub fn synthetic(covariates: &[String], categorical: &[String]) -> Self {
        let mut columns = vec![
            ColumnSpec {
                name: "id".into(),
                role: ColumnRole::Id,
                axis: None,
                unit: None,
            },
            ColumnSpec {
                name: "u".into(),
                role: ColumnRole::Coordinate,
                axis: Some(Axis::U),
                unit: Some("m".into()),
            },
            ColumnSpec {
                name: "v".into(),
                role: ColumnRole::Coordinate,
                axis: Some(Axis::V),
                unit: Some("m".into()),
            },
            ColumnSpec {
                name: "price".into(),
                role: ColumnRole::Response,
                axis: None,
                unit: Some("10k NTD".into()),
            },
        ];
        columns.extend(covariates.iter().map(|name| ColumnSpec {
            name: name.clone(),
            role: ColumnRole::Covariate,
            axis: None,
            unit: Some(unit_for(name).into()),
        }));
        columns.extend(categorical.iter().map(|name| ColumnSpec {
            name: name.clone(),
            role: ColumnRole::DummySource,
            axis: None,
            unit: None,
        }));
        Self {
            version: SCHEMA_VERSION,
            columns,
        }
    }
}

fn unit_for(name: &str) -> &'static str {
    match name {
        "floor_area" => "m2",
        "house_age" => "years",
        n if n.starts_with("dist_") => "m",
        _ => "1",
    }
}
