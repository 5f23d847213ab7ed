//! Several named datasets run through the same comparison, summarized one
//! row per case.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::compare::{run_comparison, ComparisonConfig, ComparisonReport, ErrorInfo};
use super::model::ModelKind;
use crate::data::{load_csv, Schema};
use crate::error::{Error, Result};

pub const BATCH_FORMAT: &str = "cwr-batch";
pub const BATCH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchCase {
    pub name: String,
    /// CSV path, relative to the manifest when not absolute.
    pub data: PathBuf,
    pub schema: PathBuf,
    /// Keys overriding the manifest defaults for this case.
    #[serde(default)]
    pub config: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchManifest {
    /// Comparison settings shared by every case.
    #[serde(default)]
    pub defaults: Option<Value>,
    pub cases: Vec<BatchCase>,
}

impl BatchManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Effective configuration of one case.
    pub fn config_for(&self, case: &BatchCase) -> Result<ComparisonConfig> {
        let mut merged = serde_json::Map::new();
        for layer in [&self.defaults, &case.config].into_iter().flatten() {
            match layer {
                Value::Object(m) => merged.extend(m.clone()),
                _ => return Err(Error::Input(format!("configuration of case `{}` is not an object", case.name))),
            }
        }
        Ok(serde_json::from_value(Value::Object(merged))?)
    }
}

/// One summary row: test RMSE per model and the improvements of CWR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub case: String,
    pub records: Option<usize>,
    pub ols: Option<f64>,
    pub gwr: Option<f64>,
    pub cwr: Option<f64>,
    pub lsboost: Option<f64>,
    pub cwr_vs_ols: Option<f64>,
    pub cwr_vs_gwr: Option<f64>,
    pub cwr_vs_lsboost: Option<f64>,
    pub cwr_rate: Option<f64>,
    pub error: Option<ErrorInfo>,
}

impl BatchRow {
    fn from_report(case: &str, r: &ComparisonReport) -> Self {
        Self {
            case: case.into(),
            records: Some(r.records),
            ols: r.test_rmse(ModelKind::Ols),
            gwr: r.test_rmse(ModelKind::Gwr),
            cwr: r.test_rmse(ModelKind::Cwr),
            lsboost: r.test_rmse(ModelKind::Lsboost),
            cwr_vs_ols: r.improvement(ModelKind::Cwr, ModelKind::Ols),
            cwr_vs_gwr: r.improvement(ModelKind::Cwr, ModelKind::Gwr),
            cwr_vs_lsboost: r.improvement(ModelKind::Cwr, ModelKind::Lsboost),
            cwr_rate: r.outcome(ModelKind::Cwr).and_then(|o| o.rate),
            error: None,
        }
    }

    fn failed(case: &str, e: &Error) -> Self {
        Self {
            case: case.into(),
            records: None,
            ols: None,
            gwr: None,
            cwr: None,
            lsboost: None,
            cwr_vs_ols: None,
            cwr_vs_gwr: None,
            cwr_vs_lsboost: None,
            cwr_rate: None,
            error: Some(ErrorInfo::from(e)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub format: String,
    pub version: u32,
    pub summary: Vec<BatchRow>,
    pub reports: BTreeMap<String, ComparisonReport>,
}

impl BatchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "case",
            "records",
            "ols",
            "gwr",
            "cwr",
            "lsboost",
            "cwr_vs_ols",
            "cwr_vs_gwr",
            "cwr_vs_lsboost",
            "cwr_rate",
            "error",
        ])?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.summary {
            wtr.write_record([
                r.case.clone(),
                r.records.map(|n| n.to_string()).unwrap_or_default(),
                cell(r.ols),
                cell(r.gwr),
                cell(r.cwr),
                cell(r.lsboost),
                cell(r.cwr_vs_ols),
                cell(r.cwr_vs_gwr),
                cell(r.cwr_vs_lsboost),
                cell(r.cwr_rate),
                r.error.as_ref().map(|e| e.message.clone()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn run_case(manifest: &BatchManifest, case: &BatchCase, base: &Path) -> Result<ComparisonReport> {
    let config = manifest.config_for(case)?;
    let schema = Schema::load(resolve(base, &case.schema))?;
    let (table, _) = load_csv(resolve(base, &case.data), &schema)?;
    run_comparison(&table, &config)
}

/// Run every case; a failing case is reported in its summary row without
/// stopping the others. Relative paths resolve against `base_dir`.
pub fn run_batch(manifest: &BatchManifest, base_dir: impl AsRef<Path>) -> Result<BatchReport> {
    let base = base_dir.as_ref();
    let mut seen = HashSet::new();
    for case in &manifest.cases {
        if !seen.insert(case.name.as_str()) {
            return Err(Error::Input(format!("case `{}` appears twice in the manifest", case.name)));
        }
    }
    if manifest.cases.is_empty() {
        return Err(Error::Input("manifest lists no cases".into()));
    }
    let results: Vec<_> = manifest
        .cases
        .par_iter()
        .map(|case| run_case(manifest, case, base))
        .collect();
    let mut summary = Vec::new();
    let mut reports = BTreeMap::new();
    for (case, result) in manifest.cases.iter().zip(results) {
        match result {
            Ok(r) => {
                summary.push(BatchRow::from_report(&case.name, &r));
                reports.insert(case.name.clone(), r);
            }
            Err(e) => summary.push(BatchRow::failed(&case.name, &e)),
        }
    }
    Ok(BatchReport {
        format: BATCH_FORMAT.into(),
        version: BATCH_VERSION,
        summary,
        reports,
    })
}
