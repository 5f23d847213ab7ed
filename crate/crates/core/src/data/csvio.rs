//! CSV ingestion and export.
//!
//! Input is UTF-8, comma-separated, with a header row naming the schema
//! columns. Rows with a missing or unparseable required value, or a repeated
//! id, are rejected and reported rather than aborting the load; if more than
//! half of the rows are rejected the whole load fails.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::schema::{Axis, ColumnRole, Schema};
use super::table::{dummy_encode, CategoricalColumn, ColumnKind, Covariate, ObservationTable};
use crate::distance::Coordinate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// 1-based data row number (the header is not counted).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IngestionReport {
    pub total_rows: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    /// Header columns not named by the schema.
    pub ignored_columns: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<(ObservationTable, IngestionReport)> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<(ObservationTable, IngestionReport)> {
    read_records(reader, schema, false).map(|(t, r, _)| (t, r))
}

/// Like [`read_csv`] but the response column may be absent, as in files of
/// locations to predict. The flag tells whether responses were read; when
/// not, the table's responses are zero.
pub fn read_query_csv<R: Read>(reader: R, schema: &Schema) -> Result<(ObservationTable, IngestionReport, bool)> {
    read_records(reader, schema, true)
}

pub fn load_query_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<(ObservationTable, IngestionReport, bool)> {
    read_query_csv(std::fs::File::open(path)?, schema)
}

fn read_records<R: Read>(
    reader: R,
    schema: &Schema,
    response_optional: bool,
) -> Result<(ObservationTable, IngestionReport, bool)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position: HashMap<&str, usize> =
        headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let response_name = schema.response_column().name.as_str();
    let has_response = position.contains_key(response_name);
    for col in &schema.columns {
        if response_optional && col.role == ColumnRole::Response {
            continue;
        }
        if !position.contains_key(col.name.as_str()) {
            return Err(Error::Schema(format!("missing required column `{}`", col.name)));
        }
    }
    let known: HashSet<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let ignored_columns = headers
        .iter()
        .filter(|h| !known.contains(h))
        .map(str::to_owned)
        .collect();

    let idx = |name: &str| position[name];
    let id_col = schema.id_column().map(|c| idx(&c.name));
    let u_col = idx(&schema.coordinate_column(Axis::U).name);
    let v_col = idx(&schema.coordinate_column(Axis::V).name);
    let y_col = has_response.then(|| idx(response_name));
    let numeric: Vec<(String, usize)> = schema
        .with_role(ColumnRole::Covariate)
        .map(|c| (c.name.clone(), idx(&c.name)))
        .collect();
    let categorical: Vec<(String, usize)> = schema
        .with_role(ColumnRole::DummySource)
        .map(|c| (c.name.clone(), idx(&c.name)))
        .collect();

    let mut report = IngestionReport {
        ignored_columns,
        ..Default::default()
    };
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut response = Vec::new();
    let mut num_values: Vec<Vec<f64>> = vec![Vec::new(); numeric.len()];
    let mut cat_values: Vec<Vec<String>> = vec![Vec::new(); categorical.len()];
    let mut seen = HashSet::new();

    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        report.total_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(Rejection {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let field = |col: usize, name: &str| -> std::result::Result<&str, String> {
            match record.get(col) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(format!("missing value in `{name}`")),
            }
        };
        let number = |col: usize, name: &str| -> std::result::Result<f64, String> {
            let s = field(col, name)?;
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(format!("unparseable number `{s}` in `{name}`")),
            }
        };
        let parsed = (|| -> std::result::Result<_, String> {
            let id = match id_col {
                Some(c) => field(c, "id")?.to_owned(),
                None => row.to_string(),
            };
            let u = number(u_col, &headers[u_col])?;
            let v = number(v_col, &headers[v_col])?;
            let y = match y_col {
                Some(c) => number(c, &headers[c])?,
                None => 0.0,
            };
            let nums = numeric
                .iter()
                .map(|(name, c)| number(*c, name))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let cats = categorical
                .iter()
                .map(|(name, c)| field(*c, name).map(str::to_owned))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((id, Coordinate::new(u, v), y, nums, cats))
        })();
        match parsed {
            Ok((id, c, y, nums, cats)) => {
                if !seen.insert(id.clone()) {
                    report.rejected.push(Rejection {
                        row,
                        reason: format!("duplicate id `{id}`"),
                    });
                    continue;
                }
                ids.push(id);
                coords.push(c);
                response.push(y);
                for (dst, x) in num_values.iter_mut().zip(nums) {
                    dst.push(x);
                }
                for (dst, s) in cat_values.iter_mut().zip(cats) {
                    dst.push(s);
                }
            }
            Err(reason) => report.rejected.push(Rejection { row, reason }),
        }
    }
    report.accepted = ids.len();

    if report.total_rows == 0 || report.accepted == 0 {
        return Err(Error::Ingestion("no valid data rows".into()));
    }
    if 2 * report.rejected.len() > report.total_rows {
        return Err(Error::Ingestion(format!(
            "{} of {} rows rejected; first: row {}: {}",
            report.rejected.len(),
            report.total_rows,
            report.rejected[0].row,
            report.rejected[0].reason
        )));
    }

    let mut covariates: Vec<Covariate> = numeric
        .into_iter()
        .zip(num_values)
        .map(|((name, _), values)| Covariate {
            name,
            kind: ColumnKind::Continuous,
            values,
        })
        .collect();
    let categorical: Vec<CategoricalColumn> = categorical
        .into_iter()
        .zip(cat_values)
        .map(|((name, _), values)| CategoricalColumn { name, values })
        .collect();
    for cat in &categorical {
        covariates.extend(dummy_encode(cat));
    }

    let table = ObservationTable {
        ids,
        coords,
        response,
        covariates,
        categorical,
    };
    table.validate()?;
    Ok((table, report, has_response))
}

pub fn write_csv(table: &ObservationTable, schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(table, schema, file)
}

/// Write the table in the schema's column order. Dummy covariates are
/// written back as their source categorical column.
pub fn write_csv_to<W: Write>(table: &ObservationTable, schema: &Schema, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(schema.columns.iter().map(|c| c.name.as_str()))?;
    for i in 0..table.len() {
        let mut record = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let cell = match col.role {
                ColumnRole::Id => table.ids[i].clone(),
                ColumnRole::Coordinate => match col.axis {
                    Some(Axis::U) => table.coords[i].u.to_string(),
                    _ => table.coords[i].v.to_string(),
                },
                ColumnRole::Response => table.response[i].to_string(),
                ColumnRole::Covariate => table
                    .covariate(&col.name)
                    .filter(|c| c.kind == ColumnKind::Continuous)
                    .ok_or_else(|| Error::Schema(format!("table lacks column `{}`", col.name)))?
                    .values[i]
                    .to_string(),
                ColumnRole::DummySource => table
                    .categorical
                    .iter()
                    .find(|c| c.name == col.name)
                    .ok_or_else(|| Error::Schema(format!("table lacks column `{}`", col.name)))?
                    .values[i]
                    .clone(),
            };
            record.push(cell);
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::synthetic(&["floor_area".into(), "house_age".into()], &["land_use".into()])
    }

    const GOOD: &str = "\
id,u,v,price,floor_area,house_age,land_use
a,10,20,1500.5,80,12,residential
b,30.5,40,2100,120,3,commercial
c,50,60,900,60,35,residential
";

    #[test]
    fn well_formed_file() {
        let (t, report) = read_csv(GOOD.as_bytes(), &schema()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(report.accepted, 3);
        assert!(report.rejected.is_empty());
        assert_eq!(t.coords[1], Coordinate::new(30.5, 40.0));
        assert_eq!(
            t.covariate_names(),
            vec!["floor_area", "house_age", "land_use=residential"]
        );
        assert_eq!(t.column("land_use=residential").unwrap(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn blank_price_rejected_with_row_number() {
        let text = GOOD.replace("b,30.5,40,2100,", "b,30.5,40,,");
        let (t, report) = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].row, 2);
        assert!(report.rejected[0].reason.contains("price"));
        assert_eq!(report.accepted + report.rejected.len(), report.total_rows);
    }

    #[test]
    fn unparseable_and_duplicate_rows() {
        let text = format!("{GOOD}d,1,1,abc,1,1,residential\na,1,1,5,1,1,residential\ne,1,1,5,1,1,residential\n");
        let (t, report) = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.len(), 4);
        let reasons: Vec<_> = report.rejected.iter().map(|r| r.row).collect();
        assert_eq!(reasons, vec![4, 5]);
    }

    #[test]
    fn too_many_rejections_is_fatal() {
        let text = "id,u,v,price,floor_area,house_age,land_use\na,1,1,,1,1,r\nb,1,1,x,1,1,r\nc,1,1,3,1,1,r\n";
        assert_eq!(read_csv(text.as_bytes(), &schema()).unwrap_err().kind(), "ingestion");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let text = "id,u,v,price,floor_area\na,1,1,1,1\n";
        assert_eq!(read_csv(text.as_bytes(), &schema()).unwrap_err().kind(), "schema");
    }

    #[test]
    fn round_trip() {
        let (t, _) = read_csv(GOOD.as_bytes(), &schema()).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&t, &schema(), &mut buf).unwrap();
        let (back, _) = read_csv(buf.as_slice(), &schema()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn query_file_without_response() {
        let text = "id,u,v,floor_area,house_age,land_use\nq1,5,6,70,10,residential\n";
        assert_eq!(read_csv(text.as_bytes(), &schema()).unwrap_err().kind(), "schema");
        let (t, _, has_response) = read_query_csv(text.as_bytes(), &schema()).unwrap();
        assert!(!has_response);
        assert_eq!(t.response, vec![0.0]);
        let (_, _, has_response) = read_query_csv(GOOD.as_bytes(), &schema()).unwrap();
        assert!(has_response);
    }

    #[test]
    fn ids_default_to_row_numbers() {
        let mut s = schema();
        s.columns.retain(|c| c.role != ColumnRole::Id);
        let (t, _) = read_csv(GOOD.as_bytes(), &s).unwrap();
        assert_eq!(t.ids, vec!["1", "2", "3"]);
    }
}
