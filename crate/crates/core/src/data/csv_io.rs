//! CSV ingestion and emission.
//!
//! Canonical layout: `user_id,item_id,timestamp,duration,watch_time,like,comment,follow[,feat_*]`.
//! Feature columns are categorical when listed in [`ColumnMap::categorical`] or
//! when any of their cells fails to parse as a number; otherwise numeric.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{Dataset, FeatureSchema, Features, InteractionRecord, EXPLICIT_NAMES, N_EXPLICIT};
use crate::error::{Error, Result};

/// Maps logical record fields to CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: String,
    pub duration: String,
    pub watch_time: String,
    pub explicit: [String; N_EXPLICIT],
    /// Columns starting with this prefix are side features.
    pub feature_prefix: String,
    /// Feature columns forced to categorical.
    pub categorical: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            user_id: "user_id".into(),
            item_id: "item_id".into(),
            timestamp: "timestamp".into(),
            duration: "duration".into(),
            watch_time: "watch_time".into(),
            explicit: EXPLICIT_NAMES.map(String::from),
            feature_prefix: "feat_".into(),
            categorical: Vec::new(),
        }
    }
}

pub fn load_interactions(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_interactions(file, columns)
}

pub fn read_interactions<R: Read>(reader: R, columns: &ColumnMap) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let user_col = find(&columns.user_id)?;
    let item_col = find(&columns.item_id)?;
    let ts_col = find(&columns.timestamp)?;
    let dur_col = find(&columns.duration)?;
    let wt_col = find(&columns.watch_time)?;
    let mut explicit_cols = [0usize; N_EXPLICIT];
    for (slot, name) in explicit_cols.iter_mut().zip(columns.explicit.iter()) {
        *slot = find(name)?;
    }
    let feature_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with(&columns.feature_prefix))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;

    // Decide feature kinds before parsing any row.
    let mut cat_cols = Vec::new();
    let mut num_cols = Vec::new();
    for (idx, name) in &feature_cols {
        let forced = columns.categorical.iter().any(|c| c == name);
        let non_numeric = rows
            .iter()
            .any(|r| r.get(*idx).is_some_and(|v| v.parse::<f64>().is_err()));
        if forced || non_numeric {
            cat_cols.push((*idx, name.clone()));
        } else {
            num_cols.push((*idx, name.clone()));
        }
    }

    let mut records = Vec::with_capacity(rows.len());
    let mut seen = HashSet::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row_no = i + 1;
        let cell = |col: usize, name: &str| -> Result<&str> {
            row.get(col).ok_or_else(|| Error::Parse {
                row: row_no,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let user_id = parse_cell::<u64>(cell(user_col, &columns.user_id)?, row_no, &columns.user_id)?;
        let item_id = parse_cell::<u64>(cell(item_col, &columns.item_id)?, row_no, &columns.item_id)?;
        let timestamp = parse_cell::<i64>(cell(ts_col, &columns.timestamp)?, row_no, &columns.timestamp)?;
        let duration = parse_cell::<f64>(cell(dur_col, &columns.duration)?, row_no, &columns.duration)?;
        let watch_time = parse_cell::<f64>(cell(wt_col, &columns.watch_time)?, row_no, &columns.watch_time)?;
        let mut explicit = [0u8; N_EXPLICIT];
        for (j, col) in explicit_cols.iter().enumerate() {
            let name = &columns.explicit[j];
            explicit[j] = parse_cell::<u8>(cell(*col, name)?, row_no, name)?;
        }
        let categorical = cat_cols
            .iter()
            .map(|(c, name)| cell(*c, name).map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        let numeric = num_cols
            .iter()
            .map(|(c, name)| parse_cell::<f64>(cell(*c, name)?, row_no, name))
            .collect::<Result<Vec<_>>>()?;

        let record = InteractionRecord {
            user_id,
            item_id,
            timestamp,
            duration,
            watch_time,
            explicit,
            features: Features { categorical, numeric },
        };
        record
            .check()
            .map_err(|reason| Error::Validation { row: row_no, reason })?;
        if !seen.insert((user_id, item_id, timestamp)) {
            return Err(Error::Validation {
                row: row_no,
                reason: format!("duplicate (user_id, item_id, timestamp) = ({user_id}, {item_id}, {timestamp})"),
            });
        }
        records.push(record);
    }

    Ok(Dataset {
        schema: FeatureSchema {
            categorical: cat_cols.into_iter().map(|(_, n)| n).collect(),
            numeric: num_cols.into_iter().map(|(_, n)| n).collect(),
        },
        records,
    })
}

fn parse_cell<T: std::str::FromStr>(value: &str, row: usize, column: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        value: value.to_string(),
    })
}

/// Writes records in the canonical layout. Floats use shortest round-trip formatting.
pub fn write_interactions<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["user_id", "item_id", "timestamp", "duration", "watch_time"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(EXPLICIT_NAMES.iter().map(|s| s.to_string()));
    header.extend(dataset.schema.categorical.iter().cloned());
    header.extend(dataset.schema.numeric.iter().cloned());
    wtr.write_record(&header)?;
    for r in &dataset.records {
        let mut row = vec![
            r.user_id.to_string(),
            r.item_id.to_string(),
            r.timestamp.to_string(),
            r.duration.to_string(),
            r.watch_time.to_string(),
        ];
        row.extend(r.explicit.iter().map(|f| f.to_string()));
        row.extend(r.features.categorical.iter().cloned());
        row.extend(r.features.numeric.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_interactions(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_interactions(file, dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "user_id,item_id,timestamp,duration,watch_time,like,comment,follow";

    fn read(body: &str) -> Result<Dataset> {
        read_interactions(body.as_bytes(), &ColumnMap::default())
    }

    #[test]
    fn single_row_maps_fields() {
        let ds = read(&format!("{HEADER}\n1,1,100,60,15,1,0,0\n")).unwrap();
        assert_eq!(ds.len(), 1);
        let r = &ds.records[0];
        assert_eq!((r.user_id, r.item_id, r.timestamp), (1, 1, 100));
        assert_eq!(r.duration, 60.0);
        assert_eq!(r.watch_time, 15.0);
        assert_eq!(r.explicit, [1, 0, 0]);
    }

    #[test]
    fn zero_duration_is_rejected() {
        let err = read(&format!("{HEADER}\n1,1,100,0,15,1,0,0\n")).unwrap_err();
        assert!(matches!(err, Error::Validation { row: 1, .. }), "{err}");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = read("user_id,item_id,timestamp,duration,like,comment,follow\n1,1,1,1,0,0,0\n").unwrap_err();
        assert!(matches!(err, Error::Schema(ref c) if c == "watch_time"), "{err}");
    }

    #[test]
    fn non_numeric_watch_time_reports_row() {
        let err = read(&format!("{HEADER}\n1,1,100,60,15,0,0,0\n1,2,101,60,abc,0,0,0\n")).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "watch_time");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_flag_and_duplicates_rejected() {
        assert!(read(&format!("{HEADER}\n1,1,100,60,15,2,0,0\n")).is_err());
        let dup = format!("{HEADER}\n1,1,100,60,15,0,0,0\n1,1,100,30,5,0,0,0\n");
        assert!(matches!(read(&dup).unwrap_err(), Error::Validation { row: 2, .. }));
    }

    #[test]
    fn rewatch_is_not_clamped() {
        let ds = read(&format!("{HEADER}\n1,1,100,60,150,0,0,0\n")).unwrap();
        assert_eq!(ds.records[0].watch_time, 150.0);
    }

    #[test]
    fn feature_kinds_detected_and_round_trip() {
        let body =
            format!("{HEADER},feat_tag,feat_score\n1,1,100,60,15,0,0,1,tag3,0.25\n2,1,101,60.5,0.125,0,1,0,tag1,1\n");
        let ds = read(&body).unwrap();
        assert_eq!(ds.schema.categorical, vec!["feat_tag"]);
        assert_eq!(ds.schema.numeric, vec!["feat_score"]);
        assert_eq!(ds.records[1].features.numeric, vec![1.0]);
        let mut out = Vec::new();
        write_interactions(&mut out, &ds).unwrap();
        let back = read_interactions(out.as_slice(), &ColumnMap::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn forced_categorical_column() {
        let cols = ColumnMap {
            categorical: vec!["feat_city".into()],
            ..ColumnMap::default()
        };
        let body = format!("{HEADER},feat_city\n1,1,100,60,15,0,0,0,17\n");
        let ds = read_interactions(body.as_bytes(), &cols).unwrap();
        assert_eq!(ds.records[0].features.categorical, vec!["17"]);
    }
}
