//! Instance CSV: `subject_id,class,roi,slice_start,slice_count,cx,cy`, where
//! `cx` is the crop-centre column and `cy` its row.

use std::path::Path;

use mimd_core::data::InstanceRecord;
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Row {
    subject_id: String,
    class: String,
    roi: String,
    slice_start: usize,
    slice_count: usize,
    cx: usize,
    cy: usize,
}

pub fn to_string(rows: &[InstanceRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(Row {
            subject_id: r.subject_id.clone(),
            class: r.class.as_str().to_string(),
            roi: r.roi.clone(),
            slice_start: r.slice_start,
            slice_count: r.slice_count,
            cx: r.centroid.1,
            cy: r.centroid.0,
        })
        .expect("in-memory CSV write");
    }
    if rows.is_empty() {
        w.write_record(["subject_id", "class", "roi", "slice_start", "slice_count", "cx", "cy"])
            .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("UTF-8 CSV")
}

pub fn parse(text: &str) -> std::result::Result<Vec<InstanceRecord>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| FormatError::Invalid(format!("row {}: {e}", i + 1)))?;
            Ok(InstanceRecord {
                class: row
                    .class
                    .parse()
                    .map_err(|e: mimd_core::Error| FormatError::Invalid(format!("row {}: {e}", i + 1)))?,
                subject_id: row.subject_id,
                roi: row.roi,
                slice_start: row.slice_start,
                slice_count: row.slice_count,
                centroid: (row.cy, row.cx),
            })
        })
        .collect()
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<InstanceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(Error::format(path))
}

pub fn save(rows: &[InstanceRecord], path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path, to_string(rows).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mimd_core::data::Class;

    #[test]
    fn round_trip() {
        let rows = vec![InstanceRecord {
            subject_id: "sub-0001".into(),
            class: Class::Ad,
            roi: "hippocampus_left".into(),
            slice_start: 3,
            slice_count: 25,
            centroid: (17, 21),
        }];
        let text = to_string(&rows);
        assert_eq!(
            text,
            "subject_id,class,roi,slice_start,slice_count,cx,cy\nsub-0001,AD,hippocampus_left,3,25,21,17\n"
        );
        assert_eq!(parse(&text).unwrap(), rows);
        assert!(parse(&text.replace("AD", "MCI")).is_err());
    }
}
