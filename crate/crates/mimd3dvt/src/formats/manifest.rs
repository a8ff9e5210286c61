//! JSON-lines subject manifest, one visit per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mimd_core::data::{Cdr, Gender, SubjectRecord};
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectLine {
    pub subject_id: String,
    pub visit_date: String,
    pub age: f64,
    pub mmse: u32,
    pub gender: String,
    pub cdr: f64,
    pub volume: String,
    pub rois: BTreeMap<String, String>,
}

impl From<&SubjectRecord> for SubjectLine {
    fn from(r: &SubjectRecord) -> Self {
        Self {
            subject_id: r.subject_id.clone(),
            visit_date: r.visit_date.to_string(),
            age: r.age,
            mmse: r.mmse,
            gender: r.gender.as_str().to_string(),
            cdr: r.cdr.value(),
            volume: r.volume_path.clone(),
            rois: r.roi_masks.clone(),
        }
    }
}

impl TryFrom<SubjectLine> for SubjectRecord {
    type Error = mimd_core::Error;

    fn try_from(l: SubjectLine) -> mimd_core::Result<Self> {
        let record = SubjectRecord {
            visit_date: l.visit_date.parse()?,
            gender: l.gender.parse::<Gender>()?,
            cdr: Cdr::from_f64(l.cdr)?,
            subject_id: l.subject_id,
            age: l.age,
            mmse: l.mmse,
            volume_path: l.volume,
            roi_masks: l.rois,
        };
        record.validate()?;
        Ok(record)
    }
}

pub fn to_string(records: &[SubjectRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&SubjectLine::from(r)).expect("serializable line"));
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> std::result::Result<Vec<SubjectRecord>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line: SubjectLine =
                serde_json::from_str(l).map_err(|e| FormatError::Invalid(format!("line {}: {e}", i + 1)))?;
            SubjectRecord::try_from(line).map_err(|e| FormatError::Invalid(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<SubjectRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(Error::format(path))
}

pub fn save(records: &[SubjectRecord], path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path, to_string(records).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let text = "{\"subject_id\":\"s1\",\"visit_date\":\"2020-03-04\",\"age\":71.5,\"mmse\":29,\"gender\":\"F\",\"cdr\":0.0,\"volume\":\"v.miv\",\"rois\":{\"fornix_left\":\"m.miv\"}}\n";
        let records = parse(text).unwrap();
        assert_eq!(records[0].subject_id, "s1");
        assert_eq!(to_string(&records), text);
        assert!(parse(&text.replace("\"F\"", "\"X\"")).is_err());
        assert!(parse(&text.replace("0.0", "0.7")).is_err());
        assert!(parse("{}").is_err());
    }
}
