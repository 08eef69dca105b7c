//! Raw query logs: a CSV with a user column, a statement column and an
//! optional timestamp column. Row order is taken as chronological order.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

use super::canonical::parse_timestamp;
use super::RawLogEntry;

const USER_COLUMNS: [&str; 3] = ["user_id", "user", "owner"];
const TEXT_COLUMNS: [&str; 4] = ["statement", "query", "query_text", "sql"];

pub fn read_raw_log(path: impl AsRef<Path>) -> Result<Vec<RawLogEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw_log_from(file)
}

pub fn read_raw_log_from(reader: impl Read) -> Result<Vec<RawLogEntry>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
    };
    let user_col = find(&USER_COLUMNS).ok_or_else(|| Error::MalformedRow {
        row: 1,
        column: "user_id".into(),
        message: "missing user column".into(),
    })?;
    let text_col = find(&TEXT_COLUMNS).ok_or_else(|| Error::MalformedRow {
        row: 1,
        column: "statement".into(),
        message: "missing statement column".into(),
    })?;
    let ts_col = find(&["timestamp", "time"]);

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let text = rec.get(text_col).unwrap_or("");
        if text.trim().is_empty() {
            return Err(Error::MalformedRow {
                row,
                column: headers[text_col].to_string(),
                message: "empty statement".into(),
            });
        }
        let timestamp = match ts_col.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(parse_timestamp(s).ok_or_else(|| Error::MalformedRow {
                row,
                column: "timestamp".into(),
                message: format!("unparseable timestamp {s:?}"),
            })?),
            None => None,
        };
        out.push(RawLogEntry {
            user_id: rec.get(user_col).unwrap_or("").to_string(),
            statement_text: text.to_string(),
            ordinal: i,
            timestamp,
        });
    }
    Ok(out)
}
