//! The canonical CSV exchange format: one row per query, header row,
//! RFC-4180 quoting, columns in [`CANONICAL_COLUMNS`] order. Extra
//! `pred_<method>` columns are appended after the canonical ones.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::indexes::IndexVector;
use crate::label::Label;

use super::{QueryRecord, Session, Workload};

pub const CANONICAL_COLUMNS: [&str; 28] = [
    "query_id",
    "session_id",
    "user_id",
    "position",
    "query_text",
    "NoP",
    "NoS",
    "NoA",
    "NoT",
    "NoAt",
    "NoCh",
    "NCP",
    "NCS",
    "NCA",
    "NCT",
    "RED",
    "JI",
    "edit_index",
    "jaccard_index",
    "cos_index",
    "cf_index",
    "ct_index",
    "imputed",
    "ground_truth",
    "pred_vote",
    "pred_classifier",
    "pred_weak",
    "timestamp",
];

const FEATURE_COLUMNS: [&str; 12] = [
    "NoP", "NoS", "NoA", "NoT", "NoAt", "NoCh", "NCP", "NCS", "NCA", "NCT", "RED", "JI",
];
const INDEX_COLUMNS: [&str; 5] = ["edit_index", "jaccard_index", "cos_index", "cf_index", "ct_index"];
const CANONICAL_METHODS: [&str; 3] = ["vote", "classifier", "weak"];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub(crate) fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in [
        TIMESTAMP_FORMAT,
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.naive_utc())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Workload> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

pub fn write_csv(workload: &Workload, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(workload, std::io::BufWriter::new(file))
}

struct Columns {
    index: BTreeMap<String, usize>,
    extra_methods: Vec<(String, usize)>,
}

impl Columns {
    fn get<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> &'r str {
        self.index
            .get(name)
            .and_then(|&i| rec.get(i))
            .unwrap_or("")
    }
}

pub fn read_csv_from(reader: impl Read) -> Result<Workload> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = BTreeMap::new();
    let mut extra_methods = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if !CANONICAL_COLUMNS.contains(&h) {
            if let Some(method) = h.strip_prefix("pred_") {
                extra_methods.push((method.to_string(), i));
                continue;
            }
            log::warn!("ignoring unknown column {h:?}");
        }
        index.insert(h.to_string(), i);
    }
    for required in ["query_id", "session_id"] {
        if !index.contains_key(required) {
            return Err(Error::MalformedRow {
                row: 1,
                column: required.into(),
                message: "missing required column".into(),
            });
        }
    }
    let cols = Columns {
        index,
        extra_methods,
    };

    let mut sessions: Vec<Session> = Vec::new();
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let session_id = cols.get(&rec, "session_id").to_string();
        let slot = *by_id.entry(session_id.clone()).or_insert_with(|| {
            sessions.push(Session {
                session_id: session_id.clone(),
                user_id: cols.get(&rec, "user_id").to_string(),
                queries: Vec::new(),
            });
            sessions.len() - 1
        });
        let session = &mut sessions[slot];
        let record = parse_row(&rec, &cols, row, session.queries.len() + 1)?;
        session.queries.push(record);
    }

    for s in &mut sessions {
        s.queries.sort_by_key(|q| q.position);
        for (i, q) in s.queries.iter().enumerate() {
            if q.position != i + 1 {
                return Err(Error::MalformedRow {
                    row: 0,
                    column: "position".into(),
                    message: format!(
                        "session {} positions are not contiguous from 1 (query {})",
                        s.session_id, q.query_id
                    ),
                });
            }
        }
    }
    Ok(Workload { sessions })
}

fn malformed(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::MalformedRow {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

fn parse_int(row: usize, column: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| malformed(row, column, format!("expected a non-negative integer, got {s:?}")))
}

fn parse_float(row: usize, column: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| malformed(row, column, format!("expected a number, got {s:?}")))?;
    if !v.is_finite() {
        return Err(malformed(row, column, "non-finite value"));
    }
    Ok(v)
}

fn parse_label(row: usize, column: &str, s: &str) -> Result<Option<Label>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<Label>()
        .map(Some)
        .map_err(|_| malformed(row, column, format!("unknown label {s:?}")))
}

fn parse_row(
    rec: &csv::StringRecord,
    cols: &Columns,
    row: usize,
    default_position: usize,
) -> Result<QueryRecord> {
    let position = match cols.get(rec, "position") {
        "" => default_position,
        s => parse_int(row, "position", s)?,
    };
    if position == 0 {
        return Err(malformed(row, "position", "positions start at 1"));
    }
    let mut q = QueryRecord::new(cols.get(rec, "query_id"), position, cols.get(rec, "query_text"));

    let feature_cells: Vec<&str> = FEATURE_COLUMNS.iter().map(|c| cols.get(rec, c)).collect();
    if feature_cells.iter().all(|c| c.is_empty()) {
        if !cols.get(rec, "imputed").is_empty() {
            return Err(malformed(row, "imputed", "imputed flag without features"));
        }
    } else {
        let mut ints = [0usize; 11];
        for (k, column) in FEATURE_COLUMNS[..11].iter().enumerate() {
            if feature_cells[k].is_empty() {
                return Err(malformed(row, column, "missing feature value"));
            }
            ints[k] = parse_int(row, column, feature_cells[k])?;
        }
        if feature_cells[11].is_empty() {
            return Err(malformed(row, "JI", "missing feature value"));
        }
        let ji = parse_float(row, "JI", feature_cells[11])?;
        let imputed = match cols.get(rec, "imputed") {
            "" | "0" => false,
            "1" => true,
            other => return Err(malformed(row, "imputed", format!("expected 0 or 1, got {other:?}"))),
        };
        q.features = Some(FeatureVector {
            nop: ints[0],
            nos: ints[1],
            noa: ints[2],
            not: ints[3],
            noat: ints[4],
            noch: ints[5],
            ncp: ints[6],
            ncs: ints[7],
            nca: ints[8],
            nct: ints[9],
            red: ints[10],
            ji,
            imputed,
        });
    }

    let index_cells: Vec<&str> = INDEX_COLUMNS.iter().map(|c| cols.get(rec, c)).collect();
    if !index_cells.iter().all(|c| c.is_empty()) {
        let mut v = [0.0; 5];
        for (k, column) in INDEX_COLUMNS.iter().enumerate() {
            if index_cells[k].is_empty() {
                return Err(malformed(row, column, "missing index value"));
            }
            v[k] = parse_float(row, column, index_cells[k])?;
        }
        q.indexes = Some(IndexVector {
            edit: v[0],
            jaccard: v[1],
            cos: v[2],
            cf: v[3],
            ct: v[4],
        });
    }

    q.ground_truth = parse_label(row, "ground_truth", cols.get(rec, "ground_truth"))?;
    for method in CANONICAL_METHODS {
        let column = format!("pred_{method}");
        if let Some(l) = parse_label(row, &column, cols.get(rec, &column))? {
            q.predictions.insert(method.to_string(), l);
        }
    }
    for (method, i) in &cols.extra_methods {
        let column = format!("pred_{method}");
        if let Some(l) = parse_label(row, &column, rec.get(*i).unwrap_or(""))? {
            q.predictions.insert(method.clone(), l);
        }
    }
    q.timestamp = match cols.get(rec, "timestamp") {
        "" => None,
        s => Some(
            parse_timestamp(s)
                .ok_or_else(|| malformed(row, "timestamp", format!("unparseable timestamp {s:?}")))?,
        ),
    };
    Ok(q)
}

pub fn write_csv_to(workload: &Workload, writer: impl Write) -> Result<()> {
    let extra: Vec<String> = workload
        .queries()
        .flat_map(|q| q.predictions.keys())
        .filter(|m| !CANONICAL_METHODS.contains(&m.as_str()))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = CANONICAL_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(extra.iter().map(|m| format!("pred_{m}")));
    w.write_record(&header)?;

    let label = |l: Option<Label>| l.map(|l| l.as_str().to_string()).unwrap_or_default();
    for s in &workload.sessions {
        for q in &s.queries {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            row.push(q.query_id.clone());
            row.push(s.session_id.clone());
            row.push(s.user_id.clone());
            row.push(q.position.to_string());
            row.push(q.text.clone());
            match &q.features {
                Some(f) => {
                    for v in [
                        f.nop, f.nos, f.noa, f.not, f.noat, f.noch, f.ncp, f.ncs, f.nca, f.nct,
                        f.red,
                    ] {
                        row.push(v.to_string());
                    }
                    row.push(f.ji.to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 12)),
            }
            match &q.indexes {
                Some(ix) => {
                    for v in [ix.edit, ix.jaccard, ix.cos, ix.cf, ix.ct] {
                        row.push(v.to_string());
                    }
                }
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            row.push(match &q.features {
                Some(f) => if f.imputed { "1" } else { "0" }.to_string(),
                None => String::new(),
            });
            row.push(label(q.ground_truth));
            for m in CANONICAL_METHODS {
                row.push(label(q.predictions.get(m).copied()));
            }
            row.push(
                q.timestamp
                    .map(|t| t.format(TIMESTAMP_FORMAT).to_string())
                    .unwrap_or_default(),
            );
            for m in &extra {
                row.push(label(q.predictions.get(m).copied()));
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "query_id,session_id,user_id,position,query_text,NoP,NoS,NoA,NoT,NoAt,NoCh,NCP,NCS,NCA,NCT,RED,JI,edit_index,jaccard_index,cos_index,cf_index,ct_index,imputed,ground_truth,pred_vote,pred_classifier,pred_weak,timestamp";

    fn sample() -> String {
        format!(
            "{HEADER}\n\
             q0,s1,u,1,\"SELECT a, b FROM t\",2,0,0,1,2,18,0,0,0,0,3,0,0.7,0,0,0,0,0,SEGMENT,SEGMENT,,,2020-01-01T10:00:00\n\
             q1,s1,u,2,SELECT a FROM t,1,0,0,1,1,15,1,0,0,1,1,0.6666666666666666,0.9,0.6666666666666666,0.8944271909999159,0.2,1,0,CONTINUE,CONTINUE,SEGMENT,CONTINUE,2020-01-01T10:31:00\n\
             q2,s2,v,1,SELECT 1,,,,,,,,,,,,,,,,,,,,,,,\n"
        )
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = sample();
        let w = read_csv_from(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_csv_to(&w, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn parses_labels_and_features() {
        let w = read_csv_from(sample().as_bytes()).unwrap();
        assert_eq!(w.sessions.len(), 2);
        let q = &w.sessions[0].queries[0];
        assert_eq!(q.ground_truth, Some(Label::Segment));
        assert_eq!(q.features.as_ref().unwrap().nop, 2);
        assert_eq!(w.sessions[0].queries[1].predictions["weak"], Label::Continue);
        assert!(w.sessions[1].queries[0].features.is_none());
    }

    #[test]
    fn unknown_label_is_rejected() {
        let text = sample().replace("SEGMENT,SEGMENT,,,", "maybe,SEGMENT,,,");
        match read_csv_from(text.as_bytes()) {
            Err(Error::MalformedRow { row, column, message }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "ground_truth");
                assert!(message.contains("unknown label"));
            }
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_number_names_row_and_column() {
        let text = sample().replace("q1,s1,u,2,SELECT a FROM t,1,", "q1,s1,u,2,SELECT a FROM t,x,");
        match read_csv_from(text.as_bytes()) {
            Err(Error::MalformedRow { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "NoP");
            }
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn extra_prediction_columns_survive() {
        let mut w = read_csv_from(sample().as_bytes()).unwrap();
        w.sessions[0].queries[0]
            .predictions
            .insert("timestamp".into(), Label::Segment);
        let mut out = Vec::new();
        write_csv_to(&w, &mut out).unwrap();
        let back = read_csv_from(out.as_slice()).unwrap();
        assert_eq!(back, w);
        assert!(String::from_utf8(out).unwrap().lines().next().unwrap().ends_with(",timestamp,pred_timestamp"));
    }
}
