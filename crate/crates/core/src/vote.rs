//! Unsupervised segmentation: each index votes against its threshold and the
//! majority decides. Also splits labeled sessions into explorations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::indexes::{IndexVector, ThresholdSet};
use crate::label::Label;
use crate::workload::Workload;

pub const METHOD: &str = "vote";

/// Per-index votes; `true` means SEGMENT.
pub fn index_votes(ix: &IndexVector, thresholds: &ThresholdSet, strict: bool) -> [bool; 5] {
    let t = thresholds.to_array();
    let mut out = [false; 5];
    for (k, v) in ix.to_array().into_iter().enumerate() {
        out[k] = if strict { v < t[k] } else { v <= t[k] };
    }
    out
}

/// SEGMENT when at least three of the five indexes vote SEGMENT.
pub fn vote_label(ix: &IndexVector, thresholds: &ThresholdSet, strict: bool) -> Label {
    let n = index_votes(ix, thresholds, strict).iter().filter(|v| **v).count();
    Label::from_bool(n >= 3)
}

/// Labels for every query, in workload order.
pub fn vote_labels(workload: &Workload, thresholds: &ThresholdSet, strict: bool) -> Result<Vec<Label>> {
    workload
        .queries()
        .map(|q| {
            q.indexes
                .as_ref()
                .map(|ix| vote_label(ix, thresholds, strict))
                .ok_or_else(|| Error::missing(&q.query_id, "indexes"))
        })
        .collect()
}

/// Store the vote labels as the `vote` prediction of every query.
pub fn vote_segment(workload: &mut Workload, thresholds: &ThresholdSet, strict: bool) -> Result<()> {
    let labels = vote_labels(workload, thresholds, strict)?;
    workload.set_predictions(METHOD, &labels)
}

/// A maximal run of queries of one session with no internal SEGMENT.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exploration {
    pub session_id: String,
    /// Position of the first query in its session (1-based).
    pub start: usize,
    pub query_ids: Vec<String>,
    pub avg_edit_index: Option<f64>,
    pub avg_jaccard_index: Option<f64>,
}

impl Exploration {
    pub fn len(&self) -> usize {
        self.query_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.query_ids.is_empty()
    }
}

/// Split sessions before every SEGMENT label of `column`. The first query of
/// a session always opens an exploration, whatever its label.
pub fn explorations(workload: &Workload, column: &str) -> Result<Vec<Exploration>> {
    let mut out = Vec::new();
    for session in &workload.sessions {
        let mut current: Vec<usize> = Vec::new();
        let mut flush = |idx: &mut Vec<usize>| {
            if idx.is_empty() {
                return;
            }
            let qs: Vec<_> = idx.iter().map(|&i| &session.queries[i]).collect();
            let avg = |f: fn(&IndexVector) -> f64| -> Option<f64> {
                let vals: Option<Vec<f64>> = qs.iter().map(|q| q.indexes.as_ref().map(f)).collect();
                vals.map(|v| crate::stats::mean(&v))
            };
            out.push(Exploration {
                session_id: session.session_id.clone(),
                start: qs[0].position,
                query_ids: qs.iter().map(|q| q.query_id.clone()).collect(),
                avg_edit_index: avg(|ix| ix.edit),
                avg_jaccard_index: avg(|ix| ix.jaccard),
            });
            idx.clear();
        };
        for (i, q) in session.queries.iter().enumerate() {
            let label = q.label(column);
            if i > 0 {
                match label {
                    Some(Label::Segment) => flush(&mut current),
                    Some(Label::Continue) => {}
                    None => return Err(Error::missing(&q.query_id, format!("label {column}"))),
                }
            }
            current.push(i);
        }
        flush(&mut current);
    }
    Ok(out)
}
