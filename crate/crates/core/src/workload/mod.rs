//! Workload model: raw log entries, per-user sessions and the query records
//! that accumulate fragments, features, indexes and labels as the pipeline
//! runs.

mod canonical;
mod raw;

use std::collections::BTreeMap;

use chrono::NaiveDateTime;

use crate::features::FeatureVector;
use crate::fragments::{is_select, QueryFragments};
use crate::indexes::IndexVector;
use crate::label::Label;

pub use canonical::{read_csv, read_csv_from, write_csv, write_csv_to, CANONICAL_COLUMNS};
pub use raw::{read_raw_log, read_raw_log_from};

/// One statement of a raw query log, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLogEntry {
    pub user_id: String,
    pub statement_text: String,
    pub ordinal: usize,
    pub timestamp: Option<NaiveDateTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub query_id: String,
    /// 1-based, contiguous within the session.
    pub position: usize,
    pub text: String,
    pub fragments: Option<QueryFragments>,
    pub features: Option<FeatureVector>,
    pub indexes: Option<IndexVector>,
    pub ground_truth: Option<Label>,
    /// Method name (e.g. `vote`) to predicted label.
    pub predictions: BTreeMap<String, Label>,
    pub timestamp: Option<NaiveDateTime>,
}

impl QueryRecord {
    pub fn new(query_id: impl Into<String>, position: usize, text: impl Into<String>) -> Self {
        QueryRecord {
            query_id: query_id.into(),
            position,
            text: text.into(),
            fragments: None,
            features: None,
            indexes: None,
            ground_truth: None,
            predictions: BTreeMap::new(),
            timestamp: None,
        }
    }

    /// Label stored under `column`: `ground_truth`, `pred_<method>` or a bare method name.
    pub fn label(&self, column: &str) -> Option<Label> {
        if column == "ground_truth" {
            return self.ground_truth;
        }
        let method = column.strip_prefix("pred_").unwrap_or(column);
        self.predictions.get(method).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub queries: Vec<QueryRecord>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// An ordered list of sessions. Ground truth and predictions are optional per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    pub sessions: Vec<Session>,
}

impl Workload {
    pub fn new(sessions: Vec<Session>) -> Self {
        Workload { sessions }
    }

    pub fn queries(&self) -> impl Iterator<Item = &QueryRecord> {
        self.sessions.iter().flat_map(|s| s.queries.iter())
    }

    pub fn queries_mut(&mut self) -> impl Iterator<Item = &mut QueryRecord> {
        self.sessions.iter_mut().flat_map(|s| s.queries.iter_mut())
    }

    pub fn num_queries(&self) -> usize {
        self.sessions.iter().map(Session::len).sum()
    }

    /// Labels of `column` for every query, in workload order.
    pub fn labels(&self, column: &str) -> Vec<Option<Label>> {
        self.queries().map(|q| q.label(column)).collect()
    }

    /// Labels of `column`, failing on the first query that lacks one.
    pub fn require_labels(&self, column: &str) -> crate::Result<Vec<Label>> {
        self.queries()
            .map(|q| {
                q.label(column)
                    .ok_or_else(|| crate::Error::missing(&q.query_id, column))
            })
            .collect()
    }

    /// Store `labels` (workload order) as predictions of `method`.
    pub fn set_predictions(&mut self, method: &str, labels: &[Label]) -> crate::Result<()> {
        let n = self.num_queries();
        if labels.len() != n {
            return Err(crate::Error::LengthMismatch {
                left: n,
                right: labels.len(),
            });
        }
        for (q, l) in self.queries_mut().zip(labels) {
            q.predictions.insert(method.to_string(), *l);
        }
        Ok(())
    }
}

/// Keep only SELECT (or WITH) statements, in order.
pub fn filter_selects(log: Vec<RawLogEntry>) -> Vec<RawLogEntry> {
    log.into_iter()
        .filter(|e| is_select(&e.statement_text))
        .collect()
}

/// Group consecutive entries of the same user into sessions named
/// `u{user}_{n}`, `n` counting that user's runs from 1.
pub fn assemble_sessions(log: Vec<RawLogEntry>) -> Vec<Session> {
    let mut runs: BTreeMap<String, usize> = BTreeMap::new();
    let mut sessions: Vec<Session> = Vec::new();
    for entry in log {
        let same_user = sessions
            .last()
            .is_some_and(|s| s.user_id == entry.user_id);
        if !same_user {
            let n = runs.entry(entry.user_id.clone()).or_insert(0);
            *n += 1;
            sessions.push(Session {
                session_id: format!("u{}_{}", entry.user_id, n),
                user_id: entry.user_id.clone(),
                queries: Vec::new(),
            });
        }
        let session = sessions.last_mut().expect("pushed above");
        let mut record = QueryRecord::new(
            format!("q{}", entry.ordinal),
            session.queries.len() + 1,
            entry.statement_text,
        );
        record.timestamp = entry.timestamp;
        session.queries.push(record);
    }
    sessions
}
