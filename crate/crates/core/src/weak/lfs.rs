//! The 21 labeling functions over a query and its predecessor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::indexes::INDEX_NAMES;
use crate::label::Label;
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Vote {
    Segment,
    Continue,
    Abstain,
}

impl Vote {
    pub fn label(self) -> Option<Label> {
        match self {
            Vote::Segment => Some(Label::Segment),
            Vote::Continue => Some(Label::Continue),
            Vote::Abstain => None,
        }
    }
}

impl From<Label> for Vote {
    fn from(l: Label) -> Self {
        match l {
            Label::Segment => Vote::Segment,
            Label::Continue => Vote::Continue,
        }
    }
}

const KINDS: [char; 4] = ['P', 'S', 'A', 'T'];

/// Names in column order: five index LFs, eight strict ratio LFs, eight
/// lenient ratio LFs (`_v2`).
pub fn lf_names() -> Vec<String> {
    let ratios: Vec<String> = KINDS
        .iter()
        .flat_map(|k| [format!("recall_{k}"), format!("precision_{k}")])
        .collect();
    INDEX_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(ratios.iter().cloned())
        .chain(ratios.iter().map(|r| format!("{r}_v2")))
        .collect()
}

/// Column ranges of the three groups.
pub const GROUPS: [std::ops::Range<usize>; 3] = [0..5, 5..13, 13..21];

/// Votes per query (rows) and labeling function (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct LfMatrix {
    pub names: Vec<String>,
    pub votes: Vec<Vec<Vote>>,
}

impl LfMatrix {
    /// Keep only the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> LfMatrix {
        LfMatrix {
            names: columns.iter().map(|&j| self.names[j].clone()).collect(),
            votes: self
                .votes
                .iter()
                .map(|row| columns.iter().map(|&j| row[j]).collect())
                .collect(),
        }
    }

    pub fn select_names(&self, names: &[String]) -> Result<LfMatrix> {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown labeling function {n}")))
            })
            .collect::<Result<_>>()?;
        Ok(self.select(&cols))
    }
}

/// Strict ratio rule: 1 gives CONTINUE, 0 gives SEGMENT, anything else
/// (including an undefined ratio) abstains.
fn strict(num: usize, den: usize) -> Vote {
    if den == 0 {
        Vote::Abstain
    } else if num == den {
        Vote::Continue
    } else if num == 0 {
        Vote::Segment
    } else {
        Vote::Abstain
    }
}

/// Lenient ratio rule: any evidence of overlap gives CONTINUE.
fn lenient(num: usize, den: usize) -> Vote {
    if den > 0 && num > 0 {
        Vote::Continue
    } else {
        Vote::Segment
    }
}

/// Votes for one query. `prev_counts` are the predecessor's (NoP, NoS,
/// NoA, NoT), zero for the first query of a session.
pub fn lf_votes(f: &FeatureVector, prev_counts: [usize; 4], indexes: [f64; 5]) -> Vec<Vote> {
    let mut out = Vec::with_capacity(21);
    for v in indexes {
        out.push(if v > 0.0 { Vote::Continue } else { Vote::Segment });
    }
    let common = f.common();
    let cur = f.counts();
    let mut ratios = Vec::with_capacity(8);
    for k in 0..4 {
        ratios.push((common[k], prev_counts[k]));
        ratios.push((common[k], cur[k]));
    }
    out.extend(ratios.iter().map(|&(n, d)| strict(n, d)));
    out.extend(ratios.iter().map(|&(n, d)| lenient(n, d)));
    out
}

/// Evaluate all labeling functions on every query.
pub fn run_lfs(workload: &Workload) -> Result<LfMatrix> {
    let mut votes = Vec::with_capacity(workload.num_queries());
    for session in &workload.sessions {
        let mut prev = [0usize; 4];
        for q in &session.queries {
            let f = q
                .features
                .as_ref()
                .ok_or_else(|| Error::missing(&q.query_id, "features"))?;
            let ix = q.indexes.ok_or_else(|| Error::missing(&q.query_id, "indexes"))?;
            votes.push(lf_votes(f, prev, ix.to_array()));
            prev = f.counts();
        }
    }
    Ok(LfMatrix { names: lf_names(), votes })
}
