//! Per-query metrics: intrinsic counts of each fragment kind plus counts
//! relative to the session predecessor (common fragments, edit distance and
//! Jaccard index). The first query of a session is compared to the empty
//! query.

mod impute;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragments::QueryFragments;
use crate::workload::Workload;

pub use impute::{fit_imputation, fit_ols, impute, ImputationModel, OlsFit, PREDICTORS};

/// Column names of the twelve metrics, in canonical order.
pub const FEATURE_NAMES: [&str; 12] = [
    "NoP", "NoS", "NoA", "NoT", "NoAt", "NoCh", "NCP", "NCS", "NCA", "NCT", "RED", "JI",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub nop: usize,
    pub nos: usize,
    pub noa: usize,
    pub not: usize,
    pub noat: usize,
    pub noch: usize,
    pub ncp: usize,
    pub ncs: usize,
    pub nca: usize,
    pub nct: usize,
    pub red: usize,
    pub ji: f64,
    /// NoP and NCP were estimated by regression.
    pub imputed: bool,
}

impl FeatureVector {
    pub fn from_parts(i: IntrinsicFeatures, r: RelativeFeatures) -> Self {
        FeatureVector {
            nop: i.nop,
            nos: i.nos,
            noa: i.noa,
            not: i.not,
            noat: i.noat,
            noch: i.noch,
            ncp: r.ncp,
            ncs: r.ncs,
            nca: r.nca,
            nct: r.nct,
            red: r.red,
            ji: r.ji,
            imputed: false,
        }
    }

    /// Value of the metric named as in [`FEATURE_NAMES`].
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "NoP" => self.nop as f64,
            "NoS" => self.nos as f64,
            "NoA" => self.noa as f64,
            "NoT" => self.not as f64,
            "NoAt" => self.noat as f64,
            "NoCh" => self.noch as f64,
            "NCP" => self.ncp as f64,
            "NCS" => self.ncs as f64,
            "NCA" => self.nca as f64,
            "NCT" => self.nct as f64,
            "RED" => self.red as f64,
            "JI" => self.ji,
            _ => return None,
        })
    }

    /// (NoP, NoS, NoA, NoT)
    pub fn counts(&self) -> [usize; 4] {
        [self.nop, self.nos, self.noa, self.not]
    }

    /// (NCP, NCS, NCA, NCT)
    pub fn common(&self) -> [usize; 4] {
        [self.ncp, self.ncs, self.nca, self.nct]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntrinsicFeatures {
    pub nop: usize,
    pub nos: usize,
    pub noa: usize,
    pub not: usize,
    pub noat: usize,
    pub noch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativeFeatures {
    pub ncp: usize,
    pub ncs: usize,
    pub nca: usize,
    pub nct: usize,
    pub red: usize,
    pub ji: f64,
}

pub fn intrinsic_features(q: &QueryFragments) -> IntrinsicFeatures {
    IntrinsicFeatures {
        nop: q.projections.len(),
        nos: q.selections.len(),
        noa: q.aggregations.len(),
        not: q.tables.len(),
        noat: q.attributes.len(),
        noch: q.char_length,
    }
}

/// Metrics of `current` relative to `previous` (pass [`QueryFragments::empty`]
/// for the first query of a session).
///
/// The fragment union used by the Jaccard index keeps the four kinds apart,
/// so a projection and an aggregation with the same text count twice.
pub fn relative_features(current: &QueryFragments, previous: &QueryFragments) -> RelativeFeatures {
    let kinds = [
        (&current.projections, &previous.projections),
        (&current.selections, &previous.selections),
        (&current.aggregations, &previous.aggregations),
        (&current.tables, &previous.tables),
    ];
    let mut common = [0usize; 4];
    let mut red = 0;
    let mut union = 0;
    for (k, (a, b)) in kinds.iter().enumerate() {
        common[k] = a.intersection(b).count();
        red += a.symmetric_difference(b).count();
        union += a.union(b).count();
    }
    let inter: usize = common.iter().sum();
    RelativeFeatures {
        ncp: common[0],
        ncs: common[1],
        nca: common[2],
        nct: common[3],
        red,
        ji: ratio(inter, union),
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Edit distance and Jaccard index from counts alone:
/// each kind contributes `No(k) + No(prev) - 2 NC(k)` to RED.
pub fn relative_from_counts(counts: [usize; 4], prev_counts: [usize; 4], common: [usize; 4]) -> (usize, f64) {
    let mut red = 0;
    let mut union = 0;
    for k in 0..4 {
        let (a, b, c) = (counts[k], prev_counts[k], common[k]);
        red += a + b - 2 * c;
        union += a + b - c;
    }
    (red, ratio(common.iter().sum(), union))
}

/// Compute features for every query that has fragments. Queries without
/// fragments keep whatever features they already carry.
pub fn compute_features(workload: &mut Workload) -> Result<()> {
    let empty = QueryFragments::empty();
    for session in &mut workload.sessions {
        for k in 0..session.queries.len() {
            let (before, rest) = session.queries.split_at_mut(k);
            let q = &mut rest[0];
            let Some(frags) = &q.fragments else {
                if q.features.is_none() {
                    return Err(Error::missing(&q.query_id, "fragments or features"));
                }
                continue;
            };
            let prev = match before.last() {
                None => &empty,
                Some(p) => p.fragments.as_ref().ok_or_else(|| {
                    Error::missing(&p.query_id, "fragments (needed by its successor)")
                })?,
            };
            q.features = Some(FeatureVector::from_parts(
                intrinsic_features(frags),
                relative_features(frags, prev),
            ));
        }
    }
    Ok(())
}
