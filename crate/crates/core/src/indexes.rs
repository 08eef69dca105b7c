//! The five similarity indexes between a query and its predecessor, and
//! percentile-based threshold calibration.

use serde::{Deserialize, Serialize};

use crate::config::IndexConfig;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::stats;
use crate::workload::Workload;

pub const INDEX_NAMES: [&str; 5] = ["edit_index", "jaccard_index", "cos_index", "cf_index", "ct_index"];

/// Similarity of a query to its predecessor; every component lies in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexVector {
    pub edit: f64,
    pub jaccard: f64,
    pub cos: f64,
    pub cf: f64,
    pub ct: f64,
}

impl IndexVector {
    pub fn to_array(self) -> [f64; 5] {
        [self.edit, self.jaccard, self.cos, self.cf, self.ct]
    }

    /// Value by name, as in [`INDEX_NAMES`].
    pub fn get(&self, name: &str) -> Option<f64> {
        INDEX_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|k| self.to_array()[k])
    }
}

pub fn edit_index(red: usize, scale: f64) -> f64 {
    (1.0 - red as f64 / scale).max(0.0)
}

/// Cosine between two vectors; 0 when either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// The eight count features compared by the cosine index.
pub fn cos_vector(f: &FeatureVector) -> [f64; 8] {
    [f.nop, f.nos, f.noa, f.not, f.ncp, f.ncs, f.nca, f.nct].map(|v| v as f64)
}

/// Cosine index; `previous = None` stands for the empty query.
pub fn cos_index(current: &FeatureVector, previous: Option<&FeatureVector>) -> f64 {
    match previous {
        None => 0.0,
        Some(p) => cosine(&cos_vector(current), &cos_vector(p)),
    }
}

pub fn cf_index(ncp: usize, ncs: usize, nca: usize, nct: usize, scale: f64) -> f64 {
    ((ncp + ncs + nca + nct) as f64 / scale).min(1.0)
}

pub fn ct_index(nct: usize, session_max_not: usize) -> f64 {
    if session_max_not == 0 {
        return 0.0;
    }
    (nct as f64 / session_max_not as f64).min(1.0)
}

/// Indexes of one query given its predecessor and the session's largest table count.
pub fn index_vector(
    current: &FeatureVector,
    previous: Option<&FeatureVector>,
    session_max_not: usize,
    config: &IndexConfig,
) -> IndexVector {
    let f = current;
    IndexVector {
        edit: edit_index(f.red, config.edit_scale),
        jaccard: f.ji.clamp(0.0, 1.0),
        cos: cos_index(f, previous),
        cf: cf_index(f.ncp, f.ncs, f.nca, f.nct, config.cf_scale),
        ct: ct_index(f.nct, session_max_not),
    }
}

/// Fill `indexes` for every query. All queries need features.
pub fn compute_indexes(workload: &mut Workload, config: &IndexConfig) -> Result<()> {
    for session in &mut workload.sessions {
        let feats: Vec<FeatureVector> = session
            .queries
            .iter()
            .map(|q| {
                q.features
                    .clone()
                    .ok_or_else(|| Error::missing(&q.query_id, "features"))
            })
            .collect::<Result<_>>()?;
        let max_not = feats.iter().map(|f| f.not).max().unwrap_or(0);
        for (k, q) in session.queries.iter_mut().enumerate() {
            let prev = k.checked_sub(1).map(|j| &feats[j]);
            q.indexes = Some(index_vector(&feats[k], prev, max_not, config));
        }
    }
    Ok(())
}

/// Per-index thresholds at a calibration percentile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub percentile: f64,
    pub edit: f64,
    pub jaccard: f64,
    pub cos: f64,
    pub cf: f64,
    pub ct: f64,
}

impl ThresholdSet {
    pub fn to_array(&self) -> [f64; 5] {
        [self.edit, self.jaccard, self.cos, self.cf, self.ct]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Nearest-rank k-percentile of each index over the whole workload.
pub fn calibrate_thresholds(workload: &Workload, percentile: f64) -> Result<ThresholdSet> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::InvalidArgument(format!(
            "percentile must lie in [0, 100], got {percentile}"
        )));
    }
    let mut columns: [Vec<f64>; 5] = Default::default();
    for q in workload.queries() {
        let ix = q
            .indexes
            .ok_or_else(|| Error::missing(&q.query_id, "indexes"))?;
        for (col, v) in columns.iter_mut().zip(ix.to_array()) {
            col.push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::InsufficientData("cannot calibrate thresholds on an empty workload".into()));
    }
    let t = columns.map(|c| stats::percentile_nearest_rank(&stats::sorted(&c), percentile));
    Ok(ThresholdSet {
        percentile,
        edit: t[0],
        jaccard: t[1],
        cos: t[2],
        cf: t[3],
        ct: t[4],
    })
}
