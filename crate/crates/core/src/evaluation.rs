//! Quality scores against ground truth, agreement between methods, and
//! descriptive statistics of a workload.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;
use crate::label::Label;
use crate::stats;
use crate::workload::Workload;

/// `nb(i, j)`: queries with ground truth `i` and prediction `j`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub ss: usize,
    pub sc: usize,
    pub cs: usize,
    pub cc: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.ss + self.sc + self.cs + self.cc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

impl EvaluationReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let precision = ratio(c.ss, c.ss + c.cs);
        let recall = ratio(c.ss, c.ss + c.sc);
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvaluationReport {
            accuracy: ratio(c.ss + c.cc, c.total()),
            precision,
            recall,
            f_measure,
            confusion: c,
        }
    }
}

/// Accuracy, precision, recall and F-measure with SEGMENT as the positive class.
pub fn score(predictions: &[Label], truth: &[Label]) -> Result<EvaluationReport> {
    check_len(predictions.len(), truth.len())?;
    let mut c = Confusion::default();
    for (p, t) in predictions.iter().zip(truth) {
        match (t, p) {
            (Label::Segment, Label::Segment) => c.ss += 1,
            (Label::Segment, Label::Continue) => c.sc += 1,
            (Label::Continue, Label::Segment) => c.cs += 1,
            (Label::Continue, Label::Continue) => c.cc += 1,
        }
    }
    Ok(EvaluationReport::from_confusion(c))
}

/// Cohen's kappa of two raters. When chance agreement is 1 the raters
/// necessarily agree everywhere and kappa is 1.
pub fn cohens_kappa(a: &[Label], b: &[Label]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::InsufficientData("kappa of empty sequences".into()));
    }
    let n = a.len() as f64;
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let pa = a.iter().filter(|l| l.is_segment()).count() as f64 / n;
    let pb = b.iter().filter(|l| l.is_segment()).count() as f64 / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - pe).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Rows are items, columns are raters.
fn check_matrix(matrix: &[Vec<Label>]) -> Result<usize> {
    let m = matrix
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InsufficientData("empty label matrix".into()))?;
    for row in matrix {
        check_len(row.len(), m)?;
    }
    if m == 0 {
        return Err(Error::InsufficientData("label matrix has no raters".into()));
    }
    Ok(m)
}

/// Fleiss' kappa for a fixed number of raters per item.
pub fn fleiss_kappa(matrix: &[Vec<Label>]) -> Result<f64> {
    let m = check_matrix(matrix)?;
    if m < 2 {
        return Err(Error::InvalidArgument("Fleiss' kappa needs at least two raters".into()));
    }
    let n = matrix.len() as f64;
    let mf = m as f64;
    let mut p_bar = 0.0;
    let mut seg_total = 0.0;
    for row in matrix {
        let s = row.iter().filter(|l| l.is_segment()).count() as f64;
        let c = mf - s;
        p_bar += (s * (s - 1.0) + c * (c - 1.0)) / (mf * (mf - 1.0));
        seg_total += s;
    }
    p_bar /= n;
    let ps = seg_total / (n * mf);
    let pe = ps * ps + (1.0 - ps) * (1.0 - ps);
    if (1.0 - pe).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - pe) / (1.0 - pe))
}

/// Fraction of items on which every rater gives the same label.
pub fn full_agreement(matrix: &[Vec<Label>]) -> Result<f64> {
    check_matrix(matrix)?;
    let agree = matrix.iter().filter(|row| row.iter().all(|l| *l == row[0])).count();
    Ok(agree as f64 / matrix.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointRow {
    pub labels: Vec<Label>,
    pub count: usize,
    pub fraction: f64,
}

/// All 2^m label combinations in binary order (first rater most
/// significant, SEGMENT = 1), with counts and fractions.
pub fn joint_confusion(matrix: &[Vec<Label>]) -> Result<Vec<JointRow>> {
    let m = check_matrix(matrix)?;
    if m > 16 {
        return Err(Error::InvalidArgument(format!("too many raters for a joint table: {m}")));
    }
    let mut counts = vec![0usize; 1 << m];
    for row in matrix {
        let code = row.iter().fold(0usize, |acc, l| (acc << 1) | l.is_segment() as usize);
        counts[code] += 1;
    }
    let n = matrix.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(code, count)| JointRow {
            labels: (0..m)
                .map(|j| Label::from_bool(code >> (m - 1 - j) & 1 == 1))
                .collect(),
            count,
            fraction: count as f64 / n,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub methods: Vec<String>,
    /// Pairwise Cohen's kappa, indexed like `methods`.
    pub cohen: Vec<Vec<f64>>,
    pub fleiss: f64,
    pub full_agreement: f64,
    pub joint: Vec<JointRow>,
}

/// Agreement statistics between label columns of a workload.
pub fn agreement(workload: &Workload, columns: &[String]) -> Result<AgreementReport> {
    if columns.len() < 2 {
        return Err(Error::InvalidArgument("agreement needs at least two methods".into()));
    }
    let per_method: Vec<Vec<Label>> = columns
        .iter()
        .map(|c| workload.require_labels(c))
        .collect::<Result<_>>()?;
    let n = per_method[0].len();
    let matrix: Vec<Vec<Label>> = (0..n).map(|i| per_method.iter().map(|col| col[i]).collect()).collect();
    let m = columns.len();
    let mut cohen = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let k = cohens_kappa(&per_method[i], &per_method[j])?;
            cohen[i][j] = k;
            cohen[j][i] = k;
        }
    }
    Ok(AgreementReport {
        methods: columns.to_vec(),
        cohen,
        fleiss: fleiss_kappa(&matrix)?,
        full_agreement: full_agreement(&matrix)?,
        joint: joint_confusion(&matrix)?,
    })
}

pub const PROFILE_PERCENTILES: [f64; 5] = [10.0, 25.0, 50.0, 75.0, 90.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub avg: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    /// Values at [`PROFILE_PERCENTILES`], linearly interpolated.
    pub percentiles: Vec<f64>,
}

impl Summary {
    pub fn of(name: impl Into<String>, values: &[f64]) -> Self {
        let sorted = stats::sorted(values);
        let percentiles = if sorted.is_empty() {
            vec![f64::NAN; PROFILE_PERCENTILES.len()]
        } else {
            PROFILE_PERCENTILES
                .iter()
                .map(|k| stats::percentile_linear(&sorted, *k))
                .collect()
        };
        Summary {
            name: name.into(),
            avg: stats::mean(values),
            stddev: stats::std_dev(values),
            min: stats::min(values),
            max: stats::max(values),
            percentiles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    /// One row per metric, over all queries.
    pub features: Vec<Summary>,
    /// Per-group aggregates (group size and averages of relative metrics).
    pub groups: Vec<Summary>,
}

fn feature_columns(workload: &Workload) -> Result<Vec<Vec<f64>>> {
    let mut cols = vec![Vec::new(); FEATURE_NAMES.len()];
    for q in workload.queries() {
        let f = q
            .features
            .as_ref()
            .ok_or_else(|| Error::missing(&q.query_id, "features"))?;
        for (col, name) in cols.iter_mut().zip(FEATURE_NAMES) {
            col.push(f.get(name).expect("known feature"));
        }
    }
    Ok(cols)
}

const GROUP_METRICS: [&str; 6] = ["NCP", "NCS", "NCA", "NCT", "RED", "JI"];

/// Descriptive statistics of every metric, plus per-session aggregates. When
/// `split_by` names a label column, groups are explorations instead of sessions.
pub fn profile(workload: &Workload, split_by: Option<&str>) -> Result<Profile> {
    let cols = feature_columns(workload)?;
    let features = FEATURE_NAMES
        .iter()
        .zip(&cols)
        .map(|(name, col)| Summary::of(*name, col))
        .collect();

    let mut groups: Vec<Vec<&crate::features::FeatureVector>> = Vec::new();
    for session in &workload.sessions {
        for (i, q) in session.queries.iter().enumerate() {
            let cut = match split_by {
                Some(col) if i > 0 => q
                    .label(col)
                    .ok_or_else(|| Error::missing(&q.query_id, format!("label {col}")))?
                    .is_segment(),
                _ => i == 0,
            };
            if cut || groups.is_empty() {
                groups.push(Vec::new());
            }
            groups.last_mut().unwrap().push(q.features.as_ref().expect("checked"));
        }
    }
    let mut rows = vec![Summary::of(
        "Nb queries",
        &groups.iter().map(|g| g.len() as f64).collect::<Vec<_>>(),
    )];
    for name in GROUP_METRICS {
        let avgs: Vec<f64> = groups
            .iter()
            .map(|g| stats::mean(&g.iter().map(|f| f.get(name).unwrap()).collect::<Vec<_>>()))
            .collect();
        rows.push(Summary::of(format!("Avg {name}"), &avgs));
    }
    Ok(Profile { features, groups: rows })
}

/// Metrics entering the correlation matrix (edit distance and Jaccard excluded).
pub const CORRELATED_FEATURES: [&str; 9] = ["NoP", "NoS", "NoA", "NoT", "NoAt", "NCP", "NCS", "NCA", "NCT"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Pairwise Pearson correlation; constant columns correlate 0 with
/// everything else and 1 with themselves.
pub fn correlate(workload: &Workload) -> Result<CorrelationMatrix> {
    let all = feature_columns(workload)?;
    let cols: Vec<&Vec<f64>> = CORRELATED_FEATURES
        .iter()
        .map(|n| &all[FEATURE_NAMES.iter().position(|f| f == n).unwrap()])
        .collect();
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let r = stats::pearson(cols[i], cols[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: CORRELATED_FEATURES.iter().map(|s| s.to_string()).collect(),
        values,
    })
}
