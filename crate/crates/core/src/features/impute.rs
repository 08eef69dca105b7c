//! Regression estimate of NoP and NCP for queries whose outermost `*` could
//! not be expanded against the catalog.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::workload::{Session, Workload};

use super::relative_from_counts;

/// Predictor order used by [`ImputationModel`]. Session aggregates are taken
/// over every query of the query's session.
pub const PREDICTORS: [&str; 23] = [
    "NoS",
    "NoA",
    "NoT",
    "NCS",
    "NCA",
    "NCT",
    "session_NoP_min",
    "session_NoP_max",
    "session_NoP_avg",
    "session_NoP_std",
    "session_NoS_min",
    "session_NoS_max",
    "session_NoS_avg",
    "session_NoS_std",
    "session_NoA_min",
    "session_NoA_max",
    "session_NoA_avg",
    "session_NoA_std",
    "session_NoT_min",
    "session_NoT_max",
    "session_NoT_avg",
    "session_NoT_std",
    "session_queries",
];

const MIN_TRAINING_ROWS: usize = 30;
const HOLDOUT_FRACTION: f64 = 0.2;
/// A column whose residual after orthogonalization falls below this fraction
/// of its norm is treated as collinear and dropped.
const COLLINEARITY_TOL: f64 = 1e-9;

/// Ordinary least squares fit with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    /// One per predictor; dropped predictors get 0.
    pub coefficients: Vec<f64>,
    pub dropped: Vec<usize>,
    /// R² on the held-out split (NaN when not computed).
    pub r2_holdout: f64,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub predictors: Vec<String>,
    pub nop: OlsFit,
    pub ncp: OlsFit,
}

/// Least squares via modified Gram-Schmidt on `[1 | x]`, dropping columns
/// that are (numerically) linear combinations of earlier ones.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: n,
        });
    }
    if n == 0 {
        return Err(Error::InsufficientData("no rows to fit".into()));
    }
    let p = x[0].len();

    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut r: Vec<Vec<f64>> = Vec::new(); // r[k] = column k of R (length k+1)
    let mut kept: Vec<Option<usize>> = Vec::new(); // None = intercept
    let mut dropped = Vec::new();

    for col in 0..=p {
        let orig: Vec<f64> = if col == 0 {
            vec![1.0; n]
        } else {
            x.iter().map(|row| row[col - 1]).collect()
        };
        let orig_norm = norm(&orig);
        let mut v = orig.clone();
        let mut rcol = vec![0.0; q_cols.len() + 1];
        // two passes of orthogonalization for stability
        for _ in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                let d = dot(qi, &v);
                rcol[i] += d;
                for (vj, qj) in v.iter_mut().zip(qi) {
                    *vj -= d * qj;
                }
            }
        }
        let nv = norm(&v);
        if orig_norm == 0.0 || nv <= COLLINEARITY_TOL * orig_norm {
            if col > 0 {
                dropped.push(col - 1);
                log::warn!("dropping collinear predictor {}", col - 1);
            }
            continue;
        }
        *rcol.last_mut().unwrap() = nv;
        q_cols.push(v.iter().map(|e| e / nv).collect());
        r.push(rcol);
        kept.push(if col == 0 { None } else { Some(col - 1) });
    }

    // back-substitute R beta = Q^T y
    let qty: Vec<f64> = q_cols.iter().map(|q| dot(q, y)).collect();
    let m = q_cols.len();
    let mut beta = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = qty[i];
        for j in i + 1..m {
            s -= r[j][i] * beta[j];
        }
        beta[i] = s / r[i][i];
    }

    let mut fit = OlsFit {
        intercept: 0.0,
        coefficients: vec![0.0; p],
        dropped,
        r2_holdout: f64::NAN,
    };
    for (b, k) in beta.into_iter().zip(kept) {
        match k {
            None => fit.intercept = b,
            Some(j) => fit.coefficients[j] = b,
        }
    }
    Ok(fit)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Coefficient of determination. A constant target scores 1 when predicted
/// exactly and 0 otherwise.
pub fn r_squared(fit: &OlsFit, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let m = stats::mean(y);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let e = t - fit.predict(row);
        ss_res += e * e;
        ss_tot += (t - m) * (t - m);
    }
    if ss_tot <= f64::EPSILON * y.len() as f64 {
        return if ss_res <= 1e-12 * (1.0 + m * m) * y.len() as f64 {
            1.0
        } else {
            0.0
        };
    }
    1.0 - ss_res / ss_tot
}

/// Fit on a seeded 80% split, score R² on the remaining 20%, then refit on
/// all rows.
fn fit_with_holdout(x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<OlsFit> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = ((y.len() as f64) * HOLDOUT_FRACTION).round().max(1.0) as usize;
    let (hold, train) = idx.split_at(n_hold);
    let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (ids.iter().map(|&i| x[i].clone()).collect(), ids.iter().map(|&i| y[i]).collect())
    };
    let (xt, yt) = pick(train);
    let (xh, yh) = pick(hold);
    let partial = fit_ols(&xt, &yt)?;
    let r2 = r_squared(&partial, &xh, &yh);
    let mut full = fit_ols(x, y)?;
    full.r2_holdout = r2;
    Ok(full)
}

/// Predictor rows for every query of a session (requires features).
fn session_predictors(session: &Session) -> Option<Vec<Vec<f64>>> {
    let feats: Vec<_> = session
        .queries
        .iter()
        .map(|q| q.features.as_ref())
        .collect::<Option<_>>()?;
    let mut aggregates = Vec::with_capacity(17);
    for k in 0..4 {
        let col: Vec<f64> = feats.iter().map(|f| f.counts()[k] as f64).collect();
        aggregates.extend([
            stats::min(&col),
            stats::max(&col),
            stats::mean(&col),
            stats::std_dev(&col),
        ]);
    }
    aggregates.push(feats.len() as f64);
    Some(
        feats
            .iter()
            .map(|f| {
                let mut row = vec![
                    f.nos as f64,
                    f.noa as f64,
                    f.not as f64,
                    f.ncs as f64,
                    f.nca as f64,
                    f.nct as f64,
                ];
                row.extend_from_slice(&aggregates);
                row
            })
            .collect(),
    )
}

fn is_unresolved(q: &crate::workload::QueryRecord) -> bool {
    q.fragments.as_ref().is_some_and(|f| f.star_unresolved)
}

/// Fit the NoP and NCP regressions on queries with a known, non-zero NoP.
pub fn fit_imputation(workload: &Workload, seed: u64) -> Result<ImputationModel> {
    let mut x = Vec::new();
    let mut y_nop = Vec::new();
    let mut y_ncp = Vec::new();
    for session in &workload.sessions {
        let Some(rows) = session_predictors(session) else {
            continue;
        };
        for (q, row) in session.queries.iter().zip(rows) {
            let f = q.features.as_ref().expect("checked by session_predictors");
            if f.nop == 0 || f.imputed || is_unresolved(q) {
                continue;
            }
            x.push(row);
            y_nop.push(f.nop as f64);
            y_ncp.push(f.ncp as f64);
        }
    }
    if x.len() < MIN_TRAINING_ROWS {
        return Err(Error::InsufficientData(format!(
            "imputation needs at least {MIN_TRAINING_ROWS} queries with NoP > 0, found {}",
            x.len()
        )));
    }
    Ok(ImputationModel {
        predictors: PREDICTORS.iter().map(|s| s.to_string()).collect(),
        nop: fit_with_holdout(&x, &y_nop, seed)?,
        ncp: fit_with_holdout(&x, &y_ncp, seed)?,
    })
}

/// Clip raw predictions: NoP is at least 1, NCP lies in `[0, NoP]` and never
/// exceeds the predecessor's NoP.
pub(crate) fn repair(nop_pred: f64, ncp_pred: f64, prev_nop: usize) -> (usize, usize) {
    let nop = nop_pred.round().max(1.0) as usize;
    let ncp = (ncp_pred.round().max(0.0) as usize).min(nop).min(prev_nop);
    (nop, ncp)
}

/// Replace NoP/NCP of unresolved-`*` queries by model estimates, then
/// recompute RED and JI wherever a query or its predecessor changed.
/// Returns the number of imputed queries.
pub fn impute(workload: &mut Workload, model: &ImputationModel) -> usize {
    let mut count = 0;
    for session in &mut workload.sessions {
        if !session.queries.iter().any(is_unresolved) {
            continue;
        }
        let Some(rows) = session_predictors(session) else {
            continue;
        };
        let mut changed = vec![false; session.queries.len()];
        for k in 0..session.queries.len() {
            if !is_unresolved(&session.queries[k]) {
                continue;
            }
            let prev_nop = match k {
                0 => 0,
                _ => session.queries[k - 1].features.as_ref().map_or(0, |f| f.nop),
            };
            let (nop, ncp) = repair(model.nop.predict(&rows[k]), model.ncp.predict(&rows[k]), prev_nop);
            let f = session.queries[k].features.as_mut().expect("checked above");
            f.nop = nop;
            f.ncp = ncp;
            f.imputed = true;
            changed[k] = true;
            count += 1;
        }
        for k in 0..session.queries.len() {
            if !(changed[k] || (k > 0 && changed[k - 1])) {
                continue;
            }
            let prev = match k {
                0 => [0; 4],
                _ => session.queries[k - 1].features.as_ref().expect("present").counts(),
            };
            let f = session.queries[k].features.as_mut().expect("present");
            let (red, ji) = relative_from_counts(f.counts(), prev, f.common());
            f.red = red;
            f.ji = ji;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn exact_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..5).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 2.0 + 0.5 * r[0] - 1.5 * r[1] + 3.0 * r[4])
            .collect();
        let fit = fit_with_holdout(&x, &y, 1).unwrap();
        assert!(fit.r2_holdout >= 0.999);
        assert!((fit.intercept - 2.0).abs() < 1e-9);
        assert!((fit.coefficients[1] + 1.5).abs() < 1e-9);
        assert!(fit.coefficients[2].abs() < 1e-9);
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![7.0; 40];
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.intercept - 7.0).abs() < 1e-9);
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn collinear_columns_are_dropped() {
        let x: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let a = (i % 7) as f64;
                vec![a, 2.0 * a, 3.0, (i % 3) as f64]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + r[0] + r[3]).collect();
        let fit = fit_ols(&x, &y).unwrap();
        assert_eq!(fit.dropped, vec![1, 2]);
        let worst = x
            .iter()
            .zip(&y)
            .map(|(r, t)| (fit.predict(r) - t).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9);
    }

    #[test]
    fn repair_rules() {
        assert_eq!(repair(3.2, 4.6, 10), (3, 3));
        assert_eq!(repair(-2.0, -1.0, 10), (1, 0));
        assert_eq!(repair(5.4, 2.2, 1), (5, 1));
        assert_eq!(repair(5.0, 2.0, 0), (5, 0));
    }
}
