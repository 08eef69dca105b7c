//! Generative label model with conditionally independent labeling
//! functions, fitted by expectation-maximization over distinct vote
//! patterns.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lfs::{LfMatrix, Vote};
use crate::error::{Error, Result};
use crate::label::Label;

const CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModel {
    pub lfs: Vec<String>,
    /// P(SEGMENT).
    pub prior: f64,
    /// P(vote equals the true label | vote is not ABSTAIN), per LF.
    pub accuracies: Vec<f64>,
    /// P(vote is not ABSTAIN), per LF.
    pub propensities: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    /// Log-likelihood after every EM iteration.
    #[serde(default, skip_serializing)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmParams {
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        EmParams {
            max_iter: 500,
            tolerance: 1e-6,
        }
    }
}

fn clamp(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Distinct vote rows with their multiplicities.
fn patterns(votes: &[Vec<Vote>]) -> Vec<(Vec<Vote>, f64)> {
    let mut map: BTreeMap<&[Vote], usize> = BTreeMap::new();
    for row in votes {
        *map.entry(row.as_slice()).or_default() += 1;
    }
    map.into_iter().map(|(k, c)| (k.to_vec(), c as f64)).collect()
}

impl LabelModel {
    /// Log-odds of SEGMENT for one vote row. Evidence terms are summed in
    /// sorted order per sign so that balanced evidence cancels exactly.
    pub fn log_odds(&self, row: &[Vote]) -> f64 {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (v, a) in row.iter().zip(&self.accuracies) {
            let e = logit(clamp(*a));
            let e = match v {
                Vote::Segment => e,
                Vote::Continue => -e,
                Vote::Abstain => continue,
            };
            if e >= 0.0 {
                pos.push(e);
            } else {
                neg.push(-e);
            }
        }
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        logit(clamp(self.prior)) + (pos.iter().sum::<f64>() - neg.iter().sum::<f64>())
    }

    pub fn posterior(&self, row: &[Vote]) -> f64 {
        let z = self.log_odds(row);
        1.0 / (1.0 + (-z).exp())
    }

    /// Most probable label; ties and all-abstain rows give CONTINUE.
    pub fn predict_row(&self, row: &[Vote]) -> Label {
        if row.iter().all(|v| *v == Vote::Abstain) {
            return Label::Continue;
        }
        Label::from_bool(self.posterior(row) > 0.5)
    }

    fn log_likelihood_of(&self, pats: &[(Vec<Vote>, f64)]) -> f64 {
        pats.iter()
            .map(|(row, c)| {
                let (mut ls, mut lc) = (self.prior.ln(), (1.0 - self.prior).ln());
                for ((v, a), p) in row.iter().zip(&self.accuracies).zip(&self.propensities) {
                    match v {
                        Vote::Abstain => {
                            let q = (1.0 - p).max(CLAMP).ln();
                            ls += q;
                            lc += q;
                        }
                        Vote::Segment => {
                            ls += (p * a).ln();
                            lc += (p * (1.0 - a)).ln();
                        }
                        Vote::Continue => {
                            ls += (p * (1.0 - a)).ln();
                            lc += (p * a).ln();
                        }
                    }
                }
                let m = ls.max(lc);
                c * (m + ((ls - m).exp() + (lc - m).exp()).ln())
            })
            .sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fit by EM. Without labels the start point is accuracy 0.7, prior 0.1;
/// with labels it is the (smoothed) supervised estimate.
pub fn fit_label_model(lf: &LfMatrix, labels: Option<&[Label]>, params: &EmParams) -> Result<LabelModel> {
    let n = lf.votes.len();
    let m = lf.names.len();
    if n == 0 || m == 0 {
        return Err(Error::InsufficientData("empty labeling-function matrix".into()));
    }
    if lf.votes.iter().all(|r| r.iter().all(|v| *v == Vote::Abstain)) {
        return Err(Error::InsufficientData("every labeling function abstains everywhere".into()));
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::LengthMismatch { left: n, right: l.len() });
        }
    }
    let covered: Vec<f64> = (0..m)
        .map(|j| lf.votes.iter().filter(|r| r[j] != Vote::Abstain).count() as f64)
        .collect();
    let propensities: Vec<f64> = covered.iter().map(|c| clamp(c / n as f64)).collect();

    let (prior, accuracies) = match labels {
        None => (0.1, vec![0.7; m]),
        Some(l) => {
            let seg = l.iter().filter(|x| x.is_segment()).count() as f64;
            let acc = (0..m)
                .map(|j| {
                    let agree = lf
                        .votes
                        .iter()
                        .zip(l)
                        .filter(|(r, y)| r[j].label() == Some(**y))
                        .count() as f64;
                    clamp((agree + 1.0) / (covered[j] + 2.0))
                })
                .collect();
            (clamp(seg / n as f64), acc)
        }
    };
    let mut model = LabelModel {
        lfs: lf.names.clone(),
        prior,
        accuracies,
        propensities,
        iterations: 0,
        log_likelihood: f64::NEG_INFINITY,
        converged: false,
        trace: Vec::new(),
    };
    let pats = patterns(&lf.votes);
    let mut ll = model.log_likelihood_of(&pats);
    for it in 1..=params.max_iter {
        // E step
        let gammas: Vec<f64> = pats.iter().map(|(row, _)| model.posterior(row)).collect();
        // M step
        let total: f64 = pats.iter().map(|p| p.1).sum();
        let prior = pats.iter().zip(&gammas).map(|((_, c), g)| c * g).sum::<f64>() / total;
        let mut accuracies = vec![0.0; m];
        for (j, acc) in accuracies.iter_mut().enumerate() {
            let mut agree = 0.0;
            for ((row, c), g) in pats.iter().zip(&gammas) {
                agree += c * match row[j] {
                    Vote::Segment => *g,
                    Vote::Continue => 1.0 - g,
                    Vote::Abstain => 0.0,
                };
            }
            *acc = if covered[j] > 0.0 { clamp(agree / covered[j]) } else { 0.5 };
        }
        model.prior = clamp(prior);
        model.accuracies = accuracies;
        model.iterations = it;
        let new_ll = model.log_likelihood_of(&pats);
        model.trace.push(new_ll);
        let improvement = new_ll - ll;
        ll = new_ll;
        if improvement < params.tolerance {
            model.converged = true;
            break;
        }
    }
    model.log_likelihood = ll;
    Ok(model)
}

/// Labels for every row of `lf`, whose columns must match the model's LFs.
pub fn predict_weak(lf: &LfMatrix, model: &LabelModel) -> Result<Vec<Label>> {
    if lf.names != model.lfs {
        return Err(Error::InvalidArgument(format!(
            "labeling functions [{}] do not match the model's [{}]",
            lf.names.join(", "),
            model.lfs.join(", ")
        )));
    }
    Ok(lf.votes.iter().map(|r| model.predict_row(r)).collect())
}
