//! Grouped search for the labeling-function subset whose label model best
//! reproduces the ground truth.

use rayon::prelude::*;
use serde::Serialize;

use super::label_model::{fit_label_model, predict_weak, EmParams, LabelModel};
use super::lfs::{LfMatrix, GROUPS};
use crate::error::{Error, Result};
use crate::evaluation::score;
use crate::label::Label;

/// Pools at most this large are searched exhaustively after merging.
const EXHAUSTIVE_POOL: usize = 12;
const MAX_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSearch {
    /// Column indices into the full matrix, ascending.
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    pub f_measure: f64,
    pub model: LabelModel,
    pub evaluated: usize,
}

/// F-measure of the label model fitted on `columns` against `labels`.
pub fn subset_score(lf: &LfMatrix, columns: &[usize], labels: &[Label], params: &EmParams) -> f64 {
    let sub = lf.select(columns);
    match fit_label_model(&sub, Some(labels), params) {
        Ok(model) => {
            let pred = predict_weak(&sub, &model).expect("columns match");
            score(&pred, labels).map(|r| r.f_measure).unwrap_or(0.0)
        }
        Err(_) => 0.0,
    }
}

/// Higher F first, then fewer LFs, then lexicographically smaller column list.
fn better(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> bool {
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    if a.0.len() != b.0.len() {
        return a.0.len() < b.0.len();
    }
    a.0 < b.0
}

fn best_of(cands: Vec<Vec<usize>>, lf: &LfMatrix, labels: &[Label], params: &EmParams) -> Option<(Vec<usize>, f64)> {
    cands
        .into_par_iter()
        .map(|c| {
            let f = subset_score(lf, &c, labels, params);
            (c, f)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
}

/// All non-empty subsets of `items`, each sorted ascending.
fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (1u32..(1 << items.len()))
        .map(|mask| {
            let mut s: Vec<usize> = (0..items.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| items[b])
                .collect();
            s.sort_unstable();
            s
        })
        .collect()
}

fn greedy(pool: &[usize], lf: &LfMatrix, labels: &[Label], params: &EmParams) -> (Vec<usize>, f64, usize) {
    let mut chosen: Vec<usize> = Vec::new();
    let mut best_f = f64::NEG_INFINITY;
    let mut evaluated = 0;
    loop {
        let cands: Vec<Vec<usize>> = pool
            .iter()
            .filter(|j| !chosen.contains(j))
            .map(|&j| {
                let mut c = chosen.clone();
                c.push(j);
                c.sort_unstable();
                c
            })
            .collect();
        if cands.is_empty() {
            break;
        }
        evaluated += cands.len();
        let (c, f) = best_of(cands, lf, labels, params).expect("non-empty");
        if f > best_f {
            chosen = c;
            best_f = f;
        } else {
            break;
        }
    }
    (chosen, best_f, evaluated)
}

/// Best subset within each group, merge the winners, reselect within the
/// merged pool, then revisit each group with the others held fixed until the
/// F-measure stops improving.
pub fn search_lf_subset(lf: &LfMatrix, labels: &[Label], params: &EmParams) -> Result<SubsetSearch> {
    if lf.names.len() != 21 {
        return Err(Error::InvalidArgument(format!(
            "subset search expects the 21 labeling functions, got {}",
            lf.names.len()
        )));
    }
    if labels.len() != lf.votes.len() {
        return Err(Error::LengthMismatch {
            left: lf.votes.len(),
            right: labels.len(),
        });
    }
    let mut evaluated = 0;
    let mut winners = Vec::new();
    for g in GROUPS {
        let members: Vec<usize> = g.collect();
        let cands = subsets(&members);
        evaluated += cands.len();
        winners.push(best_of(cands, lf, labels, params).expect("non-empty group"));
    }
    let mut best = winners
        .iter()
        .cloned()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .unwrap();

    let mut pool: Vec<usize> = winners.iter().flat_map(|w| w.0.iter().copied()).collect();
    pool.sort_unstable();
    pool.dedup();
    let merged = if pool.len() <= EXHAUSTIVE_POOL {
        let cands = subsets(&pool);
        evaluated += cands.len();
        best_of(cands, lf, labels, params).unwrap()
    } else {
        let (c, f, e) = greedy(&pool, lf, labels, params);
        evaluated += e;
        (c, f)
    };
    if better(&merged, &best) {
        best = merged;
    }

    for _ in 0..MAX_ROUNDS {
        let mut improved = false;
        for g in GROUPS {
            let members: Vec<usize> = g.clone().collect();
            let rest: Vec<usize> = best.0.iter().copied().filter(|j| !g.contains(j)).collect();
            let mut cands: Vec<Vec<usize>> = subsets(&members)
                .into_iter()
                .map(|t| {
                    let mut c = rest.clone();
                    c.extend(t);
                    c.sort_unstable();
                    c
                })
                .collect();
            if !rest.is_empty() {
                cands.push(rest.clone());
            }
            evaluated += cands.len();
            let cand = best_of(cands, lf, labels, params).unwrap();
            if cand.1 > best.1 {
                best = cand;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    let sub = lf.select(&best.0);
    let model = fit_label_model(&sub, Some(labels), params)?;
    Ok(SubsetSearch {
        names: sub.names.clone(),
        selected: best.0,
        f_measure: best.1,
        model,
        evaluated,
    })
}
