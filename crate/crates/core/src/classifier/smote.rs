//! Minority oversampling by interpolation towards nearest minority neighbors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Training rows with labels and per-row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
    pub weights: Vec<f64>,
}

impl Samples {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<bool>, weights: Option<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; y.len()]);
        if weights.len() != y.len() {
            return Err(Error::LengthMismatch { left: weights.len(), right: y.len() });
        }
        Ok(Samples { x, y, weights })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|b| **b).count();
        (pos, self.y.len() - pos)
    }

    pub fn subset(&self, idx: &[usize]) -> Samples {
        Samples {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `points`) of the `k` nearest other points of each point.
fn nearest_neighbors(points: &[&Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, q)| (sq_dist(p, q), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Grow the minority class to the majority's size. Original rows are kept
/// in place and synthetic rows appended. A single minority row is duplicated.
pub fn smote(samples: &Samples, k: usize, seed: u64) -> Result<Samples> {
    let (pos, neg) = samples.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData("oversampling needs both classes".into()));
    }
    let minority_label = pos < neg;
    let need = pos.abs_diff(neg);
    let mut out = samples.clone();
    if need == 0 {
        return Ok(out);
    }
    let members: Vec<usize> = (0..samples.len())
        .filter(|&i| samples.y[i] == minority_label)
        .collect();
    let points: Vec<&Vec<f64>> = members.iter().map(|&i| &samples.x[i]).collect();
    let neighbors = nearest_neighbors(&points, k.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut bases: Vec<usize> = Vec::with_capacity(need);
    while bases.len() < need {
        let mut round: Vec<usize> = (0..members.len()).collect();
        round.shuffle(&mut rng);
        bases.extend(round.into_iter().take(need - bases.len()));
    }
    for b in bases {
        let base = &samples.x[members[b]];
        let wb = samples.weights[members[b]];
        let (row, w) = if neighbors[b].is_empty() {
            (base.clone(), wb)
        } else {
            let nb = neighbors[b][rng.random_range(0..neighbors[b].len())];
            let other = &samples.x[members[nb]];
            let wo = samples.weights[members[nb]];
            let gap: f64 = rng.random_range(0.0..=1.0);
            (
                base.iter().zip(other).map(|(a, o)| a + gap * (o - a)).collect(),
                wb + gap * (wo - wb),
            )
        };
        out.x.push(row);
        out.y.push(minority_label);
        out.weights.push(w);
    }
    Ok(out)
}
