//! L2-regularized hinge loss minimized by stochastic subgradient descent
//! (Pegasos step sizes, averaged iterates, unregularized bias).

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdParams {
    pub lambda: f64,
    pub epochs: usize,
    pub max_learning_rate: f64,
    pub seed: u64,
}

/// Column means and standard deviations; a constant column gets scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Express a separator learned on standardized inputs in original units.
    pub fn unstandardize(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let wo: Vec<f64> = w.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let bo = b - wo.iter().zip(&self.mean).map(|(w, m)| w * m).sum::<f64>();
        (wo, bo)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fit `sign(w·x + b)` with `y = true` on the positive side. Sample weights
/// act through weighted sampling. Inputs are standardized internally; the
/// returned separator is in original units.
pub fn fit_hinge(
    x: &[Vec<f64>],
    y: &[bool],
    sample_weights: Option<&[f64]>,
    params: &SgdParams,
) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if params.lambda.is_nan() || params.lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", params.lambda)));
    }
    let std = Standardizer::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| std.apply(r)).collect();
    let d = xs[0].len();
    let ys: Vec<f64> = y.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sampler = match sample_weights {
        Some(w) if w.len() != n => return Err(Error::LengthMismatch { left: n, right: w.len() }),
        Some(w) => Some(
            WeightedIndex::new(w)
                .map_err(|e| Error::InvalidArgument(format!("invalid sample weights: {e}")))?,
        ),
        None => None,
    };

    let total = params.epochs.max(1) * n;
    let average_from = total / 2;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut w_avg = vec![0.0; d];
    let mut b_avg = 0.0;
    let mut averaged = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..params.epochs.max(1) {
        match &sampler {
            Some(s) => order.iter_mut().for_each(|i| *i = s.sample(&mut rng)),
            None => order.shuffle(&mut rng),
        }
        for &i in &order {
            t += 1;
            let eta = params.max_learning_rate.min(1.0 / (params.lambda * t as f64));
            let margin = ys[i] * (dot(&w, &xs[i]) + b);
            let shrink = 1.0 - eta * params.lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += eta * ys[i] * xj;
                }
                b += eta * ys[i];
            }
            if t > average_from {
                averaged += 1;
                let r = 1.0 / averaged as f64;
                for (a, wj) in w_avg.iter_mut().zip(&w) {
                    *a += (wj - *a) * r;
                }
                b_avg += (b - b_avg) * r;
            }
        }
    }
    Ok(std.unstandardize(&w_avg, b_avg))
}
