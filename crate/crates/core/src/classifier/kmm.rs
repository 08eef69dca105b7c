//! Kernel mean matching: source-row weights that align the source kernel
//! mean with the target's, under box and mean constraints.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmmParams {
    pub bound: f64,
    /// Defaults to `1/sqrt(n)`.
    pub epsilon: Option<f64>,
    /// Defaults to the median pairwise distance.
    pub bandwidth: Option<f64>,
    pub max_iter: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for KmmParams {
    fn default() -> Self {
        KmmParams {
            bound: 1000.0,
            epsilon: None,
            bandwidth: None,
            max_iter: 1000,
            tolerance: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmmResult {
    pub beta: Vec<f64>,
    /// Squared distance between the weighted source and target kernel means.
    pub objective: f64,
    pub bandwidth: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
}

const BANDWIDTH_SAMPLE: usize = 1000;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median pairwise Euclidean distance over (a sample of) the points; 1 when
/// all points coincide.
pub fn median_distance(points: &[&[f64]], seed: u64) -> f64 {
    let picked: Vec<&[f64]> = if points.len() > BANDWIDTH_SAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, points.len(), BANDWIDTH_SAMPLE).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| points[i]).collect()
    } else {
        points.to_vec()
    };
    let mut d = Vec::new();
    for i in 0..picked.len() {
        for j in i + 1..picked.len() {
            d.push(sq_dist(picked[i], picked[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Euclidean projection onto `{0 <= b <= bound, |mean(b) - 1| <= eps}`.
pub fn project(z: &[f64], bound: f64, eps: f64) -> Vec<f64> {
    let n = z.len() as f64;
    let clip = |tau: f64| -> Vec<f64> { z.iter().map(|v| (v - tau).clamp(0.0, bound)).collect() };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let c = clip(0.0);
    let m = mean(&c);
    let target = if m > 1.0 + eps {
        1.0 + eps
    } else if m < 1.0 - eps {
        1.0 - eps
    } else {
        return c;
    };
    // mean(clip(z - tau)) is non-increasing in tau
    let lo_z = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_z = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_z - bound, hi_z);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(&clip(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

struct Problem {
    k: Vec<Vec<f64>>,
    kappa: Vec<f64>,
    constant: f64,
    n: f64,
    m: f64,
}

impl Problem {
    fn objective(&self, beta: &[f64]) -> f64 {
        let quad: f64 = self
            .k
            .par_iter()
            .zip(beta)
            .map(|(row, bi)| bi * row.iter().zip(beta).map(|(k, bj)| k * bj).sum::<f64>())
            .sum();
        let lin: f64 = beta.iter().zip(&self.kappa).map(|(b, k)| b * k).sum();
        (quad / (self.n * self.n) - 2.0 * lin / (self.n * self.m) + self.constant).max(0.0)
    }

    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        self.k
            .par_iter()
            .zip(&self.kappa)
            .map(|(row, kap)| {
                let kb: f64 = row.iter().zip(beta).map(|(k, b)| k * b).sum();
                2.0 * kb / (self.n * self.n) - 2.0 * kap / (self.n * self.m)
            })
            .collect()
    }
}

/// Weights for `source` rows. Projected gradient descent from `beta = 1`
/// with step `1/L`, `L` bounded by the largest kernel row sum.
pub fn kmm_reweight(source: &[Vec<f64>], target: &[Vec<f64>], params: &KmmParams) -> Result<KmmResult> {
    let (n, m) = (source.len(), target.len());
    if n == 0 || m == 0 {
        return Err(Error::InsufficientData("KMM needs non-empty source and target".into()));
    }
    let d = source[0].len();
    if source.iter().chain(target).any(|r| r.len() != d) {
        return Err(Error::InvalidArgument("source and target rows differ in dimension".into()));
    }
    let eps = params.epsilon.unwrap_or(1.0 / (n as f64).sqrt());
    let sigma = params.bandwidth.unwrap_or_else(|| {
        let all: Vec<&[f64]> = source.iter().chain(target).map(Vec::as_slice).collect();
        median_distance(&all, params.seed)
    });
    if n == 1 {
        // a single weight carries no relative information
        return Ok(KmmResult {
            beta: vec![1.0],
            objective: f64::NAN,
            bandwidth: sigma,
            epsilon: eps,
            iterations: 0,
            converged: true,
        });
    }
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let kern = |a: &[f64], b: &[f64]| (-gamma * sq_dist(a, b)).exp();
    let k: Vec<Vec<f64>> = source
        .par_iter()
        .map(|a| source.iter().map(|b| kern(a, b)).collect())
        .collect();
    let kappa: Vec<f64> = source
        .par_iter()
        .map(|a| target.iter().map(|b| kern(a, b)).sum())
        .collect();
    let constant: f64 = target
        .par_iter()
        .map(|a| target.iter().map(|b| kern(a, b)).sum::<f64>())
        .sum::<f64>()
        / (m as f64 * m as f64);
    let problem = Problem {
        k,
        kappa,
        constant,
        n: n as f64,
        m: m as f64,
    };

    let lipschitz = 2.0
        * problem
            .k
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0, f64::max)
        / (problem.n * problem.n);
    let step = 1.0 / lipschitz;

    let mut beta = project(&vec![1.0; n], params.bound, eps);
    let mut obj = problem.objective(&beta);
    let mut best = (obj, beta.clone());
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iter {
        iterations = it;
        let g = problem.gradient(&beta);
        let z: Vec<f64> = beta.iter().zip(&g).map(|(b, g)| b - step * g).collect();
        let next = project(&z, params.bound, eps);
        let moved = sq_dist(&next, &beta).sqrt();
        beta = next;
        let new_obj = problem.objective(&beta);
        if new_obj < best.0 {
            best = (new_obj, beta.clone());
        }
        let delta = (obj - new_obj).abs();
        obj = new_obj;
        if moved <= params.tolerance * (n as f64).sqrt() || delta <= params.tolerance * obj.max(1e-300) || obj == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("KMM did not converge in {} iterations; returning best iterate", params.max_iter);
    }
    Ok(KmmResult {
        beta: best.1,
        objective: best.0,
        bandwidth: sigma,
        epsilon: eps,
        iterations,
        converged,
    })
}
