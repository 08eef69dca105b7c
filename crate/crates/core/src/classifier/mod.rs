//! Supervised segmentation with a linear max-margin model: feature
//! selection by correlation, oversampling, optional kernel-mean-matching
//! sample weights, and a regularization strength picked by randomized search
//! under stratified cross-validation.

pub mod kmm;
pub mod smote;
pub mod svm;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ClassifierConfig;
use crate::error::{Error, Result};
use crate::evaluation::{score, EvaluationReport};
use crate::features::FEATURE_NAMES;
use crate::indexes::INDEX_NAMES;
use crate::label::Label;
use crate::stats;
use crate::workload::{QueryRecord, Workload};

pub use kmm::{kmm_reweight, KmmParams, KmmResult};
pub use smote::{smote, Samples};
pub use svm::{fit_hinge, SgdParams, Standardizer};

pub const METHOD: &str = "classifier";

/// Candidate inputs: every metric except JI (the Jaccard index carries the
/// same value) followed by the five indexes.
pub fn candidate_features() -> Vec<&'static str> {
    FEATURE_NAMES
        .iter()
        .copied()
        .filter(|n| *n != "JI")
        .chain(INDEX_NAMES)
        .collect()
}

/// Value of a metric or index of one query.
pub fn feature_value(q: &QueryRecord, name: &str) -> Result<f64> {
    if let Some(v) = q.features.as_ref().and_then(|f| f.get(name)) {
        return Ok(v);
    }
    if let Some(v) = q.indexes.as_ref().and_then(|ix| ix.get(name)) {
        return Ok(v);
    }
    Err(Error::missing(&q.query_id, format!("feature {name}")))
}

pub fn feature_matrix(workload: &Workload, names: &[String]) -> Result<Vec<Vec<f64>>> {
    workload
        .queries()
        .map(|q| names.iter().map(|n| feature_value(q, n)).collect())
        .collect()
}

/// Training metadata kept alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub lambda: f64,
    pub folds: usize,
    pub oversampling: String,
    pub sample_weights: bool,
    pub cv_f_measure: f64,
    pub cv_accuracy: f64,
    pub seed: u64,
}

/// `SEGMENT` iff `w·x + b > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: TrainingInfo,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> Label {
        Label::from_bool(self.decision(x) > 0.0)
    }

    pub fn predict(&self, workload: &Workload) -> Result<Vec<Label>> {
        Ok(feature_matrix(workload, &self.features)?
            .iter()
            .map(|r| self.predict_row(r))
            .collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: LinearModel = serde_json::from_str(text)?;
        if m.weights.len() != m.features.len() {
            return Err(Error::LengthMismatch {
                left: m.weights.len(),
                right: m.features.len(),
            });
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Store the model's labels as the `classifier` prediction.
pub fn predict(workload: &mut Workload, model: &LinearModel) -> Result<()> {
    let labels = model.predict(workload)?;
    workload.set_predictions(METHOD, &labels)
}

/// Seeded stratified fold id per row.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    fold
}

/// Mean F-measure and accuracy of held-out folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvScore {
    pub f_measure: f64,
    pub accuracy: f64,
    pub folds_used: usize,
}

fn fit_samples(train: &Samples, lambda: f64, config: &ClassifierConfig, seed: u64) -> Result<(Vec<f64>, f64)> {
    let train = if config.oversample {
        smote(train, config.smote_k, seed)?
    } else {
        train.clone()
    };
    let weights = train.weights.iter().any(|w| *w != 1.0).then_some(train.weights.as_slice());
    fit_hinge(
        &train.x,
        &train.y,
        weights,
        &SgdParams {
            lambda,
            epochs: config.epochs,
            max_learning_rate: config.max_learning_rate,
            seed,
        },
    )
}

/// Stratified k-fold estimate. Folds whose training part has one class are skipped.
pub fn cross_validate(samples: &Samples, lambda: f64, config: &ClassifierConfig, seed: u64) -> Result<CvScore> {
    let k = config.folds.max(2).min(samples.len());
    let fold = stratified_folds(&samples.y, k, seed);
    let mut f_sum = 0.0;
    let mut acc_sum = 0.0;
    let mut used = 0;
    for f in 0..k {
        let train_idx: Vec<usize> = (0..samples.len()).filter(|&i| fold[i] != f).collect();
        let test_idx: Vec<usize> = (0..samples.len()).filter(|&i| fold[i] == f).collect();
        if test_idx.is_empty() {
            continue;
        }
        let train = samples.subset(&train_idx);
        let (pos, neg) = train.class_counts();
        if pos == 0 || neg == 0 {
            log::warn!("skipping fold {f}: training part has a single class");
            continue;
        }
        let (w, b) = fit_samples(&train, lambda, config, seed.wrapping_add(f as u64))?;
        let pred: Vec<Label> = test_idx
            .iter()
            .map(|&i| {
                let d = b + w.iter().zip(&samples.x[i]).map(|(w, v)| w * v).sum::<f64>();
                Label::from_bool(d > 0.0)
            })
            .collect();
        let truth: Vec<Label> = test_idx.iter().map(|&i| Label::from_bool(samples.y[i])).collect();
        let r = score(&pred, &truth)?;
        f_sum += r.f_measure;
        acc_sum += r.accuracy;
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData("no usable cross-validation fold".into()));
    }
    Ok(CvScore {
        f_measure: f_sum / used as f64,
        accuracy: acc_sum / used as f64,
        folds_used: used,
    })
}

/// Candidates ordered by decreasing |Pearson r| with the SEGMENT indicator
/// (ties keep candidate order).
pub fn rank_by_correlation(x: &[Vec<f64>], y: &[bool], names: &[String]) -> Vec<(String, f64)> {
    let yf: Vec<f64> = y.iter().map(|b| *b as u8 as f64).collect();
    let mut ranked: Vec<(String, f64)> = names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            (n.clone(), stats::pearson(&col, &yf))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    ranked
}

/// Greedy prefix of the correlation ranking: the next feature is added only
/// while both cross-validated F-measure and accuracy strictly improve.
pub fn select_features(
    x: &[Vec<f64>],
    y: &[bool],
    names: &[String],
    lambda: f64,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<Vec<String>> {
    let ranked = rank_by_correlation(x, y, names);
    let col_of = |n: &str| names.iter().position(|m| m == n).unwrap();
    let order: Vec<usize> = ranked.iter().map(|(n, _)| col_of(n)).collect();
    let project = |k: usize| -> Vec<Vec<f64>> {
        x.iter().map(|r| order[..k].iter().map(|&j| r[j]).collect()).collect()
    };
    let mut best = cross_validate(&Samples::new(project(1), y.to_vec(), None)?, lambda, config, seed)?;
    let mut k = 1;
    while k < order.len() {
        let s = cross_validate(&Samples::new(project(k + 1), y.to_vec(), None)?, lambda, config, seed)?;
        log::debug!("prefix {}: F {:.4} acc {:.4}", k + 1, s.f_measure, s.accuracy);
        if s.f_measure > best.f_measure && s.accuracy > best.accuracy {
            best = s;
            k += 1;
        } else {
            break;
        }
    }
    Ok(order[..k].iter().map(|&j| names[j].clone()).collect())
}

/// Randomized search over lambda (log-uniform draws), then refit on all
/// rows. The best draw maximizes mean F, then accuracy, then prefers the
/// smaller lambda.
pub fn train(samples: &Samples, features: &[String], config: &ClassifierConfig, seed: u64) -> Result<LinearModel> {
    let (pos, neg) = samples.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData("training needs both labels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (config.lambda_min.log10(), config.lambda_max.log10());
    let lambdas: Vec<f64> = (0..config.lambda_draws.max(1))
        .map(|_| 10f64.powf(rng.random_range(lo..=hi)))
        .collect();
    let scored: Vec<(f64, CvScore)> = lambdas
        .par_iter()
        .map(|&l| cross_validate(samples, l, config, seed).map(|s| (l, s)))
        .collect::<Result<_>>()?;
    let (lambda, cv) = scored
        .into_iter()
        .max_by(|a, b| {
            a.1.f_measure
                .total_cmp(&b.1.f_measure)
                .then(a.1.accuracy.total_cmp(&b.1.accuracy))
                .then(b.0.total_cmp(&a.0))
        })
        .expect("at least one draw");
    let (weights, bias) = fit_samples(samples, lambda, config, seed)?;
    Ok(LinearModel {
        features: features.to_vec(),
        weights,
        bias,
        config: TrainingInfo {
            lambda,
            folds: config.folds,
            oversampling: if config.oversample { format!("smote(k={})", config.smote_k) } else { "none".into() },
            sample_weights: samples.weights.iter().any(|w| *w != 1.0),
            cv_f_measure: cv.f_measure,
            cv_accuracy: cv.accuracy,
            seed,
        },
    })
}

/// Seeded stratified split into (train, test) row indices.
pub fn train_test_split(y: &[bool], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64) * train_fraction).round() as usize;
        test.extend_from_slice(&idx[n_train.min(idx.len())..]);
        idx.truncate(n_train);
        train.extend(idx);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Result of the full supervised pipeline on a labeled workload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingOutcome {
    pub model: LinearModel,
    /// Score on the held-out split (absent when the split is empty).
    pub test_report: Option<EvaluationReport>,
    pub kmm: Option<KmmResult>,
}

/// Lambda used while ranking feature prefixes, before the randomized search.
pub const SELECTION_LAMBDA: f64 = 0.01;

/// Select features (unless fixed in `config`), split, optionally reweight the
/// training rows towards `target` by KMM, train and score the held-out part.
pub fn fit_classifier(
    labeled: &Workload,
    target: Option<&Workload>,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<TrainingOutcome> {
    let y: Vec<bool> = labeled
        .require_labels("ground_truth")?
        .into_iter()
        .map(Label::is_segment)
        .collect();
    let (train_idx, test_idx) = train_test_split(&y, config.train_fraction, seed);
    let pick = |m: &[Vec<f64>], idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&i| m[i].clone()).collect() };
    let y_train: Vec<bool> = train_idx.iter().map(|&i| y[i]).collect();

    let features = match &config.features {
        Some(f) => f.clone(),
        None => {
            let names: Vec<String> = candidate_features().into_iter().map(String::from).collect();
            let all = feature_matrix(labeled, &names)?;
            select_features(&pick(&all, &train_idx), &y_train, &names, SELECTION_LAMBDA, config, seed)?
        }
    };
    log::info!("classifier features: {}", features.join(", "));
    let x = feature_matrix(labeled, &features)?;
    let x_train = pick(&x, &train_idx);

    let kmm = match target {
        Some(t) => {
            let xt = feature_matrix(t, &features)?;
            let mut both = x_train.clone();
            both.extend(xt.iter().cloned());
            let s = Standardizer::fit(&both);
            let src: Vec<Vec<f64>> = x_train.iter().map(|r| s.apply(r)).collect();
            let tgt: Vec<Vec<f64>> = xt.iter().map(|r| s.apply(r)).collect();
            Some(kmm_reweight(
                &src,
                &tgt,
                &KmmParams {
                    bound: config.kmm_bound,
                    epsilon: config.kmm_epsilon,
                    bandwidth: config.kmm_bandwidth,
                    max_iter: config.kmm_max_iter,
                    seed,
                    ..KmmParams::default()
                },
            )?)
        }
        None => None,
    };
    let samples = Samples::new(x_train, y_train, kmm.as_ref().map(|k| k.beta.clone()))?;
    let model = train(&samples, &features, config, seed)?;
    let test_report = if test_idx.is_empty() {
        None
    } else {
        let pred: Vec<Label> = test_idx.iter().map(|&i| model.predict_row(&x[i])).collect();
        let truth: Vec<Label> = test_idx.iter().map(|&i| Label::from_bool(y[i])).collect();
        Some(score(&pred, &truth)?)
    };
    Ok(TrainingOutcome { model, test_report, kmm })
}
