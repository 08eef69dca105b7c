//! Weak supervision: heuristic labeling functions combined by a generative
//! label model, with the subset of functions chosen on labeled data.

pub mod label_model;
pub mod lfs;
pub mod search;

use serde::Serialize;

use crate::config::WeakConfig;
use crate::error::Result;
use crate::workload::Workload;

pub use label_model::{fit_label_model, predict_weak, EmParams, LabelModel};
pub use lfs::{lf_names, lf_votes, run_lfs, LfMatrix, Vote, GROUPS};
pub use search::{search_lf_subset, subset_score, SubsetSearch};

pub const METHOD: &str = "weak";

impl From<&WeakConfig> for EmParams {
    fn from(c: &WeakConfig) -> Self {
        EmParams {
            max_iter: c.max_iter,
            tolerance: c.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakTraining {
    pub model: LabelModel,
    /// F-measure on the labeled workload.
    pub f_measure: f64,
    /// Number of subsets scored (0 when the subset was fixed).
    pub evaluated: usize,
}

/// Choose the LF subset on `labeled` (unless fixed in `config`) and fit the
/// label model there.
pub fn fit_weak(labeled: &Workload, config: &WeakConfig) -> Result<WeakTraining> {
    let labels = labeled.require_labels("ground_truth")?;
    let lf = run_lfs(labeled)?;
    let params = EmParams::from(config);
    match &config.lfs {
        Some(names) => {
            let sub = lf.select_names(names)?;
            let model = fit_label_model(&sub, Some(&labels), &params)?;
            let pred = predict_weak(&sub, &model)?;
            let f = crate::evaluation::score(&pred, &labels)?.f_measure;
            Ok(WeakTraining {
                model,
                f_measure: f,
                evaluated: 0,
            })
        }
        None => {
            let s = search_lf_subset(&lf, &labels, &params)?;
            Ok(WeakTraining {
                model: s.model,
                f_measure: s.f_measure,
                evaluated: s.evaluated,
            })
        }
    }
}

/// Label `workload` with a fitted model and store the `weak` prediction.
pub fn apply_weak(workload: &mut Workload, model: &LabelModel) -> Result<()> {
    let lf = run_lfs(workload)?.select_names(&model.lfs)?;
    let labels = predict_weak(&lf, model)?;
    workload.set_predictions(METHOD, &labels)
}
