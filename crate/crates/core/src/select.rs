//! Choosing which input positions become attack variables.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExecError, FormatError};
use crate::nn::{forward_concrete, ModelSpec, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SelectionPolicy {
    Random {
        seed: u64,
    },
    /// Precomputed scores (e.g. SHAP values), one per flattened position.
    ImportanceFile {
        path: PathBuf,
    },
    Occlusion {
        baseline: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum SelectError {
    #[error("cannot select {k} of {size} positions")]
    Count { k: usize, size: usize },
    #[error("{len} scores for an input of {size} positions")]
    Length { len: usize, size: usize },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

fn check_count(size: usize, k: usize) -> Result<(), SelectError> {
    if k == 0 || k > size {
        return Err(SelectError::Count { k, size });
    }
    Ok(())
}

/// `k` distinct positions drawn uniformly without replacement, in draw order.
pub fn select_random(size: usize, k: usize, seed: u64) -> Result<Vec<usize>, SelectError> {
    check_count(size, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, size, k).into_vec())
}

/// Positions of the `k` largest scores, highest first; ties go to the lower
/// index. NaN scores rank below everything.
pub fn select_by_scores(scores: &[f64], k: usize) -> Result<Vec<usize>, SelectError> {
    check_count(scores.len(), k)?;
    let key = |i: usize| {
        if scores[i].is_nan() {
            f64::NEG_INFINITY
        } else {
            scores[i]
        }
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Drop in the originally predicted class probability when each position
/// alone is replaced by `baseline`.
pub fn occlusion_scores(
    model: &ModelSpec,
    input: &Tensor,
    baseline: f64,
) -> Result<Vec<f64>, ExecError> {
    let original = forward_concrete(model, input)?;
    let p0 = original.probs[original.class];
    let values = input.values();
    let mut scores = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let mut occluded = values.clone();
        occluded[i] = baseline;
        let x = Tensor::from_values(input.shape().to_vec(), &occluded)?;
        scores.push(p0 - forward_concrete(model, &x)?.probs[original.class]);
    }
    Ok(scores)
}

/// Reads a JSON array of numbers and checks it has `size` entries.
pub fn load_scores(path: &Path, size: usize) -> Result<Vec<f64>, SelectError> {
    let text = crate::nn::read(path)?;
    let scores: Vec<f64> = serde_json::from_str(&text).map_err(FormatError::from)?;
    if scores.len() != size {
        return Err(SelectError::Length {
            len: scores.len(),
            size,
        });
    }
    Ok(scores)
}

impl SelectionPolicy {
    pub fn select(
        &self,
        model: &ModelSpec,
        input: &Tensor,
        k: usize,
    ) -> Result<Vec<usize>, SelectError> {
        match self {
            SelectionPolicy::Random { seed } => select_random(input.len(), k, *seed),
            SelectionPolicy::ImportanceFile { path } => {
                select_by_scores(&load_scores(path, input.len())?, k)
            }
            SelectionPolicy::Occlusion { baseline } => {
                check_count(input.len(), k)?;
                select_by_scores(&occlusion_scores(model, input, *baseline)?, k)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SelectionPolicy::Random { seed } => format!("random(seed={seed})"),
            SelectionPolicy::ImportanceFile { path } => format!("scores:{}", path.display()),
            SelectionPolicy::Occlusion { baseline } => format!("occlusion(baseline={baseline})"),
        }
    }
}
