use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};
use crate::traffic::Label;

use super::{ControlError, FeatureVector, N_FEATURES};

/// Per-feature min-max scaling fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl Normalizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> Option<Self> {
        let mut it = rows.into_iter();
        let first = it.next()?;
        let mut n = Normalizer { min: first.0, max: first.0 };
        for r in it {
            for i in 0..N_FEATURES {
                n.min[i] = n.min[i].min(r.0[i]);
                n.max[i] = n.max[i].max(r.0[i]);
            }
        }
        Some(n)
    }

    /// Maps training values into [0, 1]; constant features map to 0.
    /// Values outside the training range are not clamped.
    pub fn apply(&self, x: &FeatureVector) -> [f64; N_FEATURES] {
        std::array::from_fn(|i| {
            let span = self.max[i] - self.min[i];
            if span > 0.0 {
                (x.0[i] - self.min[i]) / span
            } else {
                0.0
            }
        })
    }

    /// Normalizes, clamps to [0, 1] and scales to `bits`-wide integers.
    pub fn quantize(&self, x: &FeatureVector, bits: u32) -> Vec<u32> {
        let top = ((1u64 << bits) - 1) as f64;
        self.apply(x).iter().map(|v| (v.clamp(0.0, 1.0) * top).round() as u32).collect()
    }
}

/// Training rows plus the normalizer fitted on them. Immutable once built.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    rows: Vec<[f64; N_FEATURES]>,
    labels: Vec<Label>,
    normalizer: Normalizer,
}

pub fn knn_train(rows: &[(FeatureVector, Label)]) -> Result<LabeledDataset, ControlError> {
    let normalizer = Normalizer::fit(rows.iter().map(|(x, _)| x))
        .ok_or_else(|| ControlError::Argument("no training rows".into()))?;
    if rows.iter().any(|(x, _)| x.0.iter().any(|v| !v.is_finite())) {
        return Err(ControlError::Argument("non-finite feature in training rows".into()));
    }
    Ok(LabeledDataset {
        rows: rows.iter().map(|(x, _)| normalizer.apply(x)).collect(),
        labels: rows.iter().map(|(_, l)| *l).collect(),
        normalizer,
    })
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn classify(&self, x: &FeatureVector, k: usize) -> Result<Label, ControlError> {
        if k == 0 || k > self.rows.len() {
            return Err(ControlError::Argument(format!("k = {k} with {} training rows", self.rows.len())));
        }
        if x.0.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::Argument("non-finite query feature".into()));
        }
        let q = self.normalizer.apply(x);
        // k best (distance, index), ascending; rows are scanned in index
        // order, so an equal distance never displaces an earlier row
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, r) in self.rows.iter().enumerate() {
            let d: f64 = r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        let ddos = best.iter().filter(|(_, i)| self.labels[*i] == Label::Ddos).count();
        // ties go to ddos
        Ok(if 2 * ddos >= k { Label::Ddos } else { Label::Benign })
    }

    pub fn classify_batch(&self, xs: &[FeatureVector], k: usize, exec: Execution) -> Result<Vec<Label>, ControlError> {
        par::map(exec, xs, |x| self.classify(x, k)).into_iter().collect()
    }
}

pub fn knn_classify(ds: &LabeledDataset, x: &FeatureVector, k: usize) -> Result<Label, ControlError> {
    ds.classify(x, k)
}
