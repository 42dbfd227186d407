use serde::{Deserialize, Serialize};

use super::{ClassifyError, FeatureVector, LabeledSample, Prediction, Standardizer};
use crate::ingest::Label;
use crate::scalar::Scalar;

/// Euclidean k-nearest-neighbour vote over z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KnnModel<S: Scalar> {
    pub k: usize,
    pub seed: u64,
    pub standardizer: Standardizer<S>,
    /// Standardized training rows, row-major.
    pub points: Vec<Vec<S>>,
    pub labels: Vec<Label>,
}

pub fn knn_train<S: Scalar>(train: &[LabeledSample<S>], k: usize, seed: u64) -> Result<KnnModel<S>, ClassifyError> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(ClassifyError::InvalidK(k));
    }
    if k > train.len() {
        return Err(ClassifyError::KTooLarge { k, n: train.len() });
    }
    let standardizer = Standardizer::fit(train.iter().map(|s| s.features.as_slice()));
    let points = train.iter().map(|s| standardizer.transform(s.features.as_slice())).collect();
    let labels = train.iter().map(|s| s.label).collect();
    Ok(KnnModel { k, seed, standardizer, points, labels })
}

/// Majority of the `k` nearest; ties go to the smaller summed distance, then to `Label` order.
/// Equidistant neighbours are taken in training order.
pub fn knn_predict<S: Scalar>(model: &KnnModel<S>, features: &FeatureVector<S>) -> Prediction {
    let q = model.standardizer.transform(features.as_slice());
    let mut dist: Vec<(S, usize)> = model
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d2 = p.iter().zip(&q).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<S>();
            (d2.sqrt(), i)
        })
        .collect();
    let k = model.k.min(dist.len());
    let by_dist = |a: &(S, usize), b: &(S, usize)| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_dist);
    }
    let nearest = &mut dist[..k];
    nearest.sort_by(by_dist);

    let mut votes = [0usize; Label::COUNT];
    let mut summed = [0.0f64; Label::COUNT];
    for (d, i) in nearest.iter() {
        let c = model.labels[*i].index();
        votes[c] += 1;
        summed[c] += d.to_f64_lossy();
    }
    let mut best = None::<usize>;
    for c in 0..Label::COUNT {
        if votes[c] == 0 {
            continue;
        }
        best = match best {
            None => Some(c),
            Some(b) if votes[c] > votes[b] || (votes[c] == votes[b] && summed[c] < summed[b]) => Some(c),
            keep => keep,
        };
    }
    let mut distribution = [0.0; Label::COUNT];
    for c in 0..Label::COUNT {
        distribution[c] = votes[c] as f64 / k as f64;
    }
    Prediction { label: Label::from_index(best.expect("k >= 1")).expect("index in range"), distribution }
}
