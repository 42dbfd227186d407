use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ClassifyError;
use crate::ingest::Label;

/// Seeded train/test partition returning sorted index lists.
///
/// Stratified splits shuffle each class separately and send `round(ratio * n_c)` of it to
/// training, clamped so every class with two or more samples lands on both sides.
pub fn split_dataset(
    labels: &[Label],
    ratio: f64,
    stratified: bool,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), ClassifyError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ClassifyError::InvalidRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        Label::ALL
            .iter()
            .map(|l| labels.iter().enumerate().filter(|(_, x)| *x == l).map(|(i, _)| i).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (g, mut members) in groups.into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if stratified && n < 2 {
            return Err(ClassifyError::ClassTooSmall(Label::ALL[g]));
        }
        members.shuffle(&mut rng);
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(ClassifyError::InvalidRatio(ratio));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
