use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Per-column z-scoring fitted on training rows. Constant columns keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<S: Scalar> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
}

impl<S: Scalar> Standardizer<S> {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [S]>) -> Self {
        let rows: Vec<&[S]> = rows.into_iter().collect();
        let width = rows.first().map_or(0, |r| r.len());
        let n = S::from_count(rows.len().max(1) as u64);
        let mut mean = vec![S::zero(); width];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += *x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![S::zero(); width];
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                let d = *x - *m;
                *v += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > S::epsilon() { s } else { S::one() }
            })
            .collect();
        Self { mean, std }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[S]) -> Vec<S> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (*x - *m) / *s).collect()
    }
}
