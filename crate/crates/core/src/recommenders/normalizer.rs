use serde::{Deserialize, Serialize};

use crate::stats::ecdf_transform;
use crate::{Error, Result};

/// Empirical CDF of raw recommender scores. Maps a raw score to its
/// quantile, so the transformed scores of fresh draws are close to uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreNormalizer {
    sorted_sample: Vec<f64>,
}

impl ScoreNormalizer {
    pub fn from_sample(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Validation("normalizer sample is empty".into()));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("normalizer sample has non-finite scores".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self {
            sorted_sample: sample,
        })
    }

    pub fn transform(&self, raw: f64) -> f64 {
        ecdf_transform(&self.sorted_sample, raw).expect("sample is non-empty")
    }

    pub fn sorted_sample(&self) -> &[f64] {
        &self.sorted_sample
    }

    pub fn len(&self) -> usize {
        self.sorted_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_sample.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundaries() {
        let n = ScoreNormalizer::from_sample(vec![0.3, 0.1, 0.2]).unwrap();
        assert_eq!(n.transform(0.0), 0.0);
        assert_eq!(n.transform(5.0), 1.0);
        assert_eq!(n.sorted_sample(), &[0.1, 0.2, 0.3]);
        assert!(ScoreNormalizer::from_sample(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn monotone(sample in prop::collection::vec(0.0f64..1.0, 1..100), a in -1.0f64..2.0, b in -1.0f64..2.0) {
            let n = ScoreNormalizer::from_sample(sample).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(n.transform(lo) <= n.transform(hi));
            prop_assert!((0.0..=1.0).contains(&n.transform(a)));
        }
    }
}
