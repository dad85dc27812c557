use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.55,
            test_fraction: 0.20,
            val_fraction: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.test_fraction, self.val_fraction];
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid(format!(
                "split fractions {f:?} must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }

    /// (train, test, val) sizes: test and val are rounded, train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = (n as f64 * self.test_fraction).round() as usize;
        let val = ((n as f64 * self.val_fraction).round() as usize).min(n - test.min(n));
        let test = test.min(n);
        (n - test - val, test, val)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub val: Vec<T>,
}

/// Seeded shuffle and partition into train / test / validation.
pub fn split<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<Splits<T>> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (n_train, n_test, _) = spec.sizes(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok(Splits {
        train: pick(&order[..n_train]),
        test: pick(&order[n_train..n_train + n_test]),
        val: pick(&order[n_train + n_test..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn hundred_samples_split_55_20_25() {
        let items: Vec<u32> = (0..100).collect();
        let s = split(&items, &SplitSpec::with_seed(1)).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.val.len()), (55, 20, 25));
        let all: HashSet<u32> = s
            .train
            .iter()
            .chain(&s.test)
            .chain(&s.val)
            .copied()
            .collect();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn single_sample_goes_to_train() {
        let s = split(&[7u8], &SplitSpec::default()).unwrap();
        assert_eq!((s.train, s.test.len(), s.val.len()), (vec![7], 0, 0));
        let s = split::<u8>(&[], &SplitSpec::default()).unwrap();
        assert!(s.train.is_empty());
    }

    #[test]
    fn seed_determinism() {
        let items: Vec<u32> = (0..57).collect();
        assert_eq!(
            split(&items, &SplitSpec::with_seed(4)).unwrap(),
            split(&items, &SplitSpec::with_seed(4)).unwrap()
        );
        assert_ne!(
            split(&items, &SplitSpec::with_seed(4)).unwrap(),
            split(&items, &SplitSpec::with_seed(5)).unwrap()
        );
    }

    #[test]
    fn fractions_honoured_within_one_sample() {
        for n in 0..300 {
            let (tr, te, va) = SplitSpec::default().sizes(n);
            assert_eq!(tr + te + va, n);
            assert!((tr as f64 - 0.55 * n as f64).abs() <= 1.0);
            assert!((te as f64 - 0.20 * n as f64).abs() <= 0.5);
            assert!((va as f64 - 0.25 * n as f64).abs() <= 0.5);
        }
    }

    #[test]
    fn bad_fractions() {
        let s = SplitSpec {
            train_fraction: 0.6,
            ..SplitSpec::default()
        };
        assert!(split(&[1], &s).is_err());
    }
}
