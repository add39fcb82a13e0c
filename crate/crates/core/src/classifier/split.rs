use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::annotation::TrainingExample;
use crate::Label;

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<TrainingExample>,
    pub test: Vec<TrainingExample>,
    pub ratio: f64,
    pub seed: u64,
}

impl DataSplit {
    pub fn class_counts(examples: &[TrainingExample]) -> BTreeMap<Label, usize> {
        let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
        for e in examples {
            *counts.entry(e.label).or_default() += 1;
        }
        counts
    }
}

/// Splits `examples` into train and test sets, class by class.
///
/// The train set holds `floor(ratio * N)` examples. Each class first gets
/// `floor(ratio * n_c)` train slots; the slots left over go to the classes
/// with the largest fractional remainders, so every class lands within one
/// example of its exact share. Which examples of a class go to train is
/// decided by a seeded shuffle. Both halves keep the input order.
pub fn stratified_split(examples: &[TrainingExample], ratio: f64, seed: u64) -> Result<DataSplit, ClassifierError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ClassifierError::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = Label::ALL.iter().map(|&l| (l, Vec::new())).collect();
    for (i, e) in examples.iter().enumerate() {
        by_class.entry(e.label).or_default().push(i);
    }
    for (&label, idx) in &by_class {
        if idx.len() < 2 {
            return Err(ClassifierError::ClassTooSmall { label, count: idx.len() });
        }
    }

    // The epsilon keeps products such as 0.8 * 3794 = 3035.2000000000003 or
    // 0.8 * 10 = 8.000000000000002 from rounding the wrong way in either
    // direction.
    let exact = |n: usize| ratio * n as f64 + 1e-9;
    let total = exact(examples.len()).floor() as usize;
    let mut quota: BTreeMap<Label, usize> = by_class.iter().map(|(&l, idx)| (l, exact(idx.len()).floor() as usize)).collect();
    let assigned: usize = quota.values().sum();
    let mut order: Vec<(Label, f64)> = by_class.iter().map(|(&l, idx)| (l, exact(idx.len()).fract())).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (label, _) in order.iter().take(total.saturating_sub(assigned)) {
        *quota.get_mut(label).unwrap() += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; examples.len()];
    for (label, idx) in &by_class {
        let mut idx = idx.clone();
        idx.shuffle(&mut rng);
        for &i in &idx[..quota[label]] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (e, t) in examples.iter().zip(in_train) {
        if t { train.push(e.clone()) } else { test.push(e.clone()) }
    }
    Ok(DataSplit { train, test, ratio, seed })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn examples(pos: usize, neg: usize) -> Vec<TrainingExample> {
        (0..pos + neg)
            .map(|i| TrainingExample::new(format!("t{i}"), if i < pos { Label::Sexist } else { Label::NotSexist }))
            .collect()
    }

    #[test]
    fn ten_examples() {
        let s = stratified_split(&examples(5, 5), 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        assert_eq!(DataSplit::class_counts(&s.train)[&Label::Sexist], 4);
        assert_eq!(DataSplit::class_counts(&s.test)[&Label::Sexist], 1);
    }

    #[test]
    fn full_dataset_size() {
        let s = stratified_split(&examples(700, 3094), 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (3035, 759));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let ex = examples(30, 70);
        assert_eq!(stratified_split(&ex, 0.8, 3).unwrap(), stratified_split(&ex, 0.8, 3).unwrap());
        assert_ne!(stratified_split(&ex, 0.8, 3).unwrap().test, stratified_split(&ex, 0.8, 4).unwrap().test);
    }

    #[test]
    fn small_class_is_rejected() {
        assert!(matches!(
            stratified_split(&examples(1, 10), 0.8, 0),
            Err(ClassifierError::ClassTooSmall { label: Label::Sexist, count: 1 })
        ));
        assert!(stratified_split(&examples(0, 10), 0.8, 0).is_err());
        assert!(stratified_split(&examples(5, 5), 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn invariants_hold(pos in 2usize..120, neg in 2usize..120, ratio in 0.05f64..0.95, seed in any::<u64>()) {
            let ex = examples(pos, neg);
            let s = stratified_split(&ex, ratio, seed).unwrap();
            let n = ex.len();
            prop_assert_eq!(s.train.len(), (ratio * n as f64 + 1e-9).floor() as usize);
            prop_assert_eq!(s.train.len() + s.test.len(), n);
            let mut all: Vec<&str> = s.train.iter().chain(&s.test).map(|e| e.text.as_str()).collect();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            let counts = DataSplit::class_counts(&s.train);
            for (label, n_c) in [(Label::Sexist, pos), (Label::NotSexist, neg)] {
                let share = ratio * n_c as f64;
                prop_assert!((counts[&label] as f64 - share).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
