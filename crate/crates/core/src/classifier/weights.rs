use std::collections::BTreeMap;
use std::fmt::Display;

use super::{ClassWeightMode, ClassifierError};

/// Per-class loss weights. Under `InverseFrequency` class `c` gets
/// `N / (K * n_c)`, so `sum(n_c * w_c) = N`.
pub fn compute_class_weights<K: Ord + Clone + Display>(
    counts: &BTreeMap<K, usize>,
    mode: ClassWeightMode,
) -> Result<BTreeMap<K, f64>, ClassifierError> {
    match mode {
        ClassWeightMode::None => Ok(counts.keys().map(|k| (k.clone(), 1.0)).collect()),
        ClassWeightMode::InverseFrequency => {
            if let Some((k, _)) = counts.iter().find(|(_, &n)| n == 0) {
                return Err(ClassifierError::ZeroCountClass(k.to_string()));
            }
            let total: usize = counts.values().sum();
            let k = counts.len() as f64;
            Ok(counts.iter().map(|(c, &n)| (c.clone(), total as f64 / (k * n as f64))).collect())
        }
    }
}
