use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Fractions of the data assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        let parts = [train, val, test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "split ratios must be in [0, 1] and sum to 1, got {train}/{val}/{test}"
            )));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Stratified, seeded split.
///
/// Each class is shuffled on its own, then all records are merged into one
/// sequence ordered by relative position within their class (ties by class
/// order), so every prefix holds the classes in proportion. Validation takes
/// the first `floor(n * val)` records, test the next `floor(n * test)`, and
/// train keeps the rest. Label inventories carry over from `data`.
///
/// With `strict`, a class with fewer records than there are non-empty
/// splits is rejected.
pub fn split_dataset(
    data: &Dataset,
    ratios: SplitRatios,
    seed: u64,
    strict: bool,
) -> Result<Split> {
    let n = data.len();
    let n_val = (n as f64 * ratios.val + 1e-9).floor() as usize;
    let n_test = ((n as f64 * ratios.test + 1e-9).floor() as usize).min(n - n_val);

    // Per-class groups in label-inventory order, then unseen labels by first appearance.
    let mut class_names: Vec<&str> = data.labels.iter().map(String::as_str).collect();
    for r in &data.records {
        if !class_names.contains(&r.label.as_str()) {
            class_names.push(&r.label);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, r) in data.records.iter().enumerate() {
        let c = class_names
            .iter()
            .position(|l| *l == r.label)
            .expect("collected above");
        groups[c].push(i);
    }

    if strict {
        let needed = [n - n_val - n_test, n_val, n_test]
            .iter()
            .filter(|&&k| k > 0)
            .count();
        for (c, g) in groups.iter().enumerate() {
            if !g.is_empty() && g.len() < needed {
                return Err(Error::ClassTooSmall {
                    class: class_names[c].to_string(),
                    count: g.len(),
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    let mut order: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for (c, g) in groups.iter().enumerate() {
        for (i, &rec) in g.iter().enumerate() {
            order.push(((i as f64 + 0.5) / g.len() as f64, c, rec));
        }
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let pick = |range: std::ops::Range<usize>| {
        Dataset::with_labels(
            order[range]
                .iter()
                .map(|&(_, _, i)| data.records[i].clone())
                .collect(),
            data.labels.clone(),
        )
    };
    Ok(Split {
        val: pick(0..n_val),
        test: pick(n_val..n_val + n_test),
        train: pick(n_val + n_test..n),
    })
}
