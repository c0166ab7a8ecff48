use crate::error::{Error, Result};

/// Accuracy and macro-averaged precision, recall and F1 with the confusion
/// matrix they came from (rows: true class, columns: predicted class).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Undefined ratios (zero denominators) count as 0; macro averages run over
/// every class.
pub fn compute_metrics(confusion: &[Vec<u64>]) -> Result<MetricsReport> {
    let k = confusion.len();
    if k == 0 {
        return Err(Error::EmptyMatrix);
    }
    if let Some(row) = confusion.iter().find(|r| r.len() != k) {
        return Err(Error::dim("confusion matrix row", k, row.len()));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = confusion[c][c];
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        let actual: u64 = confusion[c].iter().sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let kf = k as f64;
    Ok(MetricsReport {
        accuracy: ratio(trace, total),
        macro_recall: r_sum / kf,
        macro_precision: p_sum / kf,
        macro_f1: f_sum / kf,
        confusion: confusion.to_vec(),
    })
}

pub fn confusion_matrix(
    classes: usize,
    pairs: impl IntoIterator<Item = (usize, usize)>,
) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; classes]; classes];
    for (truth, pred) in pairs {
        m[truth][pred] += 1;
    }
    m
}
