use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Result, UpmError};

/// `counts[actual][predicted]`, class order Placed, Unplaced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Label, &'a Label)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (a, p) in pairs {
            cm.record(*a, *p);
        }
        cm
    }

    pub fn record(&mut self, actual: Label, predicted: Label) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c][0] + self.counts[c][1]
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts[0][c] + self.counts[1][c]
    }

    pub fn add(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for a in 0..2 {
            for p in 0..2 {
                out.counts[a][p] += other.counts[a][p];
            }
        }
        out
    }

    fn nonempty(&self) -> Result<f64> {
        match self.total() {
            0 => Err(UpmError::InvalidArgument("metrics of an empty confusion matrix".into())),
            n => Ok(n as f64),
        }
    }
}

/// Percentage of correct predictions.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.nonempty()?;
    Ok(100.0 * cm.trace() as f64 / n)
}

/// Support-weighted mean of per-class F1, as a percentage.
pub fn weighted_f1(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.nonempty()?;
    let mut acc = 0.0;
    for c in 0..2 {
        let tp = cm.counts[c][c] as f64;
        let (row, col) = (cm.row_sum(c) as f64, cm.col_sum(c) as f64);
        let p = if col > 0.0 { tp / col } else { 0.0 };
        let r = if row > 0.0 { tp / row } else { 0.0 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        acc += row / n * f1;
    }
    Ok(100.0 * acc)
}

/// Cohen's kappa.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.nonempty()?;
    let po = cm.trace() as f64 / n;
    let pe = (0..2)
        .map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64)
        .sum::<f64>()
        / (n * n);
    if pe == 1.0 {
        return Ok(if po == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((po - pe) / (1.0 - pe))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(c: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix::new(c)
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&cm([[50, 0], [0, 50]])).unwrap(), 100.0);
        assert_eq!(accuracy(&cm([[40, 10], [10, 40]])).unwrap(), 80.0);
        assert_eq!(accuracy(&cm([[10, 0], [0, 0]])).unwrap(), 100.0);
        assert!(accuracy(&cm([[0, 0], [0, 0]])).is_err());
    }

    #[test]
    fn weighted_f1_examples() {
        assert!((weighted_f1(&cm([[40, 10], [10, 40]])).unwrap() - 80.0).abs() < 1e-12);
        assert_eq!(weighted_f1(&cm([[7, 0], [0, 3]])).unwrap(), 100.0);
        // F1 = 2/3 (support 40) and 8/11 (support 60)
        let want = 100.0 * (0.4 * 2.0 / 3.0 + 0.6 * 8.0 / 11.0);
        let got = weighted_f1(&cm([[30, 10], [20, 40]])).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 70.30).abs() < 5e-3);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(&cm([[50, 0], [0, 50]])).unwrap(), 1.0);
        assert!((kappa(&cm([[40, 10], [10, 40]])).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(kappa(&cm([[50, 0], [50, 0]])).unwrap(), 0.0);
        assert_eq!(kappa(&cm([[9, 0], [0, 0]])).unwrap(), 1.0);
    }
}
