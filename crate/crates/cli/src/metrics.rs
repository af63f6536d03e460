//! Classification metrics for `eval`.

use std::fmt;

/// Confusion counts over the union of true and predicted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    /// Sorted labels indexing both axes.
    pub labels: Vec<i64>,
    /// `counts[t][p]`: true label `labels[t]` predicted as `labels[p]`.
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(truth: &[i64], predicted: &[i64]) -> Self {
        let mut labels: Vec<i64> = truth.iter().chain(predicted).copied().collect();
        labels.sort_unstable();
        labels.dedup();
        let pos = |l: i64| labels.binary_search(&l).expect("label present");
        let mut counts = vec![vec![0; labels.len()]; labels.len()];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[pos(t)][pos(p)] += 1;
        }
        Self { labels, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// `(label, support, recall)` for every label that occurs in the truth.
    pub fn per_class(&self) -> Vec<(i64, usize, f64)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| {
                let n: usize = self.counts[i].iter().sum();
                (n > 0).then(|| (l, n, self.counts[i][i] as f64 / n as f64))
            })
            .collect()
    }

    /// Mean of the per-class accuracies.
    pub fn macro_accuracy(&self) -> f64 {
        let pc = self.per_class();
        pc.iter().map(|(_, _, a)| a).sum::<f64>() / pc.len() as f64
    }
}

impl fmt::Display for Confusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .labels
            .iter()
            .map(|l| l.to_string().len())
            .chain(self.counts.iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        write!(f, "{:>width$}", "true\\pred")?;
        for l in &self.labels {
            write!(f, " {l:>width$}")?;
        }
        writeln!(f)?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            write!(f, "{:>w$}", l, w = width.max(9))?;
            for c in row {
                write!(f, " {c:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
