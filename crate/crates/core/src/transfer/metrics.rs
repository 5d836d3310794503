use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Classification quality. `confusion[true][predicted]` holds counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    /// Metrics from parallel truth/prediction index lists. Precision, recall
    /// or F1 that would divide by zero count as 0; macro F1 averages all
    /// classes of the label space.
    pub fn from_predictions(labels: &[String], truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "truth and predictions differ in length");
        let c = labels.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let per_class: Vec<ClassMetrics> = (0..c)
            .map(|k| {
                let tp = confusion[k][k];
                let support: usize = confusion[k].iter().sum();
                let predicted_k: usize = confusion.iter().map(|row| row[k]).sum();
                let precision = ratio(tp, predicted_k);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
                ClassMetrics { label: labels[k].clone(), precision, recall, f1, support }
            })
            .collect();
        let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
        MetricsReport {
            accuracy: ratio(correct, truth.len()),
            macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / c as f64,
            per_class,
            confusion,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect() {
        let m = MetricsReport::from_predictions(&labels(3), &[0, 1, 2, 2], &[0, 1, 2, 2]);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_binary() {
        let truth: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let m = MetricsReport::from_predictions(&labels(2), &truth, &[0; 100]);
        assert_eq!(m.accuracy, 0.5);
        assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.total(), 100);
        assert_eq!(m.confusion, vec![vec![50, 0], vec![50, 0]]);
    }

    #[test]
    fn rows_sum_to_support() {
        let m = MetricsReport::from_predictions(&labels(3), &[0, 0, 1, 2, 2, 2], &[1, 0, 1, 0, 2, 1]);
        for (row, cm) in m.confusion.iter().zip(&m.per_class) {
            assert_eq!(row.iter().sum::<usize>(), cm.support);
        }
        let trace: usize = (0..3).map(|k| m.confusion[k][k]).sum();
        assert_eq!(m.accuracy, trace as f64 / 6.0);
    }
}
