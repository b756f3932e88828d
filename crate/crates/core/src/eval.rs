//! Instance-level metrics and error-overlap accounting.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{config_err, Error, Result};
use crate::math;
use crate::train::TrainedModel;

/// Confusion counts and the metrics derived from them.
///
/// Precision and recall are 0 when their denominator is 0, and the
/// F-measure (F1) is 0 when precision + recall is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub g_measure: f64,
    /// `#neg / #pos` of the ground truth (infinite without positives).
    pub skew: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let total = tp + fp + tn + fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let pos = tp + fn_;
        MetricsReport {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, total),
            precision,
            recall,
            f_measure,
            g_measure: math::sqrt(precision * recall),
            skew: if pos == 0 {
                f64::INFINITY
            } else {
                (fp + tn) as f64 / pos as f64
            },
        }
    }

    pub fn from_predictions(predicted: &[bool], truth: &[bool]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Ok(Self::from_counts(tp, fp, tn, fn_))
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn errors(&self) -> usize {
        self.fp + self.fn_
    }
}

/// Metrics of `model`'s hard predictions `f(x) > threshold` on `test`.
pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let truth = test.true_labels()?;
    MetricsReport::from_predictions(&model.predict(test)?, &truth)
}

/// Counts of test instances misclassified by exactly each subset of models.
///
/// `regions[mask]` holds the instances whose set of erring models is `mask`
/// (bit `i` = model `i`); `regions[0]` counts instances nobody got wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorVenn {
    pub models: usize,
    pub regions: Vec<usize>,
}

impl ErrorVenn {
    /// Errors of model `i` on its own, summed over every region containing it.
    pub fn model_errors(&self, i: usize) -> usize {
        self.regions
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c)
            .sum()
    }

    /// Size of the union of all error sets.
    pub fn union(&self) -> usize {
        self.regions[1..].iter().sum()
    }

    /// `(mask, count)` for every non-empty subset, in mask order.
    pub fn non_empty_regions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.regions.iter().copied().enumerate().skip(1)
    }
}

/// Error regions from precomputed predictions against one label vector.
pub fn error_venn_from_predictions(predictions: &[Vec<bool>], truth: &[bool]) -> Result<ErrorVenn> {
    if predictions.len() < 2 {
        return Err(config_err!("error overlap needs at least 2 models, got {}", predictions.len()));
    }
    if predictions.len() > 16 {
        return Err(config_err!("error overlap supports at most 16 models"));
    }
    if let Some(p) = predictions.iter().find(|p| p.len() != truth.len()) {
        return Err(Error::Shape(format!(
            "predictions cover {} instances but the test set has {}",
            p.len(),
            truth.len()
        )));
    }
    let mut regions = vec![0usize; 1 << predictions.len()];
    for (i, &t) in truth.iter().enumerate() {
        let mask = predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| p[i] != t)
            .fold(0usize, |m, (k, _)| m | (1 << k));
        regions[mask] += 1;
    }
    Ok(ErrorVenn {
        models: predictions.len(),
        regions,
    })
}

/// Error regions of `models` on one shared test set.
pub fn error_venn(models: &[&TrainedModel], test: &Dataset) -> Result<ErrorVenn> {
    let truth = test.true_labels()?;
    let predictions = models.iter().map(|m| m.predict(test)).collect::<Result<Vec<_>>>()?;
    error_venn_from_predictions(&predictions, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_counts() {
        let r = MetricsReport::from_counts(30, 10, 50, 10);
        assert_eq!(r.precision, 0.75);
        assert_eq!(r.recall, 0.75);
        assert!((r.f_measure - 0.75).abs() < 1e-15);
        assert!((r.g_measure - 0.75).abs() < 1e-15);
        assert_eq!(r.accuracy, 0.8);
    }

    #[test]
    fn perfect_and_all_negative_predictors() {
        let truth = [true, false, false, true, false];
        let perfect = MetricsReport::from_predictions(&truth, &truth).unwrap();
        assert_eq!((perfect.accuracy, perfect.f_measure, perfect.g_measure), (1.0, 1.0, 1.0));
        let none = MetricsReport::from_predictions(&[false; 5], &truth).unwrap();
        assert_eq!((none.precision, none.recall, none.f_measure), (0.0, 0.0, 0.0));
        assert_eq!(none.skew, 1.5);
        assert_eq!(MetricsReport::from_predictions(&[], &[]), Err(Error::EmptyDataset));
    }

    #[test]
    fn venn_of_identical_and_disjoint_predictors() {
        let truth = vec![true, true, false, false, true, false];
        let a = vec![false, true, false, true, true, false];
        let same = error_venn_from_predictions(&[a.clone(), a.clone()], &truth).unwrap();
        assert_eq!(same.regions[0b11], 2);
        assert_eq!(same.regions[0b01] + same.regions[0b10], 0);

        // two stumps erring on disjoint halves
        let left: Vec<bool> = truth.iter().enumerate().map(|(i, &t)| if i < 3 { !t } else { t }).collect();
        let right: Vec<bool> = truth.iter().enumerate().map(|(i, &t)| if i >= 3 { !t } else { t }).collect();
        let disjoint = error_venn_from_predictions(&[left, right], &truth).unwrap();
        assert_eq!(disjoint.regions[0b11], 0);
        assert_eq!(disjoint.model_errors(0), 3);
        assert_eq!(disjoint.model_errors(1), 3);
        assert_eq!(disjoint.union(), 6);

        assert!(error_venn_from_predictions(&[a.clone()], &truth).is_err());
        assert!(error_venn_from_predictions(&[a, vec![true]], &truth).is_err());
    }

    proptest! {
        #[test]
        fn metric_identities(tp in 0usize..500, fp in 0usize..500, tn in 0usize..500, fn_ in 0usize..500) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let r = MetricsReport::from_counts(tp, fp, tn, fn_);
            prop_assert_eq!(r.total(), tp + fp + tn + fn_);
            prop_assert_eq!(r.accuracy, (tp + tn) as f64 / r.total() as f64);
            prop_assert_eq!(r.precision, if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 });
            prop_assert_eq!(r.recall, if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 });
            let p = r.precision;
            let q = r.recall;
            prop_assert_eq!(r.f_measure, if p + q == 0.0 { 0.0 } else { 2.0 * p * q / (p + q) });
            prop_assert_eq!(r.g_measure, (p * q).sqrt());
            for v in [r.accuracy, r.precision, r.recall, r.f_measure, r.g_measure] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn venn_regions_partition_errors(seed in any::<u64>(), n in 1usize..60, k in 2usize..5) {
            let mut r = crate::rng::rng(seed);
            use rand::Rng;
            let truth: Vec<bool> = (0..n).map(|_| r.random()).collect();
            let preds: Vec<Vec<bool>> = (0..k).map(|_| (0..n).map(|_| r.random()).collect()).collect();
            let venn = error_venn_from_predictions(&preds, &truth).unwrap();
            prop_assert_eq!(venn.regions.iter().sum::<usize>(), n);
            for (i, p) in preds.iter().enumerate() {
                let errors = p.iter().zip(&truth).filter(|(a, b)| a != b).count();
                prop_assert_eq!(venn.model_errors(i), errors);
            }
            let union = (0..n).filter(|&j| preds.iter().any(|p| p[j] != truth[j])).count();
            prop_assert_eq!(venn.union(), union);
        }
    }
}
