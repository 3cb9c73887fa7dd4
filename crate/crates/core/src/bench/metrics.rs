use serde::{Deserialize, Serialize};

use super::matching::{MatchReport, Outcome};
use super::tables::{LocalizationRow, SIZE_GROUPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: f64,
    pub precision: f64,
    pub miss_rate: f64,
    pub f1: f64,
}

impl Metrics {
    /// Precision `tp / rr`, recall `tp / n_truth`; empty denominators give 0.
    pub fn from_counts(rr: usize, tp: usize, n_truth: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, rr);
        let recall = ratio(tp, n_truth);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { recall, precision, miss_rate: 1.0 - recall, f1 }
    }

    pub fn from_report(r: &MatchReport) -> Self {
        Self::from_counts(r.rr, r.tp, r.tp + r.fn_)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_id: String,
    pub n_truth: usize,
    /// Predictions carrying this label.
    pub rr: usize,
    /// Distinct particles of this class found by a prediction of this label.
    pub tp: usize,
    /// `None` when the class is absent from the ground truth.
    pub metrics: Option<Metrics>,
}

/// Per-class scores in `order`; a prediction counts for its class only
/// when it lands on a particle of the same class.
pub fn per_class(report: &MatchReport, truth_counts: &[(String, usize)], order: &[String]) -> Vec<ClassScore> {
    order
        .iter()
        .map(|c| {
            let counted = report.assignments.iter().filter(|a| a.outcome != Outcome::Excluded && &a.predicted_class == c);
            let rr = counted.clone().count();
            let mut found: Vec<u32> = counted
                .filter(|a| a.true_class.as_deref() == Some(c.as_str()))
                .filter_map(|a| a.instance)
                .collect();
            found.sort_unstable();
            found.dedup();
            let n_truth = truth_counts.iter().find(|(k, _)| k == c).map_or(0, |t| t.1);
            ClassScore {
                class_id: c.clone(),
                n_truth,
                rr,
                tp: found.len(),
                metrics: (n_truth > 0).then(|| Metrics::from_counts(rr, found.len(), n_truth)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub name: String,
    pub classes: Vec<String>,
    /// Mean F1 over member classes with a score.
    pub f1: Option<f64>,
}

/// Groups classes by molecular weight into the size groups. Classes with
/// no weight (fiducials, vesicles) belong to no group.
pub fn group_f1(scores: &[ClassScore], weight: impl Fn(&str) -> Option<f64>) -> Vec<GroupScore> {
    SIZE_GROUPS
        .iter()
        .map(|(name, lo, hi)| {
            let members: Vec<&ClassScore> = scores
                .iter()
                .filter(|s| weight(&s.class_id).is_some_and(|w| w >= *lo && w < *hi))
                .collect();
            let f1s: Vec<f64> = members.iter().filter_map(|s| s.metrics.map(|m| m.f1)).collect();
            GroupScore {
                name: name.to_string(),
                classes: members.iter().map(|s| s.class_id.clone()).collect(),
                f1: (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64),
            }
        })
        .collect()
}

/// Running sum of per-class F1 in the given order; classes without a
/// score add nothing.
pub fn cumulative_f1(scores: &[ClassScore]) -> Vec<f64> {
    scores
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.metrics.map_or(0.0, |m| m.f1);
            Some(*acc)
        })
        .collect()
}

/// Classes sorted by ascending weight; unknown weights keep their
/// relative order at the end.
pub fn order_by_weight(classes: &[String], weight: impl Fn(&str) -> Option<f64>) -> Vec<String> {
    let mut v: Vec<(usize, &String)> = classes.iter().enumerate().collect();
    v.sort_by(|a, b| match (weight(a.1), weight(b.1)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.0.cmp(&b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(&b.0),
    });
    v.into_iter().map(|(_, c)| c.clone()).collect()
}

/// Rows are true classes plus a final background row; columns are
/// predicted labels. Extra hits and excluded predictions are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn background_row(&self) -> &[usize] {
        &self.counts[self.labels.len()]
    }
}

pub fn confusion_matrix(report: &MatchReport, order: &[String]) -> ConfusionMatrix {
    let mut labels = order.to_vec();
    for a in &report.assignments {
        for c in [Some(&a.predicted_class), a.true_class.as_ref()].into_iter().flatten() {
            if a.outcome != Outcome::Excluded && !labels.contains(c) {
                labels.push(c.clone());
            }
        }
    }
    let n = labels.len();
    let mut counts = vec![vec![0usize; n]; n + 1];
    let idx = |c: &str| labels.iter().position(|l| l == c).expect("label collected above");
    for a in &report.assignments {
        let row = match a.outcome {
            Outcome::TruePositive => idx(a.true_class.as_deref().expect("hit has a class")),
            Outcome::FalsePositive => n,
            Outcome::ExtraHit | Outcome::Excluded => continue,
        };
        counts[row][idx(&a.predicted_class)] += 1;
    }
    ConfusionMatrix { labels, counts }
}

/// Recomputes the derived columns of a published localization row from
/// its counts with recall over `n_total` particles. Returns the
/// recomputed metrics and a note for each printed value that disagrees
/// beyond rounding.
pub fn check_published_row(row: &LocalizationRow, n_total: usize) -> (Metrics, Vec<String>) {
    let m = Metrics::from_counts(row.rr, row.tp, n_total);
    let tol = 0.0015;
    let mut notes = Vec::new();
    for (name, printed, ours) in [
        ("recall", row.recall, m.recall),
        ("precision", row.precision, m.precision),
        ("miss rate", row.miss_rate, m.miss_rate),
        ("F1", row.f1, m.f1),
    ] {
        if (printed - ours).abs() > tol {
            notes.push(format!("{}: printed {name} {printed:.3}, counts give {ours:.3}", row.method));
        }
    }
    if (row.recall + row.miss_rate - 1.0).abs() > tol {
        notes.push(format!(
            "{}: printed recall {:.3} and miss rate {:.3} do not sum to 1",
            row.method, row.recall, row.miss_rate
        ));
    }
    (m, notes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::matching::Assignment;
    use crate::bench::tables::{catalog_row, CLASS_COLUMNS, CLASS_F1, GROUP_F1, LOCALIZATION, TEST_PARTICLES};

    #[test]
    fn counts_to_metrics() {
        let m = Metrics::from_counts(10, 5, 20);
        assert_eq!((m.precision, m.recall, m.miss_rate), (0.5, 0.25, 0.75));
        assert!((m.f1 - 1.0 / 3.0).abs() < 1e-12);
        let z = Metrics::from_counts(0, 0, 0);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn published_rows_reproduce_except_yopo_recall() {
        for row in &LOCALIZATION {
            let (_, notes) = check_published_row(row, TEST_PARTICLES);
            if row.method == "YOPO" {
                assert_eq!(notes.len(), 2, "{notes:?}");
                assert!(notes[0].contains("recall 0.720") && notes[0].contains("0.779"));
            } else {
                assert!(notes.is_empty(), "{notes:?}");
            }
        }
    }

    #[test]
    fn tp_plus_fn_is_not_the_recall_denominator() {
        let d = LOCALIZATION.iter().find(|r| r.method == "DeepFinder").unwrap();
        assert_eq!(d.tp + d.fn_, 1565);
        let own = Metrics::from_counts(d.rr, d.tp, d.tp + d.fn_);
        assert!((own.recall - 0.870).abs() < 5e-4);
        let printed = Metrics::from_counts(d.rr, d.tp, TEST_PARTICLES);
        assert!((printed.recall - 0.867).abs() < 5e-4);
    }

    #[test]
    fn group_means_match_published() {
        let weight = |c: &str| catalog_row(c).map(|r| r.molecular_weight);
        for ((method, f1s), (m2, groups)) in CLASS_F1.iter().zip(GROUP_F1.iter()) {
            assert_eq!(method, m2);
            let scores: Vec<ClassScore> = CLASS_COLUMNS
                .iter()
                .zip(f1s)
                .map(|(c, &f1)| ClassScore {
                    class_id: c.to_string(),
                    n_truth: 1,
                    rr: 1,
                    tp: 1,
                    metrics: Some(Metrics { recall: f1, precision: f1, miss_rate: 1.0 - f1, f1 }),
                })
                .collect();
            let g = group_f1(&scores, weight);
            for (ours, printed) in g.iter().zip(groups) {
                assert!((ours.f1.unwrap() - printed).abs() < 1.5e-3, "{method} {}: {:?} vs {printed}", ours.name, ours.f1);
            }
            assert!(g.iter().all(|g| !g.classes.contains(&"fiducial".to_string())));
        }
    }

    fn assignment(pred: &str, truth: Option<(&str, u32)>, outcome: Outcome) -> Assignment {
        Assignment {
            predicted_class: pred.into(),
            instance: truth.map(|t| t.1),
            true_class: truth.map(|t| t.0.into()),
            outcome,
        }
    }

    fn report(assignments: Vec<Assignment>) -> MatchReport {
        MatchReport { rr: 0, tp: 0, fp: 0, fn_: 0, mh: 0, ad: 0.0, n_truth: 0, assignments, canonical: true }
    }

    #[test]
    fn per_class_and_confusion() {
        let r = report(vec![
            assignment("a", Some(("a", 1)), Outcome::TruePositive),
            assignment("b", Some(("a", 2)), Outcome::TruePositive),
            assignment("a", None, Outcome::FalsePositive),
            assignment("a", Some(("a", 1)), Outcome::ExtraHit),
        ]);
        let order = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let counts = vec![("a".to_string(), 4), ("b".to_string(), 2)];
        let s = per_class(&r, &counts, &order);
        assert_eq!((s[0].rr, s[0].tp), (3, 1));
        let m = s[0].metrics.unwrap();
        assert!((m.precision - 1.0 / 3.0).abs() < 1e-12 && (m.recall - 0.25).abs() < 1e-12);
        assert_eq!(s[1].metrics.unwrap().f1, 0.0);
        assert!(s[2].metrics.is_none());
        assert_eq!(cumulative_f1(&s).len(), 3);

        let c = confusion_matrix(&r, &order);
        assert_eq!(c.counts[0], vec![1, 1, 0]);
        assert_eq!(c.background_row(), &[1, 0, 0]);
    }

    #[test]
    fn weight_order() {
        let w = |c: &str| catalog_row(c).map(|r| r.molecular_weight);
        let classes: Vec<String> = ["5mrc", "fiducial", "1s3x", "vesicle", "1bxn"].iter().map(|s| s.to_string()).collect();
        assert_eq!(order_by_weight(&classes, w), vec!["1s3x", "1bxn", "5mrc", "fiducial", "vesicle"]);
    }
}
