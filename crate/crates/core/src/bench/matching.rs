use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::io::{GroundTruth, PredictionSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// First hit on a particle.
    TruePositive,
    /// Later hit on an already found particle.
    ExtraHit,
    /// Background or outside the volume.
    FalsePositive,
    /// Predicted or landed on an excluded class; not counted anywhere.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub predicted_class: String,
    pub instance: Option<u32>,
    pub true_class: Option<String>,
    pub outcome: Outcome,
}

/// Localization bookkeeping. `rr = tp + fp + extra hits`,
/// `tp + fn = n_truth`, and `mh` counts particles hit more than once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub rr: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub mh: usize,
    /// Mean center distance of true positives, voxels; 0 without any.
    pub ad: f64,
    pub n_truth: usize,
    pub assignments: Vec<Assignment>,
    /// False for the radius fallback matcher.
    pub canonical: bool,
}

impl MatchReport {
    pub fn extra_hits(&self) -> usize {
        self.assignments.iter().filter(|a| a.outcome == Outcome::ExtraHit).count()
    }
}

/// Turns per-prediction instance lookups (`None` = background) into the
/// report. Hits are credited in input order.
fn tally(
    preds: &PredictionSet,
    gt: &GroundTruth,
    exclude: &[String],
    lookup: impl Fn(usize) -> Option<u32>,
    canonical: bool,
) -> MatchReport {
    let excluded = |c: &str| exclude.iter().any(|e| e == c);
    let class_of: HashMap<u32, &str> = gt.particles.iter().map(|p| (p.instance_id, p.class_id.as_str())).collect();
    let mut hits: HashMap<u32, usize> = HashMap::new();
    let mut dist_sum = 0.0;
    let mut assignments = Vec::with_capacity(preds.entries.len());
    for (i, p) in preds.entries.iter().enumerate() {
        let mut a = Assignment { predicted_class: p.class_id.clone(), instance: None, true_class: None, outcome: Outcome::FalsePositive };
        if excluded(&p.class_id) {
            a.outcome = Outcome::Excluded;
            assignments.push(a);
            continue;
        }
        if let Some(id) = lookup(i) {
            match class_of.get(&id) {
                Some(c) if excluded(c) => a.outcome = Outcome::Excluded,
                Some(c) => {
                    a.instance = Some(id);
                    a.true_class = Some(c.to_string());
                    let n = hits.entry(id).or_insert(0);
                    *n += 1;
                    if *n == 1 {
                        a.outcome = Outcome::TruePositive;
                        let t = gt.particle(id).expect("id from the particle list");
                        dist_sum += (0..3).map(|k| (p.position[k] - t.position[k]).powi(2)).sum::<f64>().sqrt();
                    } else {
                        a.outcome = Outcome::ExtraHit;
                    }
                }
                None => log::warn!("prediction {i} hit unlabelled mask value {id}; counted as false positive"),
            }
        }
        assignments.push(a);
    }
    let n_truth = gt.particles.iter().filter(|p| !excluded(&p.class_id)).count();
    let count = |o: Outcome| assignments.iter().filter(|a| a.outcome == o).count();
    let tp = count(Outcome::TruePositive);
    MatchReport {
        rr: assignments.iter().filter(|a| a.outcome != Outcome::Excluded).count(),
        tp,
        fp: count(Outcome::FalsePositive),
        fn_: n_truth - tp,
        mh: hits.values().filter(|&&n| n > 1).count(),
        ad: if tp > 0 { dist_sum / tp as f64 } else { 0.0 },
        n_truth,
        assignments,
        canonical,
    }
}

/// Canonical matching: a prediction belongs to the particle whose
/// occupancy region contains its (rounded) position.
pub fn match_predictions(preds: &PredictionSet, gt: &GroundTruth, exclude: &[String]) -> Result<MatchReport> {
    let occ = gt.occupancy.as_ref().ok_or(Error::MissingOccupancy)?;
    let report = tally(preds, gt, exclude, |i| occ.lookup(preds.entries[i].position).filter(|&id| id != 0), true);
    let outside = preds.entries.iter().filter(|p| occ.lookup(p.position).is_none()).count();
    if outside > 0 {
        log::warn!("{outside} prediction(s) lie outside the tomogram and count as false positives");
    }
    Ok(report)
}

/// Fallback for ground truth without a mask: a prediction belongs to the
/// nearest particle within `radius` voxels (ties to the lower id). Not the
/// benchmark's rule; the report is marked non-canonical.
pub fn match_by_radius(preds: &PredictionSet, gt: &GroundTruth, radius: f64, exclude: &[String]) -> MatchReport {
    log::warn!("radius matching within {radius} voxels is not the canonical occupancy rule");
    tally(
        preds,
        gt,
        exclude,
        |i| {
            let p = preds.entries[i].position;
            gt.particles
                .iter()
                .map(|t| (t.instance_id, (0..3).map(|k| (p[k] - t.position[k]).powi(2)).sum::<f64>().sqrt()))
                .filter(|(_, d)| *d <= radius)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(id, _)| id)
        },
        false,
    )
}
