use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::io::{GroundTruth, PredictionSet};
use super::matching::{match_by_radius, match_predictions, MatchReport};
use super::metrics::{
    confusion_matrix, cumulative_f1, group_f1, order_by_weight, per_class, ClassScore, ConfusionMatrix, GroupScore,
    Metrics,
};
use super::tables::catalog_row;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Classes dropped from both predictions and ground truth.
    pub exclude: Vec<String>,
    /// Used only when the ground truth has no occupancy mask.
    pub fallback_radius: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { exclude: vec!["vesicle".into()], fallback_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub rr: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub mh: usize,
    pub ad: f64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub source: String,
    pub canonical: bool,
    pub localization: LocalizationSummary,
    pub per_class: Vec<ClassScore>,
    pub groups: Vec<GroupScore>,
    pub cumulative_f1: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

fn weight(c: &str) -> Option<f64> {
    catalog_row(c).map(|r| r.molecular_weight)
}

pub fn evaluate(preds: &PredictionSet, gt: &GroundTruth, cfg: &EvalConfig) -> Result<Evaluation> {
    let report: MatchReport = match (&gt.occupancy, cfg.fallback_radius) {
        (None, Some(r)) => match_by_radius(preds, gt, r, &cfg.exclude),
        _ => match_predictions(preds, gt, &cfg.exclude)?,
    };
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in gt.particles.iter().filter(|p| !cfg.exclude.contains(&p.class_id)) {
        *counts.entry(p.class_id.clone()).or_default() += 1;
    }
    let mut classes: Vec<String> = gt.classes().into_iter().filter(|c| !cfg.exclude.contains(c)).collect();
    for p in &preds.entries {
        if !cfg.exclude.contains(&p.class_id) && !classes.contains(&p.class_id) {
            classes.push(p.class_id.clone());
        }
    }
    let order = order_by_weight(&classes, weight);
    let counts: Vec<(String, usize)> = counts.into_iter().collect();
    let scores = per_class(&report, &counts, &order);
    Ok(Evaluation {
        source: preds.source.clone(),
        canonical: report.canonical,
        localization: LocalizationSummary {
            rr: report.rr,
            tp: report.tp,
            fp: report.fp,
            fn_: report.fn_,
            mh: report.mh,
            ad: report.ad,
            metrics: Metrics::from_report(&report),
        },
        groups: group_f1(&scores, weight),
        cumulative_f1: cumulative_f1(&scores),
        confusion: confusion_matrix(&report, &order),
        per_class: scores,
    })
}

const HEADER: [&str; 11] = ["Method", "RR", "TP", "FP", "FN", "MH", "AD", "Recall", "Precision", "Miss rate", "F1"];

/// Localization table, one row per evaluation.
pub fn localization_table(evals: &[Evaluation]) -> String {
    let rows: Vec<[String; 11]> = evals
        .iter()
        .map(|e| {
            let l = &e.localization;
            [
                e.source.clone(),
                l.rr.to_string(),
                l.tp.to_string(),
                l.fp.to_string(),
                l.fn_.to_string(),
                l.mh.to_string(),
                format!("{:.2}", l.ad),
                format!("{:.3}", l.metrics.recall),
                format!("{:.3}", l.metrics.precision),
                format!("{:.3}", l.metrics.miss_rate),
                format!("{:.3}", l.metrics.f1),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..11).map(|i| rows.iter().map(|r| r[i].len()).chain([HEADER[i].len()]).max().unwrap_or(0)).collect();
    let line = |cells: &[&str]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (c, w) in cells.iter().zip(&widths).skip(1) {
            let _ = write!(s, "  {c:>w$}");
        }
        s.push('\n');
        s
    };
    let mut out = line(&HEADER);
    for r in &rows {
        out += &line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Per-class F1 with one column per class; `N/A` for classes absent from
/// the ground truth.
pub fn class_table(e: &Evaluation) -> String {
    let mut out = String::new();
    for s in &e.per_class {
        let f1 = s.metrics.map_or("N/A".to_string(), |m| format!("{:.3}", m.f1));
        let _ = writeln!(out, "{:<10} {:>6} {:>6} {:>6} {:>6}", s.class_id, s.n_truth, s.rr, s.tp, f1);
    }
    for g in &e.groups {
        let f1 = g.f1.map_or("N/A".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(out, "{:<10} {f1:>6}", g.name);
    }
    out
}
