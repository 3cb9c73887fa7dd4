use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ncc::NccResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub class_id: String,
    /// Voxel indices.
    pub position: [usize; 3],
    /// Index into the searched orientation list.
    pub orientation: usize,
    pub flipped: bool,
    pub score: f64,
}

impl Candidate {
    pub fn distance(&self, other: &Candidate) -> f64 {
        (0..3).map(|a| (self.position[a] as f64 - other.position[a] as f64).powi(2)).sum::<f64>().sqrt()
    }
}

/// Greedy non-maximum suppression: repeatedly take the best remaining
/// voxel and suppress a ball of `exclusion_radius` voxels around it, until
/// `n` are taken or no positive score is left. Orientation indices at or
/// above `n_orientations` denote the flipped template.
pub fn extract_candidates(
    class_id: &str,
    result: &NccResult,
    n: usize,
    exclusion_radius: f64,
    n_orientations: usize,
) -> Vec<Candidate> {
    let scores = &result.scores;
    let dims = scores.dims();
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| scores.data()[i] > 0.0).collect();
    // Stable: equal scores keep index order.
    order.sort_by(|&a, &b| scores.data()[b].total_cmp(&scores.data()[a]));
    let mut suppressed = vec![false; scores.len()];
    let r = exclusion_radius.max(0.0);
    let ri = r.floor() as i64;
    let mut out = Vec::new();
    for i in order {
        if out.len() >= n {
            break;
        }
        if suppressed[i] {
            continue;
        }
        let p = scores.unravel(i);
        let o = result.orientation.data()[i] as usize;
        out.push(Candidate {
            class_id: class_id.to_string(),
            position: p,
            orientation: o % n_orientations.max(1),
            flipped: o >= n_orientations && n_orientations > 0,
            score: scores.data()[i],
        });
        for dz in -ri..=ri {
            for dy in -ri..=ri {
                for dx in -ri..=ri {
                    if ((dx * dx + dy * dy + dz * dz) as f64) > r * r {
                        continue;
                    }
                    let q = [p[0] as i64 + dx, p[1] as i64 + dy, p[2] as i64 + dz];
                    if (0..3).all(|a| q[a] >= 0 && q[a] < dims[a] as i64) {
                        suppressed[scores.index(q[0] as usize, q[1] as usize, q[2] as usize)] = true;
                    }
                }
            }
        }
    }
    out
}

/// Gaussian fitted to the score histogram; candidates below `cutoff`
/// are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreThreshold {
    pub mu: f64,
    pub sigma: f64,
    pub cutoff: f64,
    /// The histogram fit failed and sample moments were used.
    pub fallback: bool,
}

pub const HISTOGRAM_BINS: usize = 50;
pub const MIN_CANDIDATES: usize = 20;

fn smooth(counts: &[f64], width: f64) -> Vec<f64> {
    let r = (3.0 * width).ceil() as i64;
    let n = counts.len() as i64;
    (0..n)
        .map(|i| {
            let (mut s, mut w) = (0.0, 0.0);
            for k in -r..=r {
                let j = i + k;
                if (0..n).contains(&j) {
                    let g = (-0.5 * (k as f64 / width).powi(2)).exp();
                    s += g * counts[j as usize];
                    w += g;
                }
            }
            s / w
        })
        .collect()
}

/// Walks away from `mode` in direction `step` and returns the last bin of
/// the mode: where the smoothed counts bottom out before rising again by a
/// margin that noise alone would not explain.
fn mode_edge(sm: &[f64], mode: usize, step: i64) -> usize {
    let peak = sm[mode];
    let mut lowest = mode;
    let mut i = mode as i64 + step;
    while i >= 0 && (i as usize) < sm.len() {
        let v = sm[i as usize];
        if v < sm[lowest] {
            lowest = i as usize;
        } else if v > sm[lowest] + (0.1 * peak).max(2.0 * (sm[lowest] + 1.0).sqrt()) {
            return lowest;
        }
        i += step;
    }
    if step > 0 {
        sm.len() - 1
    } else {
        0
    }
}

/// Like `mode_edge`, but ends the mode at a run of at least three empty
/// raw bins with counts beyond it: clean separation needs no noise margin.
fn gap_edge(counts: &[f64], mode: usize, step: i64) -> Option<usize> {
    let mut run = 0;
    let mut i = mode as i64 + step;
    while i >= 0 && (i as usize) < counts.len() {
        if counts[i as usize] == 0.0 {
            run += 1;
        } else if run >= 3 {
            return Some((i - step * (run + 1)) as usize);
        } else {
            run = 0;
        }
        i += step;
    }
    None
}

fn edge(sm: &[f64], counts: &[f64], mode: usize, step: i64) -> usize {
    let e = mode_edge(sm, mode, step);
    match gap_edge(counts, mode, step) {
        Some(g) if step > 0 => e.min(g),
        Some(g) => e.max(g),
        None => e,
    }
}

/// Least-squares fit of `a exp(-(x-µ)²/2σ²)` by damped Gauss-Newton.
fn fit_gaussian(x: &[f64], y: &[f64], start: [f64; 3]) -> Option<[f64; 3]> {
    let model = |p: &[f64; 3], x: f64| p[0] * (-0.5 * ((x - p[1]) / p[2]).powi(2)).exp();
    let sse = |p: &[f64; 3]| x.iter().zip(y).map(|(&xi, &yi)| (yi - model(p, xi)).powi(2)).sum::<f64>();
    let mut p = start;
    let mut lambda = 1e-3;
    let mut err = sse(&p);
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&xi, &yi) in x.iter().zip(y) {
            let u = (xi - p[1]) / p[2];
            let e = (-0.5 * u * u).exp();
            let j = [e, p[0] * e * u / p[2], p[0] * e * u * u / p[2]];
            let r = yi - p[0] * e;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut m = jtj;
        for a in 0..3 {
            m[a][a] *= 1.0 + lambda;
        }
        let delta = solve3(m, jtr)?;
        let trial = [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]];
        let trial_err = if trial[2] > 0.0 { sse(&trial) } else { f64::INFINITY };
        if trial_err < err {
            let done = (err - trial_err) <= 1e-12 * err.max(1e-300);
            p = trial;
            err = trial_err;
            lambda = (lambda * 0.3).max(1e-12);
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    p.iter().all(|v| v.is_finite()).then_some(p)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

fn sample_moments(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// A population counts as separate from the mode below it when at least
/// this many empty bins part them and it starts this many fitted standard
/// deviations above the lower mean.
const SEPARATION_BINS: usize = 3;
const SEPARATION_SIGMAS: f64 = 5.0;

/// Fits a Gaussian to the upper mode of a 50-bin histogram of `scores`
/// and returns `µ - 2σ`.
///
/// The search starts at the tallest smoothed mode and moves up to higher
/// modes holding at least a tenth of its height. A cluster that lies past
/// an empty stretch and far beyond the fitted tail of that mode is a
/// population of its own, whatever its size, and the search restarts
/// inside it. A degenerate fit falls back to the sample mean and standard
/// deviation of the scores inside the chosen mode.
pub fn fit_threshold(scores: &[f64]) -> Result<ScoreThreshold> {
    if scores.len() < MIN_CANDIDATES {
        return Err(Error::Config(format!("need at least {MIN_CANDIDATES} scores to fit a threshold, got {}", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Config("scores must be finite".into()));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    if !(width > 1e-12 * hi.abs().max(1.0)) {
        return Ok(moments_threshold(scores));
    }
    let bin_of = |s: f64| (((s - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
    let mut counts = vec![0.0; HISTOGRAM_BINS];
    for &s in scores {
        counts[bin_of(s)] += 1.0;
    }
    let mut base = 0;
    loop {
        let masked: Vec<f64> = counts.iter().enumerate().map(|(b, &c)| if b < base { 0.0 } else { c }).collect();
        let (l, r, fit) = fit_mode(&masked, lo, width);
        let t = fit.unwrap_or_else(|| {
            moments_threshold(&scores.iter().copied().filter(|&s| (l..=r).contains(&bin_of(s))).collect::<Vec<_>>())
        });
        let separated = (r + SEPARATION_BINS + 1..HISTOGRAM_BINS).find(|&b| {
            masked[b] > 0.0
                && masked[b - SEPARATION_BINS..b].iter().all(|&c| c == 0.0)
                && lo + b as f64 * width > t.mu + SEPARATION_SIGMAS * t.sigma
        });
        match separated {
            Some(b) => base = b,
            None => {
                if t.fallback {
                    log::warn!("score histogram fit degenerate; using sample mean {:.4} and std {:.4}", t.mu, t.sigma);
                }
                return Ok(t);
            }
        }
    }
}

fn moments_threshold(members: &[f64]) -> ScoreThreshold {
    let (mu, sd) = sample_moments(members);
    let sigma = sd.max(1e-12);
    ScoreThreshold { mu, sigma, cutoff: mu - 2.0 * sigma, fallback: true }
}

/// Bins `l..=r` of the upper populous mode of `counts` and its Gaussian
/// fit, `None` when the fit is degenerate.
fn fit_mode(counts: &[f64], lo: f64, width: f64) -> (usize, usize, Option<ScoreThreshold>) {
    let n = counts.len();
    let centers: Vec<f64> = (0..n).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let sm = smooth(counts, 1.5);
    let mut mode = (0..n).rev().max_by(|&a, &b| sm[a].total_cmp(&sm[b])).unwrap();
    let floor = 0.1 * sm[mode];
    let mut r = edge(&sm, counts, mode, 1);
    while r + 1 < n {
        let next = (r + 1..n).rev().max_by(|&a, &b| sm[a].total_cmp(&sm[b])).unwrap();
        if sm[next] < floor {
            break;
        }
        mode = next;
        r = edge(&sm, counts, mode, 1);
    }
    let l = edge(&sm, counts, mode, -1);
    let (x, y) = (&centers[l..=r], &counts[l..=r]);
    let total: f64 = y.iter().sum();
    let mean = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / total;
    let var = x.iter().zip(y).map(|(a, b)| b * (a - mean).powi(2)).sum::<f64>() / total;
    let start = [sm[mode].max(counts[mode]), mean, var.sqrt().max(width)];
    // Fewer than three occupied bins cannot pin down a width.
    let fit = if y.iter().filter(|&&c| c > 0.0).count() >= 3 { fit_gaussian(x, y, start) } else { None };
    let span = width * n as f64;
    let t = match fit {
        Some([_, mu, sigma]) if sigma > 0.05 * width && sigma < 10.0 * span && (lo..=lo + span).contains(&mu) => {
            Some(ScoreThreshold { mu, sigma, cutoff: mu - 2.0 * sigma, fallback: false })
        }
        _ => None,
    };
    (l, r, t)
}

pub fn apply_threshold(candidates: Vec<Candidate>, t: &ScoreThreshold) -> Vec<Candidate> {
    candidates.into_iter().filter(|c| c.score >= t.cutoff).collect()
}

/// Overlap exclusion across classes: classes are visited in `class_order`
/// (unlisted classes afterwards, by first appearance), each class's
/// candidates by descending score; a candidate is dropped when its center
/// lies closer than `r_self + r_other` to an accepted one. Radii are in
/// voxels; a missing radius counts as 0.
pub fn overlap_filter(candidates: &[Candidate], radii: &HashMap<String, f64>, class_order: &[String]) -> Vec<Candidate> {
    let mut order: Vec<String> = class_order.to_vec();
    for c in candidates {
        if !order.contains(&c.class_id) {
            order.push(c.class_id.clone());
        }
    }
    let radius = |c: &Candidate| radii.get(&c.class_id).copied().unwrap_or(0.0);
    let mut accepted: Vec<Candidate> = Vec::new();
    for class in &order {
        let mut members: Vec<&Candidate> = candidates.iter().filter(|c| &c.class_id == class).collect();
        members.sort_by(|a, b| b.score.total_cmp(&a.score));
        for c in members {
            let clash = accepted.iter().any(|a| c.distance(a) < radius(c) + radius(a));
            if !clash {
                accepted.push(c.clone());
            }
        }
    }
    accepted
}

/// `class x y z score` per line.
pub fn candidates_to_text(candidates: &[Candidate]) -> String {
    candidates
        .iter()
        .map(|c| format!("{} {} {} {} {}\n", c.class_id, c.position[0], c.position[1], c.position[2], c.score))
        .collect()
}
