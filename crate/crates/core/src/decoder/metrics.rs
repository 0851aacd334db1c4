//! Operating points and DET curves from per-utterance scores.
//!
//! An utterance is accepted at threshold `θ` iff its best event score is
//! `≥ θ`; utterances without events are never accepted.

use super::DetectionEvent;
use crate::error::{Error, Result};

/// Best event score for `keyword` in each utterance.
pub fn utterance_max(events: &[Vec<DetectionEvent>], keyword: &str) -> Vec<Option<f64>> {
    events
        .iter()
        .map(|ev| {
            ev.iter()
                .filter(|e| e.keyword == keyword)
                .map(|e| e.score)
                .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub target_fa_per_hour: f64,
    /// `f64::INFINITY` when nothing can be accepted.
    pub threshold: f64,
    pub fa_per_hour: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub fa_per_hour: f64,
    pub frr: f64,
}

/// Strictly increasing FA/h, strictly decreasing FRR.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
}

fn check_hours(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("negative audio duration must be positive, got {h} h")))
    }
}

struct Rates<'a> {
    pos: &'a [Option<f64>],
    neg: &'a [Option<f64>],
    hours: f64,
}

impl Rates<'_> {
    fn at(&self, theta: f64) -> (f64, f64) {
        let hit = |s: &Option<f64>| s.is_some_and(|v| v >= theta);
        let fa = self.neg.iter().filter(|s| hit(s)).count() as f64 / self.hours;
        let frr = if self.pos.is_empty() {
            0.0
        } else {
            self.pos.iter().filter(|s| !hit(s)).count() as f64 / self.pos.len() as f64
        };
        (fa, frr)
    }

    /// Distinct scores ascending.
    fn thresholds(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.pos.iter().chain(self.neg).flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// For each target, the most lenient threshold whose FA/h does not exceed
/// it, and the FRR there.
pub fn sweep_threshold(
    pos: &[Option<f64>],
    neg: &[Option<f64>],
    neg_hours: f64,
    targets: &[f64],
) -> Result<Vec<OperatingPoint>> {
    check_hours(neg_hours)?;
    let rates = Rates {
        pos,
        neg,
        hours: neg_hours,
    };
    let pooled = rates.thresholds();
    let mut negs: Vec<f64> = neg.iter().flatten().copied().collect();
    negs.sort_by(|a, b| b.total_cmp(a));
    Ok(targets
        .iter()
        .map(|&target| {
            let allowed = (target * neg_hours + 1e-9).floor().max(0.0) as usize;
            let threshold = if allowed >= negs.len() {
                pooled.first().copied().unwrap_or(f64::INFINITY)
            } else {
                let cut = negs[allowed];
                pooled.iter().copied().find(|&v| v > cut).unwrap_or(f64::INFINITY)
            };
            let (fa_per_hour, frr) = rates.at(threshold);
            OperatingPoint {
                target_fa_per_hour: target,
                threshold,
                fa_per_hour,
                frr,
            }
        })
        .collect())
}

pub fn det_curve(pos: &[Option<f64>], neg: &[Option<f64>], neg_hours: f64) -> Result<DetCurve> {
    check_hours(neg_hours)?;
    let rates = Rates {
        pos,
        neg,
        hours: neg_hours,
    };
    let mut points: Vec<DetPoint> = Vec::new();
    for &threshold in rates.thresholds().iter().rev() {
        let (fa_per_hour, frr) = rates.at(threshold);
        let p = DetPoint {
            threshold,
            fa_per_hour,
            frr,
        };
        if let Some(last) = points.last_mut() {
            if p.fa_per_hour == last.fa_per_hour {
                *last = p;
                continue;
            }
            if p.frr >= last.frr {
                continue;
            }
        }
        points.push(p);
    }
    Ok(DetCurve { points })
}

impl DetCurve {
    /// Lowest FRR among points with FA/h at most `target`, or `None` if
    /// every point exceeds it.
    pub fn frr_at(&self, target: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.fa_per_hour <= target)
            .map(|p| p.frr)
            .next_back()
    }
}
