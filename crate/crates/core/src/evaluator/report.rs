//! Report layout (`key = value` header, then tab-separated tables):
//!
//! ```text
//! # kanspot evaluation report
//! variant = MLP
//! ...
//! targets = 0.1 0.2 0.5 1.0
//!
//! [frr_percent]
//! keyword  positives  FRR@0.1  FRR@0.2  FRR@0.5  FRR@1.0
//! take_a_picture  50  4.00  2.00  2.00  0.00
//! ...
//! pooled  200  ...
//! mean  200  ...
//!
//! [thresholds]
//! keyword  T@0.1  ...
//! ```
//!
//! DET files hold one block per keyword, blank-line separated
//! (gnuplot `index`), each with a `fa_per_hour,frr_percent` header.

use std::fmt::Write as _;
use std::path::Path;

use crate::decoder::{DetCurve, OperatingPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalMeta {
    pub variant: String,
    pub width: usize,
    pub param_count: usize,
    pub condition: String,
    pub seed: u64,
    pub positives: usize,
    pub negatives: usize,
    pub negative_hours: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordResult {
    pub keyword: String,
    pub positives: usize,
    /// One per FA/h target, in target order.
    pub points: Vec<OperatingPoint>,
    pub det: DetCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub meta: EvalMeta,
    pub targets: Vec<f64>,
    pub per_keyword: Vec<KeywordResult>,
}

impl EvalReport {
    /// Positive-count-weighted FRR per target.
    pub fn pooled_frr(&self) -> Vec<f64> {
        let total: usize = self.per_keyword.iter().map(|k| k.positives).sum();
        (0..self.targets.len())
            .map(|i| {
                if total == 0 {
                    return 0.0;
                }
                self.per_keyword
                    .iter()
                    .map(|k| k.points[i].frr * k.positives as f64)
                    .sum::<f64>()
                    / total as f64
            })
            .collect()
    }

    /// Unweighted mean of per-keyword FRR per target.
    pub fn mean_frr(&self) -> Vec<f64> {
        let n = self.per_keyword.len().max(1) as f64;
        (0..self.targets.len())
            .map(|i| self.per_keyword.iter().map(|k| k.points[i].frr).sum::<f64>() / n)
            .collect()
    }

    /// Pooled FRR at the target closest to `fa`.
    pub fn pooled_at(&self, fa: f64) -> Option<f64> {
        let i = self.targets.iter().position(|t| (t - fa).abs() < 1e-12)?;
        Some(self.pooled_frr()[i])
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut s = String::from("# kanspot evaluation report\n");
        let _ = writeln!(s, "variant = {}", m.variant);
        let _ = writeln!(s, "width = {}", m.width);
        let _ = writeln!(s, "param_count = {}", m.param_count);
        let _ = writeln!(s, "condition = {}", m.condition);
        let _ = writeln!(s, "seed = {}", m.seed);
        let _ = writeln!(s, "positives = {}", m.positives);
        let _ = writeln!(s, "negatives = {}", m.negatives);
        let _ = writeln!(s, "negative_hours = {:.6}", m.negative_hours);
        let targets: Vec<String> = self.targets.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "targets = {}", targets.join(" "));

        s.push_str("\n[frr_percent]\nkeyword\tpositives");
        for t in &targets {
            let _ = write!(s, "\tFRR@{t}");
        }
        s.push('\n');
        let row = |s: &mut String, name: &str, n: usize, v: &[f64]| {
            let _ = write!(s, "{name}\t{n}");
            for x in v {
                let _ = write!(s, "\t{:.2}", 100.0 * x);
            }
            s.push('\n');
        };
        for k in &self.per_keyword {
            let v: Vec<f64> = k.points.iter().map(|p| p.frr).collect();
            row(&mut s, &k.keyword, k.positives, &v);
        }
        let total = self.per_keyword.iter().map(|k| k.positives).sum();
        row(&mut s, "pooled", total, &self.pooled_frr());
        row(&mut s, "mean", total, &self.mean_frr());

        s.push_str("\n[thresholds]\nkeyword");
        for t in &targets {
            let _ = write!(s, "\tT@{t}");
        }
        s.push('\n');
        for k in &self.per_keyword {
            s.push_str(&k.keyword);
            for p in &k.points {
                if p.threshold.is_finite() {
                    let _ = write!(s, "\t{:.6}", p.threshold);
                } else {
                    s.push_str("\tinf");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// DET data for every keyword of `report`.
pub fn write_det(report: &EvalReport, path: &Path) -> Result<()> {
    let mut s = String::from("# DET curves: one block per keyword, columns fa_per_hour,frr_percent\n");
    for (i, k) in report.per_keyword.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# keyword: {}", k.keyword);
        s.push_str("fa_per_hour,frr_percent\n");
        for p in &k.det.points {
            let _ = writeln!(s, "{},{}", p.fa_per_hour, 100.0 * p.frr);
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// `(keyword, [(fa/h, frr%)])` per block of a DET file.
pub type DetBlocks = Vec<(String, Vec<(f64, f64)>)>;

/// Parses a file written by [`write_det`].
pub fn parse_det(text: &str) -> Result<DetBlocks> {
    let bad = |msg: String| Error::format("DET file", msg);
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(k) = line.strip_prefix("# keyword:") {
            out.push((k.trim().to_string(), Vec::new()));
            continue;
        }
        if line.is_empty() || line.starts_with('#') || line == "fa_per_hour,frr_percent" {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("line {}: expected two columns", n + 1)))?;
        let parse = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("line {}: bad number `{v}`", n + 1)));
        let block = out
            .last_mut()
            .ok_or_else(|| bad(format!("line {}: data before any keyword", n + 1)))?;
        block.1.push((parse(a)?, parse(b)?));
    }
    Ok(out)
}
