//! Probabilistic proof of authorship, constraint accounting and reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{SignatureMessage, Stage1Symbol};

pub const MAX_CONSTRAINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need 0 ≤ b ≤ C ≤ {MAX_CONSTRAINTS}, got C = {c}, b = {b}")]
    Counts { c: usize, b: usize },
    #[error("coincidence probability must lie in (0, 1), got {0}")]
    Probability(f64),
    #[error("reports describe different runs: `{0}` vs `{1}`")]
    Mismatch(String, String),
}

fn binomial(n: usize, k: usize) -> f64 {
    // exact in u128 for n ≤ 64
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Probability that a party without the signature meets at least `C − b` of
/// `C` independent constraints, each met by chance with probability `p`.
pub fn ppa(c: usize, b: usize, p: f64) -> Result<f64, MetricsError> {
    if b > c || c > MAX_CONSTRAINTS {
        return Err(MetricsError::Counts { c, b });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(MetricsError::Probability(p));
    }
    if b == c {
        return Ok(1.0);
    }
    let sum: f64 = (0..=b)
        .map(|i| binomial(c, i) * p.powi((c - i) as i32) * (1.0 - p).powi(i as i32))
        .sum();
    Ok(sum.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stage1,
    Stage2,
    Stage3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageAccount {
    pub stage: Stage,
    /// Constraints imposed.
    pub total: usize,
    /// Constraints not met.
    pub unsatisfied: usize,
    /// Chance that one constraint is met by accident.
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceProbabilities {
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
}

impl Default for CoincidenceProbabilities {
    fn default() -> Self {
        Self {
            stage1: 0.5,
            stage2: 0.5,
            stage3: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAccount {
    pub stages: Vec<StageAccount>,
}

impl ConstraintAccount {
    pub fn total(&self) -> usize {
        self.stages.iter().map(|s| s.total).sum()
    }

    pub fn unsatisfied(&self) -> usize {
        self.stages.iter().map(|s| s.unsatisfied).sum()
    }

    /// Pooled PPA when every stage shares one `p`, otherwise the product of
    /// per-stage values.
    pub fn ppa(&self) -> Result<f64, MetricsError> {
        let used: Vec<&StageAccount> = self.stages.iter().filter(|s| s.total > 0).collect();
        let Some(first) = used.first() else {
            return Ok(1.0);
        };
        if used.iter().all(|s| s.p == first.p) {
            return ppa(self.total(), self.unsatisfied(), first.p);
        }
        used.iter()
            .map(|s| ppa(s.total, s.unsatisfied, s.p))
            .product()
    }
}

/// One constraint per stage-1 block symbol, per stage-2 code symbol and per
/// stage-3 `e`. `unsatisfied` gives the mismatch count of each stage.
pub fn account_constraints(
    signature: &SignatureMessage,
    unsatisfied: [usize; 3],
    p: CoincidenceProbabilities,
) -> ConstraintAccount {
    let totals = [
        signature.stage1.len(),
        signature.stage2.len(),
        signature.stage3_e,
    ];
    let ps = [p.stage1, p.stage2, p.stage3];
    let stages = [Stage::Stage1, Stage::Stage2, Stage::Stage3]
        .into_iter()
        .enumerate()
        .map(|(i, stage)| StageAccount {
            stage,
            total: totals[i],
            unsatisfied: unsatisfied[i].min(totals[i]),
            p: ps[i],
        })
        .collect();
    ConstraintAccount { stages }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub delta: f64,
    /// Leading digit of `delta`, 0 when it sits at round-off scale.
    pub digit: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<Stage1Symbol>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkReport {
    pub benchmark: String,
    pub device: String,
    pub signature: SignatureMessage,
    pub blocks: Vec<BlockReport>,
    pub mapping_code: String,
    pub depth: usize,
    pub cnot: usize,
    pub pst: f64,
    pub ppa: f64,
    pub synthesis_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<serde_json::Value>,
}

impl WatermarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub benchmark: String,
    /// Percent changes, watermarked relative to baseline.
    pub depth_pct: f64,
    pub cnot_pct: f64,
    pub pst_pct: f64,
    pub depth_abs: i64,
    pub cnot_abs: i64,
    pub pst_abs: f64,
    /// Mean absolute change of per-block `Δ`.
    pub delta_abs: f64,
    pub ppa_abs: f64,
}

fn pct(base: f64, new: f64) -> f64 {
    if base == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (new - base) / base
    }
}

pub fn compare_report(
    baseline: &WatermarkReport,
    watermarked: &WatermarkReport,
) -> Result<ReportDelta, MetricsError> {
    if baseline.benchmark != watermarked.benchmark || baseline.device != watermarked.device {
        return Err(MetricsError::Mismatch(
            format!("{}@{}", baseline.benchmark, baseline.device),
            format!("{}@{}", watermarked.benchmark, watermarked.device),
        ));
    }
    let mean_delta = |r: &WatermarkReport| {
        if r.blocks.is_empty() {
            0.0
        } else {
            r.blocks.iter().map(|b| b.delta).sum::<f64>() / r.blocks.len() as f64
        }
    };
    Ok(ReportDelta {
        benchmark: baseline.benchmark.clone(),
        depth_pct: pct(baseline.depth as f64, watermarked.depth as f64),
        cnot_pct: pct(baseline.cnot as f64, watermarked.cnot as f64),
        pst_pct: pct(baseline.pst, watermarked.pst),
        depth_abs: watermarked.depth as i64 - baseline.depth as i64,
        cnot_abs: watermarked.cnot as i64 - baseline.cnot as i64,
        pst_abs: watermarked.pst - baseline.pst,
        delta_abs: (mean_delta(watermarked) - mean_delta(baseline)).abs(),
        ppa_abs: watermarked.ppa - baseline.ppa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(ppa(2, 0, 0.5).unwrap(), 0.25);
        assert_eq!(ppa(4, 0, 0.5).unwrap(), 0.0625);
        assert_eq!(ppa(6, 0, 0.5).unwrap(), 0.015625);
        assert_eq!(ppa(6, 1, 0.5).unwrap(), 7.0 / 64.0);
        assert_eq!(ppa(5, 5, 0.3).unwrap(), 1.0);
        assert_eq!(ppa(0, 0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(ppa(3, 4, 0.5).is_err());
        assert!(ppa(65, 0, 0.5).is_err());
        assert!(ppa(3, 0, 0.0).is_err());
        assert!(ppa(3, 0, 1.0).is_err());
    }

    #[test]
    fn accounting() {
        let s: SignatureMessage = "ab|ccd|1".parse().unwrap();
        let acc = account_constraints(&s, [0; 3], Default::default());
        assert_eq!(acc.total(), 6);
        assert_eq!(acc.ppa().unwrap(), 0.015625);
        let acc = account_constraints(&s, [0, 1, 0], Default::default());
        assert_eq!(acc.ppa().unwrap(), 7.0 / 64.0);
        let empty = account_constraints(&SignatureMessage::empty(), [0; 3], Default::default());
        assert_eq!(empty.ppa().unwrap(), 1.0);
        let mixed = account_constraints(
            &s,
            [0; 3],
            CoincidenceProbabilities {
                stage1: 0.5,
                stage2: 0.25,
                stage3: 0.5,
            },
        );
        let want = 0.25 * 0.25f64.powi(3) * 0.5;
        assert!((mixed.ppa().unwrap() - want).abs() < 1e-15);
    }

    fn report(depth: usize, cnot: usize) -> WatermarkReport {
        WatermarkReport {
            benchmark: "x".into(),
            device: "d".into(),
            signature: SignatureMessage::empty(),
            blocks: vec![],
            mapping_code: String::new(),
            depth,
            cnot,
            pst: 0.9,
            ppa: 1.0,
            synthesis_ms: 0,
            verification: None,
        }
    }

    #[test]
    fn deltas() {
        let d = compare_report(&report(63, 10), &report(63, 10)).unwrap();
        assert_eq!((d.depth_pct, d.cnot_pct, d.pst_pct, d.ppa_abs), (0.0, 0.0, 0.0, 0.0));
        let d = compare_report(&report(63, 10), &report(64, 10)).unwrap();
        assert!((d.depth_pct - 1.587).abs() < 1e-3);
        let mut other = report(1, 1);
        other.benchmark = "y".into();
        assert!(compare_report(&report(1, 1), &other).is_err());
    }

    #[test]
    fn report_json_shape() {
        let mut r = report(5, 2);
        r.blocks.push(BlockReport {
            delta: 3e-4,
            digit: 3,
            symbol: Some(Stage1Symbol::A),
        });
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["blocks"][0]["symbol"], "a");
        assert_eq!(v["signature"]["stage3_e"], 0);
        assert!(v.get("verification").is_none());
        let back: WatermarkReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
