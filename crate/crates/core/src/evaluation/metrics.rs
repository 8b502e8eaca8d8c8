//! Threshold metrics for the rule "member iff score ≤ τ".
//!
//! Counting is done in integers wherever possible so that AUC and the
//! balanced-accuracy sweep are exact functions of the rank structure.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::attacks::ScoreRecord;
use crate::error::{Error, Result};
use crate::textfmt::sig12;

/// Which score column of a [`ScoreRecord`] to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreColumn {
    Raw,
    Filtered,
}

impl ScoreColumn {
    pub fn pick(&self, r: &ScoreRecord) -> Option<f64> {
        match self {
            ScoreColumn::Raw => Some(r.score_raw),
            ScoreColumn::Filtered => r.score_filtered,
        }
    }
}

/// Scores split by class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub member: Vec<f64>,
    pub holdout: Vec<f64>,
}

impl ScoreSet {
    pub fn new(member: Vec<f64>, holdout: Vec<f64>) -> Result<Self> {
        if let Some(bad) = member.iter().chain(&holdout).find(|v| v.is_nan()) {
            return Err(Error::Evaluation(format!("score {bad} is not comparable")));
        }
        Ok(Self { member, holdout })
    }

    pub fn from_records(records: &[ScoreRecord], column: ScoreColumn) -> Result<Self> {
        let mut set = ScoreSet::default();
        for r in records {
            let v = column.pick(r).ok_or_else(|| {
                Error::Evaluation(format!("sample {} has no {column:?} score", r.sample_id))
            })?;
            if r.member {
                set.member.push(v);
            } else {
                set.holdout.push(v);
            }
        }
        Self::new(set.member, set.holdout)
    }

    fn require_both(&self) -> Result<()> {
        if self.member.is_empty() || self.holdout.is_empty() {
            return Err(Error::Evaluation(format!(
                "need both classes, got {} members and {} hold-outs",
                self.member.len(),
                self.holdout.len()
            )));
        }
        Ok(())
    }

    /// Distinct scores ascending, each with the number of members and
    /// hold-outs at exactly that value.
    fn grouped(&self) -> Vec<(f64, u64, u64)> {
        let mut all: Vec<(f64, bool)> = self
            .member
            .iter()
            .map(|&v| (v, true))
            .chain(self.holdout.iter().map(|&v| (v, false)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, u64, u64)> = Vec::new();
        for (v, m) in all {
            match out.last_mut() {
                Some(last) if last.0 == v => {
                    if m {
                        last.1 += 1;
                    } else {
                        last.2 += 1;
                    }
                }
                _ => out.push((v, m as u64, (!m) as u64)),
            }
        }
        out
    }
}

/// Maximum balanced accuracy over thresholds at −∞, midpoints between
/// adjacent distinct scores, and +∞. Returns `(asr, τ)`; ties go to the
/// smaller τ.
pub fn compute_asr(set: &ScoreSet) -> Result<(f64, f64)> {
    set.require_both()?;
    let (nm, nh) = (set.member.len() as u64, set.holdout.len() as u64);
    let groups = set.grouped();
    // balanced accuracy · 2·nm·nh = tp·nh + tn·nm
    let score = |tp: u64, fp: u64| tp * nh + (nh - fp) * nm;
    let mut best = (score(0, 0), f64::NEG_INFINITY);
    let (mut tp, mut fp) = (0, 0);
    for (i, &(v, m, h)) in groups.iter().enumerate() {
        tp += m;
        fp += h;
        let tau = match groups.get(i + 1) {
            Some(next) => v + (next.0 - v) / 2.0,
            None => f64::INFINITY,
        };
        let s = score(tp, fp);
        if s > best.0 {
            best = (s, tau);
        }
    }
    Ok((best.0 as f64 / (2 * nm * nh) as f64, best.1))
}

/// One ROC vertex: predicting "member" for every score ≤ `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    tp: Vec<u64>,
    fp: Vec<u64>,
    n_member: u64,
    n_holdout: u64,
}

/// ROC with one vertex per distinct score, preceded by `(0, 0)` at τ = −∞.
pub fn compute_roc(set: &ScoreSet) -> Result<RocCurve> {
    set.require_both()?;
    let (nm, nh) = (set.member.len() as u64, set.holdout.len() as u64);
    let groups = set.grouped();
    let mut curve = RocCurve {
        points: Vec::with_capacity(groups.len() + 1),
        tp: vec![0],
        fp: vec![0],
        n_member: nm,
        n_holdout: nh,
    };
    curve.points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    let (mut tp, mut fp) = (0, 0);
    for (v, m, h) in groups {
        tp += m;
        fp += h;
        curve.tp.push(tp);
        curve.fp.push(fp);
        curve.points.push(RocPoint {
            threshold: v,
            fpr: fp as f64 / nh as f64,
            tpr: tp as f64 / nm as f64,
        });
    }
    Ok(curve)
}

/// Trapezoidal area, accumulated on integer counts.
pub fn auc(curve: &RocCurve) -> f64 {
    let twice: u128 = (1..curve.tp.len())
        .map(|i| (curve.fp[i] - curve.fp[i - 1]) as u128 * (curve.tp[i] + curve.tp[i - 1]) as u128)
        .sum();
    twice as f64 / (2 * curve.n_member as u128 * curve.n_holdout as u128) as f64
}

/// Largest TPR among vertices with FPR within the budget; no interpolation.
pub fn tpr_at_fpr(curve: &RocCurve, fpr_budget: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.fpr <= fpr_budget + 1e-12)
        .map(|p| p.tpr)
        .fold(0.0, f64::max)
}

/// `Pr[score ≤ τ | member] − Pr[score ≤ τ | hold-out]`.
pub fn membership_advantage(set: &ScoreSet, tau: f64) -> Result<f64> {
    set.require_both()?;
    let rate = |v: &[f64]| v.iter().filter(|&&s| s <= tau).count() as f64 / v.len() as f64;
    Ok(rate(&set.member) - rate(&set.holdout))
}

pub(crate) fn mean_and_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaStats {
    pub sigma_member: f64,
    pub sigma_holdout: f64,
    pub ratio: f64,
}

/// Unbiased standard deviation per class and `σ_H / σ_M`.
pub fn sigma_ratio(set: &ScoreSet) -> Result<SigmaStats> {
    if set.member.len() < 2 || set.holdout.len() < 2 {
        return Err(Error::Evaluation("standard deviation needs two samples per class".into()));
    }
    let (_, sigma_member) = mean_and_sd(&set.member);
    let (_, sigma_holdout) = mean_and_sd(&set.holdout);
    if sigma_member == 0.0 {
        return Err(Error::Evaluation("member scores have zero spread".into()));
    }
    Ok(SigmaStats {
        sigma_member,
        sigma_holdout,
        ratio: sigma_holdout / sigma_member,
    })
}

/// Mean `hf_content` of misclassified samples at τ. A group with no
/// failures is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailedHf {
    pub tau: f64,
    pub failed_member_count: usize,
    pub failed_holdout_count: usize,
    pub mean_hf_failed_member: Option<f64>,
    pub mean_hf_failed_holdout: Option<f64>,
}

pub fn failed_sample_hf_analysis(records: &[ScoreRecord], column: ScoreColumn, tau: f64) -> Result<FailedHf> {
    let set = ScoreSet::from_records(records, column)?;
    set.require_both()?;
    let (mut fm, mut fh) = (Vec::new(), Vec::new());
    for r in records {
        let s = column.pick(r).expect("checked by from_records");
        match (r.member, s <= tau) {
            (true, false) => fm.push(r.hf_content),
            (false, true) => fh.push(r.hf_content),
            _ => {}
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(FailedHf {
        tau,
        failed_member_count: fm.len(),
        failed_holdout_count: fh.len(),
        mean_hf_failed_member: mean(&fm),
        mean_hf_failed_holdout: mean(&fh),
    })
}

pub fn write_roc_csv<W: Write>(curve: &RocCurve, mut w: W) -> std::io::Result<()> {
    writeln!(w, "threshold,fpr,tpr")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", sig12(p.threshold), sig12(p.fpr), sig12(p.tpr))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(m: &[f64], h: &[f64]) -> ScoreSet {
        ScoreSet::new(m.to_vec(), h.to_vec()).unwrap()
    }

    #[test]
    fn asr_examples() {
        assert_eq!(compute_asr(&set(&[0.1, 0.2], &[0.3, 0.4])).unwrap(), (1.0, 0.25));
        let (asr, tau) = compute_asr(&set(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.5])).unwrap();
        assert!((asr - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(tau, 2.25);
        let (asr, tau) = compute_asr(&set(&[1.0, 2.0], &[2.0, 1.0])).unwrap();
        assert_eq!(asr, 0.5);
        assert_eq!(tau, f64::NEG_INFINITY);
        assert!(compute_asr(&set(&[1.0], &[])).is_err());
    }

    #[test]
    fn roc_examples() {
        let c = compute_roc(&set(&[1.0, 3.0], &[2.0, 4.0])).unwrap();
        assert_eq!(auc(&c), 0.75);
        let fprs: Vec<f64> = c.points.iter().map(|p| p.fpr).collect();
        let tprs: Vec<f64> = c.points.iter().map(|p| p.tpr).collect();
        assert_eq!(fprs, vec![0.0, 0.0, 0.5, 0.5, 1.0]);
        assert_eq!(tprs, vec![0.0, 0.5, 0.5, 1.0, 1.0]);
        assert_eq!(auc(&compute_roc(&set(&[0.0, 1.0], &[2.0, 3.0])).unwrap()), 1.0);
        assert_eq!(auc(&compute_roc(&set(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0])).unwrap()), 0.5);
        // ties collapse into a single vertex
        assert_eq!(compute_roc(&set(&[1.0, 1.0], &[1.0])).unwrap().points.len(), 2);
        assert!(compute_roc(&set(&[], &[1.0])).is_err());
    }

    #[test]
    fn tpr_examples() {
        let c = compute_roc(&set(&[1.0, 3.0], &[2.0, 4.0])).unwrap();
        assert_eq!(tpr_at_fpr(&c, 1.0), 1.0);
        assert_eq!(tpr_at_fpr(&c, 0.01), 0.5);
        let perfect = compute_roc(&set(&[0.0, 0.5], &[1.0, 2.0])).unwrap();
        assert_eq!(tpr_at_fpr(&perfect, 0.01), 1.0);

        let m: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let h: Vec<f64> = (1..=100).map(|i| i as f64 + 0.5).collect();
        let c = compute_roc(&set(&m, &h)).unwrap();
        // brute force: at τ = 1 one member and no hold-out; at τ = 2, fpr 1%
        assert_eq!(tpr_at_fpr(&c, 0.0), 0.01);
        assert_eq!(tpr_at_fpr(&c, 0.01), 0.02);
    }

    #[test]
    fn advantage_examples() {
        let s = set(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.5]);
        assert!((membership_advantage(&s, 2.4).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(membership_advantage(&s, 0.0).unwrap(), 0.0);
        assert_eq!(membership_advantage(&set(&[0.0], &[1.0]), 0.5).unwrap(), 1.0);
    }

    #[test]
    fn sigma_examples() {
        let st = sigma_ratio(&set(&[0.0, 2.0], &[0.0, 4.0])).unwrap();
        assert!((st.ratio - 2.0).abs() < 1e-15);
        assert!((st.sigma_member - 2f64.sqrt()).abs() < 1e-15);
        assert!(sigma_ratio(&set(&[1.0, 1.0], &[0.0, 4.0])).is_err());
        assert!(sigma_ratio(&set(&[1.0], &[0.0, 4.0])).is_err());
    }

    fn rec(id: &str, member: bool, score: f64, hf: f64) -> ScoreRecord {
        ScoreRecord {
            sample_id: id.into(),
            member,
            score_raw: score,
            score_filtered: None,
            hf_content: hf,
        }
    }

    #[test]
    fn failed_hf_groups() {
        let recs = vec![
            rec("a", true, 1.0, 0.1),
            rec("b", true, 5.0, 0.4),
            rec("c", true, 7.0, 0.2),
            rec("d", false, 2.0, 0.05),
            rec("e", false, 6.0, 0.9),
        ];
        let f = failed_sample_hf_analysis(&recs, ScoreColumn::Raw, 3.0).unwrap();
        assert_eq!((f.failed_member_count, f.failed_holdout_count), (2, 1));
        assert!((f.mean_hf_failed_member.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(f.mean_hf_failed_holdout, Some(0.05));

        let sep = failed_sample_hf_analysis(&recs[..1], ScoreColumn::Raw, 3.0);
        assert!(sep.is_err());
        let sep = failed_sample_hf_analysis(&[recs[0].clone(), recs[4].clone()], ScoreColumn::Raw, 3.0).unwrap();
        assert_eq!(sep.mean_hf_failed_member, None);
        assert_eq!(sep.mean_hf_failed_holdout, None);
        assert!(failed_sample_hf_analysis(&recs, ScoreColumn::Filtered, 3.0).is_err());
    }

    #[test]
    fn roc_csv_layout() {
        let c = compute_roc(&set(&[1.0], &[2.0])).unwrap();
        let mut buf = Vec::new();
        write_roc_csv(&c, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,fpr,tpr\n-inf,0,0\n1,0,1\n2,1,1\n");
    }
}
