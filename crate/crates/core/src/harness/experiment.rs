//! End-to-end pipeline: data → training → attacks → metrics → files.
//!
//! Outputs are written into `<output_dir>/partial/` while the run is in
//! progress and moved into `<output_dir>` once every stage has succeeded, so
//! a failed run leaves exactly what it managed to produce under `partial/`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{run_attack, write_scores_csv, AttackKind, LabeledSample, ScoreRecord};
use crate::diffusion::{train_toy_denoiser, write_model, Denoiser, NoiseSchedule, TrainingTrace};
use crate::error::{Error, Result};
use crate::evaluation::{
    compute_roc, failed_sample_hf_analysis, write_roc_csv, FailedHf, MetricsReport, ScoreColumn, ScoreSet,
};
use crate::textfmt::sig12;

use super::config::ExperimentConfig;
use super::dataset::generate_dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub attack: AttackKind,
    pub raw: MetricsReport,
    pub filtered: Option<MetricsReport>,
    /// Failure analysis at each column's ASR-optimal threshold.
    pub failed_hf_raw: FailedHf,
    pub failed_hf_filtered: Option<FailedHf>,
}

impl AttackSummary {
    pub fn auc_gain(&self) -> Option<f64> {
        self.filtered.as_ref().map(|f| f.auc - self.raw.auc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n_member: usize,
    pub n_holdout: usize,
    /// Mean loss of the last training epoch; absent when a denoiser was
    /// supplied instead of trained.
    pub final_training_loss: Option<f64>,
    pub attacks: Vec<AttackSummary>,
}

impl ExperimentReport {
    pub fn attack(&self, kind: AttackKind) -> Option<&AttackSummary> {
        self.attacks.iter().find(|a| a.attack == kind)
    }
}

/// Everything a run produces in memory, alongside the files it writes.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub scores: Vec<(AttackKind, Vec<ScoreRecord>)>,
}

struct Writer {
    dir: PathBuf,
}

impl Writer {
    fn put(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialise");
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

/// Trains a denoiser on the members and runs the full pipeline.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run(config, None)
}

/// Runs the pipeline with a fixed denoiser instead of training one.
pub fn run_experiment_with_denoiser(config: &ExperimentConfig, denoiser: &dyn Denoiser) -> Result<ExperimentOutcome> {
    run(config, Some(denoiser))
}

fn run(config: &ExperimentConfig, supplied: Option<&dyn Denoiser>) -> Result<ExperimentOutcome> {
    stage("config", config.validate())?;
    let out_dir = &config.output_dir;
    let partial = out_dir.join("partial");
    if partial.exists() {
        stage("setup", fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e)))?;
    }
    stage("setup", fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e)))?;
    let w = Writer { dir: partial.clone() };
    stage("setup", w.put("config.toml", config.to_toml().as_bytes()))?;

    let sched = stage("schedule", config.schedule.build())?;
    let samples = stage("dataset", generate_dataset(&config.dataset))?;

    let trained;
    let (denoiser, loss): (&dyn Denoiser, Option<f64>) = match supplied {
        Some(d) => (d, None),
        None => {
            let members: Vec<_> = samples.iter().filter(|s| s.member).map(|s| s.image.clone()).collect();
            let (model, trace) = stage(
                "training",
                train_toy_denoiser(&members, &config.model, &config.training, &sched),
            )?;
            stage("training", write_training_outputs(&w, &model, &trace))?;
            trained = model;
            (&trained, trace.epoch_losses.last().copied())
        }
    };

    let (summaries, scores) = attack_and_evaluate(config, &samples, denoiser, &sched, &w)?;
    let report = ExperimentReport {
        seed: config.seed,
        n_member: samples.iter().filter(|s| s.member).count(),
        n_holdout: samples.iter().filter(|s| !s.member).count(),
        final_training_loss: loss,
        attacks: summaries,
    };
    stage("report", write_report_outputs(&w, &report))?;
    stage("finalize", promote(&partial, out_dir))?;
    Ok(ExperimentOutcome { report, scores })
}

fn write_training_outputs(w: &Writer, model: &crate::diffusion::ToyDenoiser, trace: &TrainingTrace) -> Result<()> {
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in trace.epoch_losses.iter().enumerate() {
        writeln!(csv, "{i},{}", sig12(*l)).unwrap();
    }
    w.put("training_loss.csv", csv.as_bytes())?;
    let mut buf = Vec::new();
    write_model(model, &mut buf).expect("in-memory write");
    w.put("model.fmia", &buf)
}

fn evaluate_column(
    w: &Writer,
    kind: AttackKind,
    records: &[ScoreRecord],
    column: ScoreColumn,
) -> Result<(MetricsReport, FailedHf)> {
    let tag = match column {
        ScoreColumn::Raw => "raw",
        ScoreColumn::Filtered => "filtered",
    };
    let set = ScoreSet::from_records(records, column)?;
    let metrics = MetricsReport::from_set(&set)?;
    let failed = failed_sample_hf_analysis(records, column, metrics.best_tau)?;
    let mut roc_csv = Vec::new();
    write_roc_csv(&compute_roc(&set)?, &mut roc_csv).expect("in-memory write");
    w.put(&format!("roc_{kind}_{tag}.csv"), &roc_csv)?;
    w.json(&format!("metrics_{kind}_{tag}.json"), &metrics)?;
    Ok((metrics, failed))
}

type Scored = (Vec<AttackSummary>, Vec<(AttackKind, Vec<ScoreRecord>)>);

fn attack_and_evaluate(
    config: &ExperimentConfig,
    samples: &[LabeledSample],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    w: &Writer,
) -> Result<Scored> {
    let mut summaries = Vec::new();
    let mut all_scores = Vec::new();
    for attack in &config.attacks {
        let kind = attack.kind;
        let records = stage(
            &format!("attack:{kind}"),
            run_attack(samples, attack, denoiser, sched, config.evaluation.boundary_radius),
        )?;
        let mut csv = Vec::new();
        write_scores_csv(&records, &mut csv).expect("in-memory write");
        w.put(&format!("scores_{kind}.csv"), &csv)?;

        let eval_stage = format!("evaluation:{kind}");
        let (raw, failed_hf_raw) = stage(&eval_stage, evaluate_column(w, kind, &records, ScoreColumn::Raw))?;
        let (filtered, failed_hf_filtered) = match attack.filter {
            Some(_) => {
                let (m, f) = stage(&eval_stage, evaluate_column(w, kind, &records, ScoreColumn::Filtered))?;
                (Some(m), Some(f))
            }
            None => (None, None),
        };
        summaries.push(AttackSummary {
            attack: kind,
            raw,
            filtered,
            failed_hf_raw,
            failed_hf_filtered,
        });
        all_scores.push((kind, records));
    }
    Ok((summaries, all_scores))
}

fn opt(v: Option<f64>) -> String {
    v.map(sig12).unwrap_or_default()
}

/// Raw-versus-filtered table with an `Avg+` row of mean deltas.
pub fn comparison_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "attack,asr_raw,asr_filtered,asr_delta,auc_raw,auc_filtered,auc_delta,tpr_raw,tpr_filtered,tpr_delta\n",
    );
    let mut deltas: Vec<[f64; 3]> = Vec::new();
    for a in &report.attacks {
        let r = &a.raw;
        let f = a.filtered.as_ref();
        let d = f.map(|f| [f.asr - r.asr, f.auc - r.auc, f.tpr_at_1pct_fpr - r.tpr_at_1pct_fpr]);
        if let Some(d) = d {
            deltas.push(d);
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            a.attack,
            sig12(r.asr),
            opt(f.map(|f| f.asr)),
            opt(d.map(|d| d[0])),
            sig12(r.auc),
            opt(f.map(|f| f.auc)),
            opt(d.map(|d| d[1])),
            sig12(r.tpr_at_1pct_fpr),
            opt(f.map(|f| f.tpr_at_1pct_fpr)),
            opt(d.map(|d| d[2])),
        )
        .unwrap();
    }
    if !deltas.is_empty() {
        let n = deltas.len() as f64;
        let mean = |i: usize| deltas.iter().map(|d| d[i]).sum::<f64>() / n;
        writeln!(out, "Avg+,,,{},,,{},,,{}", sig12(mean(0)), sig12(mean(1)), sig12(mean(2))).unwrap();
    }
    out
}

pub fn failed_hf_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "attack,column,tau,failed_member_count,failed_holdout_count,mean_hf_failed_member,mean_hf_failed_holdout\n",
    );
    for a in &report.attacks {
        let rows = [("raw", Some(&a.failed_hf_raw)), ("filtered", a.failed_hf_filtered.as_ref())];
        for (tag, f) in rows {
            if let Some(f) = f {
                writeln!(
                    out,
                    "{},{tag},{},{},{},{},{}",
                    a.attack,
                    sig12(f.tau),
                    f.failed_member_count,
                    f.failed_holdout_count,
                    opt(f.mean_hf_failed_member),
                    opt(f.mean_hf_failed_holdout)
                )
                .unwrap();
            }
        }
    }
    out
}

fn write_report_outputs(w: &Writer, report: &ExperimentReport) -> Result<()> {
    w.put("comparison.csv", comparison_csv(report).as_bytes())?;
    w.put("failed_hf.csv", failed_hf_csv(report).as_bytes())?;
    w.json("report.json", report)
}

fn promote(partial: &Path, out_dir: &Path) -> Result<()> {
    let mut names: Vec<_> = fs::read_dir(partial)
        .map_err(|e| Error::io(partial, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .collect();
    names.sort();
    for name in names {
        let to = out_dir.join(&name);
        fs::rename(partial.join(&name), &to).map_err(|e| Error::io(&to, e))?;
    }
    fs::remove_dir(partial).map_err(|e| Error::io(partial, e))
}

/// Plain-text tables for a stored report.
pub fn render_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "seed {}  members {}  hold-outs {}",
        report.seed, report.n_member, report.n_holdout
    )
    .unwrap();
    if let Some(l) = report.final_training_loss {
        writeln!(out, "final training loss {}", crate::textfmt::sig(l, 6)).unwrap();
    }
    writeln!(out).unwrap();
    let pct = |v: f64| format!("{:.2}", 100.0 * v);
    let pct_opt = |v: Option<f64>| v.map(pct).unwrap_or_else(|| "-".into());
    writeln!(
        out,
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9}",
        "attack", "ASR", "ASR+F", "AUC", "AUC+F", "TPR@1%", "TPR+F", "σH/σM", "σH/σM+F"
    )
    .unwrap();
    let ratio = |m: Option<&MetricsReport>| {
        m.and_then(|m| m.sigma_ratio)
            .map(|r| format!("{r:.4}"))
            .unwrap_or_else(|| "-".into())
    };
    for a in &report.attacks {
        let f = a.filtered.as_ref();
        writeln!(
            out,
            "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9}",
            a.attack.name(),
            pct(a.raw.asr),
            pct_opt(f.map(|f| f.asr)),
            pct(a.raw.auc),
            pct_opt(f.map(|f| f.auc)),
            pct(a.raw.tpr_at_1pct_fpr),
            pct_opt(f.map(|f| f.tpr_at_1pct_fpr)),
            ratio(Some(&a.raw)),
            ratio(f),
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "failed samples (raw scores, ASR-optimal threshold)").unwrap();
    writeln!(out, "{:<8} {:>14} {:>14}", "attack", "member hf", "hold-out hf").unwrap();
    let hf = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
    for a in &report.attacks {
        writeln!(
            out,
            "{:<8} {:>14} {:>14}",
            a.attack.name(),
            hf(a.failed_hf_raw.mean_hf_failed_member),
            hf(a.failed_hf_raw.mean_hf_failed_holdout)
        )
        .unwrap();
    }
    out
}
