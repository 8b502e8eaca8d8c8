//! Reconstruction-distance membership scoring.
//!
//! Every attack reduces to a [`ScorePair`]: a model-derived prediction and a
//! target computed from the sample itself. The membership score is the
//! `ℓ_q` distance between the two, optionally after passing both through the
//! high-frequency filter. Lower scores indicate members.

use std::fmt;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{ddim_reverse_chain, ddim_transfer, predict_x0, q_sample, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::harness::seed::derive_seed;
use crate::image::ImageTensor;
use crate::spectral::{apply_filter, high_frequency_content, FilterSpec};
use crate::textfmt::sig12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Naive,
    Pia,
    SecMi,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Naive, AttackKind::Pia, AttackKind::SecMi];

    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Naive => "naive",
            AttackKind::Pia => "pia",
            AttackKind::SecMi => "secmi",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Order of the elementwise norm used for the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum NormOrder {
    L1,
    L2,
}

impl TryFrom<u8> for NormOrder {
    type Error = Error;

    fn try_from(q: u8) -> Result<Self> {
        match q {
            1 => Ok(NormOrder::L1),
            2 => Ok(NormOrder::L2),
            other => Err(Error::Config(format!("norm order must be 1 or 2, got {other}"))),
        }
    }
}

impl From<NormOrder> for u8 {
    fn from(q: NormOrder) -> u8 {
        match q {
            NormOrder::L1 => 1,
            NormOrder::L2 => 2,
        }
    }
}

impl NormOrder {
    pub fn norm(&self, x: &ImageTensor) -> f64 {
        match self {
            NormOrder::L1 => x.l1_norm(),
            NormOrder::L2 => x.l2_norm(),
        }
    }
}

fn default_stride() -> usize {
    10
}

fn default_q() -> NormOrder {
    NormOrder::L2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub t_attack: usize,
    /// Ladder stride; only SecMI uses it.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_q")]
    pub q: NormOrder,
    #[serde(default)]
    pub filter: Option<FilterSpec>,
    #[serde(skip)]
    pub seed: u64,
}

impl AttackConfig {
    /// Defaults: Naive and PIA at t = 200, SecMI at t = 100 with stride 10,
    /// ℓ2 norm, filter `s = 0.2, r_t = 5`.
    pub fn default_for(kind: AttackKind) -> Self {
        let t_attack = match kind {
            AttackKind::Naive | AttackKind::Pia => 200,
            AttackKind::SecMi => 100,
        };
        Self {
            kind,
            t_attack,
            stride: default_stride(),
            q: NormOrder::L2,
            filter: Some(FilterSpec::default()),
            seed: 0,
        }
    }

    pub fn validate(&self, sched: &NoiseSchedule) -> Result<()> {
        let len = sched.num_timesteps();
        if self.t_attack >= len {
            return Err(Error::Config(format!(
                "{}: t_attack {} outside schedule of length {len}",
                self.kind, self.t_attack
            )));
        }
        if let Some(f) = &self.filter {
            f.validate()?;
        }
        if self.kind == AttackKind::SecMi {
            if self.stride == 0 {
                return Err(Error::Config("secmi: stride must be positive".into()));
            }
            if self.t_attack == 0 || !self.t_attack.is_multiple_of(self.stride) {
                return Err(Error::Config(format!(
                    "secmi: t_attack {} is not reachable from 0 with stride {}",
                    self.t_attack, self.stride
                )));
            }
            if self.t_attack + self.stride >= len {
                return Err(Error::Config(format!(
                    "secmi: t_attack + stride = {} must stay below {len}",
                    self.t_attack + self.stride
                )));
            }
        }
        Ok(())
    }
}

/// Model prediction and self-derived target at the attack timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePair {
    pub predicted: ImageTensor,
    pub target: ImageTensor,
}

impl ScorePair {
    /// Rejects mismatched shapes and non-finite values, which would mean the
    /// denoiser blew up.
    pub fn new(predicted: ImageTensor, target: ImageTensor) -> Result<Self> {
        predicted.ensure_same_shape(&target, "score pair target")?;
        if !(predicted.is_finite() && target.is_finite()) {
            return Err(Error::Contract("denoiser produced non-finite values".into()));
        }
        Ok(Self { predicted, target })
    }
}

/// `‖F(predicted) − F(target)‖_q`, or the unfiltered distance when `filter`
/// is `None`. The filter is linear, so the difference is filtered once.
pub fn paradigm_score(pair: &ScorePair, q: NormOrder, filter: Option<&FilterSpec>) -> f64 {
    let diff = pair.predicted.sub(&pair.target);
    match filter {
        Some(f) => q.norm(&apply_filter(&diff, f)),
        None => q.norm(&diff),
    }
}

fn x0_estimate(x_t: &ImageTensor, eps: &ImageTensor, t: usize, sched: &NoiseSchedule) -> Result<ImageTensor> {
    predict_x0(x_t, eps, t, sched)
}

/// Noise-loss attack: seeded noise `ε`, `x_t = q_sample(x0, t, ε)`; target
/// rebuilds `x0` with `ε`, prediction with `ε_θ(x_t, t)`.
pub fn naive_pair(
    x0: &ImageTensor,
    t: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<ScorePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = x0.map(|_| rng.sample(StandardNormal));
    let x_t = q_sample(x0, t, &eps, sched)?;
    let eps_hat = denoiser.predict_noise(&x_t, t);
    ScorePair::new(x0_estimate(&x_t, &eps_hat, t, sched)?, x0_estimate(&x_t, &eps, t, sched)?)
}

/// Proximal-initialisation attack: the noise is `ε_θ(x0, 0)` instead of a
/// random draw, so the pair is fully deterministic.
pub fn pia_pair(x0: &ImageTensor, t: usize, denoiser: &dyn Denoiser, sched: &NoiseSchedule) -> Result<ScorePair> {
    sched.check_timestep(t)?;
    let eps0 = denoiser.predict_noise(x0, 0);
    let x_t = q_sample(x0, t, &eps0, sched)?;
    let eps_hat = denoiser.predict_noise(&x_t, t);
    ScorePair::new(x0_estimate(&x_t, &eps_hat, t, sched)?, x0_estimate(&x_t, &eps0, t, sched)?)
}

/// Step-error attack: invert `x0` deterministically to `x̃_t`, then take one
/// inversion macro-step `t → t+stride` and one denoising macro-step back.
/// The target is `x̃_t`.
pub fn secmi_pair(
    x0: &ImageTensor,
    t: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    stride: usize,
) -> Result<ScorePair> {
    if stride == 0 || t == 0 || !t.is_multiple_of(stride) {
        return Err(Error::Config(format!(
            "secmi: timestep {t} is not reachable from 0 with stride {stride}"
        )));
    }
    if t + stride >= sched.num_timesteps() {
        return Err(Error::Config(format!(
            "secmi: t + stride = {} must stay below {}",
            t + stride,
            sched.num_timesteps()
        )));
    }
    let x_tilde = ddim_reverse_chain(x0, 0, t, denoiser, sched, stride)?;
    let up = ddim_transfer(&x_tilde, t, t + stride, denoiser, sched)?;
    let back = ddim_transfer(&up, t + stride, t, denoiser, sched)?;
    ScorePair::new(back, x_tilde)
}

/// One sample with its ground-truth membership label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub id: String,
    pub member: bool,
    pub image: ImageTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub member: bool,
    pub score_raw: f64,
    pub score_filtered: Option<f64>,
    pub hf_content: f64,
}

/// Builds the attack's pair for one sample.
pub fn attack_pair(
    sample: &LabeledSample,
    config: &AttackConfig,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
) -> Result<ScorePair> {
    match config.kind {
        AttackKind::Naive => {
            let seed = derive_seed(config.seed, "naive-noise", &sample.id);
            naive_pair(&sample.image, config.t_attack, denoiser, sched, seed)
        }
        AttackKind::Pia => pia_pair(&sample.image, config.t_attack, denoiser, sched),
        AttackKind::SecMi => secmi_pair(&sample.image, config.t_attack, denoiser, sched, config.stride),
    }
}

/// Scores every sample. Raw and filtered scores come from the same pair, so
/// they share all randomness. Output order follows input order.
pub fn run_attack(
    samples: &[LabeledSample],
    config: &AttackConfig,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    boundary_radius: f64,
) -> Result<Vec<ScoreRecord>> {
    if samples.is_empty() {
        return Err(Error::Config("attack dataset is empty".into()));
    }
    config.validate(sched)?;
    samples
        .par_iter()
        .map(|sample| {
            let pair = attack_pair(sample, config, denoiser, sched)
                .map_err(|e| Error::Contract(format!("sample {}: {e}", sample.id)))?;
            let score_raw = paradigm_score(&pair, config.q, None);
            let score_filtered = config.filter.as_ref().map(|f| paradigm_score(&pair, config.q, Some(f)));
            Ok(ScoreRecord {
                sample_id: sample.id.clone(),
                member: sample.member,
                score_raw,
                score_filtered,
                hf_content: high_frequency_content(&sample.image, boundary_radius),
            })
        })
        .collect()
}

pub const SCORE_CSV_HEADER: &str = "sample_id,membership,score_raw,score_filtered,hf_content";

/// Writes the score table; floats carry 12 significant digits and a missing
/// filtered score is an empty field.
pub fn write_scores_csv<W: Write>(records: &[ScoreRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SCORE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.sample_id,
            u8::from(r.member),
            sig12(r.score_raw),
            r.score_filtered.map(sig12).unwrap_or_default(),
            sig12(r.hf_content)
        )?;
    }
    Ok(())
}

pub fn read_scores_csv<R: Read>(r: R, source: &str) -> Result<Vec<ScoreRecord>> {
    let bad = |reason: String| Error::Ingestion {
        file: source.to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != SCORE_CSV_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let parse = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| bad(format!("line {line}: `{s}` is not a number")))
    };
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 5 {
            return Err(bad(format!("line {line}: expected 5 fields, got {}", row.len())));
        }
        let member = match &row[1] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("line {line}: membership `{other}` is not 0 or 1"))),
        };
        out.push(ScoreRecord {
            sample_id: row[0].to_string(),
            member,
            score_raw: parse(&row[2], line)?,
            score_filtered: if row[3].is_empty() { None } else { Some(parse(&row[3], line)?) },
            hf_content: parse(&row[4], line)?,
        });
    }
    Ok(out)
}
