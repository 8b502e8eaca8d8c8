//! When does suppressing the high-frequency score component raise the
//! hold-out/member spread ratio?
//!
//! The membership score is modelled as a sum of independent normal low- and
//! high-frequency parts with standard deviations `l` and `h` per class.
//! Before filtering a class has spread `√(l² + h²)`; a hard filter leaves
//! `l`. With `Δ = l_H − l_M` and `k = h_M / h_H`, the post-filter ratio
//! exceeds the pre-filter one whenever `k² > f`.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::seed::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropositionInputs {
    pub l_m: f64,
    pub l_h: f64,
    pub h_m: f64,
    pub h_h: f64,
}

impl PropositionInputs {
    /// Low-frequency deviations must be positive; high-frequency ones may be
    /// zero (the degenerate case the verifier flags).
    pub fn new(l_m: f64, l_h: f64, h_m: f64, h_h: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite();
        if !(ok(l_m) && ok(l_h) && ok(h_m) && ok(h_h)) || l_m <= 0.0 || l_h <= 0.0 || h_m < 0.0 || h_h < 0.0 {
            return Err(Error::Config(format!(
                "component deviations must be finite with l > 0 and h ≥ 0, got l_M={l_m} l_H={l_h} h_M={h_m} h_H={h_h}"
            )));
        }
        Ok(Self { l_m, l_h, h_m, h_h })
    }

    /// Builds inputs from `(l_M, Δ, k)` and `h_H`.
    pub fn from_delta_k(l_m: f64, delta: f64, k: f64, h_h: f64) -> Result<Self> {
        Self::new(l_m, l_m + delta, k * h_h, h_h)
    }

    pub fn delta(&self) -> f64 {
        self.l_h - self.l_m
    }

    pub fn k(&self) -> f64 {
        self.h_m / self.h_h
    }

    pub fn is_degenerate(&self) -> bool {
        self.h_m == 0.0 && self.h_h == 0.0
    }

    /// `(σ_H/σ_M, σ'_H/σ'_M)` for the population.
    pub fn population_ratios(&self) -> (f64, f64) {
        let pre = self.l_h.hypot(self.h_h) / self.l_m.hypot(self.h_m);
        (pre, self.l_h / self.l_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub k_sq: f64,
    pub f: f64,
    pub satisfied: bool,
}

impl ConstraintCheck {
    pub fn margin(&self) -> f64 {
        self.k_sq - self.f
    }
}

/// `f = 1 + (2Δ/h_H²)(l_M + 2Δ − √((l_M + 2Δ)² + h_H²))`; satisfied iff
/// `k² > f`. For `Δ > 0` the bracket is negative, so `f < 1`.
pub fn proposition_constraint(inputs: &PropositionInputs) -> Result<ConstraintCheck> {
    if inputs.h_h.is_nan() || inputs.h_h <= 0.0 {
        return Err(Error::Config("the constraint needs h_H > 0".into()));
    }
    let d = inputs.delta();
    let a = inputs.l_m + 2.0 * d;
    let hh2 = inputs.h_h * inputs.h_h;
    let f = 1.0 + (2.0 * d / hh2) * (a - a.hypot(inputs.h_h));
    let k_sq = inputs.k() * inputs.k();
    Ok(ConstraintCheck {
        k_sq,
        f,
        satisfied: k_sq > f,
    })
}

/// How per-resample sample variances are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Draws the 2×2 sample covariance of (low, high) from its Wishart law
    /// via the Bartlett decomposition; exact and O(1) per resample.
    Wishart,
    /// Draws every score component explicitly.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub resamples: usize,
    pub seed: u64,
    pub mode: McMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            resamples: 1000,
            seed: 0,
            mode: McMode::Wishart,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McStatus {
    Verified,
    Failed,
    PreconditionUnmet,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub inputs: PropositionInputs,
    pub constraint: Option<ConstraintCheck>,
    pub status: McStatus,
    pub n_samples: usize,
    pub resamples: usize,
    /// Fraction of resamples with `σ'_H/σ'_M > σ_H/σ_M`.
    pub pass_fraction: f64,
    /// Mean and standard error of `σ'_H/σ'_M − σ_H/σ_M` over resamples.
    pub mean_gap: f64,
    pub gap_std_err: f64,
    pub population_pre_ratio: f64,
    pub population_post_ratio: f64,
    /// Whether the mean gap lies within 3 standard errors of the closed form.
    pub analytic_agrees: bool,
}

/// `(pre, post)` sample standard deviations of one class.
fn class_spreads<R: Rng>(l: f64, h: f64, n: usize, mode: McMode, rng: &mut R) -> (f64, f64) {
    let dof = (n - 1) as f64;
    match mode {
        McMode::Wishart => {
            // W = S^{1/2} A Aᵀ S^{1/2} with A = [[c1, 0], [z, c2]]
            let c1_sq = ChiSquared::new(dof).expect("positive dof").sample(rng);
            let c2_sq = ChiSquared::new(dof - 1.0).expect("positive dof").sample(rng);
            let z: f64 = rng.sample(StandardNormal);
            let w_ll = l * l * c1_sq;
            let w_hh = h * h * (z * z + c2_sq);
            let w_lh = l * h * c1_sq.sqrt() * z;
            let pre = ((w_ll + w_hh + 2.0 * w_lh) / dof).max(0.0).sqrt();
            (pre, (w_ll / dof).sqrt())
        }
        McMode::Direct => {
            let (mut s, mut ss, mut sl, mut ssl) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let lo: f64 = l * rng.sample::<f64, _>(StandardNormal);
                let hi: f64 = h * rng.sample::<f64, _>(StandardNormal);
                let x = lo + hi;
                s += x;
                ss += x * x;
                sl += lo;
                ssl += lo * lo;
            }
            let nf = n as f64;
            let var = |sum: f64, sq: f64| ((sq - sum * sum / nf) / dof).max(0.0);
            (var(s, ss).sqrt(), var(sl, ssl).sqrt())
        }
    }
}

/// Simulates both classes `resamples` times with `n_samples` scores each and
/// compares filtered and unfiltered spread ratios. Resample `b` draws from a
/// stream derived from `(seed, b)`, so results for the first resamples do not
/// depend on how many are requested.
pub fn proposition_mc_verify(inputs: &PropositionInputs, config: &McConfig) -> Result<McReport> {
    if config.n_samples < 10_000 {
        return Err(Error::Config(format!(
            "n_samples must be at least 10^4, got {}",
            config.n_samples
        )));
    }
    if config.resamples < 2 {
        return Err(Error::Config("need at least two resamples".into()));
    }
    let constraint = if inputs.h_h > 0.0 { Some(proposition_constraint(inputs)?) } else { None };

    let gaps: Vec<f64> = (0..config.resamples)
        .map(|b| {
            let mut rng = derive_rng(config.seed, "proposition-mc", &b.to_string());
            let (pre_m, post_m) = class_spreads(inputs.l_m, inputs.h_m, config.n_samples, config.mode, &mut rng);
            let (pre_h, post_h) = class_spreads(inputs.l_h, inputs.h_h, config.n_samples, config.mode, &mut rng);
            post_h / post_m - pre_h / pre_m
        })
        .collect();
    let n = gaps.len() as f64;
    let pass_fraction = gaps.iter().filter(|&&g| g > 0.0).count() as f64 / n;
    let mean_gap = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean_gap) * (g - mean_gap)).sum::<f64>() / (n - 1.0);
    let gap_std_err = (var / n).sqrt();
    let (pop_pre, pop_post) = inputs.population_ratios();
    let expected_gap = pop_post - pop_pre;
    let analytic_agrees = (mean_gap - expected_gap).abs() <= 3.0 * gap_std_err + 1e-12;

    let status = if inputs.is_degenerate() {
        McStatus::Degenerate
    } else if !constraint.is_some_and(|c| c.satisfied) {
        McStatus::PreconditionUnmet
    } else if pass_fraction > 0.99 {
        McStatus::Verified
    } else {
        McStatus::Failed
    };
    Ok(McReport {
        inputs: *inputs,
        constraint,
        status,
        n_samples: config.n_samples,
        resamples: config.resamples,
        pass_fraction,
        mean_gap,
        gap_std_err,
        population_pre_ratio: pop_pre,
        population_post_ratio: pop_post,
        analytic_agrees,
    })
}
