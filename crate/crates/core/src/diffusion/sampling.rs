use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

use super::{Denoiser, NoiseSchedule};

/// Forward diffusion in one shot: `√ᾱ_t·x0 + √(1−ᾱ_t)·eps`.
pub fn q_sample(x0: &ImageTensor, t: usize, eps: &ImageTensor, sched: &NoiseSchedule) -> Result<ImageTensor> {
    sched.check_timestep(t)?;
    x0.ensure_same_shape(eps, "q_sample noise")?;
    let ab = sched.alpha_bar_at(t);
    Ok(x0.lin_comb(ab.sqrt(), eps, (1.0 - ab).sqrt()))
}

/// Mean squared error between `eps` and the denoiser's prediction at `q_sample(x0, t, eps)`.
pub fn simple_loss(
    denoiser: &dyn Denoiser,
    x0: &ImageTensor,
    t: usize,
    eps: &ImageTensor,
    sched: &NoiseSchedule,
) -> Result<f64> {
    let x_t = q_sample(x0, t, eps, sched)?;
    let pred = denoiser.predict_noise(&x_t, t);
    eps.ensure_same_shape(&pred, "denoiser output")?;
    let sum: f64 = eps.data().iter().zip(pred.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / eps.len() as f64)
}

/// Clean-image estimate `(x_t − √(1−ᾱ_t)·eps_hat)/√ᾱ_t`.
pub fn predict_x0(x_t: &ImageTensor, eps_hat: &ImageTensor, t: usize, sched: &NoiseSchedule) -> Result<ImageTensor> {
    sched.check_timestep(t)?;
    x_t.ensure_same_shape(eps_hat, "predict_x0 noise estimate")?;
    let ab = sched.alpha_bar_at(t);
    let inv = 1.0 / ab.sqrt();
    Ok(x_t.lin_comb(inv, eps_hat, -(1.0 - ab).sqrt() * inv))
}

/// Deterministic (η = 0) DDIM move from timestep `from` to `to` using the
/// noise predicted at `from`. Both the one-step maps and the strided chains
/// are built on this.
pub fn ddim_transfer(
    x: &ImageTensor,
    from: usize,
    to: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
) -> Result<ImageTensor> {
    sched.check_timestep(from)?;
    sched.check_timestep(to)?;
    let eps = denoiser.predict_noise(x, from);
    x.ensure_same_shape(&eps, "denoiser output")?;
    let ab_from = sched.alpha_bar_at(from);
    let ab_to = sched.alpha_bar_at(to);
    let x0_coeff = ab_to.sqrt() / ab_from.sqrt();
    let eps_coeff = (1.0 - ab_to).sqrt() - x0_coeff * (1.0 - ab_from).sqrt();
    Ok(x.lin_comb(x0_coeff, &eps, eps_coeff))
}

/// `ψ_θ`: one deterministic denoising step `t → t−1`.
pub fn ddim_denoise_step(x_t: &ImageTensor, t: usize, denoiser: &dyn Denoiser, sched: &NoiseSchedule) -> Result<ImageTensor> {
    if t == 0 || t >= sched.num_timesteps() {
        return Err(Error::Contract(format!(
            "denoise step needs 1 <= t < {}, got {t}",
            sched.num_timesteps()
        )));
    }
    ddim_transfer(x_t, t, t - 1, denoiser, sched)
}

/// `φ_θ`: one deterministic inversion step `t → t+1`.
pub fn ddim_reverse_step(x_t: &ImageTensor, t: usize, denoiser: &dyn Denoiser, sched: &NoiseSchedule) -> Result<ImageTensor> {
    if t + 1 >= sched.num_timesteps() {
        return Err(Error::Contract(format!(
            "reverse step needs t < {}, got {t}",
            sched.num_timesteps() - 1
        )));
    }
    ddim_transfer(x_t, t, t + 1, denoiser, sched)
}

fn check_ladder(lo: usize, hi: usize, stride: usize, sched: &NoiseSchedule) -> Result<()> {
    if stride == 0 {
        return Err(Error::Config("ladder stride must be positive".into()));
    }
    if lo >= hi {
        return Err(Error::Config(format!("ladder needs start < end, got {lo} >= {hi}")));
    }
    if hi >= sched.num_timesteps() {
        return Err(Error::Config(format!(
            "ladder end {hi} outside schedule of length {}",
            sched.num_timesteps()
        )));
    }
    if !(hi - lo).is_multiple_of(stride) {
        return Err(Error::Config(format!(
            "range {lo}..{hi} is not divisible by stride {stride}"
        )));
    }
    Ok(())
}

/// `Φ_θ`: inversion from `x_s` at timestep `s` up to `t`, one macro-step per
/// `stride` timesteps.
pub fn ddim_reverse_chain(
    x_s: &ImageTensor,
    s: usize,
    t: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    stride: usize,
) -> Result<ImageTensor> {
    check_ladder(s, t, stride, sched)?;
    let mut x = x_s.clone();
    for from in (s..t).step_by(stride) {
        x = ddim_transfer(&x, from, from + stride, denoiser, sched)?;
    }
    Ok(x)
}

/// `Ψ_θ`: deterministic denoising from `x_t` at timestep `t` down to `s`.
pub fn ddim_denoise_chain(
    x_t: &ImageTensor,
    t: usize,
    s: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    stride: usize,
) -> Result<ImageTensor> {
    check_ladder(s, t, stride, sched)?;
    let mut x = x_t.clone();
    let mut from = t;
    while from > s {
        x = ddim_transfer(&x, from, from - stride, denoiser, sched)?;
        from -= stride;
    }
    Ok(x)
}

/// Ancestral DDPM step `t → t−1` with `σ_t² = β_t`; no noise is added at
/// `t = 0`. A sampling utility only: the attacks use the deterministic maps.
pub fn ddpm_step<R: Rng + ?Sized>(
    x_t: &ImageTensor,
    t: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<ImageTensor> {
    sched.check_timestep(t)?;
    let eps = denoiser.predict_noise(x_t, t);
    x_t.ensure_same_shape(&eps, "denoiser output")?;
    let alpha = sched.alpha()[t];
    let coeff = (1.0 - alpha) / (1.0 - sched.alpha_bar_at(t)).sqrt();
    let mean = x_t.lin_comb(1.0, &eps, -coeff).scale(1.0 / alpha.sqrt());
    if t == 0 {
        return Ok(mean);
    }
    let sigma = sched.beta()[t].sqrt();
    Ok(mean.map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)))
}
