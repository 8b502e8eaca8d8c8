//! Diffusion-process math and denoisers.
//!
//! Timesteps are zero-based: index `t` addresses `beta[t]` and
//! `alpha_bar[t] = Π_{i ≤ t} (1 − beta[i])`. A clean image is treated as the
//! state at index 0 by the inversion chains.

mod denoiser;
mod sampling;
mod schedule;
mod toy;
mod train;
mod weights;

pub use denoiser::{ConstantDenoiser, Denoiser, FnDenoiser, MemorizingDenoiser, ZeroDenoiser};
pub use sampling::{
    ddim_denoise_chain, ddim_denoise_step, ddim_reverse_chain, ddim_reverse_step, ddim_transfer, ddpm_step,
    predict_x0, q_sample, simple_loss,
};
pub use schedule::{NoiseSchedule, ScheduleConfig};
pub use toy::{timestep_embedding, Gradients, ToyArchitecture, ToyDenoiser, TrainBatch};
pub use train::{mean_simple_loss, train_toy_denoiser, LossSummary, TrainingConfig, TrainingTrace};
pub use weights::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
