//! Error-based membership inference against small diffusion models, with a
//! plug-in high-frequency filter applied to the membership score.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: centred 2D DFT, radial masks, the score filter and
//!   high-frequency content measurement.
//! * [`diffusion`]: noise schedules, DDPM/DDIM step math, the [`Denoiser`]
//!   interface and a small MLP denoiser trained with manual backpropagation.
//! * [`attacks`]: the shared reconstruction-distance scorer and the Naive,
//!   PIA and SecMI pair constructions.
//! * [`evaluation`]: ASR/ROC/AUC/TPR metrics, σ ratios, KS normality and the
//!   variance-ratio constraint with its Monte-Carlo verifier.
//! * [`harness`]: datasets, configuration, seeding and the end-to-end
//!   experiment runner used by the `freqmia` binary.

pub mod attacks;
pub mod diffusion;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod image;
pub mod spectral;
mod textfmt;

pub use diffusion::{Denoiser, NoiseSchedule};
pub use error::{Error, Result};
pub use image::ImageTensor;
pub use spectral::{FilterSpec, Spectrum};
