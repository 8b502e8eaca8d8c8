use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::seed::derive_rng;
use crate::image::ImageTensor;

use super::toy::{ToyArchitecture, ToyDenoiser, TrainBatch};
use super::{simple_loss, Denoiser, NoiseSchedule};

/// SGD settings. `seed` fixes initialisation, batching, timesteps and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    /// Rescale the gradient when its global norm exceeds this value.
    #[serde(default)]
    pub clip_grad_norm: Option<f64>,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 600,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            clip_grad_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if let Some(c) = self.clip_grad_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(format!("clip_grad_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epoch_losses: Vec<f64>,
}

fn sample_batch<R: Rng>(
    images: &[&ImageTensor],
    sched: &NoiseSchedule,
    rng: &mut R,
) -> TrainBatch {
    let pixels = images[0].len();
    let n = images.len();
    let mut noisy = Array2::zeros((n, pixels));
    let mut noise = Array2::zeros((n, pixels));
    let mut timesteps = Vec::with_capacity(n);
    for (r, img) in images.iter().enumerate() {
        let t = rng.random_range(0..sched.num_timesteps());
        let ab = sched.alpha_bar_at(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for (c, &x) in img.data().iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            noise[[r, c]] = e;
            noisy[[r, c]] = a * x + b * e;
        }
        timesteps.push(t);
    }
    TrainBatch {
        noisy,
        timesteps,
        noise,
    }
}

/// Fits a [`ToyDenoiser`] to `dataset` with the simple noise-prediction loss.
pub fn train_toy_denoiser(
    dataset: &[ImageTensor],
    arch: &ToyArchitecture,
    config: &TrainingConfig,
    sched: &NoiseSchedule,
) -> Result<(ToyDenoiser, TrainingTrace)> {
    config.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| Error::Config("training set is empty".into()))?;
    if let Some(bad) = dataset.iter().find(|img| !img.same_shape(first)) {
        return Err(Error::Config(format!(
            "training images must share one shape, found {:?} and {:?}",
            first.shape(),
            bad.shape()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = ToyDenoiser::init(first.shape(), arch, sched.num_timesteps(), &mut rng)?;
    let mut velocity: Vec<_> = net
        .layers
        .iter()
        .map(|l| (Array2::<f64>::zeros(l.weight.raw_dim()), ndarray::Array1::<f64>::zeros(l.bias.len())))
        .collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = TrainingTrace::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let images: Vec<&ImageTensor> = chunk.iter().map(|&i| &dataset[i]).collect();
            let batch = sample_batch(&images, sched, &mut rng);
            let (loss, mut grads) = net.loss_and_grad(&batch);
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("loss became {loss}"),
                });
            }
            total += loss * chunk.len() as f64;
            if let Some(max_norm) = config.clip_grad_norm {
                let norm = grads.global_norm();
                if norm > max_norm {
                    let k = max_norm / norm;
                    for (dw, db) in &mut grads.layers {
                        *dw *= k;
                        *db *= k;
                    }
                }
            }
            for ((layer, (vw, vb)), (dw, db)) in net.layers_mut().iter_mut().zip(&mut velocity).zip(&grads.layers) {
                *vw *= config.momentum;
                *vw += dw;
                *vb *= config.momentum;
                *vb += db;
                layer.weight.scaled_add(-config.learning_rate, vw);
                layer.bias.scaled_add(-config.learning_rate, vb);
            }
        }
        let mean = total / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: format!("epoch loss became {mean}"),
            });
        }
        trace.epoch_losses.push(mean);
    }
    Ok((net, trace))
}

/// Mean of per-draw simple losses and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

/// Probes `denoiser` with `draws` random `(t, eps)` pairs per image. Draw `j`
/// of image `i` depends only on `(seed, i, j)`, so two sets probed with the
/// same seed see matched timesteps and noise.
pub fn mean_simple_loss(
    denoiser: &dyn Denoiser,
    images: &[ImageTensor],
    sched: &NoiseSchedule,
    draws: usize,
    seed: u64,
) -> Result<LossSummary> {
    let mut losses = Vec::with_capacity(images.len() * draws);
    for (i, img) in images.iter().enumerate() {
        for j in 0..draws {
            let mut rng = derive_rng(seed, "loss-probe", &format!("{i}:{j}"));
            let t = rng.random_range(0..sched.num_timesteps());
            let eps = img.map(|_| rng.sample(StandardNormal));
            losses.push(simple_loss(denoiser, img, t, &eps, sched)?);
        }
    }
    let n = losses.len();
    if n < 2 {
        return Err(Error::Evaluation("need at least two loss draws".into()));
    }
    let mean = losses.iter().sum::<f64>() / n as f64;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(LossSummary {
        mean,
        std_err: (var / n as f64).sqrt(),
        count: n,
    })
}
