//! Fully-connected noise predictor over flattened pixels plus a sinusoidal
//! timestep embedding, with hand-written backpropagation.
//!
//! Layout: `[pixels ‖ embed(t)] → (Linear → SiLU)* → Linear → pixels`.
//! Weights are stored `in × out`, so a batch forward pass is `A·W + b`.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

use super::Denoiser;

/// Shape of a [`ToyDenoiser`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyArchitecture {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
}

impl Default for ToyArchitecture {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512],
            embed_dim: 32,
        }
    }
}

impl ToyArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || !self.embed_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "timestep embedding dimension must be positive and even, got {}",
                self.embed_dim
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Sinusoidal embedding: `sin(t·ω_i)` for the first half, `cos(t·ω_i)` for the
/// second, with `ω_i = 10000^(−i/(d/2))`.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        let arg = t as f64 * freq;
        out[i] = arg.sin();
        out[half + i] = arg.cos();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub(crate) weight: Array2<f64>,
    pub(crate) bias: Array1<f64>,
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    /// Gradient entries flattened in parameter declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (dw, db) in &self.layers {
            out.extend(dw.iter());
            out.extend(db.iter());
        }
        out
    }

    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(dw, db)| dw.iter().chain(db.iter()).map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// A batch of `(x_t, t, eps)` training triples, one row per sample.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub noisy: Array2<f64>,
    pub timesteps: Vec<usize>,
    pub noise: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDenoiser {
    image_shape: (usize, usize, usize),
    embed_dim: usize,
    num_timesteps: usize,
    pub(crate) layers: Vec<Dense>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

impl ToyDenoiser {
    /// Fresh network with `N(0, 1/fan_in)` weights and zero biases.
    pub fn init<R: Rng + ?Sized>(
        image_shape: (usize, usize, usize),
        arch: &ToyArchitecture,
        num_timesteps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        arch.validate()?;
        let pixels = image_shape.0 * image_shape.1 * image_shape.2;
        if pixels == 0 {
            return Err(Error::Config("image shape must be non-empty".into()));
        }
        let mut sizes = vec![pixels + arch.embed_dim];
        sizes.extend(&arch.hidden);
        sizes.push(pixels);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((w[0], w[1]), || scale * rng.sample::<f64, _>(StandardNormal));
                Dense {
                    weight,
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self {
            image_shape,
            embed_dim: arch.embed_dim,
            num_timesteps,
            layers,
        })
    }

    pub(crate) fn from_parts(
        image_shape: (usize, usize, usize),
        embed_dim: usize,
        num_timesteps: usize,
        layers: Vec<Dense>,
    ) -> Self {
        Self {
            image_shape,
            embed_dim,
            num_timesteps,
            layers,
        }
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.image_shape
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn num_timesteps(&self) -> usize {
        self.num_timesteps
    }

    pub fn pixels(&self) -> usize {
        self.image_shape.0 * self.image_shape.1 * self.image_shape.2
    }

    /// `[input, hidden..., output]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weight.nrows()];
        sizes.extend(self.layers.iter().map(|l| l.weight.ncols()));
        sizes
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All parameters in declaration order: per layer, `W` row-major then `b`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            let nw = l.weight.len();
            if index < nw {
                let cols = l.weight.ncols();
                return &mut l.weight[[index / cols, index % cols]];
            }
            index -= nw;
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, index: usize) -> f64 {
        self.params_flat()[index]
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *self.param_mut(index) = value;
    }

    /// Stacks `[x_t ‖ embed(t)]` rows for a batch.
    pub fn assemble_inputs(&self, noisy: &Array2<f64>, timesteps: &[usize]) -> Array2<f64> {
        let pixels = self.pixels();
        assert_eq!(noisy.ncols(), pixels, "noisy batch width");
        assert_eq!(noisy.nrows(), timesteps.len(), "one timestep per row");
        let mut input = Array2::zeros((noisy.nrows(), pixels + self.embed_dim));
        for (r, &t) in timesteps.iter().enumerate() {
            let mut row = input.row_mut(r);
            row.slice_mut(ndarray::s![..pixels]).assign(&noisy.row(r));
            for (dst, e) in row.slice_mut(ndarray::s![pixels..]).iter_mut().zip(timestep_embedding(t, self.embed_dim)) {
                *dst = e;
            }
        }
        input
    }

    /// Returns pre-activations and activations of every layer. `acts[0]` is
    /// the input; the last entry of `pre` is the network output.
    fn forward_trace(&self, input: Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts = vec![input];
        let mut pres = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = acts[i].dot(&layer.weight) + &layer.bias;
            if i < last {
                acts.push(z.mapv(silu));
            }
            pres.push(z);
        }
        (pres, acts)
    }

    pub fn forward_batch(&self, noisy: &Array2<f64>, timesteps: &[usize]) -> Array2<f64> {
        let input = self.assemble_inputs(noisy, timesteps);
        let (mut pres, _) = self.forward_trace(input);
        pres.pop().expect("at least one layer")
    }

    /// Mean squared noise-prediction error over the batch and its gradient.
    pub fn loss_and_grad(&self, batch: &TrainBatch) -> (f64, Gradients) {
        let input = self.assemble_inputs(&batch.noisy, &batch.timesteps);
        let (pres, acts) = self.forward_trace(input);
        let out = pres.last().expect("at least one layer");
        let diff = out - &batch.noise;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = diff * (2.0 / count);
        for i in (0..self.layers.len()).rev() {
            let dw = acts[i].t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            grads.push((dw, db));
            if i > 0 {
                let mut upstream = delta.dot(&self.layers[i].weight.t());
                Zip::from(&mut upstream).and(&pres[i - 1]).for_each(|g, &z| *g *= silu_grad(z));
                delta = upstream;
            }
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, batch: &TrainBatch) -> f64 {
        let out = self.forward_batch(&batch.noisy, &batch.timesteps);
        let diff = out - &batch.noise;
        diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }
}

impl Denoiser for ToyDenoiser {
    fn predict_noise(&self, x_t: &ImageTensor, t: usize) -> ImageTensor {
        assert_eq!(x_t.shape(), self.image_shape, "input shape differs from the trained shape");
        let noisy = Array2::from_shape_vec((1, self.pixels()), x_t.data().to_vec()).expect("row shape");
        let out = self.forward_batch(&noisy, &[t]);
        x_t.with_data(out.into_raw_vec_and_offset().0)
    }
}
