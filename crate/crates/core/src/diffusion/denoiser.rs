use crate::image::ImageTensor;

use super::NoiseSchedule;

/// Noise predictor `ε_θ(x_t, t)`. Output has the input's shape.
///
/// Implementations are evaluated read-only from many threads.
pub trait Denoiser: Send + Sync {
    fn predict_noise(&self, x_t: &ImageTensor, t: usize) -> ImageTensor;
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn predict_noise(&self, x_t: &ImageTensor, t: usize) -> ImageTensor {
        (**self).predict_noise(x_t, t)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict_noise(&self, x_t: &ImageTensor, t: usize) -> ImageTensor {
        (**self).predict_noise(x_t, t)
    }
}

/// Predicts zero noise everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict_noise(&self, x_t: &ImageTensor, _t: usize) -> ImageTensor {
        ImageTensor::zeros(x_t.channels(), x_t.height(), x_t.width())
    }
}

/// Returns the same tensor for every input and timestep.
#[derive(Debug, Clone)]
pub struct ConstantDenoiser(pub ImageTensor);

impl Denoiser for ConstantDenoiser {
    fn predict_noise(&self, x_t: &ImageTensor, _t: usize) -> ImageTensor {
        assert!(x_t.same_shape(&self.0), "constant denoiser shape mismatch");
        self.0.clone()
    }
}

/// Wraps a closure as a denoiser.
pub struct FnDenoiser<F>(pub F);

impl<F> Denoiser for FnDenoiser<F>
where
    F: Fn(&ImageTensor, usize) -> ImageTensor + Send + Sync,
{
    fn predict_noise(&self, x_t: &ImageTensor, t: usize) -> ImageTensor {
        (self.0)(x_t, t)
    }
}

/// Ideal memoriser: assumes `x_t` came from the closest stored image and
/// returns exactly the noise that would reproduce it. Its reconstruction
/// error on stored images is zero up to rounding.
#[derive(Debug, Clone)]
pub struct MemorizingDenoiser {
    images: Vec<ImageTensor>,
    schedule: NoiseSchedule,
}

impl MemorizingDenoiser {
    pub fn new(images: Vec<ImageTensor>, schedule: NoiseSchedule) -> Self {
        assert!(!images.is_empty(), "memorizer needs at least one image");
        Self { images, schedule }
    }
}

impl Denoiser for MemorizingDenoiser {
    fn predict_noise(&self, x_t: &ImageTensor, t: usize) -> ImageTensor {
        let ab = self.schedule.alpha_bar_at(t);
        let sa = ab.sqrt();
        let nearest = self
            .images
            .iter()
            .min_by(|a, b| {
                let da = x_t.lin_comb(1.0, a, -sa).l2_norm();
                let db = x_t.lin_comb(1.0, b, -sa).l2_norm();
                da.total_cmp(&db)
            })
            .expect("non-empty");
        x_t.lin_comb(1.0, nearest, -sa).scale(1.0 / (1.0 - ab).sqrt())
    }
}
