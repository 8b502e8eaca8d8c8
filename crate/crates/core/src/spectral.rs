//! Centred 2D discrete Fourier analysis and the radial high-frequency filter.
//!
//! Spectra are stored with the zero-frequency term at `(⌊H/2⌋, ⌊W/2⌋)`, so a
//! frequency's distance from the grid centre is directly its radius in
//! frequency-index units. The forward transform is unnormalised and the
//! inverse carries the `1/(H·W)` factor.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Complex coefficients per `(channel, u, v)`, DC-centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    channels: usize,
    height: usize,
    width: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(channels: usize, height: usize, width: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Contract("spectrum dimensions must be positive".into()));
        }
        if coeffs.len() != channels * height * width {
            return Err(Error::Contract(format!(
                "spectrum length {} does not match {channels}x{height}x{width}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("non-finite spectrum coefficient".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            coeffs,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            coeffs: vec![Complex64::new(0.0, 0.0); channels * height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, c: usize, u: usize, v: usize) -> Complex64 {
        self.coeffs[(c * self.height + u) * self.width + v]
    }

    pub fn set(&mut self, c: usize, u: usize, v: usize, z: Complex64) {
        self.coeffs[(c * self.height + u) * self.width + v] = z;
    }

    /// Index of the zero-frequency coefficient within each channel plane.
    pub fn dc_index(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// Sum of `|X|²` over all coefficients.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Sum of `|X|²` over coefficients strictly farther than `radius` from DC.
    pub fn energy_beyond(&self, radius: f64) -> f64 {
        let plane = self.height * self.width;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let k = i % plane;
                radial_distance(k / self.width, k % self.width, self.height, self.width) > radius
            })
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

/// Attenuation factor `s` applied beyond threshold radius `r_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub s: f64,
    pub r_t: f64,
}

impl FilterSpec {
    pub fn new(s: f64, r_t: f64) -> Result<Self> {
        let spec = Self { s, r_t };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::Config(format!("filter s must lie in [0, 1], got {}", self.s)));
        }
        if !(self.r_t >= 0.0 && self.r_t.is_finite()) {
            return Err(Error::Config(format!(
                "filter r_t must be finite and nonnegative, got {}",
                self.r_t
            )));
        }
        Ok(())
    }
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self { s: 0.2, r_t: 5.0 }
    }
}

/// Real `height × width` mask over a DC-centred spectrum plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMask {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl RadialMask {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.width + v]
    }
}

/// Euclidean distance of `(u, v)` from the DC position of an `h × w` centred grid.
pub fn radial_distance(u: usize, v: usize, h: usize, w: usize) -> f64 {
    let du = u as f64 - (h / 2) as f64;
    let dv = v as f64 - (w / 2) as f64;
    du.hypot(dv)
}

/// `s` strictly beyond `r_t`, `1` elsewhere.
pub fn build_mask(filter: &FilterSpec, h: usize, w: usize) -> RadialMask {
    let values = (0..h * w)
        .map(|k| {
            if radial_distance(k / w, k % w, h, w) > filter.r_t {
                filter.s
            } else {
                1.0
            }
        })
        .collect();
    RadialMask {
        height: h,
        width: w,
        values,
    }
}

// Natural FFT index -> centred storage index along one axis of length n.
fn centred(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

fn fft_plane(plane: &mut [Complex64], h: usize, w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in plane.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = plane[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            plane[y * w + x] = col[y];
        }
    }
}

/// Per-channel unnormalised 2D DFT, shifted so DC sits at the grid centre.
pub fn forward_dft(image: &ImageTensor) -> Spectrum {
    let (c, h, w) = image.shape();
    let mut planner = FftPlanner::new();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); c * h * w];
    let mut plane = vec![Complex64::new(0.0, 0.0); h * w];
    for ch in 0..c {
        for (dst, &src) in plane.iter_mut().zip(image.channel(ch)) {
            *dst = Complex64::new(src, 0.0);
        }
        fft_plane(&mut plane, h, w, &mut planner, false);
        let out = &mut coeffs[ch * h * w..(ch + 1) * h * w];
        for u in 0..h {
            for v in 0..w {
                out[centred(u, h) * w + centred(v, w)] = plane[u * w + v];
            }
        }
    }
    Spectrum {
        channels: c,
        height: h,
        width: w,
        coeffs,
    }
}

/// Inverse transform that also returns the largest discarded imaginary
/// magnitude, for callers that want to check the input was Hermitian.
pub fn inverse_dft_with_residue(spec: &Spectrum) -> (ImageTensor, f64) {
    let (c, h, w) = spec.shape();
    let mut planner = FftPlanner::new();
    let norm = 1.0 / (h * w) as f64;
    let mut data = Vec::with_capacity(c * h * w);
    let mut residue = 0.0f64;
    let mut plane = vec![Complex64::new(0.0, 0.0); h * w];
    for ch in 0..c {
        let src = &spec.coeffs[ch * h * w..(ch + 1) * h * w];
        for u in 0..h {
            for v in 0..w {
                plane[u * w + v] = src[centred(u, h) * w + centred(v, w)];
            }
        }
        fft_plane(&mut plane, h, w, &mut planner, true);
        for z in &plane {
            residue = residue.max((z.im * norm).abs());
            data.push(z.re * norm);
        }
    }
    let image = ImageTensor::new(c, h, w, data).expect("inverse of a finite spectrum is finite");
    (image, residue)
}

/// Real part of the inverse transform; the imaginary residue is dropped.
pub fn inverse_dft(spec: &Spectrum) -> ImageTensor {
    inverse_dft_with_residue(spec).0
}

/// `IFFT(FFT(x) ⊙ mask)` per channel.
pub fn apply_filter(image: &ImageTensor, filter: &FilterSpec) -> ImageTensor {
    let mut spec = forward_dft(image);
    let (_, h, w) = spec.shape();
    let mask = build_mask(filter, h, w);
    let plane = h * w;
    for (i, z) in spec.coeffs.iter_mut().enumerate() {
        *z *= mask.values[i % plane];
    }
    inverse_dft(&spec)
}

/// Fraction of spectral energy strictly beyond `boundary_radius`. Zero for an
/// all-zero image.
pub fn high_frequency_content(image: &ImageTensor, boundary_radius: f64) -> f64 {
    let spec = forward_dft(image);
    let total = spec.energy();
    if total == 0.0 {
        return 0.0;
    }
    (spec.energy_beyond(boundary_radius) / total).clamp(0.0, 1.0)
}
