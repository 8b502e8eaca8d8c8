use crate::error::{Error, Result};

/// Real-valued `channels × height × width` sample grid stored channel-major,
/// then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Contract(format!(
                "image dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Contract(format!(
                "image data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite pixel at flat index {pos}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty image shape");
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Builds an image by evaluating `f(c, y, x)` at every position.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty image shape");
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    /// One channel as a row-major `height × width` slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &ImageTensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "{what}: shape {:?} does not match {:?}",
                other.shape(),
                self.shape()
            )))
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageTensor {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// `a·self + b·other`, elementwise. Panics on shape mismatch.
    pub fn lin_comb(&self, a: f64, other: &ImageTensor, b: f64) -> ImageTensor {
        assert!(self.same_shape(other), "lin_comb on mismatched shapes");
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn sub(&self, other: &ImageTensor) -> ImageTensor {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &ImageTensor) -> ImageTensor {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn scale(&self, k: f64) -> ImageTensor {
        self.map(|v| k * v)
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ImageTensor) -> f64 {
        assert!(self.same_shape(other), "max_abs_diff on mismatched shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same shape, new contents. The caller guarantees the length.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> ImageTensor {
        debug_assert_eq!(data.len(), self.data.len());
        ImageTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_non_finite() {
        assert!(ImageTensor::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(ImageTensor::new(1, 1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(ImageTensor::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn indexing_is_channel_major() {
        let img = ImageTensor::from_fn(2, 2, 3, |c, y, x| (100 * c + 10 * y + x) as f64);
        assert_eq!(img.get(1, 1, 2), 112.0);
        assert_eq!(img.channel(1)[5], 112.0);
        assert_eq!(img.data()[6], 100.0);
    }

    #[test]
    fn norms() {
        let img = ImageTensor::new(1, 1, 2, vec![3.0, -4.0]).unwrap();
        assert_eq!(img.l1_norm(), 7.0);
        assert_eq!(img.l2_norm(), 5.0);
    }
}
