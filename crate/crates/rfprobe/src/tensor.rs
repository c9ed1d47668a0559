//! The H×W×C image tensor that stimuli, feature maps, and filters share.

use crate::error::{Error, Result};

/// A dense image tensor: `height × width × channels`, row-major,
/// channel-last, f64 values in a dimensionless normalized intensity scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Builds a tensor from raw data. Length must be `h·w·c`, every value finite.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::Shape(format!(
                "invalid tensor shape {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Shape("non-finite value in tensor".into()));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    /// Fills from a per-pixel function of (row, col, channel).
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Flat row-major channel-last view.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    /// Extracts one channel as a plain h×w vector.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels);
        self.data[c..].iter().step_by(self.channels).copied().collect()
    }

    /// Centered crop of `ch×cw` pixels keeping all channels. The crop
    /// origin is `(⌊(H−ch)/2⌋, ⌊(W−cw)/2⌋)`, consistent with the
    /// ⌊n/2⌋ center-probe convention.
    pub fn center_crop(&self, ch: usize, cw: usize) -> Result<ImageTensor> {
        if ch > self.height || cw > self.width {
            return Err(Error::Shape(format!(
                "crop {ch}x{cw} exceeds tensor {}x{}",
                self.height, self.width
            )));
        }
        let oy = (self.height - ch) / 2;
        let ox = (self.width - cw) / 2;
        Ok(ImageTensor::from_fn(ch, cw, self.channels, |y, x, c| {
            self.get(oy + y, ox + x, c)
        }))
    }

    pub fn dot(&self, other: &ImageTensor) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "dot of mismatched tensors {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64).sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
