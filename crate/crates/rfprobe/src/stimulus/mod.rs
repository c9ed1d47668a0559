//! Stimulus generation and ingestion: Gaussian white-noise streams, the
//! Cartesian grating battery, and categorized natural-image sets, all in
//! the shared [`ImageTensor`] format.

mod image_set;
pub mod pnm;

pub use image_set::{load_image_set, CategoryImageSet};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Identity of the noise generator, recorded in every output metadata file.
///
/// Stimulus `i` of a stream is drawn from ChaCha12 keyed by
/// `seed_from_u64(seed)` with the 64-bit stream index set to `i`, mapped
/// through the ziggurat standard-normal sampler. The stream is therefore a
/// pure function of `(seed, i)` and independent of chunking or thread count.
pub const PRNG_NAME: &str = "chacha12(seed_from_u64,stream=sample-index)+ziggurat-normal";

/// Specification of a reproducible Gaussian white-noise stimulus stream.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub seed: u64,
    pub count: usize,
    /// (height, width, channels)
    pub shape: (usize, usize, usize),
    pub mean: f64,
    pub std: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let (h, w, c) = self.shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Config(format!("noise shape {h}x{w}x{c} has a zero dimension")));
        }
        if self.count == 0 {
            return Err(Error::Config("noise count must be >= 1".into()));
        }
        if !(self.std > 0.0) {
            return Err(Error::Config(format!("noise std {} must be > 0", self.std)));
        }
        Ok(())
    }

    /// Generates stimulus `index` of the stream directly.
    ///
    /// This is the primitive behind both sequential and chunked consumption:
    /// any partition of `0..count` reproduces the same tensors.
    pub fn sample(&self, index: u64) -> ImageTensor {
        let (h, w, c) = self.shape;
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let n = h * w * c;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(self.mean + self.std * z);
        }
        ImageTensor::new(h, w, c, data).expect("noise tensor shape is validated")
    }
}

/// Iterator over the `spec.count` stimuli of a white-noise stream.
pub struct NoiseStream {
    spec: NoiseSpec,
    next: u64,
}

impl Iterator for NoiseStream {
    type Item = ImageTensor;

    fn next(&mut self) -> Option<ImageTensor> {
        if self.next >= self.spec.count as u64 {
            return None;
        }
        let t = self.spec.sample(self.next);
        self.next += 1;
        Some(t)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.count - self.next as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for NoiseStream {}

/// Opens the stream described by `spec`. Equal specs yield bit-identical
/// streams.
pub fn gen_white_noise(spec: &NoiseSpec) -> Result<NoiseStream> {
    spec.validate()?;
    Ok(NoiseStream { spec: spec.clone(), next: 0 })
}

/// Parameters of one Cartesian sinusoidal grating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingParams {
    /// Degrees in [0, 180); gratings are 180°-periodic in orientation.
    pub orientation_deg: f64,
    /// Cycles per image width, > 0.
    pub spatial_freq_cpi: f64,
    /// Degrees in [0, 360).
    pub phase_deg: f64,
    pub amplitude: f64,
    pub mean_level: f64,
}

impl GratingParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..180.0).contains(&self.orientation_deg) {
            return Err(Error::Config(format!(
                "orientation {} out of [0, 180)",
                self.orientation_deg
            )));
        }
        if !(self.spatial_freq_cpi > 0.0) {
            return Err(Error::Config("spatial frequency must be > 0".into()));
        }
        if !(0.0..360.0).contains(&self.phase_deg) {
            return Err(Error::Config(format!("phase {} out of [0, 360)", self.phase_deg)));
        }
        if self.amplitude < 0.0 {
            return Err(Error::Config("amplitude must be >= 0".into()));
        }
        Ok(())
    }
}

/// Renders a grating: every channel of pixel (x, y) holds
/// `mean + A·sin(2π·f·(x̃·cosθ + ỹ·sinθ)/width + phase)`, with (x̃, ỹ)
/// measured from the ⌊n/2⌋ center pixel so phase is center-referenced.
pub fn gen_grating(
    p: &GratingParams,
    height: usize,
    width: usize,
    channels: usize,
) -> Result<ImageTensor> {
    p.validate()?;
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::Config("grating dimensions must be nonzero".into()));
    }
    let theta = p.orientation_deg.to_radians();
    let phase = p.phase_deg.to_radians();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let cy = (height / 2) as f64;
    let cx = (width / 2) as f64;
    let k = 2.0 * std::f64::consts::PI * p.spatial_freq_cpi / width as f64;
    Ok(ImageTensor::from_fn(height, width, channels, |y, x, _| {
        let xr = x as f64 - cx;
        let yr = y as f64 - cy;
        p.mean_level + p.amplitude * (k * (xr * cos_t + yr * sin_t) + phase).sin()
    }))
}

/// The 17 battery orientations: 0°–170° in 10° steps.
pub fn battery_orientations() -> Vec<f64> {
    (0..17).map(|i| 10.0 * i as f64).collect()
}

/// The 6 battery spatial frequencies: log-spaced from 1.75 to 56.0
/// cycles/image inclusive (ratio 2 between neighbors).
pub fn battery_frequencies() -> Vec<f64> {
    (0..6).map(|j| 1.75 * f64::powi(2.0, j)).collect()
}

/// The 4 battery phases: 0°, 90°, 180°, 270°.
pub fn battery_phases() -> Vec<f64> {
    vec![0.0, 90.0, 180.0, 270.0]
}

/// Generates the full grating battery: 17 orientations × 6 spatial
/// frequencies × 4 phases = 408 stimuli, in (orientation, frequency, phase)
/// lexicographic order.
pub fn grating_battery(
    height: usize,
    width: usize,
    channels: usize,
    amplitude: f64,
    mean_level: f64,
) -> Result<Vec<(GratingParams, ImageTensor)>> {
    let mut out = Vec::with_capacity(17 * 6 * 4);
    for ori in battery_orientations() {
        for freq in battery_frequencies() {
            for phase in battery_phases() {
                let p = GratingParams {
                    orientation_deg: ori,
                    spatial_freq_cpi: freq,
                    phase_deg: phase,
                    amplitude,
                    mean_level,
                };
                let img = gen_grating(&p, height, width, channels)?;
                out.push((p, img));
            }
        }
    }
    Ok(out)
}
