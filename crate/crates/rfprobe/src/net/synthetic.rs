//! Analytically defined ground-truth units (half-rectified linear, energy,
//! suppressed energy) built from unit-norm Gabor filters, and the response
//! probe abstraction shared with real network models.

use std::sync::Arc;

use super::{probe_center, ModelSpec};
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// A deterministic stimulus → scalar response mapping.
pub trait Responder: Sync {
    fn respond(&self, stimulus: &ImageTensor) -> Result<f64>;
}

/// Adapter making any closure a [`Responder`] (test and demo helper).
pub struct FnResponder<F>(pub F);

impl<F> Responder for FnResponder<F>
where
    F: Fn(&ImageTensor) -> f64 + Sync,
{
    fn respond(&self, stimulus: &ImageTensor) -> Result<f64> {
        Ok((self.0)(stimulus))
    }
}

/// Probe of one unit of a forward model: the center value of the named
/// layer's feature map.
#[derive(Debug, Clone)]
pub struct NetworkProbe {
    model: Arc<ModelSpec>,
    layer: String,
    unit: usize,
}

impl NetworkProbe {
    pub fn new(model: Arc<ModelSpec>, layer: impl Into<String>, unit: usize) -> Result<Self> {
        let layer = layer.into();
        let channels = model.channels_at(&layer)?;
        if unit >= channels {
            return Err(Error::Lookup(format!(
                "unit {unit} out of range for layer {layer:?} with {channels} channels"
            )));
        }
        Ok(Self { model, layer, unit })
    }

    pub fn layer(&self) -> &str {
        &self.layer
    }

    pub fn unit(&self) -> usize {
        self.unit
    }
}

impl Responder for NetworkProbe {
    fn respond(&self, stimulus: &ImageTensor) -> Result<f64> {
        probe_center(&self.model, &self.layer, self.unit, stimulus)
    }
}

/// Parameters of one Gabor filter: cosine carrier under an isotropic
/// Gaussian envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborSpec {
    /// Envelope center as (row, col), in pixels.
    pub center: (f64, f64),
    pub orientation_deg: f64,
    /// Carrier frequency in cycles per image width.
    pub spatial_freq_cpi: f64,
    pub phase_deg: f64,
    /// Envelope standard deviation in pixels, > 0.
    pub sigma: f64,
}

impl GaborSpec {
    /// Centered defaults for a given stimulus size: carrier at 3.5 c/i,
    /// envelope σ = 3·w/16 so it spans a bit over two carrier cycles.
    pub fn centered(height: usize, width: usize, orientation_deg: f64) -> Self {
        Self {
            center: ((height / 2) as f64, (width / 2) as f64),
            orientation_deg,
            spatial_freq_cpi: 3.5,
            phase_deg: 0.0,
            sigma: 3.0 * width as f64 / 16.0,
        }
    }

    pub fn with_phase(self, phase_deg: f64) -> Self {
        Self { phase_deg: phase_deg.rem_euclid(360.0), ..self }
    }
}

/// Renders a unit-Euclidean-norm Gabor filter. All channels are equal
/// (achromatic) before normalization.
pub fn gabor(shape: (usize, usize, usize), spec: &GaborSpec) -> Result<ImageTensor> {
    if !(spec.sigma > 0.0) {
        return Err(Error::Config(format!("gabor sigma {} must be > 0", spec.sigma)));
    }
    let (h, w, c) = shape;
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::Config("gabor shape must be nonzero".into()));
    }
    let theta = spec.orientation_deg.to_radians();
    let phase = spec.phase_deg.to_radians();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let k = 2.0 * std::f64::consts::PI * spec.spatial_freq_cpi / w as f64;
    let inv_two_sigma2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let mut filt = ImageTensor::from_fn(h, w, c, |y, x, _| {
        let dy = y as f64 - spec.center.0;
        let dx = x as f64 - spec.center.1;
        let carrier = (k * (dx * cos_t + dy * sin_t) + phase).cos();
        let envelope = (-(dx * dx + dy * dy) * inv_two_sigma2).exp();
        carrier * envelope
    });
    let norm = filt.norm();
    if norm == 0.0 {
        return Err(Error::Config("gabor collapsed to zero norm".into()));
    }
    filt.scale(1.0 / norm);
    Ok(filt)
}

/// Kind and parameters of a synthetic ground-truth unit.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticUnitParams {
    /// R = max(0, k·s)
    LinearHalfRect { gabor: GaborSpec },
    /// R = (k₁·s)² + (k₂·s)² with k₂ the 90°-phase-shifted quadrature partner.
    Energy { gabor: GaborSpec },
    /// R = max(0, E_k − gain·E_q), both energies from quadrature pairs.
    SuppressedEnergy { gabor: GaborSpec, suppressor: GaborSpec, gain: f64 },
}

/// A materialized synthetic unit with its unit-norm filters.
#[derive(Debug, Clone)]
pub struct SyntheticUnit {
    params: SyntheticUnitParams,
    shape: (usize, usize, usize),
    excitatory: Vec<ImageTensor>,
    suppressive: Vec<ImageTensor>,
    gain: f64,
}

impl SyntheticUnit {
    pub fn kind_name(&self) -> &'static str {
        match self.params {
            SyntheticUnitParams::LinearHalfRect { .. } => "linear_halfrect",
            SyntheticUnitParams::Energy { .. } => "energy",
            SyntheticUnitParams::SuppressedEnergy { .. } => "suppressed_energy",
        }
    }

    pub fn params(&self) -> &SyntheticUnitParams {
        &self.params
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    /// The excitatory filters: `[k]` or the quadrature pair `[k₁, k₂]`.
    pub fn excitatory_filters(&self) -> &[ImageTensor] {
        &self.excitatory
    }

    /// The suppressive quadrature pair `[q₁, q₂]` (empty otherwise).
    pub fn suppressive_filters(&self) -> &[ImageTensor] {
        &self.suppressive
    }
}

impl Responder for SyntheticUnit {
    fn respond(&self, stimulus: &ImageTensor) -> Result<f64> {
        if stimulus.shape() != self.shape {
            return Err(Error::Shape(format!(
                "stimulus shape {:?} != unit shape {:?}",
                stimulus.shape(),
                self.shape
            )));
        }
        match self.params {
            SyntheticUnitParams::LinearHalfRect { .. } => {
                Ok(self.excitatory[0].dot(stimulus)?.max(0.0))
            }
            SyntheticUnitParams::Energy { .. } => {
                let a = self.excitatory[0].dot(stimulus)?;
                let b = self.excitatory[1].dot(stimulus)?;
                Ok(a * a + b * b)
            }
            SyntheticUnitParams::SuppressedEnergy { .. } => {
                let a = self.excitatory[0].dot(stimulus)?;
                let b = self.excitatory[1].dot(stimulus)?;
                let c = self.suppressive[0].dot(stimulus)?;
                let d = self.suppressive[1].dot(stimulus)?;
                Ok((a * a + b * b - self.gain * (c * c + d * d)).max(0.0))
            }
        }
    }
}

/// Builds a synthetic unit at the given stimulus shape. Energy-family
/// units materialize quadrature pairs (carrier phases 90° apart).
pub fn make_synthetic_unit(
    params: &SyntheticUnitParams,
    shape: (usize, usize, usize),
) -> Result<SyntheticUnit> {
    let (excitatory, suppressive, gain) = match params {
        SyntheticUnitParams::LinearHalfRect { gabor: g } => {
            (vec![gabor(shape, g)?], Vec::new(), 0.0)
        }
        SyntheticUnitParams::Energy { gabor: g } => (
            vec![gabor(shape, g)?, gabor(shape, &g.with_phase(g.phase_deg + 90.0))?],
            Vec::new(),
            0.0,
        ),
        SyntheticUnitParams::SuppressedEnergy { gabor: g, suppressor: q, gain } => {
            if *gain < 0.0 {
                return Err(Error::Config(format!("suppression gain {gain} must be >= 0")));
            }
            (
                vec![gabor(shape, g)?, gabor(shape, &g.with_phase(g.phase_deg + 90.0))?],
                vec![gabor(shape, q)?, gabor(shape, &q.with_phase(q.phase_deg + 90.0))?],
                *gain,
            )
        }
    };
    Ok(SyntheticUnit { params: params.clone(), shape, excitatory, suppressive, gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::{gen_grating, GratingParams};
    use approx::assert_abs_diff_eq;

    const SHAPE: (usize, usize, usize) = (16, 16, 1);

    fn base_gabor() -> GaborSpec {
        GaborSpec::centered(16, 16, 0.0)
    }

    #[test]
    fn gabor_is_unit_norm() {
        let g = gabor(SHAPE, &base_gabor()).unwrap();
        assert_abs_diff_eq!(g.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gabor_with_huge_envelope_is_a_pure_grating() {
        let spec = GaborSpec { sigma: 1e9, ..base_gabor() };
        let g = gabor(SHAPE, &spec).unwrap();
        // cos carrier with phase 0 == sin grating with phase 90
        let p = GratingParams {
            orientation_deg: 0.0,
            spatial_freq_cpi: spec.spatial_freq_cpi,
            phase_deg: 90.0,
            amplitude: 1.0,
            mean_level: 0.0,
        };
        let mut grate = gen_grating(&p, 16, 16, 1).unwrap();
        let norm = grate.norm();
        grate.scale(1.0 / norm);
        for (a, b) in g.values().iter().zip(grate.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn antiphase_gabors_are_negatives() {
        let g0 = gabor(SHAPE, &base_gabor()).unwrap();
        let g180 = gabor(SHAPE, &base_gabor().with_phase(180.0)).unwrap();
        for (a, b) in g0.values().iter().zip(g180.values()) {
            assert_abs_diff_eq!(*a, -b, epsilon = 1e-12);
        }
    }

    #[test]
    fn quadrature_pair_is_nearly_orthogonal() {
        let g0 = gabor(SHAPE, &base_gabor()).unwrap();
        let g90 = gabor(SHAPE, &base_gabor().with_phase(90.0)).unwrap();
        assert!(g0.dot(&g90).unwrap().abs() <= 0.05);
    }

    #[test]
    fn halfrect_unit_rectifies() {
        let unit =
            make_synthetic_unit(&SyntheticUnitParams::LinearHalfRect { gabor: base_gabor() }, SHAPE)
                .unwrap();
        let k = unit.excitatory_filters()[0].clone();
        assert_abs_diff_eq!(unit.respond(&k).unwrap(), 1.0, epsilon = 1e-12);
        let mut neg = k.clone();
        neg.scale(-1.0);
        assert_eq!(unit.respond(&neg).unwrap(), 0.0);
    }

    #[test]
    fn energy_unit_is_phase_invariant_on_its_preferred_grating() {
        let unit = make_synthetic_unit(&SyntheticUnitParams::Energy { gabor: base_gabor() }, SHAPE)
            .unwrap();
        let mut responses = Vec::new();
        for phase in [0.0, 90.0, 180.0, 270.0] {
            let p = GratingParams {
                orientation_deg: 0.0,
                spatial_freq_cpi: 3.5,
                phase_deg: phase,
                amplitude: 1.0,
                mean_level: 0.0,
            };
            let g = gen_grating(&p, 16, 16, 1).unwrap();
            responses.push(unit.respond(&g).unwrap());
        }
        let max = responses.iter().cloned().fold(f64::MIN, f64::max);
        let min = responses.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            (max - min) / max < 0.05,
            "phase responses vary too much: {responses:?}"
        );
    }

    #[test]
    fn zero_gain_suppression_degenerates_to_energy() {
        let params = SyntheticUnitParams::SuppressedEnergy {
            gabor: base_gabor(),
            suppressor: GaborSpec::centered(16, 16, 90.0),
            gain: 0.0,
        };
        let sup = make_synthetic_unit(&params, SHAPE).unwrap();
        let en = make_synthetic_unit(&SyntheticUnitParams::Energy { gabor: base_gabor() }, SHAPE)
            .unwrap();
        let stim = gen_grating(
            &GratingParams {
                orientation_deg: 40.0,
                spatial_freq_cpi: 3.5,
                phase_deg: 10.0,
                amplitude: 1.0,
                mean_level: 0.0,
            },
            16,
            16,
            1,
        )
        .unwrap();
        assert_abs_diff_eq!(
            sup.respond(&stim).unwrap(),
            en.respond(&stim).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn unit_rejects_wrong_shape() {
        let unit =
            make_synthetic_unit(&SyntheticUnitParams::LinearHalfRect { gabor: base_gabor() }, SHAPE)
                .unwrap();
        assert!(unit.respond(&ImageTensor::zeros(8, 8, 1)).is_err());
    }
}
