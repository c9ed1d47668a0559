//! Forward-only convolutional inference with the center-value response
//! probe, plus the receptive-field size table for conv/pool stacks.

pub mod nnf1;
mod synthetic;

pub use synthetic::{
    gabor, make_synthetic_unit, FnResponder, GaborSpec, NetworkProbe, Responder, SyntheticUnit,
    SyntheticUnitParams,
};

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Parameters of one stride-1 convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    /// Zero-fill padding in pixels on every side.
    pub padding: usize,
    /// Kernel weights in (out, in, kh, kw) row-major order.
    pub kernel: Vec<f64>,
    /// One bias per output channel.
    pub bias: Vec<f64>,
}

impl ConvParams {
    #[inline]
    fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.kernel[((o * self.in_ch + i) * self.kh + ky) * self.kw + kx]
    }
}

/// One layer of a model stack.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(ConvParams),
    Relu,
    /// 2×2 window, stride 2.
    MaxPool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub spec: LayerSpec,
}

/// An immutable, validated forward model: an input shape and an ordered
/// layer stack with unique names. Only stride-1 same-padding convolutions
/// (padding = ⌊k/2⌋, square kernels) and 2×2 max pools are accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    input_shape: (usize, usize, usize),
    layers: Vec<Layer>,
}

impl ModelSpec {
    pub fn new(input_shape: (usize, usize, usize), layers: Vec<Layer>) -> Result<Self> {
        let (h, w, c) = input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Config(format!("model input shape {h}x{w}x{c} has zero dim")));
        }
        let mut channels = c;
        let mut names = std::collections::HashSet::new();
        for layer in &layers {
            if !names.insert(layer.name.clone()) {
                return Err(Error::Config(format!("duplicate layer name {:?}", layer.name)));
            }
            if let LayerSpec::Conv(p) = &layer.spec {
                if p.out_ch == 0 || p.in_ch == 0 || p.kh == 0 || p.kw == 0 {
                    return Err(Error::Config(format!(
                        "layer {:?}: conv kernel dims must be >= 1",
                        layer.name
                    )));
                }
                if p.kh != p.kw {
                    return Err(Error::Config(format!(
                        "layer {:?}: only square kernels are supported",
                        layer.name
                    )));
                }
                if p.padding != p.kh / 2 {
                    return Err(Error::Config(format!(
                        "layer {:?}: padding {} != floor(k/2) = {}",
                        layer.name,
                        p.padding,
                        p.kh / 2
                    )));
                }
                if p.kernel.len() != p.out_ch * p.in_ch * p.kh * p.kw {
                    return Err(Error::Shape(format!(
                        "layer {:?}: kernel length {} != {}x{}x{}x{}",
                        layer.name,
                        p.kernel.len(),
                        p.out_ch,
                        p.in_ch,
                        p.kh,
                        p.kw
                    )));
                }
                if p.bias.len() != p.out_ch {
                    return Err(Error::Shape(format!(
                        "layer {:?}: bias length {} != out_ch {}",
                        layer.name,
                        p.bias.len(),
                        p.out_ch
                    )));
                }
                if p.in_ch != channels {
                    return Err(Error::Config(format!(
                        "layer {:?}: in_ch {} does not chain from previous {} channels",
                        layer.name, p.in_ch, channels
                    )));
                }
                channels = p.out_ch;
            }
        }
        Ok(Self { input_shape, layers })
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::Lookup(format!("unknown layer {name:?}")))
    }

    /// Channel count of the named layer's output.
    pub fn channels_at(&self, name: &str) -> Result<usize> {
        let idx = self.layer_index(name)?;
        let mut channels = self.input_shape.2;
        for layer in &self.layers[..=idx] {
            if let LayerSpec::Conv(p) = &layer.spec {
                channels = p.out_ch;
            }
        }
        Ok(channels)
    }

    /// Runs the stack up to and including the named layer.
    pub fn forward_to(&self, name: &str, input: &ImageTensor) -> Result<ImageTensor> {
        if input.shape() != self.input_shape {
            return Err(Error::Shape(format!(
                "input shape {:?} != model input {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        let idx = self.layer_index(name)?;
        let mut x = input.clone();
        for layer in &self.layers[..=idx] {
            x = match &layer.spec {
                LayerSpec::Conv(p) => conv2d(&x, p)?,
                LayerSpec::Relu => relu(&x),
                LayerSpec::MaxPool => maxpool2(&x)?,
            };
        }
        Ok(x)
    }

    /// Shape descriptors of the stack, for receptive-field accounting.
    pub fn layer_shapes(&self) -> Vec<(String, LayerShape)> {
        self.layers
            .iter()
            .filter_map(|l| match &l.spec {
                LayerSpec::Conv(p) => {
                    Some((l.name.clone(), LayerShape::Conv { kernel: p.kh, out_ch: p.out_ch }))
                }
                LayerSpec::MaxPool => Some((l.name.clone(), LayerShape::MaxPool)),
                LayerSpec::Relu => None,
            })
            .collect()
    }
}

/// Stride-1 cross-correlation with zero padding. Output spatial dims are
/// `H + 2·padding − kH + 1` (equal to the input dims for odd kernels at
/// padding = ⌊k/2⌋). Kernels are applied unflipped.
pub fn conv2d(input: &ImageTensor, p: &ConvParams) -> Result<ImageTensor> {
    if input.channels() != p.in_ch {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            p.in_ch,
            input.channels()
        )));
    }
    let (h, w, _) = input.shape();
    let oh = (h + 2 * p.padding).checked_sub(p.kh - 1).filter(|&v| v > 0).ok_or_else(|| {
        Error::Shape(format!("kernel {}x{} too large for input {h}x{w}", p.kh, p.kw))
    })?;
    let ow = (w + 2 * p.padding).checked_sub(p.kw - 1).filter(|&v| v > 0).ok_or_else(|| {
        Error::Shape(format!("kernel {}x{} too large for input {h}x{w}", p.kh, p.kw))
    })?;
    let mut out = ImageTensor::zeros(oh, ow, p.out_ch);
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..p.out_ch {
                let mut acc = p.bias[o];
                for ky in 0..p.kh {
                    let iy = (oy + ky) as isize - p.padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..p.kw {
                        let ix = (ox + kx) as isize - p.padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        for i in 0..p.in_ch {
                            acc += p.weight(o, i, ky, kx)
                                * input.get(iy as usize, ix as usize, i);
                        }
                    }
                }
                out.set(oy, ox, o, acc);
            }
        }
    }
    Ok(out)
}

/// Elementwise max(0, x).
pub fn relu(x: &ImageTensor) -> ImageTensor {
    let (h, w, c) = x.shape();
    let mut out = x.clone();
    let _ = (h, w, c);
    for v in out.values_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// 2×2 / stride-2 window maximum per channel. Spatial dims must be even.
pub fn maxpool2(x: &ImageTensor) -> Result<ImageTensor> {
    let (h, w, c) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("maxpool needs even spatial dims, got {h}x{w}")));
    }
    Ok(ImageTensor::from_fn(h / 2, w / 2, c, |y, x2, ch| {
        let (y0, x0) = (2 * y, 2 * x2);
        x.get(y0, x0, ch)
            .max(x.get(y0, x0 + 1, ch))
            .max(x.get(y0 + 1, x0, ch))
            .max(x.get(y0 + 1, x0 + 1, ch))
    }))
}

/// Runs `model` forward to `layer_name` and returns the feature-map value
/// of channel `unit_index` at the (⌊H/2⌋, ⌊W/2⌋) center pixel.
pub fn probe_center(
    model: &ModelSpec,
    layer_name: &str,
    unit_index: usize,
    stimulus: &ImageTensor,
) -> Result<f64> {
    let channels = model.channels_at(layer_name)?;
    if unit_index >= channels {
        return Err(Error::Lookup(format!(
            "unit {unit_index} out of range for layer {layer_name:?} with {channels} channels"
        )));
    }
    let fmap = model.forward_to(layer_name, stimulus)?;
    let (h, w, _) = fmap.shape();
    Ok(fmap.get(h / 2, w / 2, unit_index))
}

/// Shape-only layer descriptor for receptive-field accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    Conv { kernel: usize, out_ch: usize },
    MaxPool,
}

/// One row of the receptive-field table: a convolution layer's RF extent
/// in input pixels and its unit (channel) count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfEntry {
    pub name: String,
    pub rf_size: usize,
    pub units: usize,
}

/// Coverage-style receptive-field table of a conv/pool stack.
///
/// The accounting tracks a coverage window `w` in current-grid cells and a
/// grid scale `s`: a convolution widens the window by `kernel − 1` cells
/// and reports `w·s` input pixels; a pooling stage halves the window
/// (rounding up) and doubles the scale, and the convolution that consumes
/// the pooled map reports that pooled coverage, its own kernel extent
/// being absorbed into the coarser cells.
pub fn rf_size_table(shapes: &[(String, LayerShape)]) -> Vec<RfEntry> {
    let mut table = Vec::new();
    let mut window = 1usize;
    let mut scale = 1usize;
    let mut after_pool = false;
    for (name, shape) in shapes {
        match shape {
            LayerShape::Conv { kernel, out_ch } => {
                if after_pool {
                    after_pool = false;
                } else {
                    window += kernel - 1;
                }
                table.push(RfEntry { name: name.clone(), rf_size: window * scale, units: *out_ch });
            }
            LayerShape::MaxPool => {
                window = window.div_ceil(2);
                scale *= 2;
                after_pool = true;
            }
        }
    }
    table
}

/// The 13-convolution / 5-pool layer shape sequence of a VGG16-style stack.
pub fn vgg16_layer_shapes() -> Vec<(String, LayerShape)> {
    let block_convs = [(1usize, 2usize, 64usize), (2, 2, 128), (3, 3, 256), (4, 3, 512), (5, 3, 512)];
    let mut shapes = Vec::new();
    for (block, convs, ch) in block_convs {
        for conv in 1..=convs {
            shapes.push((
                format!("block{block}_conv{conv}"),
                LayerShape::Conv { kernel: 3, out_ch: ch },
            ));
        }
        shapes.push((format!("block{block}_pool"), LayerShape::MaxPool));
    }
    shapes
}
