//! The `NNF1` binary model container.
//!
//! Little-endian layout: magic `NNF1`, version u32 (1; version-1 kernels
//! are cross-correlation weights), input shape 3×u32 (h, w, c), layer
//! count u32, then per layer: kind u8 (0 conv, 1 relu, 2 maxpool), name as
//! u16 length + UTF-8 bytes, conv dims 4×u32 (out, in, kh, kw — zeros for
//! non-conv layers), padding u32, then kernel and bias as f32 arrays in
//! (out, in, kh, kw) row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{ConvParams, Layer, LayerSpec, ModelSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NNF1";
pub const VERSION: u32 = 1;

const KIND_CONV: u8 = 0;
const KIND_RELU: u8 = 1;
const KIND_MAXPOOL: u8 = 2;

pub fn write_model(path: &Path, model: &ModelSpec) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    let (h, w, c) = model.input_shape();
    for dim in [h, w, c] {
        f.write_all(&(dim as u32).to_le_bytes())?;
    }
    f.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for layer in model.layers() {
        let (kind, dims, padding, kernel, bias): (u8, [u32; 4], u32, &[f64], &[f64]) =
            match &layer.spec {
                LayerSpec::Conv(p) => (
                    KIND_CONV,
                    [p.out_ch as u32, p.in_ch as u32, p.kh as u32, p.kw as u32],
                    p.padding as u32,
                    &p.kernel,
                    &p.bias,
                ),
                LayerSpec::Relu => (KIND_RELU, [0; 4], 0, &[], &[]),
                LayerSpec::MaxPool => (KIND_MAXPOOL, [0; 4], 0, &[], &[]),
            };
        f.write_all(&[kind])?;
        let name = layer.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::Format(format!("layer name too long: {}", name.len())));
        }
        f.write_all(&(name.len() as u16).to_le_bytes())?;
        f.write_all(name)?;
        for d in dims {
            f.write_all(&d.to_le_bytes())?;
        }
        f.write_all(&padding.to_le_bytes())?;
        for &v in kernel {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
        for &v in bias {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelSpec> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected NNF1")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported NNF1 version {version}")));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let layer_count = r.u32()? as usize;

    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let kind = r.u8()?;
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|e| Error::Format(format!("layer name not UTF-8: {e}")))?;
        let out_ch = r.u32()? as usize;
        let in_ch = r.u32()? as usize;
        let kh = r.u32()? as usize;
        let kw = r.u32()? as usize;
        let padding = r.u32()? as usize;
        let spec = match kind {
            KIND_CONV => {
                let kernel = r.f32_array(out_ch * in_ch * kh * kw)?;
                let bias = r.f32_array(out_ch)?;
                LayerSpec::Conv(ConvParams { out_ch, in_ch, kh, kw, padding, kernel, bias })
            }
            KIND_RELU => LayerSpec::Relu,
            KIND_MAXPOOL => LayerSpec::MaxPool,
            other => return Err(Error::Format(format!("unknown layer kind {other}"))),
        };
        layers.push(Layer { name, spec });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last layer",
            bytes.len() - r.pos
        )));
    }
    ModelSpec::new((h, w, c), layers)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_array(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model() -> ModelSpec {
        let conv = ConvParams {
            out_ch: 2,
            in_ch: 1,
            kh: 3,
            kw: 3,
            padding: 1,
            kernel: (0..18).map(|i| i as f64 * 0.25 - 2.0).collect(),
            bias: vec![0.5, -0.5],
        };
        ModelSpec::new(
            (8, 8, 1),
            vec![
                Layer { name: "conv1".into(), spec: LayerSpec::Conv(conv) },
                Layer { name: "relu1".into(), spec: LayerSpec::Relu },
                Layer { name: "pool1".into(), spec: LayerSpec::MaxPool },
            ],
        )
        .unwrap()
    }

    #[test]
    fn model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.nnf1");
        let model = small_model();
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.nnf1");
        write_model(&path, &small_model()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.nnf1");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(read_model(&bad).is_err());

        let ok_bytes = std::fs::read(&path).unwrap();
        std::fs::write(&bad, &ok_bytes[..ok_bytes.len() - 3]).unwrap();
        assert!(read_model(&bad).is_err());
    }
}
