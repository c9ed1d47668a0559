//! Categorized natural-image ingestion for the category-selectivity
//! protocol: manifest parsing, raster decoding, nearest-neighbor resize,
//! and per-image z-score normalization.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::pnm;
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// A labeled image set: every category non-empty, all images sharing one
/// shape and channel count.
#[derive(Debug, Clone)]
pub struct CategoryImageSet {
    categories: Vec<(String, Vec<ImageTensor>)>,
}

impl CategoryImageSet {
    /// Validates the set invariants and builds it.
    pub fn new(categories: Vec<(String, Vec<ImageTensor>)>) -> Result<Self> {
        if categories.len() < 2 {
            return Err(Error::Config(format!(
                "need >= 2 categories, got {}",
                categories.len()
            )));
        }
        let mut shape = None;
        for (label, images) in &categories {
            if images.is_empty() {
                return Err(Error::Config(format!("category {label:?} is empty")));
            }
            for img in images {
                match shape {
                    None => shape = Some(img.shape()),
                    Some(s) if s != img.shape() => {
                        return Err(Error::Shape(format!(
                            "category {label:?} image shape {:?} != {s:?}",
                            img.shape()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { categories })
    }

    pub fn categories(&self) -> &[(String, Vec<ImageTensor>)] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.categories[0].1[0].shape()
    }
}

/// Loads a manifest of `label<TAB>path` lines (UTF-8, `#` comments and
/// blank lines ignored; paths resolved relative to the manifest file),
/// decodes each raster, resizes by nearest neighbor to `target` (height,
/// width), and rescales each image to zero mean / unit standard deviation.
pub fn load_image_set(manifest_path: &Path, target: (usize, usize)) -> Result<CategoryImageSet> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::Ingestion {
        path: manifest_path.into(),
        reason: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    // insertion-ordered labels, stable image order within a label
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<ImageTensor>> = BTreeMap::new();
    let mut channels: Option<usize> = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, rel) = line.split_once('\t').ok_or_else(|| Error::Ingestion {
            path: manifest_path.into(),
            reason: format!("line {}: expected `label<TAB>path`", lineno + 1),
        })?;
        let path: PathBuf = base.join(rel.trim());
        let raster = pnm::read_pnm(&path)?;
        match channels {
            None => channels = Some(raster.channels),
            Some(c) if c != raster.channels => {
                return Err(Error::Ingestion {
                    path,
                    reason: format!("channel count {} != {c} of earlier images", raster.channels),
                })
            }
            _ => {}
        }
        let img = normalize(resize_nearest(&raster, target.0, target.1))
            .map_err(|reason| Error::Ingestion { path, reason })?;
        if !groups.contains_key(label) {
            order.push(label.to_string());
        }
        groups.entry(label.to_string()).or_default().push(img);
    }

    let categories: Vec<_> = order
        .into_iter()
        .map(|label| {
            let images = groups.remove(&label).unwrap();
            (label, images)
        })
        .collect();
    CategoryImageSet::new(categories).map_err(|e| match e {
        Error::Config(reason) => Error::Ingestion { path: manifest_path.into(), reason },
        other => other,
    })
}

fn resize_nearest(raster: &pnm::Raster, th: usize, tw: usize) -> ImageTensor {
    ImageTensor::from_fn(th, tw, raster.channels, |y, x, c| {
        let sy = y * raster.height / th;
        let sx = x * raster.width / tw;
        raster.data[(sy * raster.width + sx) * raster.channels + c] as f64
    })
}

fn normalize(mut img: ImageTensor) -> std::result::Result<ImageTensor, String> {
    let mean = img.mean();
    let std = img.std();
    if std == 0.0 {
        return Err("constant-valued image: zero variance prevents normalization".into());
    }
    for v in img.values_mut() {
        *v = (*v - mean) / std;
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_gradient_pgm(dir: &Path, name: &str, w: usize, h: usize) -> PathBuf {
        let data: Vec<u8> = (0..w * h).map(|i| (i % 256) as u8).collect();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(&pnm::encode_p5(h, w, &data)).unwrap();
        path
    }

    fn write_manifest(dir: &Path, lines: &[String]) -> PathBuf {
        let path = dir.join("manifest.tsv");
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn loads_categories_with_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = vec!["# test manifest".to_string()];
        for cat in ["face", "car", "cup", "bonsai", "rooster"] {
            for i in 0..8 {
                let name = format!("{cat}_{i}.pgm");
                write_gradient_pgm(dir.path(), &name, 10 + i, 12);
                lines.push(format!("{cat}\t{name}"));
            }
        }
        let manifest = write_manifest(dir.path(), &lines);
        let set = load_image_set(&manifest, (8, 8)).unwrap();
        assert_eq!(set.len(), 5);
        for (_, images) in set.categories() {
            assert_eq!(images.len(), 8);
            for img in images {
                assert_eq!(img.shape(), (8, 8, 1));
                assert!(img.mean().abs() <= 1e-6);
                assert!((img.std() - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn empty_manifest_is_an_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_manifest(dir.path(), &["# nothing here".to_string()]);
        let err = load_image_set(&manifest, (8, 8)).unwrap_err();
        assert!(matches!(err, Error::Ingestion { .. }), "{err}");
    }

    #[test]
    fn constant_image_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let flat = dir.path().join("flat.pgm");
        std::fs::write(&flat, pnm::encode_p5(4, 4, &[128u8; 16])).unwrap();
        write_gradient_pgm(dir.path(), "ok.pgm", 4, 4);
        let manifest = write_manifest(
            dir.path(),
            &["a\tok.pgm".to_string(), "b\tflat.pgm".to_string()],
        );
        let err = load_image_set(&manifest, (4, 4)).unwrap_err();
        match err {
            Error::Ingestion { path, reason } => {
                assert!(path.ends_with("flat.pgm"));
                assert!(reason.contains("zero variance"), "{reason}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_manifest(dir.path(), &["a\tnope.pgm".to_string()]);
        let err = load_image_set(&manifest, (4, 4)).unwrap_err();
        match err {
            Error::Ingestion { path, .. } => assert!(path.ends_with("nope.pgm")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn mixed_channel_counts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_gradient_pgm(dir.path(), "gray.pgm", 4, 4);
        let rgb: Vec<u8> = (0..48).map(|i| (i * 5 % 256) as u8).collect();
        std::fs::write(dir.path().join("color.ppm"), pnm::encode_p6(4, 4, &rgb)).unwrap();
        let manifest = write_manifest(
            dir.path(),
            &["a\tgray.pgm".to_string(), "b\tcolor.ppm".to_string()],
        );
        let err = load_image_set(&manifest, (4, 4)).unwrap_err();
        assert!(matches!(err, Error::Ingestion { .. }), "{err}");
    }
}
