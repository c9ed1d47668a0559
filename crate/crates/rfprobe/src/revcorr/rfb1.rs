//! The `RFB1` filter-bank container and its metadata sidecar.
//!
//! Binary layout, little-endian: magic `RFB1`, version u32 (1), crop
//! (h, w, c) 3×u32, sample count u64, awc-form u8 (0 as-written,
//! 1 standard-stc), AWA as f32 array of h·w·c values, eigenvalue count
//! u32, then per stored filter: eigenvalue f64 + f32 vector. Filters are
//! stored excitatory side first (descending eigenvalue) then suppressive
//! side (ascending); the split and the spectral mean live in the UTF-8
//! `key = value` sidecar next to the file (`<name>.meta.txt`).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{AwaFilter, AwcForm, SubFilterBank};
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

pub const MAGIC: &[u8; 4] = b"RFB1";
pub const VERSION: u32 = 1;

/// Provenance recorded next to every persisted bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankMetadata {
    pub unit_id: String,
    pub seed: u64,
    pub prng: String,
    pub chunk: usize,
    pub n_excitatory: usize,
    pub n_suppressive: usize,
    pub mean_eigenvalue: f64,
}

pub fn sidecar_path(rfb1_path: &Path) -> PathBuf {
    let mut name = rfb1_path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.txt");
    rfb1_path.with_file_name(name)
}

/// Writes the bank and its sidecar.
pub fn write_bank(path: &Path, bank: &SubFilterBank, meta: &BankMetadata) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    let (h, w, c) = bank.crop();
    for dim in [h, w, c] {
        f.write_all(&(dim as u32).to_le_bytes())?;
    }
    f.write_all(&bank.awa.samples.to_le_bytes())?;
    f.write_all(&[match bank.form {
        AwcForm::AsWritten => 0u8,
        AwcForm::StandardStc => 1u8,
    }])?;
    for &v in bank.awa.values.values() {
        f.write_all(&(v as f32).to_le_bytes())?;
    }
    let stored = bank.excitatory.len() + bank.suppressive.len();
    f.write_all(&(stored as u32).to_le_bytes())?;
    for (values, lambda) in bank.excitatory.iter().chain(&bank.suppressive) {
        f.write_all(&lambda.to_le_bytes())?;
        for &v in values.values() {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    drop(f);

    let meta_text = format!(
        "unit = {}\nseed = {}\nprng = {}\nchunk = {}\nn_excitatory = {}\nn_suppressive = {}\nmean_eigenvalue = {:.17e}\nawc_form = {}\nsamples = {}\ncrop = {}x{}x{}\n",
        meta.unit_id,
        meta.seed,
        meta.prng,
        meta.chunk,
        meta.n_excitatory,
        meta.n_suppressive,
        meta.mean_eigenvalue,
        bank.form.name(),
        bank.awa.samples,
        h,
        w,
        c
    );
    std::fs::write(sidecar_path(path), meta_text)?;
    Ok(())
}

/// Reads a bank and its sidecar back.
pub fn read_bank(path: &Path) -> Result<(SubFilterBank, BankMetadata)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Ingestion { path: path.into(), reason: e.to_string() })?
        .read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected RFB1")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported RFB1 version {version}")));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let samples = r.u64()?;
    let form = match r.u8()? {
        0 => AwcForm::AsWritten,
        1 => AwcForm::StandardStc,
        other => return Err(Error::Format(format!("unknown awc-form byte {other}"))),
    };
    let n = h * w * c;
    let awa_values = r.f32_array(n)?;
    let stored = r.u32()? as usize;
    let mut filters = Vec::with_capacity(stored);
    for _ in 0..stored {
        let lambda = r.f64()?;
        let values = r.f32_array(n)?;
        filters.push((ImageTensor::new(h, w, c, values)?, lambda));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last filter",
            bytes.len() - r.pos
        )));
    }

    let meta = read_sidecar(&sidecar_path(path))?;
    if meta.n_excitatory + meta.n_suppressive != stored {
        return Err(Error::Format(format!(
            "sidecar filter split {}+{} != stored count {stored}",
            meta.n_excitatory, meta.n_suppressive
        )));
    }
    let suppressive = filters.split_off(meta.n_excitatory);
    let bank = SubFilterBank {
        awa: AwaFilter { values: ImageTensor::new(h, w, c, awa_values)?, samples },
        excitatory: filters,
        suppressive,
        mean_eigenvalue: meta.mean_eigenvalue,
        form,
    };
    Ok((bank, meta))
}

fn read_sidecar(path: &Path) -> Result<BankMetadata> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingestion { path: path.into(), reason: e.to_string() })?;
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| {
        map.get(k)
            .cloned()
            .ok_or_else(|| Error::Format(format!("sidecar missing key {k:?}")))
    };
    Ok(BankMetadata {
        unit_id: get("unit")?,
        seed: get("seed")?.parse().map_err(|e| Error::Format(format!("seed: {e}")))?,
        prng: get("prng")?,
        chunk: get("chunk")?.parse().map_err(|e| Error::Format(format!("chunk: {e}")))?,
        n_excitatory: get("n_excitatory")?
            .parse()
            .map_err(|e| Error::Format(format!("n_excitatory: {e}")))?,
        n_suppressive: get("n_suppressive")?
            .parse()
            .map_err(|e| Error::Format(format!("n_suppressive: {e}")))?,
        mean_eigenvalue: get("mean_eigenvalue")?
            .parse()
            .map_err(|e| Error::Format(format!("mean_eigenvalue: {e}")))?,
    })
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

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
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
    use crate::stimulus::PRNG_NAME;

    fn tiny_bank() -> SubFilterBank {
        let filt = |vals: Vec<f64>| ImageTensor::new(1, 2, 1, vals).unwrap();
        SubFilterBank {
            awa: AwaFilter { values: filt(vec![0.25, -0.5]), samples: 42 },
            excitatory: vec![(filt(vec![1.0, 0.0]), 2.0)],
            suppressive: vec![(filt(vec![0.0, 1.0]), 0.125)],
            mean_eigenvalue: 1.0625,
            form: AwcForm::StandardStc,
        }
    }

    fn tiny_meta() -> BankMetadata {
        BankMetadata {
            unit_id: "synthetic:energy".into(),
            seed: 7,
            prng: PRNG_NAME.into(),
            chunk: 4096,
            n_excitatory: 1,
            n_suppressive: 1,
            mean_eigenvalue: 1.0625,
        }
    }

    #[test]
    fn bank_roundtrip_preserves_structure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unit.rfb1");
        let bank = tiny_bank();
        write_bank(&path, &bank, &tiny_meta()).unwrap();
        let (back, meta) = read_bank(&path).unwrap();
        assert_eq!(back.awa.values, bank.awa.values);
        assert_eq!(back.awa.samples, 42);
        assert_eq!(back.form, AwcForm::StandardStc);
        assert_eq!(back.excitatory.len(), 1);
        assert_eq!(back.suppressive.len(), 1);
        assert_eq!(back.excitatory[0].1, 2.0);
        assert_eq!(back.suppressive[0].1, 0.125);
        assert_eq!(meta, tiny_meta());
    }

    #[test]
    fn rewriting_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.rfb1");
        let b = dir.path().join("b.rfb1");
        write_bank(&a, &tiny_bank(), &tiny_meta()).unwrap();
        write_bank(&b, &tiny_bank(), &tiny_meta()).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn missing_file_is_an_ingestion_error_naming_the_path() {
        let err = read_bank(Path::new("/nonexistent/unit.rfb1")).unwrap_err();
        match err {
            Error::Ingestion { path, .. } => assert!(path.ends_with("unit.rfb1")),
            other => panic!("unexpected error {other}"),
        }
    }
}
