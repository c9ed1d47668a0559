//! Minimal binary PNM codec: P5 (graymap) and P6 (pixmap) decode at 8-bit
//! depth, P5 encode for filter export.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A decoded 8-bit raster, row-major, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

/// Reads a binary P5 or P6 file with maxval <= 255.
pub fn read_pnm(path: &Path) -> Result<Raster> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Ingestion { path: path.into(), reason: e.to_string() })?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Ingestion { path: path.into(), reason: e.to_string() })?;
    decode_pnm(&bytes).map_err(|reason| Error::Ingestion { path: path.into(), reason })
}

/// Decodes P5/P6 from a byte buffer. Header tokens may be separated by any
/// whitespace; `#` comments run to end of line.
pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Raster, String> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor).ok_or("missing magic")?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic {other:?} (need binary P5 or P6)")),
    };
    let width: usize = parse_token(bytes, &mut cursor, "width")?;
    let height: usize = parse_token(bytes, &mut cursor, "height")?;
    let maxval: usize = parse_token(bytes, &mut cursor, "maxval")?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} unsupported (8-bit only)"));
    }
    // exactly one whitespace byte separates the header from the raster
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err("malformed header/raster separator".into());
    }
    cursor += 1;
    let need = width * height * channels;
    let raster = bytes
        .get(cursor..cursor + need)
        .ok_or_else(|| format!("raster truncated: need {need} bytes"))?;
    Ok(Raster { height, width, channels, data: raster.to_vec() })
}

fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if *cursor > start {
        Some(String::from_utf8_lossy(&bytes[start..*cursor]).into_owned())
    } else {
        None
    }
}

fn parse_token(bytes: &[u8], cursor: &mut usize, what: &str) -> std::result::Result<usize, String> {
    next_token(bytes, cursor)
        .ok_or_else(|| format!("missing {what}"))?
        .parse()
        .map_err(|e| format!("bad {what}: {e}"))
}

/// Writes an 8-bit binary P5 graymap.
pub fn write_p5(path: &Path, height: usize, width: usize, data: &[u8]) -> Result<()> {
    if data.len() != height * width {
        return Err(Error::Shape(format!(
            "P5 data length {} != {height}x{width}",
            data.len()
        )));
    }
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(data)?;
    Ok(())
}

/// Encodes an 8-bit binary P6 pixmap into a buffer (test/data-prep helper).
pub fn encode_p6(height: usize, width: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), height * width * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// Encodes an 8-bit binary P5 graymap into a buffer.
pub fn encode_p5(height: usize, width: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), height * width);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_roundtrip_through_buffer() {
        let data: Vec<u8> = (0..12).collect();
        let buf = encode_p5(3, 4, &data);
        let r = decode_pnm(&buf).unwrap();
        assert_eq!(r.height, 3);
        assert_eq!(r.width, 4);
        assert_eq!(r.channels, 1);
        assert_eq!(r.data, data);
    }

    #[test]
    fn p6_decode_with_comment() {
        let mut buf = b"P6 # a pixmap\n2 1\n255\n".to_vec();
        buf.extend_from_slice(&[10, 20, 30, 40, 50, 60]);
        let r = decode_pnm(&buf).unwrap();
        assert_eq!((r.height, r.width, r.channels), (1, 2, 3));
        assert_eq!(r.data, vec![10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn rejects_ascii_and_truncated() {
        assert!(decode_pnm(b"P2\n2 2\n255\n0 1 2 3").is_err());
        let buf = encode_p5(2, 2, &[1, 2, 3, 4]);
        assert!(decode_pnm(&buf[..buf.len() - 1]).is_err());
        assert!(decode_pnm(b"P5\n2 2\n65535\n").is_err());
    }
}
