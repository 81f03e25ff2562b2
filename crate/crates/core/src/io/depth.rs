//! Depth map file formats.
//!
//! - RAW: `"DGBN"`, version `u32`, height `u32`, width `u32` (all
//!   little-endian), then `H*W` row-major `f64` LE values, then `H*W` mask
//!   bytes (`0` or `1`). Lossless.
//! - PFM: single-channel `Pf`, 32-bit floats, bottom row first; a negative
//!   scale field means little-endian. Values are centimetres; non-finite or
//!   negative samples are read as invalid, and invalid pixels are written
//!   as NaN.
//! - PGM: binary `P5`, 8- or 16-bit (big-endian) millimetre integers,
//!   converted to centimetres by dividing by 10. Zero means invalid.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::DepthMap;

use super::{check_pixels, read_file, write_file, Cursor, Format};

pub const RAW_MAGIC: &[u8; 4] = b"DGBN";
pub const RAW_VERSION: u32 = 1;

pub fn encode_raw(map: &DepthMap) -> Vec<u8> {
    let n = map.len();
    let mut out = Vec::with_capacity(16 + 9 * n);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&RAW_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(map.valid_mask().iter().map(|&b| b as u8));
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<DepthMap> {
    let mut cur = Cursor::new(bytes, "RAW depth");
    if cur.take(4)? != RAW_MAGIC {
        return Err(Error::BadMagic("expected DGBN".into()));
    }
    let version = cur.u32_le()?;
    if version != RAW_VERSION {
        return Err(Error::Malformed(format!("unsupported RAW version {version}")));
    }
    let h = cur.u32_le()? as usize;
    let w = cur.u32_le()? as usize;
    let n = check_pixels(h, w)?;
    let values = cur.take(n.checked_mul(8).ok_or_else(|| Error::DimensionOverflow(format!("{h}x{w}")))?)?;
    let values: Vec<f64> = values
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mask = cur
        .take(n)?
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Malformed(format!("mask byte {other}"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    cur.finish()?;
    DepthMap::new(h, w, values, mask)
}

/// Little-endian PFM.
pub fn encode_pfm(map: &DepthMap) -> Vec<u8> {
    let (h, w) = (map.height(), map.width());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for y in (0..h).rev() {
        for x in 0..w {
            let v = if map.is_valid(y, x) { map.get(y, x) as f32 } else { f32::NAN };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let mut cur = Cursor::new(bytes, "PFM");
    let magic = cur.token()?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => return Err(Error::Malformed("three-channel PFM is not a depth map".into())),
        _ => return Err(Error::BadMagic(format!("expected Pf, found {magic:?}"))),
    }
    let w = cur.number()?;
    let h = cur.number()?;
    let scale: f64 = cur
        .token()?
        .parse()
        .map_err(|_| Error::Malformed("PFM scale is not a number".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Malformed("PFM scale must be non-zero".into()));
    }
    cur.single_whitespace()?;
    let n = check_pixels(h, w)?;
    let payload = cur.take(n * 4)?;
    let little = scale < 0.0;
    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    for (i, c) in payload.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = c.try_into().expect("4-byte chunk");
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) } as f64;
        let (row_from_bottom, x) = (i / w, i % w);
        let p = (h - 1 - row_from_bottom) * w + x;
        if v.is_finite() && v >= 0.0 {
            values[p] = v;
            valid[p] = true;
        }
    }
    cur.finish()?;
    DepthMap::new(h, w, values, valid)
}

/// 16-bit PGM of millimetre integers.
pub fn encode_pgm(map: &DepthMap) -> Vec<u8> {
    let (h, w) = (map.height(), map.width());
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for (&v, &ok) in map.values().iter().zip(map.valid_mask()) {
        let mm = if ok { (v * 10.0).round().clamp(0.0, 65535.0) as u16 } else { 0 };
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<DepthMap> {
    let mut cur = Cursor::new(bytes, "PGM");
    let magic = cur.token()?;
    if magic != "P5" {
        return Err(Error::BadMagic(format!("expected P5, found {magic:?}")));
    }
    let w = cur.number()?;
    let h = cur.number()?;
    let maxval = cur.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Malformed(format!("PGM maxval {maxval}")));
    }
    cur.single_whitespace()?;
    let n = check_pixels(h, w)?;
    let wide = maxval > 255;
    let payload = cur.take(if wide { 2 * n } else { n })?;
    let mm: Vec<u16> = if wide {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        payload.iter().map(|&b| b as u16).collect()
    };
    cur.finish()?;
    let values = mm.iter().map(|&v| v as f64 / 10.0).collect();
    let valid = mm.iter().map(|&v| v != 0).collect();
    DepthMap::new(h, w, values, valid)
}

pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let format = Format::from_path(path)?;
    let bytes = read_file(path)?;
    match format {
        Format::Raw => decode_raw(&bytes),
        Format::Pfm => decode_pfm(&bytes),
        Format::Pgm => decode_pgm(&bytes),
        Format::Ppm => Err(Error::UnknownFormat(format!("{} is a colour image", path.display()))),
    }
}

pub fn write_depth(map: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match Format::from_path(path)? {
        Format::Raw => encode_raw(map),
        Format::Pfm => encode_pfm(map),
        Format::Pgm => encode_pgm(map),
        Format::Ppm => return Err(Error::UnknownFormat(format!("{} is a colour image", path.display()))),
    };
    write_file(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DepthMap {
        let valid = vec![true, true, false, true, true, true];
        DepthMap::new(2, 3, vec![0.0, 1.5, f64::NAN, 123.456, 7.25, 1e-3], valid).unwrap()
    }

    #[test]
    fn raw_round_trip_is_bitwise() {
        let m = sample();
        let back = decode_raw(&encode_raw(&m)).unwrap();
        assert_eq!(back.valid_mask(), m.valid_mask());
        for (a, b) in back.values().iter().zip(m.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn raw_errors() {
        let bytes = encode_raw(&sample());
        assert!(matches!(decode_raw(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_raw(&bad), Err(Error::BadMagic(_))));
        let mut huge = bytes.clone();
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_raw(&huge), Err(Error::DimensionOverflow(_))));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(decode_raw(&trailing), Err(Error::Malformed(_))));
    }

    #[test]
    fn pfm_round_trip_and_orientation() {
        let m = sample();
        let back = decode_pfm(&encode_pfm(&m)).unwrap();
        assert_eq!(back.valid_mask(), m.valid_mask());
        for p in 0..6 {
            if m.valid_mask()[p] {
                assert_eq!(back.values()[p], m.values()[p] as f32 as f64);
            }
        }
    }

    #[test]
    fn pfm_big_endian() {
        // 2x1, positive scale => big-endian, bottom row first.
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.5f32.to_be_bytes());
        bytes.extend_from_slice(&9.0f32.to_be_bytes());
        let m = decode_pfm(&bytes).unwrap();
        assert_eq!(m.values(), &[9.0, 3.5]);
    }

    #[test]
    fn pgm_scale_convention() {
        let mut bytes = b"P5\n# depth in mm\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&1234u16.to_be_bytes());
        bytes.extend_from_slice(&0u16.to_be_bytes());
        let m = decode_pgm(&bytes).unwrap();
        assert!((m.get(0, 0) - 123.4).abs() < 1e-12);
        assert!(!m.is_valid(0, 1));
        let again = decode_pgm(&encode_pgm(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn pgm_eight_bit() {
        let bytes = [b"P5 2 1 255\n".as_slice(), &[10, 20]].concat();
        let m = decode_pgm(&bytes).unwrap();
        assert_eq!(m.values(), &[1.0, 2.0]);
    }
}
