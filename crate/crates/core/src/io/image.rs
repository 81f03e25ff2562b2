//! Colour images (binary PPM) and error heatmaps.

use std::path::Path;

use crate::error::{check_shape, Error, Result};
use crate::types::{DepthMap, FeatureMap};

use super::{check_pixels, read_file, write_file, Cursor};

/// Interleaved 8-bit RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Rgb8Image {
    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Planar `3×H×W` features scaled to `[0, 1]`.
    pub fn to_features(&self) -> FeatureMap {
        let plane = self.height * self.width;
        let mut out = vec![0.0; 3 * plane];
        for p in 0..plane {
            for c in 0..3 {
                out[c * plane + p] = self.data[3 * p + c] as f64 / 255.0;
            }
        }
        FeatureMap::new(3, self.height, self.width, out).expect("finite bytes")
    }
}

pub fn encode_ppm(img: &Rgb8Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Binary PPM with 8- or 16-bit samples, scaled to `[0, 1]`.
pub fn decode_ppm(bytes: &[u8]) -> Result<FeatureMap> {
    let mut cur = Cursor::new(bytes, "PPM");
    let magic = cur.token()?;
    if magic != "P6" {
        return Err(Error::BadMagic(format!("expected P6, found {magic:?}")));
    }
    let w = cur.number()?;
    let h = cur.number()?;
    let maxval = cur.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Malformed(format!("PPM maxval {maxval}")));
    }
    cur.single_whitespace()?;
    let plane = check_pixels(h, w)?;
    let wide = maxval > 255;
    let payload = cur.take(if wide { 6 * plane } else { 3 * plane })?;
    cur.finish()?;
    let sample = |i: usize| -> f64 {
        if wide {
            u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as f64
        } else {
            payload[i] as f64
        }
    };
    let mut out = vec![0.0; 3 * plane];
    for p in 0..plane {
        for c in 0..3 {
            out[c * plane + p] = (sample(3 * p + c) / maxval as f64).min(1.0);
        }
    }
    FeatureMap::new(3, h, w, out)
}

pub fn read_color(path: impl AsRef<Path>) -> Result<FeatureMap> {
    decode_ppm(&read_file(path.as_ref())?)
}

/// Writes a 3-channel feature map in `[0, 1]` as an 8-bit PPM.
pub fn write_color(color: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    if color.channels() != 3 {
        return Err(Error::InvalidParam(format!("colour image has {} channels, expected 3", color.channels())));
    }
    let plane = color.plane_len();
    let mut data = Vec::with_capacity(3 * plane);
    for p in 0..plane {
        for c in 0..3 {
            data.push((color.data()[c * plane + p].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    let img = Rgb8Image { height: color.height(), width: color.width(), data };
    write_file(path.as_ref(), &encode_ppm(&img))
}

/// Entry `i` of the 256-step blue-to-red ramp.
pub fn colormap(i: u8) -> [u8; 3] {
    [i, 0, 255 - i]
}

/// Per-pixel `|pred - gt|` coloured on [`colormap`], normalised by the 99th
/// percentile (nearest rank) of errors over jointly valid pixels. Errors at
/// or above the percentile saturate to the top colour; pixels invalid in
/// either map are black.
pub fn error_heatmap(pred: &DepthMap, gt: &DepthMap) -> Result<Rgb8Image> {
    check_shape(gt.shape(), pred.shape())?;
    let errors: Vec<Option<f64>> = (0..pred.len())
        .map(|p| (pred.valid_mask()[p] && gt.valid_mask()[p]).then(|| (pred.values()[p] - gt.values()[p]).abs()))
        .collect();
    let mut sorted: Vec<f64> = errors.iter().flatten().copied().collect();
    if sorted.is_empty() {
        return Err(Error::NoValidPixels);
    }
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let p99 = sorted[rank - 1];
    let mut data = Vec::with_capacity(3 * errors.len());
    for e in errors {
        let rgb = match e {
            None => [0, 0, 0],
            Some(e) => {
                let t = if e == 0.0 {
                    0.0
                } else if p99 > 0.0 {
                    (e / p99).min(1.0)
                } else {
                    1.0
                };
                colormap((t * 255.0).round() as u8)
            }
        };
        data.extend_from_slice(&rgb);
    }
    Ok(Rgb8Image { height: pred.height(), width: pred.width(), data })
}

pub fn write_error_heatmap(pred: &DepthMap, gt: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_ppm(&error_heatmap(pred, gt)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let img = Rgb8Image { height: 2, width: 2, data: (0..12).map(|v| v * 20).collect() };
        let f = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(f.get(0, 0, 0), 0.0);
        assert_eq!(f.get(1, 0, 0), 20.0 / 255.0);
        assert_eq!(f.get(2, 1, 1), 220.0 / 255.0);
    }

    #[test]
    fn ppm_sixteen_bit() {
        let mut bytes = b"P6 1 1 65535\n".to_vec();
        for v in [0u16, 32768, 65535] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let f = decode_ppm(&bytes).unwrap();
        assert_eq!(f.data(), &[0.0, 32768.0 / 65535.0, 1.0]);
    }

    #[test]
    fn heatmap_extremes() {
        let gt = DepthMap::filled(10, 10, 5.0).unwrap();
        let mut v = vec![5.0; 100];
        v[37] = 9.0;
        let pred = DepthMap::from_values(10, 10, v).unwrap();
        let img = error_heatmap(&pred, &gt).unwrap();
        assert_eq!(img.pixel(3, 7), colormap(255));
        assert_eq!(img.pixel(0, 0), colormap(0));
    }

    #[test]
    fn heatmap_invalid_is_black() {
        let gt = DepthMap::new(1, 2, vec![1.0, 0.0], vec![true, false]).unwrap();
        let pred = DepthMap::from_values(1, 2, vec![2.0, 3.0]).unwrap();
        let img = error_heatmap(&pred, &gt).unwrap();
        assert_eq!(img.pixel(0, 1), [0, 0, 0]);
        assert_eq!(img.pixel(0, 0), colormap(255));
    }
}
