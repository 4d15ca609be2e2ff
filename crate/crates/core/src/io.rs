//! PNG images and PGM label masks.
//!
//! Mask encoding: 0 = readable, 128 = bystander, 255 = inpaint.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::grid::{GridError, ImageBuffer, Label, LabelMask, PixelCoord};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot encode image: {0}")]
    Encode(String),
    #[error("mask value {value} at {at:?} is not one of 0, 128, 255")]
    BadMaskValue { value: u16, at: PixelCoord },
    #[error("unsupported pixel layout: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer, IoError> {
    let img = image::load_from_memory(bytes).map_err(|e| IoError::Decode(e.to_string()))?;
    from_dynamic(img)
}

fn from_dynamic(img: DynamicImage) -> Result<ImageBuffer, IoError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, raw) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(b) => (2, b.into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(b) => (4, b.into_raw()),
        other if other.color().has_alpha() => (4, other.to_rgba8().into_raw()),
        other => (3, other.to_rgb8().into_raw()),
    };
    let data = raw.into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(ImageBuffer::from_vec(w, h, channels, data)?)
}

pub fn encode_png(image: &ImageBuffer) -> Result<Vec<u8>, IoError> {
    let color = match image.channels() {
        1 => ExtendedColorType::L8,
        2 => ExtendedColorType::La8,
        3 => ExtendedColorType::Rgb8,
        4 => ExtendedColorType::Rgba8,
        n => return Err(IoError::Unsupported(format!("{n} channels"))),
    };
    let raw: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&raw, image.width() as u32, image.height() as u32, color)
        .map_err(|e| IoError::Encode(e.to_string()))?;
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<LabelMask, IoError> {
    let format = image::guess_format(bytes).unwrap_or(ImageFormat::Pnm);
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| IoError::Decode(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<u16> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        other => return Err(IoError::Unsupported(format!("mask must be single-channel, got {:?}", other.color()))),
    };
    let mut labels = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        labels.push(match v {
            0 => Label::Readable,
            128 => Label::Bystander,
            255 => Label::Inpaint,
            value => return Err(IoError::BadMaskValue { value, at: PixelCoord::from_key(k, w) }),
        });
    }
    Ok(LabelMask::from_labels(w, h, labels)?)
}

pub fn mask_value(label: Label) -> u8 {
    match label {
        Label::Readable => 0,
        Label::Bystander => 128,
        Label::Inpaint => 255,
    }
}

/// Binary PGM (P5).
pub fn encode_mask(mask: &LabelMask) -> Result<Vec<u8>, IoError> {
    let raw: Vec<u8> = mask.labels().iter().map(|&l| mask_value(l)).collect();
    let mut out = Cursor::new(Vec::new());
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&raw, mask.width() as u32, mask.height() as u32, ExtendedColorType::L8)
        .map_err(|e| IoError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

fn read(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Write { path: path.display().to_string(), source })
}

pub fn load_png(path: impl AsRef<Path>) -> Result<ImageBuffer, IoError> {
    decode_png(&read(path.as_ref())?)
}

pub fn save_png(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &encode_png(image)?)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask, IoError> {
    decode_mask(&read(path.as_ref())?)
}

pub fn save_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &encode_mask(mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(to_u8(0.5 / 255.0), 1);
        assert_eq!(to_u8(1.5 / 255.0), 2);
        assert_eq!(to_u8(-0.2), 0);
        assert_eq!(to_u8(1.7), 255);
    }

    #[test]
    fn png_round_trip_is_exact_for_8bit_values() {
        for ch in 1..=4 {
            let img = ImageBuffer::from_fn(7, 5, ch, |i, j| {
                let k = (i * 31 + j * 17) % 256;
                [k as f64 / 255.0, (255 - k) as f64 / 255.0, (k / 2) as f64 / 255.0, 1.0]
            })
            .unwrap();
            let back = decode_png(&encode_png(&img).unwrap()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn mask_round_trip() {
        let m = LabelMask::from_fn(6, 4, |i, j| match (i + j) % 3 {
            0 => Label::Readable,
            1 => Label::Inpaint,
            _ => Label::Bystander,
        })
        .unwrap();
        let bytes = encode_mask(&m).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(decode_mask(&bytes).unwrap(), m);
    }

    #[test]
    fn ascii_pgm_and_bad_values() {
        let ok = b"P2\n3 1\n255\n0 128 255\n";
        let m = decode_mask(ok).unwrap();
        assert_eq!(m.labels(), &[Label::Readable, Label::Bystander, Label::Inpaint]);
        let bad = b"P2\n3 1\n255\n0 127 255\n";
        assert!(matches!(decode_mask(bad), Err(IoError::BadMaskValue { value: 127, .. })));
        assert!(decode_png(b"not an image").is_err());
    }
}
