//! Grayscale image files: binary PGM (8/16-bit) and raw f64.
//!
//! Raw f64 layout: magic `BIGCSF64`, width u32 LE, height u32 LE, then
//! `width * height` little-endian f64 pixels in row-major order.

use std::path::Path;

use crate::{CliError, Result};

pub const F64_MAGIC: &[u8; 8] = b"BIGCSF64";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Eight,
    Sixteen,
    Float,
}

impl Depth {
    /// Dynamic range implied by the depth; float images default to 8-bit range.
    pub fn peak(self) -> f64 {
        match self {
            Depth::Eight | Depth::Float => 255.0,
            Depth::Sixteen => 65535.0,
        }
    }
}

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub depth: Depth,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, depth: Depth, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(CliError::BadInput(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
            pixels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn is_square_pow2(&self) -> bool {
        self.width == self.height && self.width.is_power_of_two()
    }

    /// `vec(U)`: column-major stacking.
    pub fn to_column_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pixels.len());
        for c in 0..self.width {
            out.extend((0..self.height).map(|r| self.get(r, c)));
        }
        out
    }

    pub fn from_column_major(side: usize, depth: Depth, v: &[f64]) -> Result<Self> {
        if v.len() != side * side {
            return Err(CliError::BadInput(format!(
                "{} coefficients do not form a {side}x{side} image",
                v.len()
            )));
        }
        let mut pixels = vec![0.0; v.len()];
        for c in 0..side {
            for r in 0..side {
                pixels[r * side + c] = v[r + c * side];
            }
        }
        Self::new(side, side, depth, pixels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fit {
    /// Reject anything that is not a power-of-two square.
    #[default]
    Exact,
    /// Zero-pad on the bottom and right to the next power-of-two square.
    Pad,
    /// Keep the centered largest power-of-two square.
    Crop,
}

pub fn fit_square(img: Image, fit: Fit) -> Result<Image> {
    if img.is_square_pow2() {
        return Ok(img);
    }
    match fit {
        Fit::Exact => Err(CliError::BadInput(format!(
            "image is {}x{}; a power-of-two square is required (use --pad or --crop)",
            img.width, img.height
        ))),
        Fit::Pad => {
            let side = img.width.max(img.height).next_power_of_two();
            let mut pixels = vec![0.0; side * side];
            for r in 0..img.height {
                pixels[r * side..r * side + img.width]
                    .copy_from_slice(&img.pixels[r * img.width..(r + 1) * img.width]);
            }
            Image::new(side, side, img.depth, pixels)
        }
        Fit::Crop => {
            let small = img.width.min(img.height);
            if small == 0 {
                return Err(CliError::BadInput("cannot crop an empty image".into()));
            }
            let side = 1usize << small.ilog2();
            let (r0, c0) = ((img.height - side) / 2, (img.width - side) / 2);
            let mut pixels = Vec::with_capacity(side * side);
            for r in r0..r0 + side {
                pixels.extend_from_slice(&img.pixels[r * img.width + c0..r * img.width + c0 + side]);
            }
            Image::new(side, side, img.depth, pixels)
        }
    }
}

fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(CliError::BadInput("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::BadInput("malformed PGM header field".into()))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    if !bytes.starts_with(b"P5") {
        return Err(CliError::BadInput("not a binary PGM (P5) file".into()));
    }
    let mut pos = 2;
    let width = pgm_token(bytes, &mut pos)?;
    let height = pgm_token(bytes, &mut pos)?;
    let maxval = pgm_token(bytes, &mut pos)?;
    if !(1..=65535).contains(&maxval) {
        return Err(CliError::BadInput(format!("PGM maxval {maxval} out of range")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(CliError::BadInput("PGM header not followed by whitespace".into()));
    }
    pos += 1;
    let count = width * height;
    let (depth, pixels) = if maxval < 256 {
        let data = bytes
            .get(pos..pos + count)
            .ok_or_else(|| CliError::BadInput("truncated PGM pixel data".into()))?;
        (Depth::Eight, data.iter().map(|&b| b as f64).collect())
    } else {
        let data = bytes
            .get(pos..pos + 2 * count)
            .ok_or_else(|| CliError::BadInput("truncated PGM pixel data".into()))?;
        (
            Depth::Sixteen,
            data.chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect(),
        )
    };
    Image::new(width, height, depth, pixels)
}

pub fn decode_f64(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 16 || &bytes[..8] != F64_MAGIC {
        return Err(CliError::BadInput("not a raw f64 image".into()));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let data = &bytes[16..];
    if data.len() != 8 * width * height {
        return Err(CliError::BadInput(format!(
            "raw f64 image {width}x{height} has {} payload bytes",
            data.len()
        )));
    }
    let pixels = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image::new(width, height, Depth::Float, pixels)
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(F64_MAGIC) {
        decode_f64(bytes)
    } else {
        decode_pgm(bytes)
    }
}

pub fn read(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    decode(&bytes)
}

/// Clamps to `[0, peak]` and rounds half to even.
pub fn quantize(v: f64, peak: f64) -> f64 {
    v.clamp(0.0, peak).round_ties_even()
}

/// PGM with `maxval = peak`; pixels are clamped and rounded first.
pub fn encode_pgm(img: &Image, peak: f64) -> Result<Vec<u8>> {
    if !(peak >= 1.0 && peak <= 65535.0 && peak.fract() == 0.0) {
        return Err(CliError::BadInput(format!("PGM output needs an integer range in 1..=65535, got {peak}")));
    }
    let maxval = peak as u32;
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &v in &img.pixels {
        let q = quantize(v, peak) as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

/// Raw f64, clamped to `[0, peak]` but not rounded.
pub fn encode_f64(img: &Image, peak: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * img.pixels.len());
    out.extend_from_slice(F64_MAGIC);
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    for &v in &img.pixels {
        out.extend_from_slice(&v.clamp(0.0, peak).to_le_bytes());
    }
    out
}

/// `.f64` and `.raw` hold floats; anything else is PGM.
pub fn is_float_path(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("f64" | "raw"))
}

/// Chooses the encoding from the extension, see [`is_float_path`].
pub fn write(path: &Path, img: &Image, peak: f64) -> Result<()> {
    let bytes = if is_float_path(path) { encode_f64(img, peak) } else { encode_pgm(img, peak)? };
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}
