//! Binary PGM (P5) mosaics of square grayscale images.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const SEPARATOR: u8 = 128;

/// `[−1, 1] → [0, 255]`, clamped, rounding halves up.
pub fn to_pixel(v: f64) -> u8 {
    let x = (v.clamp(-1.0, 1.0) + 1.0) * 127.5;
    (x + 0.5).floor().min(255.0) as u8
}

/// Side length of the square images stored in each row.
pub fn image_side(row_len: usize) -> Option<usize> {
    let s = (row_len as f64).sqrt().round() as usize;
    (s > 0 && s * s == row_len).then_some(s)
}

/// Render rows of `images` as a `cols`-wide mosaic with 1-pixel separators.
/// Returns `(width, height, pixels)`.
pub fn render_grid(images: &Matrix, cols: usize) -> Result<(usize, usize, Vec<u8>)> {
    let side = image_side(images.cols()).ok_or_else(|| {
        Error::Shape(format!(
            "row length {} is not a perfect square",
            images.cols()
        ))
    })?;
    if cols == 0 {
        return Err(Error::Config("mosaic needs at least one column".into()));
    }
    let n = images.rows();
    let cols = cols.min(n.max(1));
    let grid_rows = n.div_ceil(cols).max(1);
    let width = cols * side + (cols - 1);
    let height = grid_rows * side + (grid_rows - 1);
    let mut pixels = vec![SEPARATOR; width * height];
    for (k, img) in images.row_iter().enumerate() {
        let (gy, gx) = (k / cols, k % cols);
        let (oy, ox) = (gy * (side + 1), gx * (side + 1));
        for y in 0..side {
            for x in 0..side {
                pixels[(oy + y) * width + ox + x] = to_pixel(img[y * side + x]);
            }
        }
    }
    Ok((width, height, pixels))
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Write `images` (one flattened square image per row) as a P5 mosaic.
pub fn write_ppm_grid(images: &Matrix, cols: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h, px) = render_grid(images, cols)?;
    std::fs::write(path, encode_pgm(w, h, &px)).map_err(|e| Error::io(path, e))
}
