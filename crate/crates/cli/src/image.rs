//! Grayscale image output in binary PGM.
//!
//! Each image maps the finite value range linearly onto 0..=255 and
//! reports the range endpoints so the mapping can be undone. The grid's
//! first row is the bottom of the picture. The byte stream carries no
//! comments or timestamps, so equal inputs give equal files.

use std::io;
use std::path::Path;

/// Rendered image bytes plus the value range they encode.
pub struct Rendered {
    pub bytes: Vec<u8>,
    pub min: f64,
    pub max: f64,
}

/// Renders a node-ordered value slice (`j * nx + i` layout) to PGM.
/// Non-finite nodes paint black; a constant field paints mid gray.
pub fn render_pgm(nx: usize, ny: usize, values: &[f64]) -> Rendered {
    assert_eq!(values.len(), nx * ny, "value count does not match image size");
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let span = hi - lo;
    let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    bytes.reserve(nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = values[j * nx + i];
            let px = if !v.is_finite() {
                0
            } else if span == 0.0 {
                128
            } else {
                (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
            };
            bytes.push(px);
        }
    }
    Rendered { bytes, min: lo, max: hi }
}

pub fn write_pgm(path: &Path, nx: usize, ny: usize, values: &[f64]) -> io::Result<(f64, f64)> {
    let r = render_pgm(nx, ny, values);
    std::fs::write(path, &r.bytes)?;
    Ok((r.min, r.max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_orientation() {
        let values = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let r = render_pgm(3, 2, &values);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&r.bytes[..header.len()], header);
        let pixels = &r.bytes[header.len()..];
        assert_eq!(pixels.len(), 6);
        assert_eq!(pixels[0], 153);
        assert_eq!(pixels[3], 0);
        assert_eq!((r.min, r.max), (0.0, 5.0));
    }

    #[test]
    fn constant_field_paints_mid_gray() {
        let r = render_pgm(2, 2, &[7.0; 4]);
        let header = b"P5\n2 2\n255\n";
        assert!(r.bytes[header.len()..].iter().all(|&b| b == 128));
        assert_eq!((r.min, r.max), (7.0, 7.0));
    }

    #[test]
    fn non_finite_nodes_paint_black() {
        let r = render_pgm(2, 1, &[f64::NAN, 3.0]);
        assert_eq!(r.bytes[r.bytes.len() - 2], 0);
        assert_eq!((r.min, r.max), (3.0, 3.0));
    }

    #[test]
    fn equal_inputs_give_equal_bytes() {
        let values: Vec<f64> = (0..12).map(|k| (k as f64).sin()).collect();
        assert_eq!(render_pgm(4, 3, &values).bytes, render_pgm(4, 3, &values).bytes);
    }
}
