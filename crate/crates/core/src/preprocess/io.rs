//! Image file I/O: reads 8-bit PNG and binary PGM/PPM (P5/P6), writes
//! enhanced images as binary PGM. Files are dispatched on magic bytes, not
//! extensions.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ImageF, ImageU8};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reads a PNG, PGM, or PPM file into an 8-bit image.
pub fn load_image(path: &Path) -> Result<ImageU8> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match bytes.as_slice() {
        [b'P', b'5', ..] | [b'P', b'6', ..] => decode_pnm(&bytes, path),
        [0x89, b'P', b'N', b'G', ..] => decode_png(&bytes, path),
        _ => Err(Error::Format(format!(
            "{}: unrecognized image format (want PNG, PGM, or PPM)",
            path.display()
        ))),
    }
}

/// Image extents as (height, width), reading only the header.
pub fn probe_dimensions(path: &Path) -> Result<(usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match bytes.as_slice() {
        [b'P', b'5', ..] | [b'P', b'6', ..] => {
            let (_, h, w, _, _) = parse_pnm_header(&bytes, path)?;
            Ok((h, w))
        }
        [0x89, b'P', b'N', b'G', ..] => {
            let cursor = std::io::Cursor::new(&bytes);
            let reader = image::ImageReader::with_format(cursor, image::ImageFormat::Png);
            let (w, h) = reader
                .into_dimensions()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            Ok((h as usize, w as usize))
        }
        _ => Err(Error::Format(format!(
            "{}: unrecognized image format",
            path.display()
        ))),
    }
}

/// Writes a real image as binary PGM (P5, maxval 255), quantizing each
/// sample to `round(255 · v)`.
pub fn save_pgm<F: Scalar>(img: &ImageF<F>, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(img.data().len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())
        .expect("in-memory write cannot fail");
    for v in img.data() {
        let q = (v.to_f64().unwrap() * 255.0).round();
        out.push(q as u8);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<ImageU8> {
    let cursor = std::io::Cursor::new(bytes);
    let reader = image::ImageReader::with_format(cursor, image::ImageFormat::Png);
    let img = reader
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => ImageU8::new(
            g.height() as usize,
            g.width() as usize,
            1,
            g.into_raw(),
        ),
        other => {
            // Everything else (RGB, RGBA, 16-bit) collapses to 8-bit RGB.
            let rgb = other.into_rgb8();
            ImageU8::new(rgb.height() as usize, rgb.width() as usize, 3, rgb.into_raw())
        }
    }
    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Header fields: (channels, height, width, maxval, data offset).
fn parse_pnm_header(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, usize, usize)> {
    let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(fail("not a binary PGM/PPM")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and `#` comment lines between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), None | Some(b'\n')) {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_digit() => break,
                _ => return Err(fail("truncated header")),
            }
        }
        let mut value = 0usize;
        while let Some(b) = bytes.get(pos).filter(|b| b.is_ascii_digit()) {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| fail("header value overflow"))?;
            pos += 1;
        }
        *field = value;
    }
    // Exactly one whitespace byte separates the maxval from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(fail("missing raster separator"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    Ok((channels, height, width, maxval, pos))
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<ImageU8> {
    let (channels, height, width, maxval, offset) = parse_pnm_header(bytes, path)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "{}: maxval {maxval} unsupported (8-bit only)",
            path.display()
        )));
    }
    let expected = height * width * channels;
    let data = bytes
        .get(offset..offset + expected)
        .ok_or_else(|| {
            Error::Format(format!(
                "{}: raster truncated ({} of {expected} bytes)",
                path.display(),
                bytes.len().saturating_sub(offset)
            ))
        })?
        .to_vec();
    ImageU8::new(height, width, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::to_grayscale;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("dbel-io-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn pgm_round_trip() {
        let img = ImageF::<f32>::new(2, 3, vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.1]).unwrap();
        let path = tmp("round.pgm");
        save_pgm(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!((back.height(), back.width(), back.channels()), (2, 3, 1));
        assert_eq!(back.data(), &[0, 128, 255, 64, 191, 26]);
        // Quantization is the only loss.
        let gray = to_grayscale::<f32>(&back);
        for (a, b) in gray.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn ppm_with_comments_parses() {
        let path = tmp("comment.ppm");
        let mut bytes = b"P6\n# generated\n2 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (1, 2, 3));
        assert_eq!(img.data(), &[255, 0, 0, 0, 255, 0]);
    }

    #[test]
    fn png_round_trip_via_encoder() {
        let path = tmp("round.png");
        let buf = image::RgbImage::from_fn(3, 2, |x, y| image::Rgb([x as u8 * 10, y as u8 * 20, 7]));
        buf.save_with_format(&path, image::ImageFormat::Png).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (2, 3, 3));
        assert_eq!(img.data()[..3], [0, 0, 7]);
        assert_eq!(probe_dimensions(&path).unwrap(), (2, 3));
    }

    #[test]
    fn probe_reads_pnm_headers() {
        let path = tmp("probe.pgm");
        let mut bytes = b"P5\n4 3\n255\n".to_vec();
        bytes.extend_from_slice(&[0; 12]);
        fs::write(&path, bytes).unwrap();
        assert_eq!(probe_dimensions(&path).unwrap(), (3, 4));
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        let path = tmp("garbage.bin");
        fs::write(&path, b"hello world").unwrap();
        assert!(matches!(load_image(&path), Err(Error::Format(_))));

        let path = tmp("short.pgm");
        fs::write(&path, b"P5\n4 4\n255\n\0\0").unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let missing = tmp("missing.pgm");
        assert!(matches!(load_image(&missing), Err(Error::Io { .. })));
    }

    #[test]
    fn rejects_16_bit_pnm() {
        let path = tmp("deep.pgm");
        fs::write(&path, b"P5\n1 1\n65535\n\0\0").unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().contains("maxval"), "{err}");
    }
}
