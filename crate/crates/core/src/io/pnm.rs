use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::Image;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated raster: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unsupported format: {0}")]
    Unsupported(String),
}

/// A decoded file: grayscale, or the three channels of a color image.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Gray(Image),
    Rgb([Image; 3]),
}

impl Decoded {
    /// Selects a channel (0..3) of a color image; a grayscale image is its own channel 0.
    pub fn channel(self, index: usize) -> Result<Image, ImageError> {
        match (self, index) {
            (Decoded::Gray(img), 0) => Ok(img),
            (Decoded::Gray(_), i) => Err(ImageError::Unsupported(format!("grayscale image has no channel {i}"))),
            (Decoded::Rgb(ch), i) if i < 3 => Ok(ch.into_iter().nth(i).unwrap()),
            (Decoded::Rgb(_), i) => Err(ImageError::Unsupported(format!("color image has no channel {i}"))),
        }
    }
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, ImageError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(ImageError::MalformedHeader("missing Netpbm magic number".into()));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        b'1'..=b'4' | b'7' => {
            return Err(ImageError::Unsupported(format!(
                "P{} (only binary P5 and P6 are supported)",
                bytes[1] as char
            )))
        }
        _ => return Err(ImageError::MalformedHeader("unknown magic number".into())),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field; at least one separator
        let start = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if pos == start {
            return Err(ImageError::MalformedHeader(format!(
                "missing separator before header field {i}"
            )));
        }
        let digits_start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if pos == digits_start {
            return Err(ImageError::MalformedHeader(format!("header field {i} is not a number")));
        }
        let text = std::str::from_utf8(&bytes[digits_start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| ImageError::MalformedHeader(format!("header field {i} out of range: {text}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::MalformedHeader("no whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::MalformedHeader(format!(
            "maxval {maxval} outside 1..=65535"
        )));
    }
    Ok(Header {
        channels,
        width: width as usize,
        height: height as usize,
        maxval,
        data_start: pos,
    })
}

/// Decodes a binary PGM (P5) or PPM (P6); samples map linearly to `v / maxval`.
pub fn decode_pnm(bytes: &[u8]) -> Result<Decoded, ImageError> {
    let h = parse_header(bytes)?;
    let bytes_per_sample = if h.maxval > 255 { 2 } else { 1 };
    let n = h.width * h.height;
    let expected = n * h.channels * bytes_per_sample;
    let raster = &bytes[h.data_start..];
    if raster.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    let scale = h.maxval as f64;
    let mut planes = vec![Vec::with_capacity(n); h.channels];
    for (i, sample) in raster[..expected].chunks_exact(bytes_per_sample).enumerate() {
        let v = match *sample {
            [b] => b as u32,
            [hi, lo] => u16::from_be_bytes([hi, lo]) as u32,
            _ => unreachable!(),
        };
        if v > h.maxval {
            return Err(ImageError::MalformedHeader(format!(
                "sample {v} exceeds maxval {}",
                h.maxval
            )));
        }
        planes[i % h.channels].push(v as f64 / scale);
    }
    let mut images = planes
        .into_iter()
        .map(|p| Image::new(h.width, h.height, p).expect("samples in range"));
    Ok(if h.channels == 1 {
        Decoded::Gray(images.next().unwrap())
    } else {
        Decoded::Rgb([images.next().unwrap(), images.next().unwrap(), images.next().unwrap()])
    })
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Decoded, ImageError> {
    decode_pnm(&fs::read(path)?)
}

/// Reads a grayscale image; color input is rejected.
pub fn read_gray(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    match read_image(path)? {
        Decoded::Gray(img) => Ok(img),
        Decoded::Rgb(_) => Err(ImageError::Unsupported(
            "expected a grayscale (P5) image, found P6".into(),
        )),
    }
}

fn quantize(v: f64, maxval: u16) -> u16 {
    (v * maxval as f64).round() as u16
}

fn push_sample(out: &mut Vec<u8>, v: f64, maxval: u16) {
    let q = quantize(v, maxval);
    if maxval > 255 {
        out.extend_from_slice(&q.to_be_bytes());
    } else {
        out.push(q as u8);
    }
}

pub fn encode_pgm(img: &Image, maxval: u16) -> Vec<u8> {
    assert!(maxval > 0, "maxval must be positive");
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    for &v in img.pixels() {
        push_sample(&mut out, v, maxval);
    }
    out
}

/// Interleaves three equally sized channels into a P6 file.
pub fn encode_ppm(channels: [&Image; 3], maxval: u16) -> Result<Vec<u8>, ImageError> {
    assert!(maxval > 0, "maxval must be positive");
    let [r, g, b] = channels;
    if !(r.same_shape(g) && r.same_shape(b)) {
        return Err(ImageError::Unsupported("color channels differ in size".into()));
    }
    let mut out = format!("P6\n{} {}\n{}\n", r.width(), r.height(), maxval).into_bytes();
    for i in 0..r.len() {
        for ch in [r, g, b] {
            push_sample(&mut out, ch.pixels()[i], maxval);
        }
    }
    Ok(out)
}

pub fn write_pgm(img: &Image, path: impl AsRef<Path>, maxval: u16) -> Result<(), ImageError> {
    fs::write(path, encode_pgm(img, maxval))?;
    Ok(())
}

pub fn write_ppm(channels: [&Image; 3], path: impl AsRef<Path>, maxval: u16) -> Result<(), ImageError> {
    fs::write(path, encode_ppm(channels, maxval)?)?;
    Ok(())
}

/// Writes an 8-bit PGM.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_pgm(img, path, 255)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(bytes: &[u8]) -> Image {
        match decode_pnm(bytes).unwrap() {
            Decoded::Gray(img) => img,
            other => panic!("expected gray, got {other:?}"),
        }
    }

    #[test]
    fn byte_scale_endpoints() {
        assert_eq!(gray(b"P5\n1 1\n255\n\xff").pixels(), &[1.0]);
        assert_eq!(gray(b"P5\n1 1\n255\n\x00").pixels(), &[0.0]);
    }

    #[test]
    fn sixteen_bit_big_endian() {
        let img = gray(b"P5 2 1 65535\n\xff\xff\x80\x00");
        assert_eq!(img.pixels(), &[1.0, 32768.0 / 65535.0]);
    }

    #[test]
    fn comments_in_header() {
        let img = gray(b"P5\n# made by hand\n2 # width\n1\n255\n\x00\x80");
        assert_eq!(img.width(), 2);
        assert_eq!(img.pixels()[1], 128.0 / 255.0);
    }

    #[test]
    fn half_intensity_quantizes_to_128() {
        let img = Image::new(1, 1, vec![0.5]).unwrap();
        let bytes = encode_pgm(&img, 255);
        assert_eq!(*bytes.last().unwrap(), 128);
        let back = gray(&bytes).pixels()[0];
        assert_eq!(back, 128.0 / 255.0);
        assert!((back - 0.5).abs() <= 1.0 / (2.0 * 255.0));
    }

    #[test]
    fn ppm_splits_channels() {
        let d = decode_pnm(b"P6\n2 1\n255\n\xff\x00\x80\x00\xff\x00").unwrap();
        let Decoded::Rgb([r, g, b]) = d else {
            panic!("expected rgb")
        };
        assert_eq!(r.pixels(), &[1.0, 0.0]);
        assert_eq!(g.pixels(), &[0.0, 1.0]);
        assert_eq!(b.pixels(), &[128.0 / 255.0, 0.0]);
        let enc = encode_ppm([&r, &g, &b], 255).unwrap();
        assert_eq!(&enc[enc.len() - 6..], b"\xff\x00\x80\x00\xff\x00");
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            decode_pnm(b"P2\n1 1\n255\n0"),
            Err(ImageError::Unsupported(_))
        ));
        assert!(matches!(decode_pnm(b"GIF89a"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(
            decode_pnm(b"P5\n1 x\n255\n"),
            Err(ImageError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n0\n\x00"),
            Err(ImageError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n70000\n\x00"),
            Err(ImageError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n2 2\n255\n\x00\x01"),
            Err(ImageError::Truncated { expected: 4, found: 2 })
        ));
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n100\n\xc8"),
            Err(ImageError::MalformedHeader(_))
        ));
    }

    #[test]
    fn gray_reader_rejects_color() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        std::fs::write(&p, b"P6\n1 1\n255\n\x01\x02\x03").unwrap();
        assert!(matches!(read_gray(&p), Err(ImageError::Unsupported(_))));
        assert!(matches!(
            read_gray(dir.path().join("missing.pgm")),
            Err(ImageError::Io(_))
        ));
    }
}
