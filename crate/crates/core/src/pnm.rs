//! Binary netpbm codecs: 8-bit P5/P6 frames, 16-bit P5 label maps and
//! 0/255 P5 masks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BinaryImage, Frame, Plane};

const FMT: &str = "PNM";

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
}

/// Reads header tokens, skipping whitespace and `#` comments; consumes the
/// single whitespace byte that ends the header.
fn read_header(bytes: &[u8]) -> Result<(Header, usize)> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(FMT, "missing magic"));
    }
    let magic = [bytes[0], bytes[1]];
    if magic[1] != b'5' && magic[1] != b'6' {
        return Err(Error::format(
            FMT,
            format!("unsupported magic P{}", magic[1] as char),
        ));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::format(FMT, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(FMT, "expected a number in the header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(FMT, "header number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(FMT, "header not terminated by whitespace"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(FMT, "invalid dimensions or maxval"));
    }
    Ok((
        Header {
            magic,
            width: w as usize,
            height: h as usize,
            maxval: maxval as u32,
        },
        pos,
    ))
}

fn samples(bytes: &[u8], header: &Header, offset: usize) -> Result<Vec<u32>> {
    let ch = if header.magic[1] == b'6' { 3 } else { 1 };
    let n = header.width * header.height * ch;
    let wide = header.maxval > 255;
    let need = if wide { 2 * n } else { n };
    let body = &bytes[offset..];
    if body.len() < need {
        return Err(Error::format(FMT, "truncated pixel data"));
    }
    let vals: Vec<u32> = if wide {
        body[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    } else {
        body[..need].iter().map(|&b| b as u32).collect()
    };
    if vals.iter().any(|&v| v > header.maxval) {
        return Err(Error::format(FMT, "sample exceeds maxval"));
    }
    Ok(vals)
}

/// Decodes an 8-bit P5 (gray) or P6 (RGB) image. Values keep the 0..=255 scale.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    let (header, offset) = read_header(bytes)?;
    if header.maxval != 255 {
        return Err(Error::format(
            FMT,
            format!("frames must have maxval 255, got {}", header.maxval),
        ));
    }
    let ch = if header.magic[1] == b'6' { 3 } else { 1 };
    let data = samples(bytes, &header, offset)?
        .into_iter()
        .map(|v| v as f32)
        .collect();
    Frame::new(header.width, header.height, ch, data)
}

/// Encodes a frame as P5 or P6, quantising each sample.
pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.quantized());
    out
}

/// Decodes a P5 label map (8- or 16-bit).
pub fn decode_labels(bytes: &[u8]) -> Result<Plane<u16>> {
    let (header, offset) = read_header(bytes)?;
    if header.magic[1] != b'5' {
        return Err(Error::format(FMT, "label maps must be P5"));
    }
    let data = samples(bytes, &header, offset)?
        .into_iter()
        .map(|v| v as u16)
        .collect();
    Plane::from_vec(header.width, header.height, data)
}

/// Encodes a label map as 16-bit P5 (big-endian samples).
pub fn encode_labels(labels: &Plane<u16>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", labels.width(), labels.height()).into_bytes();
    for &v in labels.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Encodes a mask as 8-bit P5 with 0 and 255.
pub fn encode_mask(mask: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.as_slice().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Decodes a P5 mask; any nonzero sample is set.
pub fn decode_mask(bytes: &[u8]) -> Result<BinaryImage> {
    let labels = decode_labels(bytes)?;
    Ok(labels.map(|&v| v != 0))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    decode_frame(&read_all(path)?)
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    write_all(path, &encode_frame(frame))
}

pub fn read_labels(path: &Path) -> Result<Plane<u16>> {
    decode_labels(&read_all(path)?)
}

pub fn write_labels(path: &Path, labels: &Plane<u16>) -> Result<()> {
    write_all(path, &encode_labels(labels))
}

pub fn read_mask(path: &Path) -> Result<BinaryImage> {
    decode_mask(&read_all(path)?)
}

pub fn write_mask(path: &Path, mask: &BinaryImage) -> Result<()> {
    write_all(path, &encode_mask(mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gray_round_trip_with_comment() {
        let bytes = b"P5\n# made by hand\n3 2\n255\n\x00\x01\x02\xfd\xfe\xff".to_vec();
        let f = decode_frame(&bytes).unwrap();
        assert_eq!(f.dims(), (3, 2));
        assert_eq!(f.get(2, 1, 0), 255.0);
        assert_eq!(decode_frame(&encode_frame(&f)).unwrap(), f);
    }

    #[test]
    fn rgb_round_trip() {
        let f = Frame::new(2, 1, 3, vec![1.0, 2.0, 3.0, 250.0, 251.0, 252.0]).unwrap();
        let bytes = encode_frame(&f);
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn quantises_on_write() {
        let f = Frame::new(4, 1, 1, vec![-3.0, 2.5, 254.49, 300.0]).unwrap();
        let back = decode_frame(&encode_frame(&f)).unwrap();
        assert_eq!(back.as_slice(), &[0.0, 3.0, 254.0, 255.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_frame(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_frame(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_frame(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode_frame(b"P5\n0 1\n255\n").is_err());
        assert!(decode_labels(b"P5\n1 1\n100\n\xff").is_err());
    }

    #[test]
    fn mask_round_trip() {
        let m = BinaryImage::from_fn(5, 3, |x, y| (x + y) % 3 == 0);
        assert_eq!(decode_mask(&encode_mask(&m)).unwrap(), m);
    }

    proptest! {
        #[test]
        fn labels_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u16>()) {
            let l = Plane::from_fn(w, h, |x, y| seed.wrapping_mul(31).wrapping_add((x * 977 + y * 13) as u16));
            prop_assert_eq!(decode_labels(&encode_labels(&l)).unwrap(), l);
        }
    }
}
