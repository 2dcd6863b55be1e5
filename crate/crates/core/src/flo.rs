//! Middlebury `.flo` flow files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
const FMT: &str = "flo";

pub fn write_flo<W: Write>(flow: &FlowField, mut w: W) -> Result<()> {
    w.write_all(&FLO_MAGIC.to_le_bytes())?;
    w.write_all(&(flow.width() as i32).to_le_bytes())?;
    w.write_all(&(flow.height() as i32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(flow.as_slice().len() * 8);
    for &[u, v] in flow.as_slice() {
        buf.extend_from_slice(&u.to_le_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_flo<R: Read>(mut r: R) -> Result<FlowField> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header)
        .map_err(|_| Error::format(FMT, "truncated header"))?;
    let magic = f32::from_le_bytes(header[0..4].try_into().unwrap());
    if magic != FLO_MAGIC {
        return Err(Error::format(FMT, "bad magic"));
    }
    let w = i32::from_le_bytes(header[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(header[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::format(FMT, format!("invalid dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != w * h * 8 {
        return Err(Error::format(FMT, "payload size mismatch"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    FlowField::from_vec(w, h, data)
}

pub fn save_flo(path: &Path, flow: &FlowField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_flo(flow, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_flo(path: &Path) -> Result<FlowField> {
    read_flo(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_flo(&FlowField::constant(3, 2, 1.5, -2.0), &mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 6 * 8);
        assert_eq!(&buf[0..4], b"PIEH");
        assert_eq!(i32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
    }

    #[test]
    fn rejects_corrupt() {
        let mut buf = Vec::new();
        write_flo(&FlowField::zeros(2, 2), &mut buf).unwrap();
        assert!(read_flo(&buf[..buf.len() - 1]).is_err());
        buf[0] = 0;
        assert!(read_flo(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..8, h in 1usize..8, vals in proptest::collection::vec(-1e3f32..1e3, 128)) {
            let f = FlowField::from_fn(w, h, |x, y| [vals[(y * w + x) % 128], vals[(y * w + x + 64) % 128]]);
            let mut buf = Vec::new();
            write_flo(&f, &mut buf).unwrap();
            prop_assert_eq!(read_flo(&buf[..]).unwrap(), f);
        }
    }
}
