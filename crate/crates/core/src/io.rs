//! Binary cube files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "CUBE"
//! 4       1           format version (1)
//! 5       4 × 3       n1, n2, n3 as u32
//! 17      8 × n       payload, f64, i fastest then j then k
//! ```

use std::fs;
use std::path::Path;

use crate::cube::Cube;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CUBE";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 12;

pub fn encode_cube(c: &Cube) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * c.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for n in c.dims() {
        let n = u32::try_from(n).map_err(|_| Error::Format(format!("extent {n} exceeds u32")))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    for v in c.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<Cube> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short for header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected \"CUBE\"".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported format version {}", bytes[4])));
    }
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        let o = 5 + 4 * a;
        *d = u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        if *d == 0 {
            return Err(Error::Format(format!("zero extent along axis {}", a + 1)));
        }
    }
    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .and_then(|v| v.checked_mul(8).map(|b| (v, b)))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let (count, payload_len) = count;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::Format(format!(
            "truncated payload: {} of {payload_len} bytes",
            payload.len()
        )));
    }
    if payload.len() > payload_len {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - payload_len
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    debug_assert_eq!(data.len(), count);
    Cube::from_vec(dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_cube(path: impl AsRef<Path>, c: &Cube) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(c)?).map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<Cube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let c = Cube::from_vec([1, 2, 1], vec![1.0, -2.5]).unwrap();
        let b = encode_cube(&c).unwrap();
        assert_eq!(&b[..5], b"CUBE\x01");
        assert_eq!(&b[5..17], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[17..25], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 17 + 16);
    }

    #[test]
    fn minimal_round_trip() {
        let c = Cube::filled([1, 1, 1], std::f64::consts::PI);
        assert_eq!(decode_cube(&encode_cube(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn corrupt_inputs() {
        let c = Cube::ones([2, 2, 2]);
        let good = encode_cube(&c).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_cube(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_cube(&bad), Err(Error::Format(_))));

        assert!(matches!(decode_cube(&good[..good.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode_cube(&good[..10]), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode_cube(&bad), Err(Error::Format(_))));

        let mut huge = good[..5].to_vec();
        for _ in 0..3 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode_cube(&huge), Err(Error::Format(_))));

        let mut nan = good.clone();
        nan[17..25].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_cube(&nan), Err(Error::Format(_))));
    }
}
