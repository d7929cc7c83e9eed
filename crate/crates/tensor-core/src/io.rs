//! The TNSR binary tensor file format.
//!
//! Layout: magic `54 4E 53 52` ("TNSR"), version byte 0x01, dtype byte
//! (0x00 = f64, 0x01 = f32), u32 LE mode count, then one u64 LE extent per
//! mode, then raw little-endian element data in row-major order.

use crate::error::{Result, TensorError};
use crate::tensor::{DenseTensor, Dtype};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"TNSR";
const VERSION: u8 = 0x01;

pub fn write_tensor<W: Write>(w: &mut W, t: &DenseTensor) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION])?;
    let dtype_byte = match t.dtype() {
        Dtype::F64 => 0x00u8,
        Dtype::F32 => 0x01u8,
    };
    w.write_all(&[dtype_byte])?;
    w.write_all(&(t.num_modes() as u32).to_le_bytes())?;
    for &e in t.shape() {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    match t.dtype() {
        Dtype::F64 => {
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Dtype::F32 => {
            for &v in t.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(TensorError::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            magic, MAGIC
        )));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != VERSION {
        return Err(TensorError::Format(format!("unknown version {}", head[0])));
    }
    let dtype = match head[1] {
        0x00 => Dtype::F64,
        0x01 => Dtype::F32,
        other => return Err(TensorError::Format(format!("unknown dtype byte {other:#04x}"))),
    };
    let mut n_buf = [0u8; 4];
    r.read_exact(&mut n_buf)?;
    let n = u32::from_le_bytes(n_buf) as usize;
    if n == 0 {
        return Err(TensorError::Format("zero mode count".into()));
    }
    let mut shape = Vec::with_capacity(n);
    for _ in 0..n {
        let mut e_buf = [0u8; 8];
        r.read_exact(&mut e_buf)?;
        let e = u64::from_le_bytes(e_buf) as usize;
        if e == 0 {
            return Err(TensorError::Format("zero extent".into()));
        }
        shape.push(e);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    match dtype {
        Dtype::F64 => {
            let mut buf = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
        }
        Dtype::F32 => {
            let mut buf = [0u8; 4];
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                data.push(f32::from_le_bytes(buf) as f64);
            }
        }
    }
    Ok(DenseTensor::from_vec(shape, data)?.with_dtype(dtype))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(&mut f, t)?;
    f.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_tensor(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes_are_pinned() {
        let t = DenseTensor::from_vec(vec![2, 3], vec![0.0; 6]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[0..4], &[0x54, 0x4E, 0x53, 0x52]);
        assert_eq!(buf[4], 0x01); // version
        assert_eq!(buf[5], 0x00); // f64
        assert_eq!(&buf[6..10], &2u32.to_le_bytes());
        assert_eq!(&buf[10..18], &2u64.to_le_bytes());
        assert_eq!(&buf[18..26], &3u64.to_le_bytes());
        assert_eq!(buf.len(), 26 + 6 * 8);
    }

    #[test]
    fn round_trip_f64() {
        let t = DenseTensor::from_vec(vec![2, 2, 3], (0..12).map(|v| v as f64 * 0.5).collect())
            .unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn round_trip_f32_narrows_storage() {
        let t = DenseTensor::from_vec(vec![4], vec![1.0, 0.5, -0.25, 3.0])
            .unwrap()
            .with_dtype(Dtype::F32);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(buf[5], 0x01);
        assert_eq!(buf.len(), 4 + 2 + 4 + 8 + 4 * 4);
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back.dtype(), Dtype::F32);
        assert_eq!(back.data(), t.data()); // exactly representable values
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOPE\x01\x00\x01\x00\x00\x00".to_vec();
        assert!(read_tensor(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tnsr");
        let t = DenseTensor::from_vec(vec![3, 2], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        save_tensor(&path, &t).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back, t);
    }
}
