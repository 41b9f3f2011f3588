//! The `LSM1` point-cloud and `LSMH` unembedding-head binary formats.
//!
//! Both are little-endian. A cloud file is the magic `LSM1`, `n: u32`,
//! `d: u32`, a dtype byte (0 = f32, 1 = f64), then `n·d` values row-major.
//! A head file is `LSMH`, `N: u32`, `d: u32`, a has-bias byte, a dtype byte,
//! then `W` row-major and, if present, the `N` bias values. Nothing may
//! follow the payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use semgeo_core::{Matrix, PointCloud, UnembeddingHead};
use thiserror::Error;

pub const CLOUD_MAGIC: [u8; 4] = *b"LSM1";
pub const HEAD_MAGIC: [u8; 4] = *b"LSMH";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("file ends after {read} of {expected} bytes")]
    TruncatedFile { expected: u64, read: u64 },
    #[error("unknown dtype byte {0}")]
    UnknownDtype(u8),
    #[error("bad has-bias byte {0}")]
    BadFlag(u8),
    #[error("unexpected bytes after the payload")]
    TrailingData,
    #[error(transparent)]
    Invalid(#[from] semgeo_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

/// On-disk element type. Values are always widened to `f64` in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn byte(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(FormatError::UnknownDtype(other)),
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Reader that counts consumed bytes so truncation can be reported exactly.
struct Counting<R> {
    inner: R,
    read: u64,
}

impl<R: Read> Counting<R> {
    fn exact(&mut self, buf: &mut [u8], expected_total: u64) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(FormatError::TruncatedFile { expected: expected_total, read: self.read + filled as u64 })
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.read += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, expected_total: u64) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b, expected_total)?;
        Ok(u32::from_le_bytes(b))
    }

    fn byte(&mut self, expected_total: u64) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b, expected_total)?;
        Ok(b[0])
    }

    fn values(&mut self, count: usize, dtype: Dtype, expected_total: u64) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; count * dtype.width()];
        self.exact(&mut raw, expected_total)?;
        Ok(match dtype {
            Dtype::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            Dtype::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        })
    }

    fn expect_end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(()),
                Ok(_) => return Err(FormatError::TrailingData),
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}

fn read_magic<R: Read>(r: &mut Counting<R>, expected: [u8; 4], header_len: u64) -> Result<()> {
    let mut m = [0u8; 4];
    r.exact(&mut m, header_len)?;
    if m != expected {
        return Err(FormatError::BadMagic { expected, found: m });
    }
    Ok(())
}

/// Raw matrix stored in an `LSM1` stream, before cloud validation.
pub fn read_cloud_matrix<R: Read>(reader: R) -> Result<(Matrix, Dtype)> {
    const HEADER: u64 = 13;
    let mut r = Counting { inner: reader, read: 0 };
    read_magic(&mut r, CLOUD_MAGIC, HEADER)?;
    let n = r.u32(HEADER)? as usize;
    let d = r.u32(HEADER)? as usize;
    let dtype = Dtype::from_byte(r.byte(HEADER)?)?;
    let total = HEADER + (n * d * dtype.width()) as u64;
    let values = r.values(n * d, dtype, total)?;
    r.expect_end()?;
    Ok((Matrix::from_vec(n, d, values)?, dtype))
}

pub fn read_cloud<R: Read>(reader: R, layer_index: usize, source_id: &str) -> Result<PointCloud> {
    let (m, _) = read_cloud_matrix(reader)?;
    Ok(PointCloud::new(m, layer_index, source_id)?)
}

fn put_values<W: Write>(w: &mut W, values: &[f64], dtype: Dtype) -> std::io::Result<()> {
    for &v in values {
        match dtype {
            Dtype::F32 => w.write_all(&(v as f32).to_le_bytes())?,
            Dtype::F64 => w.write_all(&v.to_le_bytes())?,
        }
    }
    Ok(())
}

fn dim_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| FormatError::Io(std::io::Error::other("dimension exceeds u32")))
}

pub fn write_cloud_matrix<W: Write>(mut w: W, m: &Matrix, dtype: Dtype) -> Result<()> {
    w.write_all(&CLOUD_MAGIC)?;
    w.write_all(&dim_u32(m.rows())?.to_le_bytes())?;
    w.write_all(&dim_u32(m.cols())?.to_le_bytes())?;
    w.write_all(&[dtype.byte()])?;
    put_values(&mut w, m.as_slice(), dtype)?;
    w.flush()?;
    Ok(())
}

pub fn read_head<R: Read>(reader: R) -> Result<UnembeddingHead> {
    const HEADER: u64 = 14;
    let mut r = Counting { inner: reader, read: 0 };
    read_magic(&mut r, HEAD_MAGIC, HEADER)?;
    let n = r.u32(HEADER)? as usize;
    let d = r.u32(HEADER)? as usize;
    let has_bias = match r.byte(HEADER)? {
        0 => false,
        1 => true,
        other => return Err(FormatError::BadFlag(other)),
    };
    let dtype = Dtype::from_byte(r.byte(HEADER)?)?;
    let count = n * d + if has_bias { n } else { 0 };
    let total = HEADER + (count * dtype.width()) as u64;
    let w = r.values(n * d, dtype, total)?;
    let bias = if has_bias { Some(r.values(n, dtype, total)?) } else { None };
    r.expect_end()?;
    Ok(UnembeddingHead::new(Matrix::from_vec(n, d, w)?, bias)?)
}

pub fn write_head<W: Write>(mut w: W, head: &UnembeddingHead, dtype: Dtype) -> Result<()> {
    w.write_all(&HEAD_MAGIC)?;
    w.write_all(&dim_u32(head.vocab_size())?.to_le_bytes())?;
    w.write_all(&dim_u32(head.d())?.to_le_bytes())?;
    w.write_all(&[u8::from(head.bias().is_some()), dtype.byte()])?;
    put_values(&mut w, head.weights().as_slice(), dtype)?;
    if let Some(b) = head.bias() {
        put_values(&mut w, b, dtype)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a cloud file. The format stores no layer number, so the caller
/// supplies it (0 if unknown).
pub fn load_cloud(path: impl AsRef<Path>, expected_layer: Option<usize>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    read_cloud(file, expected_layer.unwrap_or(0), &path.display().to_string())
}

pub fn save_cloud(path: impl AsRef<Path>, cloud: &PointCloud, dtype: Dtype) -> Result<()> {
    write_cloud_matrix(BufWriter::new(File::create(path)?), cloud.points(), dtype)
}

pub fn load_head(path: impl AsRef<Path>) -> Result<UnembeddingHead> {
    read_head(BufReader::new(File::open(path)?))
}

pub fn save_head(path: impl AsRef<Path>, head: &UnembeddingHead, dtype: Dtype) -> Result<()> {
    write_head(BufWriter::new(File::create(path)?), head, dtype)
}
