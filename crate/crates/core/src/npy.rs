//! NPY v1.0 reading and writing for 1-D and 2-D float arrays.
//!
//! Reads accept little-endian `f4`/`f8` in C or Fortran order; `f4` is
//! widened to `f64`. Writes are canonical: C order, header padded with
//! spaces to a multiple of 64 bytes, so equal arrays give equal files.

use std::fs;
use std::path::Path;

use crate::error::{Error, NpyError, Result};
use crate::matrix::DenseMatrix;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NpyDtype {
    F32,
    #[default]
    F64,
}

impl NpyDtype {
    fn descr(self) -> &'static str {
        match self {
            NpyDtype::F32 => "<f4",
            NpyDtype::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
        }
    }
}

/// A decoded array: shape plus row-major `f64` data.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug)]
struct Header {
    dtype: NpyDtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Minimal parser for the Python dict literal in the header.
struct DictParser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn malformed(msg: impl Into<String>) -> NpyError {
    NpyError::MalformedHeader(msg.into())
}

impl<'a> DictParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> std::result::Result<(), NpyError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(malformed(format!("expected '{}' at byte {}", c as char, self.pos)))
        }
    }

    fn string(&mut self) -> std::result::Result<String, NpyError> {
        let quote = self.peek().ok_or_else(|| malformed("unexpected end"))?;
        if quote != b'\'' && quote != b'"' {
            return Err(malformed(format!("expected a string at byte {}", self.pos)));
        }
        let start = self.pos + 1;
        let len = self.s[start..]
            .iter()
            .position(|&c| c == quote)
            .ok_or_else(|| malformed("unterminated string"))?;
        self.pos = start + len + 1;
        Ok(String::from_utf8_lossy(&self.s[start..start + len]).into_owned())
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn shape(&mut self) -> std::result::Result<Vec<usize>, NpyError> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    return Ok(dims);
                }
                Some(_) => {
                    let w = self.word();
                    let w = w.strip_suffix('L').unwrap_or(&w);
                    dims.push(w.parse().map_err(|_| malformed(format!("bad dimension {w:?}")))?);
                    if self.peek() == Some(b',') {
                        self.pos += 1;
                    }
                }
                None => return Err(malformed("unterminated shape")),
            }
        }
    }

    fn parse(mut self) -> std::result::Result<Header, NpyError> {
        let (mut descr, mut fortran, mut shape) = (None, None, None);
        self.expect(b'{')?;
        loop {
            if self.peek() == Some(b'}') {
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            match key.as_str() {
                "descr" => descr = Some(self.string()?),
                "fortran_order" => {
                    fortran = Some(match self.word().as_str() {
                        "True" => true,
                        "False" => false,
                        other => return Err(malformed(format!("fortran_order = {other:?}"))),
                    })
                }
                "shape" => shape = Some(self.shape()?),
                other => return Err(malformed(format!("unexpected key {other:?}"))),
            }
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(malformed(format!("expected ',' or '}}' at byte {}", self.pos))),
            }
        }
        let descr = descr.ok_or_else(|| malformed("missing 'descr'"))?;
        let dtype = match descr.as_str() {
            "<f8" => NpyDtype::F64,
            "<f4" => NpyDtype::F32,
            _ => return Err(NpyError::UnsupportedDtype(descr)),
        };
        Ok(Header {
            dtype,
            fortran_order: fortran.ok_or_else(|| malformed("missing 'fortran_order'"))?,
            shape: shape.ok_or_else(|| malformed("missing 'shape'"))?,
        })
    }
}

/// Decodes an NPY v1.0 byte buffer.
pub fn decode(bytes: &[u8]) -> std::result::Result<NpyArray, NpyError> {
    let probe = bytes.len().min(MAGIC.len());
    if bytes[..probe] != MAGIC[..probe] || bytes.is_empty() {
        return Err(NpyError::BadMagic);
    }
    if bytes.len() < PREAMBLE {
        return Err(NpyError::TruncatedHeader);
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(NpyError::UnsupportedVersion { major, minor });
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = PREAMBLE + header_len;
    if bytes.len() < body {
        return Err(NpyError::TruncatedHeader);
    }
    let header = DictParser {
        s: &bytes[PREAMBLE..body],
        pos: 0,
    }
    .parse()?;

    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| malformed("shape overflows"))?;
    let expected = count
        .checked_mul(header.dtype.size())
        .ok_or_else(|| malformed("shape overflows"))?;
    let payload = &bytes[body..];
    if payload.len() < expected {
        return Err(NpyError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(NpyError::LengthMismatch {
            expected,
            found: payload.len(),
        });
    }
    let mut data: Vec<f64> = match header.dtype {
        NpyDtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
        NpyDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect(),
    };
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(NpyError::NonFinite { index });
    }
    if header.fortran_order && header.shape.len() == 2 {
        let (r, c) = (header.shape[0], header.shape[1]);
        let mut out = vec![0.0; data.len()];
        for j in 0..c {
            for i in 0..r {
                out[i * c + j] = data[j * r + i];
            }
        }
        data = out;
    }
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

fn encode(shape: &[usize], data: &[f64], dtype: NpyDtype) -> Vec<u8> {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}",
        dtype.descr()
    );
    let unpadded = PREAMBLE + dict.len() + 1;
    dict.extend(std::iter::repeat_n(' ', (ALIGN - unpadded % ALIGN) % ALIGN));
    dict.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE + dict.len() + data.len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    match dtype {
        NpyDtype::F64 => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        NpyDtype::F32 => data
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    out
}

/// Canonical NPY bytes of a matrix.
pub fn encode_matrix(m: &DenseMatrix, dtype: NpyDtype) -> Vec<u8> {
    encode(&[m.rows(), m.cols()], m.as_slice(), dtype)
}

/// Canonical NPY bytes of a vector.
pub fn encode_vector(v: &[f64], dtype: NpyDtype) -> Vec<u8> {
    encode(&[v.len()], v, dtype)
}

/// Decodes a 2-D array.
pub fn decode_matrix(bytes: &[u8]) -> std::result::Result<DenseMatrix, NpyError> {
    let arr = decode(bytes)?;
    match arr.shape[..] {
        [r, c] if r > 0 && c > 0 => Ok(DenseMatrix::new(r, c, arr.data).expect("length checked")),
        [_, _] => Err(malformed(format!("zero-sized dimension in shape {:?}", arr.shape))),
        _ => Err(NpyError::Dimensionality {
            expected: 2,
            shape: arr.shape,
        }),
    }
}

/// Decodes a 1-D array.
pub fn decode_vector(bytes: &[u8]) -> std::result::Result<Vec<f64>, NpyError> {
    let arr = decode(bytes)?;
    match arr.shape[..] {
        [_] => Ok(arr.data),
        _ => Err(NpyError::Dimensionality {
            expected: 1,
            shape: arr.shape,
        }),
    }
}

fn with_path<T>(path: &Path, r: std::result::Result<T, NpyError>) -> Result<T> {
    r.map_err(|source| Error::Npy {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    with_path(path, decode_matrix(&fs::read(path)?))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    with_path(path, decode_vector(&fs::read(path)?))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix, dtype: NpyDtype) -> Result<()> {
    fs::write(path, encode_matrix(m, dtype))?;
    Ok(())
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64], dtype: NpyDtype) -> Result<()> {
    fs::write(path, encode_vector(v, dtype))?;
    Ok(())
}
