//! The `SMRD` tensor container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "SMRD"
//! 4       4           version (u32 LE) = 1
//! 8       4           dtype tag (u32 LE): 1 = complex64 (f32 re, f32 im),
//!                     2 = complex128 (f64 re, f64 im), 3 = u8
//! 12      4           rank (u32 LE)
//! 16      4 * rank    dims (u32 LE each)
//! ...     payload     row-major, little-endian
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::{Complex, Complex64};

use crate::error::{Result, SmrdError};
use crate::forward::SamplingMask;
use crate::numerics::{CoilStack, ComplexImage};

pub const MAGIC: &[u8; 4] = b"SMRD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum DType {
    Complex64 = 1,
    Complex128 = 2,
    U8 = 3,
}

impl DType {
    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            1 => Ok(Self::Complex64),
            2 => Ok(Self::Complex128),
            3 => Ok(Self::U8),
            other => Err(SmrdError::UnknownDtype(other)),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Complex64 => 8,
            Self::Complex128 => 16,
            Self::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Complex64(Vec<Complex<f32>>),
    Complex128(Vec<Complex64>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            Self::Complex64(_) => DType::Complex64,
            Self::Complex128(_) => DType::Complex128,
            Self::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Complex64(v) => v.len(),
            Self::Complex128(v) => v.len(),
            Self::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(SmrdError::InvalidParameter(format!(
                "tensor dims {dims:?} hold {expected} elements but data has {}",
                data.len()
            )));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(SmrdError::InvalidParameter("tensor dimension exceeds u32".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn from_image(img: &ComplexImage) -> Self {
        Self {
            dims: vec![img.height(), img.width()],
            data: TensorData::Complex128(img.data().to_vec()),
        }
    }

    pub fn from_stack(stack: &CoilStack) -> Self {
        let (h, w) = stack.shape();
        let data = stack.coils().iter().flat_map(|c| c.data().iter().copied()).collect();
        Self {
            dims: vec![stack.num_coils(), h, w],
            data: TensorData::Complex128(data),
        }
    }

    pub fn from_mask(mask: &SamplingMask) -> Self {
        Self {
            dims: vec![mask.height(), mask.width()],
            data: TensorData::U8(mask.to_bytes()),
        }
    }

    fn complex_values(&self) -> Result<Vec<Complex64>> {
        match &self.data {
            TensorData::Complex128(v) => Ok(v.clone()),
            TensorData::Complex64(v) => Ok(v
                .iter()
                .map(|z| Complex64::new(z.re as f64, z.im as f64))
                .collect()),
            TensorData::U8(_) => Err(SmrdError::TensorKind("expected complex data, found u8".into())),
        }
    }

    pub fn to_image(&self) -> Result<ComplexImage> {
        match self.dims[..] {
            [h, w] => ComplexImage::new(h, w, self.complex_values()?),
            _ => Err(SmrdError::TensorKind(format!(
                "expected rank-2 image, found dims {:?}",
                self.dims
            ))),
        }
    }

    pub fn to_stack(&self) -> Result<CoilStack> {
        match self.dims[..] {
            [c, h, w] => {
                let values = self.complex_values()?;
                let coils = (0..c)
                    .map(|k| ComplexImage::new(h, w, values[k * h * w..(k + 1) * h * w].to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                CoilStack::new(coils)
            }
            _ => Err(SmrdError::TensorKind(format!(
                "expected rank-3 coil stack, found dims {:?}",
                self.dims
            ))),
        }
    }

    pub fn to_mask(&self) -> Result<SamplingMask> {
        match (&self.data, &self.dims[..]) {
            (TensorData::U8(bytes), &[h, w]) => SamplingMask::from_bytes(h, w, bytes),
            _ => Err(SmrdError::TensorKind(format!(
                "expected rank-2 u8 mask, found {:?} with dims {:?}",
                self.dtype(),
                self.dims
            ))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.dims.len() + self.data.len() * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dtype() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::Complex64(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            TensorData::Complex128(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(4).ok_or(SmrdError::TruncatedHeader)? != MAGIC {
            return Err(SmrdError::BadMagic);
        }
        let version = cursor.u32()?;
        if version != VERSION {
            return Err(SmrdError::UnsupportedVersion(version));
        }
        let dtype = DType::from_tag(cursor.u32()?)?;
        let rank = cursor.u32()? as usize;
        let dims = (0..rank)
            .map(|_| cursor.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        let expected = count * dtype.size();
        let payload = &bytes[cursor.pos..];
        if payload.len() < expected {
            return Err(SmrdError::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(SmrdError::TrailingBytes(payload.len() - expected));
        }
        let data = match dtype {
            DType::U8 => TensorData::U8(payload.to_vec()),
            DType::Complex64 => TensorData::Complex64(
                payload
                    .chunks_exact(8)
                    .map(|c| {
                        Complex::new(
                            f32::from_le_bytes(c[..4].try_into().unwrap()),
                            f32::from_le_bytes(c[4..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
            DType::Complex128 => TensorData::Complex128(
                payload
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
        };
        Ok(Self { dims, data })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4).ok_or(SmrdError::TruncatedHeader)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Writes `bytes` next to `path` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| SmrdError::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    write_atomic(path.as_ref(), &tensor.to_bytes())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    Tensor::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn complex128_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rng::stream(1, "tensor");
        let values = rng::complex_normal(12, 5, 1.0, &mut r).into_data();
        let t = Tensor::new(vec![3, 4, 5], TensorData::Complex128(values)).unwrap();
        let path = dir.path().join("t.smrd");
        save_tensor(&path, &t).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back, t);
        match (back.data(), t.data()) {
            (TensorData::Complex128(a), TensorData::Complex128(b)) => {
                for (x, y) in a.iter().zip(b) {
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn other_dtypes_round_trip() {
        let c64 = Tensor::new(vec![2, 2], TensorData::Complex64(vec![Complex::new(1.5f32, -0.25); 4])).unwrap();
        assert_eq!(Tensor::from_bytes(&c64.to_bytes()).unwrap(), c64);
        let u8s = Tensor::new(vec![7], TensorData::U8(vec![0, 1, 1, 0, 1, 0, 0])).unwrap();
        assert_eq!(Tensor::from_bytes(&u8s.to_bytes()).unwrap(), u8s);
    }

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![1, 2], TensorData::U8(vec![1, 0])).unwrap();
        assert_eq!(
            t.to_bytes(),
            [b'S', b'M', b'R', b'D', 1, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0]
        );
    }

    #[test]
    fn distinct_load_errors() {
        let t = Tensor::new(vec![4], TensorData::Complex128(vec![Complex64::new(1.0, 2.0); 4])).unwrap();
        let bytes = t.to_bytes();
        assert!(matches!(
            Tensor::from_bytes(&bytes[..bytes.len() - 3]),
            Err(SmrdError::TruncatedPayload { expected: 64, found: 61 })
        ));
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Tensor::from_bytes(&bad), Err(SmrdError::BadMagic)));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(Tensor::from_bytes(&bad), Err(SmrdError::UnknownDtype(9))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(Tensor::from_bytes(&bad), Err(SmrdError::UnsupportedVersion(2))));
        assert!(matches!(Tensor::from_bytes(&bytes[..10]), Err(SmrdError::TruncatedHeader)));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Tensor::from_bytes(&long), Err(SmrdError::TrailingBytes(1))));
    }

    #[test]
    fn typed_conversions() {
        let img = rng::complex_normal(3, 4, 1.0, &mut rng::stream(2, "img"));
        assert_eq!(Tensor::from_image(&img).to_image().unwrap(), img);
        let stack = CoilStack::new(vec![img.clone(), img.scaled(2.0)]).unwrap();
        assert_eq!(Tensor::from_stack(&stack).to_stack().unwrap(), stack);
        assert!(Tensor::from_image(&img).to_stack().is_err());
        assert!(Tensor::from_image(&img).to_mask().is_err());
    }
}
