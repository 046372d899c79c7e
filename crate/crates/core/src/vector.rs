//! Dense vector helpers and the parameter vector type.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::ops::Deref;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Index of the first non-finite entry, if any.
pub fn first_non_finite(x: &[f64]) -> Option<usize> {
    x.iter().position(|v| !v.is_finite())
}

/// Mean of equally sized vectors, summed in slice order.
pub fn mean_in_order(vectors: &[Vec<f64>]) -> Vec<f64> {
    let d = vectors[0].len();
    let mut acc = vec![0.0; d];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

const CHECKPOINT_MAGIC: [u8; 4] = *b"VRPV";
const CHECKPOINT_VERSION: u32 = 1;

/// Flat policy parameter vector θ. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = first_non_finite(&values) {
            return Err(Error::numeric(format!(
                "parameter {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Writes the 16-byte header (magic, version, d) followed by `d`
    /// little-endian f64 values.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.0.len() as u64).to_le_bytes())?;
        for v in &self.0 {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if header[0..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad parameter checkpoint magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported parameter checkpoint version {version}"
            )));
        }
        let d = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let mut values = Vec::with_capacity(d);
        let mut buf = [0u8; 8];
        for _ in 0..d {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {d} parameters",
                rest.len()
            )));
        }
        Self::new(values)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Vec<f64> {
        p.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_finite() {
        let err = ParamVector::new(vec![0.0, f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("parameter 1"));
    }

    #[test]
    fn checkpoint_header_layout() {
        let p = ParamVector::new(vec![1.5, -2.0]).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16);
        assert_eq!(&buf[0..4], b"VRPV");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.5);
    }

    #[test]
    fn checkpoint_rejects_truncation() {
        let p = ParamVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        buf.pop();
        assert!(ParamVector::read_checkpoint(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 0..40)) {
            let p = ParamVector::new(values).unwrap();
            let mut buf = Vec::new();
            p.write_checkpoint(&mut buf).unwrap();
            let q = ParamVector::read_checkpoint(&buf[..]).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
