//! `VIGM` binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VIGM" | u32 version | u32 dim_x | u32 dim_y | u8 trained
//! 5 × (u32 n_layers, n_layers × (u32 in, u32 out, u8 activation))
//! f64 × (x.min, x.max, y.min, y.max)
//! u8 × dim_x x-binary flags | u8 × dim_y y-binary flags
//! u32 len | len bytes of hyperparameter JSON
//! f64 parameters: per network, per layer, weight row-major then bias
//! ```

use std::path::Path;

use super::vigan::{Net, ViganModel};
use crate::autodiff::Tensor;
use crate::data::{FeatureScaler, NormStats};
use crate::error::{Result, ViganError};
use crate::fsutil::atomic_write;
use crate::nn::{Activation, DenseLayer, Mlp};

pub const MAGIC: &[u8; 4] = b"VIGM";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v =
            u32::try_from(v).map_err(|_| ViganError::Format(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                ViganError::Format(format!("truncated model file at byte {}", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| ViganError::Format("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
    fn flags(&mut self, n: usize) -> Result<Vec<bool>> {
        self.take(n)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(ViganError::Format(format!(
                    "binary flag must be 0 or 1, got {other}"
                ))),
            })
            .collect()
    }
}

/// Serializes `model` into `VIGM` bytes.
pub fn to_bytes(model: &ViganModel) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION as usize)?;
    w.u32(model.dim_x())?;
    w.u32(model.dim_y())?;
    w.u8(model.trained as u8);
    for n in Net::ALL {
        let layers = model.net(n).layers();
        w.u32(layers.len())?;
        for l in layers {
            w.u32(l.in_dim())?;
            w.u32(l.out_dim())?;
            w.u8(l.activation.code());
        }
    }
    let s = &model.stats;
    for v in [&s.x.min, &s.x.max, &s.y.min, &s.y.max] {
        w.f64s(v);
    }
    for &b in model.x_binary.iter().chain(&model.y_binary) {
        w.u8(b as u8);
    }
    w.u32(model.hyperparameters.len())?;
    w.0.extend_from_slice(model.hyperparameters.as_bytes());
    for n in Net::ALL {
        for l in model.net(n).layers() {
            w.f64s(l.weight.data());
            w.f64s(l.bias.data());
        }
    }
    Ok(w.0)
}

/// Parses `VIGM` bytes.
pub fn from_bytes(buf: &[u8]) -> Result<ViganModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ViganError::Format(
            "not a VIGM model file (bad magic)".into(),
        ));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(ViganError::Format(format!(
            "unsupported VIGM version {version}"
        )));
    }
    let (dim_x, dim_y) = (r.u32()?, r.u32()?);
    let trained = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(ViganError::Format(format!("bad trained flag {other}"))),
    };
    let mut shapes = Vec::with_capacity(5);
    for _ in Net::ALL {
        let n = r.u32()?;
        let mut layers = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let (i, o) = (r.u32()?, r.u32()?);
            let code = r.u8()?;
            let act = Activation::from_code(code)
                .ok_or_else(|| ViganError::Format(format!("unknown activation code {code}")))?;
            layers.push((i, o, act));
        }
        shapes.push(layers);
    }
    let stats = NormStats {
        x: FeatureScaler {
            min: r.f64s(dim_x)?,
            max: r.f64s(dim_x)?,
        },
        y: FeatureScaler {
            min: r.f64s(dim_y)?,
            max: r.f64s(dim_y)?,
        },
    };
    let x_binary = r.flags(dim_x)?;
    let y_binary = r.flags(dim_y)?;
    let len = r.u32()?;
    let hyperparameters = std::str::from_utf8(r.take(len)?)
        .map_err(|e| ViganError::Format(format!("hyperparameters are not UTF-8: {e}")))?
        .to_owned();

    let mut nets = Vec::with_capacity(5);
    for layers in shapes {
        let mut built = Vec::with_capacity(layers.len());
        for (i, o, act) in layers {
            let weight = Tensor::matrix(i, o, r.f64s(i * o)?)?;
            let bias = Tensor::vector(r.f64s(o)?)?;
            built.push(DenseLayer::new(weight, bias, act)?);
        }
        nets.push(Mlp::from_layers(built)?);
    }
    if r.pos != buf.len() {
        return Err(ViganError::Format(format!(
            "{} trailing bytes after parameters",
            buf.len() - r.pos
        )));
    }
    let mut it = nets.into_iter();
    let mut next = || it.next().expect("five networks");
    let mut model = ViganModel::from_parts(
        next(),
        next(),
        next(),
        next(),
        next(),
        stats,
        x_binary,
        y_binary,
    )?;
    if model.dim_x() != dim_x || model.dim_y() != dim_y {
        return Err(ViganError::Format(
            "header dims disagree with network shapes".into(),
        ));
    }
    model.trained = trained;
    model.hyperparameters = hyperparameters;
    Ok(model)
}

impl ViganModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), &to_bytes(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ViganModel> {
        from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;

    fn sample() -> ViganModel {
        let mut m = ViganModel::new(3, 2, &Architecture::uniform(5), 77).unwrap();
        m.trained = true;
        m.stats.x.min = vec![-1.5, 0.1, 1e-300];
        m.stats.y.max = vec![std::f64::consts::PI, 2.0];
        m.y_binary = vec![true, false];
        m.hyperparameters = r#"{"lambda_cyc":10.0}"#.into();
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let bytes = to_bytes(&m).unwrap();
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vigm");
        let m = sample();
        m.save(&path).unwrap();
        assert_eq!(ViganModel::load(&path).unwrap(), m);
    }

    #[test]
    fn header_starts_with_magic_and_version() {
        let bytes = to_bytes(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"VIGM");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = to_bytes(&sample()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(ViganError::Format(_))));
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(from_bytes(&long).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(from_bytes(&v2).is_err());
    }
}
