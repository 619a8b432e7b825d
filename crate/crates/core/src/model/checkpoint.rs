//! Versioned little-endian checkpoint format.
//!
//! ```text
//! magic        6 bytes  "MSMDA1"
//! input_dim    u64
//! n_cfe        u64, then n_cfe × u64 widths
//! dsfe_dim     u64
//! num_classes  u64
//! num_branches u64
//! leaky_slope  f64
//! rng_seed     u64
//! n_values     u64
//! values       n_values × f64 (CFE layers, then branches in order;
//!              each layer weight then bias, row-major)
//! ```
//! Optimizer state is not stored.

use std::fs;
use std::path::Path;

use super::{ModelConfig, MsMdaModel};
use crate::error::{Error, Result};
use crate::neuralcore::ParameterSet;

pub const MAGIC: &[u8; 6] = b"MSMDA1";

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Data(format!(
                "checkpoint truncated at byte {}",
                self.pos
            )));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Data("checkpoint size overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

impl MsMdaModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let c = self.config();
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u64(&mut buf, c.input_dim as u64);
        put_u64(&mut buf, c.cfe_dims.len() as u64);
        for &d in &c.cfe_dims {
            put_u64(&mut buf, d as u64);
        }
        put_u64(&mut buf, c.dsfe_dim as u64);
        put_u64(&mut buf, c.num_classes as u64);
        put_u64(&mut buf, c.num_branches as u64);
        put_f64(&mut buf, c.leaky_slope);
        put_u64(&mut buf, c.rng_seed);

        // visit_params needs &mut; traverse a clone to keep this method shared
        let mut copy = self.clone();
        let mut values = Vec::new();
        copy.visit_params(&mut |p| values.extend_from_slice(p.value.data()));
        put_u64(&mut buf, values.len() as u64);
        for v in values {
            put_f64(&mut buf, v);
        }
        buf
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Data("not a checkpoint: bad magic".into()));
        }
        let input_dim = r.usize()?;
        let n_cfe = r.usize()?;
        if n_cfe > bytes.len() / 8 {
            return Err(Error::Data("checkpoint header is corrupt".into()));
        }
        let cfe_dims = (0..n_cfe).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let config = ModelConfig {
            input_dim,
            cfe_dims,
            dsfe_dim: r.usize()?,
            num_classes: r.usize()?,
            num_branches: r.usize()?,
            leaky_slope: r.f64()?,
            rng_seed: r.u64()?,
        };
        config
            .validate()
            .map_err(|e| Error::Data(format!("checkpoint config invalid: {e}")))?;
        let mut model = MsMdaModel::new(config)?;
        let n_values = r.usize()?;
        let expected = model.num_parameters();
        if n_values != expected {
            return Err(Error::Data(format!(
                "checkpoint holds {n_values} values, architecture needs {expected}"
            )));
        }
        let values = (0..n_values).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Data(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("checkpoint contains non-finite values".into()));
        }
        let mut it = values.into_iter();
        model.visit_params(&mut |p| {
            for slot in p.value.data_mut() {
                *slot = it.next().expect("count checked");
            }
        });
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}
