//! Versioned binary network files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "QANN"
//! version      u32      currently 1
//! n_layers     u32
//! dims         (n_layers + 1) x u32   input dim, then each layer's output dim
//! activations  n_layers x u8          0 = leaky ReLU, 1 = sigmoid, 2 = identity
//! per layer    out*in x f64 weights (row-major), then out x f64 bias
//! ```

use std::fs;
use std::path::Path;

use super::{Activation, DenseLayer, DenseNetwork};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QANN";
pub const VERSION: u32 = 1;

pub fn encode(net: &DenseNetwork) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for d in net.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for l in net.layers() {
        out.push(l.activation.tag());
    }
    for l in net.layers() {
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.buf.len() < n {
            return Err("unexpected end of data".into());
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<DenseNetwork, String> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(format!("implausible layer count {n_layers}"));
    }
    let dims =
        (0..=n_layers).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
    let acts = r
        .take(n_layers)?
        .iter()
        .map(|&t| Activation::from_tag(t).ok_or(format!("unknown activation tag {t}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for (d, act) in dims.windows(2).zip(acts) {
        let (in_dim, out_dim) = (d[0], d[1]);
        let weights = (0..in_dim * out_dim).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        let bias = (0..out_dim).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        layers.push(DenseLayer { in_dim, out_dim, weights, bias, activation: act });
    }
    if !r.buf.is_empty() {
        return Err(format!("{} trailing bytes", r.buf.len()));
    }
    DenseNetwork::from_layers(layers).map_err(|e| e.to_string())
}

pub fn decode(bytes: &[u8]) -> Result<DenseNetwork> {
    decode_inner(bytes).map_err(|message| Error::Format { path: "<memory>".into(), message })
}

pub fn save(net: &DenseNetwork, path: &Path) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<DenseNetwork> {
    let bytes = fs::read(path)?;
    decode_inner(&bytes).map_err(|message| Error::Format { path: path.to_path_buf(), message })
}
