//! Model checkpoint format.
//!
//! A checkpoint is a single binary file: an architecture header followed by
//! all weights and biases as little-endian 64-bit floats in layer order. A
//! JSON sidecar (`<path>.json`) records the same header for human inspection.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use super::model::{Activation, DenseLayer, ModelParams};
use super::Matrix;
use crate::error::{Error, Result};

pub(crate) const MODEL_MAGIC: &[u8; 8] = b"MAIRMDL1";

/// Architecture header mirrored into the JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ModelHeader {
    /// `(in_dim, out_dim)` per layer.
    pub layers: Vec<(u32, u32)>,
    pub activation: String,
    pub classes: u32,
}

impl ModelHeader {
    pub fn of(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| (l.in_dim() as u32, l.out_dim() as u32))
                .collect(),
            activation: "relu".to_string(),
            classes: params.num_classes() as u32,
        }
    }
}

/// Byte-cursor that reports the offset of any malformed read.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse {
                offset: self.pos as u64,
                message: format!("unexpected end of file while reading {what}"),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8, what)?))
    }

    pub fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8, what)?;
        let mut out = vec![0.0; n];
        LittleEndian::read_f64_into(bytes, &mut out);
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let got = self.take(8, "magic")?;
        if got != expected {
            return Err(Error::Parse {
                offset: 0,
                message: format!("bad magic {:02x?}, expected {:02x?}", got, expected),
            });
        }
        Ok(())
    }
}

pub(crate) fn write_header(out: &mut Vec<u8>, params: &ModelParams) {
    let mut b4 = [0u8; 4];
    LittleEndian::write_u32(&mut b4, params.layers.len() as u32);
    out.extend_from_slice(&b4);
    for layer in &params.layers {
        LittleEndian::write_u32(&mut b4, layer.in_dim() as u32);
        out.extend_from_slice(&b4);
        LittleEndian::write_u32(&mut b4, layer.out_dim() as u32);
        out.extend_from_slice(&b4);
    }
    out.push(params.activation.code());
}

pub(crate) fn write_f64s(out: &mut Vec<u8>, values: &[f64]) {
    let mut b8 = [0u8; 8];
    for &v in values {
        LittleEndian::write_f64(&mut b8, v);
        out.extend_from_slice(&b8);
    }
}

pub(crate) fn write_param_values(out: &mut Vec<u8>, params: &ModelParams) {
    for layer in &params.layers {
        write_f64s(out, &layer.weights.data);
        write_f64s(out, &layer.bias);
    }
}

/// Reads `(n_layers, dims, activation)` and validates basic sanity.
pub(crate) fn read_header(r: &mut Reader) -> Result<(Vec<(usize, usize)>, Activation)> {
    let n_layers = r.u32("layer count")? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::Parse {
            offset: r.offset(),
            message: format!("implausible layer count {n_layers}"),
        });
    }
    let mut dims = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let in_dim = r.u32("layer input width")? as usize;
        let out_dim = r.u32("layer output width")? as usize;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Parse {
                offset: r.offset(),
                message: format!("layer {i} has zero width"),
            });
        }
        dims.push((in_dim, out_dim));
    }
    for (i, pair) in dims.windows(2).enumerate() {
        if pair[0].1 != pair[1].0 {
            return Err(Error::Parse {
                offset: r.offset(),
                message: format!("layer {} and {} widths do not chain", i, i + 1),
            });
        }
    }
    let activation = Activation::from_code(r.u8("activation code")?).map_err(|_| Error::Parse {
        offset: r.offset(),
        message: "unknown activation code".into(),
    })?;
    Ok((dims, activation))
}

pub(crate) fn read_param_values(
    r: &mut Reader,
    dims: &[(usize, usize)],
    activation: Activation,
) -> Result<ModelParams> {
    let mut layers = Vec::with_capacity(dims.len());
    for &(in_dim, out_dim) in dims {
        let data = r.f64_vec(in_dim * out_dim, "weights")?;
        let bias = r.f64_vec(out_dim, "bias")?;
        let weights = Matrix::new(out_dim, in_dim, data).map_err(|e| Error::Parse {
            offset: r.offset(),
            message: e.to_string(),
        })?;
        layers.push(DenseLayer { weights, bias });
    }
    ModelParams::new(layers, activation).map_err(|e| Error::Parse {
        offset: r.offset(),
        message: e.to_string(),
    })
}

/// Writes a model checkpoint plus its JSON sidecar, atomically.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    write_header(&mut out, params);
    write_param_values(&mut out, params);
    write_atomic(path, &out)?;

    let sidecar = serde_json::to_string_pretty(&ModelHeader::of(params))?;
    write_atomic(&sidecar_path(path), sidecar.as_bytes())?;
    Ok(())
}

/// Loads a model checkpoint written by [`save_model`].
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let buf = fs::read(path)?;
    let mut r = Reader::new(&buf);
    r.magic(MODEL_MAGIC)?;
    let (dims, activation) = read_header(&mut r)?;
    let params = read_param_values(&mut r, &dims, activation)?;
    if r.offset() != buf.len() as u64 {
        return Err(Error::Parse {
            offset: r.offset(),
            message: format!("{} trailing bytes", buf.len() as u64 - r.offset()),
        });
    }
    Ok(params)
}

pub(crate) fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    std::path::PathBuf::from(name)
}

/// Write-temp-then-rename so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
