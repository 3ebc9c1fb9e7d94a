//! Checksummed binary model files.
//!
//! Layout: magic `EMO1`, version u16 LE, kind u8 (0 dense, 1 conv), a
//! label table (count u8, then u8-length-prefixed UTF-8 strings), a
//! kind-specific layer table, every parameter as little-endian f32 in
//! `flat_params` order, and a trailing CRC32 of all preceding bytes.
//!
//! Loading parses the declared structure first and checks the checksum
//! afterwards, so a short file reports `TruncatedFile` rather than a
//! bogus checksum failure; bit corruption in an intact-length file
//! reports `ChecksumMismatch`.

use std::path::Path;

use thiserror::Error;

use super::{Activation, CnnModel, CnnShape, DenseLayer, MlpModel, Network, NnError};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: [u8; 4] = *b"EMO1";
pub const MODEL_VERSION: u16 = 1;

const KIND_MLP: u8 = 0;
const KIND_CNN: u8 = 1;
const ACT_RELU: u8 = 0;
const ACT_SOFTMAX: u8 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u16),
    #[error("model file ends before its declared content")]
    TruncatedFile,
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<NnError> for ModelIoError {
    fn from(e: NnError) -> Self {
        ModelIoError::InvalidModel(e.to_string())
    }
}

/// Either trained architecture, as stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel<T> {
    Mlp(MlpModel<T>),
    Cnn(CnnModel<T>),
}

impl<T: Scalar> AnyModel<T> {
    pub fn class_labels(&self) -> &[String] {
        match self {
            AnyModel::Mlp(m) => m.class_labels(),
            AnyModel::Cnn(m) => m.class_labels(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            AnyModel::Mlp(m) => m.num_params(),
            AnyModel::Cnn(m) => m.num_params(),
        }
    }

    /// One-line human description for the inspect command.
    pub fn summary(&self) -> String {
        match self {
            AnyModel::Mlp(m) => {
                let dims: Vec<String> = std::iter::once(m.input_dim())
                    .chain(m.layers().iter().map(|l| l.out_dim))
                    .map(|d| d.to_string())
                    .collect();
                format!(
                    "dense {} | dropout {:?} | labels {:?} | {} parameters",
                    dims.join("->"),
                    m.dropout_rates(),
                    m.class_labels(),
                    m.num_params()
                )
            }
            AnyModel::Cnn(m) => {
                let s = m.shape();
                format!(
                    "conv grid {} | {} filters, kernel {} | pooled {} | dropout {} | labels {:?} | {} parameters",
                    s.grid,
                    s.filters,
                    s.kernel,
                    s.pooled,
                    m.dropout_rate(),
                    m.class_labels(),
                    m.num_params()
                )
            }
        }
    }
}

/// IEEE CRC32 (reflected, polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

pub fn save_model<T: Scalar>(model: &AnyModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    match model {
        AnyModel::Mlp(m) => {
            out.push(KIND_MLP);
            write_labels(&mut out, m.class_labels());
            out.push(m.layers().len() as u8);
            for (i, layer) in m.layers().iter().enumerate() {
                out.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
                out.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
                out.push(match layer.activation {
                    Activation::Relu => ACT_RELU,
                    Activation::Softmax => ACT_SOFTMAX,
                });
                let rate = m.dropout_rates().get(i).copied().unwrap_or(0.0);
                out.extend_from_slice(&(rate as f32).to_le_bytes());
            }
            write_params(&mut out, &m.flat_params());
        }
        AnyModel::Cnn(m) => {
            out.push(KIND_CNN);
            write_labels(&mut out, m.class_labels());
            let s = m.shape();
            out.extend_from_slice(&(s.grid as u32).to_le_bytes());
            out.extend_from_slice(&(s.filters as u32).to_le_bytes());
            out.extend_from_slice(&(s.kernel as u32).to_le_bytes());
            out.extend_from_slice(&(m.dropout_rate() as f32).to_le_bytes());
            out.extend_from_slice(&(m.dense().in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(m.dense().out_dim as u32).to_le_bytes());
            write_params(&mut out, &m.flat_params());
        }
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn load_model<T: Scalar>(bytes: &[u8]) -> Result<AnyModel<T>, ModelIoError> {
    let mut r = ByteReader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC.as_slice() {
        return Err(ModelIoError::BadMagic);
    }
    let version = r.u16_le()?;
    if version != MODEL_VERSION {
        return Err(ModelIoError::UnsupportedVersion(version));
    }
    let kind = r.u8()?;
    let labels = read_labels(&mut r)?;

    // Structural parse of the layer table, then the parameter block.
    let parsed = match kind {
        KIND_MLP => ParsedModel::Mlp(parse_mlp_header(&mut r)?),
        KIND_CNN => ParsedModel::Cnn(parse_cnn_header(&mut r)?),
        other => {
            return Err(ModelIoError::InvalidModel(format!(
                "unknown model kind {other}"
            )))
        }
    };
    let param_count = parsed.param_count();
    let params = read_params::<T>(&mut r, param_count)?;
    let checksum_start = r.pos;
    let stored = r.u32_le()?;
    if r.pos != bytes.len() {
        return Err(ModelIoError::InvalidModel(
            "trailing data after the checksum".into(),
        ));
    }
    if stored != crc32(&bytes[..checksum_start]) {
        return Err(ModelIoError::ChecksumMismatch);
    }

    // Semantic validation happens in the constructors.
    match parsed {
        ParsedModel::Mlp(header) => {
            let mut layers = Vec::with_capacity(header.layers.len());
            let mut off = 0;
            let mut dropout_rates = Vec::new();
            for (i, &(in_dim, out_dim, act)) in header.layers.iter().enumerate() {
                let w = out_dim * in_dim;
                let layer = DenseLayer {
                    in_dim,
                    out_dim,
                    weights: params[off..off + w].to_vec(),
                    biases: params[off + w..off + w + out_dim].to_vec(),
                    activation: act,
                };
                off += w + out_dim;
                if i + 1 < header.layers.len() {
                    dropout_rates.push(header.dropouts[i]);
                } else if header.dropouts[i] != 0.0 {
                    return Err(ModelIoError::InvalidModel(
                        "dropout declared after the output layer".into(),
                    ));
                }
                layers.push(layer);
            }
            Ok(AnyModel::Mlp(MlpModel::from_parts(
                layers,
                dropout_rates,
                labels,
            )?))
        }
        ParsedModel::Cnn(header) => {
            let shape = CnnShape::for_grid(header.grid, header.kernel, header.filters)?;
            if shape.flat != header.dense_in {
                return Err(ModelIoError::InvalidModel(format!(
                    "dense input {} does not match flattened width {}",
                    header.dense_in, shape.flat
                )));
            }
            let conv_w = header.filters * header.kernel * header.kernel;
            let dense_w = header.dense_out * header.dense_in;
            let mut off = 0;
            let conv_weights = params[off..off + conv_w].to_vec();
            off += conv_w;
            let conv_biases = params[off..off + header.filters].to_vec();
            off += header.filters;
            let dense = DenseLayer {
                in_dim: header.dense_in,
                out_dim: header.dense_out,
                weights: params[off..off + dense_w].to_vec(),
                biases: params[off + dense_w..].to_vec(),
                activation: Activation::Softmax,
            };
            Ok(AnyModel::Cnn(CnnModel::from_parts(
                shape,
                conv_weights,
                conv_biases,
                dense,
                header.dropout,
                labels,
            )?))
        }
    }
}

pub fn save_model_file<T: Scalar>(path: &Path, model: &AnyModel<T>) -> Result<(), ModelIoError> {
    Ok(std::fs::write(path, save_model(model))?)
}

pub fn load_model_file<T: Scalar>(path: &Path) -> Result<AnyModel<T>, ModelIoError> {
    load_model(&std::fs::read(path)?)
}

struct MlpHeader {
    layers: Vec<(usize, usize, Activation)>,
    dropouts: Vec<f64>,
}

struct CnnHeader {
    grid: usize,
    filters: usize,
    kernel: usize,
    dropout: f64,
    dense_in: usize,
    dense_out: usize,
}

enum ParsedModel {
    Mlp(MlpHeader),
    Cnn(CnnHeader),
}

impl ParsedModel {
    fn param_count(&self) -> usize {
        match self {
            ParsedModel::Mlp(h) => h
                .layers
                .iter()
                .map(|&(i, o, _)| o * i + o)
                .sum(),
            ParsedModel::Cnn(h) => {
                h.filters * h.kernel * h.kernel
                    + h.filters
                    + h.dense_out * h.dense_in
                    + h.dense_out
            }
        }
    }
}

/// Upper bound on any declared dimension; keeps parameter counts from a
/// corrupt header within addressable range before anything is allocated.
const MAX_DIM: usize = 1 << 24;

fn checked_dim(raw: u32) -> Result<usize, ModelIoError> {
    let dim = raw as usize;
    if dim > MAX_DIM {
        return Err(ModelIoError::InvalidModel(format!(
            "implausible dimension {dim}"
        )));
    }
    Ok(dim)
}

fn parse_mlp_header(r: &mut ByteReader) -> Result<MlpHeader, ModelIoError> {
    let count = r.u8()? as usize;
    if count == 0 {
        return Err(ModelIoError::InvalidModel("no layers".into()));
    }
    let mut layers = Vec::with_capacity(count);
    let mut dropouts = Vec::with_capacity(count);
    for _ in 0..count {
        let in_dim = checked_dim(r.u32_le()?)?;
        let out_dim = checked_dim(r.u32_le()?)?;
        let act = match r.u8()? {
            ACT_RELU => Activation::Relu,
            ACT_SOFTMAX => Activation::Softmax,
            other => {
                return Err(ModelIoError::InvalidModel(format!(
                    "unknown activation tag {other}"
                )))
            }
        };
        let rate = r.f32_le()? as f64;
        layers.push((in_dim, out_dim, act));
        dropouts.push(rate);
    }
    Ok(MlpHeader { layers, dropouts })
}

fn parse_cnn_header(r: &mut ByteReader) -> Result<CnnHeader, ModelIoError> {
    Ok(CnnHeader {
        grid: checked_dim(r.u32_le()?)?,
        filters: checked_dim(r.u32_le()?)?,
        kernel: checked_dim(r.u32_le()?)?,
        dropout: r.f32_le()? as f64,
        dense_in: checked_dim(r.u32_le()?)?,
        dense_out: checked_dim(r.u32_le()?)?,
    })
}

fn write_labels(out: &mut Vec<u8>, labels: &[String]) {
    assert!(labels.len() <= 255, "label table holds at most 255 entries");
    out.push(labels.len() as u8);
    for label in labels {
        assert!(label.len() <= 255, "label exceeds the u8 length prefix");
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
}

fn read_labels(r: &mut ByteReader) -> Result<Vec<String>, ModelIoError> {
    let count = r.u8()? as usize;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u8()? as usize;
        let raw = r.take(len)?;
        let label = std::str::from_utf8(raw)
            .map_err(|_| ModelIoError::InvalidModel("label is not UTF-8".into()))?;
        labels.push(label.to_string());
    }
    Ok(labels)
}

fn write_params<T: Scalar>(out: &mut Vec<u8>, params: &[T]) {
    for &p in params {
        out.extend_from_slice(&(p.to_f64() as f32).to_le_bytes());
    }
}

fn read_params<T: Scalar>(r: &mut ByteReader, count: usize) -> Result<Vec<T>, ModelIoError> {
    let raw = r.take(count * 4)?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| T::from_f64(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelIoError::TruncatedFile);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ModelIoError> {
        Ok(self.take(1)?[0])
    }

    fn u16_le(&mut self) -> Result<u16, ModelIoError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32_le(&mut self) -> Result<u32, ModelIoError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32_le(&mut self) -> Result<f32, ModelIoError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
