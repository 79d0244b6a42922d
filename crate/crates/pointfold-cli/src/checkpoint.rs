//! Versioned binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8  b"PFCKPT01"
//! k             u32      encoder neighbor count
//! include_self  u8
//! relu_after    u8
//! graph_layers  u8
//! point_widths  u32 count, then u32 each
//! graph_widths  u32 count, then u32 each
//! head_widths   u32 count, then u32 each
//! decoder_kind  u8       0 = folding, 1 = fully-connected
//!   folding: grid_dim u8, grid_mode u8 (0 regular / 1 uniform), grid_m u64,
//!            extent f64, folds u32, hidden u32, codeword u32,
//!            grid matrix (rows u64, cols u64, f64 data)
//!   fc:      out_points u64
//! tensor_count  u32
//!   per tensor: name_len u16, name utf-8, rows u64, cols u64, f64 data
//! ```
//!
//! Values are raw IEEE-754 bits, so save → load → forward is bitwise
//! identical to the original model.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pointfold::grid::{GridMode, GridSpec};
use pointfold::matrix::Matrix;
use pointfold::model::{
    AutoEncoder, Decoder, EncoderConfig, EncoderParams, FcDecoder, FoldingConfig, FoldingDecoder,
};

use crate::error::{format_err, io_err, CliError, Result};

const MAGIC: &[u8; 8] = b"PFCKPT01";

pub fn save(model: &AutoEncoder, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    let enc = &model.encoder.config;
    put_u32(&mut out, enc.k as u32);
    out.push(enc.include_self as u8);
    out.push(enc.relu_after_kmap as u8);
    out.push(enc.use_graph_layers as u8);
    put_widths(&mut out, &enc.point_widths);
    put_widths(&mut out, &enc.graph_widths);
    put_widths(&mut out, &enc.head_widths);

    match &model.decoder {
        Decoder::Folding(d) => {
            out.push(0u8);
            out.push(d.config.grid.dim as u8);
            out.push(match d.config.grid.mode {
                GridMode::Regular => 0u8,
                GridMode::UniformRandom => 1u8,
            });
            put_u64(&mut out, d.config.grid.m as u64);
            put_f64(&mut out, d.config.grid.extent);
            put_u32(&mut out, d.config.folds as u32);
            put_u32(&mut out, d.config.hidden as u32);
            put_u32(&mut out, d.config.codeword_len as u32);
            put_matrix(&mut out, &d.grid);
        }
        Decoder::Fc(d) => {
            out.push(1u8);
            put_u64(&mut out, d.out_points as u64);
        }
    }

    let named = model.named_params();
    put_u32(&mut out, named.len() as u32);
    for (name, matrix, _) in &named {
        let bytes = name.as_bytes();
        put_u16(&mut out, bytes.len() as u16);
        out.extend_from_slice(bytes);
        put_matrix(&mut out, matrix);
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<AutoEncoder> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let magic = r.take(8)?;
    if magic != MAGIC {
        return Err(format_err(path, 0, "not a pointfold checkpoint"));
    }
    let k = r.u32()? as usize;
    let include_self = r.u8()? != 0;
    let relu_after_kmap = r.u8()? != 0;
    let use_graph_layers = r.u8()? != 0;
    let point_widths = r.widths()?;
    let graph_widths = r.widths()?;
    let head_widths = r.widths()?;
    let enc_config = EncoderConfig {
        k,
        include_self,
        relu_after_kmap,
        use_graph_layers,
        point_widths,
        graph_widths,
        head_widths,
    };

    let decoder_kind = r.u8()?;
    let decoder = match decoder_kind {
        0 => {
            let dim = r.u8()? as usize;
            let mode = match r.u8()? {
                0 => GridMode::Regular,
                1 => GridMode::UniformRandom,
                other => {
                    return Err(format_err(path, 0, format!("unknown grid mode {other}")))
                }
            };
            let m = r.u64()? as usize;
            let extent = r.f64()?;
            let folds = r.u32()? as usize;
            let hidden = r.u32()? as usize;
            let codeword_len = r.u32()? as usize;
            let grid = r.matrix()?;
            let config = FoldingConfig {
                grid: GridSpec { dim, mode, m, extent },
                folds,
                hidden,
                codeword_len,
            };
            let mut d = FoldingDecoder::init(config, &mut pointfold::rng::stream(0, "ckpt/zero"))
                .map_err(CliError::Engine)?;
            if grid.shape() != d.grid.shape() {
                return Err(format_err(path, 0, "grid shape mismatch"));
            }
            d.grid = grid;
            Decoder::Folding(d)
        }
        1 => {
            let out_points = r.u64()? as usize;
            let codeword_len = *enc_config.head_widths.last().unwrap_or(&0);
            Decoder::Fc(FcDecoder::init(
                codeword_len,
                out_points,
                &mut pointfold::rng::stream(0, "ckpt/zero"),
            ))
        }
        other => return Err(format_err(path, 0, format!("unknown decoder kind {other}"))),
    };

    let encoder = EncoderParams::init(enc_config, &mut pointfold::rng::stream(0, "ckpt/zero"));
    let mut model = AutoEncoder { encoder, decoder };

    let count = r.u32()? as usize;
    let mut tensors: BTreeMap<String, Matrix> = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| format_err(path, 0, "non-utf8 tensor name"))?;
        let matrix = r.matrix()?;
        tensors.insert(name, matrix);
    }

    let mut missing: Option<String> = None;
    let mut mismatched: Option<String> = None;
    model.visit_params_mut(&mut |name, slot, _| {
        match tensors.remove(&name) {
            Some(m) if m.shape() == slot.shape() => *slot = m,
            Some(_) => mismatched = Some(name),
            None => missing = Some(name),
        }
    });
    if let Some(name) = missing {
        return Err(format_err(path, 0, format!("checkpoint missing tensor '{name}'")));
    }
    if let Some(name) = mismatched {
        return Err(format_err(path, 0, format!("tensor '{name}' has wrong shape")));
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(format_err(path, 0, format!("unknown tensor '{extra}'")));
    }
    Ok(model)
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_widths(out: &mut Vec<u8>, widths: &[usize]) {
    put_u32(out, widths.len() as u32);
    for &w in widths {
        put_u32(out, w as u32);
    }
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    put_u64(out, m.rows() as u64);
    put_u64(out, m.cols() as u64);
    for &v in m.data() {
        put_f64(out, v);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(format_err(self.path, 0, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn widths(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(format_err(self.path, 0, "implausible width list"));
        }
        (0..n).map(|_| Ok(self.u32()? as usize)).collect()
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| format_err(self.path, 0, "implausible matrix shape"))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(self.f64()?);
        }
        Matrix::from_vec(rows, cols, data).map_err(CliError::Engine)
    }
}
