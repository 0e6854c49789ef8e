//! Parameter checkpoints: `IRGNNCKP`, u32 version, u32-length JSON header,
//! then every tensor as little-endian f64 in visiting order.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{GnnDims, GnnParams, Layer, Linear};
use crate::graph::{NodeKind, Relation};
use crate::store::{write_atomic, Reader, StoreError, Writer};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IRGNNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    dims: GnnDims,
    widths: [usize; 6],
    head_widths: [usize; 6],
    spec_digest: String,
    seed: u64,
    relations: Vec<Relation>,
    classes: Option<usize>,
    tensors: Vec<(String, usize)>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 || !s.is_ascii() {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

pub fn encode_params(p: &GnnParams) -> Result<Vec<u8>, StoreError> {
    let header = Header {
        dims: p.dims,
        widths: p.widths,
        head_widths: NodeKind::ALL.map(|k| p.heads[k.index()].w.ncols()),
        spec_digest: hex(&p.spec_digest),
        seed: p.seed,
        relations: p.relations(),
        classes: p.classifier.as_ref().map(|c| c.w.ncols()),
        tensors: p.shapes(),
    };
    let mut w = Writer::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    let json = serde_json::to_string(&header).expect("header serializes");
    w.blob(json.as_bytes(), "checkpoint header")?;
    p.for_each(|_, t| t.iter().for_each(|&x| w.f64(x)));
    Ok(w.buf)
}

fn skeleton(h: &Header) -> GnnParams {
    let d = h.dims;
    let lin = |r, c| Linear {
        w: Array2::zeros((r, c)),
        b: Array1::zeros(c),
    };
    let layers = (0..2)
        .map(|l| {
            let (din, dout) = super::layer_dims(d, l);
            Layer {
                self_loop: (0..6).map(|_| lin(din, dout)).collect(),
                messages: h
                    .relations
                    .iter()
                    .map(|&r| (r, lin(din, dout)))
                    .collect::<BTreeMap<_, _>>(),
            }
        })
        .collect();
    GnnParams {
        dims: d,
        widths: h.widths,
        spec_digest: [0; 32],
        seed: h.seed,
        input: h.widths.iter().map(|&w| Array2::zeros((w, d.h1))).collect(),
        layers,
        pool: Array2::zeros((d.h2, d.embed)),
        mask: NodeKind::ALL
            .iter()
            .map(|&k| {
                let n = if super::maskable(k) {
                    h.widths[k.index()]
                } else {
                    0
                };
                Array1::zeros(n)
            })
            .collect(),
        heads: h.head_widths.iter().map(|&n| lin(d.h2, n)).collect(),
        classifier: h.classes.map(|c| lin(d.embed, c)),
    }
}

pub fn decode_params(data: &[u8]) -> Result<GnnParams, StoreError> {
    let mut r = Reader::new(data);
    if r.header(CHECKPOINT_MAGIC)? != CHECKPOINT_VERSION {
        return Err(StoreError::Format("unsupported version".into()));
    }
    let header: Header = serde_json::from_slice(r.blob()?)
        .map_err(|e| StoreError::Format(format!("bad checkpoint header: {e}")))?;
    let digest = unhex(&header.spec_digest).ok_or_else(|| StoreError::Format("bad spec digest".into()))?;
    let mut p = skeleton(&header);
    p.spec_digest = digest;
    if p.shapes() != header.tensors {
        return Err(StoreError::Format("tensor table does not match dims".into()));
    }
    let mut err = None;
    p.for_each_mut(|_, t| {
        for x in t.iter_mut() {
            match r.f64() {
                Ok(v) => *x = v,
                Err(e) => {
                    err.get_or_insert(e);
                    return;
                }
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    r.finish()?;
    Ok(p)
}

pub fn save_params(p: &GnnParams, path: &Path) -> Result<(), StoreError> {
    write_atomic(path, &encode_params(p)?)
}

pub fn load_params(path: &Path) -> Result<GnnParams, StoreError> {
    let data = std::fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode_params(&data)
}
