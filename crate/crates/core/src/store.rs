//! The `.irg` single-file graph container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8   "IRGRAPH\0"
//! version      u32
//! spec         u32 length + FeatureSpec JSON
//! provenance   u32 length + source name, then 32-byte SHA-256
//! ablation     u8 flag; if 1: u8 target class (0 node, 1 edge), u8 kind,
//!              u16 bitmask of mirrored edge kinds
//! node counts  6 x u32, node-kind order
//! features     per kind, count x width f32, row-major
//! relations    u32 count, then per relation: u8 edge, u8 src, u8 dst,
//!              u8 mirror, u32 edge count, (u32 src, u32 dst) pairs
//! ```
//!
//! The file must be consumed exactly; any short or trailing section is a
//! length mismatch.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::graph::{
    AblationRecord, AblationTarget, EdgeKind, FeatureSpec, HeteroGraph, NodeKind, Provenance, Relation,
};

pub const GRAPH_MAGIC: &[u8; 8] = b"IRGRAPH\0";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("format error: {0}")]
    Format(String),
    #[error("{0} does not fit in a u32")]
    SerializationOverflow(String),
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn format(msg: &str) -> Self {
        StoreError::Format(msg.to_string())
    }
}

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn len_u32(&mut self, n: usize, what: &str) -> Result<(), StoreError> {
        let n = u32::try_from(n).map_err(|_| StoreError::SerializationOverflow(what.into()))?;
        self.u32(n);
        Ok(())
    }

    pub fn blob(&mut self, b: &[u8], what: &str) -> Result<(), StoreError> {
        self.len_u32(b.len(), what)?;
        self.bytes(b);
        Ok(())
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, at: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| StoreError::format("length mismatch"))?;
        let out = &self.data[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], StoreError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, StoreError> {
        self.array().map(u16::from_le_bytes)
    }

    pub fn u32(&mut self) -> Result<u32, StoreError> {
        self.array().map(u32::from_le_bytes)
    }

    pub fn f32(&mut self) -> Result<f32, StoreError> {
        self.array().map(f32::from_le_bytes)
    }

    pub fn f64(&mut self) -> Result<f64, StoreError> {
        self.array().map(f64::from_le_bytes)
    }

    pub fn blob(&mut self) -> Result<&'a [u8], StoreError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<&'a str, StoreError> {
        std::str::from_utf8(self.blob()?).map_err(|_| StoreError::format("invalid UTF-8"))
    }

    /// Checks the magic tag and returns the version field.
    pub fn header(&mut self, magic: &[u8; 8]) -> Result<u32, StoreError> {
        if self.data.len() < 8 || &self.data[..8] != magic {
            return Err(StoreError::format("bad magic"));
        }
        self.at = 8;
        self.u32()
    }

    pub fn finish(&self) -> Result<(), StoreError> {
        if self.at == self.data.len() {
            Ok(())
        } else {
            Err(StoreError::format("length mismatch"))
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| StoreError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| StoreError::io(path, e))?;
    tmp.persist(path).map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}

pub fn encode_graph(g: &HeteroGraph) -> Result<Vec<u8>, StoreError> {
    let mut w = Writer::new();
    w.bytes(GRAPH_MAGIC);
    w.u32(GRAPH_VERSION);
    let spec = serde_json::to_string(&g.feature_spec).expect("spec serializes");
    w.blob(spec.as_bytes(), "feature spec")?;
    w.blob(g.provenance.source.as_bytes(), "source name")?;
    w.bytes(&g.provenance.digest);
    match &g.ablation {
        None => w.u8(0),
        Some(a) => {
            w.u8(1);
            match a.target {
                AblationTarget::Node(k) => {
                    w.u8(0);
                    w.u8(k.index() as u8);
                }
                AblationTarget::Edge(k) => {
                    w.u8(1);
                    w.u8(k.index() as u8);
                }
            }
            w.u16(a.mirrored.iter().fold(0, |m, k| m | (1 << k.index())));
        }
    }
    for k in NodeKind::ALL {
        w.len_u32(g.count(k), "node count")?;
    }
    for k in NodeKind::ALL {
        let m = g.features(k);
        if m.ncols() != g.feature_spec.width(k) {
            return Err(StoreError::Format(format!(
                "{k} features do not match the feature spec width"
            )));
        }
        for &x in m.iter() {
            w.f32(x);
        }
    }
    w.len_u32(g.edges.len(), "relation count")?;
    for (rel, list) in &g.edges {
        w.u8(rel.edge.index() as u8);
        w.u8(rel.src.index() as u8);
        w.u8(rel.dst.index() as u8);
        w.u8(rel.mirror as u8);
        w.len_u32(list.len(), "edge count")?;
        for &(s, d) in list {
            w.u32(s);
            w.u32(d);
        }
    }
    Ok(w.buf)
}

pub fn decode_graph(data: &[u8]) -> Result<HeteroGraph, StoreError> {
    let mut r = Reader::new(data);
    let version = r.header(GRAPH_MAGIC)?;
    if version != GRAPH_VERSION {
        return Err(StoreError::format("unsupported version"));
    }
    let spec = FeatureSpec::from_json(r.str()?).map_err(|e| StoreError::Format(e.to_string()))?;
    let source = r.str()?.to_string();
    let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let ablation = match r.u8()? {
        0 => None,
        1 => {
            let class = r.u8()?;
            let k = r.u8()? as usize;
            let target = match class {
                0 => NodeKind::from_index(k).map(AblationTarget::Node),
                1 => EdgeKind::from_index(k).map(AblationTarget::Edge),
                _ => None,
            }
            .ok_or_else(|| StoreError::format("bad ablation target"))?;
            let mask = r.u16()?;
            if mask >> EdgeKind::ALL.len() != 0 {
                return Err(StoreError::format("bad mirror mask"));
            }
            let mirrored = EdgeKind::ALL
                .into_iter()
                .filter(|k| mask & (1 << k.index()) != 0)
                .collect();
            Some(AblationRecord { target, mirrored })
        }
        _ => return Err(StoreError::format("bad ablation flag")),
    };
    let mut counts = [0usize; 6];
    for c in counts.iter_mut() {
        *c = r.u32()? as usize;
    }
    let mut nodes = Vec::with_capacity(6);
    for k in NodeKind::ALL {
        let width = spec.width(k);
        let n = counts[k.index()];
        let bytes = r.take(
            n.checked_mul(width)
                .and_then(|x| x.checked_mul(4))
                .ok_or_else(|| StoreError::format("length mismatch"))?,
        )?;
        let vals: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        nodes.push(Array2::from_shape_vec((n, width), vals).expect("shape checked"));
    }
    let nrel = r.u32()?;
    let known = Relation::all();
    let mut edges = BTreeMap::new();
    for _ in 0..nrel {
        let edge = EdgeKind::from_index(r.u8()? as usize);
        let src = NodeKind::from_index(r.u8()? as usize);
        let dst = NodeKind::from_index(r.u8()? as usize);
        let mirror = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(StoreError::format("bad relation")),
        };
        let (Some(edge), Some(src), Some(dst)) = (edge, src, dst) else {
            return Err(StoreError::format("bad relation"));
        };
        let rel = Relation {
            edge,
            src,
            dst,
            mirror,
        };
        if !known.contains(&rel) {
            return Err(StoreError::format("bad relation"));
        }
        let n = r.u32()? as usize;
        let bytes = r.take(
            n.checked_mul(8)
                .ok_or_else(|| StoreError::format("length mismatch"))?,
        )?;
        let list: Vec<(u32, u32)> = bytes
            .chunks_exact(8)
            .map(|c| {
                (
                    u32::from_le_bytes(c[..4].try_into().unwrap()),
                    u32::from_le_bytes(c[4..].try_into().unwrap()),
                )
            })
            .collect();
        let (ns, nd) = (counts[src.index()] as u32, counts[dst.index()] as u32);
        if list.iter().any(|&(a, b)| a >= ns || b >= nd) {
            return Err(StoreError::format("edge endpoint out of range"));
        }
        if list.is_empty() || edges.insert(rel, list).is_some() {
            return Err(StoreError::format("bad relation"));
        }
    }
    r.finish()?;
    Ok(HeteroGraph {
        nodes,
        edges,
        feature_spec: spec,
        provenance: Provenance { source, digest },
        ablation,
    })
}

pub fn save_graph(g: &HeteroGraph, path: &Path) -> Result<(), StoreError> {
    write_atomic(path, &encode_graph(g)?)
}

pub fn load_graph(path: &Path) -> Result<HeteroGraph, StoreError> {
    let data = std::fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode_graph(&data)
}
