//! Node feature layouts and the versioned [`FeatureSpec`] document.
//!
//! Every kind's vector is a concatenation of one-hot (or multi-hot) segments.
//! Vocabularies are closed: the last entry of each list is the catch-all slot
//! that unknown names map to.

use serde::{Deserialize, Serialize};

use super::NodeKind;
use crate::ir::{AttrKind, AttributeSet, Opcode, TypeKind, ValueKind};

pub const FEATURE_SPEC_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("{field} value {value} lies outside every bucket")]
    Overflow { field: &'static str, value: f64 },
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
}

/// Bucket table given by strictly increasing lower bounds. A value falls in
/// the last bucket whose bound it reaches; values below the first bound, or
/// above `max` when set, overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub bounds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl BucketTable {
    pub fn new(bounds: Vec<f64>) -> Self {
        BucketTable { bounds, max: None }
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Bucket index of `v`, or `Err(clamped index)` when it overflows.
    pub fn lookup(&self, v: f64) -> Result<usize, usize> {
        if v.is_nan() {
            return Err(self.bounds.len() - 1);
        }
        if let Some(max) = self.max {
            if v > max {
                return Err(self.bounds.len() - 1);
            }
        }
        match self.bounds.iter().rposition(|&b| v >= b) {
            Some(i) => Ok(i),
            None => Err(0),
        }
    }

    fn check(&self, name: &str) -> Result<(), FeatureError> {
        if self.bounds.is_empty() {
            return Err(FeatureError::InvalidSpec(format!("{name}: no buckets")));
        }
        if self
            .bounds
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(FeatureError::InvalidSpec(format!(
                "{name}: bounds must be strictly increasing"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub version: u32,
    pub opcodes: Vec<String>,
    pub value_kinds: Vec<String>,
    pub type_kinds: Vec<String>,
    pub attributes: Vec<String>,
    /// Instruction alignment in bytes; preceded by an implicit "none" slot.
    pub alignment: BucketTable,
    /// Integer/float bit width; preceded by an implicit "none" slot.
    pub bit_width: BucketTable,
    /// Allocation size in bytes.
    pub size: BucketTable,
    /// Magnitude classes of constant literals. The value segment holds a zero
    /// slot, then one slot per class for negative and for positive values.
    pub magnitude: BucketTable,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        let names = |it: &mut dyn Iterator<Item = &'static str>| it.map(String::from).collect();
        let mut size = vec![0.0];
        size.extend((0..16).map(|e| f64::from(1u32 << e)));
        FeatureSpec {
            version: FEATURE_SPEC_VERSION,
            opcodes: names(&mut Opcode::ALL.iter().map(|o| o.mnemonic())),
            value_kinds: names(&mut ValueKind::ALL.iter().map(|k| value_kind_name(*k))),
            type_kinds: names(&mut TypeKind::ALL.iter().map(|k| type_kind_name(*k))),
            attributes: names(&mut AttrKind::ALL.iter().map(|a| a.keyword())),
            alignment: BucketTable::new(vec![1., 2., 4., 8., 16., 32., 64., 65.]),
            bit_width: BucketTable::new(vec![1., 2., 8., 9., 16., 17., 32., 33., 64., 65., 129.]),
            size: BucketTable::new(size),
            magnitude: BucketTable::new(vec![
                0.0,
                1.0,
                2.0,
                16.0,
                256.0,
                65536.0,
                4294967296.0,
                18446744073709551616.0,
            ]),
        }
    }
}

pub fn value_kind_name(k: ValueKind) -> &'static str {
    match k {
        ValueKind::Argument => "argument",
        ValueKind::Local => "local",
        ValueKind::GlobalVariable => "global_variable",
        ValueKind::FunctionRef => "function_ref",
        ValueKind::ConstantInt => "constant_int",
        ValueKind::ConstantFp => "constant_fp",
        ValueKind::ConstantAggregate => "constant_aggregate",
        ValueKind::Undef => "undef",
        ValueKind::ConstantOther => "constant_other",
    }
}

pub fn type_kind_name(k: TypeKind) -> &'static str {
    match k {
        TypeKind::Void => "void",
        TypeKind::Integer => "integer",
        TypeKind::Float => "float",
        TypeKind::Pointer => "pointer",
        TypeKind::Vector => "vector",
        TypeKind::Array => "array",
        TypeKind::Structure => "structure",
        TypeKind::Function => "function",
        TypeKind::Opaque => "opaque",
    }
}

/// What a node encodes, before bucketing.
#[derive(Debug, Clone, PartialEq)]
pub enum NodePayload {
    Value {
        kind: ValueKind,
        /// Numeric literal of int/float constants.
        numeric: Option<f64>,
    },
    Instruction {
        opcode: Opcode,
        alignment: Option<u32>,
    },
    Type {
        kind: TypeKind,
        bit_width: Option<u32>,
    },
    Size {
        bytes: u64,
    },
    Attributes(AttributeSet),
    Module,
}

impl NodePayload {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodePayload::Value { .. } => NodeKind::Value,
            NodePayload::Instruction { .. } => NodeKind::Instruction,
            NodePayload::Type { .. } => NodeKind::Type,
            NodePayload::Size { .. } => NodeKind::Size,
            NodePayload::Attributes(_) => NodeKind::Attributes,
            NodePayload::Module => NodeKind::Module,
        }
    }
}

fn slot(vocab: &[String], name: &str) -> usize {
    vocab.iter().position(|v| v == name).unwrap_or(vocab.len() - 1)
}

impl FeatureSpec {
    pub fn check(&self) -> Result<(), FeatureError> {
        if self.version != FEATURE_SPEC_VERSION {
            return Err(FeatureError::InvalidSpec(format!(
                "unsupported version {}",
                self.version
            )));
        }
        for (name, v) in [
            ("opcodes", &self.opcodes),
            ("value_kinds", &self.value_kinds),
            ("type_kinds", &self.type_kinds),
            ("attributes", &self.attributes),
        ] {
            if v.is_empty() {
                return Err(FeatureError::InvalidSpec(format!("{name}: empty vocabulary")));
            }
        }
        self.alignment.check("alignment")?;
        self.bit_width.check("bit_width")?;
        self.size.check("size")?;
        self.magnitude.check("magnitude")
    }

    pub fn from_json(text: &str) -> Result<FeatureSpec, FeatureError> {
        let spec: FeatureSpec =
            serde_json::from_str(text).map_err(|e| FeatureError::InvalidSpec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Ordered (field, width) segments of a kind's feature vector.
    pub fn layout(&self, kind: NodeKind) -> Vec<(&'static str, usize)> {
        match kind {
            NodeKind::Value => vec![
                ("value_kind", self.value_kinds.len()),
                ("is_constant", 1),
                ("magnitude", 1 + 2 * self.magnitude.len()),
            ],
            NodeKind::Instruction => vec![
                ("opcode", self.opcodes.len()),
                ("alignment", 1 + self.alignment.len()),
            ],
            NodeKind::Type => vec![
                ("type_kind", self.type_kinds.len()),
                ("bit_width", 1 + self.bit_width.len()),
            ],
            NodeKind::Size => vec![("size", self.size.len())],
            NodeKind::Attributes => vec![("attributes", self.attributes.len())],
            NodeKind::Module => vec![("bias", 1)],
        }
    }

    pub fn width(&self, kind: NodeKind) -> usize {
        self.layout(kind).iter().map(|(_, w)| w).sum()
    }

    /// Width of the categorical field a masked node is trained to recover.
    pub fn target_width(&self, kind: NodeKind) -> usize {
        self.layout(kind)[0].1
    }

    /// Slot of the size bucket for `bytes`, clamping on overflow.
    pub fn size_bucket(&self, bytes: u64) -> usize {
        self.size.lookup(bytes as f64).unwrap_or_else(|c| c)
    }

    /// Value-segment slot for a numeric literal: 0 for zero or no literal,
    /// then negative classes, then positive classes.
    fn magnitude_slot(&self, numeric: Option<f64>) -> Result<usize, usize> {
        let n = self.magnitude.len();
        let v = match numeric {
            None | Some(0.0) => return Ok(0),
            Some(v) => v,
        };
        if v.is_nan() {
            return Ok(2 * n);
        }
        let (base, class) = if v < 0.0 {
            (1, self.magnitude.lookup(-v))
        } else {
            (1 + n, self.magnitude.lookup(v))
        };
        class.map(|c| base + c).map_err(|c| base + c)
    }
}

/// Encodes one node; a value outside every bucket is an error.
pub fn encode_node_features(payload: &NodePayload, spec: &FeatureSpec) -> Result<Vec<f32>, FeatureError> {
    encode(payload, spec, true).map(|(v, _)| v)
}

/// Like [`encode_node_features`] but clamps overflowing values, returning the
/// overflow alongside the vector.
pub(crate) fn encode_clamped(payload: &NodePayload, spec: &FeatureSpec) -> (Vec<f32>, Option<FeatureError>) {
    match encode(payload, spec, false) {
        Ok(r) => r,
        Err(_) => unreachable!("clamping encode never fails"),
    }
}

fn encode(
    payload: &NodePayload,
    spec: &FeatureSpec,
    strict: bool,
) -> Result<(Vec<f32>, Option<FeatureError>), FeatureError> {
    let kind = payload.kind();
    let mut out = vec![0f32; spec.width(kind)];
    let mut overflow = None;
    let mut bucket = |r: Result<usize, usize>, field: &'static str, value: f64| match r {
        Ok(i) => Ok(i),
        Err(_) if strict => Err(FeatureError::Overflow { field, value }),
        Err(i) => {
            overflow = Some(FeatureError::Overflow { field, value });
            Ok(i)
        }
    };
    match payload {
        NodePayload::Value { kind, numeric } => {
            let k = spec.value_kinds.len();
            out[slot(&spec.value_kinds, value_kind_name(*kind))] = 1.0;
            if kind.is_constant() {
                out[k] = 1.0;
            }
            let m = bucket(spec.magnitude_slot(*numeric), "magnitude", numeric.unwrap_or(0.0))?;
            out[k + 1 + m] = 1.0;
        }
        NodePayload::Instruction { opcode, alignment } => {
            let k = spec.opcodes.len();
            out[slot(&spec.opcodes, opcode.mnemonic())] = 1.0;
            let a = match alignment {
                None => 0,
                Some(a) => 1 + bucket(spec.alignment.lookup(f64::from(*a)), "alignment", f64::from(*a))?,
            };
            out[k + a] = 1.0;
        }
        NodePayload::Type { kind, bit_width } => {
            let k = spec.type_kinds.len();
            out[slot(&spec.type_kinds, type_kind_name(*kind))] = 1.0;
            let b = match bit_width {
                None => 0,
                Some(w) => 1 + bucket(spec.bit_width.lookup(f64::from(*w)), "bit_width", f64::from(*w))?,
            };
            out[k + b] = 1.0;
        }
        NodePayload::Size { bytes } => {
            let b = bucket(spec.size.lookup(*bytes as f64), "size", *bytes as f64)?;
            out[b] = 1.0;
        }
        NodePayload::Attributes(set) => {
            for a in &set.entries {
                out[slot(&spec.attributes, a.keyword())] = 1.0;
            }
        }
        NodePayload::Module => out[0] = 1.0,
    }
    Ok((out, overflow))
}
