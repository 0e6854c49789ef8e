//! Parsed form of a subset of LLVM 16 textual IR.
//!
//! Every operand is resolved to an entry in [`IrModule::values`]; constants are
//! interned so each distinct constant appears once. Types are interned in
//! [`IrModule::types`]; identified structs are keyed by name.

pub mod attrs;
mod lexer;
pub mod opcode;
mod parser;
mod printer;
mod subset;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use attrs::{AttrKind, AttributeSet, CallingConv, Linkage, Visibility};
pub use opcode::Opcode;
pub use parser::{parse_module, parse_module_with, ParseOptions, DEFAULT_SIZE_LIMIT};
pub use printer::print_module;
pub use subset::subset_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValueId(pub u32);

impl TypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ValueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Line/column of the first token of a construct (1-based).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourcePos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: SourcePos,
        expected: String,
        found: String,
    },
    #[error("unsupported construct `{construct}` at {pos}")]
    UnsupportedConstruct { construct: String, pos: SourcePos },
    #[error("unresolved reference `{ident}`")]
    UnresolvedReference { ident: String, pos: SourcePos },
    #[error("input of {size} bytes exceeds the {limit}-byte limit")]
    TooLarge { size: usize, limit: usize },
}

impl ParseError {
    pub fn line(&self) -> Option<u32> {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::UnsupportedConstruct { pos, .. }
            | ParseError::UnresolvedReference { pos, .. } => Some(pos.line),
            ParseError::TooLarge { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeKind {
    Void,
    Integer,
    Float,
    Pointer,
    Vector,
    Array,
    Structure,
    Function,
    /// Opaque structs and every type without a structural description
    /// (`label`, `token`, `metadata`, `x86_mmx`, `x86_amx`).
    Opaque,
}

impl TypeKind {
    pub const ALL: &'static [TypeKind] = &[
        TypeKind::Void,
        TypeKind::Integer,
        TypeKind::Float,
        TypeKind::Pointer,
        TypeKind::Vector,
        TypeKind::Array,
        TypeKind::Structure,
        TypeKind::Function,
        TypeKind::Opaque,
    ];

    pub fn index(self) -> usize {
        TypeKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeDesc {
    pub kind: TypeKind,
    /// Present iff `kind` is integer or float.
    pub bit_width: Option<u32>,
    /// Array/vector element, typed-pointer pointee, or function return type.
    pub element: Option<TypeId>,
    /// Present iff `kind` is array or vector.
    pub count: Option<u64>,
    /// Struct fields or function parameters.
    pub members: Vec<TypeId>,
    /// Name of an identified struct (without the `%`).
    pub name: Option<String>,
    /// Keyword spelling for float formats and keyword opaque types.
    pub spelling: Option<String>,
    pub packed: bool,
    pub vararg: bool,
    pub scalable: bool,
    pub addrspace: u32,
}

impl TypeDesc {
    pub(crate) fn bare(kind: TypeKind) -> Self {
        TypeDesc {
            kind,
            bit_width: None,
            element: None,
            count: None,
            members: Vec::new(),
            name: None,
            spelling: None,
            packed: false,
            vararg: false,
            scalable: false,
            addrspace: 0,
        }
    }

    pub fn is_first_class_scalar(&self) -> bool {
        matches!(self.kind, TypeKind::Integer | TypeKind::Float | TypeKind::Pointer)
    }

    /// Types directly nested in this one (element, return, members).
    pub fn children(&self) -> Vec<TypeId> {
        let mut out = Vec::with_capacity(self.members.len() + 1);
        out.extend(self.element);
        out.extend(self.members.iter().copied());
        out
    }
}

/// Value kinds, ordered as their feature slots (catch-all last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueKind {
    Argument,
    Local,
    GlobalVariable,
    FunctionRef,
    ConstantInt,
    ConstantFp,
    ConstantAggregate,
    Undef,
    ConstantOther,
}

impl ValueKind {
    pub const ALL: &'static [ValueKind] = &[
        ValueKind::Argument,
        ValueKind::Local,
        ValueKind::GlobalVariable,
        ValueKind::FunctionRef,
        ValueKind::ConstantInt,
        ValueKind::ConstantFp,
        ValueKind::ConstantAggregate,
        ValueKind::Undef,
        ValueKind::ConstantOther,
    ];

    pub fn index(self) -> usize {
        ValueKind::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn is_constant(self) -> bool {
        matches!(
            self,
            ValueKind::ConstantInt
                | ValueKind::ConstantFp
                | ValueKind::ConstantAggregate
                | ValueKind::ConstantOther
                | ValueKind::Undef
        )
    }

    pub fn is_global(self) -> bool {
        matches!(self, ValueKind::GlobalVariable | ValueKind::FunctionRef)
    }
}

/// Literal content of a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstPayload {
    Int(i128),
    /// IEEE double bits (wider formats are rounded to double).
    Float(u64),
    /// `c"..."` byte strings.
    Bytes(Vec<u8>),
    /// Struct, array or vector elements; the shape comes from the type.
    Aggregate(Vec<ValueId>),
    /// Constant expression, e.g. `getelementptr (...)` in an initializer.
    Expr {
        opcode: Opcode,
        operands: Vec<ValueId>,
        detail: Detail,
    },
    /// `null`, `none`, `zeroinitializer`, `undef`, `poison`.
    Keyword(String),
    BlockAddress {
        function: ValueId,
        block: String,
    },
    /// Inline assembly callee (lenient mode only).
    InlineAsm {
        asm: String,
        constraints: String,
    },
}

impl ConstPayload {
    /// Numeric magnitude carried by the literal, if any.
    pub fn numeric(&self) -> Option<f64> {
        match self {
            ConstPayload::Int(v) => Some(*v as f64),
            ConstPayload::Float(bits) => Some(f64::from_bits(*bits)),
            _ => None,
        }
    }

    /// Values nested inside this constant (operands and elements).
    pub fn operands(&self) -> &[ValueId] {
        match self {
            ConstPayload::Aggregate(els) => els,
            ConstPayload::Expr { operands, .. } => operands,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueInfo {
    /// SSA name (`%x`), global symbol (`@g`) or literal spelling.
    pub id: String,
    pub kind: ValueKind,
    pub ty: TypeId,
    pub constant_payload: Option<ConstPayload>,
}

/// Opcode-specific information that is not a value operand.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detail {
    #[default]
    None,
    /// `icmp`/`fcmp` predicate.
    Compare(String),
    Alloca {
        allocated: TypeId,
    },
    Gep {
        source: TypeId,
        inbounds: bool,
    },
    /// `call`/`invoke`/`callbr`: the callee's function type.
    Call {
        callee_type: TypeId,
        tail: Option<String>,
    },
    /// Incoming block (index into the function's blocks) per phi operand.
    Phi(Vec<usize>),
    /// Constant indices of `extractvalue`/`insertvalue`.
    Indices(Vec<u64>),
    /// Ordering keywords of atomic memory operations; `op` for `atomicrmw`.
    Atomic {
        op: Option<String>,
        orderings: Vec<String>,
    },
    LandingPad {
        cleanup: bool,
        /// `catch` or `filter` per clause; clause values are the operands.
        clauses: Vec<String>,
    },
    /// Lenient-mode fallback: original source text of an instruction that was
    /// recognized but not structurally parsed.
    Unparsed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub opcode: Opcode,
    pub result: Option<ValueId>,
    pub operands: Vec<ValueId>,
    /// Type of the produced value; `void` when there is none.
    pub result_type: TypeId,
    pub alignment: Option<u32>,
    /// Successor blocks as indices into the owning function's `blocks`.
    /// Empty for non-terminators.
    pub successors: Vec<usize>,
    pub detail: Detail,
    pub pos: SourcePos,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasicBlock {
    pub label: String,
    pub instructions: Vec<Instruction>,
}

impl BasicBlock {
    pub fn terminator(&self) -> Option<&Instruction> {
        self.instructions.last().filter(|i| i.opcode.is_terminator())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub value: ValueId,
    /// The function type.
    pub ty: TypeId,
    pub args: Vec<ValueId>,
    pub arg_attributes: Vec<AttributeSet>,
    pub blocks: Vec<BasicBlock>,
    /// Function, return and linkage/visibility/convention attributes.
    pub attributes: AttributeSet,
    pub linkage: Linkage,
    pub visibility: Visibility,
    pub calling_convention: CallingConv,
    pub is_declaration: bool,
}

impl Function {
    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.instructions.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalVar {
    pub name: String,
    pub value: ValueId,
    pub value_type: TypeId,
    pub is_constant: bool,
    pub initializer: Option<ValueId>,
    pub linkage: Linkage,
    pub visibility: Visibility,
    pub attributes: AttributeSet,
    pub alignment: Option<u32>,
}

/// A construct outside the supported subset that lenient parsing skipped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Skipped {
    pub construct: String,
    pub pos: SourcePos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrModule {
    pub name: String,
    pub target_triple: Option<String>,
    pub datalayout: Option<String>,
    pub types: Vec<TypeDesc>,
    pub named_types: BTreeMap<String, TypeId>,
    pub values: Vec<ValueInfo>,
    pub globals: Vec<GlobalVar>,
    pub functions: Vec<Function>,
    pub skipped: Vec<Skipped>,
}

impl IrModule {
    pub fn ty(&self, id: TypeId) -> &TypeDesc {
        &self.types[id.index()]
    }

    pub fn value(&self, id: ValueId) -> &ValueInfo {
        &self.values[id.index()]
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(|f| f.instructions().count()).sum()
    }

    /// Pointer width in bytes from the data layout (`p:<bits>` or `p0:<bits>`).
    pub fn pointer_bytes(&self) -> u64 {
        self.datalayout
            .as_deref()
            .and_then(|dl| {
                dl.split('-').find_map(|spec| {
                    let rest = spec.strip_prefix("p0:").or_else(|| spec.strip_prefix("p:"))?;
                    rest.split(':').next()?.parse::<u64>().ok()
                })
            })
            .map(|bits| bits.div_ceil(8))
            .unwrap_or(8)
    }

    /// ABI allocation size and alignment in bytes, or `None` for unsized types.
    pub fn layout(&self, id: TypeId) -> Option<(u64, u64)> {
        self.layout_inner(id, 0)
    }

    pub fn alloc_size(&self, id: TypeId) -> Option<u64> {
        self.layout(id).map(|(size, _)| size)
    }

    fn layout_inner(&self, id: TypeId, depth: usize) -> Option<(u64, u64)> {
        if depth > 64 {
            return None;
        }
        let t = self.ty(id);
        match t.kind {
            TypeKind::Integer => {
                let bytes = u64::from(t.bit_width?).div_ceil(8).next_power_of_two();
                Some((bytes, bytes.min(16)))
            }
            TypeKind::Float => match t.bit_width? {
                80 | 128 => Some((16, 16)),
                bits => {
                    let b = u64::from(bits) / 8;
                    Some((b, b))
                }
            },
            TypeKind::Pointer => {
                let p = self.pointer_bytes();
                Some((p, p))
            }
            TypeKind::Vector => {
                let elem = self.ty(t.element?);
                let elem_bits = match elem.kind {
                    TypeKind::Pointer => self.pointer_bytes() * 8,
                    _ => u64::from(elem.bit_width?),
                };
                let store = (t.count? * elem_bits).div_ceil(8);
                let align = store.next_power_of_two().max(1);
                Some((store.div_ceil(align) * align, align))
            }
            TypeKind::Array => {
                let (size, align) = self.layout_inner(t.element?, depth + 1)?;
                Some((size * t.count?, align))
            }
            TypeKind::Structure => {
                let mut offset = 0u64;
                let mut max_align = 1u64;
                for &m in &t.members {
                    let (size, align) = self.layout_inner(m, depth + 1)?;
                    let align = if t.packed { 1 } else { align };
                    offset = offset.div_ceil(align) * align + size;
                    max_align = max_align.max(align);
                }
                Some((offset.div_ceil(max_align) * max_align, max_align))
            }
            TypeKind::Void | TypeKind::Function | TypeKind::Opaque => None,
        }
    }

    /// Copy of the module with source positions cleared, for structural
    /// comparisons that must ignore layout.
    pub fn without_positions(&self) -> IrModule {
        let mut m = self.clone();
        for f in &mut m.functions {
            for b in &mut f.blocks {
                for i in &mut b.instructions {
                    i.pos = SourcePos::default();
                }
            }
        }
        m.skipped.clear();
        m
    }

    /// Structural equality ignoring source positions.
    pub fn structurally_eq(&self, other: &IrModule) -> bool {
        self.without_positions() == other.without_positions()
    }
}
