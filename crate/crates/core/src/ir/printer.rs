//! Debug printer. Output re-parses to a structurally equal module; flags the
//! parser does not retain (`nsw`, `volatile`, fast-math, ...) are not printed.

use std::fmt::Write;

use super::{
    AttrKind, AttributeSet, CallingConv, ConstPayload, Detail, Function, GlobalVar, Instruction, IrModule,
    Opcode, TypeId, TypeKind, ValueId, ValueKind,
};

pub fn print_module(m: &IrModule) -> String {
    let mut p = Printer {
        m,
        out: String::new(),
    };
    p.module();
    p.out
}

pub(crate) fn escape_bytes(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x20..0x7f).contains(&b) && b != b'"' && b != b'\\' {
            s.push(b as char);
        } else {
            let _ = write!(s, "\\{b:02X}");
        }
    }
    s
}

fn is_plain_ident(name: &str) -> bool {
    let bytes = name.as_bytes();
    let Some(&first) = bytes.first() else {
        return false;
    };
    let all_ident = bytes
        .iter()
        .all(|&c| c.is_ascii_alphanumeric() || matches!(c, b'-' | b'$' | b'.' | b'_'));
    let numeric = bytes.iter().all(u8::is_ascii_digit);
    all_ident && (numeric || !first.is_ascii_digit())
}

fn sigil_name(sigil: char, name: &str) -> String {
    if is_plain_ident(name) {
        format!("{sigil}{name}")
    } else {
        format!("{sigil}\"{}\"", escape_bytes(name.as_bytes()))
    }
}

fn label_def(name: &str) -> String {
    let bytes = name.as_bytes();
    let numeric = !bytes.is_empty() && bytes.iter().all(u8::is_ascii_digit);
    let word = bytes
        .first()
        .is_some_and(|c| c.is_ascii_alphabetic() || matches!(c, b'_' | b'.'))
        && bytes
            .iter()
            .all(|&c| c.is_ascii_alphanumeric() || matches!(c, b'_' | b'.' | b'$' | b'-'));
    if numeric || word {
        format!("{name}:")
    } else {
        format!("\"{}\":", escape_bytes(bytes))
    }
}

struct Printer<'a> {
    m: &'a IrModule,
    out: String,
}

impl Printer<'_> {
    fn ty(&self, t: TypeId) -> String {
        let d = self.m.ty(t);
        if let Some(name) = &d.name {
            return sigil_name('%', name);
        }
        match d.kind {
            TypeKind::Void => "void".into(),
            TypeKind::Integer => format!("i{}", d.bit_width.unwrap_or(0)),
            TypeKind::Float => d.spelling.clone().unwrap_or_else(|| "double".into()),
            TypeKind::Pointer => {
                let space = if d.addrspace != 0 {
                    format!(" addrspace({})", d.addrspace)
                } else {
                    String::new()
                };
                match d.element {
                    Some(e) => format!("{}{space}*", self.ty(e)),
                    None => format!("ptr{space}"),
                }
            }
            TypeKind::Vector => format!(
                "<{}{} x {}>",
                if d.scalable { "vscale x " } else { "" },
                d.count.unwrap_or(0),
                self.ty(d.element.expect("vector element"))
            ),
            TypeKind::Array => format!(
                "[{} x {}]",
                d.count.unwrap_or(0),
                self.ty(d.element.expect("array element"))
            ),
            TypeKind::Structure => self.struct_body(&d.members, d.packed),
            TypeKind::Function => {
                let mut params: Vec<String> = d.members.iter().map(|&p| self.ty(p)).collect();
                if d.vararg {
                    params.push("...".into());
                }
                format!(
                    "{} ({})",
                    self.ty(d.element.expect("return type")),
                    params.join(", ")
                )
            }
            TypeKind::Opaque => d.spelling.clone().unwrap_or_else(|| "opaque".into()),
        }
    }

    fn struct_body(&self, members: &[TypeId], packed: bool) -> String {
        let inner: Vec<String> = members.iter().map(|&m| self.ty(m)).collect();
        let body = if inner.is_empty() {
            "{}".to_string()
        } else {
            format!("{{ {} }}", inner.join(", "))
        };
        if packed {
            format!("<{body}>")
        } else {
            body
        }
    }

    fn val(&self, v: ValueId) -> String {
        let info = self.m.value(v);
        match info.kind {
            ValueKind::Argument | ValueKind::Local => sigil_name('%', &info.id[1..]),
            ValueKind::GlobalVariable | ValueKind::FunctionRef => sigil_name('@', &info.id[1..]),
            _ => self.constant(v),
        }
    }

    /// `<type> <value>` at a use site. Globals and functions carry their
    /// value/function type but are pointers as operands.
    fn typed(&self, v: ValueId) -> String {
        let info = self.m.value(v);
        if info.kind.is_global() {
            return format!("ptr {}", self.val(v));
        }
        format!("{} {}", self.ty(info.ty), self.val(v))
    }

    fn constant(&self, v: ValueId) -> String {
        let info = self.m.value(v);
        let Some(payload) = &info.constant_payload else {
            return info.id.clone();
        };
        match payload {
            ConstPayload::Int(i) => i.to_string(),
            ConstPayload::Float(bits) => format!("0x{bits:016X}"),
            ConstPayload::Bytes(b) => format!("c\"{}\"", escape_bytes(b)),
            ConstPayload::Keyword(k) => k.clone(),
            ConstPayload::Aggregate(els) => {
                let inner: Vec<String> = els.iter().map(|&e| self.typed(e)).collect();
                let d = self.m.ty(info.ty);
                let (open, close) = match d.kind {
                    TypeKind::Structure if d.packed => ("<{", "}>"),
                    TypeKind::Structure => ("{", "}"),
                    TypeKind::Vector => ("<", ">"),
                    _ => ("[", "]"),
                };
                if inner.is_empty() {
                    format!("{open}{close}")
                } else {
                    format!("{open} {} {close}", inner.join(", "))
                }
            }
            ConstPayload::Expr {
                opcode,
                operands,
                detail,
            } => {
                let args: Vec<String> = operands.iter().map(|&o| self.typed(o)).collect();
                match (opcode, detail) {
                    (Opcode::GetElementPtr, Detail::Gep { source, inbounds }) => {
                        let mut parts = vec![self.ty(*source)];
                        parts.extend(args);
                        format!(
                            "getelementptr {}({})",
                            if *inbounds { "inbounds " } else { "" },
                            parts.join(", ")
                        )
                    }
                    (op, _) if op.is_cast() => {
                        format!("{op} ({} to {})", args.join(", "), self.ty(info.ty))
                    }
                    (op, Detail::Compare(pred)) => format!("{op} {pred} ({})", args.join(", ")),
                    (op, _) => format!("{op} ({})", args.join(", ")),
                }
            }
            ConstPayload::BlockAddress { function, block } => {
                format!(
                    "blockaddress({}, {})",
                    self.val(*function),
                    sigil_name('%', block)
                )
            }
            ConstPayload::InlineAsm { asm, constraints } => format!(
                "asm \"{}\", \"{}\"",
                escape_bytes(asm.as_bytes()),
                escape_bytes(constraints.as_bytes())
            ),
        }
    }

    fn attr_words(set: &AttributeSet, skip: &[AttrKind]) -> String {
        let mut s = String::new();
        for &a in &set.entries {
            if !skip.contains(&a) {
                s.push(' ');
                s.push_str(a.keyword());
            }
        }
        s
    }

    fn module(&mut self) {
        let m = self.m;
        if !m.name.is_empty() {
            let _ = writeln!(
                self.out,
                "source_filename = \"{}\"",
                escape_bytes(m.name.as_bytes())
            );
        }
        if let Some(dl) = &m.datalayout {
            let _ = writeln!(
                self.out,
                "target datalayout = \"{}\"",
                escape_bytes(dl.as_bytes())
            );
        }
        if let Some(t) = &m.target_triple {
            let _ = writeln!(self.out, "target triple = \"{}\"", escape_bytes(t.as_bytes()));
        }
        for (name, &id) in &m.named_types {
            let d = m.ty(id);
            let body = if d.kind == TypeKind::Structure {
                self.struct_body(&d.members, d.packed)
            } else {
                "opaque".into()
            };
            let _ = writeln!(self.out, "{} = type {body}", sigil_name('%', name));
        }
        for g in &m.globals {
            self.global(g);
        }
        for f in &m.functions {
            self.function(f);
        }
    }

    fn global(&mut self, g: &GlobalVar) {
        let skip = [AttrKind::from(g.linkage), AttrKind::from(g.visibility)];
        let mut line = format!(
            "{} = {} {}{} {} {}",
            sigil_name('@', &g.name),
            g.linkage.keyword(),
            g.visibility.keyword(),
            Self::attr_words(&g.attributes, &skip),
            if g.is_constant { "constant" } else { "global" },
            self.ty(g.value_type)
        );
        if let Some(init) = g.initializer {
            line.push(' ');
            line.push_str(&self.val(init));
        }
        if let Some(a) = g.alignment {
            let _ = write!(line, ", align {a}");
        }
        self.out.push_str(&line);
        self.out.push('\n');
    }

    fn function(&mut self, f: &Function) {
        let m = self.m;
        let fty = m.ty(f.ty);
        let cc = match f.calling_convention {
            CallingConv::Other => "cc 64".to_string(),
            c => c.keyword().to_string(),
        };
        let mut params = Vec::new();
        for (k, &a) in f.args.iter().enumerate() {
            let attrs = f
                .arg_attributes
                .get(k)
                .map(|s| Self::attr_words(s, &[]))
                .unwrap_or_default();
            params.push(format!("{}{attrs} {}", self.ty(m.value(a).ty), self.val(a)));
        }
        if fty.vararg {
            params.push("...".into());
        }
        let skip = [
            AttrKind::from(f.linkage),
            AttrKind::from(f.visibility),
            AttrKind::from(f.calling_convention),
        ];
        let _ = write!(
            self.out,
            "{} {} {} {} {} {}({}){}",
            if f.is_declaration { "declare" } else { "define" },
            f.linkage.keyword(),
            f.visibility.keyword(),
            cc,
            self.ty(fty.element.expect("return type")),
            sigil_name('@', &f.name),
            params.join(", "),
            Self::attr_words(&f.attributes, &skip)
        );
        if f.is_declaration {
            self.out.push('\n');
            return;
        }
        self.out.push_str(" {\n");
        for b in &f.blocks {
            let _ = writeln!(self.out, "{}", label_def(&b.label));
            for inst in &b.instructions {
                let text = self.instruction(f, inst);
                let _ = writeln!(self.out, "  {text}");
            }
        }
        self.out.push_str("}\n");
    }

    fn label(&self, f: &Function, block: usize) -> String {
        format!("label {}", sigil_name('%', &f.blocks[block].label))
    }

    fn instruction(&self, f: &Function, i: &Instruction) -> String {
        if let Detail::Unparsed(text) = &i.detail {
            return text.clone();
        }
        let ops = &i.operands;
        let typed = |k: usize| self.typed(ops[k]);
        let all_typed = |from: usize| {
            ops[from..]
                .iter()
                .map(|&o| self.typed(o))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let rty = self.ty(i.result_type);
        let orderings = |d: &Detail| match d {
            Detail::Atomic { orderings, .. } => orderings.join(" "),
            _ => String::new(),
        };
        let mut s = match i.opcode {
            Opcode::Ret if ops.is_empty() => "ret void".to_string(),
            Opcode::Ret => format!("ret {}", typed(0)),
            Opcode::Br if ops.is_empty() => format!("br {}", self.label(f, i.successors[0])),
            Opcode::Br => format!(
                "br {}, {}, {}",
                typed(0),
                self.label(f, i.successors[0]),
                self.label(f, i.successors[1])
            ),
            Opcode::Switch => {
                let mut s = format!("switch {}, {} [", typed(0), self.label(f, i.successors[0]));
                for k in 1..ops.len() {
                    let _ = write!(s, "\n    {}, {}", typed(k), self.label(f, i.successors[k]));
                }
                s.push_str("\n  ]");
                s
            }
            Opcode::IndirectBr => {
                let labels: Vec<String> = i.successors.iter().map(|&b| self.label(f, b)).collect();
                format!("indirectbr {}, [{}]", typed(0), labels.join(", "))
            }
            Opcode::Invoke => format!(
                "invoke {} to {} unwind {}",
                self.call_body(i),
                self.label(f, i.successors[0]),
                self.label(f, i.successors[1])
            ),
            Opcode::Resume => format!("resume {}", typed(0)),
            Opcode::Unreachable => "unreachable".into(),
            Opcode::FNeg | Opcode::Freeze => format!("{} {}", i.opcode, typed(0)),
            op if op.is_binary() => format!("{op} {}, {}", typed(0), self.val(ops[1])),
            Opcode::Alloca => {
                let Detail::Alloca { allocated } = &i.detail else {
                    unreachable!("alloca without allocated type")
                };
                let mut s = format!("alloca {}", self.ty(*allocated));
                if !ops.is_empty() {
                    let _ = write!(s, ", {}", typed(0));
                }
                s
            }
            Opcode::Load => match &i.detail {
                Detail::Atomic { .. } => {
                    format!("load atomic {rty}, {} {}", typed(0), orderings(&i.detail))
                }
                _ => format!("load {rty}, {}", typed(0)),
            },
            Opcode::Store => match &i.detail {
                Detail::Atomic { .. } => {
                    format!("store atomic {}, {} {}", typed(0), typed(1), orderings(&i.detail))
                }
                _ => format!("store {}, {}", typed(0), typed(1)),
            },
            Opcode::Fence => format!("fence {}", orderings(&i.detail)),
            Opcode::AtomicCmpXchg => format!(
                "cmpxchg {}, {}, {} {}",
                typed(0),
                typed(1),
                typed(2),
                orderings(&i.detail)
            ),
            Opcode::AtomicRmw => {
                let op = match &i.detail {
                    Detail::Atomic { op: Some(op), .. } => op.as_str(),
                    _ => "xchg",
                };
                format!(
                    "atomicrmw {op} {}, {} {}",
                    typed(0),
                    typed(1),
                    orderings(&i.detail)
                )
            }
            Opcode::GetElementPtr => {
                let Detail::Gep { source, inbounds } = &i.detail else {
                    unreachable!("getelementptr without source type")
                };
                format!(
                    "getelementptr {}{}, {}",
                    if *inbounds { "inbounds " } else { "" },
                    self.ty(*source),
                    all_typed(0)
                )
            }
            op if op.is_cast() => format!("{op} {} to {rty}", typed(0)),
            Opcode::ICmp | Opcode::FCmp => {
                let pred = match &i.detail {
                    Detail::Compare(p) => p.as_str(),
                    _ => "eq",
                };
                format!("{} {pred} {}, {}", i.opcode, typed(0), self.val(ops[1]))
            }
            Opcode::Phi => {
                let Detail::Phi(blocks) = &i.detail else {
                    unreachable!("phi without incoming blocks")
                };
                let arms: Vec<String> = ops
                    .iter()
                    .zip(blocks)
                    .map(|(&v, &b)| format!("[ {}, {} ]", self.val(v), sigil_name('%', &f.blocks[b].label)))
                    .collect();
                format!("phi {rty} {}", arms.join(", "))
            }
            Opcode::Call => {
                let tail = match &i.detail {
                    Detail::Call { tail: Some(t), .. } => format!("{t} "),
                    _ => String::new(),
                };
                format!("{tail}call {}", self.call_body(i))
            }
            Opcode::VAArg => format!("va_arg {}, {rty}", typed(0)),
            Opcode::Select | Opcode::ExtractElement | Opcode::InsertElement | Opcode::ShuffleVector => {
                format!("{} {}", i.opcode, all_typed(0))
            }
            Opcode::ExtractValue | Opcode::InsertValue => {
                let idx = match &i.detail {
                    Detail::Indices(ix) => ix.iter().map(|k| format!(", {k}")).collect(),
                    _ => String::new(),
                };
                format!("{} {}{idx}", i.opcode, all_typed(0))
            }
            Opcode::LandingPad => {
                let (cleanup, clauses) = match &i.detail {
                    Detail::LandingPad { cleanup, clauses } => (*cleanup, clauses.as_slice()),
                    _ => (false, &[][..]),
                };
                let mut s = format!("landingpad {rty}");
                if cleanup {
                    s.push_str(" cleanup");
                }
                for (k, c) in clauses.iter().enumerate() {
                    let _ = write!(s, " {c} {}", typed(k));
                }
                s
            }
            op => format!("{op}"),
        };
        if let Some(a) = i.alignment {
            let _ = write!(s, ", align {a}");
        }
        match i.result {
            Some(r) => format!("{} = {s}", self.val(r)),
            None => s,
        }
    }

    /// `<fnty> <callee>(<args>)` shared by `call` and `invoke`.
    fn call_body(&self, i: &Instruction) -> String {
        let fty = match &i.detail {
            Detail::Call { callee_type, .. } => self.ty(*callee_type),
            _ => self.ty(i.result_type),
        };
        let args: Vec<String> = i.operands[1..].iter().map(|&a| self.typed(a)).collect();
        format!("{fty} {}({})", self.val(i.operands[0]), args.join(", "))
    }
}
