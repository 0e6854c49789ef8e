//! Recursive-descent parser for the supported subset of LLVM 16 textual IR.
//!
//! A pre-pass registers identified struct names, global symbols and attribute
//! groups so that forward references resolve; the main pass builds the
//! module; a final pass renumbers types and values in traversal order so that
//! ids depend only on the module's structure, not on textual layout.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::lexer::{tokenize, Tok, Token};
use super::{
    AttrKind, AttributeSet, BasicBlock, CallingConv, ConstPayload, Detail, Function, GlobalVar, Instruction,
    IrModule, Linkage, Opcode, ParseError, Skipped, SourcePos, TypeDesc, TypeId, TypeKind, ValueId,
    ValueInfo, ValueKind, Visibility,
};

pub const DEFAULT_SIZE_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Skip constructs outside the supported subset, recording them in
    /// [`IrModule::skipped`], instead of failing on the first one.
    pub lenient: bool,
    pub size_limit: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            lenient: false,
            size_limit: DEFAULT_SIZE_LIMIT,
        }
    }
}

impl ParseOptions {
    pub fn lenient() -> Self {
        ParseOptions {
            lenient: true,
            ..Self::default()
        }
    }
}

pub fn parse_module(text: &str) -> Result<IrModule, ParseError> {
    parse_module_with(text, ParseOptions::default())
}

pub fn parse_module_with(text: &str, opts: ParseOptions) -> Result<IrModule, ParseError> {
    if text.len() > opts.size_limit {
        return Err(ParseError::TooLarge {
            size: text.len(),
            limit: opts.size_limit,
        });
    }
    let toks = tokenize(text)?;
    let mut p = Parser::new(text, toks, opts);
    p.prepass()?;
    p.top_level()?;
    Ok(canonicalize(p.m))
}

/// Words that start a value rather than an attribute in operand position.
const VALUE_WORDS: &[&str] = &[
    "true",
    "false",
    "null",
    "none",
    "undef",
    "poison",
    "zeroinitializer",
    "blockaddress",
    "dso_local_equivalent",
    "no_cfi",
    "asm",
    "getelementptr",
    "bitcast",
    "ptrtoint",
    "inttoptr",
    "addrspacecast",
    "trunc",
    "zext",
    "sext",
    "fptrunc",
    "fpext",
    "fptoui",
    "fptosi",
    "uitofp",
    "sitofp",
    "add",
    "sub",
    "mul",
    "shl",
    "lshr",
    "ashr",
    "and",
    "or",
    "xor",
    "udiv",
    "sdiv",
    "urem",
    "srem",
    "icmp",
    "fcmp",
    "select",
    "extractelement",
    "insertelement",
    "shufflevector",
];

const FAST_MATH: &[&str] = &[
    "fast", "nnan", "ninf", "nsz", "arcp", "contract", "afn", "reassoc",
];

const ORDERINGS: &[&str] = &[
    "unordered",
    "monotonic",
    "acquire",
    "release",
    "acq_rel",
    "seq_cst",
];

fn calling_conv(word: &str) -> Option<CallingConv> {
    match word {
        "ccc" => Some(CallingConv::C),
        "fastcc" => Some(CallingConv::Fast),
        "coldcc" => Some(CallingConv::Cold),
        "swiftcc" => Some(CallingConv::Swift),
        w if w.ends_with("cc") && w.len() > 2 => Some(CallingConv::Other),
        _ => None,
    }
}

struct FnScope {
    locals: HashMap<String, ValueId>,
    defined: HashSet<String>,
    pending: Vec<(String, SourcePos)>,
    next_unnamed: u64,
    label_slots: HashMap<String, usize>,
    slot_refs: Vec<(String, SourcePos)>,
}

impl FnScope {
    fn new() -> Self {
        FnScope {
            locals: HashMap::new(),
            defined: HashSet::new(),
            pending: Vec::new(),
            next_unnamed: 0,
            label_slots: HashMap::new(),
            slot_refs: Vec::new(),
        }
    }

    fn label_slot(&mut self, name: &str, pos: SourcePos) -> usize {
        if let Some(&s) = self.label_slots.get(name) {
            return s;
        }
        let s = self.slot_refs.len();
        self.label_slots.insert(name.to_string(), s);
        self.slot_refs.push((name.to_string(), pos));
        s
    }

    fn note_numbered(&mut self, name: &str) {
        if let Ok(n) = name.parse::<u64>() {
            self.next_unnamed = self.next_unnamed.max(n + 1);
        }
    }
}

struct Parser<'s> {
    src: &'s str,
    toks: Vec<Token>,
    i: usize,
    opts: ParseOptions,
    m: IrModule,
    type_ids: HashMap<TypeDesc, TypeId>,
    const_ids: HashMap<(ValueKind, TypeId, ConstPayload), ValueId>,
    global_ids: HashMap<String, ValueId>,
    attr_groups: HashMap<u32, AttributeSet>,
    func: Option<FnScope>,
}

type PResult<T> = Result<T, ParseError>;

impl<'s> Parser<'s> {
    fn new(src: &'s str, toks: Vec<Token>, opts: ParseOptions) -> Self {
        Parser {
            src,
            toks,
            i: 0,
            opts,
            m: IrModule {
                name: String::new(),
                target_triple: None,
                datalayout: None,
                types: Vec::new(),
                named_types: BTreeMap::new(),
                values: Vec::new(),
                globals: Vec::new(),
                functions: Vec::new(),
                skipped: Vec::new(),
            },
            type_ids: HashMap::new(),
            const_ids: HashMap::new(),
            global_ids: HashMap::new(),
            attr_groups: HashMap::new(),
            func: None,
        }
    }

    // ---- token helpers -------------------------------------------------

    fn tok(&self) -> &Token {
        &self.toks[self.i.min(self.toks.len() - 1)]
    }

    fn peek(&self) -> &Tok {
        &self.tok().tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> SourcePos {
        self.tok().pos
    }

    fn at_line_start(&self) -> bool {
        self.tok().line_start
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expected(&self, what: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            expected: what.to_string(),
            found: self.peek().describe(),
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{c}`")))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{w}`")))
        }
    }

    fn expect_u64(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Int(s) => {
                let v = s.parse::<u64>().map_err(|_| self.expected("unsigned integer"))?;
                self.bump();
                Ok(v)
            }
            _ => Err(self.expected("unsigned integer")),
        }
    }

    fn expect_str(&mut self) -> PResult<String> {
        match self.bump() {
            Tok::Str(b) => Ok(String::from_utf8_lossy(&b).into_owned()),
            _ => {
                self.i -= 1;
                Err(self.expected("string literal"))
            }
        }
    }

    fn expect_local_label(&mut self) -> PResult<(String, SourcePos)> {
        self.expect_word("label")?;
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Local(name) => {
                self.bump();
                Ok((name, pos))
            }
            _ => Err(self.expected("block label")),
        }
    }

    /// Records an unsupported construct. Fails in strict mode.
    fn report(&mut self, construct: &str, pos: SourcePos) -> PResult<()> {
        if self.opts.lenient {
            self.m.skipped.push(Skipped {
                construct: construct.to_string(),
                pos,
            });
            Ok(())
        } else {
            Err(ParseError::UnsupportedConstruct {
                construct: construct.to_string(),
                pos,
            })
        }
    }

    /// Skips a bracketed group starting at the current opening token.
    fn skip_balanced(&mut self) {
        let mut depth = 0i32;
        loop {
            match self.peek() {
                Tok::Punct('(' | '[' | '{' | '<') => depth += 1,
                Tok::Punct(')' | ']' | '}' | '>') => depth -= 1,
                Tok::Eof => return,
                _ => {}
            }
            self.bump();
            if depth <= 0 {
                return;
            }
        }
    }

    /// Skips to the first token of the next line, outside brackets.
    fn skip_line(&mut self) {
        self.bump();
        let mut depth = 0i32;
        while !matches!(self.peek(), Tok::Eof) {
            if depth <= 0 && self.at_line_start() {
                return;
            }
            match self.peek() {
                Tok::Punct('(' | '[' | '{') => depth += 1,
                Tok::Punct(')' | ']' | '}') => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    /// Skips one metadata operand: `!5`, `!{...}`, `!"s"`, `!DIFoo(...)`.
    fn skip_metadata_value(&mut self) {
        match self.peek().clone() {
            Tok::Meta(_) => {
                self.bump();
                if self.is_punct('(') {
                    self.skip_balanced();
                }
            }
            Tok::Bang => {
                self.bump();
                if self.is_punct('{') {
                    self.skip_balanced();
                } else if matches!(self.peek(), Tok::Str(_)) {
                    self.bump();
                }
            }
            _ => {}
        }
    }

    /// Skips a metadata call argument up to the next `,` or `)`.
    fn skip_until_arg_end(&mut self) {
        let mut depth = 0i32;
        loop {
            match self.peek() {
                Tok::Punct(',' | ')') if depth == 0 => return,
                Tok::Punct('(' | '[' | '{' | '<') => depth += 1,
                Tok::Punct(')' | ']' | '}' | '>') => depth -= 1,
                Tok::Eof => return,
                _ => {}
            }
            self.bump();
        }
    }

    // ---- types -----------------------------------------------------------

    fn intern(&mut self, desc: TypeDesc) -> TypeId {
        if let Some(&id) = self.type_ids.get(&desc) {
            return id;
        }
        let id = TypeId(self.m.types.len() as u32);
        self.m.types.push(desc.clone());
        self.type_ids.insert(desc, id);
        id
    }

    fn void_ty(&mut self) -> TypeId {
        self.intern(TypeDesc::bare(TypeKind::Void))
    }

    fn int_ty(&mut self, bits: u32) -> TypeId {
        let mut d = TypeDesc::bare(TypeKind::Integer);
        d.bit_width = Some(bits);
        self.intern(d)
    }

    fn ptr_ty(&mut self) -> TypeId {
        self.intern(TypeDesc::bare(TypeKind::Pointer))
    }

    fn keyword_opaque(&mut self, spelling: &str) -> TypeId {
        let mut d = TypeDesc::bare(TypeKind::Opaque);
        d.spelling = Some(spelling.to_string());
        self.intern(d)
    }

    fn is_metadata_ty(&self, t: TypeId) -> bool {
        self.m.types[t.index()].spelling.as_deref() == Some("metadata")
    }

    fn is_type_start(&self) -> bool {
        match self.peek() {
            Tok::Word(w) => is_type_keyword(w),
            Tok::Local(name) => self.m.named_types.contains_key(name),
            Tok::Punct('[' | '{' | '<') => true,
            _ => false,
        }
    }

    fn parse_type(&mut self) -> PResult<TypeId> {
        let pos = self.pos();
        let mut ty = match self.peek().clone() {
            Tok::Word(w) => {
                self.bump();
                self.type_keyword(&w, pos)?
            }
            Tok::Local(name) => {
                self.bump();
                *self
                    .m
                    .named_types
                    .get(&name)
                    .ok_or_else(|| ParseError::UnresolvedReference {
                        ident: format!("%{name}"),
                        pos,
                    })?
            }
            Tok::Punct('[') => {
                self.bump();
                let count = self.expect_u64()?;
                self.expect_word("x")?;
                let elem = self.parse_type()?;
                self.expect_punct(']')?;
                let mut d = TypeDesc::bare(TypeKind::Array);
                d.count = Some(count);
                d.element = Some(elem);
                self.intern(d)
            }
            Tok::Punct('<') => {
                self.bump();
                if self.is_punct('{') {
                    let members = self.struct_body()?;
                    self.expect_punct('>')?;
                    let mut d = TypeDesc::bare(TypeKind::Structure);
                    d.members = members;
                    d.packed = true;
                    self.intern(d)
                } else {
                    let scalable = self.eat_word("vscale");
                    if scalable {
                        self.expect_word("x")?;
                    }
                    let count = self.expect_u64()?;
                    self.expect_word("x")?;
                    let elem = self.parse_type()?;
                    self.expect_punct('>')?;
                    if self.m.types[elem.index()].kind == TypeKind::Pointer {
                        self.report("vector_of_pointers", pos)?;
                    }
                    let mut d = TypeDesc::bare(TypeKind::Vector);
                    d.count = Some(count);
                    d.element = Some(elem);
                    d.scalable = scalable;
                    self.intern(d)
                }
            }
            Tok::Punct('{') => {
                let members = self.struct_body()?;
                let mut d = TypeDesc::bare(TypeKind::Structure);
                d.members = members;
                self.intern(d)
            }
            _ => return Err(self.expected("type")),
        };
        loop {
            if self.is_punct('*') {
                let pos = self.pos();
                self.bump();
                self.report("typed_pointer", pos)?;
                let mut d = TypeDesc::bare(TypeKind::Pointer);
                d.element = Some(ty);
                ty = self.intern(d);
            } else if self.is_word("addrspace") && *self.peek_at(4) == Tok::Punct('*') {
                let pos = self.pos();
                self.bump();
                self.expect_punct('(')?;
                let space = self.expect_u64()? as u32;
                self.expect_punct(')')?;
                self.expect_punct('*')?;
                self.report("typed_pointer", pos)?;
                let mut d = TypeDesc::bare(TypeKind::Pointer);
                d.element = Some(ty);
                d.addrspace = space;
                ty = self.intern(d);
            } else if self.is_punct('(') {
                self.bump();
                let mut params = Vec::new();
                let mut vararg = false;
                while !self.is_punct(')') {
                    if *self.peek() == Tok::Ellipsis {
                        self.bump();
                        vararg = true;
                        break;
                    }
                    params.push(self.parse_type()?);
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                self.expect_punct(')')?;
                ty = self.fn_ty(ty, params, vararg);
            } else {
                return Ok(ty);
            }
        }
    }

    fn fn_ty(&mut self, ret: TypeId, params: Vec<TypeId>, vararg: bool) -> TypeId {
        let mut d = TypeDesc::bare(TypeKind::Function);
        d.element = Some(ret);
        d.members = params;
        d.vararg = vararg;
        self.intern(d)
    }

    fn struct_body(&mut self) -> PResult<Vec<TypeId>> {
        self.expect_punct('{')?;
        let mut members = Vec::new();
        while !self.is_punct('}') {
            members.push(self.parse_type()?);
            if !self.eat_punct(',') {
                break;
            }
        }
        self.expect_punct('}')?;
        Ok(members)
    }

    fn type_keyword(&mut self, w: &str, pos: SourcePos) -> PResult<TypeId> {
        if let Some(bits) = w.strip_prefix('i').and_then(|b| b.parse::<u32>().ok()) {
            return Ok(self.int_ty(bits));
        }
        let float = |bits: u32| {
            let mut d = TypeDesc::bare(TypeKind::Float);
            d.bit_width = Some(bits);
            d.spelling = Some(w.to_string());
            d
        };
        let t = match w {
            "void" => self.void_ty(),
            "half" | "bfloat" => self.intern(float(16)),
            "float" => self.intern(float(32)),
            "double" => self.intern(float(64)),
            "x86_fp80" => self.intern(float(80)),
            "fp128" | "ppc_fp128" => self.intern(float(128)),
            "ptr" => {
                let mut d = TypeDesc::bare(TypeKind::Pointer);
                if self.is_word("addrspace") {
                    self.bump();
                    self.expect_punct('(')?;
                    d.addrspace = self.expect_u64()? as u32;
                    self.expect_punct(')')?;
                }
                self.intern(d)
            }
            "label" | "token" | "metadata" | "x86_mmx" | "x86_amx" => self.keyword_opaque(w),
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "type".into(),
                    found: w.to_string(),
                })
            }
        };
        Ok(t)
    }

    // ---- values ----------------------------------------------------------

    fn constant(&mut self, kind: ValueKind, ty: TypeId, payload: ConstPayload) -> ValueId {
        let key = (kind, ty, payload);
        if let Some(&id) = self.const_ids.get(&key) {
            return id;
        }
        let id = ValueId(self.m.values.len() as u32);
        self.m.values.push(ValueInfo {
            id: spelling(&key.2),
            kind,
            ty,
            constant_payload: Some(key.2.clone()),
        });
        self.const_ids.insert(key, id);
        id
    }

    fn local_ref(&mut self, name: &str, ty: TypeId, pos: SourcePos) -> PResult<ValueId> {
        let Some(scope) = self.func.as_mut() else {
            return Err(ParseError::Syntax {
                pos,
                expected: "constant".into(),
                found: format!("%{name}"),
            });
        };
        if let Some(&id) = scope.locals.get(name) {
            return Ok(id);
        }
        let id = ValueId(self.m.values.len() as u32);
        self.m.values.push(ValueInfo {
            id: format!("%{name}"),
            kind: ValueKind::Local,
            ty,
            constant_payload: None,
        });
        scope.locals.insert(name.to_string(), id);
        scope.pending.push((name.to_string(), pos));
        Ok(id)
    }

    fn define_local(&mut self, name: &str, kind: ValueKind, ty: TypeId, pos: SourcePos) -> PResult<ValueId> {
        let scope = self.func.as_mut().expect("local definition outside function");
        if !scope.defined.insert(name.to_string()) {
            return Err(ParseError::Syntax {
                pos,
                expected: "unique local name".into(),
                found: format!("redefinition of %{name}"),
            });
        }
        scope.note_numbered(name);
        if let Some(&id) = scope.locals.get(name) {
            scope.pending.retain(|(n, _)| n != name);
            let v = &mut self.m.values[id.index()];
            v.kind = kind;
            v.ty = ty;
            return Ok(id);
        }
        let id = ValueId(self.m.values.len() as u32);
        self.m.values.push(ValueInfo {
            id: format!("%{name}"),
            kind,
            ty,
            constant_payload: None,
        });
        scope.locals.insert(name.to_string(), id);
        Ok(id)
    }

    fn global_ref(&self, name: &str, pos: SourcePos) -> PResult<ValueId> {
        self.global_ids
            .get(name)
            .copied()
            .ok_or_else(|| ParseError::UnresolvedReference {
                ident: format!("@{name}"),
                pos,
            })
    }

    fn parse_typed_value(&mut self) -> PResult<(TypeId, ValueId)> {
        let ty = self.parse_type()?;
        let v = self.parse_value(ty)?;
        Ok((ty, v))
    }

    fn parse_value(&mut self, ty: TypeId) -> PResult<ValueId> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Local(name) => {
                self.bump();
                self.local_ref(&name, ty, pos)
            }
            Tok::Global(name) => {
                self.bump();
                self.global_ref(&name, pos)
            }
            Tok::Int(text) => {
                self.bump();
                let v = text.parse::<i128>().map_err(|_| ParseError::Syntax {
                    pos,
                    expected: "integer literal within 128 bits".into(),
                    found: text.clone(),
                })?;
                Ok(self.constant(ValueKind::ConstantInt, ty, ConstPayload::Int(v)))
            }
            Tok::Float(text) => {
                self.bump();
                let bits = decode_float(&text).ok_or_else(|| ParseError::Syntax {
                    pos,
                    expected: "floating-point literal".into(),
                    found: text.clone(),
                })?;
                Ok(self.constant(ValueKind::ConstantFp, ty, ConstPayload::Float(bits)))
            }
            Tok::CStr(bytes) => {
                self.bump();
                Ok(self.constant(ValueKind::ConstantAggregate, ty, ConstPayload::Bytes(bytes)))
            }
            Tok::Punct('{') => {
                self.bump();
                let els = self.const_elements('}')?;
                Ok(self.constant(ValueKind::ConstantAggregate, ty, ConstPayload::Aggregate(els)))
            }
            Tok::Punct('[') => {
                self.bump();
                let els = self.const_elements(']')?;
                Ok(self.constant(ValueKind::ConstantAggregate, ty, ConstPayload::Aggregate(els)))
            }
            Tok::Punct('<') => {
                self.bump();
                let els = if self.eat_punct('{') {
                    let els = self.const_elements('}')?;
                    self.expect_punct('>')?;
                    els
                } else {
                    self.const_elements('>')?
                };
                Ok(self.constant(ValueKind::ConstantAggregate, ty, ConstPayload::Aggregate(els)))
            }
            Tok::Word(w) => {
                self.bump();
                self.word_value(&w, ty, pos)
            }
            _ => Err(self.expected("value")),
        }
    }

    fn const_elements(&mut self, close: char) -> PResult<Vec<ValueId>> {
        let mut els = Vec::new();
        while !self.is_punct(close) {
            let (_, v) = self.parse_typed_value()?;
            els.push(v);
            if !self.eat_punct(',') {
                break;
            }
        }
        self.expect_punct(close)?;
        Ok(els)
    }

    fn word_value(&mut self, w: &str, ty: TypeId, pos: SourcePos) -> PResult<ValueId> {
        let kw = |s: &str| ConstPayload::Keyword(s.to_string());
        match w {
            "true" => Ok(self.constant(ValueKind::ConstantInt, ty, ConstPayload::Int(1))),
            "false" => Ok(self.constant(ValueKind::ConstantInt, ty, ConstPayload::Int(0))),
            "null" | "none" | "zeroinitializer" => Ok(self.constant(ValueKind::ConstantOther, ty, kw(w))),
            "undef" | "poison" => Ok(self.constant(ValueKind::Undef, ty, kw(w))),
            "dso_local_equivalent" | "no_cfi" => match self.bump() {
                Tok::Global(name) => self.global_ref(&name, pos),
                _ => Err(self.expected("global symbol")),
            },
            "blockaddress" => {
                self.expect_punct('(')?;
                let (_, f) = self.parse_typed_value_or_global()?;
                self.expect_punct(',')?;
                let block = match self.bump() {
                    Tok::Local(b) => b,
                    _ => return Err(self.expected("block label")),
                };
                self.expect_punct(')')?;
                Ok(self.constant(
                    ValueKind::ConstantOther,
                    ty,
                    ConstPayload::BlockAddress { function: f, block },
                ))
            }
            "asm" => {
                self.report("inline_asm", pos)?;
                while matches!(self.peek(), Tok::Word(_)) {
                    self.bump();
                }
                let asm = self.expect_str()?;
                self.expect_punct(',')?;
                let constraints = self.expect_str()?;
                Ok(self.constant(
                    ValueKind::ConstantOther,
                    ty,
                    ConstPayload::InlineAsm { asm, constraints },
                ))
            }
            _ => match Opcode::from_mnemonic(w) {
                Some(op) => self.const_expr(op, ty, pos),
                None => Err(ParseError::Syntax {
                    pos,
                    expected: "value".into(),
                    found: w.to_string(),
                }),
            },
        }
    }

    /// `blockaddress` accepts either `ptr @f` or a bare `@f`.
    fn parse_typed_value_or_global(&mut self) -> PResult<(TypeId, ValueId)> {
        if let Tok::Global(name) = self.peek().clone() {
            let pos = self.pos();
            self.bump();
            let ptr = self.ptr_ty();
            return Ok((ptr, self.global_ref(&name, pos)?));
        }
        self.parse_typed_value()
    }

    fn const_expr(&mut self, op: Opcode, ty: TypeId, pos: SourcePos) -> PResult<ValueId> {
        let mut detail = Detail::None;
        let mut operands = Vec::new();
        match op {
            Opcode::GetElementPtr => {
                let inbounds = self.eat_word("inbounds");
                self.expect_punct('(')?;
                let source = self.parse_type()?;
                while self.eat_punct(',') {
                    self.eat_word("inrange");
                    operands.push(self.parse_typed_value()?.1);
                }
                self.expect_punct(')')?;
                detail = Detail::Gep { source, inbounds };
            }
            op if op.is_cast() => {
                self.expect_punct('(')?;
                operands.push(self.parse_typed_value()?.1);
                self.expect_word("to")?;
                self.parse_type()?;
                self.expect_punct(')')?;
            }
            Opcode::ICmp | Opcode::FCmp => {
                let pred = match self.bump() {
                    Tok::Word(p) => p,
                    _ => return Err(self.expected("comparison predicate")),
                };
                detail = Detail::Compare(pred);
                self.expect_punct('(')?;
                operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                operands.push(self.parse_typed_value()?.1);
                self.expect_punct(')')?;
            }
            op if op.is_binary()
                || matches!(
                    op,
                    Opcode::Select | Opcode::ExtractElement | Opcode::InsertElement | Opcode::ShuffleVector
                ) =>
            {
                while matches!(self.peek(), Tok::Word(w) if w == "nuw" || w == "nsw" || w == "exact") {
                    self.bump();
                }
                self.expect_punct('(')?;
                loop {
                    operands.push(self.parse_typed_value()?.1);
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                self.expect_punct(')')?;
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "constant expression".into(),
                    found: op.mnemonic().to_string(),
                })
            }
        }
        Ok(self.constant(
            ValueKind::ConstantAggregate,
            ty,
            ConstPayload::Expr {
                opcode: op,
                operands,
                detail,
            },
        ))
    }

    // ---- attributes --------------------------------------------------------

    /// Body of `attributes #N = { ... }` after the opening brace.
    fn attr_group_body(&mut self) -> PResult<AttributeSet> {
        let mut set = AttributeSet::new();
        loop {
            match self.peek().clone() {
                Tok::Punct('}') => {
                    self.bump();
                    return Ok(set);
                }
                Tok::Word(w) => {
                    self.bump();
                    self.skip_attr_args(&w);
                    set.insert_token(&w);
                }
                Tok::Str(_) => {
                    self.bump();
                    if self.eat_punct('=') {
                        self.bump();
                    }
                    set.insert(AttrKind::Other);
                }
                Tok::Eof => return Err(self.expected("`}`")),
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Skips `(args)`, `=value`, or the integer of `align N` after an
    /// attribute word.
    fn skip_attr_args(&mut self, word: &str) {
        if self.is_punct('(') {
            self.skip_balanced();
        } else if self.is_punct('=') {
            self.bump();
            self.bump();
        } else if matches!(word, "align" | "alignstack") && matches!(self.peek(), Tok::Int(_)) {
            self.bump();
        }
    }

    /// Parameter/return attributes in front of a value or name.
    fn param_attrs(&mut self) -> AttributeSet {
        let mut set = AttributeSet::new();
        while let Tok::Word(w) = self.peek().clone() {
            if VALUE_WORDS.contains(&w.as_str()) || is_type_keyword(&w) {
                break;
            }
            self.bump();
            self.skip_attr_args(&w);
            set.insert_token(&w);
        }
        set
    }

    // ---- pre-pass --------------------------------------------------------

    fn prepass(&mut self) -> PResult<()> {
        let void = self.void_ty();
        let mut named = Vec::new();
        let mut k = 0;
        while k < self.toks.len() {
            let t = self.toks[k].clone();
            if !t.line_start {
                k += 1;
                continue;
            }
            let next = |o: usize| self.toks.get(k + o).map(|t| &t.tok);
            match &t.tok {
                Tok::Local(name)
                    if next(1) == Some(&Tok::Punct('=')) && next(2) == Some(&Tok::Word("type".into())) =>
                {
                    named.push(name.clone());
                }
                Tok::Global(name) if next(1) == Some(&Tok::Punct('=')) => {
                    self.reserve_global(name, ValueKind::GlobalVariable, void, t.pos)?;
                }
                Tok::Word(w) if w == "define" || w == "declare" => {
                    let mut j = k + 1;
                    while j + 1 < self.toks.len() {
                        if let Tok::Global(name) = &self.toks[j].tok {
                            if self.toks[j + 1].tok == Tok::Punct('(') {
                                let (name, pos) = (name.clone(), self.toks[j].pos);
                                self.reserve_global(&name, ValueKind::FunctionRef, void, pos)?;
                                break;
                            }
                        }
                        if self.toks[j].line_start || self.toks[j].tok == Tok::Eof {
                            break;
                        }
                        j += 1;
                    }
                }
                Tok::Word(w) if w == "attributes" => {
                    if let (Some(Tok::AttrGroup(n)), Some(Tok::Punct('=')), Some(Tok::Punct('{'))) =
                        (next(1), next(2), next(3))
                    {
                        let n = *n;
                        let saved = self.i;
                        self.i = k + 4;
                        let set = self.attr_group_body()?;
                        self.i = saved;
                        self.attr_groups.insert(n, set);
                    }
                }
                _ => {}
            }
            k += 1;
        }
        for name in named {
            let mut d = TypeDesc::bare(TypeKind::Opaque);
            d.name = Some(name.clone());
            let id = TypeId(self.m.types.len() as u32);
            self.m.types.push(d);
            self.m.named_types.insert(name, id);
        }
        Ok(())
    }

    fn reserve_global(&mut self, name: &str, kind: ValueKind, ty: TypeId, pos: SourcePos) -> PResult<()> {
        if self.global_ids.contains_key(name) {
            return Err(ParseError::Syntax {
                pos,
                expected: "unique global name".into(),
                found: format!("redefinition of @{name}"),
            });
        }
        let id = ValueId(self.m.values.len() as u32);
        self.m.values.push(ValueInfo {
            id: format!("@{name}"),
            kind,
            ty,
            constant_payload: None,
        });
        self.global_ids.insert(name.to_string(), id);
        Ok(())
    }

    // ---- top level -------------------------------------------------------

    fn top_level(&mut self) -> PResult<()> {
        loop {
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::Word(w) => match w.as_str() {
                    "source_filename" => {
                        self.bump();
                        self.expect_punct('=')?;
                        self.m.name = self.expect_str()?;
                    }
                    "target" => {
                        self.bump();
                        let which = match self.bump() {
                            Tok::Word(w) => w,
                            _ => return Err(self.expected("`datalayout` or `triple`")),
                        };
                        self.expect_punct('=')?;
                        let s = self.expect_str()?;
                        match which.as_str() {
                            "datalayout" => self.m.datalayout = Some(s),
                            "triple" => self.m.target_triple = Some(s),
                            _ => return Err(self.expected("`datalayout` or `triple`")),
                        }
                    }
                    "define" | "declare" => self.function()?,
                    "attributes" => {
                        self.skip_line();
                    }
                    "module" => {
                        self.report("module_asm", pos)?;
                        self.skip_line();
                    }
                    "uselistorder" | "uselistorder_bb" => {
                        self.report("uselistorder", pos)?;
                        self.skip_line();
                    }
                    _ => return Err(self.expected("top-level entity")),
                },
                Tok::Local(name) => {
                    self.bump();
                    self.expect_punct('=')?;
                    self.expect_word("type")?;
                    self.type_definition(&name)?;
                }
                Tok::Global(name) => {
                    self.bump();
                    self.expect_punct('=')?;
                    self.global(&name, pos)?;
                }
                Tok::Meta(_) | Tok::Bang => {
                    self.report("metadata", pos)?;
                    self.skip_line();
                }
                Tok::Comdat(_) => {
                    self.report("comdat", pos)?;
                    self.skip_line();
                }
                _ => return Err(self.expected("top-level entity")),
            }
        }
    }

    fn type_definition(&mut self, name: &str) -> PResult<()> {
        let id = self.m.named_types[name];
        if self.eat_word("opaque") {
            return Ok(());
        }
        let packed = self.is_punct('<');
        if packed {
            self.bump();
        }
        if !self.is_punct('{') {
            return Err(self.expected("struct body"));
        }
        let members = self.struct_body()?;
        if packed {
            self.expect_punct('>')?;
        }
        let d = &mut self.m.types[id.index()];
        d.kind = TypeKind::Structure;
        d.members = members;
        d.packed = packed;
        Ok(())
    }

    fn global(&mut self, name: &str, pos: SourcePos) -> PResult<()> {
        let value = self.global_ref(name, pos)?;
        let mut linkage = Linkage::External;
        let mut visibility = Visibility::Default;
        let mut attributes = AttributeSet::new();
        let is_constant;
        let mut alias = false;
        loop {
            let Tok::Word(w) = self.peek().clone() else {
                return Err(self.expected("`global` or `constant`"));
            };
            if let Some(l) = Linkage::from_keyword(&w) {
                linkage = l;
            } else if let Some(v) = Visibility::from_keyword(&w) {
                visibility = v;
            } else {
                match w.as_str() {
                    "global" => {
                        self.bump();
                        is_constant = false;
                        break;
                    }
                    "constant" => {
                        self.bump();
                        is_constant = true;
                        break;
                    }
                    "alias" | "ifunc" => {
                        self.report("alias", self.pos())?;
                        self.bump();
                        is_constant = true;
                        alias = true;
                        break;
                    }
                    "dso_local" => attributes.insert(AttrKind::DsoLocal),
                    "thread_local" | "addrspace" => {
                        self.bump();
                        if self.is_punct('(') {
                            self.skip_balanced();
                        }
                        continue;
                    }
                    _ => attributes.insert_token(&w),
                }
            }
            self.bump();
        }
        attributes.insert(linkage.into());
        attributes.insert(visibility.into());
        let value_type = self.parse_type()?;
        let initializer = if alias {
            self.expect_punct(',')?;
            Some(self.parse_typed_value()?.1)
        } else if self.is_punct(',') || self.at_line_start() {
            None
        } else {
            Some(self.parse_value(value_type)?)
        };
        let mut alignment = None;
        while self.eat_punct(',') {
            match self.peek().clone() {
                Tok::Word(w) if w == "align" => {
                    self.bump();
                    alignment = Some(self.expect_u64()? as u32);
                }
                Tok::Word(w) if w == "section" || w == "partition" => {
                    self.bump();
                    self.expect_str()?;
                }
                Tok::Word(w) if w == "comdat" => {
                    self.bump();
                    if self.is_punct('(') {
                        self.skip_balanced();
                    }
                }
                Tok::Meta(_) => {
                    let p = self.pos();
                    self.report("metadata_attachment", p)?;
                    self.bump();
                    self.skip_metadata_value();
                }
                Tok::Word(w) => {
                    self.bump();
                    self.skip_attr_args(&w);
                }
                _ => return Err(self.expected("global attribute")),
            }
        }
        while let Tok::AttrGroup(_) = self.peek() {
            self.bump();
        }
        let v = &mut self.m.values[value.index()];
        v.kind = ValueKind::GlobalVariable;
        v.ty = value_type;
        self.m.globals.push(GlobalVar {
            name: name.to_string(),
            value,
            value_type,
            is_constant,
            initializer,
            linkage,
            visibility,
            attributes,
            alignment,
        });
        Ok(())
    }

    fn function(&mut self) -> PResult<()> {
        let is_define = self.is_word("define");
        self.bump();
        let mut linkage = Linkage::External;
        let mut visibility = Visibility::Default;
        let mut cc = CallingConv::C;
        let mut attributes = AttributeSet::new();
        loop {
            if self.is_type_start() {
                break;
            }
            let Tok::Word(w) = self.peek().clone() else {
                return Err(self.expected("return type"));
            };
            if let Some(l) = Linkage::from_keyword(&w) {
                linkage = l;
                self.bump();
            } else if let Some(v) = Visibility::from_keyword(&w) {
                visibility = v;
                self.bump();
            } else if w == "cc" {
                self.bump();
                self.expect_u64()?;
                cc = CallingConv::Other;
            } else if let Some(c) = calling_conv(&w) {
                cc = c;
                self.bump();
            } else if w == "dso_preemptable" {
                self.bump();
            } else {
                self.bump();
                self.skip_attr_args(&w);
                attributes.insert_token(&w);
            }
        }
        let ret = self.parse_type()?;
        let name_pos = self.pos();
        let name = match self.bump() {
            Tok::Global(n) => n,
            _ => return Err(self.expected("function name")),
        };
        let value = self.global_ref(&name, name_pos)?;

        self.expect_punct('(')?;
        let mut params: Vec<(TypeId, AttributeSet, Option<String>, SourcePos)> = Vec::new();
        let mut vararg = false;
        while !self.is_punct(')') {
            if *self.peek() == Tok::Ellipsis {
                self.bump();
                vararg = true;
                break;
            }
            let ty = self.parse_type()?;
            let pattrs = self.param_attrs();
            let pos = self.pos();
            let pname = match self.peek().clone() {
                Tok::Local(n) => {
                    self.bump();
                    Some(n)
                }
                _ => None,
            };
            params.push((ty, pattrs, pname, pos));
            if !self.eat_punct(',') {
                break;
            }
        }
        self.expect_punct(')')?;

        // Function attributes up to the body (define) or end of line (declare).
        loop {
            if is_define && self.is_punct('{') {
                break;
            }
            if !is_define && self.at_line_start() {
                break;
            }
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::AttrGroup(n) => {
                    self.bump();
                    let group = self.attr_groups.get(&n).ok_or(ParseError::UnresolvedReference {
                        ident: format!("#{n}"),
                        pos,
                    })?;
                    attributes.extend(group);
                }
                Tok::Word(w) => {
                    self.bump();
                    match w.as_str() {
                        "unnamed_addr" | "local_unnamed_addr" => {}
                        "addrspace" => self.skip_attr_args(&w),
                        "section" | "partition" | "gc" => {
                            self.expect_str()?;
                        }
                        "comdat" => {
                            if self.is_punct('(') {
                                self.skip_balanced();
                            }
                        }
                        "align" => {
                            self.expect_u64()?;
                        }
                        "personality" => {
                            self.report("exception_handling", pos)?;
                            self.parse_typed_value()?;
                        }
                        "prefix" | "prologue" => {
                            self.report("prefix_data", pos)?;
                            self.parse_typed_value()?;
                        }
                        _ => {
                            self.skip_attr_args(&w);
                            attributes.insert_token(&w);
                        }
                    }
                }
                Tok::Str(_) => {
                    self.bump();
                    if self.eat_punct('=') {
                        self.bump();
                    }
                    attributes.insert(AttrKind::Other);
                }
                Tok::Meta(_) => {
                    self.report("metadata_attachment", pos)?;
                    self.bump();
                    self.skip_metadata_value();
                }
                _ => return Err(self.expected("function attribute or body")),
            }
        }
        attributes.insert(linkage.into());
        attributes.insert(visibility.into());
        attributes.insert(cc.into());

        let param_tys: Vec<TypeId> = params.iter().map(|p| p.0).collect();
        let fty = self.fn_ty(ret, param_tys, vararg);
        self.m.values[value.index()].ty = fty;

        let mut args = Vec::with_capacity(params.len());
        let mut arg_attributes = Vec::with_capacity(params.len());
        let mut blocks = Vec::new();
        if is_define {
            self.func = Some(FnScope::new());
            for (ty, pattrs, pname, pos) in params {
                let pname = match pname {
                    Some(n) => n,
                    None => {
                        let scope = self.func.as_mut().unwrap();
                        let n = scope.next_unnamed.to_string();
                        scope.next_unnamed += 1;
                        n
                    }
                };
                args.push(self.define_local(&pname, ValueKind::Argument, ty, pos)?);
                arg_attributes.push(pattrs);
            }
            blocks = self.function_body()?;
            self.func = None;
        } else {
            for (k, (ty, pattrs, pname, _)) in params.into_iter().enumerate() {
                let id = ValueId(self.m.values.len() as u32);
                self.m.values.push(ValueInfo {
                    id: format!("%{}", pname.unwrap_or_else(|| k.to_string())),
                    kind: ValueKind::Argument,
                    ty,
                    constant_payload: None,
                });
                args.push(id);
                arg_attributes.push(pattrs);
            }
        }
        self.m.functions.push(Function {
            name,
            value,
            ty: fty,
            args,
            arg_attributes,
            blocks,
            attributes,
            linkage,
            visibility,
            calling_convention: cc,
            is_declaration: !is_define,
        });
        Ok(())
    }

    fn function_body(&mut self) -> PResult<Vec<BasicBlock>> {
        self.expect_punct('{')?;
        let mut blocks: Vec<BasicBlock> = Vec::new();
        let mut label_pos: Vec<SourcePos> = Vec::new();
        while !self.is_punct('}') {
            let pos = self.pos();
            let label = match self.peek().clone() {
                Tok::Label(l) => {
                    self.bump();
                    l
                }
                Tok::Eof => return Err(self.expected("`}`")),
                _ if blocks.is_empty() => {
                    let scope = self.func.as_mut().unwrap();
                    let n = scope.next_unnamed.to_string();
                    scope.next_unnamed += 1;
                    n
                }
                _ => return Err(self.expected("block label")),
            };
            if blocks.iter().any(|b| b.label == label) {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "unique block label".into(),
                    found: format!("redefinition of label {label}"),
                });
            }
            self.func.as_mut().unwrap().note_numbered(&label);
            let mut instructions = Vec::new();
            loop {
                if self.is_punct('}') || matches!(self.peek(), Tok::Label(_) | Tok::Eof) {
                    return Err(self.expected("terminator instruction"));
                }
                let inst = self.instruction()?;
                let done = inst.opcode.is_terminator();
                instructions.push(inst);
                if done {
                    break;
                }
            }
            blocks.push(BasicBlock { label, instructions });
            label_pos.push(pos);
        }
        self.expect_punct('}')?;

        let scope = self.func.as_ref().unwrap();
        if let Some((name, pos)) = scope.pending.first() {
            return Err(ParseError::UnresolvedReference {
                ident: format!("%{name}"),
                pos: *pos,
            });
        }
        // Map label slots (numbered by first mention) to block indices.
        let mut slot_to_block = Vec::with_capacity(scope.slot_refs.len());
        for (name, pos) in &scope.slot_refs {
            match blocks.iter().position(|b| &b.label == name) {
                Some(b) => slot_to_block.push(b),
                None => {
                    return Err(ParseError::UnresolvedReference {
                        ident: format!("%{name}"),
                        pos: *pos,
                    })
                }
            }
        }
        for b in &mut blocks {
            for inst in &mut b.instructions {
                for s in &mut inst.successors {
                    *s = slot_to_block[*s];
                }
                if let Detail::Phi(incoming) = &mut inst.detail {
                    for s in incoming {
                        *s = slot_to_block[*s];
                    }
                }
            }
        }
        Ok(blocks)
    }

    fn slot(&mut self, label: &str, pos: SourcePos) -> usize {
        self.func.as_mut().unwrap().label_slot(label, pos)
    }

    fn instruction(&mut self) -> PResult<Instruction> {
        let pos = self.pos();
        let start_offset = self.tok().offset;
        let result_name = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Local(n), Tok::Punct('=')) => {
                self.bump();
                self.bump();
                Some(n)
            }
            _ => None,
        };
        let op_pos = self.pos();
        let mut word = match self.peek().clone() {
            Tok::Word(w) => w,
            _ => return Err(self.expected("instruction")),
        };
        let mut tail = None;
        if matches!(word.as_str(), "tail" | "musttail" | "notail") {
            self.bump();
            tail = Some(word.clone());
            word = match self.peek().clone() {
                Tok::Word(w) if w == "call" => w,
                _ => return Err(self.expected("`call`")),
            };
        }
        let opcode = match Opcode::from_mnemonic(&word) {
            Some(op) => op,
            None => {
                self.report(&word, op_pos)?;
                return self.unparsed(Opcode::Other, result_name, pos, start_offset);
            }
        };
        self.bump();

        let void = self.void_ty();
        let mut inst = Instruction {
            opcode,
            result: None,
            operands: Vec::new(),
            result_type: void,
            alignment: None,
            successors: Vec::new(),
            detail: Detail::None,
            pos,
        };

        match opcode {
            Opcode::Ret => {
                let ty = self.parse_type()?;
                if ty != void {
                    inst.operands.push(self.parse_value(ty)?);
                }
            }
            Opcode::Br => {
                if self.is_word("label") {
                    let (l, p) = self.expect_local_label()?;
                    inst.successors.push(self.slot(&l, p));
                } else {
                    inst.operands.push(self.parse_typed_value()?.1);
                    for _ in 0..2 {
                        self.expect_punct(',')?;
                        let (l, p) = self.expect_local_label()?;
                        inst.successors.push(self.slot(&l, p));
                    }
                }
            }
            Opcode::Switch => {
                let (_, v) = self.parse_typed_value()?;
                inst.operands.push(v);
                self.expect_punct(',')?;
                let (l, p) = self.expect_local_label()?;
                inst.successors.push(self.slot(&l, p));
                self.expect_punct('[')?;
                while !self.is_punct(']') {
                    let case_ty = self.parse_type()?;
                    inst.operands.push(self.parse_value(case_ty)?);
                    self.expect_punct(',')?;
                    let (l, p) = self.expect_local_label()?;
                    inst.successors.push(self.slot(&l, p));
                }
                self.expect_punct(']')?;
            }
            Opcode::IndirectBr => {
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                self.expect_punct('[')?;
                while !self.is_punct(']') {
                    let (l, p) = self.expect_local_label()?;
                    inst.successors.push(self.slot(&l, p));
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                self.expect_punct(']')?;
            }
            Opcode::Invoke => {
                self.report("exception_handling", op_pos)?;
                self.call_like(&mut inst, None)?;
                self.expect_word("to")?;
                let (l, p) = self.expect_local_label()?;
                inst.successors.push(self.slot(&l, p));
                self.expect_word("unwind")?;
                let (l, p) = self.expect_local_label()?;
                inst.successors.push(self.slot(&l, p));
            }
            Opcode::Resume => {
                self.report("exception_handling", op_pos)?;
                inst.operands.push(self.parse_typed_value()?.1);
            }
            Opcode::Unreachable => {}
            Opcode::CleanupRet
            | Opcode::CatchRet
            | Opcode::CatchSwitch
            | Opcode::CleanupPad
            | Opcode::CatchPad => {
                self.report("exception_handling", op_pos)?;
                return self.unparsed(opcode, result_name, pos, start_offset);
            }
            Opcode::CallBr => {
                self.report("callbr", op_pos)?;
                return self.unparsed(opcode, result_name, pos, start_offset);
            }
            Opcode::FNeg => {
                self.skip_flags(FAST_MATH);
                let (ty, v) = self.parse_typed_value()?;
                inst.operands.push(v);
                inst.result_type = ty;
            }
            op if op.is_binary() => {
                self.skip_flags(&["nuw", "nsw", "exact", "disjoint"]);
                self.skip_flags(FAST_MATH);
                let (ty, a) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let b = self.parse_value(ty)?;
                inst.operands.extend([a, b]);
                inst.result_type = ty;
            }
            Opcode::Alloca => {
                self.eat_word("inalloca");
                let allocated = self.parse_type()?;
                inst.detail = Detail::Alloca { allocated };
                inst.result_type = self.ptr_ty();
                while self.is_punct(',') {
                    match self.peek_at(1).clone() {
                        Tok::Word(w) if w == "align" => {
                            self.bump();
                            self.bump();
                            inst.alignment = Some(self.expect_u64()? as u32);
                        }
                        Tok::Word(w) if w == "addrspace" => {
                            self.bump();
                            self.bump();
                            self.skip_balanced();
                        }
                        Tok::Meta(_) => break,
                        _ => {
                            self.bump();
                            inst.operands.push(self.parse_typed_value()?.1);
                        }
                    }
                }
            }
            Opcode::Load => {
                let atomic = self.eat_word("atomic");
                self.eat_word("volatile");
                let ty = self.parse_type()?;
                self.expect_punct(',')?;
                inst.operands.push(self.parse_typed_value()?.1);
                if atomic {
                    inst.detail = self.orderings(None)?;
                }
                inst.result_type = ty;
            }
            Opcode::Store => {
                let atomic = self.eat_word("atomic");
                self.eat_word("volatile");
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                inst.operands.push(self.parse_typed_value()?.1);
                if atomic {
                    inst.detail = self.orderings(None)?;
                }
            }
            Opcode::Fence => {
                inst.detail = self.orderings(None)?;
            }
            Opcode::AtomicCmpXchg => {
                self.eat_word("weak");
                self.eat_word("volatile");
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                let (ty, cmp) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, new) = self.parse_typed_value()?;
                inst.operands.extend([cmp, new]);
                inst.detail = self.orderings(None)?;
                let i1 = self.int_ty(1);
                let mut d = TypeDesc::bare(TypeKind::Structure);
                d.members = vec![ty, i1];
                inst.result_type = self.intern(d);
            }
            Opcode::AtomicRmw => {
                self.eat_word("volatile");
                let op = match self.bump() {
                    Tok::Word(w) => w,
                    _ => return Err(self.expected("atomicrmw operation")),
                };
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                let (ty, v) = self.parse_typed_value()?;
                inst.operands.push(v);
                inst.detail = self.orderings(Some(op))?;
                inst.result_type = ty;
            }
            Opcode::GetElementPtr => {
                let inbounds = self.eat_word("inbounds");
                let source = self.parse_type()?;
                self.expect_punct(',')?;
                let (base_ty, base) = self.parse_typed_value()?;
                inst.operands.push(base);
                let mut result_ty = base_ty;
                while self.is_punct(',') && !self.trailing_after_comma() {
                    self.bump();
                    self.eat_word("inrange");
                    let (ity, idx) = self.parse_typed_value()?;
                    inst.operands.push(idx);
                    let it = &self.m.types[ity.index()];
                    if it.kind == TypeKind::Vector && self.m.types[result_ty.index()].kind != TypeKind::Vector
                    {
                        let mut d = TypeDesc::bare(TypeKind::Vector);
                        d.count = it.count;
                        d.scalable = it.scalable;
                        d.element = Some(base_ty);
                        result_ty = self.intern(d);
                    }
                }
                inst.detail = Detail::Gep { source, inbounds };
                inst.result_type = result_ty;
            }
            op if op.is_cast() => {
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_word("to")?;
                inst.result_type = self.parse_type()?;
            }
            Opcode::ICmp | Opcode::FCmp => {
                self.skip_flags(FAST_MATH);
                let pred = match self.bump() {
                    Tok::Word(p) => p,
                    _ => return Err(self.expected("comparison predicate")),
                };
                let (ty, a) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let b = self.parse_value(ty)?;
                inst.operands.extend([a, b]);
                inst.detail = Detail::Compare(pred);
                let i1 = self.int_ty(1);
                let t = self.m.types[ty.index()].clone();
                inst.result_type = if t.kind == TypeKind::Vector {
                    let mut d = TypeDesc::bare(TypeKind::Vector);
                    d.count = t.count;
                    d.scalable = t.scalable;
                    d.element = Some(i1);
                    self.intern(d)
                } else {
                    i1
                };
            }
            Opcode::Phi => {
                self.skip_flags(FAST_MATH);
                let ty = self.parse_type()?;
                let mut incoming = Vec::new();
                loop {
                    self.expect_punct('[')?;
                    inst.operands.push(self.parse_value(ty)?);
                    self.expect_punct(',')?;
                    let p = self.pos();
                    let l = match self.bump() {
                        Tok::Local(l) => l,
                        _ => return Err(self.expected("incoming block")),
                    };
                    incoming.push(self.slot(&l, p));
                    self.expect_punct(']')?;
                    if !(self.is_punct(',') && *self.peek_at(1) == Tok::Punct('[')) {
                        break;
                    }
                    self.bump();
                }
                inst.detail = Detail::Phi(incoming);
                inst.result_type = ty;
            }
            Opcode::Select => {
                self.skip_flags(FAST_MATH);
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                let (ty, a) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, b) = self.parse_typed_value()?;
                inst.operands.extend([a, b]);
                inst.result_type = ty;
            }
            Opcode::Freeze => {
                let (ty, v) = self.parse_typed_value()?;
                inst.operands.push(v);
                inst.result_type = ty;
            }
            Opcode::Call => {
                self.call_like(&mut inst, tail)?;
            }
            Opcode::VAArg => {
                inst.operands.push(self.parse_typed_value()?.1);
                self.expect_punct(',')?;
                inst.result_type = self.parse_type()?;
            }
            Opcode::ExtractElement => {
                let (vty, v) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, idx) = self.parse_typed_value()?;
                inst.operands.extend([v, idx]);
                inst.result_type = self.element_of(vty, pos)?;
            }
            Opcode::InsertElement => {
                let (vty, v) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, e) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, idx) = self.parse_typed_value()?;
                inst.operands.extend([v, e, idx]);
                inst.result_type = vty;
            }
            Opcode::ShuffleVector => {
                let (vty, a) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, b) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (mty, mask) = self.parse_typed_value()?;
                inst.operands.extend([a, b, mask]);
                let elem = self.element_of(vty, pos)?;
                let m = self.m.types[mty.index()].clone();
                let mut d = TypeDesc::bare(TypeKind::Vector);
                d.count = m.count;
                d.scalable = m.scalable;
                d.element = Some(elem);
                inst.result_type = self.intern(d);
            }
            Opcode::ExtractValue => {
                let (aty, v) = self.parse_typed_value()?;
                inst.operands.push(v);
                let indices = self.value_indices()?;
                inst.result_type = self.walk_indices(aty, &indices, pos)?;
                inst.detail = Detail::Indices(indices);
            }
            Opcode::InsertValue => {
                let (aty, v) = self.parse_typed_value()?;
                self.expect_punct(',')?;
                let (_, e) = self.parse_typed_value()?;
                inst.operands.extend([v, e]);
                inst.detail = Detail::Indices(self.value_indices()?);
                inst.result_type = aty;
            }
            Opcode::LandingPad => {
                self.report("exception_handling", op_pos)?;
                inst.result_type = self.parse_type()?;
                let cleanup = self.eat_word("cleanup");
                let mut clauses = Vec::new();
                while self.is_word("catch") || self.is_word("filter") {
                    if let Tok::Word(w) = self.bump() {
                        clauses.push(w);
                    }
                    inst.operands.push(self.parse_typed_value()?.1);
                }
                inst.detail = Detail::LandingPad { cleanup, clauses };
            }
            _ => {
                self.report(opcode.mnemonic(), op_pos)?;
                return self.unparsed(opcode, result_name, pos, start_offset);
            }
        }

        self.trailing(&mut inst)?;
        self.bind_result(&mut inst, result_name, pos)?;
        Ok(inst)
    }

    fn bind_result(
        &mut self,
        inst: &mut Instruction,
        result_name: Option<String>,
        pos: SourcePos,
    ) -> PResult<()> {
        let is_void = self.m.types[inst.result_type.index()].kind == TypeKind::Void;
        match (result_name, is_void) {
            (Some(name), false) => {
                inst.result = Some(self.define_local(&name, ValueKind::Local, inst.result_type, pos)?);
            }
            (Some(name), true) => {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "instruction producing a value".into(),
                    found: format!("void result bound to %{name}"),
                })
            }
            (None, false) if inst.opcode != Opcode::Other => {
                let scope = self.func.as_mut().unwrap();
                let n = scope.next_unnamed.to_string();
                inst.result = Some(self.define_local(&n, ValueKind::Local, inst.result_type, pos)?);
            }
            _ => {}
        }
        Ok(())
    }

    /// True when the comma at the cursor starts a trailing clause
    /// (`, align N` or `, !md !N`) rather than another operand.
    fn trailing_after_comma(&self) -> bool {
        matches!(self.peek_at(1), Tok::Meta(_)) || matches!(self.peek_at(1), Tok::Word(w) if w == "align")
    }

    fn trailing(&mut self, inst: &mut Instruction) -> PResult<()> {
        while self.is_punct(',') {
            match self.peek_at(1).clone() {
                Tok::Word(w) if w == "align" => {
                    self.bump();
                    self.bump();
                    inst.alignment = Some(self.expect_u64()? as u32);
                }
                Tok::Meta(_) => {
                    self.bump();
                    let p = self.pos();
                    self.report("metadata_attachment", p)?;
                    self.bump();
                    self.skip_metadata_value();
                }
                _ => return Err(self.expected("end of instruction")),
            }
        }
        Ok(())
    }

    fn skip_flags(&mut self, flags: &[&str]) {
        while matches!(self.peek(), Tok::Word(w) if flags.contains(&w.as_str())) {
            self.bump();
        }
    }

    fn orderings(&mut self, op: Option<String>) -> PResult<Detail> {
        if self.is_word("syncscope") {
            self.bump();
            self.skip_balanced();
        }
        let mut orderings = Vec::new();
        while let Tok::Word(w) = self.peek().clone() {
            if !ORDERINGS.contains(&w.as_str()) {
                break;
            }
            self.bump();
            orderings.push(w);
        }
        Ok(Detail::Atomic { op, orderings })
    }

    fn value_indices(&mut self) -> PResult<Vec<u64>> {
        let mut out = Vec::new();
        while self.is_punct(',') && !self.trailing_after_comma() {
            self.bump();
            out.push(self.expect_u64()?);
        }
        Ok(out)
    }

    fn element_of(&self, ty: TypeId, pos: SourcePos) -> PResult<TypeId> {
        self.m.types[ty.index()]
            .element
            .ok_or_else(|| ParseError::Syntax {
                pos,
                expected: "vector type".into(),
                found: "non-vector operand".into(),
            })
    }

    fn walk_indices(&self, mut ty: TypeId, indices: &[u64], pos: SourcePos) -> PResult<TypeId> {
        for &i in indices {
            let t = &self.m.types[ty.index()];
            ty = match t.kind {
                TypeKind::Structure => t.members.get(i as usize).copied(),
                TypeKind::Array | TypeKind::Vector => t.element,
                _ => None,
            }
            .ok_or_else(|| ParseError::Syntax {
                pos,
                expected: "aggregate index in range".into(),
                found: i.to_string(),
            })?;
        }
        Ok(ty)
    }

    /// `call`/`invoke`: `[flags] [cc] [ret attrs] <ty> <callee>(<args>) [attrs]`.
    fn call_like(&mut self, inst: &mut Instruction, tail: Option<String>) -> PResult<()> {
        self.skip_flags(FAST_MATH);
        loop {
            if self.is_type_start() {
                break;
            }
            match self.peek().clone() {
                Tok::Word(w) if w == "cc" => {
                    self.bump();
                    self.expect_u64()?;
                }
                Tok::Word(w) if w == "addrspace" => {
                    self.bump();
                    self.skip_balanced();
                }
                Tok::Word(w) if calling_conv(&w).is_some() => {
                    self.bump();
                }
                Tok::Word(_) => {
                    self.param_attrs();
                    if !self.is_type_start()
                        && !matches!(self.peek(), Tok::Word(w) if w == "cc" || w == "addrspace" || calling_conv(w).is_some())
                    {
                        return Err(self.expected("call result type"));
                    }
                }
                _ => return Err(self.expected("call result type")),
            }
        }
        let ty = self.parse_type()?;
        let ptr = self.ptr_ty();
        let callee = self.parse_value(ptr)?;
        self.expect_punct('(')?;
        let mut arg_tys = Vec::new();
        let mut args = Vec::new();
        while !self.is_punct(')') {
            let pos = self.pos();
            let aty = self.parse_type()?;
            if self.is_metadata_ty(aty) {
                self.report("metadata_operand", pos)?;
                self.skip_until_arg_end();
            } else {
                self.param_attrs();
                args.push(self.parse_value(aty)?);
                arg_tys.push(aty);
            }
            if !self.eat_punct(',') {
                break;
            }
        }
        self.expect_punct(')')?;
        while !self.at_line_start() {
            match self.peek().clone() {
                Tok::AttrGroup(_) => {
                    self.bump();
                }
                Tok::Word(w) if w != "to" => {
                    self.bump();
                    self.skip_attr_args(&w);
                }
                Tok::Punct('[') => self.skip_balanced(),
                _ => break,
            }
        }
        let callee_type = if self.m.types[ty.index()].kind == TypeKind::Function {
            ty
        } else {
            self.fn_ty(ty, arg_tys, false)
        };
        inst.result_type = self.m.types[callee_type.index()]
            .element
            .expect("function type has a return type");
        inst.operands.push(callee);
        inst.operands.extend(args);
        inst.detail = Detail::Call { callee_type, tail };
        Ok(())
    }

    /// Lenient fallback for recognized-but-unsupported instructions: keeps
    /// the opcode, value references and (for terminators) label successors.
    fn unparsed(
        &mut self,
        opcode: Opcode,
        result_name: Option<String>,
        pos: SourcePos,
        start_offset: usize,
    ) -> PResult<Instruction> {
        self.bump();
        let mut operands = Vec::new();
        let mut successors = Vec::new();
        let mut depth = 0i32;
        let mut prev_label_kw = false;
        let ptr = self.ptr_ty();
        while !matches!(self.peek(), Tok::Eof) {
            if depth <= 0 && self.at_line_start() {
                break;
            }
            let p = self.pos();
            match self.peek().clone() {
                Tok::Punct('(' | '[' | '{') => depth += 1,
                Tok::Punct(')' | ']' | '}') => depth -= 1,
                Tok::Local(name) => {
                    if prev_label_kw {
                        if opcode.is_terminator() {
                            successors.push(self.slot(&name, p));
                        }
                    } else {
                        operands.push(self.local_ref(&name, ptr, p)?);
                    }
                }
                Tok::Global(name) => operands.push(self.global_ref(&name, p)?),
                _ => {}
            }
            prev_label_kw = self.is_word("label");
            self.bump();
        }
        let end = self.tok().offset.min(self.src.len());
        let text = self.src[start_offset..end].trim_end().to_string();
        let result_type = if result_name.is_some() {
            self.keyword_opaque("token")
        } else {
            self.void_ty()
        };
        let mut inst = Instruction {
            opcode,
            result: None,
            operands,
            result_type,
            alignment: None,
            successors,
            detail: Detail::Unparsed(text),
            pos,
        };
        if let Some(name) = result_name {
            inst.result = Some(self.define_local(&name, ValueKind::Local, result_type, pos)?);
        }
        Ok(inst)
    }
}

fn is_type_keyword(w: &str) -> bool {
    matches!(
        w,
        "void"
            | "half"
            | "bfloat"
            | "float"
            | "double"
            | "x86_fp80"
            | "fp128"
            | "ppc_fp128"
            | "ptr"
            | "label"
            | "token"
            | "metadata"
            | "x86_mmx"
            | "x86_amx"
    ) || w
        .strip_prefix('i')
        .is_some_and(|b| !b.is_empty() && b.bytes().all(|c| c.is_ascii_digit()))
}

/// Decodes an LLVM floating-point literal to IEEE double bits.
pub(crate) fn decode_float(text: &str) -> Option<u64> {
    let Some(hex) = text.strip_prefix("0x") else {
        return text.parse::<f64>().ok().map(f64::to_bits);
    };
    let (format, digits) = match hex.as_bytes().first()? {
        c @ (b'K' | b'L' | b'M' | b'H' | b'R') => (Some(*c), &hex[1..]),
        _ => (None, hex),
    };
    let value = match format {
        None => return u64::from_str_radix(digits, 16).ok(),
        Some(b'H') => half_to_f64(u16::from_str_radix(digits, 16).ok()?),
        Some(b'R') => f32::from_bits(u32::from(u16::from_str_radix(digits, 16).ok()?) << 16) as f64,
        Some(b'K') => {
            if digits.len() != 20 {
                return None;
            }
            let se = u16::from_str_radix(&digits[..4], 16).ok()?;
            let mant = u64::from_str_radix(&digits[4..], 16).ok()?;
            let sign = if se & 0x8000 != 0 { -1.0 } else { 1.0 };
            let exp = i32::from(se & 0x7fff);
            sign * (mant as f64) * 2f64.powi(exp - 16383 - 63)
        }
        Some(b'L') => {
            if digits.len() != 32 {
                return None;
            }
            let hi = u64::from_str_radix(&digits[16..], 16).ok()?;
            let sign = if hi >> 63 != 0 { -1.0 } else { 1.0 };
            let exp = ((hi >> 48) & 0x7fff) as i32;
            let frac = (hi & 0xffff_ffff_ffff) as f64 / (1u64 << 48) as f64;
            if exp == 0 && frac == 0.0 {
                0.0
            } else {
                sign * (1.0 + frac) * 2f64.powi(exp - 16383)
            }
        }
        Some(_) => {
            if digits.len() != 32 {
                return None;
            }
            let a = f64::from_bits(u64::from_str_radix(&digits[..16], 16).ok()?);
            let b = f64::from_bits(u64::from_str_radix(&digits[16..], 16).ok()?);
            a + b
        }
    };
    Some(value.to_bits())
}

fn half_to_f64(h: u16) -> f64 {
    let sign = if h & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = i32::from((h >> 10) & 0x1f);
    let frac = f64::from(h & 0x3ff);
    match exp {
        0 => sign * frac * 2f64.powi(-24),
        31 if frac == 0.0 => sign * f64::INFINITY,
        31 => f64::NAN,
        _ => sign * (1.0 + frac / 1024.0) * 2f64.powi(exp - 15),
    }
}

/// Spelling used as the `id` of a constant; depends only on the payload.
fn spelling(p: &ConstPayload) -> String {
    match p {
        ConstPayload::Int(v) => v.to_string(),
        ConstPayload::Float(bits) => format!("0x{bits:016X}"),
        ConstPayload::Bytes(b) => format!("c\"{}\"", super::printer::escape_bytes(b)),
        ConstPayload::Aggregate(els) => format!("aggregate[{}]", els.len()),
        ConstPayload::Expr { opcode, .. } => format!("{opcode}(...)"),
        ConstPayload::Keyword(k) => k.clone(),
        ConstPayload::BlockAddress { block, .. } => format!("blockaddress(%{block})"),
        ConstPayload::InlineAsm { .. } => "asm".into(),
    }
}

/// Renumbers types and values in first-visit order of a fixed traversal
/// (globals, then functions, then identified structs by name) and drops
/// anything the final module does not reference.
fn canonicalize(m: IrModule) -> IrModule {
    struct Walk<'a> {
        m: &'a IrModule,
        tmap: Vec<Option<u32>>,
        torder: Vec<TypeId>,
        vmap: Vec<Option<u32>>,
        vorder: Vec<ValueId>,
    }

    impl Walk<'_> {
        fn ty(&mut self, t: TypeId) {
            if self.tmap[t.index()].is_some() {
                return;
            }
            self.tmap[t.index()] = Some(self.torder.len() as u32);
            self.torder.push(t);
            for c in self.m.ty(t).children() {
                self.ty(c);
            }
        }

        fn detail(&mut self, d: &Detail) {
            match d {
                Detail::Alloca { allocated } => self.ty(*allocated),
                Detail::Gep { source, .. } => self.ty(*source),
                Detail::Call { callee_type, .. } => self.ty(*callee_type),
                _ => {}
            }
        }

        fn value(&mut self, v: ValueId) {
            if self.vmap[v.index()].is_some() {
                return;
            }
            self.vmap[v.index()] = Some(self.vorder.len() as u32);
            self.vorder.push(v);
            let info = self.m.value(v);
            self.ty(info.ty);
            match &info.constant_payload {
                Some(ConstPayload::Aggregate(els)) => {
                    for &e in els {
                        self.value(e);
                    }
                }
                Some(ConstPayload::Expr { operands, detail, .. }) => {
                    for &o in operands {
                        self.value(o);
                    }
                    self.detail(detail);
                }
                Some(ConstPayload::BlockAddress { function, .. }) => self.value(*function),
                _ => {}
            }
        }
    }

    let mut w = Walk {
        m: &m,
        tmap: vec![None; m.types.len()],
        torder: Vec::new(),
        vmap: vec![None; m.values.len()],
        vorder: Vec::new(),
    };
    for g in &m.globals {
        w.value(g.value);
        w.ty(g.value_type);
        if let Some(i) = g.initializer {
            w.value(i);
        }
    }
    for f in &m.functions {
        w.value(f.value);
        w.ty(f.ty);
        for &a in &f.args {
            w.value(a);
        }
        for inst in f.instructions() {
            if let Some(r) = inst.result {
                w.value(r);
            }
            for &o in &inst.operands {
                w.value(o);
            }
            w.ty(inst.result_type);
            w.detail(&inst.detail);
        }
    }
    for &t in m.named_types.values() {
        w.ty(t);
    }

    let (tmap, torder, vmap, vorder) = (w.tmap, w.torder, w.vmap, w.vorder);
    let t = |id: TypeId| TypeId(tmap[id.index()].expect("type visited"));
    let v = |id: ValueId| ValueId(vmap[id.index()].expect("value visited"));
    let remap_detail = |d: &Detail| match d {
        Detail::Alloca { allocated } => Detail::Alloca {
            allocated: t(*allocated),
        },
        Detail::Gep { source, inbounds } => Detail::Gep {
            source: t(*source),
            inbounds: *inbounds,
        },
        Detail::Call { callee_type, tail } => Detail::Call {
            callee_type: t(*callee_type),
            tail: tail.clone(),
        },
        other => other.clone(),
    };

    let types = torder
        .iter()
        .map(|&old| {
            let mut d = m.ty(old).clone();
            d.element = d.element.map(t);
            for mem in &mut d.members {
                *mem = t(*mem);
            }
            d
        })
        .collect();
    let values = vorder
        .iter()
        .map(|&old| {
            let mut info = m.value(old).clone();
            info.ty = t(info.ty);
            info.constant_payload = info.constant_payload.map(|p| match p {
                ConstPayload::Aggregate(els) => ConstPayload::Aggregate(els.into_iter().map(v).collect()),
                ConstPayload::Expr {
                    opcode,
                    operands,
                    detail,
                } => ConstPayload::Expr {
                    opcode,
                    operands: operands.into_iter().map(v).collect(),
                    detail: remap_detail(&detail),
                },
                ConstPayload::BlockAddress { function, block } => ConstPayload::BlockAddress {
                    function: v(function),
                    block,
                },
                other => other,
            });
            info
        })
        .collect();
    let globals = m
        .globals
        .iter()
        .map(|g| GlobalVar {
            value: v(g.value),
            value_type: t(g.value_type),
            initializer: g.initializer.map(v),
            ..g.clone()
        })
        .collect();
    let functions = m
        .functions
        .iter()
        .map(|f| Function {
            value: v(f.value),
            ty: t(f.ty),
            args: f.args.iter().map(|&a| v(a)).collect(),
            blocks: f
                .blocks
                .iter()
                .map(|b| BasicBlock {
                    label: b.label.clone(),
                    instructions: b
                        .instructions
                        .iter()
                        .map(|i| Instruction {
                            result: i.result.map(v),
                            operands: i.operands.iter().map(|&o| v(o)).collect(),
                            result_type: t(i.result_type),
                            detail: remap_detail(&i.detail),
                            ..i.clone()
                        })
                        .collect(),
                })
                .collect(),
            ..f.clone()
        })
        .collect();
    let named_types = m.named_types.iter().map(|(k, &id)| (k.clone(), t(id))).collect();
    IrModule {
        name: m.name.clone(),
        target_triple: m.target_triple.clone(),
        datalayout: m.datalayout.clone(),
        types,
        named_types,
        values,
        globals,
        functions,
        skipped: m.skipped.clone(),
    }
}
