use super::{ParseError, SourcePos};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// `%name`, `%0`, `%"quoted name"` (sigil stripped).
    Local(String),
    /// `@name` (sigil stripped).
    Global(String),
    /// `#0` attribute group reference.
    AttrGroup(u32),
    /// `!name` or `!0` (sigil stripped).
    Meta(String),
    /// A lone `!`, as in `!{...}` or `!"string"`.
    Bang,
    /// `$name` comdat reference.
    Comdat(String),
    Int(String),
    Float(String),
    Str(Vec<u8>),
    CStr(Vec<u8>),
    /// `name:` block label definition.
    Label(String),
    Word(String),
    Punct(char),
    Ellipsis,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Local(s) => format!("%{s}"),
            Tok::Global(s) => format!("@{s}"),
            Tok::AttrGroup(n) => format!("#{n}"),
            Tok::Meta(s) => format!("!{s}"),
            Tok::Bang => "!".into(),
            Tok::Comdat(s) => format!("${s}"),
            Tok::Int(s) | Tok::Float(s) | Tok::Word(s) => s.clone(),
            Tok::Str(_) => "string literal".into(),
            Tok::CStr(_) => "c-string literal".into(),
            Tok::Label(s) => format!("label `{s}:`"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Ellipsis => "`...`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: SourcePos,
    /// True when a line break separates this token from the previous one.
    pub line_start: bool,
    /// Byte offset of the token in the source.
    pub offset: usize,
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'-' | b'$' | b'.' | b'_')
}

fn is_word_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || matches!(c, b'_' | b'.' | b'$')
}

fn is_word_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'_' | b'.' | b'$')
}

struct Lexer<'a> {
    src: &'a [u8],
    i: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.src.get(self.i + ahead).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.i).copied()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> SourcePos {
        SourcePos {
            line: self.line,
            col: self.col,
        }
    }

    fn error(&self, expected: &str, found: String) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            expected: expected.to_string(),
            found,
        }
    }

    /// Skips whitespace and comments; reports whether a newline was crossed.
    fn skip_trivia(&mut self) -> bool {
        let mut newline = false;
        while let Some(c) = self.peek(0) {
            match c {
                b'\n' => {
                    newline = true;
                    self.bump();
                }
                b' ' | b'\t' | b'\r' => {
                    self.bump();
                }
                b';' => {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
        newline
    }

    fn quoted(&mut self) -> Result<Vec<u8>, ParseError> {
        debug_assert_eq!(self.peek(0), Some(b'"'));
        self.bump();
        let mut out = Vec::new();
        loop {
            match self.bump() {
                None => return Err(self.error("closing `\"`", "end of input".into())),
                Some(b'"') => return Ok(out),
                Some(b'\\') => {
                    let hi = self.peek(0);
                    let lo = self.peek(1);
                    match (hi, lo) {
                        (Some(b'\\'), _) => {
                            self.bump();
                            out.push(b'\\');
                        }
                        (Some(h), Some(l)) if h.is_ascii_hexdigit() && l.is_ascii_hexdigit() => {
                            self.bump();
                            self.bump();
                            let byte = u8::from_str_radix(std::str::from_utf8(&[h, l]).unwrap_or("00"), 16)
                                .unwrap_or(0);
                            out.push(byte);
                        }
                        _ => out.push(b'\\'),
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn ident_after_sigil(&mut self) -> Result<String, ParseError> {
        if self.peek(0) == Some(b'"') {
            let bytes = self.quoted()?;
            return Ok(String::from_utf8_lossy(&bytes).into_owned());
        }
        let start = self.i;
        while self.peek(0).is_some_and(is_ident_char) {
            self.bump();
        }
        if start == self.i {
            return Err(self.error("identifier", "nothing".into()));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.i]).into_owned())
    }

    fn number(&mut self) -> Tok {
        let start = self.i;
        if self.peek(0) == Some(b'-') || self.peek(0) == Some(b'+') {
            self.bump();
        }
        if self.peek(0) == Some(b'0')
            && self.peek(1) == Some(b'x')
            && self
                .peek(2)
                .is_some_and(|c| c.is_ascii_hexdigit() || b"KLMHR".contains(&c))
        {
            self.bump();
            self.bump();
            if self.peek(0).is_some_and(|c| b"KLMHR".contains(&c)) {
                self.bump();
            }
            while self.peek(0).is_some_and(|c| c.is_ascii_hexdigit()) {
                self.bump();
            }
            return Tok::Float(String::from_utf8_lossy(&self.src[start..self.i]).into_owned());
        }
        while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let mut is_float = false;
        if self.peek(0) == Some(b'.') {
            is_float = true;
            self.bump();
            while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(0), Some(b'e') | Some(b'E'))
            && (self.peek(1).is_some_and(|c| c.is_ascii_digit())
                || (matches!(self.peek(1), Some(b'+') | Some(b'-'))
                    && self.peek(2).is_some_and(|c| c.is_ascii_digit())))
        {
            is_float = true;
            self.bump();
            if matches!(self.peek(0), Some(b'+') | Some(b'-')) {
                self.bump();
            }
            while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        let text = String::from_utf8_lossy(&self.src[start..self.i]).into_owned();
        if is_float {
            Tok::Float(text)
        } else {
            Tok::Int(text)
        }
    }

    fn next(&mut self) -> Result<Option<(Tok, SourcePos, usize)>, ParseError> {
        let pos = self.pos();
        let offset = self.i;
        let Some(c) = self.peek(0) else {
            return Ok(None);
        };
        let tok = match c {
            b'%' => {
                self.bump();
                Tok::Local(self.ident_after_sigil()?)
            }
            b'@' => {
                self.bump();
                Tok::Global(self.ident_after_sigil()?)
            }
            b'$' => {
                self.bump();
                Tok::Comdat(self.ident_after_sigil()?)
            }
            b'#' => {
                self.bump();
                let start = self.i;
                while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
                let digits = std::str::from_utf8(&self.src[start..self.i]).unwrap_or("");
                let n = digits
                    .parse()
                    .map_err(|_| self.error("attribute group number", "`#`".into()))?;
                Tok::AttrGroup(n)
            }
            b'!' => {
                self.bump();
                match self.peek(0) {
                    Some(c) if is_ident_char(c) || c == b'\\' => {
                        let start = self.i;
                        while self.peek(0).is_some_and(|c| is_ident_char(c) || c == b'\\') {
                            self.bump();
                        }
                        Tok::Meta(String::from_utf8_lossy(&self.src[start..self.i]).into_owned())
                    }
                    _ => Tok::Bang,
                }
            }
            b'"' => {
                let bytes = self.quoted()?;
                if self.peek(0) == Some(b':') {
                    self.bump();
                    Tok::Label(String::from_utf8_lossy(&bytes).into_owned())
                } else {
                    Tok::Str(bytes)
                }
            }
            b'c' if self.peek(1) == Some(b'"') => {
                self.bump();
                Tok::CStr(self.quoted()?)
            }
            b'.' if self.peek(1) == Some(b'.') && self.peek(2) == Some(b'.') => {
                self.bump();
                self.bump();
                self.bump();
                Tok::Ellipsis
            }
            b'-' | b'+' | b'0'..=b'9' => {
                // Numeric labels (`12:`) come out as Int followed by `:`.
                let tok = self.number();
                if let Tok::Int(ref digits) = tok {
                    if self.peek(0) == Some(b':') && !digits.starts_with(['-', '+']) {
                        self.bump();
                        return Ok(Some((Tok::Label(digits.clone()), pos, offset)));
                    }
                }
                tok
            }
            c if is_word_start(c) => {
                let start = self.i;
                while self.peek(0).is_some_and(|c| is_word_char(c) || c == b'-') {
                    self.bump();
                }
                let word = String::from_utf8_lossy(&self.src[start..self.i]).into_owned();
                if self.peek(0) == Some(b':') {
                    self.bump();
                    Tok::Label(word)
                } else {
                    Tok::Word(word)
                }
            }
            b'=' | b',' | b'(' | b')' | b'[' | b']' | b'{' | b'}' | b'<' | b'>' | b'*' | b':' | b'|' => {
                self.bump();
                Tok::Punct(c as char)
            }
            other => {
                return Err(self.error(
                    "token",
                    format!("character `{}`", (other as char).escape_default()),
                ))
            }
        };
        Ok(Some((tok, pos, offset)))
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    let mut first = true;
    loop {
        let newline = lx.skip_trivia() || first;
        first = false;
        match lx.next()? {
            Some((tok, pos, offset)) => out.push(Token {
                tok,
                pos,
                line_start: newline,
                offset,
            }),
            None => {
                out.push(Token {
                    tok: Tok::Eof,
                    pos: lx.pos(),
                    line_start: true,
                    offset: lx.i,
                });
                return Ok(out);
            }
        }
    }
}
