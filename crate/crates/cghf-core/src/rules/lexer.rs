use super::ast::Span;
use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Slash,
    Plus,
    Minus,
    Star,
    EqEq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(s) => format!("`${s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Num(n) => format!("`{n}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let span = Span { line: lx.line, col: lx.col };
        let Some(c) = lx.peek() else {
            out.push(Token { tok: Tok::Eof, span });
            return Ok(out);
        };
        let tok = match c {
            b'{' => lx.single(Tok::LBrace),
            b'}' => lx.single(Tok::RBrace),
            b'(' => lx.single(Tok::LParen),
            b')' => lx.single(Tok::RParen),
            b',' => lx.single(Tok::Comma),
            b':' => lx.single(Tok::Colon),
            b'/' => lx.single(Tok::Slash),
            b'+' => lx.single(Tok::Plus),
            b'-' => lx.single(Tok::Minus),
            b'*' => lx.single(Tok::Star),
            b'=' => {
                lx.advance();
                if lx.peek() == Some(b'=') {
                    lx.advance();
                    Tok::EqEq
                } else {
                    return Err(lex_error(span, "`=`; use `==` for equality"));
                }
            }
            b'!' => {
                lx.advance();
                if lx.peek() == Some(b'=') {
                    lx.advance();
                    Tok::Ne
                } else {
                    return Err(lex_error(span, "`!`; use `!=` or `not`"));
                }
            }
            b'<' => {
                lx.advance();
                if lx.peek() == Some(b'=') {
                    lx.advance();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            b'>' => {
                lx.advance();
                if lx.peek() == Some(b'=') {
                    lx.advance();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'"' => lx.string(span)?,
            b'$' => {
                lx.advance();
                let name = lx.ident_chars();
                if name.is_empty() {
                    return Err(lex_error(span, "`$` without a variable name"));
                }
                Tok::Var(name)
            }
            b'0'..=b'9' => lx.number(span)?,
            c if is_ident_start(c) => Tok::Ident(lx.ident_chars()),
            other => {
                return Err(lex_error(span, &format!("unexpected character `{}`", other as char)))
            }
        };
        out.push(Token { tok, span });
    }
}

fn lex_error(span: Span, found: &str) -> ParseError {
    ParseError {
        span,
        message: format!("unexpected {found}"),
        expected: Vec::new(),
        found: found.to_string(),
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_cont(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn advance(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xc0 != 0x80 {
            // Count characters, not continuation bytes.
            self.col += 1;
        }
        Some(c)
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.advance();
        tok
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.advance();
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.advance();
                    }
                }
                _ => return,
            }
        }
    }

    fn ident_chars(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_cont) {
            self.advance();
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self, span: Span) -> Result<Tok, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.advance();
        }
        if self.peek() == Some(b'.') && self.src.get(self.pos + 1).is_some_and(u8::is_ascii_digit) {
            self.advance();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.advance();
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mut lookahead = self.pos + 1;
            if matches!(self.src.get(lookahead), Some(b'+' | b'-')) {
                lookahead += 1;
            }
            if self.src.get(lookahead).is_some_and(u8::is_ascii_digit) {
                while self.pos < lookahead {
                    self.advance();
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.advance();
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| lex_error(span, &format!("malformed number `{text}`")))
    }

    fn string(&mut self, span: Span) -> Result<Tok, ParseError> {
        self.advance();
        let mut out = String::new();
        loop {
            match self.advance() {
                None | Some(b'\n') => return Err(lex_error(span, "unterminated string")),
                Some(b'"') => return Ok(Tok::Str(out)),
                Some(b'\\') => match self.advance() {
                    Some(b'"') => out.push('"'),
                    Some(b'\\') => out.push('\\'),
                    Some(b'n') => out.push('\n'),
                    Some(b't') => out.push('\t'),
                    Some(b'r') => out.push('\r'),
                    Some(b'u') => {
                        if self.advance() != Some(b'{') {
                            return Err(lex_error(span, "`\\u` without `{`"));
                        }
                        let mut hex = String::new();
                        loop {
                            match self.advance() {
                                Some(b'}') => break,
                                Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => {
                                    hex.push(c as char)
                                }
                                _ => return Err(lex_error(span, "malformed `\\u{...}` escape")),
                            }
                        }
                        let cp = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| lex_error(span, "invalid unicode escape"))?;
                        out.push(cp);
                    }
                    other => {
                        let shown = other.map(|c| c as char).unwrap_or('?');
                        return Err(lex_error(span, &format!("unknown escape `\\{shown}`")));
                    }
                },
                Some(c) if c < 0x80 => out.push(c as char),
                Some(first) => {
                    // Re-assemble a multi-byte UTF-8 character.
                    let mut buf = vec![first];
                    while self.peek().is_some_and(|c| c & 0xc0 == 0x80) {
                        buf.push(self.advance().unwrap());
                    }
                    match std::str::from_utf8(&buf) {
                        Ok(s) => out.push_str(s),
                        Err(_) => return Err(lex_error(span, "invalid utf-8 in string")),
                    }
                }
            }
        }
    }
}
