use std::fmt;
use std::ops::Deref;

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Species,
    Amount,
    Function,
    If,
    Else,
    Let,
    Yield,
    Report,
    As,
    Equilibrate,
    For,
    At,
    In,
    Sample,
    Mix,
    Split,
    By,
    Dispose,
    Export,
    Nothing,
    Rate,
    True,
    False,
    And,
    Or,
    Not,
    Celsius,
    Kelvin,
}

impl Keyword {
    pub fn lookup(s: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match s {
            "species" => Species,
            "amount" => Amount,
            "function" => Function,
            "if" => If,
            "else" => Else,
            "let" => Let,
            "yield" => Yield,
            "report" => Report,
            "as" => As,
            "equilibrate" => Equilibrate,
            "for" => For,
            "at" => At,
            "in" => In,
            "sample" => Sample,
            "mix" => Mix,
            "split" => Split,
            "by" => By,
            "dispose" => Dispose,
            "export" => Export,
            "nothing" => Nothing,
            "rate" => Rate,
            "true" => True,
            "false" => False,
            "and" => And,
            "or" => Or,
            "not" => Not,
            "celsius" => Celsius,
            "kelvin" => Kelvin,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        use Keyword::*;
        match self {
            Species => "species",
            Amount => "amount",
            Function => "function",
            If => "if",
            Else => "else",
            Let => "let",
            Yield => "yield",
            Report => "report",
            As => "as",
            Equilibrate => "equilibrate",
            For => "for",
            At => "at",
            In => "in",
            Sample => "sample",
            Mix => "mix",
            Split => "split",
            By => "by",
            Dispose => "dispose",
            Export => "export",
            Nothing => "nothing",
            Rate => "rate",
            True => "true",
            False => "false",
            And => "and",
            Or => "or",
            Not => "not",
            Celsius => "celsius",
            Kelvin => "kelvin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    Str(String),
    Keyword(Keyword),
    Arrow,
    BiArrow,
    EmptySet,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    At,
    DotDot,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(name) => return write!(f, "identifier '{name}'"),
            TokenKind::Number(v) => return write!(f, "number {v}"),
            TokenKind::Str(_) => "string",
            TokenKind::Keyword(k) => return write!(f, "'{}'", k.as_str()),
            TokenKind::Arrow => "'->'",
            TokenKind::BiArrow => "'<->'",
            TokenKind::EmptySet => "'∅'",
            TokenKind::Plus => "'+'",
            TokenKind::Minus => "'-'",
            TokenKind::Star => "'*'",
            TokenKind::Slash => "'/'",
            TokenKind::Caret => "'^'",
            TokenKind::Assign => "'='",
            TokenKind::EqEq => "'=='",
            TokenKind::NotEq => "'!='",
            TokenKind::Lt => "'<'",
            TokenKind::Le => "'<='",
            TokenKind::Gt => "'>'",
            TokenKind::Ge => "'>='",
            TokenKind::LParen => "'('",
            TokenKind::RParen => "')'",
            TokenKind::LBrace => "'{'",
            TokenKind::RBrace => "'}'",
            TokenKind::LBracket => "'['",
            TokenKind::RBracket => "']'",
            TokenKind::Comma => "','",
            TokenKind::Semi => "';'",
            TokenKind::At => "'@'",
            TokenKind::DotDot => "'..'",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// Whitespace and comments preceding the token.
    pub leading: String,
    /// Byte offset of the lexeme.
    pub offset: usize,
    /// 1-based.
    pub line: u32,
    /// 1-based, in characters.
    pub column: u32,
}

/// Tokens plus the trivia after the last one; `leading` + `lexeme` of every
/// token followed by `trailing` reproduces the source exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub trailing: String,
    pub source_len: usize,
    /// Position just past the end of the source.
    pub eof_line: u32,
    pub eof_column: u32,
}

impl TokenStream {
    pub fn reconstruct(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(&t.leading);
            s.push_str(&t.lexeme);
        }
        s.push_str(&self.trailing);
        s
    }
}

impl Deref for TokenStream {
    type Target = [Token];
    fn deref(&self) -> &[Token] {
        &self.tokens
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: self.line, column: self.column, message: message.into(), expected: Vec::new() }
    }
}

pub fn tokenize(source: &str) -> Result<TokenStream, SyntaxError> {
    let mut cur = Cursor { src: source, pos: 0, line: 1, column: 1 };
    let mut tokens = Vec::new();
    loop {
        let trivia_start = cur.pos;
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '#' {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            } else {
                break;
            }
        }
        let leading = source[trivia_start..cur.pos].to_string();
        let Some(c) = cur.peek() else {
            return Ok(TokenStream {
                tokens,
                trailing: leading,
                source_len: source.len(),
                eof_line: cur.line,
                eof_column: cur.column,
            });
        };
        let (start, line, column) = (cur.pos, cur.line, cur.column);
        let kind = lex_one(&mut cur, c)?;
        tokens.push(Token { kind, lexeme: source[start..cur.pos].to_string(), leading, offset: start, line, column });
    }
}

fn lex_one(cur: &mut Cursor<'_>, c: char) -> Result<TokenKind, SyntaxError> {
    if c.is_ascii_digit() {
        return lex_number(cur);
    }
    if c.is_ascii_alphabetic() || c == '_' {
        let start = cur.pos;
        while matches!(cur.peek(), Some(ch) if ch.is_ascii_alphanumeric() || ch == '_') {
            cur.bump();
        }
        let word = &cur.src[start..cur.pos];
        return Ok(match Keyword::lookup(word) {
            Some(k) => TokenKind::Keyword(k),
            None => TokenKind::Ident(word.to_string()),
        });
    }
    if c == '"' {
        return lex_string(cur);
    }
    let two = |cur: &mut Cursor<'_>, kind: TokenKind| {
        cur.bump();
        cur.bump();
        Ok(kind)
    };
    let one = |cur: &mut Cursor<'_>, kind: TokenKind| {
        cur.bump();
        Ok(kind)
    };
    match (c, cur.peek2()) {
        ('-', Some('>')) => two(cur, TokenKind::Arrow),
        ('<', Some('-')) => {
            let rest = &cur.src[cur.pos..];
            if rest.starts_with("<->") {
                cur.bump();
                cur.bump();
                cur.bump();
                Ok(TokenKind::BiArrow)
            } else {
                one(cur, TokenKind::Lt)
            }
        }
        ('=', Some('=')) => two(cur, TokenKind::EqEq),
        ('!', Some('=')) => two(cur, TokenKind::NotEq),
        ('<', Some('=')) => two(cur, TokenKind::Le),
        ('>', Some('=')) => two(cur, TokenKind::Ge),
        ('.', Some('.')) => two(cur, TokenKind::DotDot),
        ('∅', _) => one(cur, TokenKind::EmptySet),
        ('+', _) => one(cur, TokenKind::Plus),
        ('-', _) => one(cur, TokenKind::Minus),
        ('*', _) => one(cur, TokenKind::Star),
        ('/', _) => one(cur, TokenKind::Slash),
        ('^', _) => one(cur, TokenKind::Caret),
        ('=', _) => one(cur, TokenKind::Assign),
        ('<', _) => one(cur, TokenKind::Lt),
        ('>', _) => one(cur, TokenKind::Gt),
        ('(', _) => one(cur, TokenKind::LParen),
        (')', _) => one(cur, TokenKind::RParen),
        ('{', _) => one(cur, TokenKind::LBrace),
        ('}', _) => one(cur, TokenKind::RBrace),
        ('[', _) => one(cur, TokenKind::LBracket),
        (']', _) => one(cur, TokenKind::RBracket),
        (',', _) => one(cur, TokenKind::Comma),
        (';', _) => one(cur, TokenKind::Semi),
        ('@', _) => one(cur, TokenKind::At),
        _ => Err(cur.error(format!("illegal character {c:?}"))),
    }
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<TokenKind, SyntaxError> {
    let start = cur.pos;
    let digits = |cur: &mut Cursor<'_>| {
        while matches!(cur.peek(), Some(ch) if ch.is_ascii_digit()) {
            cur.bump();
        }
    };
    digits(cur);
    if cur.peek() == Some('.') {
        match cur.peek2() {
            Some('.') => {}
            Some(d) if d.is_ascii_digit() => {
                cur.bump();
                digits(cur);
                if cur.peek() == Some('.') && cur.peek2() != Some('.') {
                    return Err(cur.error("malformed number"));
                }
            }
            _ => {
                cur.bump();
                return Err(cur.error("malformed number: expected digits after '.'"));
            }
        }
    }
    // an `e` not followed by exponent digits starts an identifier (`2E` is 2 E)
    if matches!(cur.peek(), Some('e' | 'E')) {
        let save = (cur.pos, cur.line, cur.column);
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        if matches!(cur.peek(), Some(d) if d.is_ascii_digit()) {
            digits(cur);
        } else {
            (cur.pos, cur.line, cur.column) = save;
        }
    }
    let text = &cur.src[start..cur.pos];
    let value: f64 = text.parse().map_err(|_| cur.error("malformed number"))?;
    if !value.is_finite() {
        return Err(cur.error(format!("number {text} is out of range")));
    }
    Ok(TokenKind::Number(value))
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<TokenKind, SyntaxError> {
    let (line, column) = (cur.line, cur.column);
    cur.bump();
    let mut value = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => {
                return Err(SyntaxError { line, column, message: "unterminated string".into(), expected: Vec::new() })
            }
            Some('"') => return Ok(TokenKind::Str(value)),
            Some('\\') => match cur.bump() {
                Some('n') => value.push('\n'),
                Some('t') => value.push('\t'),
                Some('"') => value.push('"'),
                Some('\\') => value.push('\\'),
                _ => return Err(cur.error("unknown escape sequence")),
            },
            Some(ch) => value.push(ch),
        }
    }
}
