//! Recursive-descent parser.

use super::ast::*;
use super::lexer::{Keyword, Token, TokenKind, TokenStream};
use super::SyntaxError;

/// Default bound on a multiplicity literal in a complex.
pub const DEFAULT_MAX_MULTIPLICITY: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_multiplicity: u32,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { max_multiplicity: DEFAULT_MAX_MULTIPLICITY }
    }
}

pub fn parse(tokens: &TokenStream) -> Result<Program, SyntaxError> {
    parse_with(tokens, ParseOptions::default())
}

pub fn parse_with(tokens: &TokenStream, options: ParseOptions) -> Result<Program, SyntaxError> {
    let mut p = Parser { toks: &tokens.tokens, pos: 0, stream: tokens, options };
    let body = p.stmt_list(true)?;
    let span = Span { start: 0, end: tokens.source_len, line: 1, column: 1 };
    Ok(Program { body, span })
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    stream: &'a TokenStream,
    options: ParseOptions,
}

type PResult<T> = Result<T, SyntaxError>;

/// A complex parsed before we know whether a reaction arrow follows;
/// multiplicities are validated only once committed.
struct RawTerm {
    multiplicity: Option<(f64, Span)>,
    species: Expr,
    span: Span,
}

enum RawComplex {
    Empty(Span),
    Terms(Vec<RawTerm>),
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn peek_at(&self, k: usize) -> Option<&'a TokenKind> {
        self.toks.get(self.pos + k).map(|t| &t.kind)
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek_kind() == Some(kind)
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        self.at(&TokenKind::Keyword(kw))
    }

    fn span_here(&self) -> Span {
        match self.peek() {
            Some(t) => Span { start: t.offset, end: t.offset + t.lexeme.len(), line: t.line, column: t.column },
            None => Span {
                start: self.stream.source_len,
                end: self.stream.source_len,
                line: self.stream.eof_line,
                column: self.stream.eof_column,
            },
        }
    }

    fn prev_span(&self) -> Span {
        let t = &self.toks[self.pos - 1];
        Span { start: t.offset, end: t.offset + t.lexeme.len(), line: t.line, column: t.column }
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let sp = self.span_here();
        let found = match self.peek() {
            Some(t) => t.kind.to_string(),
            None => "end of input".to_string(),
        };
        let message = match expected {
            [] => format!("unexpected {found}"),
            [one] => format!("expected {one}, found {found}"),
            many => format!("expected one of {}, found {found}", many.join(", ")),
        };
        SyntaxError {
            line: sp.line,
            column: sp.column,
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn error_at(&self, span: Span, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: span.line, column: span.column, message: message.into(), expected: Vec::new() }
    }

    fn expect(&mut self, kind: TokenKind, desc: &str) -> PResult<Span> {
        if self.at(&kind) {
            self.bump();
            Ok(self.prev_span())
        } else {
            Err(self.error(&[desc]))
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<Span> {
        let desc = format!("'{}'", kw.as_str());
        self.expect(TokenKind::Keyword(kw), &desc)
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek_kind() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.bump();
                Ok(Ident { name, span: self.prev_span() })
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek_kind() {
            Some(TokenKind::Str(s)) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["string"])),
        }
    }

    fn stmt_list(&mut self, top: bool) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            while self.at(&TokenKind::Semi) {
                self.bump();
            }
            match self.peek_kind() {
                None if top => return Ok(out),
                None => return Err(self.error(&["'}'"])),
                Some(TokenKind::RBrace) if !top => return Ok(out),
                Some(TokenKind::RBrace) => return Err(self.error(&["statement"])),
                _ => {}
            }
            let stmt = self.stmt()?;
            out.push(stmt);
            let ended_with_brace = matches!(self.toks[self.pos - 1].kind, TokenKind::RBrace);
            let line_break = self.peek().is_some_and(|t| t.leading.contains('\n'));
            match self.peek_kind() {
                Some(TokenKind::Semi) => {
                    self.bump();
                }
                None | Some(TokenKind::RBrace) => {}
                _ if ended_with_brace || line_break => {}
                _ => return Err(self.error(&["';'"])),
            }
        }
    }

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect(TokenKind::LBrace, "'{'")?;
        let stmts = self.stmt_list(false)?;
        let close = self.expect(TokenKind::RBrace, "'}'")?;
        Ok(Block { stmts, span: open.to(close) })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span_here();
        let kind = match self.peek_kind() {
            Some(TokenKind::Keyword(kw)) => match kw {
                Keyword::Let => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect(TokenKind::Assign, "'='")?;
                    let value = self.expr()?;
                    StmtKind::Let { name, value }
                }
                Keyword::Function if matches!(self.peek_at(1), Some(TokenKind::Ident(_))) => {
                    self.bump();
                    let name = self.ident()?;
                    let params = self.params()?;
                    let body = self.block()?;
                    StmtKind::Function { name, params, body }
                }
                Keyword::Species => {
                    self.bump();
                    let mut decls = Vec::new();
                    loop {
                        let name = self.ident()?;
                        let initial = if self.at(&TokenKind::At) {
                            self.bump();
                            Some(self.expr()?)
                        } else {
                            None
                        };
                        decls.push(SpeciesDecl { name, initial });
                        if !self.at(&TokenKind::Comma) {
                            break;
                        }
                        self.bump();
                    }
                    let sample = self.opt_in()?;
                    StmtKind::Species { decls, sample }
                }
                Keyword::Amount => {
                    self.bump();
                    let species = self.expr()?;
                    self.expect(TokenKind::At, "'@'")?;
                    let value = self.expr()?;
                    let sample = self.opt_in()?;
                    StmtKind::Amount { species, value, sample }
                }
                Keyword::If => return self.if_stmt(),
                Keyword::For => {
                    self.bump();
                    let var = self.ident()?;
                    self.expect_kw(Keyword::In)?;
                    let start_e = self.expr()?;
                    self.expect(TokenKind::DotDot, "'..'")?;
                    let end = self.expr()?;
                    let body = self.block()?;
                    StmtKind::For { var, start: start_e, end, body }
                }
                Keyword::Yield => {
                    self.bump();
                    StmtKind::Yield(self.expr()?)
                }
                Keyword::Report => {
                    self.bump();
                    let target = self.expr()?;
                    let label = if self.at_kw(Keyword::As) {
                        self.bump();
                        Some(self.string()?)
                    } else {
                        None
                    };
                    StmtKind::Report { target, label }
                }
                Keyword::Equilibrate => {
                    self.bump();
                    let first = self.expr()?;
                    let (sample, duration) = if self.at_kw(Keyword::For) {
                        self.bump();
                        (Some(first), self.expr()?)
                    } else {
                        (None, first)
                    };
                    let temperature = if self.at_kw(Keyword::At) {
                        self.bump();
                        Some(self.temperature()?)
                    } else {
                        None
                    };
                    StmtKind::Equilibrate { sample, duration, temperature }
                }
                Keyword::Sample => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect(TokenKind::LBrace, "'{'")?;
                    let mut volume = None;
                    let mut temperature = None;
                    loop {
                        while self.at(&TokenKind::Semi) {
                            self.bump();
                        }
                        if self.at(&TokenKind::RBrace) {
                            break;
                        }
                        let field = self.ident().map_err(|_| self.error(&["'volume'", "'temperature'", "'}'"]))?;
                        match field.name.as_str() {
                            "volume" if volume.is_none() => {
                                let v = self.expr()?;
                                let unit = match self.peek_kind() {
                                    Some(TokenKind::Ident(u)) => VolumeUnit::from_name(u),
                                    _ => None,
                                };
                                if unit.is_some() {
                                    self.bump();
                                }
                                volume = Some((v, unit));
                            }
                            "temperature" if temperature.is_none() => temperature = Some(self.temperature()?),
                            "volume" | "temperature" => {
                                return Err(self.error_at(field.span, format!("duplicate field '{}'", field.name)))
                            }
                            other => return Err(self.error_at(field.span, format!("unknown sample field '{other}'"))),
                        }
                        if !self.at(&TokenKind::RBrace) {
                            self.expect(TokenKind::Semi, "';'")?;
                        }
                    }
                    self.expect(TokenKind::RBrace, "'}'")?;
                    StmtKind::Sample { name, volume, temperature }
                }
                Keyword::Mix => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect(TokenKind::Assign, "'='")?;
                    let first = self.expr()?;
                    self.expect(TokenKind::Comma, "','")?;
                    let second = self.expr()?;
                    StmtKind::Mix { name, first, second }
                }
                Keyword::Split => {
                    self.bump();
                    let left = self.ident()?;
                    self.expect(TokenKind::Comma, "','")?;
                    let right = self.ident()?;
                    self.expect(TokenKind::Assign, "'='")?;
                    let source = self.expr()?;
                    let proportion = if self.at_kw(Keyword::By) {
                        self.bump();
                        Some(self.expr()?)
                    } else {
                        None
                    };
                    StmtKind::Split { left, right, source, proportion }
                }
                Keyword::Dispose => {
                    self.bump();
                    let mut items = vec![self.expr()?];
                    while self.at(&TokenKind::Comma) {
                        self.bump();
                        items.push(self.expr()?);
                    }
                    StmtKind::Dispose(items)
                }
                Keyword::Export => {
                    self.bump();
                    let dataset = self.expr()?;
                    self.expect_kw(Keyword::As)?;
                    let name = self.string()?;
                    StmtKind::Export { dataset, name }
                }
                Keyword::Nothing => self.reaction_or_expr()?,
                _ => StmtKind::Expr(self.expr()?),
            },
            Some(TokenKind::Number(_) | TokenKind::Ident(_) | TokenKind::LParen | TokenKind::EmptySet) => {
                self.reaction_or_expr()?
            }
            _ => StmtKind::Expr(self.expr()?),
        };
        Ok(Stmt { kind, span: start.to(self.prev_span()) })
    }

    fn opt_in(&mut self) -> PResult<Option<Expr>> {
        if self.at_kw(Keyword::In) {
            self.bump();
            Ok(Some(self.expr()?))
        } else {
            Ok(None)
        }
    }

    fn temperature(&mut self) -> PResult<Temperature> {
        let value = self.expr()?;
        let unit = if self.at_kw(Keyword::Celsius) {
            self.bump();
            Some(TempUnit::Celsius)
        } else if self.at_kw(Keyword::Kelvin) {
            self.bump();
            Some(TempUnit::Kelvin)
        } else {
            None
        };
        Ok(Temperature { value, unit })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect_kw(Keyword::If)?;
        let cond = self.expr()?;
        let then = self.block()?;
        let otherwise = if self.at_kw(Keyword::Else) {
            self.bump();
            if self.at_kw(Keyword::If) {
                Some(ElseBranch::If(Box::new(self.if_stmt()?)))
            } else {
                Some(ElseBranch::Block(self.block()?))
            }
        } else {
            None
        };
        Ok(Stmt { kind: StmtKind::If { cond, then, otherwise }, span: start.to(self.prev_span()) })
    }

    fn params(&mut self) -> PResult<Vec<Ident>> {
        self.expect(TokenKind::LParen, "'('")?;
        let mut out = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                out.push(self.ident()?);
                if !self.at(&TokenKind::Comma) {
                    break;
                }
                self.bump();
            }
        }
        self.expect(TokenKind::RParen, "')'")?;
        Ok(out)
    }

    fn reaction_or_expr(&mut self) -> PResult<StmtKind> {
        let save = self.pos;
        if let Ok(reagents) = self.raw_complex() {
            if matches!(self.peek_kind(), Some(TokenKind::Arrow | TokenKind::BiArrow)) {
                return self.reaction_tail(reagents);
            }
        }
        self.pos = save;
        Ok(StmtKind::Expr(self.expr()?))
    }

    fn reaction_tail(&mut self, reagents: RawComplex) -> PResult<StmtKind> {
        let reversible = matches!(self.bump().kind, TokenKind::BiArrow);
        let reagents = self.commit_complex(reagents)?;
        if !matches!(
            self.peek_kind(),
            Some(TokenKind::Number(_) | TokenKind::Ident(_) | TokenKind::LParen | TokenKind::EmptySet)
                | Some(TokenKind::Keyword(Keyword::Nothing))
        ) {
            return Err(self.error(&["species", "'∅'"]));
        }
        let raw = self.raw_complex()?;
        let products = self.commit_complex(raw)?;
        let mut rates = Vec::new();
        if self.at(&TokenKind::LBrace) {
            self.bump();
            loop {
                let general = if self.at_kw(Keyword::Rate) {
                    self.bump();
                    true
                } else {
                    false
                };
                rates.push(RateClause { general, expr: self.expr()? });
                if !self.at(&TokenKind::Comma) {
                    break;
                }
                self.bump();
            }
            self.expect(TokenKind::RBrace, "'}'")?;
            let wanted = if reversible { 2 } else { 1 };
            if rates.len() != wanted {
                return Err(self.error_at(
                    self.prev_span(),
                    format!(
                        "{} reaction takes {wanted} rate(s), found {}",
                        if reversible { "reversible" } else { "a" },
                        rates.len()
                    ),
                ));
            }
        }
        Ok(StmtKind::Reaction { reagents, products, reversible, rates })
    }

    fn raw_complex(&mut self) -> PResult<RawComplex> {
        if matches!(self.peek_kind(), Some(TokenKind::EmptySet | TokenKind::Keyword(Keyword::Nothing))) {
            self.bump();
            return Ok(RawComplex::Empty(self.prev_span()));
        }
        let mut terms = Vec::new();
        loop {
            let start = self.span_here();
            let multiplicity = if let Some(TokenKind::Number(v)) = self.peek_kind() {
                let v = *v;
                self.bump();
                let sp = self.prev_span();
                if self.at(&TokenKind::Star) {
                    self.bump();
                }
                Some((v, sp))
            } else {
                None
            };
            let species = self.complex_atom()?;
            terms.push(RawTerm { multiplicity, span: start.to(self.prev_span()), species });
            if !self.at(&TokenKind::Plus) {
                break;
            }
            self.bump();
        }
        Ok(RawComplex::Terms(terms))
    }

    fn complex_atom(&mut self) -> PResult<Expr> {
        let start = self.span_here();
        match self.peek_kind() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.bump();
                let mut e = Expr { kind: ExprKind::Var(name), span: self.prev_span() };
                while self.at(&TokenKind::LParen) {
                    let args = self.args(TokenKind::LParen, TokenKind::RParen, "')'")?;
                    e = Expr { kind: ExprKind::Call(Box::new(e), args), span: start.to(self.prev_span()) };
                }
                Ok(e)
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let mut e = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                e.span = start.to(self.prev_span());
                Ok(e)
            }
            _ => Err(self.error(&["species"])),
        }
    }

    fn commit_complex(&self, raw: RawComplex) -> PResult<ComplexAst> {
        match raw {
            RawComplex::Empty(sp) => Ok(ComplexAst::Empty(sp)),
            RawComplex::Terms(terms) => terms
                .into_iter()
                .map(|t| {
                    let multiplicity = match t.multiplicity {
                        None => 1,
                        Some((v, sp)) => {
                            if v.fract() != 0.0 || v < 1.0 {
                                return Err(
                                    self.error_at(sp, format!("multiplicity must be a positive integer, found {v}"))
                                );
                            }
                            if v > f64::from(self.options.max_multiplicity) {
                                return Err(self.error_at(
                                    sp,
                                    format!("multiplicity {v} exceeds the limit of {}", self.options.max_multiplicity),
                                ));
                            }
                            v as u32
                        }
                    };
                    Ok(Term { multiplicity, species: t.species, span: t.span })
                })
                .collect::<PResult<Vec<_>>>()
                .map(ComplexAst::Terms),
        }
    }

    fn args(&mut self, open: TokenKind, close: TokenKind, close_desc: &str) -> PResult<Vec<Expr>> {
        self.expect(open, "'('")?;
        let mut out = Vec::new();
        if !self.at(&close) {
            loop {
                out.push(self.expr()?);
                if !self.at(&TokenKind::Comma) {
                    break;
                }
                self.bump();
            }
        }
        self.expect(close, close_desc)?;
        Ok(out)
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek_kind()? {
            TokenKind::Keyword(Keyword::Or) => BinaryOp::Or,
            TokenKind::Keyword(Keyword::And) => BinaryOp::And,
            TokenKind::EqEq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            TokenKind::Plus => BinaryOp::Add,
            TokenKind::Minus => BinaryOp::Sub,
            TokenKind::Star => BinaryOp::Mul,
            TokenKind::Slash => BinaryOp::Div,
            _ => return None,
        })
    }

    /// Precedence climbing over the left-associative operators.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.prefix()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
            // comparisons do not chain
            if prec == 4 && matches!(self.binary_op(), Some(o) if o.precedence() == 4) {
                return Err(self.error(&["end of comparison"]));
            }
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> PResult<Expr> {
        let start = self.span_here();
        if self.at_kw(Keyword::Not) {
            self.bump();
            // `not` binds looser than comparisons
            let e = self.binary(3)?;
            return Ok(Expr { span: start.to(e.span), kind: ExprKind::Unary(UnOp::Not, Box::new(e)) });
        }
        if self.at(&TokenKind::Minus) {
            self.bump();
            let e = self.prefix()?;
            return Ok(Expr { span: start.to(e.span), kind: ExprKind::Unary(UnOp::Neg, Box::new(e)) });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.postfix()?;
        if self.at(&TokenKind::Caret) {
            self.bump();
            let exp = self.prefix()?;
            let span = base.span.to(exp.span);
            return Ok(Expr { kind: ExprKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)), span });
        }
        Ok(base)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.at(&TokenKind::LParen) {
            let args = self.args(TokenKind::LParen, TokenKind::RParen, "')'")?;
            let span = e.span.to(self.prev_span());
            e = Expr { kind: ExprKind::Call(Box::new(e), args), span };
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span_here();
        let kind = match self.peek_kind() {
            Some(TokenKind::Number(v)) => {
                let v = *v;
                self.bump();
                ExprKind::Number(v)
            }
            Some(TokenKind::Str(s)) => {
                let s = s.clone();
                self.bump();
                ExprKind::Str(s)
            }
            Some(TokenKind::Keyword(Keyword::True)) => {
                self.bump();
                ExprKind::Bool(true)
            }
            Some(TokenKind::Keyword(Keyword::False)) => {
                self.bump();
                ExprKind::Bool(false)
            }
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.bump();
                ExprKind::Var(name)
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                return Ok(Expr { kind: e.kind, span: start.to(self.prev_span()) });
            }
            Some(TokenKind::LBracket) => {
                let items = self.args(TokenKind::LBracket, TokenKind::RBracket, "']'")?;
                ExprKind::List(items)
            }
            Some(TokenKind::Keyword(Keyword::Function)) => {
                self.bump();
                let params = self.params()?;
                let body = self.block()?;
                ExprKind::Lambda(params, body)
            }
            _ => return Err(self.error(&["expression"])),
        };
        Ok(Expr { kind, span: start.to(self.prev_span()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_source, tokenize};

    fn parse_ok(src: &str) -> Program {
        parse_source(src).unwrap_or_else(|e| panic!("{src:?}: {e}"))
    }

    #[test]
    fn three_statement_program() {
        let p = parse_ok("species X @ 1.0; X -> ∅ {2.0}; equilibrate 10");
        assert_eq!(p.body.len(), 3);
        assert!(matches!(p.body[0].kind, StmtKind::Species { .. }));
        match &p.body[1].kind {
            StmtKind::Reaction { products: ComplexAst::Empty(_), rates, .. } => {
                assert_eq!(rates.len(), 1);
                assert!(!rates[0].general);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(p.body[2].kind, StmtKind::Equilibrate { sample: None, .. }));
    }

    #[test]
    fn missing_product_complex_is_a_syntax_error() {
        let err = parse_source("X -> {1}").unwrap_err();
        assert_eq!((err.line, err.column), (1, 6));
        assert!(err.message.contains("expected"), "{}", err.message);
    }

    #[test]
    fn multiplicity_limit_is_enforced_at_parse_time() {
        assert!(parse_source("17 A -> B").is_err());
        assert!(parse_source("16 A -> B").is_ok());
        let toks = tokenize("3 A -> B").unwrap();
        assert!(parse_with(&toks, ParseOptions { max_multiplicity: 2 }).is_err());
        assert!(parse_source("1.5 A -> B").is_err());
    }

    #[test]
    fn complexes_and_expressions_are_told_apart() {
        let p = parse_ok("f(2) + 1; 2 A + B -> A + C {rate k * A}");
        assert!(matches!(p.body[0].kind, StmtKind::Expr(_)));
        match &p.body[1].kind {
            StmtKind::Reaction { reagents: ComplexAst::Terms(t), rates, .. } => {
                assert_eq!(t[0].multiplicity, 2);
                assert!(rates[0].general);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reversible_needs_two_rates() {
        assert!(parse_source("A <-> B {1, 2}").is_ok());
        assert!(parse_source("A <-> B {1}").is_err());
        assert!(parse_source("A -> B {1, 2}").is_err());
    }

    #[test]
    fn precedence() {
        let p = parse_ok("let x = 1 + 2 * 3 ^ 2 ^ 2");
        let StmtKind::Let { value, .. } = &p.body[0].kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Add, _, rhs) = &value.kind else { panic!("{value:?}") };
        let ExprKind::Binary(BinaryOp::Mul, _, pow) = &rhs.kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Pow, _, inner) = &pow.kind else { panic!() };
        assert!(matches!(inner.kind, ExprKind::Binary(BinaryOp::Pow, _, _)));
        assert!(parse_source("let y = 1 < 2 < 3").is_err());
    }

    #[test]
    fn statements_need_separators() {
        assert!(parse_source("let a = 1 let b = 2").is_err());
        assert!(parse_source("let a = 1\nlet b = 2").is_ok());
        assert!(parse_source("A -> B {1}\nB -> A {1}").is_ok());
        assert!(parse_source("if true { A -> B } let c = 2").is_ok());
    }

    #[test]
    fn protocol_statements() {
        let p = parse_ok(
            "sample s { volume 2 uL; temperature 20 celsius }\n\
             species A @ 1 in s;\n\
             split a, b = s by 0.25;\n\
             equilibrate a for 10 at 37;\n\
             mix m = a, b;\n\
             dispose m",
        );
        assert_eq!(p.body.len(), 6);
        match &p.body[0].kind {
            StmtKind::Sample { volume: Some((_, Some(VolumeUnit::Microliter))), temperature: Some(t), .. } => {
                assert_eq!(t.unit, Some(TempUnit::Celsius))
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_source("sample s { colour 3 }").is_err());
    }

    #[test]
    fn errors_have_positions() {
        let err = parse_source("let a = 1;\nlet b = ;").unwrap_err();
        assert_eq!((err.line, err.column), (2, 9));
        let err = parse_source("function f(x) {").unwrap_err();
        assert!(err.message.contains("end of input"), "{}", err.message);
    }
}
