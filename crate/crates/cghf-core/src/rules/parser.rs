use thiserror::Error;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use crate::facts::AggregateFn;
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    /// Token descriptions that would have been accepted here.
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    fn new(span: Span, expected: &[&str], found: &Token) -> ParseError {
        let found = found.tok.describe();
        ParseError {
            span,
            message: format!("expected {}, found {}", expected.join(" or "), found),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }
}

/// Parse a whole `.rules` file. On failure every error carries the line and
/// column it was detected at plus the token set that was expected; the
/// parser recovers at top-level block boundaries so one bad block does not
/// mask errors in later ones.
pub fn parse(src: &str) -> Result<RuleSet, Vec<ParseError>> {
    let tokens = match lex(src) {
        Ok(t) => t,
        Err(e) => return Err(vec![e]),
    };
    let mut p = Parser { tokens, pos: 0 };
    let mut rs = RuleSet::default();
    let mut errors = Vec::new();
    loop {
        match p.peek().tok.clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "entity" => match p.entity_decl() {
                Ok(e) => rs.entities.push(e),
                Err(e) => {
                    errors.push(e);
                    p.recover();
                }
            },
            Tok::Ident(kw) if kw == "factdef" => match p.factdef() {
                Ok(f) => rs.factdefs.push(f),
                Err(e) => {
                    errors.push(e);
                    p.recover();
                }
            },
            Tok::Ident(kw) if kw == "rule" => match p.rule() {
                Ok(r) => rs.rules.push(r),
                Err(e) => {
                    errors.push(e);
                    p.recover();
                }
            },
            _ => {
                errors.push(ParseError::new(p.peek().span, &["entity", "factdef", "rule"], p.peek()));
                p.recover();
            }
        }
    }
    if errors.is_empty() {
        Ok(rs)
    } else {
        Err(errors)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    /// Skip to the next top-level block keyword at brace depth zero.
    fn recover(&mut self) {
        let mut depth = 0i32;
        loop {
            match &self.peek().tok {
                Tok::Eof => return,
                Tok::LBrace => {
                    depth += 1;
                    self.next();
                }
                Tok::RBrace => {
                    depth -= 1;
                    self.next();
                    if depth <= 0 {
                        return;
                    }
                }
                Tok::Ident(kw) if depth == 0 && matches!(kw.as_str(), "entity" | "factdef" | "rule") => {
                    return
                }
                _ => {
                    self.next();
                }
            }
        }
    }

    fn expect(&mut self, tok: Tok, describe: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(ParseError::new(self.peek().span, &[describe], self.peek()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Token, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => Ok(self.next()),
            _ => Err(ParseError::new(self.peek().span, &[kw], self.peek())),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<Spanned<String>, ParseError> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                let span = self.next().span;
                Ok(Spanned::new(s, span))
            }
            _ => Err(ParseError::new(self.peek().span, &[what], self.peek())),
        }
    }

    fn string(&mut self, what: &str) -> Result<Spanned<String>, ParseError> {
        match self.peek().tok.clone() {
            Tok::Str(s) => {
                let span = self.next().span;
                Ok(Spanned::new(s, span))
            }
            _ => Err(ParseError::new(self.peek().span, &[what], self.peek())),
        }
    }

    fn number(&mut self, what: &str) -> Result<(f64, Span), ParseError> {
        match self.peek().tok.clone() {
            Tok::Num(n) => {
                let span = self.next().span;
                Ok((n, span))
            }
            _ => Err(ParseError::new(self.peek().span, &[what], self.peek())),
        }
    }

    fn integer(&mut self, what: &str) -> Result<i64, ParseError> {
        let negative = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let (n, span) = self.number(what)?;
        if n.fract() != 0.0 || n < 0.0 || n > i64::MAX as f64 {
            return Err(ParseError {
                span,
                message: format!("expected an integer {what}, found `{n}`"),
                expected: vec![what.to_string()],
                found: format!("`{n}`"),
            });
        }
        Ok(if negative { -(n as i64) } else { n as i64 })
    }

    /// NUMBER followed by `ms`, `s`, or `min`; normalized to whole ms.
    fn duration(&mut self) -> Result<u64, ParseError> {
        let (n, span) = self.number("duration")?;
        let unit = self.ident("duration unit (ms, s, min)")?;
        let factor = match unit.node.as_str() {
            "ms" => 1.0,
            "s" => 1000.0,
            "min" => 60_000.0,
            other => {
                return Err(ParseError {
                    span: unit.span,
                    message: format!("expected duration unit ms, s, or min, found `{other}`"),
                    expected: vec!["ms".into(), "s".into(), "min".into()],
                    found: format!("`{other}`"),
                })
            }
        };
        let ms = n * factor;
        if ms < 0.0 || ms.fract() != 0.0 || ms > u64::MAX as f64 {
            return Err(ParseError {
                span,
                message: format!("duration `{n} {}` is not a whole number of ms", unit.node),
                expected: vec!["whole-millisecond duration".into()],
                found: format!("`{n} {}`", unit.node),
            });
        }
        Ok(ms as u64)
    }

    // -----------------------------------------------------------------
    // entity

    fn entity_decl(&mut self) -> Result<EntityDecl, ParseError> {
        self.expect_keyword("entity")?;
        let name = self.ident("entity name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut attrs = Vec::new();
        while !matches!(self.peek().tok, Tok::RBrace | Tok::Eof) {
            self.expect_keyword("attr")?;
            let attr_name = self.ident("attribute name")?;
            self.expect(Tok::Colon, "`:`")?;
            let ty_tok = self.ident("type (number, string, bool, entity)")?;
            let ty = match ty_tok.node.as_str() {
                "number" => ValueType::Number,
                "string" => ValueType::String,
                "bool" | "boolean" => ValueType::Bool,
                "entity" => ValueType::Entity,
                other => {
                    return Err(ParseError {
                        span: ty_tok.span,
                        message: format!(
                            "expected type number, string, bool, or entity, found `{other}`"
                        ),
                        expected: vec!["number".into(), "string".into(), "bool".into(), "entity".into()],
                        found: format!("`{other}`"),
                    })
                }
            };
            let unit = if self.at_keyword("unit") {
                self.next();
                Some(self.string("unit string")?.node)
            } else {
                None
            };
            let dynamic = if self.at_keyword("dynamic") {
                self.next();
                true
            } else if self.at_keyword("static") {
                self.next();
                false
            } else {
                return Err(ParseError::new(self.peek().span, &["static", "dynamic"], self.peek()));
            };
            attrs.push(AttrDecl { name: attr_name, ty, unit, dynamic });
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(EntityDecl { name, attrs })
    }

    // -----------------------------------------------------------------
    // factdef

    fn factdef(&mut self) -> Result<FactDefinition, ParseError> {
        self.expect_keyword("factdef")?;
        let name = self.ident("fact definition name")?;
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut stream: Option<Spanned<String>> = None;
        let mut func: Option<AggregateFn> = None;
        let mut window: Option<u64> = None;
        let mut ttl: Option<u64> = None;
        let mut min_interval: Option<u64> = None;
        let mut arms = Vec::new();
        loop {
            let tok = self.peek().clone();
            match &tok.tok {
                Tok::RBrace => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "stream" => {
                        self.next();
                        let s = self.string("stream topic string")?;
                        if stream.replace(s).is_some() {
                            return Err(duplicate_field(tok.span, "stream"));
                        }
                    }
                    "fn" => {
                        self.next();
                        let f = self.ident("aggregate fn (mean, rate_of_change, trend_slope, forecast)")?;
                        let parsed = match f.node.as_str() {
                            "mean" => AggregateFn::Mean,
                            "rate_of_change" => AggregateFn::RateOfChange,
                            "trend_slope" => AggregateFn::TrendSlope,
                            "forecast" => {
                                self.expect_keyword("horizon")?;
                                AggregateFn::Forecast { horizon_ms: self.duration()? }
                            }
                            other => {
                                return Err(ParseError {
                                    span: f.span,
                                    message: format!("unknown aggregate fn `{other}`"),
                                    expected: vec![
                                        "mean".into(),
                                        "rate_of_change".into(),
                                        "trend_slope".into(),
                                        "forecast".into(),
                                    ],
                                    found: format!("`{other}`"),
                                })
                            }
                        };
                        if func.replace(parsed).is_some() {
                            return Err(duplicate_field(tok.span, "fn"));
                        }
                    }
                    "window" => {
                        self.next();
                        if window.replace(self.duration()?).is_some() {
                            return Err(duplicate_field(tok.span, "window"));
                        }
                    }
                    "ttl" => {
                        self.next();
                        if ttl.replace(self.duration()?).is_some() {
                            return Err(duplicate_field(tok.span, "ttl"));
                        }
                    }
                    "min_interval" => {
                        self.next();
                        if min_interval.replace(self.duration()?).is_some() {
                            return Err(duplicate_field(tok.span, "min_interval"));
                        }
                    }
                    "when" => {
                        self.next();
                        let predicate = self.expr()?;
                        self.expect_keyword("emit")?;
                        self.expect_keyword("fact")?;
                        self.expect(Tok::LParen, "`(`")?;
                        let subject = self.string("subject string")?;
                        self.expect(Tok::Comma, "`,`")?;
                        let attribute = self.string("attribute string")?;
                        self.expect(Tok::Comma, "`,`")?;
                        let value = self.emit_value()?;
                        self.expect(Tok::RParen, "`)`")?;
                        arms.push(ClassifierArm { predicate, subject, attribute, value });
                    }
                    _ => {
                        return Err(ParseError::new(
                            tok.span,
                            &["stream", "fn", "window", "ttl", "min_interval", "when"],
                            &tok,
                        ))
                    }
                },
                _ => {
                    return Err(ParseError::new(
                        tok.span,
                        &["stream", "fn", "window", "ttl", "min_interval", "when", "`}`"],
                        &tok,
                    ))
                }
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        let missing_field = |field: &str| ParseError {
            span: open.span,
            message: format!("fact definition `{}` is missing required field `{field}`", name.node),
            expected: vec![field.to_string()],
            found: "`}`".into(),
        };
        let stream = stream.ok_or_else(|| missing_field("stream"))?;
        let func = func.ok_or_else(|| missing_field("fn"))?;
        let window_ms = window.ok_or_else(|| missing_field("window"))?;
        let ttl_ms = ttl.ok_or_else(|| missing_field("ttl"))?;
        if arms.is_empty() {
            return Err(missing_field("when"));
        }
        Ok(FactDefinition { name, stream, func, window_ms, ttl_ms, min_interval_ms: min_interval, arms })
    }

    fn emit_value(&mut self) -> Result<EmitValue, ParseError> {
        match self.peek().tok.clone() {
            Tok::Var(v) if v == "value" => {
                self.next();
                Ok(EmitValue::Aggregate)
            }
            Tok::Str(s) => {
                self.next();
                Ok(EmitValue::Lit(Value::Str(s)))
            }
            Tok::Num(n) => {
                self.next();
                Ok(EmitValue::Lit(Value::Number(n)))
            }
            Tok::Minus => {
                self.next();
                let (n, _) = self.number("number")?;
                Ok(EmitValue::Lit(Value::Number(-n)))
            }
            Tok::Ident(b) if b == "true" || b == "false" => {
                self.next();
                Ok(EmitValue::Lit(Value::Bool(b == "true")))
            }
            _ => Err(ParseError::new(
                self.peek().span,
                &["literal", "$value"],
                self.peek(),
            )),
        }
    }

    // -----------------------------------------------------------------
    // rule

    fn rule(&mut self) -> Result<Rule, ParseError> {
        self.expect_keyword("rule")?;
        let name = self.ident("rule name")?;
        self.expect_keyword("priority")?;
        let priority = self.integer("priority")?;
        self.expect_keyword("ttl")?;
        let ttl_ms = self.duration()?;
        self.expect(Tok::LBrace, "`{`")?;
        self.expect_keyword("when")?;
        let mut patterns = vec![self.fact_pattern()?];
        while self.at_keyword("and") {
            self.next();
            patterns.push(self.fact_pattern()?);
        }
        let condition = if self.at_keyword("where") {
            self.next();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_keyword("then")?;
        let mut actions = vec![self.action()?];
        while self.at_keyword("publish") || self.at_keyword("assert") {
            actions.push(self.action()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Rule { name, priority, ttl_ms, patterns, condition, actions })
    }

    fn fact_pattern(&mut self) -> Result<FactPattern, ParseError> {
        self.expect_keyword("fact")?;
        self.expect(Tok::LParen, "`(`")?;
        let subject = self.term()?;
        self.expect(Tok::Comma, "`,`")?;
        let attribute = self.string("attribute string")?;
        self.expect(Tok::Comma, "`,`")?;
        let value = self.term()?;
        self.expect(Tok::RParen, "`)`")?;
        let alias = if self.at_keyword("as") {
            self.next();
            Some(self.ident("alias name")?)
        } else {
            None
        };
        Ok(FactPattern { subject, attribute, value, alias })
    }

    fn term(&mut self) -> Result<Spanned<Term>, ParseError> {
        let span = self.peek().span;
        match self.peek().tok.clone() {
            Tok::Var(v) => {
                self.next();
                Ok(Spanned::new(Term::Var(v), span))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Spanned::new(Term::Lit(Value::Str(s)), span))
            }
            Tok::Num(n) => {
                self.next();
                Ok(Spanned::new(Term::Lit(Value::Number(n)), span))
            }
            Tok::Minus => {
                self.next();
                let (n, _) = self.number("number")?;
                Ok(Spanned::new(Term::Lit(Value::Number(-n)), span))
            }
            Tok::Ident(b) if b == "true" || b == "false" => {
                self.next();
                Ok(Spanned::new(Term::Lit(Value::Bool(b == "true")), span))
            }
            _ => Err(ParseError::new(span, &["variable", "literal"], self.peek())),
        }
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        if self.at_keyword("publish") {
            let span = self.next().span;
            // The topic template starts with the mandatory `context` root.
            self.expect_keyword("context")?;
            let mut segments = vec![TopicSeg::Lit("context".to_string())];
            self.expect(Tok::Slash, "`/`")?;
            loop {
                let seg_span = self.peek().span;
                match self.peek().tok.clone() {
                    Tok::Ident(s) => {
                        self.next();
                        segments.push(TopicSeg::Lit(s));
                    }
                    Tok::Str(s) => {
                        self.next();
                        segments.push(TopicSeg::Lit(s));
                    }
                    Tok::Var(v) => {
                        self.next();
                        segments.push(TopicSeg::Var(Spanned::new(v, seg_span)));
                    }
                    _ => {
                        return Err(ParseError::new(
                            seg_span,
                            &["topic segment", "variable"],
                            self.peek(),
                        ))
                    }
                }
                if self.peek().tok == Tok::Slash {
                    self.next();
                } else {
                    break;
                }
            }
            self.expect(Tok::LBrace, "`{`")?;
            let mut fields = Vec::new();
            loop {
                let field_name = self.ident("field name")?;
                self.expect(Tok::Colon, "`:`")?;
                let value = self.expr()?;
                fields.push((field_name, value));
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
            self.expect(Tok::RBrace, "`}`")?;
            Ok(Action::Publish(PublishTemplate { segments, fields, span }))
        } else if self.at_keyword("assert") {
            let span = self.next().span;
            self.expect_keyword("fact")?;
            self.expect(Tok::LParen, "`(`")?;
            let subject = self.term()?;
            self.expect(Tok::Comma, "`,`")?;
            let attribute = self.string("attribute string")?;
            self.expect(Tok::Comma, "`,`")?;
            let value = self.expr()?;
            self.expect(Tok::Comma, "`,`")?;
            self.expect_keyword("ttl")?;
            let ttl_ms = self.duration()?;
            self.expect(Tok::RParen, "`)`")?;
            Ok(Action::Assert(AssertTemplate { subject, attribute, value, ttl_ms, span }))
        } else {
            Err(ParseError::new(self.peek().span, &["publish", "assert"], self.peek()))
        }
    }

    // -----------------------------------------------------------------
    // expressions

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword("or") {
            let span = self.next().span;
            let rhs = self.and_expr()?;
            lhs = Expr { kind: ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.at_keyword("and") {
            let span = self.next().span;
            let rhs = self.not_expr()?;
            lhs = Expr { kind: ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.at_keyword("not") {
            let span = self.next().span;
            let inner = self.not_expr()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Not, Box::new(inner)), span });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek().tok {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let span = self.next().span;
        let rhs = self.add_expr()?;
        Ok(Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span })
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.next().span;
            let rhs = self.mul_expr()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let span = self.next().span;
            let rhs = self.unary_expr()?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            let span = self.next().span;
            // Fold a negated literal so `-1` prints back as itself.
            if let Tok::Num(n) = self.peek().tok {
                self.next();
                return Ok(Expr { kind: ExprKind::Lit(Value::Number(-n)), span });
            }
            let inner = self.unary_expr()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Neg, Box::new(inner)), span });
        }
        self.primary_expr()
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        let span = self.peek().span;
        match self.peek().tok.clone() {
            Tok::Num(n) => {
                self.next();
                Ok(Expr { kind: ExprKind::Lit(Value::Number(n)), span })
            }
            Tok::Str(s) => {
                self.next();
                Ok(Expr { kind: ExprKind::Lit(Value::Str(s)), span })
            }
            Tok::Var(v) => {
                self.next();
                Ok(Expr { kind: ExprKind::Var(v), span })
            }
            Tok::Ident(kw) if kw == "true" || kw == "false" => {
                self.next();
                Ok(Expr { kind: ExprKind::Lit(Value::Bool(kw == "true")), span })
            }
            Tok::LParen => {
                self.next();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(ParseError::new(
                span,
                &["number", "string", "true", "false", "variable", "`(`"],
                self.peek(),
            )),
        }
    }

}

fn duplicate_field(span: Span, field: &str) -> ParseError {
    ParseError {
        span,
        message: format!("duplicate field `{field}`"),
        expected: Vec::new(),
        found: format!("`{field}`"),
    }
}
