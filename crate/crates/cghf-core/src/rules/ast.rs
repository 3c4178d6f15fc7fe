//! Syntax tree for the rule language. Equality is structural and ignores
//! source positions, which is what makes parse/pretty-print round-trip
//! checks meaningful.

use crate::facts::AggregateFn;
use crate::value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    /// 1-based.
    pub line: u32,
    /// 1-based column, in characters.
    pub col: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A node plus where it came from. Comparisons ignore the span.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub node: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(node: T, span: Span) -> Self {
        Spanned { node, span }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ValueType {
    Number,
    String,
    Bool,
    Entity,
}

impl ValueType {
    pub fn keyword(&self) -> &'static str {
        match self {
            ValueType::Number => "number",
            ValueType::String => "string",
            ValueType::Bool => "bool",
            ValueType::Entity => "entity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttrDecl {
    pub name: Spanned<String>,
    pub ty: ValueType,
    pub unit: Option<String>,
    pub dynamic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityDecl {
    pub name: Spanned<String>,
    pub attrs: Vec<AttrDecl>,
}

/// A literal or variable in a fact pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Lit(Value),
    Var(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactPattern {
    pub subject: Spanned<Term>,
    pub attribute: Spanned<String>,
    pub value: Spanned<Term>,
    /// `as x` binds `$x` to the matched fact's id.
    pub alias: Option<Spanned<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(&self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// One segment of a publish topic template.
#[derive(Debug, Clone, PartialEq)]
pub enum TopicSeg {
    Lit(String),
    Var(Spanned<String>),
}

#[derive(Debug, Clone)]
pub struct PublishTemplate {
    /// Full topic including the leading `context` segment.
    pub segments: Vec<TopicSeg>,
    pub fields: Vec<(Spanned<String>, Expr)>,
    pub span: Span,
}

impl PartialEq for PublishTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.segments == other.segments && self.fields == other.fields
    }
}

#[derive(Debug, Clone)]
pub struct AssertTemplate {
    pub subject: Spanned<Term>,
    pub attribute: Spanned<String>,
    pub value: Expr,
    pub ttl_ms: u64,
    pub span: Span,
}

impl PartialEq for AssertTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.subject == other.subject
            && self.attribute == other.attribute
            && self.value == other.value
            && self.ttl_ms == other.ttl_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Publish(PublishTemplate),
    Assert(AssertTemplate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: Spanned<String>,
    pub priority: i64,
    /// TTL applied to contexts this rule publishes.
    pub ttl_ms: u64,
    pub patterns: Vec<FactPattern>,
    pub condition: Option<Expr>,
    pub actions: Vec<Action>,
}

/// What a classifier arm emits when its predicate holds: a literal, or the
/// aggregate value itself (`$value`).
#[derive(Debug, Clone, PartialEq)]
pub enum EmitValue {
    Lit(Value),
    Aggregate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierArm {
    /// Predicate over `$value`, the aggregate result.
    pub predicate: Expr,
    pub subject: Spanned<String>,
    pub attribute: Spanned<String>,
    pub value: EmitValue,
}

/// Declarative mapping from one raw stream to emitted facts: aggregate the
/// stream over a sliding window, then classify the aggregate value through
/// ordered first-match-wins arms.
#[derive(Debug, Clone, PartialEq)]
pub struct FactDefinition {
    pub name: Spanned<String>,
    pub stream: Spanned<String>,
    pub func: AggregateFn,
    pub window_ms: u64,
    /// TTL of emitted facts.
    pub ttl_ms: u64,
    /// Minimum interval between identical emissions; defaults to the
    /// window length.
    pub min_interval_ms: Option<u64>,
    pub arms: Vec<ClassifierArm>,
}

impl FactDefinition {
    pub fn effective_min_interval(&self) -> u64 {
        self.min_interval_ms.unwrap_or(self.window_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    pub entities: Vec<EntityDecl>,
    pub factdefs: Vec<FactDefinition>,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.factdefs.is_empty() && self.rules.is_empty()
    }

    /// Append another set's items, preserving order.
    pub fn merge(&mut self, other: RuleSet) {
        self.entities.extend(other.entities);
        self.factdefs.extend(other.factdefs);
        self.rules.extend(other.rules);
    }
}
