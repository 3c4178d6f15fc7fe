use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ast::*;
use crate::topic::Topic;
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{span}: {message}")]
pub struct ValidationError {
    pub span: Span,
    pub message: String,
}

fn err(span: Span, message: impl Into<String>) -> ValidationError {
    ValidationError { span, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
struct AttrInfo {
    types: BTreeSet<ValueType>,
    dynamic: bool,
}

/// The entity/attribute vocabulary a ruleset is checked against. Built from
/// entity declarations; attributes declared by several entity kinds are
/// merged (a reference is valid if any kind declares it).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextModel {
    entities: BTreeSet<String>,
    attrs: BTreeMap<String, AttrInfo>,
}

impl ContextModel {
    pub fn from_entities<'a>(decls: impl IntoIterator<Item = &'a EntityDecl>) -> ContextModel {
        let mut m = ContextModel::default();
        for d in decls {
            m.add_entity(d);
        }
        m
    }

    fn add_entity(&mut self, d: &EntityDecl) {
        self.entities.insert(d.name.node.clone());
        for a in &d.attrs {
            let info = self
                .attrs
                .entry(a.name.node.clone())
                .or_insert_with(|| AttrInfo { types: BTreeSet::new(), dynamic: false });
            info.types.insert(a.ty);
            info.dynamic |= a.dynamic;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn has_entity(&self, name: &str) -> bool {
        self.entities.contains(name)
    }

    pub fn knows_attribute(&self, name: &str) -> bool {
        self.attrs.contains_key(name)
    }

    pub fn attribute_dynamic(&self, name: &str) -> Option<bool> {
        self.attrs.get(name).map(|i| i.dynamic)
    }
}

/// Check a parsed set against a base model (typically the node's installed
/// entity declarations). The set's own entity declarations extend the base.
/// Returns every problem found; an empty vec means the set is installable.
///
/// When neither the base model nor the set declares any entity, attribute
/// existence and mutability checks are skipped: there is no vocabulary to
/// check against, and a standalone file should still lint for the
/// structural problems.
pub fn validate(rs: &RuleSet, base: &ContextModel) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    let mut model = base.clone();

    // Entity declarations: unique among themselves and against the base.
    let mut seen_entities = BTreeSet::new();
    for e in &rs.entities {
        if base.has_entity(&e.name.node) || !seen_entities.insert(e.name.node.clone()) {
            errors.push(err(e.name.span, format!("duplicate entity `{}`", e.name.node)));
        }
        let mut seen_attrs = BTreeSet::new();
        for a in &e.attrs {
            if !seen_attrs.insert(a.name.node.clone()) {
                errors.push(err(
                    a.name.span,
                    format!("duplicate attribute `{}` in entity `{}`", a.name.node, e.name.node),
                ));
            }
        }
        model.add_entity(e);
    }
    let check_attrs = !model.is_empty();

    let mut seen_factdefs = BTreeSet::new();
    for f in &rs.factdefs {
        if !seen_factdefs.insert(f.name.node.clone()) {
            errors.push(err(f.name.span, format!("duplicate fact definition `{}`", f.name.node)));
        }
        validate_factdef(f, &model, check_attrs, &mut errors);
    }

    let mut seen_rules = BTreeSet::new();
    for r in &rs.rules {
        if !seen_rules.insert(r.name.node.clone()) {
            errors.push(err(r.name.span, format!("duplicate rule `{}`", r.name.node)));
        }
        validate_rule(r, &model, check_attrs, &mut errors);
    }

    errors
}

fn validate_factdef(
    f: &FactDefinition,
    model: &ContextModel,
    check_attrs: bool,
    errors: &mut Vec<ValidationError>,
) {
    if Topic::parse(&f.stream.node).is_err() {
        errors.push(err(f.stream.span, format!("`{}` is not a valid stream topic", f.stream.node)));
    }
    if f.window_ms == 0 {
        errors.push(err(f.name.span, "window must be positive"));
    }
    if f.ttl_ms == 0 {
        errors.push(err(f.name.span, "ttl must be positive"));
    }
    if let crate::facts::AggregateFn::Forecast { horizon_ms: 0 } = f.func {
        errors.push(err(f.name.span, "forecast horizon must be positive"));
    }
    for arm in &f.arms {
        for (name, span) in expr_vars(&arm.predicate) {
            if name != "value" {
                errors.push(err(
                    span,
                    format!("classifier predicates may only use $value, found ${name}"),
                ));
            }
        }
        check_attribute(&arm.attribute, model, check_attrs, true, errors);
        if let EmitValue::Lit(v) = &arm.value {
            check_literal_type(&arm.attribute, v, model, errors);
        }
    }
}

fn validate_rule(
    r: &Rule,
    model: &ContextModel,
    check_attrs: bool,
    errors: &mut Vec<ValidationError>,
) {
    if r.ttl_ms == 0 {
        errors.push(err(r.name.span, "ttl must be positive"));
    }

    // Variables a pattern list brings into scope.
    let mut bound: BTreeSet<String> = BTreeSet::new();
    for p in &r.patterns {
        if let Term::Var(v) = &p.subject.node {
            bound.insert(v.clone());
        }
        if let Term::Lit(l) = &p.subject.node {
            if !matches!(l, Value::Str(_)) {
                errors.push(err(p.subject.span, "a fact subject must be a string or a variable"));
            }
        }
        if let Term::Var(v) = &p.value.node {
            bound.insert(v.clone());
        }
        check_attribute(&p.attribute, model, check_attrs, false, errors);
        if let Some(a) = &p.alias {
            if !bound.insert(a.node.clone()) {
                errors.push(err(a.span, format!("alias `{}` collides with another binding", a.node)));
            }
        }
    }

    let check_expr = |e: &Expr, errors: &mut Vec<ValidationError>| {
        for (name, span) in expr_vars(e) {
            if !bound.contains(&name) {
                errors.push(err(span, format!("unbound variable ${name}")));
            }
        }
    };

    if let Some(cond) = &r.condition {
        check_expr(cond, errors);
    }

    for a in &r.actions {
        match a {
            Action::Publish(p) => {
                for seg in &p.segments {
                    match seg {
                        TopicSeg::Lit(l) => {
                            if l.is_empty() || l.contains('/') || l == "*" || l == "#" {
                                errors.push(err(
                                    p.span,
                                    format!("`{l}` is not a valid topic segment"),
                                ));
                            }
                        }
                        TopicSeg::Var(v) => {
                            if !bound.contains(&v.node) {
                                errors.push(err(v.span, format!("unbound variable ${}", v.node)));
                            }
                        }
                    }
                }
                let mut seen_fields = BTreeSet::new();
                for (name, value) in &p.fields {
                    if !seen_fields.insert(name.node.clone()) {
                        errors.push(err(name.span, format!("duplicate field `{}`", name.node)));
                    }
                    check_expr(value, errors);
                }
            }
            Action::Assert(t) => {
                match &t.subject.node {
                    Term::Var(v) => {
                        if !bound.contains(v) {
                            errors.push(err(t.subject.span, format!("unbound variable ${v}")));
                        }
                    }
                    Term::Lit(l) => {
                        if !matches!(l, Value::Str(_)) {
                            errors.push(err(
                                t.subject.span,
                                "a fact subject must be a string or a variable",
                            ));
                        }
                    }
                }
                check_attribute(&t.attribute, model, check_attrs, true, errors);
                check_expr(&t.value, errors);
                if let ExprKind::Lit(v) = &t.value.kind {
                    check_literal_type(&t.attribute, v, model, errors);
                }
                if t.ttl_ms == 0 {
                    errors.push(err(t.span, "ttl must be positive"));
                }
            }
        }
    }
}

fn check_attribute(
    attr: &Spanned<String>,
    model: &ContextModel,
    check_attrs: bool,
    written: bool,
    errors: &mut Vec<ValidationError>,
) {
    if !check_attrs {
        return;
    }
    match model.attribute_dynamic(&attr.node) {
        None => errors.push(err(
            attr.span,
            format!("attribute `{}` is not declared by any entity", attr.node),
        )),
        Some(false) if written => errors.push(err(
            attr.span,
            format!("attribute `{}` is static and cannot be written by rules", attr.node),
        )),
        _ => {}
    }
}

/// When every declaration of an attribute agrees on a type, a literal of a
/// different type is certainly wrong. Entity-typed attributes hold ids, so
/// they accept strings.
fn check_literal_type(
    attr: &Spanned<String>,
    value: &Value,
    model: &ContextModel,
    errors: &mut Vec<ValidationError>,
) {
    let Some(info) = model.attrs.get(&attr.node) else { return };
    if info.types.len() != 1 {
        return;
    }
    let ty = *info.types.iter().next().expect("non-empty");
    let ok = matches!(
        (ty, value),
        (ValueType::Number, Value::Number(_))
            | (ValueType::String, Value::Str(_))
            | (ValueType::Entity, Value::Str(_))
            | (ValueType::Bool, Value::Bool(_))
    );
    if !ok {
        errors.push(err(
            attr.span,
            format!(
                "attribute `{}` is declared {} but the value is a {}",
                attr.node,
                ty.keyword(),
                value.type_name()
            ),
        ));
    }
}

/// Every variable reference in an expression, with its position.
fn expr_vars(e: &Expr) -> Vec<(String, Span)> {
    let mut out = Vec::new();
    collect_vars(e, &mut out);
    out
}

fn collect_vars(e: &Expr, out: &mut Vec<(String, Span)>) {
    match &e.kind {
        ExprKind::Lit(_) => {}
        ExprKind::Var(v) => out.push((v.clone(), e.span)),
        ExprKind::Unary(_, inner) => collect_vars(inner, out),
        ExprKind::Binary(_, l, r) => {
            collect_vars(l, out);
            collect_vars(r, out);
        }
    }
}
