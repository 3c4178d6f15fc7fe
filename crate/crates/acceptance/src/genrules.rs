//! Seeded random inputs for the end-to-end checks.
//!
//! `random_ruleset` builds syntax trees directly, so the round-trip test
//! exercises printer and parser against shapes no hand-written fixture
//! would cover. `random_engine_case` builds working-memory snapshots and
//! rule text constrained enough that a test can enumerate the expected
//! firings without the engine.

use cghf_core::facts::{AggregateFn, Fact};
use cghf_core::rules::ast::{
    Action, AssertTemplate, AttrDecl, BinOp, ClassifierArm, EmitValue, EntityDecl, Expr, ExprKind,
    FactDefinition, FactPattern, PublishTemplate, Rule, RuleSet, Span, Spanned, Term, TopicSeg,
    UnOp, ValueType,
};
use cghf_core::value::Value;
use rand::prelude::*;

const NAMES: &[&str] = &["load", "jitter", "drop_rate", "handover_count", "rtt", "energy"];
const SUBJECTS: &[&str] = &["c1", "slice-a", "gnb9", "region Y"];
const TEXTS: &[&str] = &[
    "region-Y",
    "slice a",
    "say \"hi\"",
    "back\\slash",
    "line\nbreak",
    "tab\tstop",
    "amf-1",
    "ok",
];
const UNITS: &[&str] = &["Mbps", "ms", "%", "dBm"];
const DURATIONS_MS: &[u64] =
    &[1, 40, 999, 1000, 1500, 30_000, 60_000, 90_000, 300_000, 3_600_000];

fn sp<T>(node: T) -> Spanned<T> {
    Spanned::new(node, Span::default())
}

fn duration(rng: &mut impl Rng) -> u64 {
    *DURATIONS_MS.choose(rng).unwrap()
}

/// Quarters survive a print/parse cycle bit for bit.
fn exact_number(rng: &mut impl Rng) -> f64 {
    (rng.random_range(-2000..=2000) as f64) / 4.0
}

fn lit_value(rng: &mut impl Rng) -> Value {
    match rng.random_range(0..4) {
        0 => Value::Number(exact_number(rng)),
        1 => Value::Str((*TEXTS.choose(rng).unwrap()).to_string()),
        2 => Value::Bool(rng.random_bool(0.5)),
        _ => Value::Number(rng.random_range(-50..=50) as f64),
    }
}

fn leaf(rng: &mut impl Rng, vars: &[String]) -> ExprKind {
    if !vars.is_empty() && rng.random_bool(0.6) {
        ExprKind::Var(vars.choose(rng).unwrap().clone())
    } else {
        ExprKind::Lit(lit_value(rng))
    }
}

const BIN_OPS: &[BinOp] = &[
    BinOp::Or,
    BinOp::And,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
];

fn gen_expr(rng: &mut impl Rng, vars: &[String], depth: u8) -> Expr {
    let kind = if depth == 0 || rng.random_bool(0.4) {
        leaf(rng, vars)
    } else {
        match rng.random_range(0..8) {
            0 => ExprKind::Unary(UnOp::Not, Box::new(gen_expr(rng, vars, depth - 1))),
            1 => ExprKind::Unary(UnOp::Neg, Box::new(neg_operand(rng, vars, depth - 1))),
            _ => ExprKind::Binary(
                *BIN_OPS.choose(rng).unwrap(),
                Box::new(gen_expr(rng, vars, depth - 1)),
                Box::new(gen_expr(rng, vars, depth - 1)),
            ),
        }
    };
    Expr { kind, span: Span::default() }
}

/// `-2` lexes as one number token, so a negation node must wrap something
/// that prints with its own syntax or the reparse collapses it.
fn neg_operand(rng: &mut impl Rng, vars: &[String], depth: u8) -> Expr {
    let kind = if !vars.is_empty() && rng.random_bool(0.7) {
        ExprKind::Var(vars.choose(rng).unwrap().clone())
    } else {
        ExprKind::Binary(
            *[BinOp::Add, BinOp::Mul].choose(rng).unwrap(),
            Box::new(gen_expr(rng, vars, depth.min(1))),
            Box::new(gen_expr(rng, vars, depth.min(1))),
        )
    };
    Expr { kind, span: Span::default() }
}

fn gen_entity(rng: &mut impl Rng, i: usize) -> EntityDecl {
    let attrs = (0..rng.random_range(0..=4))
        .map(|j| {
            let ty = *[ValueType::Number, ValueType::String, ValueType::Bool, ValueType::Entity]
                .choose(rng)
                .unwrap();
            AttrDecl {
                name: sp(format!("{}_{j}", NAMES.choose(rng).unwrap())),
                ty,
                unit: if ty == ValueType::Number && rng.random_bool(0.4) {
                    Some((*UNITS.choose(rng).unwrap()).to_string())
                } else {
                    None
                },
                dynamic: rng.random_bool(0.5),
            }
        })
        .collect();
    EntityDecl { name: sp(format!("Entity{i}")), attrs }
}

fn gen_factdef(rng: &mut impl Rng, i: usize) -> FactDefinition {
    let func = match rng.random_range(0..4) {
        0 => AggregateFn::Mean,
        1 => AggregateFn::RateOfChange,
        2 => AggregateFn::TrendSlope,
        _ => AggregateFn::Forecast { horizon_ms: duration(rng) },
    };
    let value_var = vec!["value".to_string()];
    let arms = (0..rng.random_range(1..=3))
        .map(|k| ClassifierArm {
            predicate: gen_expr(rng, &value_var, 2),
            subject: sp((*SUBJECTS.choose(rng).unwrap()).to_string()),
            attribute: sp(format!("cls_{k}")),
            value: if rng.random_bool(0.4) {
                EmitValue::Aggregate
            } else {
                EmitValue::Lit(lit_value(rng))
            },
        })
        .collect();
    FactDefinition {
        name: sp(format!("fd{i}")),
        stream: sp(format!(
            "raw/{}/{}",
            NAMES.choose(rng).unwrap(),
            NAMES.choose(rng).unwrap()
        )),
        func,
        window_ms: duration(rng),
        ttl_ms: duration(rng),
        min_interval_ms: if rng.random_bool(0.5) { Some(duration(rng)) } else { None },
        arms,
    }
}

fn gen_rule(rng: &mut impl Rng, i: usize) -> Rule {
    let mut subject_vars: Vec<String> = Vec::new();
    let mut all_vars: Vec<String> = Vec::new();
    let mut patterns = Vec::new();
    for k in 0..rng.random_range(1..=3) {
        let subject = if !subject_vars.is_empty() && rng.random_bool(0.6) {
            Term::Var(subject_vars[0].clone())
        } else if rng.random_bool(0.75) {
            let v = format!("s{k}");
            subject_vars.push(v.clone());
            all_vars.push(v.clone());
            Term::Var(v)
        } else {
            Term::Lit(Value::Str((*SUBJECTS.choose(rng).unwrap()).to_string()))
        };
        let value = match rng.random_range(0..10) {
            0..=4 => {
                let v = format!("v{k}");
                all_vars.push(v.clone());
                Term::Var(v)
            }
            5..=8 => Term::Lit(lit_value(rng)),
            _ => match all_vars.choose(rng) {
                Some(v) => Term::Var(v.clone()),
                None => Term::Lit(lit_value(rng)),
            },
        };
        let alias = if rng.random_bool(0.2) {
            let a = format!("m{k}");
            all_vars.push(a.clone());
            Some(sp(a))
        } else {
            None
        };
        let attribute = if rng.random_bool(0.8) {
            (*NAMES.choose(rng).unwrap()).to_string()
        } else {
            (*TEXTS.choose(rng).unwrap()).to_string()
        };
        patterns.push(FactPattern {
            subject: sp(subject),
            attribute: sp(attribute),
            value: sp(value),
            alias,
        });
    }

    let condition =
        if rng.random_bool(0.6) { Some(gen_expr(rng, &all_vars, 2)) } else { None };

    let mut actions = Vec::new();
    for a in 0..rng.random_range(1..=2) {
        if a == 0 || rng.random_bool(0.6) {
            let mut segments = vec![
                TopicSeg::Lit("context".to_string()),
                TopicSeg::Lit((*NAMES.choose(rng).unwrap()).to_string()),
            ];
            for _ in 0..rng.random_range(0..=2) {
                if !all_vars.is_empty() && rng.random_bool(0.5) {
                    segments.push(TopicSeg::Var(sp(all_vars.choose(rng).unwrap().clone())));
                } else if rng.random_bool(0.5) {
                    segments.push(TopicSeg::Lit((*NAMES.choose(rng).unwrap()).to_string()));
                } else {
                    segments.push(TopicSeg::Lit("two words".to_string()));
                }
            }
            let fields = (0..rng.random_range(1..=3))
                .map(|n| (sp(format!("k{n}")), gen_expr(rng, &all_vars, 1)))
                .collect();
            actions.push(Action::Publish(PublishTemplate {
                segments,
                fields,
                span: Span::default(),
            }));
        } else {
            let subject = match subject_vars.choose(rng) {
                Some(v) if rng.random_bool(0.8) => Term::Var(v.clone()),
                _ => Term::Lit(Value::Str((*SUBJECTS.choose(rng).unwrap()).to_string())),
            };
            actions.push(Action::Assert(AssertTemplate {
                subject: sp(subject),
                attribute: sp((*NAMES.choose(rng).unwrap()).to_string()),
                value: gen_expr(rng, &all_vars, 1),
                ttl_ms: duration(rng),
                span: Span::default(),
            }));
        }
    }

    Rule {
        name: sp(format!("rule_{i}")),
        priority: rng.random_range(-20..=20),
        ttl_ms: duration(rng),
        patterns,
        condition,
        actions,
    }
}

/// A ruleset assembled straight from syntax nodes, with the shapes the
/// grammar can express: escape-laden strings, negative priorities, chained
/// and negated expressions, aliases, and both action kinds.
pub fn random_ruleset(rng: &mut impl Rng) -> RuleSet {
    let entities = (0..rng.random_range(0..=2)).map(|i| gen_entity(rng, i)).collect();
    let factdefs = (0..rng.random_range(0..=2)).map(|i| gen_factdef(rng, i)).collect();
    let rules = (0..rng.random_range(1..=3)).map(|i| gen_rule(rng, i)).collect();
    RuleSet { entities, factdefs, rules }
}

/// Working memory plus rule text kept simple enough to enumerate by hand:
/// at most one fact per (subject, attribute), publish-only rules joined on
/// one subject variable, and conditions limited to a single comparison.
pub struct EngineCase {
    pub facts: Vec<Fact>,
    pub rules_src: String,
}

pub fn random_engine_case(rng: &mut impl Rng) -> EngineCase {
    let mut pairs: Vec<(usize, usize)> =
        (0..6).flat_map(|s| (0..5).map(move |a| (s, a))).collect();
    pairs.shuffle(rng);
    let n_facts = rng.random_range(1..=30);
    let mut facts = Vec::new();
    for (idx, (s, a)) in pairs.into_iter().take(n_facts).enumerate() {
        let value = match rng.random_range(0..5) {
            0 | 1 | 4 => Value::Number(rng.random_range(0..=5) as f64),
            2 => Value::Str(format!("v{}", rng.random_range(0..3))),
            _ => Value::Bool(rng.random_bool(0.5)),
        };
        facts.push(Fact {
            fact_id: format!("f{idx}"),
            subject: format!("n{s}"),
            attribute: format!("a{a}"),
            value,
            asserted_at: 1_000 + (idx as i64) * 10,
            ttl_ms: if rng.random_bool(0.15) { 2_000 } else { 1_000_000 },
            provenance: Vec::new(),
        });
    }

    let mut src = String::new();
    for r in 0..rng.random_range(1..=10) {
        let mut value_vars: Vec<String> = Vec::new();
        let mut when = Vec::new();
        for k in 0..rng.random_range(1..=2) {
            let subject = if k > 0 && rng.random_bool(0.3) {
                format!("\"n{}\"", rng.random_range(0..6))
            } else {
                "$s".to_string()
            };
            let term = match rng.random_range(0..4) {
                0 | 1 => {
                    let v = format!("v{k}");
                    value_vars.push(v.clone());
                    format!("${v}")
                }
                2 => rng.random_range(0..=5).to_string(),
                _ => match rng.random_range(0..3) {
                    0 => format!("\"v{}\"", rng.random_range(0..3)),
                    1 => "true".to_string(),
                    _ => "false".to_string(),
                },
            };
            when.push(format!("fact({subject}, \"a{}\", {term})", rng.random_range(0..5)));
        }
        let cond = if !value_vars.is_empty() && rng.random_bool(0.5) {
            let v = value_vars.choose(rng).unwrap().clone();
            let op = *["<", "<=", ">", ">=", "==", "!="].choose(rng).unwrap();
            let rhs = match rng.random_range(0..3) {
                0 => rng.random_range(0..=5).to_string(),
                1 => format!("\"v{}\"", rng.random_range(0..3)),
                _ => match value_vars.iter().find(|x| **x != v) {
                    Some(other) => format!("${other}"),
                    None => rng.random_range(0..=5).to_string(),
                },
            };
            Some(format!("${v} {op} {rhs}"))
        } else {
            None
        };
        let mut fields = vec!["cell: $s".to_string()];
        if let Some(v) = value_vars.first() {
            if rng.random_bool(0.6) {
                fields.push(format!("seen: ${v}"));
            }
        }
        if rng.random_bool(0.4) {
            fields.push(format!("mark: {}", rng.random_range(0..=9)));
        }

        src.push_str(&format!(
            "rule probe_{r} priority {} ttl 60 s {{\n",
            rng.random_range(-5..=5)
        ));
        src.push_str(&format!("  when {}\n", when[0]));
        for clause in &when[1..] {
            src.push_str(&format!("  and {clause}\n"));
        }
        if let Some(c) = &cond {
            src.push_str(&format!("  where {c}\n"));
        }
        src.push_str(&format!("  then publish context/probe_{r}/$s {{\n"));
        src.push_str(&format!("    {}\n", fields.join(",\n    ")));
        src.push_str("  }\n}\n\n");
    }

    EngineCase { facts, rules_src: src }
}
