use std::fmt::Write;

use super::ast::*;
use crate::facts::AggregateFn;
use crate::value::Value;

/// Render a ruleset in canonical form: entities, then fact definitions,
/// then rules, two-space indent, durations in the largest exact unit.
/// Parsing the output yields a set structurally equal to the input.
pub fn pretty_print(rs: &RuleSet) -> String {
    let mut out = String::new();
    let mut first = true;
    for e in &rs.entities {
        sep(&mut out, &mut first);
        print_entity(&mut out, e);
    }
    for f in &rs.factdefs {
        sep(&mut out, &mut first);
        print_factdef(&mut out, f);
    }
    for r in &rs.rules {
        sep(&mut out, &mut first);
        print_rule(&mut out, r);
    }
    out
}

fn sep(out: &mut String, first: &mut bool) {
    if !*first {
        out.push('\n');
    }
    *first = false;
}

fn print_entity(out: &mut String, e: &EntityDecl) {
    let _ = writeln!(out, "entity {} {{", e.name.node);
    for a in &e.attrs {
        let _ = write!(out, "  attr {}: {}", a.name.node, a.ty.keyword());
        if let Some(u) = &a.unit {
            let _ = write!(out, " unit {}", quote(u));
        }
        let _ = writeln!(out, " {}", if a.dynamic { "dynamic" } else { "static" });
    }
    out.push_str("}\n");
}

fn print_factdef(out: &mut String, f: &FactDefinition) {
    let _ = writeln!(out, "factdef {} {{", f.name.node);
    let _ = writeln!(out, "  stream {}", quote(&f.stream.node));
    match &f.func {
        AggregateFn::Forecast { horizon_ms } => {
            let _ = writeln!(out, "  fn forecast horizon {}", duration(*horizon_ms));
        }
        other => {
            let _ = writeln!(out, "  fn {}", other.keyword());
        }
    }
    let _ = writeln!(out, "  window {}", duration(f.window_ms));
    let _ = writeln!(out, "  ttl {}", duration(f.ttl_ms));
    if let Some(mi) = f.min_interval_ms {
        let _ = writeln!(out, "  min_interval {}", duration(mi));
    }
    for arm in &f.arms {
        let _ = writeln!(
            out,
            "  when {} emit fact({}, {}, {})",
            expr(&arm.predicate),
            quote(&arm.subject.node),
            quote(&arm.attribute.node),
            match &arm.value {
                EmitValue::Aggregate => "$value".to_string(),
                EmitValue::Lit(v) => lit(v),
            }
        );
    }
    out.push_str("}\n");
}

fn print_rule(out: &mut String, r: &Rule) {
    let _ = writeln!(
        out,
        "rule {} priority {} ttl {} {{",
        r.name.node,
        r.priority,
        duration(r.ttl_ms)
    );
    for (i, p) in r.patterns.iter().enumerate() {
        let kw = if i == 0 { "when" } else { "and" };
        let _ = write!(out, "  {kw} fact({}, {}, {})", term(&p.subject.node), quote(&p.attribute.node), term(&p.value.node));
        if let Some(a) = &p.alias {
            let _ = write!(out, " as {}", a.node);
        }
        out.push('\n');
    }
    if let Some(cond) = &r.condition {
        let _ = writeln!(out, "  where {}", expr(cond));
    }
    for (i, a) in r.actions.iter().enumerate() {
        let lead = if i == 0 { "  then " } else { "  " };
        out.push_str(lead);
        match a {
            Action::Publish(p) => {
                let segs: Vec<String> = p
                    .segments
                    .iter()
                    .map(|s| match s {
                        TopicSeg::Lit(l) => topic_seg(l),
                        TopicSeg::Var(v) => format!("${}", v.node),
                    })
                    .collect();
                let _ = write!(out, "publish {} {{ ", segs.join("/"));
                let fields: Vec<String> = p
                    .fields
                    .iter()
                    .map(|(name, value)| format!("{}: {}", name.node, expr(value)))
                    .collect();
                let _ = writeln!(out, "{} }}", fields.join(", "));
            }
            Action::Assert(t) => {
                let _ = writeln!(
                    out,
                    "assert fact({}, {}, {}, ttl {})",
                    term(&t.subject.node),
                    quote(&t.attribute.node),
                    expr(&t.value),
                    duration(t.ttl_ms)
                );
            }
        }
    }
    out.push_str("}\n");
}

/// A literal segment prints bare when it is a plain identifier, quoted otherwise.
fn topic_seg(s: &str) -> String {
    let bare = !s.is_empty()
        && s.bytes().next().map(|b| b.is_ascii_alphabetic() || b == b'_').unwrap_or(false)
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
    if bare {
        s.to_string()
    } else {
        quote(s)
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("${v}"),
        Term::Lit(v) => lit(v),
    }
}

fn lit(v: &Value) -> String {
    match v {
        Value::Str(s) => quote(s),
        Value::Number(n) => format!("{n}"),
        Value::Bool(b) => format!("{b}"),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Largest unit that divides the duration exactly: min, then s, then ms.
fn duration(ms: u64) -> String {
    if ms > 0 && ms % 60_000 == 0 {
        format!("{} min", ms / 60_000)
    } else if ms > 0 && ms % 1000 == 0 {
        format!("{} s", ms / 1000)
    } else {
        format!("{ms} ms")
    }
}

fn expr(e: &Expr) -> String {
    render(e, 0, false)
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Lit(_) | ExprKind::Var(_) => 8,
        ExprKind::Unary(UnOp::Neg, _) => 7,
        ExprKind::Unary(UnOp::Not, _) => 3,
        ExprKind::Binary(op, _, _) => op.precedence(),
    }
}

fn render(e: &Expr, parent: u8, rhs: bool) -> String {
    let my = prec(e);
    let body = match &e.kind {
        ExprKind::Lit(v) => lit(v),
        ExprKind::Var(v) => format!("${v}"),
        ExprKind::Unary(UnOp::Not, inner) => format!("not {}", render(inner, my, false)),
        ExprKind::Unary(UnOp::Neg, inner) => format!("-{}", render(inner, my, true)),
        ExprKind::Binary(op, l, r) => {
            // Comparisons do not chain, so equal precedence needs parens
            // on either side; other binaries are left-associative.
            let cmp = op.precedence() == 4;
            format!(
                "{} {} {}",
                render(l, if cmp { my + 1 } else { my }, false),
                op.symbol(),
                render(r, my, true)
            )
        }
    };
    if my < parent || (my == parent && rhs) {
        format!("({body})")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn roundtrip(src: &str) -> RuleSet {
        let rs = parse(src).expect("source parses");
        let printed = pretty_print(&rs);
        let back = parse(&printed).unwrap_or_else(|e| panic!("printed form must re-parse: {e:?}\n{printed}"));
        assert_eq!(rs, back, "round trip changed the set:\n{printed}");
        // Printing is a fixed point after one pass.
        assert_eq!(printed, pretty_print(&back));
        rs
    }

    #[test]
    fn canonical_form_is_stable() {
        let src = r#"
entity Cell { attr region: string static attr overloaded: bool dynamic }
factdef f { stream "raw/x" fn mean window 60 s ttl 90000 ms when $value > 900 emit fact("c1", "overloaded", true) }
rule r priority 5 ttl 120 s {
  when fact($c, "overloaded", true) as evidence
  where $c != "c9"
  then publish context/load/$c { cell: $c }
}
"#;
        let rs = roundtrip(src);
        let printed = pretty_print(&rs);
        assert!(printed.contains("window 1 min"), "{printed}");
        assert!(printed.contains("ttl 90 s"), "{printed}");
        assert!(printed.contains("rule r priority 5 ttl 2 min {"), "{printed}");
        assert!(printed.contains("  when fact($c, \"overloaded\", true) as evidence"), "{printed}");
        assert!(printed.contains("  then publish context/load/$c { cell: $c }"), "{printed}");
    }

    #[test]
    fn expressions_keep_their_shape() {
        let src = r#"rule r priority 1 ttl 5 s {
  when fact($a, "x", $v)
  where ($v + 1) * 2 > 3 and not ($v == 0 or $v == 1)
  then publish context/t { out: $v - (1 - 2), neg: -$v * 3 }
}"#;
        roundtrip(src);
    }

    #[test]
    fn strings_with_escapes_round_trip() {
        let src = "rule r priority 1 ttl 5 s { when fact($a, \"a\\\"b\\\\c\\nd\", 1) then publish context/t { a: \"tab\\there\" } }";
        roundtrip(src);
    }

    #[test]
    fn odd_durations_stay_in_ms() {
        let src = "rule r priority 1 ttl 1500 ms { when fact($a, \"x\", 1) then publish context/t { a: $a } }";
        let printed = pretty_print(&roundtrip(src));
        assert!(printed.contains("ttl 1500 ms"), "{printed}");
    }

    #[test]
    fn quoted_topic_segments_survive() {
        let src = "rule r priority 1 ttl 5 s { when fact($a, \"x\", 1) then publish context/\"two words\"/$a { a: $a } }";
        roundtrip(src);
    }

    #[test]
    fn negative_numbers_round_trip() {
        let src = "rule r priority -3 ttl 5 s { when fact($a, \"x\", -1.5) where $a > -2 then assert fact($a, \"y\", -0.25, ttl 10 s) }";
        let rs = roundtrip(src);
        assert_eq!(rs.rules[0].priority, -3);
    }
}
