//! Canonical pretty-printer. Its output re-parses to an equal tree.

use std::fmt::Write;

use super::ast::*;
use crate::sim::format_float;

const INDENT: &str = "    ";

pub fn format_ast(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.body {
        stmt_line(&mut out, stmt, 0);
    }
    out
}

fn stmt_line(out: &mut String, stmt: &Stmt, depth: usize) {
    out.push_str(&INDENT.repeat(depth));
    write_stmt(out, stmt, depth);
    let ends_in_block = match &stmt.kind {
        StmtKind::Function { .. } | StmtKind::If { .. } | StmtKind::For { .. } | StmtKind::Sample { .. } => true,
        StmtKind::Reaction { rates, .. } => !rates.is_empty(),
        _ => false,
    };
    if !ends_in_block {
        out.push(';');
    }
    out.push('\n');
}

fn write_block(out: &mut String, block: &Block, depth: usize) {
    if block.stmts.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for s in &block.stmts {
        stmt_line(out, s, depth + 1);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn write_idents(out: &mut String, ids: &[Ident]) {
    out.push_str(&ids.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", "));
}

fn write_temperature(out: &mut String, t: &Temperature) {
    out.push_str(&expr(&t.value));
    match t.unit {
        Some(TempUnit::Celsius) => out.push_str(" celsius"),
        Some(TempUnit::Kelvin) => out.push_str(" kelvin"),
        None => {}
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    match &stmt.kind {
        StmtKind::Let { name, value } => {
            let _ = write!(out, "let {} = {}", name.name, expr(value));
        }
        StmtKind::Function { name, params, body } => {
            let _ = write!(out, "function {}(", name.name);
            write_idents(out, params);
            out.push_str(") ");
            write_block(out, body, depth);
        }
        StmtKind::Species { decls, sample } => {
            out.push_str("species ");
            let parts: Vec<String> = decls
                .iter()
                .map(|d| match &d.initial {
                    Some(e) => format!("{} @ {}", d.name.name, expr(e)),
                    None => d.name.name.clone(),
                })
                .collect();
            out.push_str(&parts.join(", "));
            if let Some(s) = sample {
                let _ = write!(out, " in {}", expr(s));
            }
        }
        StmtKind::Amount { species, value, sample } => {
            let _ = write!(out, "amount {} @ {}", expr(species), expr(value));
            if let Some(s) = sample {
                let _ = write!(out, " in {}", expr(s));
            }
        }
        StmtKind::Reaction { reagents, products, reversible, rates } => {
            let arrow = if *reversible { "<->" } else { "->" };
            let _ = write!(out, "{} {arrow} {}", complex(reagents), complex(products));
            if !rates.is_empty() {
                let parts: Vec<String> = rates
                    .iter()
                    .map(|r| if r.general { format!("rate {}", expr(&r.expr)) } else { expr(&r.expr) })
                    .collect();
                let _ = write!(out, " {{{}}}", parts.join(", "));
            }
        }
        StmtKind::If { cond, then, otherwise } => {
            let _ = write!(out, "if {} ", expr(cond));
            write_block(out, then, depth);
            match otherwise {
                Some(ElseBranch::Block(b)) => {
                    out.push_str(" else ");
                    write_block(out, b, depth);
                }
                Some(ElseBranch::If(s)) => {
                    out.push_str(" else ");
                    write_stmt(out, s, depth);
                }
                None => {}
            }
        }
        StmtKind::For { var, start, end, body } => {
            let _ = write!(out, "for {} in {}..{} ", var.name, expr(start), expr(end));
            write_block(out, body, depth);
        }
        StmtKind::Yield(e) => {
            let _ = write!(out, "yield {}", expr(e));
        }
        StmtKind::Report { target, label } => {
            let _ = write!(out, "report {}", expr(target));
            if let Some(l) = label {
                let _ = write!(out, " as {}", string_literal(l));
            }
        }
        StmtKind::Equilibrate { sample, duration, temperature } => {
            out.push_str("equilibrate ");
            if let Some(s) = sample {
                let _ = write!(out, "{} for ", expr(s));
            }
            out.push_str(&expr(duration));
            if let Some(t) = temperature {
                out.push_str(" at ");
                write_temperature(out, t);
            }
        }
        StmtKind::Sample { name, volume, temperature } => {
            let _ = write!(out, "sample {} {{", name.name);
            let mut fields = Vec::new();
            if let Some((v, unit)) = volume {
                let mut f = format!("volume {}", expr(v));
                if let Some(u) = unit {
                    let _ = write!(f, " {}", u.name());
                }
                fields.push(f);
            }
            if let Some(t) = temperature {
                let mut f = String::from("temperature ");
                write_temperature(&mut f, t);
                fields.push(f);
            }
            if fields.is_empty() {
                out.push('}');
            } else {
                let _ = write!(out, " {} }}", fields.join("; "));
            }
        }
        StmtKind::Mix { name, first, second } => {
            let _ = write!(out, "mix {} = {}, {}", name.name, expr(first), expr(second));
        }
        StmtKind::Split { left, right, source, proportion } => {
            let _ = write!(out, "split {}, {} = {}", left.name, right.name, expr(source));
            if let Some(p) = proportion {
                let _ = write!(out, " by {}", expr(p));
            }
        }
        StmtKind::Dispose(items) => {
            let _ = write!(out, "dispose {}", items.iter().map(expr).collect::<Vec<_>>().join(", "));
        }
        StmtKind::Export { dataset, name } => {
            let _ = write!(out, "export {} as {}", expr(dataset), string_literal(name));
        }
        StmtKind::Expr(e) => out.push_str(&expr(e)),
    }
}

fn complex(c: &ComplexAst) -> String {
    match c {
        ComplexAst::Empty(_) => "∅".into(),
        ComplexAst::Terms(terms) => terms
            .iter()
            .map(|t| {
                let species = match &t.species.kind {
                    ExprKind::Var(_) => expr(&t.species),
                    ExprKind::Call(callee, _) if is_call_chain(callee) => expr(&t.species),
                    _ => format!("({})", expr(&t.species)),
                };
                if t.multiplicity == 1 {
                    species
                } else {
                    format!("{} {species}", t.multiplicity)
                }
            })
            .collect::<Vec<_>>()
            .join(" + "),
    }
}

fn is_call_chain(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Var(_) => true,
        ExprKind::Call(c, _) => is_call_chain(c),
        _ => false,
    }
}

fn string_literal(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Binding strength of the printed form of `e`.
fn strength(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(UnOp::Not, _) => 3,
        ExprKind::Unary(UnOp::Neg, _) => 7,
        ExprKind::Number(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 7,
        _ => 10,
    }
}

fn wrap(e: &Expr, parens: bool) -> String {
    if parens {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Number(v) => format_float(*v),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Str(s) => string_literal(s),
        ExprKind::Var(name) => name.clone(),
        ExprKind::Unary(UnOp::Neg, inner) => format!("-{}", wrap(inner, strength(inner) < 7)),
        ExprKind::Unary(UnOp::Not, inner) => format!("not {}", wrap(inner, strength(inner) < 3)),
        ExprKind::Binary(BinaryOp::Pow, base, exp) => {
            format!("{} ^ {}", wrap(base, strength(base) < 10), wrap(exp, strength(exp) < 7))
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            let lhs_parens = if p == 4 { strength(lhs) <= p } else { strength(lhs) < p };
            format!("{} {} {}", wrap(lhs, lhs_parens), op.symbol(), wrap(rhs, strength(rhs) <= p))
        }
        ExprKind::Call(callee, args) => {
            let callee_parens = !matches!(callee.kind, ExprKind::Var(_) | ExprKind::Call(..) | ExprKind::Lambda(..));
            format!("{}({})", wrap(callee, callee_parens), args.iter().map(expr).collect::<Vec<_>>().join(", "))
        }
        ExprKind::List(items) => format!("[{}]", items.iter().map(expr).collect::<Vec<_>>().join(", ")),
        ExprKind::Lambda(params, body) => {
            let mut out = String::from("function(");
            write_idents(&mut out, params);
            out.push_str(") ");
            write_block(&mut out, body, 0);
            out
        }
    }
}
