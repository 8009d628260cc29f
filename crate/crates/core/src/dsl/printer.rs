use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical text form: one statement per line, four-space indentation.
pub fn pretty_print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    let header = match unit.kind {
        UnitKind::Subject => "// slicefl subject",
        UnitKind::Testsuite => "// slicefl testsuite",
    };
    out.push_str(header);
    out.push('\n');
    for f in &unit.functions {
        out.push('\n');
        let _ = writeln!(out, "fn {}({}) {{", f.name, f.params.join(", "));
        print_block(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    for t in &unit.tests {
        out.push('\n');
        print_test(&mut out, t);
    }
    out
}

pub fn print_test(out: &mut String, test: &TestCase) {
    let _ = writeln!(out, "test {} {{", test.name);
    print_block(out, &test.body, 1);
    out.push_str("}\n");
}

fn print_block(out: &mut String, block: &[Statement], depth: usize) {
    for s in block {
        print_statement(out, s, depth);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn print_statement(out: &mut String, s: &Statement, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Let { name, value } => {
            let _ = writeln!(out, "let {name} = {};", expr_to_string(value));
        }
        StmtKind::Assign { name, value } => {
            let _ = writeln!(out, "{name} = {};", expr_to_string(value));
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{};", expr_to_string(e));
        }
        StmtKind::Return(e) => {
            let _ = writeln!(out, "return {};", expr_to_string(e));
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = writeln!(out, "if {} {{", expr_to_string(cond));
            print_block(out, then_block, depth + 1);
            indent(out, depth);
            if else_block.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                print_block(out, else_block, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
        StmtKind::While { cond, body, bound } => {
            let _ = writeln!(out, "while {} bound {bound} {{", expr_to_string(cond));
            print_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::AssertEq {
            expected,
            actual,
            tol,
            guarded,
        } => {
            if *guarded {
                out.push_str("try ");
            }
            let _ = write!(
                out,
                "assert_eq({}, {}",
                expr_to_string(expected),
                expr_to_string(actual)
            );
            if let Some(t) = tol {
                let _ = write!(out, ", {}", float_literal(*t));
            }
            out.push_str(");\n");
        }
        StmtKind::AssertTrue { cond, guarded } => {
            if *guarded {
                out.push_str("try ");
            }
            let _ = writeln!(out, "assert_true({});", expr_to_string(cond));
        }
        StmtKind::RethrowFirst => out.push_str("rethrow_first;\n"),
    }
}

/// Shortest decimal form that re-lexes as a float literal.
fn float_literal(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, ctx_prec: u8) {
    match e {
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Float(x) => out.push_str(&float_literal(*x)),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Str(s) => {
            out.push('"');
            for ch in s.chars() {
                match ch {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            // unary binds tighter than every binary operator
            write_expr(out, inner, 7);
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let paren = p < ctx_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, l, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, r, p + 1);
            if paren {
                out.push(')');
            }
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_unit;

    #[test]
    fn empty_suite_prints_header_only() {
        let u = SourceUnit::empty("e.tst", UnitKind::Testsuite);
        assert_eq!(pretty_print(&u), "// slicefl testsuite\n");
        let back = parse_unit(&pretty_print(&u), UnitKind::Testsuite).unwrap();
        assert!(back.tests.is_empty());
    }

    #[test]
    fn parenthesization_round_trips() {
        let src = "fn f(a, b, c) { return (a - (b - c)) * -(a + b) / (c % 2) - -1; }";
        let u = parse_unit(src, UnitKind::Subject).unwrap();
        let printed = pretty_print(&u);
        assert!(printed.contains("return (a - (b - c)) * -(a + b) / (c % 2) - -1;"), "{printed}");
        let back = parse_unit(&printed, UnitKind::Subject).unwrap();
        assert!(u.same_shape(&back));
    }

    #[test]
    fn float_literals_round_trip() {
        for x in [0.1, 1e-6, 3.0, 1e21, 2.5e-300] {
            let s = float_literal(x);
            let src = format!("fn f() {{ return {s}; }}");
            let u = parse_unit(&src, UnitKind::Subject).unwrap();
            assert_eq!(u.functions[0].body[0].kind, StmtKind::Return(Expr::Float(x)));
        }
    }
}
