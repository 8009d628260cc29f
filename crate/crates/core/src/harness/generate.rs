//! Seeded corpus generator: a correct subject, a suite whose expected values
//! come from the correct subject, and one or two single-statement mutations.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, Provenance, Scenario};
use crate::dsl::{
    expr_to_string, parse_unit, pretty_print, walk_statements, BinOp, Expr, FunctionDef,
    SourceUnit, Statement, StatementId, StmtKind, UnitKind,
};
use crate::exec::value::Value;
use crate::exec::{call_function, run_test, ExecutionMode, FailureKind, DEFAULT_FUEL};
use crate::metrics::GroundTruth;
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shape {
    #[default]
    Small,
    Medium,
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(Shape::Small),
            "medium" => Ok(Shape::Medium),
            other => Err(format!("unknown shape `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenOptions {
    pub shape: Shape,
    /// Let later assertions reassign the result variable of an earlier one.
    /// Such suites are no longer side-effect-free across assertions.
    pub allow_state_infection: bool,
    pub parallelism: Parallelism,
}

const SUBJECT_ATTEMPTS: usize = 20;
const MUTANT_ATTEMPTS: usize = 40;
const LOOP_COUNTER: &str = "i";

const NAMES: [&str; 12] = [
    "scale", "clamp", "accumulate", "pick", "blend", "offset", "score", "step", "weigh", "shift",
    "fold", "bias",
];
const PARAMS: [&str; 3] = ["a", "b", "c"];

pub fn generate_corpus(seed: u64, count: usize, shape: Shape) -> Result<Vec<Scenario>, HarnessError> {
    generate_corpus_with(
        seed,
        count,
        &GenOptions {
            shape,
            ..Default::default()
        },
    )
}

pub fn generate_corpus_with(
    seed: u64,
    count: usize,
    opts: &GenOptions,
) -> Result<Vec<Scenario>, HarnessError> {
    par::map_range(opts.parallelism, count, |i| generate_scenario(seed, i, opts))
        .into_iter()
        .collect()
}

/// Scenario `index` of the corpus for `seed`. Each index draws from its own
/// ChaCha stream, so scenarios do not depend on each other or on `count`.
pub fn generate_scenario(seed: u64, index: usize, opts: &GenOptions) -> Result<Scenario, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    for _ in 0..SUBJECT_ATTEMPTS {
        let subject = gen_subject(&mut rng, opts.shape);
        let suite = gen_suite(&mut rng, &subject, opts);
        if suite.tests.is_empty() {
            continue;
        }
        let sites = mutation_sites(&subject);
        if sites.is_empty() {
            continue;
        }
        for _ in 0..MUTANT_ATTEMPTS {
            let count = if rng.gen_bool(0.25) { 2 } else { 1 };
            let (mutant, faults) = apply_mutations(&mut rng, &subject, &sites, count);
            if accepts(&mutant, &suite) {
                let faulty_lines = faults
                    .iter()
                    .map(|id| mutant.statement(*id).map_or(0, |s| s.line))
                    .collect();
                let id = format!("gen-{seed}-{index:04}");
                let mut suite = suite;
                suite.path = format!("{id}/suite.tst");
                let mut subject = mutant;
                subject.path = format!("{id}/subject.sub");
                return Ok(Scenario {
                    truth: GroundTruth {
                        scenario_id: id.clone(),
                        faulty_statements: faults,
                        faulty_lines,
                    },
                    id,
                    subject,
                    suite,
                    provenance: Provenance::Generated { seed },
                });
            }
        }
    }
    Err(HarnessError::GenerationRetryExhausted {
        index,
        attempts: SUBJECT_ATTEMPTS * MUTANT_ATTEMPTS,
    })
}

/// At least one failing test, and no runtime error anywhere (checked in
/// Trycatch mode so assertions after a failure are evaluated too).
fn accepts(mutant: &SourceUnit, suite: &SourceUnit) -> bool {
    let mut any_failed = false;
    for t in &suite.tests {
        let Ok(trace) = run_test(mutant, t, ExecutionMode::Trycatch, DEFAULT_FUEL) else {
            return false;
        };
        if trace.failures.iter().any(|f| f.kind == FailureKind::RuntimeError) {
            return false;
        }
        any_failed |= !trace.passed();
    }
    any_failed
}

fn stmt(kind: StmtKind) -> Statement {
    Statement {
        id: StatementId(0),
        line: 0,
        kind,
    }
}

fn gen_leaf(rng: &mut ChaCha8Rng, vars: &[String]) -> Expr {
    if !vars.is_empty() && rng.gen_bool(0.7) {
        Expr::var(vars.choose(rng).expect("non-empty").clone())
    } else {
        Expr::int(rng.gen_range(0..10))
    }
}

fn gen_expr(rng: &mut ChaCha8Rng, vars: &[String], callees: &[(String, usize)], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.3) {
        return gen_leaf(rng, vars);
    }
    if !callees.is_empty() && rng.gen_bool(0.25) {
        let (name, arity) = callees.choose(rng).expect("non-empty").clone();
        let args = (0..arity).map(|_| gen_leaf(rng, vars)).collect();
        return Expr::call(name, args);
    }
    let op = *[BinOp::Add, BinOp::Add, BinOp::Sub, BinOp::Mul]
        .choose(rng)
        .expect("non-empty");
    let lhs = gen_expr(rng, vars, callees, depth - 1);
    let rhs = if op == BinOp::Mul {
        // keep products small
        Expr::int(rng.gen_range(2..4))
    } else {
        gen_expr(rng, vars, callees, depth - 1)
    };
    Expr::binary(op, lhs, rhs)
}

fn gen_cmp(rng: &mut ChaCha8Rng, params: &[String]) -> Expr {
    let op = *[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq]
        .choose(rng)
        .expect("non-empty");
    let lhs = Expr::var(params.choose(rng).expect("non-empty").clone());
    let rhs = if params.len() > 1 && rng.gen_bool(0.4) {
        Expr::var(params.choose(rng).expect("non-empty").clone())
    } else {
        Expr::int(rng.gen_range(0..7))
    };
    Expr::binary(op, lhs, rhs)
}

fn gen_body(rng: &mut ChaCha8Rng, params: &[String], callees: &[(String, usize)]) -> Vec<Statement> {
    let mut vars: Vec<String> = params.to_vec();
    let e = |rng: &mut ChaCha8Rng, vars: &[String], d| gen_expr(rng, vars, callees, d);
    match rng.gen_range(0..5) {
        0 => {
            let t = e(rng, &vars, 2);
            vars.push("t".into());
            let tail = e(rng, &vars, 1);
            let op = *[BinOp::Add, BinOp::Sub].choose(rng).expect("non-empty");
            vec![
                stmt(StmtKind::Let {
                    name: "t".into(),
                    value: t,
                }),
                stmt(StmtKind::Return(Expr::binary(op, Expr::var("t"), tail))),
            ]
        }
        1 => {
            let init = e(rng, &vars, 1);
            let cond = gen_cmp(rng, params);
            let then_v = e(rng, &vars, 2);
            let else_v = e(rng, &vars, 2);
            vars.push("r".into());
            let tail = if rng.gen_bool(0.5) {
                Expr::var("r")
            } else {
                Expr::binary(BinOp::Add, Expr::var("r"), e(rng, &vars, 1))
            };
            vec![
                stmt(StmtKind::Let {
                    name: "r".into(),
                    value: init,
                }),
                stmt(StmtKind::If {
                    cond,
                    then_block: vec![stmt(StmtKind::Assign {
                        name: "r".into(),
                        value: then_v,
                    })],
                    else_block: vec![stmt(StmtKind::Assign {
                        name: "r".into(),
                        value: else_v,
                    })],
                }),
                stmt(StmtKind::Return(tail)),
            ]
        }
        2 => vec![
            stmt(StmtKind::If {
                cond: gen_cmp(rng, params),
                then_block: vec![stmt(StmtKind::Return(e(rng, &vars, 2)))],
                else_block: vec![],
            }),
            stmt(StmtKind::Return(e(rng, &vars, 2))),
        ],
        3 => {
            let limit = rng.gen_range(2..5);
            let p = params.choose(rng).expect("non-empty").clone();
            let init = e(rng, &vars, 1);
            vars.push("acc".into());
            vars.push(LOOP_COUNTER.into());
            let step = Expr::binary(BinOp::Add, Expr::var("acc"), e(rng, &vars, 1));
            vec![
                stmt(StmtKind::Let {
                    name: "acc".into(),
                    value: init,
                }),
                stmt(StmtKind::Let {
                    name: LOOP_COUNTER.into(),
                    value: Expr::int(0),
                }),
                stmt(StmtKind::While {
                    cond: Expr::binary(
                        BinOp::Lt,
                        Expr::var(LOOP_COUNTER),
                        Expr::call("min", vec![Expr::var(p), Expr::int(limit)]),
                    ),
                    body: vec![
                        stmt(StmtKind::Assign {
                            name: "acc".into(),
                            value: step,
                        }),
                        stmt(StmtKind::Assign {
                            name: LOOP_COUNTER.into(),
                            value: Expr::binary(BinOp::Add, Expr::var(LOOP_COUNTER), Expr::int(1)),
                        }),
                    ],
                    bound: limit as u32,
                }),
                stmt(StmtKind::Return(Expr::var("acc"))),
            ]
        }
        _ => {
            let p = params.choose(rng).expect("non-empty").clone();
            let k1 = rng.gen_range(0..4);
            let k2 = k1 + rng.gen_range(1..4);
            let lt = |k| Expr::binary(BinOp::Lt, Expr::var(p.clone()), Expr::int(k));
            vec![stmt(StmtKind::If {
                cond: lt(k1),
                then_block: vec![stmt(StmtKind::Return(e(rng, &vars, 2)))],
                else_block: vec![stmt(StmtKind::If {
                    cond: lt(k2),
                    then_block: vec![stmt(StmtKind::Return(e(rng, &vars, 2)))],
                    else_block: vec![stmt(StmtKind::Return(e(rng, &vars, 2)))],
                })],
            })]
        }
    }
}

fn gen_subject(rng: &mut ChaCha8Rng, shape: Shape) -> SourceUnit {
    let count = match shape {
        Shape::Small => rng.gen_range(2..=4),
        Shape::Medium => rng.gen_range(4..=6),
    };
    let mut names = NAMES.to_vec();
    names.shuffle(rng);
    let mut unit = SourceUnit::empty("subject.sub", UnitKind::Subject);
    let mut callees: Vec<(String, usize)> = Vec::new();
    for name in names.into_iter().take(count) {
        let arity = rng.gen_range(1..=3);
        let params: Vec<String> = PARAMS[..arity].iter().map(|p| p.to_string()).collect();
        let body = gen_body(rng, &params, &callees);
        unit.functions.push(FunctionDef {
            name: name.to_string(),
            params,
            body,
            line: 0,
        });
        callees.push((name.to_string(), arity));
    }
    parse_unit(&pretty_print(&unit), UnitKind::Subject).expect("generated subject parses")
}

fn int_value(v: &Value) -> Option<i64> {
    match v {
        Value::Int(n) => Some(*n),
        _ => None,
    }
}

struct TestBuilder {
    lines: Vec<String>,
    env: HashMap<String, i64>,
    assertions: usize,
}

fn gen_test(
    rng: &mut ChaCha8Rng,
    subject: &SourceUnit,
    index: usize,
    assertions: usize,
    opts: &GenOptions,
) -> Option<String> {
    let target = subject.functions.choose(rng)?;
    let name = format!("test_{}_{index}", target.name);
    let mut b = TestBuilder {
        lines: Vec::new(),
        env: HashMap::new(),
        assertions: 0,
    };
    if assertions > 1 && rng.gen_bool(0.3) {
        let v = rng.gen_range(0..6);
        b.lines.push(format!("let base = {v};"));
        b.env.insert("base".into(), v);
    }
    let mut last_result: Option<String> = None;
    for k in 1..=assertions {
        for _ in 0..5 {
            if gen_assertion(rng, subject, target, k, &mut b, &mut last_result, opts) {
                break;
            }
        }
    }
    if b.assertions == 0 {
        return None;
    }
    if b.lines.first().is_some_and(|l| l.starts_with("let base"))
        && !b.lines[1..].iter().any(|l| l.contains("base"))
    {
        b.lines.remove(0);
    }
    let body: Vec<String> = b.lines.iter().map(|l| format!("    {l}")).collect();
    Some(format!("test {name} {{\n{}\n}}\n", body.join("\n")))
}

fn literal(n: i64) -> String {
    expr_to_string(&Expr::int(n))
}

fn gen_assertion(
    rng: &mut ChaCha8Rng,
    subject: &SourceUnit,
    target: &FunctionDef,
    k: usize,
    b: &mut TestBuilder,
    last_result: &mut Option<String>,
    opts: &GenOptions,
) -> bool {
    let mut pre = Vec::new();
    let mut args = Vec::new();
    let mut values = Vec::new();
    let infect = opts.allow_state_infection && k > 1 && rng.gen_bool(0.4);
    for m in 0..target.params.len() {
        if m == 0 && infect {
            if let Some(r) = last_result.as_ref() {
                args.push(r.clone());
                values.push(b.env[r]);
                continue;
            }
        }
        let v = rng.gen_range(-2..10);
        if b.env.contains_key("base") && rng.gen_bool(0.3) {
            args.push("base".to_string());
            values.push(b.env["base"]);
        } else if rng.gen_bool(0.3) {
            let var = format!("x{k}_{m}");
            pre.push((var.clone(), v));
            args.push(var);
            values.push(v);
        } else {
            args.push(literal(v));
            values.push(v);
        }
    }
    let result = call_function(
        subject,
        &target.name,
        values.into_iter().map(Value::Int).collect(),
        DEFAULT_FUEL,
    );
    let Some(expected) = result.ok().as_ref().and_then(int_value) else {
        return false;
    };
    for (var, v) in pre {
        b.lines.push(format!("let {var} = {};", literal(v)));
        b.env.insert(var, v);
    }
    let call = format!("{}({})", target.name, args.join(", "));
    if infect && last_result.is_some() {
        let r = last_result.clone().expect("checked");
        b.lines.push(format!("{r} = {call};"));
        b.lines.push(format!("assert_eq({}, {r});", literal(expected)));
        b.env.insert(r, expected);
    } else {
        match rng.gen_range(0..20) {
            0..=10 => {
                let r = format!("r{k}");
                b.lines.push(format!("let {r} = {call};"));
                b.lines.push(format!("assert_eq({}, {r});", literal(expected)));
                b.env.insert(r.clone(), expected);
                *last_result = Some(r);
            }
            11..=15 => b.lines.push(format!("assert_eq({}, {call});", literal(expected))),
            16..=17 => {
                let r = format!("r{k}");
                let d = rng.gen_range(1..5);
                b.lines.push(format!("let {r} = {call};"));
                b.lines.push(format!("let d{k} = {r} + {d};"));
                b.lines.push(format!("assert_eq({}, d{k});", literal(expected + d)));
                b.env.insert(r.clone(), expected);
                *last_result = Some(r);
            }
            _ => {
                let r = format!("r{k}");
                b.lines.push(format!("let {r} = {call};"));
                b.lines.push(format!("assert_true({r} >= {});", literal(expected)));
                b.env.insert(r.clone(), expected);
                *last_result = Some(r);
            }
        }
    }
    b.assertions += 1;
    true
}

fn gen_suite(rng: &mut ChaCha8Rng, subject: &SourceUnit, opts: &GenOptions) -> SourceUnit {
    let count = match opts.shape {
        Shape::Small => rng.gen_range(5..=15),
        Shape::Medium => rng.gen_range(15..=40),
    };
    let p_multi = rng.gen_range(0.35..0.70);
    let mut src = String::new();
    let mut n = 0;
    for j in 1..=count {
        let assertions = if rng.gen_bool(p_multi) {
            rng.gen_range(2..=5)
        } else {
            1
        };
        if let Some(text) = gen_test(rng, subject, j, assertions, opts) {
            src.push_str(&text);
            n += 1;
        }
    }
    let unit = parse_unit(&src, UnitKind::Testsuite).expect("generated suite parses");
    debug_assert_eq!(unit.tests.len(), n);
    // canonical formatting, so lines match what `save` writes
    parse_unit(&pretty_print(&unit), UnitKind::Testsuite).expect("printed suite parses")
}

fn op_alternatives(op: BinOp) -> &'static [BinOp] {
    match op {
        BinOp::Add => &[BinOp::Sub],
        BinOp::Sub => &[BinOp::Add],
        BinOp::Mul => &[BinOp::Add],
        BinOp::Lt => &[BinOp::Le, BinOp::Ge],
        BinOp::Le => &[BinOp::Lt, BinOp::Gt],
        BinOp::Gt => &[BinOp::Ge, BinOp::Le],
        BinOp::Ge => &[BinOp::Gt, BinOp::Lt],
        BinOp::Eq => &[BinOp::Ne],
        BinOp::Ne => &[BinOp::Eq],
        _ => &[],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MutationKind {
    OperatorSwap,
    ComparisonFlip,
    ConstantPerturbation,
    WrongBranchAssignment,
}

fn expr_mutants(e: &Expr) -> Vec<(Expr, MutationKind)> {
    let mut out = Vec::new();
    match e {
        Expr::Int(n) => {
            out.push((Expr::Int(n + 1), MutationKind::ConstantPerturbation));
            if *n > 0 {
                out.push((Expr::Int(n - 1), MutationKind::ConstantPerturbation));
            }
        }
        Expr::Binary(op, l, r) => {
            let kind = if matches!(op, BinOp::Add | BinOp::Sub | BinOp::Mul) {
                MutationKind::OperatorSwap
            } else {
                MutationKind::ComparisonFlip
            };
            for alt in op_alternatives(*op) {
                out.push((Expr::Binary(*alt, l.clone(), r.clone()), kind));
            }
            for (m, k) in expr_mutants(l) {
                out.push((Expr::Binary(*op, Box::new(m), r.clone()), k));
            }
            for (m, k) in expr_mutants(r) {
                out.push((Expr::Binary(*op, l.clone(), Box::new(m)), k));
            }
        }
        Expr::Unary(op, inner) => {
            for (m, k) in expr_mutants(inner) {
                out.push((Expr::Unary(*op, Box::new(m)), k));
            }
        }
        Expr::Call(name, args) => {
            for (i, a) in args.iter().enumerate() {
                for (m, k) in expr_mutants(a) {
                    let mut args = args.clone();
                    args[i] = m;
                    out.push((Expr::Call(name.clone(), args), k));
                }
            }
        }
        _ => {}
    }
    out
}

/// A statement and one way to mutate it.
#[derive(Debug, Clone)]
struct Site {
    statement: StatementId,
    kind: MutationKind,
    replacement: StmtKind,
}

fn mutation_sites(subject: &SourceUnit) -> Vec<Site> {
    let mut sites = Vec::new();
    for f in &subject.functions {
        walk_statements(&f.body, &mut |s| {
            let push = |sites: &mut Vec<Site>, kind, replacement| {
                sites.push(Site {
                    statement: s.id,
                    kind,
                    replacement,
                })
            };
            match &s.kind {
                StmtKind::Let { name, value } | StmtKind::Assign { name, value }
                    if name != LOOP_COUNTER =>
                {
                    let assign = matches!(s.kind, StmtKind::Assign { .. });
                    for (m, k) in expr_mutants(value) {
                        let replacement = if assign {
                            StmtKind::Assign {
                                name: name.clone(),
                                value: m,
                            }
                        } else {
                            StmtKind::Let {
                                name: name.clone(),
                                value: m,
                            }
                        };
                        push(&mut sites, k, replacement);
                    }
                }
                StmtKind::Return(value) => {
                    for (m, k) in expr_mutants(value) {
                        push(&mut sites, k, StmtKind::Return(m));
                    }
                }
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    for (m, k) in expr_mutants(cond) {
                        let replacement = StmtKind::If {
                            cond: m,
                            then_block: then_block.clone(),
                            else_block: else_block.clone(),
                        };
                        push(&mut sites, k, replacement);
                    }
                    if let (
                        [Statement {
                            id: then_id,
                            kind: StmtKind::Assign { name, value: tv },
                            ..
                        }],
                        [Statement {
                            kind: StmtKind::Assign { name: en, value: ev },
                            ..
                        }],
                    ) = (then_block.as_slice(), else_block.as_slice())
                    {
                        if name == en && tv != ev {
                            sites.push(Site {
                                statement: *then_id,
                                kind: MutationKind::WrongBranchAssignment,
                                replacement: StmtKind::Assign {
                                    name: name.clone(),
                                    value: ev.clone(),
                                },
                            });
                        }
                    }
                }
                _ => {}
            }
        });
    }
    sites
}

fn replace_statement(block: &mut [Statement], id: StatementId, kind: &StmtKind) -> bool {
    for s in block {
        if s.id == id {
            s.kind = kind.clone();
            return true;
        }
        let found = match &mut s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => replace_statement(then_block, id, kind) || replace_statement(else_block, id, kind),
            StmtKind::While { body, .. } => replace_statement(body, id, kind),
            _ => false,
        };
        if found {
            return true;
        }
    }
    false
}

/// Applies `count` mutations at distinct statements, mutation kind first
/// (uniform over the kinds available), then site.
fn apply_mutations(
    rng: &mut ChaCha8Rng,
    subject: &SourceUnit,
    sites: &[Site],
    count: usize,
) -> (SourceUnit, BTreeSet<StatementId>) {
    let mut mutant = subject.clone();
    let mut faults = BTreeSet::new();
    for _ in 0..count {
        let open: Vec<&Site> = sites
            .iter()
            .filter(|s| !faults.contains(&s.statement))
            .filter(|s| {
                // an If whose arm was already mutated keeps its arms
                !matches!(s.replacement, StmtKind::If { .. })
                    || !faults.iter().any(|f| {
                        subject.statement(s.statement).is_some_and(|st| {
                            let mut inside = false;
                            walk_statements(&st.blocks().concat(), &mut |n| inside |= n.id == *f);
                            inside
                        })
                    })
            })
            .collect();
        let kinds: BTreeSet<MutationKind> = open.iter().map(|s| s.kind).collect();
        let Some(kind) = kinds.iter().copied().collect::<Vec<_>>().choose(rng).copied() else {
            break;
        };
        let candidates: Vec<&&Site> = open.iter().filter(|s| s.kind == kind).collect();
        let site = *candidates.choose(rng).expect("kind has a site");
        for f in &mut mutant.functions {
            if replace_statement(&mut f.body, site.statement, &site.replacement) {
                break;
            }
        }
        faults.insert(site.statement);
    }
    let reparsed =
        parse_unit(&pretty_print(&mutant), UnitKind::Subject).expect("mutant subject parses");
    (reparsed, faults)
}
