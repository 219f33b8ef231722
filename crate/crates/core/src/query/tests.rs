use proptest::prelude::*;

use super::ast::*;
use super::bind::{expand_range, target_label};
use super::*;
use crate::sim::{ObservableId, Probe, SimError, Simulator};
use crate::transient::CellSampler;

const OBS_AT_STEP: &str = include_str!("../../queries/obs_at_step.mqx");
const STEADY_TARGETS: &str = include_str!("../../queries/steady_targets.mqx");

/// Counts `next` calls; observables are "steps", "x" (= steps) and "y" (= 2 steps).
#[derive(Default)]
struct Metered {
    steps: u64,
    nexts: u64,
}

impl Simulator for Metered {
    fn reset(&mut self, _seed: u64) -> Result<(), SimError> {
        self.steps = 0;
        Ok(())
    }
    fn next(&mut self) -> Result<(), SimError> {
        self.steps += 1;
        self.nexts += 1;
        Ok(())
    }
    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        match obs.as_str() {
            "steps" | "x" => Ok(Probe(0)),
            "y" => Ok(Probe(1)),
            other => Err(SimError::UnknownObservable(other.into())),
        }
    }
    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        Ok(self.steps as f64 * (probe.0 + 1) as f64)
    }
    fn step_count(&self) -> u64 {
        self.steps
    }
}

fn semantic(src: &str) -> Vec<SemanticErrorKind> {
    match parse_query(src) {
        Err(QueryError::Semantic(errs)) => errs.into_iter().map(|e| e.kind).collect(),
        other => panic!("expected semantic errors, got {other:?}"),
    }
}

#[test]
fn obs_at_step_query_shape() {
    let q = parse_query(OBS_AT_STEP).unwrap();
    assert_eq!(q.operators.len(), 1);
    assert_eq!(q.operators[0].params, vec!["t", "obs"]);
    let cmd = &q.commands[0];
    assert_eq!(cmd.kind, CommandKind::AutoIr);
    assert_eq!(cmd.targets.len(), 2);
    assert_eq!(check::range_var(cmd), Some("t"));
    assert!(matches!(cmd.tail[1..], [TailArg::Num(f, _), TailArg::Num(s, _), TailArg::Num(t, _)] if (f, s, t) == (1.0, 1.0, 400.0)));
    match bind_query(q, None, DEFAULT_UNFOLD_BUDGET).unwrap() {
        QueryAnalysis::Transient(cells) => {
            let keys = cells.cells();
            assert_eq!(keys.len(), 800);
            assert_eq!(keys[0].label, "obsAtStep(t,\"bankruptcy\")");
            assert_eq!(keys[0].time, 1);
            assert_eq!(keys[399].time, 400);
            assert_eq!(keys[400].label, "obsAtStep(t,\"unemploymentRate\")");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn steady_targets_query_shape() {
    let q = parse_query(STEADY_TARGETS).unwrap();
    let kinds: Vec<_> = q.commands.iter().map(|c| c.kind).collect();
    assert_eq!(kinds, vec![CommandKind::Warmup, CommandKind::AutoBm, CommandKind::AutoRd]);
    assert!(q.commands.iter().all(|c| c.targets.len() == 4));
    assert!(matches!(bind_query(q.clone(), None, DEFAULT_UNFOLD_BUDGET), Err(QueryError::Bind(_))));
    for (kind, expect) in [
        (CommandKind::Warmup, SteadyCommand::Warmup),
        (CommandKind::AutoBm, SteadyCommand::AutoBm),
        (CommandKind::AutoRd, SteadyCommand::AutoRd),
    ] {
        match bind_query(q.clone(), Some(kind), DEFAULT_UNFOLD_BUDGET).unwrap() {
            QueryAnalysis::Steady { command, observables, derived } => {
                assert_eq!(command, expect);
                let names: Vec<_> = observables.iter().map(|o| o.to_string()).collect();
                assert_eq!(names, vec!["0", "1", "2", "price"]);
                assert!(derived.is_none());
            }
            other => panic!("{other:?}"),
        }
    }
    assert!(matches!(bind_query(q, Some(CommandKind::ManualBm), 1), Err(QueryError::Bind(_))));
}

#[test]
fn next_in_steady_is_rejected() {
    let errs = semantic(r#"obs(o) = s.eval(o) ; eval autoRD(E[ obs("price") ], E[ next(obs("price")) ]);"#);
    assert_eq!(errs, vec![SemanticErrorKind::NextInSteady(CommandKind::AutoRd)]);
    let errs = semantic("f() = next(f()); g() = 1 + f(); eval warmup(E[ g() ]);");
    assert!(errs.contains(&SemanticErrorKind::NextInSteady(CommandKind::Warmup)));
    assert!(errs.contains(&SemanticErrorKind::SteppingCallNotInTail("f".into())));
}

#[test]
fn all_semantic_errors_are_reported() {
    let src = "f(a, a) = b + g(1) + h() ;\nf() = 1 + next(f()) ;\neval autoIR(E[ f(1, 2, 3) ], f, 0, 1, 2) ;";
    let errs = semantic(src);
    let expected = [
        SemanticErrorKind::DuplicateParameter { operator: "f".into(), param: "a".into() },
        SemanticErrorKind::UnboundIdentifier("b".into()),
        SemanticErrorKind::UndefinedOperator("g".into()),
        SemanticErrorKind::UndefinedOperator("h".into()),
        SemanticErrorKind::DuplicateOperator("f".into()),
        SemanticErrorKind::NextNotInTail,
        SemanticErrorKind::RangeShadowsOperator("f".into()),
        SemanticErrorKind::Arity { operator: "f".into(), expected: 2, found: 3 },
    ];
    for e in &expected {
        assert!(errs.contains(e), "missing {e:?} in {errs:?}");
    }
    let text = parse_query(src).unwrap_err().to_string();
    assert!(text.lines().count() >= expected.len());
    assert!(text.starts_with("semantic error at 1:1:"), "{text}");
}

#[test]
fn command_arguments_are_checked() {
    let bad = [
        "f() = 1; eval autoIR(E[ f() ], t, 1, 2);",
        "f() = 1; eval manualRD(E[ f() ], 3);",
        "f() = 1; eval manualBM(E[ f() ]);",
        "f() = 1; eval autoBM(E[ f() ], 3);",
    ];
    for src in bad {
        assert!(
            matches!(semantic(src).as_slice(), [SemanticErrorKind::BadArguments { .. }]),
            "{src}"
        );
    }
    let q = parse_query("f() = s.eval(\"x\"); eval manualRD(E[ f() ], 100, 400);").unwrap();
    match bind_query(q, None, 10).unwrap() {
        QueryAnalysis::Steady { command, .. } => assert_eq!(command, SteadyCommand::ManualRd { w: 100, m: 400 }),
        other => panic!("{other:?}"),
    }
}

#[test]
fn range_variable_may_reuse_a_parameter_name() {
    // Operator parameters and the range variable live in separate scopes.
    assert!(parse_query(OBS_AT_STEP).is_ok());
    assert_eq!(
        semantic("f(t) = t ; eval autoIR(E[ f(u) ], t, 1, 1, 3);"),
        vec![SemanticErrorKind::UnboundIdentifier("u".into())]
    );
}

#[test]
fn bind_rejects_bad_ranges() {
    for src in [
        "f(t) = t ; eval autoIR(E[ f(t) ], t, 5, 1, 4);",
        "f(t) = t ; eval autoIR(E[ f(t) ], t, 1, 0, 4);",
        "f(t) = t ; eval autoIR(E[ f(t) ], t, 0.5, 1, 4);",
    ] {
        let q = parse_query(src).unwrap();
        assert!(matches!(bind_query(q, None, 10), Err(QueryError::Bind(_))), "{src}");
    }
    assert_eq!(expand_range(2.0, 3.0, 10.0).unwrap(), vec![2, 5, 8]);
    assert_eq!(expand_range(4.0, 1.0, 4.0).unwrap(), vec![4]);
}

fn obs_at_step_call(t: f64) -> (std::sync::Arc<Program>, Expr) {
    let q = parse_query(OBS_AT_STEP).unwrap();
    let call = Expr::Call(Call { name: "obsAtStep".into(), args: vec![Expr::Num(t), Expr::Str("x".into())], pos: Pos::default() });
    (Program::new(q, DEFAULT_UNFOLD_BUDGET), call)
}

#[test]
fn obs_at_step_issues_exactly_t_steps() {
    for t in 0..50u64 {
        let (prog, call) = obs_at_step_call(t as f64);
        let mut sim = Metered::default();
        sim.reset(0).unwrap();
        let mut ev = Evaluator::new(&prog);
        let v = ev.evaluate(&mut sim, &call, eval::Env::new(&[], vec![])).unwrap();
        assert_eq!(v, t as f64);
        assert_eq!(sim.nexts, t);
    }
}

#[test]
fn divergent_operator_hits_the_budget() {
    let q = parse_query("loop() = next(loop()); eval autoIR(E[ loop() ]);").unwrap();
    let prog = Program::new(q, 1000);
    let target = prog.query.commands[0].targets[0].clone();
    let mut sim = Metered::default();
    let err = Evaluator::new(&prog).evaluate(&mut sim, &target, eval::Env::new(&[], vec![])).unwrap_err();
    match err {
        QueryError::Budget { ref operator, budget, steps } => {
            assert_eq!(operator, "loop");
            assert_eq!(budget, 1000);
            assert_eq!(steps, 1000);
        }
        ref other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("`loop`"));
    assert_eq!(DEFAULT_UNFOLD_BUDGET, 1 << 24);
}

#[test]
fn non_tail_recursion_and_arithmetic() {
    let q = parse_query("fact(n) = if (n <= 1) then 1 else n * fact(n - 1) fi ; eval autoIR(E[ fact(5) - -1 ]);").unwrap();
    let prog = Program::new(q, 100);
    let target = prog.query.commands[0].targets[0].clone();
    let v = Evaluator::new(&prog).evaluate(&mut Metered::default(), &target, eval::Env::new(&[], vec![])).unwrap();
    assert_eq!(v, 121.0);
}

#[test]
fn runtime_type_errors_surface() {
    let q = parse_query("f(o) = s.eval(o) + o ; eval autoIR(E[ f(\"x\") ]);").unwrap();
    let prog = Program::new(q, 100);
    let target = prog.query.commands[0].targets[0].clone();
    let err = Evaluator::new(&prog).evaluate(&mut Metered::default(), &target, eval::Env::new(&[], vec![])).unwrap_err();
    assert!(matches!(err, QueryError::Runtime { .. }), "{err}");
    let q = parse_query("f() = s.eval(\"nope\") ; eval autoIR(E[ f() ]);").unwrap();
    let prog = Program::new(q, 100);
    let target = prog.query.commands[0].targets[0].clone();
    let err = Evaluator::new(&prog).evaluate(&mut Metered::default(), &target, eval::Env::new(&[], vec![])).unwrap_err();
    assert!(matches!(err, QueryError::Sim(SimError::UnknownObservable(_))), "{err}");
}

#[test]
fn cells_advance_in_lockstep_on_one_trajectory() {
    let src = "obsAtStep(t,obs) = if (s.eval(\"steps\") == t) then s.eval(obs) else next(obsAtStep(t,obs)) fi ;\n\
               eval autoIR(E[ obsAtStep(t,\"x\") ], E[ obsAtStep(t,\"y\") ], t, 0, 2, 10) ;";
    let cells = match bind_query(parse_query(src).unwrap(), None, DEFAULT_UNFOLD_BUDGET).unwrap() {
        QueryAnalysis::Transient(c) => c,
        other => panic!("{other:?}"),
    };
    assert_eq!(cells.cells().len(), 12);
    let mut sim = Metered::default();
    let mut active = vec![true; 12];
    let out = cells.sample(&mut sim, 7, 10, &active).unwrap();
    assert_eq!(out, vec![0., 2., 4., 6., 8., 10., 0., 4., 8., 12., 16., 20.]);
    assert_eq!(sim.nexts, 10);
    active.iter_mut().skip(4).for_each(|a| *a = false);
    active[6] = true;
    let out = cells.sample(&mut sim, 7, 10, &active).unwrap();
    assert_eq!(&out[..4], &[0., 2., 4., 6.]);
    assert_eq!(out[6], 0.0);
    assert!(out[4].is_nan() && out[11].is_nan());
    assert_eq!(sim.nexts, 16);
}

#[test]
fn derived_steady_targets_never_step() {
    let q = parse_query("obs(o) = s.eval(o) ; twice() = 2 * s.eval(\"x\") + 1 ; eval autoRD(E[ obs(\"x\") ], E[ twice() ]);").unwrap();
    let (observables, derived) = match bind_query(q, None, DEFAULT_UNFOLD_BUDGET).unwrap() {
        QueryAnalysis::Steady { observables, derived, .. } => (observables, derived.unwrap()),
        other => panic!("{other:?}"),
    };
    assert_eq!(observables[0].as_str(), "x");
    assert_eq!(observables[1].as_str(), "twice()");
    assert_eq!(derived.labels().collect::<Vec<_>>(), vec!["twice()"]);
    let mut sim = derived.wrap(Box::new(Metered::default()));
    sim.reset(1).unwrap();
    for _ in 0..3 {
        sim.next().unwrap();
    }
    assert_eq!(sim.eval(&observables[0]).unwrap(), 3.0);
    let p = sim.resolve(&observables[1]).unwrap();
    assert_eq!(sim.read(p).unwrap(), 7.0);
    assert_eq!(sim.read(p).unwrap(), 7.0);
    assert_eq!(sim.step_count(), 3);
}

#[test]
fn shipped_queries_round_trip() {
    for src in [OBS_AT_STEP, STEADY_TARGETS] {
        let q = parse_query(src).unwrap();
        let printed = q.to_string();
        assert_eq!(parse_query(&printed).unwrap(), q, "{printed}");
    }
    assert_eq!(target_label(&parse_query(STEADY_TARGETS).unwrap().commands[0].targets[3]), "obs(\"price\")");
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,4}".prop_filter("reserved", |s| !["if", "then", "else", "fi", "next", "eval", "s"].contains(&s.as_str()))
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![(0u32..1000).prop_map(f64::from), (0.0f64..1e6), (1e-9f64..1e-3)]
}

fn call(inner: BoxedStrategy<Expr>) -> impl Strategy<Value = Call> {
    (ident(), prop::collection::vec(inner, 0..3)).prop_map(|(name, args)| Call { name, args, pos: Pos::default() })
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        number().prop_map(Expr::Num),
        "[a-z \"\\\\]{0,5}".prop_map(Expr::Str),
        ident().prop_map(|n| Expr::Var(n, Pos::default())),
        prop_oneof![
            "[a-z]{1,4}".prop_map(Expr::Str),
            number().prop_map(Expr::Num),
            ident().prop_map(|n| Expr::Var(n, Pos::default()))
        ]
        .prop_map(|a| Expr::Observe(Box::new(a), Pos::default())),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let cmp = prop_oneof![Just(CmpOp::Eq), Just(CmpOp::Lt), Just(CmpOp::Gt), Just(CmpOp::Le), Just(CmpOp::Ge)];
        let bin = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)];
        prop_oneof![
            call(inner.clone()).prop_map(Expr::Call),
            call(inner.clone()).prop_map(|c| Expr::Next(c, Pos::default())),
            (inner.clone(), cmp, inner.clone(), inner.clone(), inner.clone()).prop_map(|(l, op, r, t, e)| Expr::If {
                lhs: Box::new(l),
                op,
                rhs: Box::new(r),
                then: Box::new(t),
                els: Box::new(e),
                pos: Pos::default()
            }),
            (bin, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            inner.prop_map(|a| Expr::Neg(Box::new(a))),
        ]
    })
}

fn command() -> impl Strategy<Value = EvalCommand> {
    let kind = prop_oneof![
        Just(CommandKind::AutoIr),
        Just(CommandKind::Warmup),
        Just(CommandKind::AutoBm),
        Just(CommandKind::AutoRd),
        Just(CommandKind::ManualRd),
        Just(CommandKind::ManualBm)
    ];
    let tail_num = (-1e3f64..1e3).prop_map(|x| TailArg::Num(x, Pos::default()));
    let tail = prop_oneof![
        Just(vec![]),
        (ident(), prop::collection::vec(tail_num.clone(), 3))
            .prop_map(|(v, mut n)| {
                n.insert(0, TailArg::Ident(v, Pos::default()));
                n
            }),
        prop::collection::vec(tail_num, 1..3),
    ];
    (kind, prop::collection::vec(expr(), 1..4), tail).prop_map(|(kind, targets, tail)| EvalCommand {
        kind,
        targets,
        tail,
        pos: Pos::default(),
    })
}

fn query() -> impl Strategy<Value = Query> {
    let op = (ident(), prop::collection::vec(ident(), 0..3), expr())
        .prop_map(|(name, params, body)| OpDef { name, params, body, pos: Pos::default() });
    (prop::collection::vec(op, 1..4), prop::collection::vec(command(), 1..3))
        .prop_map(|(operators, commands)| Query { operators, commands })
}

proptest! {
    #[test]
    fn pretty_print_reparses_to_the_same_ast(q in query()) {
        let printed = q.to_string();
        let back = parser::parse_syntax(&printed);
        prop_assert!(back.is_ok(), "{printed}\n{back:?}");
        prop_assert_eq!(back.unwrap(), q);
    }
}
