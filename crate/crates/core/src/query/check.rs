use std::collections::{BTreeSet, HashMap};

use super::ast::*;

#[derive(Debug, Clone, PartialEq)]
pub enum SemanticErrorKind {
    DuplicateOperator(String),
    DuplicateParameter { operator: String, param: String },
    UndefinedOperator(String),
    Arity { operator: String, expected: usize, found: usize },
    UnboundIdentifier(String),
    NextNotInTail,
    SteppingCallNotInTail(String),
    NextInSteady(CommandKind),
    RangeShadowsOperator(String),
    BadArguments { command: CommandKind, expected: &'static str },
}

impl std::fmt::Display for SemanticErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use SemanticErrorKind::*;
        match self {
            DuplicateOperator(n) => write!(f, "operator `{n}` is defined more than once"),
            DuplicateParameter { operator, param } => {
                write!(f, "parameter `{param}` appears twice in `{operator}`")
            }
            UndefinedOperator(n) => write!(f, "undefined operator `{n}`"),
            Arity { operator, expected, found } => {
                write!(f, "`{operator}` takes {expected} argument(s), {found} given")
            }
            UnboundIdentifier(n) => write!(f, "unbound identifier `{n}`"),
            NextNotInTail => write!(f, "`next` is only allowed in tail position"),
            SteppingCallNotInTail(n) => {
                write!(f, "`{n}` advances the simulation and may only be called in tail position")
            }
            NextInSteady(k) => write!(f, "next in steady-state query (`{}` needs next-free operators)", k.keyword()),
            RangeShadowsOperator(n) => write!(f, "range variable `{n}` shadows an operator of the same name"),
            BadArguments { command, expected } => {
                write!(f, "`{}` expects {expected} after its targets", command.keyword())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticError {
    pub pos: Pos,
    pub kind: SemanticErrorKind,
}

impl std::fmt::Display for SemanticError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pos, self.kind)
    }
}

/// Operators whose evaluation may advance the simulation: their body contains
/// `next` or calls another such operator.
pub fn stepping_operators(q: &Query) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    loop {
        let before = set.len();
        for op in &q.operators {
            if !set.contains(&op.name) && expr_steps(&op.body, &set) {
                set.insert(op.name.clone());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

pub(crate) fn expr_steps(e: &Expr, stepping: &BTreeSet<String>) -> bool {
    match e {
        Expr::Num(_) | Expr::Str(_) | Expr::Var(..) => false,
        Expr::Observe(a, _) | Expr::Neg(a) => expr_steps(a, stepping),
        Expr::Next(..) => true,
        Expr::Call(c) => stepping.contains(&c.name) || c.args.iter().any(|a| expr_steps(a, stepping)),
        Expr::If { lhs, rhs, then, els, .. } => [lhs, rhs, then, els].iter().any(|x| expr_steps(x, stepping)),
        Expr::Bin(_, a, b) => expr_steps(a, stepping) || expr_steps(b, stepping),
    }
}

/// Range variable of an autoIR command, when present and well formed.
pub fn range_var(cmd: &EvalCommand) -> Option<&str> {
    match (cmd.kind, cmd.tail.as_slice()) {
        (CommandKind::AutoIr, [TailArg::Ident(v, _), TailArg::Num(..), TailArg::Num(..), TailArg::Num(..)]) => {
            Some(v.as_str())
        }
        _ => None,
    }
}

/// Collects every static violation in the query.
pub fn check(q: &Query) -> Vec<SemanticError> {
    let mut arities: HashMap<&str, usize> = HashMap::new();
    for o in &q.operators {
        arities.entry(o.name.as_str()).or_insert(o.params.len());
    }
    let stepping = stepping_operators(q);
    let mut errs = Vec::new();
    let mut seen = BTreeSet::new();
    for op in &q.operators {
        if !seen.insert(op.name.as_str()) {
            errs.push(SemanticError { pos: op.pos, kind: SemanticErrorKind::DuplicateOperator(op.name.clone()) });
        }
        let mut ps = BTreeSet::new();
        for p in &op.params {
            if !ps.insert(p.as_str()) {
                errs.push(SemanticError {
                    pos: op.pos,
                    kind: SemanticErrorKind::DuplicateParameter { operator: op.name.clone(), param: p.clone() },
                });
            }
        }
        let mut w = Walker { arities: &arities, stepping: &stepping, scope: &op.params, errs: &mut errs };
        w.walk(&op.body, true);
    }
    for cmd in &q.commands {
        let expected: Option<&'static str> = match (cmd.kind, cmd.tail.len()) {
            (CommandKind::AutoIr, 0) => None,
            (CommandKind::AutoIr, _) if range_var(cmd).is_some() => None,
            (CommandKind::AutoIr, _) => Some("nothing, or a range `var, from, step, to`"),
            (CommandKind::ManualRd, _) if matches!(cmd.tail.as_slice(), [TailArg::Num(..), TailArg::Num(..)]) => None,
            (CommandKind::ManualRd, _) => Some("a warmup length and a horizon `w, m`"),
            (CommandKind::ManualBm, _) if matches!(cmd.tail.as_slice(), [TailArg::Num(..)]) => None,
            (CommandKind::ManualBm, _) => Some("a warmup length `w`"),
            (_, 0) => None,
            _ => Some("no further arguments"),
        };
        if let Some(expected) = expected {
            errs.push(SemanticError { pos: cmd.pos, kind: SemanticErrorKind::BadArguments { command: cmd.kind, expected } });
        }
        let scope: Vec<String> = range_var(cmd).map(|v| vec![v.to_string()]).unwrap_or_default();
        if let Some(v) = range_var(cmd) {
            if arities.contains_key(v) {
                errs.push(SemanticError { pos: cmd.pos, kind: SemanticErrorKind::RangeShadowsOperator(v.to_string()) });
            }
        }
        for t in &cmd.targets {
            let mut w = Walker { arities: &arities, stepping: &stepping, scope: &scope, errs: &mut errs };
            w.walk(t, true);
            if cmd.kind.is_steady() && expr_steps(t, &stepping) {
                errs.push(SemanticError { pos: expr_pos(t).unwrap_or(cmd.pos), kind: SemanticErrorKind::NextInSteady(cmd.kind) });
            }
        }
    }
    errs
}

fn expr_pos(e: &Expr) -> Option<Pos> {
    match e {
        Expr::Var(_, p) | Expr::Observe(_, p) | Expr::Next(_, p) | Expr::If { pos: p, .. } => Some(*p),
        Expr::Call(c) => Some(c.pos),
        Expr::Bin(_, a, _) => expr_pos(a),
        Expr::Neg(a) => expr_pos(a),
        Expr::Num(_) | Expr::Str(_) => None,
    }
}

struct Walker<'a> {
    arities: &'a HashMap<&'a str, usize>,
    stepping: &'a BTreeSet<String>,
    scope: &'a [String],
    errs: &'a mut Vec<SemanticError>,
}

impl Walker<'_> {
    fn push(&mut self, pos: Pos, kind: SemanticErrorKind) {
        self.errs.push(SemanticError { pos, kind });
    }

    fn call(&mut self, c: &Call) {
        match self.arities.get(c.name.as_str()) {
            None => self.push(c.pos, SemanticErrorKind::UndefinedOperator(c.name.clone())),
            Some(&n) if n != c.args.len() => self.push(
                c.pos,
                SemanticErrorKind::Arity { operator: c.name.clone(), expected: n, found: c.args.len() },
            ),
            _ => {}
        }
        for a in &c.args {
            self.walk(a, false);
        }
    }

    fn walk(&mut self, e: &Expr, tail: bool) {
        match e {
            Expr::Num(_) | Expr::Str(_) => {}
            Expr::Var(n, pos) => {
                if !self.scope.contains(n) {
                    self.push(*pos, SemanticErrorKind::UnboundIdentifier(n.clone()));
                }
            }
            Expr::Observe(a, _) => self.walk(a, false),
            Expr::Call(c) => {
                if !tail && self.stepping.contains(&c.name) {
                    self.push(c.pos, SemanticErrorKind::SteppingCallNotInTail(c.name.clone()));
                }
                self.call(c);
            }
            Expr::Next(c, pos) => {
                if !tail {
                    self.push(*pos, SemanticErrorKind::NextNotInTail);
                }
                self.call(c);
            }
            Expr::If { lhs, rhs, then, els, .. } => {
                self.walk(lhs, false);
                self.walk(rhs, false);
                self.walk(then, tail);
                self.walk(els, tail);
            }
            Expr::Bin(_, a, b) => {
                self.walk(a, false);
                self.walk(b, false);
            }
            Expr::Neg(a) => self.walk(a, false),
        }
    }
}
