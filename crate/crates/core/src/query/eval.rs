use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::QueryError;
use crate::sim::{ObservableId, Probe, SimError, Simulator};

/// Default cap on operator unfoldings per evaluated target.
pub const DEFAULT_UNFOLD_BUDGET: u64 = 1 << 24;

/// Nesting limit for operator calls outside tail position.
const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
}

impl Value {
    fn describe(&self) -> String {
        match self {
            Value::Num(x) => format!("number {x}"),
            Value::Str(s) => format!("string {s:?}"),
        }
    }
}

/// Observable name denoted by a value; integral numbers print without a
/// fractional part so `0` names observable "0".
pub fn observable_name(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        Value::Num(x) if *x == 0.0 => "0".into(),
        Value::Num(x) => format!("{x}"),
    }
}

/// A checked query with operators indexed by name.
#[derive(Debug)]
pub struct Program {
    pub query: Query,
    index: HashMap<String, usize>,
    pub budget: u64,
}

impl Program {
    pub fn new(query: Query, budget: u64) -> Arc<Program> {
        let mut index = HashMap::new();
        for (i, o) in query.operators.iter().enumerate() {
            index.entry(o.name.clone()).or_insert(i);
        }
        Arc::new(Program { query, index, budget })
    }

    fn op(&self, c: &Call) -> Result<usize, QueryError> {
        self.index.get(&c.name).copied().ok_or_else(|| QueryError::Runtime {
            pos: c.pos,
            message: format!("undefined operator `{}`", c.name),
        })
    }
}

/// Parameter bindings of one activation.
#[derive(Debug, Clone)]
pub struct Env<'p> {
    names: &'p [String],
    values: Vec<Value>,
}

impl<'p> Env<'p> {
    pub fn new(names: &'p [String], values: Vec<Value>) -> Self {
        Env { names, values }
    }

    fn get(&self, name: &str) -> Option<&Value> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }
}

/// Result of evaluating a target until it either yields or requests a step.
#[derive(Debug)]
pub enum Outcome {
    Value(Value),
    /// Advance the simulation once, then evaluate operator `op` on `args`.
    Next { op: usize, args: Vec<Value>, pos: Pos },
}

/// A suspended target evaluation waiting for the next simulation state.
#[derive(Debug)]
pub struct Pending {
    pub op: usize,
    pub args: Vec<Value>,
    pub unfolds: u64,
    pub pos: Pos,
}

/// Evaluates expressions against one simulator handle, caching probes.
pub struct Evaluator<'p> {
    prog: &'p Program,
    probes: HashMap<String, Probe>,
}

impl<'p> Evaluator<'p> {
    pub fn new(prog: &'p Program) -> Self {
        Evaluator { prog, probes: HashMap::new() }
    }

    /// Starts evaluating `expr`; stops at the first value or `next`.
    pub fn start(
        &mut self,
        sim: &mut dyn Simulator,
        expr: &'p Expr,
        env: Env<'p>,
        unfolds: &mut u64,
    ) -> Result<Outcome, QueryError> {
        self.run(sim, expr, env, unfolds, 0)
    }

    /// Continues a suspended evaluation in the current (already advanced) state.
    pub fn resume(&mut self, sim: &mut dyn Simulator, p: Pending) -> Result<(Outcome, u64), QueryError> {
        let mut unfolds = p.unfolds;
        let prog: &'p Program = self.prog;
        let op = &prog.query.operators[p.op];
        self.unfold(sim, op, p.pos, &mut unfolds)?;
        let out = self.run(sim, &op.body, Env::new(&op.params, p.args), &mut unfolds, 0)?;
        Ok((out, unfolds))
    }

    /// Drives `expr` to a value, stepping the simulator at each `next`.
    pub fn evaluate(&mut self, sim: &mut dyn Simulator, expr: &'p Expr, env: Env<'p>) -> Result<f64, QueryError> {
        let mut unfolds = 0;
        let mut out = self.start(sim, expr, env, &mut unfolds)?;
        loop {
            match out {
                Outcome::Value(v) => return as_number(v, Pos::default()),
                Outcome::Next { op, args, pos } => {
                    sim.next()?;
                    let (o, u) = self.resume(sim, Pending { op, args, unfolds, pos })?;
                    out = o;
                    unfolds = u;
                }
            }
        }
    }

    fn unfold(&self, sim: &dyn Simulator, op: &OpDef, _pos: Pos, unfolds: &mut u64) -> Result<(), QueryError> {
        *unfolds += 1;
        if *unfolds > self.prog.budget {
            return Err(QueryError::Budget {
                operator: op.name.clone(),
                budget: self.prog.budget,
                steps: sim.step_count(),
            });
        }
        Ok(())
    }

    fn run(
        &mut self,
        sim: &mut dyn Simulator,
        mut expr: &'p Expr,
        mut env: Env<'p>,
        unfolds: &mut u64,
        depth: usize,
    ) -> Result<Outcome, QueryError> {
        loop {
            match expr {
                Expr::If { lhs, op, rhs, then, els, pos } => {
                    let l = self.value(sim, lhs, &env, unfolds, depth)?;
                    let r = self.value(sim, rhs, &env, unfolds, depth)?;
                    expr = if compare(&l, *op, &r, *pos)? { then } else { els };
                }
                Expr::Call(c) => {
                    let args = self.args(sim, &c.args, &env, unfolds, depth)?;
                    let prog: &'p Program = self.prog;
                    let op = &prog.query.operators[prog.op(c)?];
                    self.unfold(sim, op, c.pos, unfolds)?;
                    env = Env::new(&op.params, args);
                    expr = &op.body;
                }
                Expr::Next(c, pos) => {
                    let args = self.args(sim, &c.args, &env, unfolds, depth)?;
                    return Ok(Outcome::Next { op: self.prog.op(c)?, args, pos: *pos });
                }
                other => return Ok(Outcome::Value(self.value(sim, other, &env, unfolds, depth)?)),
            }
        }
    }

    fn args(
        &mut self,
        sim: &mut dyn Simulator,
        args: &'p [Expr],
        env: &Env<'p>,
        unfolds: &mut u64,
        depth: usize,
    ) -> Result<Vec<Value>, QueryError> {
        args.iter().map(|a| self.value(sim, a, env, unfolds, depth)).collect()
    }

    fn value(
        &mut self,
        sim: &mut dyn Simulator,
        expr: &'p Expr,
        env: &Env<'p>,
        unfolds: &mut u64,
        depth: usize,
    ) -> Result<Value, QueryError> {
        match expr {
            Expr::Num(x) => Ok(Value::Num(*x)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Var(n, pos) => env.get(n).cloned().ok_or_else(|| QueryError::Runtime {
                pos: *pos,
                message: format!("unbound identifier `{n}`"),
            }),
            Expr::Observe(a, pos) => {
                let name = observable_name(&self.value(sim, a, env, unfolds, depth)?);
                let probe = match self.probes.get(&name) {
                    Some(&p) => p,
                    None => {
                        let id = ObservableId::new(name.clone()).map_err(|e| QueryError::Runtime {
                            pos: *pos,
                            message: e.to_string(),
                        })?;
                        let p = sim.resolve(&id)?;
                        self.probes.insert(name, p);
                        p
                    }
                };
                Ok(Value::Num(sim.read(probe)?))
            }
            Expr::Bin(op, a, b) => {
                let x = as_number(self.value(sim, a, env, unfolds, depth)?, expr_pos(expr))?;
                let y = as_number(self.value(sim, b, env, unfolds, depth)?, expr_pos(expr))?;
                Ok(Value::Num(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                }))
            }
            Expr::Neg(a) => Ok(Value::Num(-as_number(self.value(sim, a, env, unfolds, depth)?, expr_pos(expr))?)),
            Expr::Call(_) | Expr::If { .. } | Expr::Next(..) => {
                if depth >= MAX_NESTING {
                    return Err(QueryError::Runtime {
                        pos: expr_pos(expr),
                        message: format!("operator calls nested deeper than {MAX_NESTING} outside tail position"),
                    });
                }
                match self.run(sim, expr, env.clone(), unfolds, depth + 1)? {
                    Outcome::Value(v) => Ok(v),
                    Outcome::Next { pos, .. } => Err(QueryError::Runtime {
                        pos,
                        message: "`next` reached outside tail position".into(),
                    }),
                }
            }
        }
    }
}

fn expr_pos(e: &Expr) -> Pos {
    match e {
        Expr::Var(_, p) | Expr::Observe(_, p) | Expr::Next(_, p) | Expr::If { pos: p, .. } => *p,
        Expr::Call(c) => c.pos,
        Expr::Bin(_, a, _) | Expr::Neg(a) => expr_pos(a),
        Expr::Num(_) | Expr::Str(_) => Pos::default(),
    }
}

fn as_number(v: Value, pos: Pos) -> Result<f64, QueryError> {
    match v {
        Value::Num(x) => Ok(x),
        other => Err(QueryError::Runtime { pos, message: format!("expected a number, found {}", other.describe()) }),
    }
}

fn compare(l: &Value, op: CmpOp, r: &Value, pos: Pos) -> Result<bool, QueryError> {
    match (l, r) {
        (Value::Num(a), Value::Num(b)) => Ok(match op {
            CmpOp::Eq => a == b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }),
        (Value::Str(a), Value::Str(b)) if op == CmpOp::Eq => Ok(a == b),
        _ => Err(QueryError::Runtime {
            pos,
            message: format!("cannot compare {} with {} using `{}`", l.describe(), r.describe(), op.symbol()),
        }),
    }
}

impl From<QueryError> for SimError {
    fn from(e: QueryError) -> SimError {
        match e {
            QueryError::Sim(s) => s,
            other => SimError::Model(other.to_string()),
        }
    }
}
