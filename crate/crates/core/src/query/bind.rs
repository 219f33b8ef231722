use std::sync::Arc;

use super::ast::*;
use super::check::range_var;
use super::eval::{Env, Evaluator, Outcome, Pending, Program};
use super::QueryError;
use crate::sim::{ObservableId, Probe, SimError, Simulator};
use crate::transient::{CellKey, CellSampler};

/// Compact label of a target: its canonical text without whitespace.
pub fn target_label(e: &Expr) -> String {
    e.to_string().chars().filter(|c| !c.is_whitespace()).collect()
}

/// The transient cells of an autoIR command: one per (target, range value).
pub struct QueryCells {
    program: Arc<Program>,
    command: usize,
    range_var: Option<Vec<String>>,
    cells: Vec<CellKey>,
    /// Per cell: target index and range value.
    slots: Vec<(usize, u64)>,
}

impl QueryCells {
    pub fn program(&self) -> &Program {
        &self.program
    }

    fn targets(&self) -> &[Expr] {
        &self.program.query.commands[self.command].targets
    }
}

impl CellSampler for QueryCells {
    fn cells(&self) -> &[CellKey] {
        &self.cells
    }

    fn sample(
        &self,
        sim: &mut dyn Simulator,
        seed: u64,
        _horizon: u64,
        active: &[bool],
    ) -> Result<Vec<f64>, SimError> {
        sim.reset(seed)?;
        let mut ev = Evaluator::new(&self.program);
        let mut out = vec![f64::NAN; self.cells.len()];
        let mut pending: Vec<(usize, Pending)> = Vec::new();
        let names: &[String] = self.range_var.as_deref().unwrap_or(&[]);
        for (c, &(target, t)) in self.slots.iter().enumerate() {
            if !active[c] {
                continue;
            }
            let values = if names.is_empty() { vec![] } else { vec![super::eval::Value::Num(t as f64)] };
            let mut unfolds = 0;
            match ev.start(sim, &self.targets()[target], Env::new(names, values), &mut unfolds)? {
                Outcome::Value(v) => out[c] = number(v)?,
                Outcome::Next { op, args, pos } => pending.push((c, Pending { op, args, unfolds, pos })),
            }
        }
        while !pending.is_empty() {
            sim.next()?;
            let mut still = Vec::with_capacity(pending.len());
            for (c, p) in pending {
                match ev.resume(sim, p)? {
                    (Outcome::Value(v), _) => out[c] = number(v)?,
                    (Outcome::Next { op, args, pos }, unfolds) => still.push((c, Pending { op, args, unfolds, pos })),
                }
            }
            pending = still;
        }
        Ok(out)
    }
}

fn number(v: super::eval::Value) -> Result<f64, SimError> {
    match v {
        super::eval::Value::Num(x) => Ok(x),
        super::eval::Value::Str(s) => Err(SimError::Model(format!("query target produced string {s:?}, expected a number"))),
    }
}

/// Steady-state targets that are not plain observables, exposed as derived
/// observables named by their labels.
#[derive(Clone)]
pub struct DerivedTargets {
    program: Arc<Program>,
    command: usize,
    /// (label, target index)
    items: Vec<(String, usize)>,
}

impl DerivedTargets {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(l, _)| l.as_str())
    }

    /// Wraps a simulator so the derived observables can be resolved on it.
    pub fn wrap(&self, inner: Box<dyn Simulator>) -> Box<dyn Simulator> {
        Box::new(DerivedSim { inner, targets: self.clone(), probes: Vec::new() })
    }
}

const DERIVED_BASE: usize = usize::MAX / 2;

struct DerivedSim {
    inner: Box<dyn Simulator>,
    targets: DerivedTargets,
    /// Probe cache of the inner simulator, keyed by observable name.
    probes: Vec<(String, Probe)>,
}

impl Simulator for DerivedSim {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.inner.reset(seed)
    }

    fn next(&mut self) -> Result<(), SimError> {
        self.inner.next()
    }

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        match self.targets.items.iter().position(|(l, _)| l == obs.as_str()) {
            Some(k) => Ok(Probe(DERIVED_BASE + k)),
            None => self.inner.resolve(obs),
        }
    }

    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        if probe.0 < DERIVED_BASE {
            return self.inner.read(probe);
        }
        let (_, target) = self.targets.items[probe.0 - DERIVED_BASE];
        let prog = self.targets.program.clone();
        let expr = &prog.query.commands[self.targets.command].targets[target];
        let mut ev = Evaluator::new(&prog);
        let mut unfolds = 0;
        let mut inner = CachingSim { inner: &mut *self.inner, probes: &mut self.probes };
        match ev.start(&mut inner, expr, Env::new(&[], vec![]), &mut unfolds)? {
            Outcome::Value(v) => number(v),
            Outcome::Next { .. } => Err(SimError::Model("derived observable attempted a simulation step".into())),
        }
    }

    fn step_count(&self) -> u64 {
        self.inner.step_count()
    }
}

/// Keeps inner probes across derived reads so names resolve once per handle.
struct CachingSim<'a> {
    inner: &'a mut dyn Simulator,
    probes: &'a mut Vec<(String, Probe)>,
}

impl Simulator for CachingSim<'_> {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.inner.reset(seed)
    }

    fn next(&mut self) -> Result<(), SimError> {
        Err(SimError::Model("derived observable attempted a simulation step".into()))
    }

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        if let Some((_, p)) = self.probes.iter().find(|(n, _)| n == obs.as_str()) {
            return Ok(*p);
        }
        let p = self.inner.resolve(obs)?;
        self.probes.push((obs.to_string(), p));
        Ok(p)
    }

    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        self.inner.read(probe)
    }

    fn step_count(&self) -> u64 {
        self.inner.step_count()
    }
}

/// What a bound steady-state command asks for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteadyCommand {
    Warmup,
    AutoBm,
    AutoRd,
    ManualRd { w: u64, m: u64 },
    ManualBm { w: u64 },
}

pub enum QueryAnalysis {
    Transient(QueryCells),
    Steady { command: SteadyCommand, observables: Vec<ObservableId>, derived: Option<DerivedTargets> },
}

impl std::fmt::Debug for QueryAnalysis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryAnalysis::Transient(c) => write!(f, "Transient({} cells)", c.cells.len()),
            QueryAnalysis::Steady { command, observables, .. } => {
                write!(f, "Steady({command:?}, {observables:?})")
            }
        }
    }
}

fn bind_err<T>(msg: impl Into<String>) -> Result<T, QueryError> {
    Err(QueryError::Bind(msg.into()))
}

fn count_arg(x: f64, what: &str) -> Result<u64, QueryError> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= (1u64 << 53) as f64 {
        Ok(x as u64)
    } else {
        bind_err(format!("{what} must be a non-negative integer, got {x}"))
    }
}

/// Expands the range `from..=to` by `step`.
pub fn expand_range(from: f64, step: f64, to: f64) -> Result<Vec<u64>, QueryError> {
    if step == 0.0 {
        return bind_err("range step must not be 0");
    }
    if from > to {
        return bind_err(format!("empty range: from {from} exceeds to {to}"));
    }
    let (from, step, to) = (count_arg(from, "range start")?, count_arg(step, "range step")?, count_arg(to, "range end")?);
    Ok((from..=to).step_by(step as usize).collect())
}

/// Chooses one eval command: the only one, or the one of kind `select`.
pub fn select_command(q: &Query, select: Option<CommandKind>) -> Result<usize, QueryError> {
    match select {
        Some(k) => match q.commands.iter().position(|c| c.kind == k) {
            Some(i) if q.commands.iter().filter(|c| c.kind == k).count() == 1 => Ok(i),
            Some(_) => bind_err(format!("query has several `{}` commands", k.keyword())),
            None => bind_err(format!("query has no `{}` command", k.keyword())),
        },
        None if q.commands.len() == 1 => Ok(0),
        None => {
            let names: Vec<_> = q.commands.iter().map(|c| c.kind.keyword()).collect();
            bind_err(format!("query has {} eval commands ({}); select one", names.len(), names.join(", ")))
        }
    }
}

/// Observable read directly by a target, if the target is exactly an
/// observation (possibly through one operator call).
fn direct_observable(q: &Query, e: &Expr) -> Option<String> {
    let lit = |e: &Expr| match e {
        Expr::Str(s) => Some(super::eval::observable_name(&super::eval::Value::Str(s.clone()))),
        Expr::Num(x) => Some(super::eval::observable_name(&super::eval::Value::Num(*x))),
        _ => None,
    };
    match e {
        Expr::Observe(a, _) => lit(a),
        Expr::Call(c) => {
            let op = q.operator(&c.name)?;
            match &op.body {
                Expr::Observe(a, _) => match &**a {
                    Expr::Var(p, _) => {
                        let k = op.params.iter().position(|x| x == p)?;
                        lit(&c.args[k])
                    }
                    other => lit(other),
                },
                _ => None,
            }
        }
        _ => None,
    }
}

/// Turns the selected eval command of a checked query into an analysis.
pub fn bind_query(query: Query, select: Option<CommandKind>, budget: u64) -> Result<QueryAnalysis, QueryError> {
    let ci = select_command(&query, select)?;
    let cmd = query.commands[ci].clone();
    let nums: Vec<f64> = cmd
        .tail
        .iter()
        .filter_map(|a| match a {
            TailArg::Num(x, _) => Some(*x),
            TailArg::Ident(..) => None,
        })
        .collect();
    let labels: Vec<String> = cmd.targets.iter().map(target_label).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return bind_err(format!("target `{l}` appears more than once"));
        }
    }
    if cmd.kind == CommandKind::AutoIr {
        let (range_var, times) = match range_var(&cmd) {
            Some(v) => (Some(vec![v.to_string()]), expand_range(nums[0], nums[1], nums[2])?),
            None => (None, vec![0]),
        };
        let cells = labels
            .iter()
            .flat_map(|l| times.iter().map(move |&t| CellKey { label: l.clone(), time: t }))
            .collect();
        let slots = (0..labels.len()).flat_map(|k| times.iter().map(move |&t| (k, t))).collect();
        return Ok(QueryAnalysis::Transient(QueryCells {
            program: Program::new(query, budget),
            command: ci,
            range_var,
            cells,
            slots,
        }));
    }
    let command = match cmd.kind {
        CommandKind::Warmup => SteadyCommand::Warmup,
        CommandKind::AutoBm => SteadyCommand::AutoBm,
        CommandKind::AutoRd => SteadyCommand::AutoRd,
        CommandKind::ManualRd => SteadyCommand::ManualRd {
            w: count_arg(nums[0], "warmup length")?,
            m: count_arg(nums[1], "horizon")?,
        },
        CommandKind::ManualBm => SteadyCommand::ManualBm { w: count_arg(nums[0], "warmup length")? },
        CommandKind::AutoIr => unreachable!(),
    };
    let mut observables = Vec::new();
    let mut items = Vec::new();
    for (k, t) in cmd.targets.iter().enumerate() {
        let name = match direct_observable(&query, t) {
            Some(n) => n,
            None => {
                items.push((labels[k].clone(), k));
                labels[k].clone()
            }
        };
        let id = ObservableId::new(name).map_err(|e| QueryError::Bind(e.to_string()))?;
        if observables.contains(&id) {
            return bind_err(format!("observable `{id}` is targeted more than once"));
        }
        observables.push(id);
    }
    let derived = (!items.is_empty()).then(|| DerivedTargets { program: Program::new(query, budget), command: ci, items });
    Ok(QueryAnalysis::Steady { command, observables, derived })
}
