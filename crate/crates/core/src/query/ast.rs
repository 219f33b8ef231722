use serde::{Deserialize, Serialize};

/// 1-based source position. Positions never affect AST equality, so a
/// reparsed pretty-print compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub name: String,
    pub args: Vec<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Str(String),
    Var(String, Pos),
    /// `s.eval(arg)`: an observation of the current state.
    Observe(Box<Expr>, Pos),
    Call(Call),
    /// `next(call)`: one simulation step, then `call` in the new state.
    Next(Call, Pos),
    If {
        lhs: Box<Expr>,
        op: CmpOp,
        rhs: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
        pos: Pos,
    },
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    AutoIr,
    Warmup,
    AutoBm,
    AutoRd,
    ManualRd,
    ManualBm,
}

impl CommandKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CommandKind::AutoIr => "autoIR",
            CommandKind::Warmup => "warmup",
            CommandKind::AutoBm => "autoBM",
            CommandKind::AutoRd => "autoRD",
            CommandKind::ManualRd => "manualRD",
            CommandKind::ManualBm => "manualBM",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        [
            CommandKind::AutoIr,
            CommandKind::Warmup,
            CommandKind::AutoBm,
            CommandKind::AutoRd,
            CommandKind::ManualRd,
            CommandKind::ManualBm,
        ]
        .into_iter()
        .find(|k| k.keyword().eq_ignore_ascii_case(s))
    }

    pub fn is_steady(self) -> bool {
        self != CommandKind::AutoIr
    }
}

/// Trailing argument of an eval command (range variable or number).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TailArg {
    Ident(String, Pos),
    Num(f64, Pos),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCommand {
    pub kind: CommandKind,
    /// The expressions inside `E[ ... ]`.
    pub targets: Vec<Expr>,
    pub tail: Vec<TailArg>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub operators: Vec<OpDef>,
    pub commands: Vec<EvalCommand>,
}

impl Query {
    pub fn operator(&self, name: &str) -> Option<&OpDef> {
        self.operators.iter().find(|o| o.name == name)
    }
}
